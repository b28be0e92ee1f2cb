#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "casebias/decomposition.hpp"
#include "casebias/effsize.hpp"
#include "casebias/epidemic.hpp"
#include "casebias/error.hpp"
#include "casebias/estimators.hpp"

namespace casebias {

struct PopulationSummary {
    double N = 0.0;
    double f = 0.0;
    double ybar_hat = 0.0;  // observed (adjusted) prevalence
    double ybar = 0.0;      // true prevalence, used by the count decompositions
    double rho = 0.0;
    double d_m = 1.0;
    double sigma_y = 0.0;

    void validate() const {
        detail::require(N >= 2.0, "population size must be at least 2");
        detail::require_open_unit(f, "f");
    }
};

struct ZScore {
    double z = 0.0;          // (ȳ1 − ȳ2)/sqrt(V_SRS)
    double z_analytic = 0.0; // selection-error numerator over the same denominator, Ȳ1 = Ȳ2
    double v_srs = 0.0;
};

/// Classical two-sample Z-score. sigma defaults to the pooled
/// sqrt(ȳ(1−ȳ)) of the two observed prevalences.
inline ZScore prevalence_z(const PopulationSummary& a, const PopulationSummary& b,
                           std::optional<double> sigma = std::nullopt) {
    a.validate();
    b.validate();
    const double ka = detail::quantity_factor(a.f), kb = detail::quantity_factor(b.f);
    double s = 0.0;
    if (sigma) {
        s = *sigma;
    } else {
        const double pooled = 0.5 * (a.ybar_hat + b.ybar_hat);
        s = std::sqrt(pooled * (1.0 - pooled));
    }
    detail::require(s > 0.0, "null standard deviation must be positive");
    ZScore z;
    z.v_srs = s * s * (ka * ka / (a.N - 1.0) + kb * kb / (b.N - 1.0));
    z.z = (a.ybar_hat - b.ybar_hat) / std::sqrt(z.v_srs);
    z.z_analytic = (a.rho * a.d_m * ka - b.rho * b.d_m * kb) * s / std::sqrt(z.v_srs);
    return z;
}

/// sqrt((N1−1)(N2−1)/(N1+N2)), as used in the equal-fraction simplification.
inline double population_adjustment(double N1, double N2) {
    detail::require(N1 >= 2.0 && N2 >= 2.0, "population sizes must be at least 2");
    return std::sqrt((N1 - 1.0) * (N2 - 1.0) / (N1 + N2));
}

/// Factor that makes the equal-fraction simplification exact:
/// sqrt((N1−1)(N2−1)/(N1+N2−2)).
inline double population_adjustment_exact(double N1, double N2) {
    detail::require(N1 >= 2.0 && N2 >= 2.0, "population sizes must be at least 2");
    return std::sqrt((N1 - 1.0) * (N2 - 1.0) / (N1 + N2 - 2.0));
}

/// Largest |Δ1 − Δ2| keeping |Z| below 1 when f and Ȳ are shared.
inline double delta_gap_threshold(double N1, double N2, double f, double ybar) {
    detail::require_open_unit(f, "f");
    detail::require_open_unit(ybar, "ybar");
    return std::sqrt(f * (1.0 - f) / (ybar * (1.0 - ybar))) / population_adjustment(N1, N2);
}

inline double z_eff(double ybar1, double ybar2, double neff1, double neff2, double f, double sigma_y) {
    detail::require(neff1 > 1.0 && neff2 > 1.0, "effective sample sizes must exceed 1");
    detail::require_open_unit(f, "f");
    detail::require(sigma_y > 0.0, "sigma_y must be positive");
    const double denom = (1.0 - f) / f * sigma_y * std::sqrt(1.0 / (neff1 - 1.0) + 1.0 / (neff2 - 1.0));
    return (ybar1 - ybar2) / denom;
}

struct DiffError {
    double selection_term = 0.0;
    double scale_term = 0.0;
};

/// Error of a raw case-count difference y1 − y2 given sample sizes n1, n2.
inline DiffError count_diff_error(const PopulationSummary& a, const PopulationSummary& b, double n1, double n2) {
    a.validate();
    b.validate();
    DiffError e;
    e.selection_term = n1 * a.sigma_y * a.rho * detail::quantity_factor(a.f) * a.d_m -
                       n2 * b.sigma_y * b.rho * detail::quantity_factor(b.f) * b.d_m;
    e.scale_term = a.f * a.ybar * a.N - b.f * b.ybar * b.N;
    return e;
}

/// Error of the per-capita difference y1/N1 − y2/N2.
inline DiffError percapita_diff_error(const PopulationSummary& a, const PopulationSummary& b) {
    a.validate();
    b.validate();
    DiffError e;
    e.selection_term = a.sigma_y * a.rho * std::sqrt(a.f * (1.0 - a.f)) * a.d_m -
                       b.sigma_y * b.rho * std::sqrt(b.f * (1.0 - b.f)) * b.d_m;
    e.scale_term = a.f * a.ybar - b.f * b.ybar;
    return e;
}

struct GapPoint {
    std::size_t step = 0;  // steps since each series' first case
    std::optional<double> true_rt_a, true_rt_b, est_rt_a, est_rt_b;
    std::optional<double> true_gap, est_gap;
    bool infeasible = false;  // some 1 + e ≤ 0
};

struct RtGapOptions {
    double serial_interval = 7.0;
};

namespace detail {

inline std::size_t first_case(const std::vector<double>& K) {
    for (std::size_t t = 0; t < K.size(); ++t)
        if (K[t] > 0.0) return t;
    return K.size();
}

// Relative change error of observed new cases, per step of the aligned series.
inline std::vector<std::optional<double>> incidence_errors(const std::vector<double>& k, double f,
                                                           const MeasurementModel& meas, double M) {
    std::vector<std::optional<PeriodQuality>> q(k.size());
    for (std::size_t t = 0; t < k.size(); ++t)
        if (k[t] > 0.0 && k[t] < 1.0) q[t] = period_quality(k[t], f, M, meas);
    std::vector<std::optional<double>> e(k.size());
    for (std::size_t t = 1; t < k.size(); ++t)
        if (q[t] && q[t - 1]) e[t] = relative_change_error({*q[t - 1], *q[t]});
    return e;
}

}  // namespace detail

/// True and estimated R_t for two epidemics aligned at their first case.
inline std::vector<GapPoint> rt_gap(const SirTrajectory& a, const SirTrajectory& b, double f,
                                    const MeasurementModel& meas, double M, RtGapOptions opt = {}) {
    detail::require_open_unit(f, "f");
    meas.validate();
    const auto align = [](const SirTrajectory& tr) {
        const std::vector<double> k = tr.incidence();
        return std::vector<double>(k.begin() + static_cast<std::ptrdiff_t>(detail::first_case(k)), k.end());
    };
    const std::vector<double> ka = align(a), kb = align(b);
    const std::size_t len = std::min(ka.size(), kb.size());
    const auto ra = true_rt(ka, opt.serial_interval), rb = true_rt(kb, opt.serial_interval);
    const auto ea = detail::incidence_errors(ka, f, meas, M), eb = detail::incidence_errors(kb, f, meas, M);

    std::vector<GapPoint> out;
    for (std::size_t t = 1; t < len; ++t) {
        GapPoint p;
        p.step = t;
        p.true_rt_a = ra[t];
        p.true_rt_b = rb[t];
        const auto estimate = [&](const std::optional<double>& r, const std::optional<double>& e)
            -> std::optional<double> {
            if (!r || !e) return std::nullopt;
            const RtError err = rt_error_from_e(*e, 1.0, opt.serial_interval);
            if (!err.feasible) {
                p.infeasible = true;
                return std::nullopt;
            }
            return *r + err.value;
        };
        p.est_rt_a = estimate(ra[t], ea[t]);
        p.est_rt_b = estimate(rb[t], eb[t]);
        if (p.true_rt_a && p.true_rt_b) p.true_gap = *p.true_rt_a - *p.true_rt_b;
        if (p.est_rt_a && p.est_rt_b) p.est_gap = *p.est_rt_a - *p.est_rt_b;
        out.push_back(p);
    }
    return out;
}

inline std::string rt_gap_csv(const std::vector<GapPoint>& gap) {
    std::ostringstream os;
    os.precision(6);
    os << "step,true_rt_A,true_rt_B,est_rt_A,est_rt_B,true_gap,est_gap\n";
    const auto put = [&](const std::optional<double>& v) {
        if (v) os << *v;
    };
    for (const auto& p : gap) {
        os << p.step << ',';
        put(p.true_rt_a);
        os << ',';
        put(p.true_rt_b);
        os << ',';
        put(p.est_rt_a);
        os << ',';
        put(p.est_rt_b);
        os << ',';
        put(p.true_gap);
        os << ',';
        put(p.est_gap);
        os << '\n';
    }
    return os.str();
}

}  // namespace casebias
