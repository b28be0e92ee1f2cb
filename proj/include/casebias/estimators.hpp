#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "casebias/decomposition.hpp"
#include "casebias/effsize.hpp"
#include "casebias/epidemic.hpp"
#include "casebias/error.hpp"

namespace casebias {

/// Data quality, quantity and difficulty of one period.
struct PeriodQuality {
    double rho = 0.0;
    double d_m = 1.0;
    double f = 0.5;
    double cv = 0.0;    // σ/mean of the outcome
    double ybar = 0.0;  // prevalence, or new cases as a fraction of N

    /// Relative error of the period mean: ρ·D_M·sqrt((1−f)/f)·CV.
    double relative_error() const { return rho * d_m * detail::quantity_factor(f) * cv; }
};

struct TwoPeriodContext {
    PeriodQuality prev;  // period t−1
    PeriodQuality cur;   // period t
};

/// Period quality implied by differential testing at relative rate M.
inline PeriodQuality period_quality(double ybar, double f, double M, const MeasurementModel& meas) {
    const SelectionModel sel = SelectionModel::from_f_M(f, M, ybar);
    PeriodQuality q;
    q.rho = binary_rho(sel.delta(), ybar, f);
    q.d_m = d_m(sel, meas, ybar);
    q.f = f;
    q.cv = std::sqrt((1.0 - ybar) / ybar);
    q.ybar = ybar;
    return q;
}

/// Relative change error e_t = (a_t − a_{t−1})(1 − a_{t−1}), a = relative_error().
inline double relative_change_error(const TwoPeriodContext& ctx) {
    const double a_prev = ctx.prev.relative_error();
    return (ctx.cur.relative_error() - a_prev) * (1.0 - a_prev);
}

/// First-order bias of ȳ_t/ȳ_{t−1} as an estimate of Ȳ_t/Ȳ_{t−1}.
inline double ratio_bias(const TwoPeriodContext& ctx) {
    detail::require(ctx.prev.ybar > 0.0, "previous-period mean must be positive");
    return ctx.cur.ybar / ctx.prev.ybar * relative_change_error(ctx);
}

inline double rt_estimate(double ybar_t, double ybar_prev, double serial_interval) {
    detail::require(ybar_t > 0.0 && ybar_prev > 0.0, "rt_estimate needs positive inputs");
    detail::require(serial_interval > 0.0, "serial_interval must be positive");
    return 1.0 + std::log(ybar_t / ybar_prev) / serial_interval;
}

struct RtError {
    double value = 0.0;
    double e_t = 0.0;
    bool feasible = true;  // false when 1 + e_t ≤ 0
};

inline RtError rt_error_from_e(double e_t, double s_ratio, double serial_interval) {
    detail::require(serial_interval > 0.0, "serial_interval must be positive");
    detail::require(s_ratio > 0.0 && s_ratio <= 1.0, "s_ratio must lie in (0,1]");
    RtError r;
    r.e_t = e_t;
    if (1.0 + e_t <= 0.0) {
        r.feasible = false;
        r.value = std::nan("");
        return r;
    }
    r.value = (std::log1p(e_t) - std::log(s_ratio)) / serial_interval;
    return r;
}

/// Error of R̂_t built from observed new-case fractions.
inline RtError rt_error(const TwoPeriodContext& ctx, double s_ratio, double serial_interval) {
    return rt_error_from_e(relative_change_error(ctx), s_ratio, serial_interval);
}

struct BiasPoint {
    std::size_t step = 0;
    std::optional<double> ratio_bias;
    std::optional<double> rt_bias;
};

struct BiasCurve {
    double M = 1.0;
    std::vector<BiasPoint> points;
    std::size_t skipped_ratio = 0;
    std::size_t skipped_rt = 0;
    std::size_t infeasible_rt = 0;
};

struct BiasCurveOptions {
    double serial_interval = 7.0;
    bool exact_susceptible = false;  // use S_t/S_{t−1} instead of 1
};

/// Analytic ratio-bias (on prevalence I/N) and R_t-bias (on new cases K/N)
/// at every step of a trajectory, for each relative sampling rate in M_grid.
inline std::vector<BiasCurve> bias_curves(const SirTrajectory& traj, double f, const MeasurementModel& meas,
                                          const std::vector<double>& M_grid, BiasCurveOptions opt = {}) {
    detail::require_open_unit(f, "f");
    meas.validate();
    detail::require(!M_grid.empty(), "M grid must be nonempty");
    const std::vector<double> prev = traj.prevalence();
    const std::vector<double> inc = traj.incidence();
    const auto usable = [](double y) { return y > 0.0 && y < 1.0; };

    std::vector<BiasCurve> out;
    for (double M : M_grid) {
        BiasCurve c;
        c.M = M;
        const auto quality = [&](double y) -> std::optional<PeriodQuality> {
            if (!usable(y)) return std::nullopt;
            return period_quality(y, f, M, meas);
        };
        std::vector<std::optional<PeriodQuality>> qp(prev.size()), qk(inc.size());
        for (std::size_t t = 0; t < prev.size(); ++t) qp[t] = quality(prev[t]);
        for (std::size_t t = 0; t < inc.size(); ++t) qk[t] = quality(inc[t]);

        for (std::size_t t = 1; t < prev.size(); ++t) {
            BiasPoint p;
            p.step = t;
            if (qp[t] && qp[t - 1])
                p.ratio_bias = ratio_bias({*qp[t - 1], *qp[t]});
            else
                ++c.skipped_ratio;
            if (t < inc.size() && qk[t] && qk[t - 1]) {
                double s_ratio = 1.0;
                if (opt.exact_susceptible) s_ratio = std::min(1.0, traj.S[t] / traj.S[t - 1]);
                const RtError e = rt_error({*qk[t - 1], *qk[t]}, s_ratio, opt.serial_interval);
                if (e.feasible)
                    p.rt_bias = e.value;
                else
                    ++c.infeasible_rt;
            } else {
                ++c.skipped_rt;
            }
            c.points.push_back(p);
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline std::string bias_curves_csv(const std::vector<BiasCurve>& curves) {
    std::ostringstream os;
    os.precision(6);
    os << "step,M,ratio_bias,rt_bias\n";
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            os << p.step << ',' << c.M << ',';
            if (p.ratio_bias) os << *p.ratio_bias;
            os << ',';
            if (p.rt_bias) os << *p.rt_bias;
            os << '\n';
        }
    return os.str();
}

inline std::vector<double> exp_smooth(const std::vector<double>& series, double alpha = 0.3) {
    detail::require(!series.empty(), "series must be nonempty");
    detail::require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0,1]");
    std::vector<double> s(series.size());
    s[0] = series[0];
    for (std::size_t t = 1; t < series.size(); ++t) s[t] = alpha * series[t] + (1.0 - alpha) * s[t - 1];
    return s;
}

/// ρ·D_M as a function of the rate differential at fixed f and Ȳ, with
/// f0 = f − ΔȲ and f1 = f0 + Δ.
inline double rho_dm_forward(double delta, double f, double ybar, const MeasurementModel& meas) {
    const double f0 = f - delta * ybar;
    const SelectionModel sel{f0, f0 + delta};
    return binary_rho(delta, ybar, f) * d_m(sel, meas, ybar);
}

struct MeasRange {
    double fp_low = 0.0, fp_high = 0.0;
    double fn_low = 0.0, fn_high = 0.0;
};

struct SensitivityResult {
    double rho_dm = 0.0;
    double delta = 0.0;
    double M = 1.0;
    double ci_low = 1.0;
    double ci_high = 1.0;
    bool has_interval = false;
};

namespace detail {

struct DeltaSolution {
    double rho_dm, delta, M;
};

inline DeltaSolution solve_delta(double error, double f, double ybar, const MeasurementModel& meas) {
    require_open_unit(f, "f");
    require_open_unit(ybar, "ybar");
    meas.validate();
    const double target = std::sqrt(f / (1.0 - f)) * error / std::sqrt(ybar * (1.0 - ybar));
    if (target == 0.0) return {0.0, 0.0, 1.0};

    // Admissible Δ keeps f0 in (0,1] and f1 in [0,1].
    double lo = std::max(-f / (1.0 - ybar), -(1.0 - f) / ybar);
    double hi = std::min(f / ybar, (1.0 - f) / (1.0 - ybar));
    // The map is a downward parabola in Δ; keep its increasing branch.
    const double curvature = (ybar / (1.0 - ybar)) * flip_mass(ybar, meas) / f;
    if (curvature > 0.0) hi = std::min(hi, (1.0 + meas.fp + meas.fn) / (2.0 * curvature));
    const double shrink = 1e-12;
    lo += shrink * (hi - lo);
    hi -= shrink * (hi - lo);

    const auto g = [&](double d) { return rho_dm_forward(d, f, ybar, meas) - target; };
    constexpr int kChecks = 64;
    double last = g(lo);
    for (int i = 1; i <= kChecks; ++i) {
        const double v = g(lo + (hi - lo) * i / kChecks);
        if (v < last) throw Error(ErrorKind::Infeasible, "rho*D_M is not monotone on the admissible range");
        last = v;
    }
    const double g_lo = g(lo), g_hi = g(hi);
    if (g_lo > 0.0 || g_hi < 0.0)
        throw Error(ErrorKind::Infeasible, "no rate differential reproduces the observed error (target rho*D_M = " +
                                               std::to_string(target) + ")");
    std::uintmax_t iters = 200;
    const auto bracket = boost::math::tools::toms748_solve(g, lo, hi, g_lo, g_hi,
                                                           boost::math::tools::eps_tolerance<double>(50), iters);
    const double delta = 0.5 * (bracket.first + bracket.second);
    const double f0 = f - delta * ybar;
    return {target, delta, (f0 + delta) / f0};
}

inline std::vector<MeasurementModel> range_corners(const MeasRange& r) {
    return {{r.fp_low, r.fn_low}, {r.fp_low, r.fn_high}, {r.fp_high, r.fn_low}, {r.fp_high, r.fn_high}};
}

}  // namespace detail

/// Solves for the rate differential that explains the gap between observed
/// and survey prevalence; bounds on M come from re-solving at the corners of
/// the FP/FN ranges with the same error and anchor prevalence.
inline SensitivityResult estimate_relative_sampling(double survey_prev_adjusted, double observed_prev_adjusted,
                                                    double f, double ybar_anchor, const MeasurementModel& meas,
                                                    const std::optional<MeasRange>& ranges = std::nullopt) {
    detail::require_open_unit(survey_prev_adjusted, "survey prevalence");
    detail::require_open_unit(observed_prev_adjusted, "observed prevalence");
    const double error = observed_prev_adjusted - survey_prev_adjusted;
    const auto s = detail::solve_delta(error, f, ybar_anchor, meas);
    SensitivityResult r{s.rho_dm, s.delta, s.M, s.M, s.M, false};
    if (ranges) {
        r.has_interval = true;
        for (const auto& m : detail::range_corners(*ranges)) {
            const double M = detail::solve_delta(error, f, ybar_anchor, m).M;
            r.ci_low = std::min(r.ci_low, M);
            r.ci_high = std::max(r.ci_high, M);
        }
    }
    return r;
}

/// A representative survey anchoring the observed data.
struct SurveyAnchor {
    double survey_raw = 0.0;         // survey positive fraction before correction
    double observed_adjusted = 0.0;  // corrected prevalence from routine testing
    double f = 0.0;                  // sampling fraction of routine testing
};

/// Anchored inversion: for each (FP, FN) the survey value is re-corrected and
/// used both as Ȳ and as the reference, so the error moves with the rates.
inline SensitivityResult estimate_relative_sampling(const SurveyAnchor& a, const MeasurementModel& meas,
                                                    const std::optional<MeasRange>& ranges = std::nullopt) {
    const auto solve = [&](const MeasurementModel& m) {
        const CorrectedPrevalence y = corrected_prevalence(a.survey_raw, m, Correction::FirstOrder);
        if (y.clamped || y.value <= 0.0 || y.value >= 1.0)
            throw Error(ErrorKind::Infeasible, "corrected survey prevalence falls outside (0,1)");
        return detail::solve_delta(a.observed_adjusted - y.value, a.f, y.value, m);
    };
    const auto s = solve(meas);
    SensitivityResult r{s.rho_dm, s.delta, s.M, s.M, s.M, false};
    if (ranges) {
        r.has_interval = true;
        for (const auto& m : detail::range_corners(*ranges)) {
            const double M = solve(m).M;
            r.ci_low = std::min(r.ci_low, M);
            r.ci_high = std::max(r.ci_high, M);
        }
    }
    return r;
}

}  // namespace casebias
