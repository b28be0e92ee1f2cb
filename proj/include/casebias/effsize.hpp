#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "casebias/decomposition.hpp"
#include "casebias/error.hpp"
#include "casebias/population.hpp"

namespace casebias {

struct EffSizeScenario {
    double ybar = 0.0;
    double M = 1.0;
    double f = 0.0;
    std::optional<MeasurementModel> meas;

    SelectionModel selection() const { return SelectionModel::from_f_M(f, M, ybar); }
    double delta() const { return selection().delta(); }
    MeasurementModel measurement() const { return meas.value_or(MeasurementModel{}); }
};

/// Data quality of a binary outcome under differential testing.
inline double binary_rho(double delta, double ybar, double f) {
    detail::require_open_unit(ybar, "ybar");
    detail::require_open_unit(f, "f");
    detail::require(std::isfinite(delta) && delta >= -1.0 && delta <= 1.0, "delta must lie in [-1,1]");
    return delta * std::sqrt(ybar * (1.0 - ybar) / (f * (1.0 - f)));
}

struct NeffResult {
    double value = 0.0;  // +inf when the bound is unbounded
    bool infinite = false;
    double rho = 0.0;
    double d_m = 1.0;
};

/// f/(1−f) / (ρ·D_M)², with E[ρ²] replaced by the squared analytic ρ.
inline NeffResult neff_bound(const EffSizeScenario& s) {
    const SelectionModel sel = s.selection();
    NeffResult r;
    r.rho = binary_rho(sel.delta(), s.ybar, s.f);
    r.d_m = s.meas ? d_m(sel, *s.meas, s.ybar) : 1.0;
    const double q = r.rho * r.d_m;
    if (q == 0.0) {
        r.infinite = true;
        r.value = std::numeric_limits<double>::infinity();
    } else {
        r.value = s.f / (1.0 - s.f) / (q * q);
    }
    return r;
}

enum class Rounding { Nearest, Floor };

struct NeffTable {
    std::vector<double> ybar_grid;
    std::vector<double> M_grid;
    std::vector<std::vector<double>> raw;        // [ybar][M]
    std::vector<std::vector<double>> cells;      // integerized
    std::vector<std::vector<bool>> infinite;

    std::string to_csv() const;
};

inline NeffTable neff_table(const std::vector<double>& ybar_grid, const std::vector<double>& M_grid, double f,
                            const std::optional<MeasurementModel>& meas = std::nullopt,
                            Rounding rounding = Rounding::Nearest) {
    detail::require(!ybar_grid.empty() && !M_grid.empty(), "grids must be nonempty");
    NeffTable t;
    t.ybar_grid = ybar_grid;
    t.M_grid = M_grid;
    for (double y : ybar_grid) {
        std::vector<double> raw_row, cell_row;
        std::vector<bool> inf_row;
        for (double M : M_grid) {
            const NeffResult r = neff_bound(EffSizeScenario{y, M, f, meas});
            raw_row.push_back(r.value);
            inf_row.push_back(r.infinite);
            if (r.infinite)
                cell_row.push_back(r.value);
            else
                cell_row.push_back(rounding == Rounding::Nearest ? std::floor(r.value + 0.5) : std::floor(r.value));
        }
        t.raw.push_back(std::move(raw_row));
        t.cells.push_back(std::move(cell_row));
        t.infinite.push_back(std::move(inf_row));
    }
    return t;
}

namespace detail {

inline std::string fmt_label(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace detail

inline std::string NeffTable::to_csv() const {
    std::ostringstream os;
    os << "ybar";
    for (double M : M_grid) os << ',' << detail::fmt_label(M);
    os << '\n';
    for (std::size_t i = 0; i < ybar_grid.size(); ++i) {
        os << detail::fmt_label(ybar_grid[i]);
        for (std::size_t j = 0; j < M_grid.size(); ++j) {
            os << ',';
            if (infinite[i][j]) {
                os << "inf";
            } else {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.2f", cells[i][j]);
                os << buf;
            }
        }
        os << '\n';
    }
    return os.str();
}

/// MSE of a selected sample relative to an SRS of the same size: (N−1)E[ρ²].
inline double mse_vs_srs(std::uint64_t N, double exp_rho_sq) {
    detail::require(N >= 2, "N must be at least 2");
    detail::require(exp_rho_sq >= 0.0, "E[rho^2] must be nonnegative");
    return static_cast<double>(N - 1) * exp_rho_sq;
}

/// Candidate definitions of the MSE ratio with vs without misclassification.
/// x denotes the error without misclassification, k·ρ·σ_Y.
enum class MseDefinition {
    RawWithBias,        // ((x·meas_adjustment + E[PZ]) / x)²
    RawNoBias,          // meas_adjustment²
    CorrectedDm,        // D_M²
    CorrectedDmWithBias,// ((x·D_M + E[PZ]) / x)²
    ExactRaw,           // squared exact population-level error of ȳ*, over x²
    ExactFirstOrder,    // same for the first-order corrected estimator
};

inline const char* to_string(MseDefinition d) {
    switch (d) {
        case MseDefinition::RawWithBias: return "raw_with_bias";
        case MseDefinition::RawNoBias: return "raw_no_bias";
        case MseDefinition::CorrectedDm: return "corrected_dm";
        case MseDefinition::CorrectedDmWithBias: return "corrected_dm_with_bias";
        case MseDefinition::ExactRaw: return "exact_raw";
        case MseDefinition::ExactFirstOrder: return "exact_first_order";
    }
    return "?";
}

inline constexpr MseDefinition kAllMseDefinitions[] = {
    MseDefinition::RawWithBias, MseDefinition::RawNoBias,  MseDefinition::CorrectedDm,
    MseDefinition::CorrectedDmWithBias, MseDefinition::ExactRaw, MseDefinition::ExactFirstOrder};

inline double relative_mse(const EffSizeScenario& with_meas, const EffSizeScenario& without,
                           MseDefinition def = MseDefinition::RawWithBias) {
    detail::require(with_meas.ybar == without.ybar && with_meas.f == without.f && with_meas.M == without.M,
                    "relative_mse scenarios must share ybar, f and M");
    detail::require(!without.meas || without.meas->perfect(), "reference scenario must have FP=FN=0");
    const MeasurementModel meas = with_meas.measurement();
    const SelectionModel sel = with_meas.selection();
    const double y = with_meas.ybar;
    const double x = detail::quantity_factor(with_meas.f) * binary_rho(sel.delta(), y, with_meas.f) *
                     std::sqrt(y * (1.0 - y));
    detail::require(x != 0.0, "relative MSE undefined when the error-free reference is zero (M = 1)");
    const double b = detail::pz_mean(y, meas);
    const auto sq = [](double v) { return v * v; };
    switch (def) {
        case MseDefinition::RawWithBias: return sq((x * meas_adjustment(sel, meas, y) + b) / x);
        case MseDefinition::RawNoBias: return sq(meas_adjustment(sel, meas, y));
        case MseDefinition::CorrectedDm: return sq(d_m(sel, meas, y));
        case MseDefinition::CorrectedDmWithBias: return sq((x * d_m(sel, meas, y) + b) / x);
        case MseDefinition::ExactRaw: return sq(expected_estimator_error(sel, meas, y, Estimator::Raw) / x);
        case MseDefinition::ExactFirstOrder:
            return sq(expected_estimator_error(sel, meas, y, Estimator::FirstOrder) / x);
    }
    return 0.0;
}

/// Bias² + delta-method variance of an estimator over a population of size N.
inline double expected_estimator_mse(const SelectionModel& sel, const MeasurementModel& meas, double ybar,
                                     std::uint64_t N, Estimator est = Estimator::Raw) {
    const double bias = expected_estimator_error(sel, meas, ybar, est);
    const double f = sel.f(ybar);
    const double mu = (sel.f1 * ybar * (1.0 - meas.fn) + sel.f0 * (1.0 - ybar) * meas.fp) / f;
    const double a1 = sel.f1 * ((1.0 - meas.fn) * (1.0 - mu) * (1.0 - mu) + meas.fn * mu * mu);
    const double b1 = sel.f1 * ((1.0 - meas.fn) - mu);
    const double a0 = sel.f0 * (meas.fp * (1.0 - mu) * (1.0 - mu) + (1.0 - meas.fp) * mu * mu);
    const double b0 = sel.f0 * (meas.fp - mu);
    const double var_raw = (ybar * (a1 - b1 * b1) + (1.0 - ybar) * (a0 - b0 * b0)) / (static_cast<double>(N) * f * f);
    double slope = 1.0;
    if (est == Estimator::FirstOrder) slope = 1.0 + meas.fp + meas.fn;
    if (est == Estimator::ExactInverse) slope = 1.0 / (1.0 - meas.fp - meas.fn);
    return bias * bias + slope * slope * var_raw;
}

/// Ratio of mean squared errors of ȳ* with and without misclassification,
/// estimated from paired draws sharing the selection indicators.
inline MCEstimate relative_mse_mc(const FinitePopulation& pop, const SelectionModel& sel,
                                  const MeasurementModel& meas, std::size_t replications, std::uint64_t seed) {
    detail::require(replications >= 2, "replications must be at least 2");
    const auto with = mc_replicate(pop, sel, meas, replications, seed);
    const auto without = mc_replicate(pop, sel, MeasurementModel{}, replications, seed);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < replications; ++i) {
        if (!with[i] || !without[i]) continue;
        a.push_back(with[i]->error() * with[i]->error());
        b.push_back(without[i]->error() * without[i]->error());
    }
    const std::size_t skipped = replications - a.size();
    if (2 * skipped > replications || a.size() < 2)
        throw Error(ErrorKind::Degenerate, "too many degenerate replications");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cab += (a[i] - ma) * (b[i] - mb);
    }
    va /= n - 1;
    vb /= n - 1;
    cab /= n - 1;
    const double r = ma / mb;
    const double var_r = (va / (mb * mb) + r * r * vb / (mb * mb) - 2.0 * r * cab / (mb * mb)) / n;
    MCEstimate e;
    e.mean = r;
    e.std_error = std::sqrt(std::max(0.0, var_r));
    e.replications = a.size();
    e.skipped = skipped;
    return e;
}

struct CapacityTradeoff {
    double mse_reduction = 0.0;        // 1 − MSE_after/MSE_before
    double naive_mse_reduction = 0.0;  // same with the change in D_M² removed
    double neff_factor = 0.0;          // n_eff after / before
    double naive_neff_factor = 0.0;    // same with D_M held at its before value
};

/// Effect of raising testing from f_before to f_after when misclassification
/// worsens at the same time. The rate differential Δ is held at its value
/// under (f_before, M); MSE is the squared ȳ* error including the E[PZ] term.
inline CapacityTradeoff capacity_tradeoff(double f_before, double f_after, const MeasurementModel& meas_before,
                                          const MeasurementModel& meas_after, double ybar, double M) {
    const SelectionModel before = SelectionModel::from_f_M(f_before, M, ybar);
    const double delta = before.delta();
    detail::require_open_unit(f_after, "f_after");
    const double f0_after = f_after - delta * ybar;
    const SelectionModel after{f0_after, f0_after + delta};
    after.validate();

    struct Side {
        double mse, dm, neff;
    };
    const auto eval = [&](const SelectionModel& sel, double f, const MeasurementModel& meas) {
        const double rho = binary_rho(delta, ybar, f);
        const double x = detail::quantity_factor(f) * rho * std::sqrt(ybar * (1.0 - ybar));
        const AdjustmentFactors adj = adjustment_factors(sel, meas, ybar);
        const double e = x * adj.meas_adjustment + detail::pz_mean(ybar, meas);
        const double q = rho * adj.d_m;
        return Side{e * e, adj.d_m, f / (1.0 - f) / (q * q)};
    };
    const Side b = eval(before, f_before, meas_before);
    const Side a = eval(after, f_after, meas_after);
    const double dm_ratio_sq = (a.dm / b.dm) * (a.dm / b.dm);
    CapacityTradeoff out;
    out.mse_reduction = 1.0 - a.mse / b.mse;
    out.naive_mse_reduction = 1.0 - (a.mse / b.mse) / dm_ratio_sq;
    out.neff_factor = a.neff / b.neff;
    out.naive_neff_factor = out.neff_factor * dm_ratio_sq;
    return out;
}

}  // namespace casebias
