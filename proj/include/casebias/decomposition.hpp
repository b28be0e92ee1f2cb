#pragma once

#include <algorithm>
#include <cmath>

#include "casebias/error.hpp"
#include "casebias/population.hpp"

namespace casebias {

/// ȳ* − Ȳ = sqrt((1−f)/f) · (data_quality_term + interaction_term + bias_term).
struct ErrorDecomposition {
    double data_quality_term = 0.0;  // ρ_IY σ_Y
    double interaction_term = 0.0;   // ρ_IPZ σ_PZ
    double bias_term = 0.0;          // sqrt(f/(1−f)) (FP − (FP+FN)Ȳ)
    double total_error = 0.0;
};

struct AdjustmentFactors {
    double meas_adjustment = 1.0;  // bracket for the uncorrected ȳ*
    double d_m = 1.0;              // bracket for the corrected ỹ
};

/// Inputs of the imperfect-testing decomposition when no realization is at hand.
struct AnalyticInputs {
    double ybar = 0.0;
    double f = 0.0;
    double rho_iy = 0.0;
    double sigma_y = 0.0;
    double rho_ipz = 0.0;
    double sigma_pz = 0.0;
    double fp = 0.0;
    double fn = 0.0;
};

namespace detail {

inline double quantity_factor(double f) {
    require_open_unit(f, "f");
    return std::sqrt((1.0 - f) / f);
}

// E[P] over the population: FP(1−Ȳ) + FN·Ȳ.
inline double flip_mass(double ybar, const MeasurementModel& m) { return m.fp * (1.0 - ybar) + m.fn * ybar; }

// E[PZ] over the population: FP − (FP+FN)Ȳ.
inline double pz_mean(double ybar, const MeasurementModel& m) { return m.fp - (m.fp + m.fn) * ybar; }

// Δ·(Ȳ/(1−Ȳ))·A/(f0(1−Ȳ)+f1Ȳ), shared by both adjustment brackets.
inline double adjustment_core(const SelectionModel& sel, const MeasurementModel& meas, double ybar) {
    sel.validate();
    meas.validate();
    require(std::isfinite(ybar) && ybar >= 0.0 && ybar < 1.0, "ybar must lie in [0,1)");
    const double f = sel.f(ybar);
    require(f > 0.0, "f0(1-ybar) + f1*ybar must be positive");
    return sel.delta() * (ybar / (1.0 - ybar)) * flip_mass(ybar, meas) / f;
}

inline double adjustment_core_M(double M, const MeasurementModel& meas, double ybar) {
    meas.validate();
    require(std::isfinite(M) && M > 0.0, "M must be positive");
    require(std::isfinite(ybar) && ybar >= 0.0 && ybar < 1.0, "ybar must lie in [0,1)");
    return (M - 1.0) * (ybar / (1.0 - ybar)) * flip_mass(ybar, meas) / ((1.0 - ybar) + M * ybar);
}

}  // namespace detail

inline double meng_error(double rho_iy, double f, double sigma_y) {
    detail::require(sigma_y >= 0.0, "sigma_y must be nonnegative");
    return rho_iy * detail::quantity_factor(f) * sigma_y;
}

inline ErrorDecomposition imperfect_error(const AnalyticInputs& in) {
    const double k = detail::quantity_factor(in.f);
    ErrorDecomposition d;
    d.data_quality_term = in.rho_iy * in.sigma_y;
    d.interaction_term = in.rho_ipz * in.sigma_pz;
    d.bias_term = std::sqrt(in.f / (1.0 - in.f)) * (in.fp - (in.fp + in.fn) * in.ybar);
    d.total_error = k * (d.data_quality_term + d.interaction_term + d.bias_term);
    return d;
}

/// Decomposition from a realization's empirical quantities; exact per draw.
inline ErrorDecomposition imperfect_error(const EmpiricalStats& s) {
    return imperfect_error(AnalyticInputs{s.ybar, s.f_hat, s.rho_iy, s.sigma_y, s.rho_ipz, s.sigma_pz,
                                          s.fp_hat, s.fn_hat});
}

/// Population standard deviation of PZ: sqrt(E[P] − E[PZ]²).
inline double sigma_pz(double ybar, const MeasurementModel& meas) {
    meas.validate();
    detail::require_closed_unit(ybar, "ybar");
    const double b = detail::pz_mean(ybar, meas);
    return std::sqrt(std::max(0.0, detail::flip_mass(ybar, meas) - b * b));
}

/// sqrt(2Ȳ(FP(1−Ȳ)+FN·Ȳ)), the form printed alongside the decomposition.
inline double sigma_pz_closed_form(double ybar, const MeasurementModel& meas) {
    meas.validate();
    detail::require_closed_unit(ybar, "ybar");
    return std::sqrt(2.0 * ybar * detail::flip_mass(ybar, meas));
}

/// Expected correlation of selection with PZ given the one with Y.
/// Under independent selection and misclassification,
/// ρ_IPZ = −ρ_IY (FP+FN) sqrt(Ȳ(1−Ȳ)/(E[P] − E[PZ]²)).
inline double rho_ipz_from_rho_iy(double rho_iy, const SelectionModel& sel, const MeasurementModel& meas,
                                  double ybar) {
    sel.validate();
    meas.validate();
    detail::require_open_unit(ybar, "ybar");
    detail::require(sel.f(ybar) > 0.0, "f0(1-ybar) + f1*ybar must be positive");
    const double s_pz = sigma_pz(ybar, meas);
    if (s_pz == 0.0) return 0.0;
    return -rho_iy * (meas.fp + meas.fn) * std::sqrt(ybar * (1.0 - ybar)) / s_pz;
}

/// The relation as printed: −ρΔ sqrt(Ȳ/(1−Ȳ)) sqrt(A)/(f0(1−Ȳ)+f1Ȳ) sqrt(Ȳ/2).
/// Disagrees with simulation; kept for comparison.
inline double rho_ipz_closed_form(double rho_iy, const SelectionModel& sel, const MeasurementModel& meas,
                                  double ybar) {
    sel.validate();
    meas.validate();
    detail::require_open_unit(ybar, "ybar");
    const double f = sel.f(ybar);
    detail::require(f > 0.0, "f0(1-ybar) + f1*ybar must be positive");
    return -rho_iy * sel.delta() * std::sqrt(ybar / (1.0 - ybar)) * std::sqrt(detail::flip_mass(ybar, meas)) / f *
           std::sqrt(ybar / 2.0);
}

inline double meas_adjustment(const SelectionModel& sel, const MeasurementModel& meas, double ybar) {
    return 1.0 - detail::adjustment_core(sel, meas, ybar);
}

/// Same bracket written through M = f1/f0 alone.
inline double meas_adjustment_M(double M, const MeasurementModel& meas, double ybar) {
    return 1.0 - detail::adjustment_core_M(M, meas, ybar);
}

inline double d_m(const SelectionModel& sel, const MeasurementModel& meas, double ybar) {
    return 1.0 + meas.fp + meas.fn - detail::adjustment_core(sel, meas, ybar);
}

inline double d_m_M(double M, const MeasurementModel& meas, double ybar) {
    return 1.0 + meas.fp + meas.fn - detail::adjustment_core_M(M, meas, ybar);
}

inline AdjustmentFactors adjustment_factors(const SelectionModel& sel, const MeasurementModel& meas, double ybar) {
    const double g = detail::adjustment_core(sel, meas, ybar);
    return {1.0 - g, 1.0 + meas.fp + meas.fn - g};
}

enum class Correction {
    FirstOrder,    // ȳ* + FN·ȳ* − FP(1−ȳ*)
    ExactInverse,  // (ȳ* − FP)/(1 − FP − FN)
};

struct CorrectedPrevalence {
    double value = 0.0;      // clamped into [0,1]
    double unclamped = 0.0;
    bool clamped = false;
};

inline CorrectedPrevalence corrected_prevalence(double ybar_star, const MeasurementModel& meas,
                                                Correction variant = Correction::FirstOrder) {
    meas.validate();
    detail::require_closed_unit(ybar_star, "ybar_star");
    CorrectedPrevalence out;
    out.unclamped = variant == Correction::FirstOrder
                        ? ybar_star + meas.fn * ybar_star - meas.fp * (1.0 - ybar_star)
                        : (ybar_star - meas.fp) / (1.0 - meas.fp - meas.fn);
    out.value = std::clamp(out.unclamped, 0.0, 1.0);
    out.clamped = out.value != out.unclamped;
    return out;
}

/// Bias of the marginal treatment effect under self-selected recruitment.
/// Uses sqrt(f/(1−f)) as written, not the sqrt((1−f)/f) of the prevalence
/// decomposition.
inline double trial_effect_bias(double beta1, double exp_rho_iu, double f, double sigma_u) {
    detail::require_open_unit(f, "f");
    detail::require(sigma_u >= 0.0, "sigma_u must be nonnegative");
    return beta1 * exp_rho_iu * std::sqrt(f / (1.0 - f)) * sigma_u;
}

enum class Estimator {
    Raw,           // ȳ*
    FirstOrder,    // sign-fixed first-order correction of ȳ*
    ExactInverse,  // (ȳ* − FP)/(1 − FP − FN)
};

/// Population-level error of an estimator under the selection and
/// measurement models, with E[ȳ*] taken as E[Σ I Y*]/E[Σ I].
inline double expected_estimator_error(const SelectionModel& sel, const MeasurementModel& meas, double ybar,
                                       Estimator est = Estimator::Raw) {
    sel.validate();
    meas.validate();
    detail::require_closed_unit(ybar, "ybar");
    const double f = sel.f(ybar);
    detail::require(f > 0.0, "f0(1-ybar) + f1*ybar must be positive");
    const double ys = (sel.f1 * ybar * (1.0 - meas.fn) + sel.f0 * (1.0 - ybar) * meas.fp) / f;
    switch (est) {
        case Estimator::Raw: return ys - ybar;
        case Estimator::FirstOrder: return ys * (1.0 + meas.fp + meas.fn) - meas.fp - ybar;
        case Estimator::ExactInverse: return (ys - meas.fp) / (1.0 - meas.fp - meas.fn) - ybar;
    }
    return 0.0;
}

}  // namespace casebias
