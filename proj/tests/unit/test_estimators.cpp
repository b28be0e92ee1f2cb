#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "casebias/estimators.hpp"
#include "casebias/population.hpp"

using namespace casebias;

namespace {

PeriodQuality quality(double rho, double d_m, double f, double cv, double ybar) { return {rho, d_m, f, cv, ybar}; }

SirTrajectory fig3_run() { return sir_simulate(SirParams::with_seed_cases(1.4, 0.2, 1e6, 100, 0.1, 1500)); }

}  // namespace

TEST(RatioBias, IdenticalPeriodsCancel) {
    const auto q = quality(0.05, 1.2, 0.02, 3.0, 0.1);
    EXPECT_EQ(ratio_bias({q, q}), 0.0);
}

TEST(RatioBias, ZeroCorrelationGivesZero) {
    EXPECT_EQ(ratio_bias({quality(0.0, 1.1, 0.02, 3.0, 0.1), quality(0.0, 1.3, 0.05, 2.0, 0.2)}), 0.0);
}

TEST(RatioBias, DirectEvaluation) {
    const auto p = quality(0.01, 1.1, 0.02, 3.0, 0.1);
    const auto c = quality(0.02, 1.2, 0.05, 2.0, 0.15);
    const double a_prev = 0.01 * 1.1 * std::sqrt(0.98 / 0.02) * 3.0;
    const double a_cur = 0.02 * 1.2 * std::sqrt(0.95 / 0.05) * 2.0;
    EXPECT_NEAR(ratio_bias({p, c}), 1.5 * (a_cur - a_prev) * (1 - a_prev), 1e-15);
}

TEST(RatioBias, RejectsZeroPreviousMean) {
    EXPECT_THROW(ratio_bias({quality(0.01, 1, 0.02, 1, 0.0), quality(0.01, 1, 0.02, 1, 0.1)}), Error);
}

TEST(RatioBias, MatchesBruteForceRatio) {
    const std::size_t N = 100000, reps = 400;
    const double f = 0.1, M = 1.1, y_prev = 0.05, y_cur = 0.2;
    const auto pop_prev = make_population(N, y_prev, 1);
    const auto pop_cur = make_population(N, y_cur, 2);
    const auto draws_prev = mc_replicate(pop_prev, SelectionModel::from_f_M(f, M, y_prev), {}, reps, 10);
    const auto draws_cur = mc_replicate(pop_cur, SelectionModel::from_f_M(f, M, y_cur), {}, reps, 20);
    std::vector<double> diffs;
    for (std::size_t i = 0; i < reps; ++i)
        if (draws_prev[i] && draws_cur[i])
            diffs.push_back(draws_cur[i]->ybar_sample / draws_prev[i]->ybar_sample - y_cur / y_prev);
    const auto mc = summarize(diffs);

    const auto qp = period_quality(y_prev, f, M, {});
    const auto qc = period_quality(y_cur, f, M, {});
    const double predicted = ratio_bias({qp, qc});
    const double rel_sd = std::sqrt((1 - y_prev) / (f * N * y_prev));
    const double stat = std::max({std::abs(qp.relative_error()), std::abs(qc.relative_error()), rel_sd});
    EXPECT_NEAR(mc.mean, predicted, std::max(3 * mc.std_error, 5 * stat * stat));
    EXPECT_LT(predicted, 0.0);
    EXPECT_LT(mc.mean, 0.0);
}

TEST(RtEstimate, EqualMeansGiveOne) { EXPECT_EQ(rt_estimate(0.03, 0.03, 7.0), 1.0); }

TEST(RtEstimate, DoublingMeans) { EXPECT_NEAR(rt_estimate(0.02, 0.01, 7.0), 1.0 + std::log(2.0) / 7.0, 1e-15); }

TEST(RtEstimate, RecoversTrueRtOnTrueSeries) {
    const auto tr = fig3_run();
    const auto rt = true_rt(tr, 7.0);
    const auto k = tr.incidence();
    for (std::size_t t = 1; t < 400; ++t) EXPECT_NEAR(rt_estimate(k[t], k[t - 1], 7.0), *rt[t], 1e-12);
}

TEST(RtEstimate, RoundTripsIncidenceRatio) {
    const double ratio = 1.37;
    const double rt = rt_estimate(ratio * 0.01, 0.01, 7.0);
    EXPECT_NEAR(std::exp(7.0 * (rt - 1.0)), ratio, 1e-12 * ratio);
}

TEST(RtEstimate, RejectsNonpositiveInputs) {
    EXPECT_THROW(rt_estimate(0.0, 0.1, 7), Error);
    EXPECT_THROW(rt_estimate(0.1, -0.1, 7), Error);
    EXPECT_THROW(rt_estimate(0.1, 0.1, 0), Error);
}

TEST(RtError, ZeroWithoutDistortion) { EXPECT_EQ(rt_error_from_e(0.0, 1.0, 7.0).value, 0.0); }

TEST(RtError, SusceptibleDepletionIsNonnegative) {
    EXPECT_GT(rt_error_from_e(0.0, 0.99, 7.0).value, 0.0);
    EXPECT_NEAR(rt_error_from_e(0.0, 0.99, 7.0).value, -std::log(0.99) / 7.0, 1e-16);
}

TEST(RtError, SmallDistortionIsLinear) {
    for (double e : {1e-3, -1e-3, 1e-4}) {
        const double linear = e / 7.0 - std::log(0.98) / 7.0;
        EXPECT_NEAR(rt_error_from_e(e, 0.98, 7.0).value, linear, e * e);
    }
}

TEST(RtError, FlagsLogDomainViolation) {
    const auto r = rt_error_from_e(-1.0, 1.0, 7.0);
    EXPECT_FALSE(r.feasible);
    EXPECT_TRUE(std::isnan(r.value));
    EXPECT_FALSE(rt_error_from_e(-1.5, 1.0, 7.0).feasible);
}

TEST(RtError, UsesRelativeChangeOfPeriods) {
    const auto p = quality(0.01, 1.1, 0.02, 3.0, 0.1);
    const auto c = quality(0.02, 1.2, 0.05, 2.0, 0.15);
    const auto r = rt_error({p, c}, 1.0, 7.0);
    EXPECT_DOUBLE_EQ(r.e_t, relative_change_error({p, c}));
    EXPECT_NEAR(r.value, std::log1p(r.e_t) / 7.0, 1e-15);
}

TEST(BiasCurves, VanishUnderEqualRates) {
    const auto c = bias_curves(fig3_run(), 0.02, {0.01, 0.15}, {1.0});
    for (const auto& p : c[0].points) {
        ASSERT_TRUE(p.ratio_bias.has_value());
        EXPECT_NEAR(*p.ratio_bias, 0.0, 1e-15);
        if (p.rt_bias) { EXPECT_NEAR(*p.rt_bias, 0.0, 1e-15); }
    }
}

TEST(BiasCurves, PositiveThroughEarlyRise) {
    const auto tr = fig3_run();
    const std::size_t peak = peak_time(tr).prevalence;
    for (const auto& c : bias_curves(tr, 0.02, {0.01, 0.15}, {2.0, 4.0}))
        for (const auto& p : c.points)
            if (p.step < peak / 2) { EXPECT_GT(*p.ratio_bias, 0.0) << "M " << c.M << " step " << p.step; }
}

TEST(BiasCurves, PeaksOfRatioAndRtBiasDiffer) {
    const auto c = bias_curves(fig3_run(), 0.02, {0.01, 0.15}, {2.0})[0];
    std::size_t ratio_arg = 0, rt_arg = 0;
    double ratio_max = -1e300, rt_max = -1e300;
    for (const auto& p : c.points) {
        if (*p.ratio_bias > ratio_max) ratio_max = *p.ratio_bias, ratio_arg = p.step;
        if (p.rt_bias && *p.rt_bias > rt_max) rt_max = *p.rt_bias, rt_arg = p.step;
    }
    EXPECT_NE(ratio_arg, rt_arg);
}

TEST(BiasCurves, ExactSusceptibleAddsNonnegativeTerm) {
    const auto tr = fig3_run();
    const auto base = bias_curves(tr, 0.02, {0.01, 0.15}, {2.0})[0];
    const auto exact = bias_curves(tr, 0.02, {0.01, 0.15}, {2.0}, {7.0, true})[0];
    for (std::size_t i = 0; i < base.points.size(); ++i)
        if (base.points[i].rt_bias) { EXPECT_GE(*exact.points[i].rt_bias, *base.points[i].rt_bias); }
}

TEST(BiasCurves, CountsStepsWithoutIncidence) {
    const auto c = bias_curves(fig3_run(), 0.02, {0.01, 0.15}, {2.0})[0];
    EXPECT_EQ(c.points.size(), 1500u);
    EXPECT_EQ(c.skipped_ratio, 0u);
    EXPECT_EQ(c.skipped_rt, 1u);  // the last step has no K
}

TEST(BiasCurves, CsvLayout) {
    const auto tr = sir_simulate(SirParams::with_seed_cases(1.4, 0.2, 1e6, 100, 0.1, 3));
    std::istringstream in(bias_curves_csv(bias_curves(tr, 0.02, {0.01, 0.15}, {2.0, 4.0})));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step,M,ratio_bias,rt_bias");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 6u);
}

TEST(ExpSmooth, AlphaOneIsIdentity) {
    const std::vector<double> x{3, 1, 4, 1, 5};
    EXPECT_EQ(exp_smooth(x, 1.0), x);
}

TEST(ExpSmooth, ConstantSeriesIsFixed) {
    for (double v : exp_smooth(std::vector<double>(20, 0.25))) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ExpSmooth, ImpulseDecaysGeometrically) {
    std::vector<double> x(15, 0.0);
    x[0] = 1.0;
    const auto s = exp_smooth(x, 0.3);
    for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(s[t], std::pow(0.7, static_cast<double>(t)), 1e-15);
}

TEST(ExpSmooth, ShiftEquivariant) {
    const std::vector<double> x{0.1, 0.5, 0.2, 0.9};
    std::vector<double> shifted = x;
    for (auto& v : shifted) v += 2.0;
    const auto a = exp_smooth(x), b = exp_smooth(shifted);
    for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(b[t], a[t] + 2.0, 1e-14);
}

TEST(ExpSmooth, RejectsBadArguments) {
    EXPECT_THROW(exp_smooth({}, 0.3), Error);
    EXPECT_THROW(exp_smooth({1.0}, 0.0), Error);
    EXPECT_THROW(exp_smooth({1.0}, 1.5), Error);
}

TEST(EstimateRelativeSampling, SurveyAnchorPoint) {
    const MeasurementModel m{0.005, 0.172};
    const auto r = estimate_relative_sampling(0.159, 0.325, 0.001, 0.159, m);
    EXPECT_NEAR(r.rho_dm, 1.43e-2, 0.02e-2);
    EXPECT_NEAR(r.delta, 1.06e-3, 0.05e-3);
    EXPECT_NEAR(r.M, 2.29, 0.05);
    EXPECT_FALSE(r.has_interval);
}

TEST(EstimateRelativeSampling, AnchoredIntervalBracketsPoint) {
    const SurveyAnchor a{0.139, 0.325, 0.001};
    const auto r = estimate_relative_sampling(a, {0.005, 0.172}, MeasRange{0.003, 0.008, 0.116, 0.240});
    EXPECT_TRUE(r.has_interval);
    EXPECT_LE(r.ci_low, r.M);
    EXPECT_GE(r.ci_high, r.M);
    EXPECT_NEAR(r.M, 2.29, 0.05);
    EXPECT_NEAR(estimate_relative_sampling(a, {0.05, 0.005}).M, 4.31, 0.1);
}

TEST(EstimateRelativeSampling, NoGapMeansEqualRates) {
    const auto r = estimate_relative_sampling(0.2, 0.2, 0.01, 0.2, {0.01, 0.1});
    EXPECT_EQ(r.delta, 0.0);
    EXPECT_EQ(r.M, 1.0);
}

TEST(EstimateRelativeSampling, RoundTripsForwardMap) {
    const double f = 0.01, ybar = 0.12;
    for (const MeasurementModel m : {MeasurementModel{}, MeasurementModel{0.01, 0.1}, MeasurementModel{0.05, 0.005}})
        for (double delta : {-0.002, 0.001, 0.004, 0.01}) {
            const double rd = rho_dm_forward(delta, f, ybar, m);
            const double error = rd * std::sqrt(ybar * (1 - ybar)) * std::sqrt((1 - f) / f);
            const auto r = estimate_relative_sampling(0.3, 0.3 + error, f, ybar, m);
            EXPECT_NEAR(r.delta, delta, 1e-8 * std::abs(delta)) << m.fp << "," << m.fn << " " << delta;
        }
}

TEST(EstimateRelativeSampling, FlagsUnreachableError) {
    try {
        estimate_relative_sampling(0.01, 0.99, 0.5, 0.01, {0.01, 0.1});
        FAIL() << "expected an infeasible inversion";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Infeasible);
    }
}

TEST(EstimateRelativeSampling, RejectsBadPrevalences) {
    EXPECT_THROW(estimate_relative_sampling(0.0, 0.3, 0.01, 0.1, {}), Error);
    EXPECT_THROW(estimate_relative_sampling(0.1, 0.3, 1.0, 0.1, {}), Error);
}
