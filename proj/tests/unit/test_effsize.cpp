#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "casebias/effsize.hpp"

using namespace casebias;

namespace {

const std::vector<double> kYbar{0.016, 0.036, 0.056, 0.076, 0.096};
const std::vector<double> kM{1.2, 1.4, 1.6, 1.8, 2.0};

// Reference effective-sample-size tables at f = 0.026.
const double kTableNoError[5][5] = {{1598, 402, 180, 102, 66},
                                    {731, 185, 84, 48, 31},
                                    {484, 124, 56, 32, 21},
                                    {367, 94, 43, 25, 16},
                                    {299, 78, 36, 21, 14}};
const double kTableWithError[5][5] = {{1154, 290, 130, 73, 47},
                                      {528, 134, 60, 34, 22},
                                      {349, 89, 41, 23, 15},
                                      {265, 68, 31, 18, 12},
                                      {216, 56, 26, 15, 10}};

}  // namespace

TEST(BinaryRho, ZeroWithoutDifferential) { EXPECT_EQ(binary_rho(0.0, 0.1, 0.05), 0.0); }

TEST(BinaryRho, WorkedScenario) {
    const auto sel = SelectionModel::from_f_M(0.026, 2.0, 0.091);
    EXPECT_NEAR(sel.f0, 0.024, 5e-4);
    EXPECT_NEAR(sel.f1, 0.048, 5e-4);
    EXPECT_NEAR(sel.delta(), 0.024, 5e-4);
    EXPECT_NEAR(binary_rho(sel.delta(), 0.091, 0.026), 0.043, 5e-4);
}

TEST(BinaryRho, RejectsBoundaries) {
    EXPECT_THROW(binary_rho(0.01, 0.0, 0.1), Error);
    EXPECT_THROW(binary_rho(0.01, 0.1, 1.0), Error);
}

TEST(BinaryRho, MatchesMonteCarlo) {
    const auto pop = make_population(100000, 0.1, 3);
    const SelectionModel sel{0.02, 0.04};
    const auto m = mc_expectation(pop, sel, {}, Statistic::RhoIY, 300, 12);
    EXPECT_NEAR(m.mean, binary_rho(sel.delta(), 0.1, sel.f(0.1)), 3 * m.std_error);
}

TEST(NeffBound, WorkedScenario) {
    const auto r = neff_bound({0.091, 2.0, 0.026, std::nullopt});
    EXPECT_NEAR(r.value, 14.39, 0.01);
    EXPECT_FALSE(r.infinite);
}

TEST(NeffBound, TableCorners) {
    EXPECT_EQ(std::round(neff_bound({0.096, 1.2, 0.026, std::nullopt}).value), 299);
    EXPECT_EQ(std::round(neff_bound({0.096, 1.2, 0.026, MeasurementModel{0.005, 0.172}}).value), 216);
}

TEST(NeffBound, InfiniteUnderSrs) {
    const auto r = neff_bound({0.1, 1.0, 0.05, std::nullopt});
    EXPECT_TRUE(r.infinite);
    EXPECT_TRUE(std::isinf(r.value));
}

TEST(NeffBound, MisclassificationLowersBoundWhenDmExceedsOne) {
    for (double y : kYbar)
        for (double M : kM) {
            const auto a = neff_bound({y, M, 0.026, std::nullopt});
            const auto b = neff_bound({y, M, 0.026, MeasurementModel{0.005, 0.172}});
            ASSERT_GT(b.d_m * b.d_m, 1.0);
            EXPECT_GE(a.value, b.value);
            EXPECT_DOUBLE_EQ(a.value, neff_bound({y, M, 0.026, MeasurementModel{}}).value);
        }
}

TEST(NeffTable, ReproducesTableWithoutMisclassification) {
    const auto t = neff_table(kYbar, kM, 0.026);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) EXPECT_EQ(t.cells[i][j], kTableNoError[i][j]) << i << "," << j;
}

TEST(NeffTable, ReproducesTableWithMisclassification) {
    const auto t = neff_table(kYbar, kM, 0.026, MeasurementModel{0.005, 0.172});
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) EXPECT_EQ(t.cells[i][j], kTableWithError[i][j]) << i << "," << j;
}

TEST(NeffTable, FloorOptionWithinOne) {
    const auto t = neff_table(kYbar, kM, 0.026, std::nullopt, Rounding::Floor);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            EXPECT_LE(std::abs(t.cells[i][j] - kTableNoError[i][j]), 1.0);
            EXPECT_EQ(t.cells[i][j], std::floor(t.raw[i][j]));
        }
}

TEST(NeffTable, MonotoneInBothDirections) {
    const auto t = neff_table(kYbar, kM, 0.026, MeasurementModel{0.005, 0.172});
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            if (j + 1 < 5) {
                EXPECT_GT(t.raw[i][j], t.raw[i][j + 1]);
            }
            if (i + 1 < 5) {
                EXPECT_GT(t.raw[i][j], t.raw[i + 1][j]);
            }
        }
}

TEST(NeffTable, SrsColumnIsFlaggedInfinite) {
    const auto t = neff_table(kYbar, {1.0}, 0.026);
    for (const auto& row : t.infinite) EXPECT_TRUE(row[0]);
    EXPECT_NE(t.to_csv().find("inf"), std::string::npos);
}

TEST(NeffTable, CsvLayout) {
    const auto t = neff_table({0.016, 0.096}, {1.2, 2.0}, 0.026);
    EXPECT_EQ(t.to_csv(), "ybar,1.2,2\n0.016,1598.00,66.00\n0.096,299.00,14.00\n");
}

TEST(NeffTable, RejectsEmptyGrid) { EXPECT_THROW(neff_table({}, kM, 0.026), Error); }

TEST(MseVsSrs, ParityUnderSrs) { EXPECT_NEAR(mse_vs_srs(1000, 1.0 / 999.0), 1.0, 1e-14); }

TEST(MseVsSrs, ScalesWithPopulation) {
    const double r = mse_vs_srs(5 * 66000000ULL, 1e-6) / mse_vs_srs(66000000ULL, 1e-6);
    EXPECT_NEAR(r, 5.0, 1e-6);
}

TEST(MseVsSrs, ZeroCorrelation) { EXPECT_EQ(mse_vs_srs(100, 0.0), 0.0); }

TEST(RelativeMse, OneWithoutMisclassification) {
    const EffSizeScenario s{0.091, 1.5, 0.026, MeasurementModel{}};
    for (auto d : kAllMseDefinitions) EXPECT_NEAR(relative_mse(s, {0.091, 1.5, 0.026, std::nullopt}, d), 1.0, 1e-12);
}

TEST(RelativeMse, RejectsMismatchedScenarios) {
    EXPECT_THROW(relative_mse({0.091, 1.5, 0.026, MeasurementModel{0.01, 0.1}}, {0.091, 2.0, 0.026, std::nullopt}),
                 Error);
}

TEST(RelativeMse, DefaultUsesUncorrectedEstimatorWithBias) {
    const double y = 0.091, f = 0.026;
    const MeasurementModel m{0.005, 0.172};
    const auto sel = SelectionModel::from_f_M(f, 1.5, y);
    const double x = std::sqrt((1 - f) / f) * binary_rho(sel.delta(), y, f) * std::sqrt(y * (1 - y));
    const double adj = 1 - sel.delta() * (y / (1 - y)) * (m.fp * (1 - y) + m.fn * y) / f;
    const double e = x * adj + (m.fp - (m.fp + m.fn) * y);
    EXPECT_NEAR(relative_mse({y, 1.5, f, m}, {y, 1.5, f, std::nullopt}), e * e / (x * x), 1e-12);
}

TEST(RelativeMse, MonteCarloMatchesAnalyticMse) {
    const std::size_t N = 200000;
    const auto pop = make_population(N, 0.1, 31);
    const SelectionModel sel{0.02, 0.04};
    const MeasurementModel meas{0.01, 0.15};
    const auto mc = relative_mse_mc(pop, sel, meas, 400, 77);
    const double analytic = expected_estimator_mse(sel, meas, 0.1, N) / expected_estimator_mse(sel, {}, 0.1, N);
    EXPECT_NEAR(mc.mean, analytic, 3 * mc.std_error);
}

TEST(CapacityTradeoff, EscalatingMisclassification) {
    const auto c = capacity_tradeoff(0.05, 0.1, {0.005, 0.05}, {0.05, 0.2}, 0.091, 2.0);
    EXPECT_NEAR(c.neff_factor, 2.9, 0.2);
    EXPECT_NEAR(c.naive_neff_factor, 4.0, 0.2);
    EXPECT_NEAR(c.mse_reduction, 0.26, 0.03);
    EXPECT_NEAR(c.naive_mse_reduction, 0.47, 0.03);
}

TEST(CapacityTradeoff, WorstCase) {
    const auto c = capacity_tradeoff(0.05, 0.1, {0.005, 0.05}, {0.1, 0.3}, 0.091, 2.0);
    EXPECT_NEAR(c.neff_factor, 2.3, 0.2);
}

TEST(CapacityTradeoff, FixedDifferentialQuadruplesWithoutMisclassification) {
    const auto c = capacity_tradeoff(0.01, 0.02, {}, {}, 0.1, 1.5);
    EXPECT_NEAR(c.neff_factor, 4.0, 1e-9);
    EXPECT_NEAR(c.naive_neff_factor, 4.0, 1e-9);
}

TEST(CapacityTradeoff, UnchangedMisclassificationMatchesDirectBound) {
    const MeasurementModel m{0.005, 0.05};
    const double y = 0.091, M = 2.0, fb = 0.05, fa = 0.1;
    const auto c = capacity_tradeoff(fb, fa, m, m, y, M);
    // Direct evaluation of f/(1−f)/(ρ D_M)² holding Δ fixed.
    const double f0b = fb / (y * (M - 1) + 1), delta = f0b * (M - 1);
    const auto neff = [&](double f) {
        const double rho = delta * std::sqrt(y * (1 - y) / (f * (1 - f)));
        const double dm = 1 + m.fp + m.fn - delta * (y / (1 - y)) * (m.fp * (1 - y) + m.fn * y) / f;
        return f / (1 - f) / (rho * dm * rho * dm);
    };
    EXPECT_NEAR(c.neff_factor, neff(fa) / neff(fb), 1e-12);
}
