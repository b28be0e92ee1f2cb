// Effective sample size when more testing comes with worse tests.
#include <cstdio>

#include "casebias/casebias.hpp"

int main() {
    using namespace casebias;
    const double ybar = 0.091, M = 2.0;
    for (auto [fp, fn] : {std::pair{0.05, 0.20}, std::pair{0.10, 0.30}}) {
        const CapacityTradeoff c = capacity_tradeoff(0.05, 0.10, {0.005, 0.05}, {fp, fn}, ybar, M);
        std::printf("f 0.05 -> 0.10 with FP=%.2f FN=%.2f: n_eff x%.2f (x%.2f if tests stayed as good), "
                    "MSE down %.0f%% (naive %.0f%%)\n",
                    fp, fn, c.neff_factor, c.naive_neff_factor, 100 * c.mse_reduction, 100 * c.naive_mse_reduction);
    }

    const auto t = neff_table({0.016, 0.056, 0.096}, {1.2, 1.6, 2.0}, 0.026, MeasurementModel{0.005, 0.172});
    std::printf("\n%s", t.to_csv().c_str());
}
