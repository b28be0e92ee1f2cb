// Draws one population and one biased, error-prone testing round, then shows
// that the three-term decomposition reproduces the observed error.
#include <cstdio>

#include "casebias/casebias.hpp"

int main() {
    using namespace casebias;
    const FinitePopulation pop = make_population(100000, 0.091, 42);
    const SelectionModel sel = SelectionModel::from_f_M(0.026, 2.0, pop.ybar());
    const MeasurementModel meas{0.005, 0.172};

    const EmpiricalStats s = empirical_stats(pop, realize(pop, sel, meas, 7));
    const ErrorDecomposition d = imperfect_error(s);

    std::printf("tested %zu of %zu, true prevalence %.4f, positive rate %.4f\n", s.n, s.N, s.ybar, s.ybar_star);
    std::printf("rho_IY = %.5f  rho_IPZ = %.5f  sigma_PZ = %.5f\n", s.rho_iy, s.rho_ipz, s.sigma_pz);
    std::printf("observed error   %+.10f\n", s.error());
    std::printf("decomposed error %+.10f\n", d.total_error);
    std::printf("  data quality %+.6f  interaction %+.6f  bias %+.6f (before the sqrt((1-f)/f) factor)\n",
                d.data_quality_term, d.interaction_term, d.bias_term);
}
