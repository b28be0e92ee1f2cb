// Recovers the relative testing rate of positives from a representative
// survey: routine testing says 32.5% after correction, the survey 13.9% raw.
#include <cstdio>

#include "casebias/casebias.hpp"

int main() {
    using namespace casebias;
    const SurveyAnchor anchor{0.139, 0.325, 0.001};
    const MeasRange range{0.003, 0.008, 0.116, 0.240};

    const SensitivityResult r = estimate_relative_sampling(anchor, {0.005, 0.172}, range);
    std::printf("rho*D_M = %.5f  delta = %.4g  M = %.3f  (%.3f, %.3f)\n", r.rho_dm, r.delta, r.M, r.ci_low,
                r.ci_high);

    const SensitivityResult alt = estimate_relative_sampling(anchor, {0.05, 0.005});
    std::printf("with FP=0.05, FN=0.005: M = %.3f\n", alt.M);
}
