#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "casebias/error.hpp"

namespace casebias {

struct Stratum {
    double share = 0.0;       // P_h
    double prevalence = 0.0;  // Ȳ_h

    double variance() const { return prevalence * (1.0 - prevalence); }
};

namespace detail {

inline void validate_strata(const std::vector<Stratum>& strata) {
    require(!strata.empty(), "at least one stratum is required");
    double total = 0.0;
    for (const auto& s : strata) {
        require(std::isfinite(s.share) && s.share > 0.0 && s.share <= 1.0, "stratum share must lie in (0,1]");
        require_closed_unit(s.prevalence, "stratum prevalence");
        total += s.share;
    }
    require(std::abs(total - 1.0) <= 1e-12, "stratum shares must sum to 1");
}

/// Integer counts proportional to weights with total exactly n, by largest
/// remainder (ties to the lower index). Positive-weight entries left at 0
/// take one unit from the currently largest allocation.
inline std::vector<std::size_t> largest_remainder(const std::vector<double>& w, std::size_t n) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<std::size_t> out(w.size(), 0);
    std::vector<double> frac(w.size(), 0.0);
    std::size_t used = 0;
    for (std::size_t h = 0; h < w.size(); ++h) {
        const double ideal = static_cast<double>(n) * w[h] / total;
        out[h] = static_cast<std::size_t>(std::floor(ideal));
        frac[h] = ideal - std::floor(ideal);
        used += out[h];
    }
    // Floating error can push the floors one over n in pathological cases.
    while (used > n) {
        const auto h = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
        --out[h];
        --used;
    }
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; used < n; i = (i + 1) % order.size()) {
        ++out[order[i]];
        ++used;
    }
    for (std::size_t h = 0; h < w.size(); ++h) {
        if (w[h] > 0.0 && out[h] == 0) {
            const auto donor = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
            if (out[donor] > 1) {
                --out[donor];
                ++out[h];
            }
        }
    }
    return out;
}

}  // namespace detail

/// n_h ∝ P_h·sqrt(Ȳ_h(1−Ȳ_h)); strata without within-stratum variance get 0.
inline std::vector<std::size_t> neyman_allocation(const std::vector<Stratum>& strata, std::size_t n) {
    detail::validate_strata(strata);
    std::vector<double> w;
    std::size_t positive = 0;
    for (const auto& s : strata) {
        w.push_back(s.share * std::sqrt(s.variance()));
        positive += w.back() > 0.0;
    }
    if (positive == 0)
        throw Error(ErrorKind::Degenerate, "every stratum has prevalence 0 or 1; Neyman allocation undefined");
    detail::require(n >= positive, "sample size must cover every stratum with positive variance");
    return detail::largest_remainder(w, n);
}

inline std::vector<std::size_t> proportional_allocation(const std::vector<Stratum>& strata, std::size_t n) {
    detail::validate_strata(strata);
    detail::require(n >= strata.size(), "sample size must cover every stratum");
    std::vector<double> w;
    for (const auto& s : strata) w.push_back(s.share);
    return detail::largest_remainder(w, n);
}

/// Σ P_h² Ȳ_h(1−Ȳ_h)/n_h, sampling with replacement within strata.
inline double design_variance(const std::vector<Stratum>& strata, const std::vector<std::size_t>& alloc) {
    detail::validate_strata(strata);
    detail::require(alloc.size() == strata.size(), "allocation size must match strata");
    double v = 0.0;
    for (std::size_t h = 0; h < strata.size(); ++h) {
        const double var = strata[h].variance();
        if (var == 0.0) continue;
        detail::require(alloc[h] > 0, "stratum " + std::to_string(h) + " has positive variance but no sample");
        v += strata[h].share * strata[h].share * var / static_cast<double>(alloc[h]);
    }
    return v;
}

/// Same without replacement: each term scaled by (N_h − n_h)/(N_h − 1), N_h = P_h·N.
inline double design_variance_fpc(const std::vector<Stratum>& strata, const std::vector<std::size_t>& alloc,
                                  double N) {
    detail::validate_strata(strata);
    detail::require(alloc.size() == strata.size(), "allocation size must match strata");
    double v = 0.0;
    for (std::size_t h = 0; h < strata.size(); ++h) {
        const double var = strata[h].variance();
        if (var == 0.0) continue;
        const double Nh = strata[h].share * N;
        const double nh = static_cast<double>(alloc[h]);
        detail::require(alloc[h] > 0, "stratum " + std::to_string(h) + " has positive variance but no sample");
        detail::require(Nh > 1.0 && nh <= Nh, "stratum allocation exceeds stratum size");
        v += strata[h].share * strata[h].share * (Nh - nh) / (Nh - 1.0) * var / nh;
    }
    return v;
}

/// (1/(N−1))·((1−f)/f)·σ², f = n/N.
inline double srs_variance(double pop_prevalence, double n, double N) {
    detail::require_closed_unit(pop_prevalence, "prevalence");
    detail::require(N >= 2.0 && n >= 1.0 && n <= N, "need 1 <= n <= N and N >= 2");
    const double f = n / N;
    return (1.0 / (N - 1.0)) * ((1.0 - f) / f) * pop_prevalence * (1.0 - pop_prevalence);
}

inline double overall_prevalence(const std::vector<Stratum>& strata) {
    double p = 0.0;
    for (const auto& s : strata) p += s.share * s.prevalence;
    return p;
}

}  // namespace casebias
