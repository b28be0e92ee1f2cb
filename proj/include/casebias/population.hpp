#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "casebias/error.hpp"
#include "casebias/rng.hpp"

namespace casebias {

/// N binary outcomes with a fixed, exactly known prevalence.
class FinitePopulation {
public:
    explicit FinitePopulation(std::vector<std::uint8_t> outcomes) : y_(std::move(outcomes)) {
        detail::require(y_.size() >= 2, "population size must be at least 2");
        for (auto& v : y_) {
            detail::require(v <= 1, "outcomes must be 0 or 1");
            positives_ += v;
        }
    }

    std::size_t size() const noexcept { return y_.size(); }
    std::size_t positives() const noexcept { return positives_; }
    const std::vector<std::uint8_t>& outcomes() const noexcept { return y_; }
    std::uint8_t operator[](std::size_t j) const noexcept { return y_[j]; }

    double ybar() const noexcept { return static_cast<double>(positives_) / static_cast<double>(y_.size()); }
    double sigma_y() const noexcept {
        const double p = ybar();
        return std::sqrt(p * (1.0 - p));
    }

private:
    std::vector<std::uint8_t> y_;
    std::size_t positives_ = 0;
};

/// Testing probabilities for negatives (f0) and positives (f1).
struct SelectionModel {
    double f0 = 0.0;
    double f1 = 0.0;

    void validate() const {
        detail::require_closed_unit(f0, "f0");
        detail::require_closed_unit(f1, "f1");
    }
    double delta() const noexcept { return f1 - f0; }
    double M() const {
        detail::require(f0 > 0.0, "relative sampling rate M requires f0 > 0");
        return f1 / f0;
    }
    double f(double ybar) const noexcept { return f1 * ybar + f0 * (1.0 - ybar); }

    /// Selection model with overall fraction f and relative rate M = f1/f0.
    static SelectionModel from_f_M(double f, double M, double ybar) {
        detail::require_open_unit(f, "f");
        detail::require(M > 0.0, "M must be positive");
        detail::require_closed_unit(ybar, "ybar");
        const double f0 = f / (ybar * (M - 1.0) + 1.0);
        SelectionModel s{f0, M * f0};
        detail::require(s.f1 <= 1.0 && s.f0 <= 1.0,
                        "scenario implies a testing probability above 1");
        return s;
    }
};

struct MeasurementModel {
    double fp = 0.0;
    double fn = 0.0;

    void validate() const {
        detail::require(std::isfinite(fp) && fp >= 0.0 && fp < 1.0, "fp must lie in [0,1)");
        detail::require(std::isfinite(fn) && fn >= 0.0 && fn < 1.0, "fn must lie in [0,1)");
        detail::require(fp + fn < 1.0, "fp + fn must be below 1");
    }
    bool perfect() const noexcept { return fp == 0.0 && fn == 0.0; }
};

/// One draw of selection indicators I and misclassification indicators P.
/// P is drawn for every individual; only selected ones are observed.
struct Realization {
    std::vector<std::uint8_t> selected;
    std::vector<std::uint8_t> flipped;

    std::size_t n() const noexcept {
        std::size_t c = 0;
        for (auto v : selected) c += v;
        return c;
    }
    /// Observed test result Y*_j; meaningful only where selected[j] == 1.
    std::uint8_t observed(const FinitePopulation& pop, std::size_t j) const noexcept {
        return static_cast<std::uint8_t>(pop[j] ^ flipped[j]);
    }
};

struct EmpiricalStats {
    std::size_t N = 0;
    std::size_t n = 0;
    double f_hat = 0.0;
    double ybar = 0.0;         // population prevalence
    double sigma_y = 0.0;
    double ybar_sample = 0.0;  // prevalence among the selected, true outcomes
    double ybar_star = 0.0;    // fraction of positive tests among the selected
    double rho_iy = 0.0;
    double rho_ipz = 0.0;
    double sigma_pz = 0.0;
    double fp_hat = 0.0;
    double fn_hat = 0.0;

    double error() const noexcept { return ybar_star - ybar; }
};

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t replications = 0;  // nondegenerate replications used
    std::size_t skipped = 0;       // degenerate replications
};

inline FinitePopulation make_population(std::size_t size_N, double prevalence, std::uint64_t seed) {
    detail::require(size_N >= 2, "population size must be at least 2");
    detail::require_closed_unit(prevalence, "prevalence");
    const auto k = static_cast<std::size_t>(std::llround(prevalence * static_cast<double>(size_N)));
    std::vector<std::uint8_t> y(size_N, 0);
    std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(std::min(k, size_N)), std::uint8_t{1});
    Engine eng(derive_seed(seed, 0));
    for (std::size_t i = size_N - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(eng, i + 1));
        std::swap(y[i], y[j]);
    }
    return FinitePopulation(std::move(y));
}

inline Realization realize(const FinitePopulation& pop, const SelectionModel& sel,
                           const MeasurementModel& meas, std::uint64_t seed) {
    sel.validate();
    meas.validate();
    const std::size_t N = pop.size();
    Realization r;
    r.selected.resize(N);
    r.flipped.resize(N);
    Engine eng(derive_seed(seed, 1));
    for (std::size_t j = 0; j < N; ++j) {
        const bool pos = pop[j] == 1;
        const double u = uniform01(eng);
        const double v = uniform01(eng);
        r.selected[j] = u < (pos ? sel.f1 : sel.f0);
        r.flipped[j] = v < (pos ? meas.fn : meas.fp);
    }
    return r;
}

inline EmpiricalStats empirical_stats(const FinitePopulation& pop, const Realization& r) {
    const std::size_t N = pop.size();
    detail::require(r.selected.size() == N && r.flipped.size() == N,
                    "realization does not match population size");
    // Integer sufficient statistics; PZ = P(1-2Y) takes values in {-1,0,1}.
    std::int64_t n = 0, m = 0, iy = 0, iystar = 0, s_pz = 0, s_pz2 = 0, s_ipz = 0;
    std::int64_t p_neg = 0, p_pos = 0;
    for (std::size_t j = 0; j < N; ++j) {
        const int y = pop[j], i = r.selected[j], p = r.flipped[j];
        const int pz = p * (1 - 2 * y);
        n += i;
        m += y;
        iy += i * y;
        iystar += i * (y ^ p);
        s_pz += pz;
        s_pz2 += pz * pz;
        s_ipz += i * pz;
        p_neg += p * (1 - y);
        p_pos += p * y;
    }
    if (n == 0 || static_cast<std::size_t>(n) == N)
        throw Error(ErrorKind::Degenerate,
                    n == 0 ? "empty sample: ybar_star undefined" : "census: selection has zero variance");

    const double Nd = static_cast<double>(N);
    EmpiricalStats s;
    s.N = N;
    s.n = static_cast<std::size_t>(n);
    s.f_hat = static_cast<double>(n) / Nd;
    s.ybar = static_cast<double>(m) / Nd;
    s.sigma_y = std::sqrt(s.ybar * (1.0 - s.ybar));
    s.ybar_sample = static_cast<double>(iy) / static_cast<double>(n);
    s.ybar_star = static_cast<double>(iystar) / static_cast<double>(n);
    s.fp_hat = m == static_cast<std::int64_t>(N) ? 0.0 : static_cast<double>(p_neg) / static_cast<double>(N - m);
    s.fn_hat = m == 0 ? 0.0 : static_cast<double>(p_pos) / static_cast<double>(m);

    const double sd_i = std::sqrt(s.f_hat * (1.0 - s.f_hat));
    const double c_iy = static_cast<double>(iy) / Nd - s.f_hat * s.ybar;
    s.rho_iy = s.sigma_y > 0.0 ? c_iy / (sd_i * s.sigma_y) : 0.0;

    const double mean_pz = static_cast<double>(s_pz) / Nd;
    const double var_pz = std::max(0.0, static_cast<double>(s_pz2) / Nd - mean_pz * mean_pz);
    s.sigma_pz = std::sqrt(var_pz);
    const double c_ipz = static_cast<double>(s_ipz) / Nd - s.f_hat * mean_pz;
    s.rho_ipz = s.sigma_pz > 0.0 ? c_ipz / (sd_i * s.sigma_pz) : 0.0;
    return s;
}

enum class Statistic { RhoIY, RhoIYSquared, RhoIPZ, SigmaPZ, FHat, YbarStar, Error };

inline double statistic_value(Statistic st, const EmpiricalStats& s) noexcept {
    switch (st) {
        case Statistic::RhoIY: return s.rho_iy;
        case Statistic::RhoIYSquared: return s.rho_iy * s.rho_iy;
        case Statistic::RhoIPZ: return s.rho_ipz;
        case Statistic::SigmaPZ: return s.sigma_pz;
        case Statistic::FHat: return s.f_hat;
        case Statistic::YbarStar: return s.ybar_star;
        case Statistic::Error: return s.error();
    }
    return 0.0;
}

inline MCEstimate summarize(const std::vector<double>& xs, std::size_t skipped = 0) {
    MCEstimate e;
    e.replications = xs.size();
    e.skipped = skipped;
    if (xs.empty()) return e;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    e.mean = mean;
    if (xs.size() > 1)
        e.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    return e;
}

namespace detail {

inline unsigned worker_count(std::size_t jobs) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(hw, jobs));
}

/// Runs body(i) for i in [0, count) across threads. Each index writes only its
/// own output slot, so results do not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    const unsigned workers = worker_count(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Per-replication empirical statistics; std::nullopt marks a degenerate draw.
/// Replication i uses seed derive_seed(seed, i + 1).
inline std::vector<std::optional<EmpiricalStats>> mc_replicate(const FinitePopulation& pop,
                                                               const SelectionModel& sel,
                                                               const MeasurementModel& meas,
                                                               std::size_t replications,
                                                               std::uint64_t seed) {
    sel.validate();
    meas.validate();
    std::vector<std::optional<EmpiricalStats>> out(replications);
    detail::parallel_for(replications, [&](std::size_t i) {
        const Realization r = realize(pop, sel, meas, derive_seed(seed, i + 1));
        try {
            out[i] = empirical_stats(pop, r);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Degenerate) throw;
        }
    });
    return out;
}

/// Mean and standard error of functional(stats) over independent replications.
inline MCEstimate mc_expectation(const FinitePopulation& pop, const SelectionModel& sel,
                                 const MeasurementModel& meas,
                                 const std::function<double(const EmpiricalStats&)>& functional,
                                 std::size_t replications, std::uint64_t seed) {
    detail::require(replications >= 2, "replications must be at least 2");
    const auto draws = mc_replicate(pop, sel, meas, replications, seed);
    std::vector<double> xs;
    xs.reserve(draws.size());
    for (const auto& d : draws)
        if (d) xs.push_back(functional(*d));
    const std::size_t skipped = draws.size() - xs.size();
    if (2 * skipped > replications)
        throw Error(ErrorKind::Degenerate, std::to_string(skipped) + " of " + std::to_string(replications) +
                                               " replications were degenerate");
    return summarize(xs, skipped);
}

inline MCEstimate mc_expectation(const FinitePopulation& pop, const SelectionModel& sel,
                                 const MeasurementModel& meas, Statistic st, std::size_t replications,
                                 std::uint64_t seed) {
    return mc_expectation(
        pop, sel, meas, [st](const EmpiricalStats& s) { return statistic_value(st, s); }, replications, seed);
}

}  // namespace casebias
