#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "casebias/error.hpp"

namespace casebias {

struct SirParams {
    double beta = 1.4;
    double gamma_rec = 0.2;  // removal rate, not the serial interval
    double N = 1e6;
    double s0 = 1e6 - 100;
    double i0 = 100;
    double r0 = 0;
    double dt = 0.1;
    std::size_t horizon = 1500;
    std::size_t substeps = 4;  // RK4 steps per reported step of length dt

    double basic_reproduction() const { return beta / gamma_rec; }

    static SirParams with_seed_cases(double beta, double gamma_rec, double N, double i0, double dt,
                                     std::size_t horizon) {
        return SirParams{beta, gamma_rec, N, N - i0, i0, 0.0, dt, horizon, 4};
    }

    void validate() const {
        detail::require(std::isfinite(beta) && beta > 0.0, "beta must be positive");
        detail::require(std::isfinite(gamma_rec) && gamma_rec > 0.0, "gamma_rec must be positive");
        detail::require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
        detail::require(N >= 2.0, "N must be at least 2");
        detail::require(s0 >= 0.0 && i0 >= 0.0 && r0 >= 0.0, "initial compartments must be nonnegative");
        detail::require(std::abs(s0 + i0 + r0 - N) <= 1e-9 * N, "s0 + i0 + r0 must equal N");
        detail::require(horizon >= 1, "horizon must be at least 1");
        detail::require(substeps >= 1, "substeps must be at least 1");
    }
};

struct SirTrajectory {
    double N = 0.0;
    double dt = 0.0;
    std::vector<double> times;       // horizon + 1 entries
    std::vector<double> S, I, R;     // horizon + 1 entries
    std::vector<double> K;           // S_t − S_{t+1}; horizon entries
    std::vector<double> K_rate;      // β S_t I_t / N · dt; horizon + 1 entries
    double max_conservation_error = 0.0;  // max_t |S+I+R−N| / N
    bool negative_compartment = false;

    std::size_t steps() const { return K.size(); }
    double prevalence(std::size_t t) const { return I[t] / N; }
    std::vector<double> prevalence() const {
        std::vector<double> p(I.size());
        for (std::size_t t = 0; t < I.size(); ++t) p[t] = I[t] / N;
        return p;
    }
    /// New cases per step as a fraction of N.
    std::vector<double> incidence() const {
        std::vector<double> k(K.size());
        for (std::size_t t = 0; t < K.size(); ++t) k[t] = K[t] / N;
        return k;
    }
};

/// Fixed-step fourth-order Runge–Kutta integration (substeps per reported step) of
/// S' = −βSI/N, I' = βSI/N − γI, R' = γI.
inline SirTrajectory sir_simulate(const SirParams& p) {
    p.validate();
    using State = std::array<double, 3>;
    const auto rhs = [&](const State& y) {
        const double infect = p.beta * y[0] * y[1] / p.N;
        const double removal = p.gamma_rec * y[1];
        return State{-infect, infect - removal, removal};
    };
    const auto axpy = [](const State& y, double h, const State& k) {
        return State{y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]};
    };

    SirTrajectory tr;
    tr.N = p.N;
    tr.dt = p.dt;
    const std::size_t n = p.horizon + 1;
    tr.times.reserve(n);
    tr.S.reserve(n);
    tr.I.reserve(n);
    tr.R.reserve(n);
    State y{p.s0, p.i0, p.r0};
    const double h = p.dt / static_cast<double>(p.substeps);
    for (std::size_t t = 0; t < n; ++t) {
        tr.times.push_back(static_cast<double>(t) * p.dt);
        tr.S.push_back(y[0]);
        tr.I.push_back(y[1]);
        tr.R.push_back(y[2]);
        tr.K_rate.push_back(p.beta * y[0] * y[1] / p.N * p.dt);
        tr.max_conservation_error = std::max(tr.max_conservation_error, std::abs(y[0] + y[1] + y[2] - p.N) / p.N);
        if (y[0] < 0.0 || y[1] < 0.0 || y[2] < 0.0) tr.negative_compartment = true;
        if (t + 1 == n) break;
        for (std::size_t s = 0; s < p.substeps; ++s) {
            const State k1 = rhs(y);
            const State k2 = rhs(axpy(y, h / 2, k1));
            const State k3 = rhs(axpy(y, h / 2, k2));
            const State k4 = rhs(axpy(y, h, k3));
            for (int c = 0; c < 3; ++c) y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    tr.K.resize(p.horizon);
    for (std::size_t t = 0; t < p.horizon; ++t) tr.K[t] = tr.S[t] - tr.S[t + 1];
    return tr;
}

/// R_t = 1 + log(K_t/K_{t−1})/γ_s per step; empty where K_t or K_{t−1} is not positive.
inline std::vector<std::optional<double>> true_rt(const std::vector<double>& K, double serial_interval) {
    detail::require(std::isfinite(serial_interval) && serial_interval > 0.0, "serial_interval must be positive");
    std::vector<std::optional<double>> rt(K.size());
    for (std::size_t t = 1; t < K.size(); ++t)
        if (K[t] > 0.0 && K[t - 1] > 0.0) rt[t] = 1.0 + std::log(K[t] / K[t - 1]) / serial_interval;
    return rt;
}

inline std::vector<std::optional<double>> true_rt(const SirTrajectory& traj, double serial_interval) {
    return true_rt(traj.K, serial_interval);
}

struct PeakTimes {
    std::size_t prevalence = 0;  // argmax I
    std::size_t incidence = 0;   // argmax K
};

inline PeakTimes peak_time(const SirTrajectory& traj) {
    detail::require(!traj.I.empty(), "trajectory is empty");
    const auto argmax = [](const std::vector<double>& v) {
        return v.empty() ? std::size_t{0}
                         : static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    };
    return {argmax(traj.I), argmax(traj.K)};
}

/// time,S,I,R,K,prevalence for every step with a defined K.
inline std::string trajectory_csv(const SirTrajectory& traj) {
    std::ostringstream os;
    os.precision(6);
    os << "time,S,I,R,K,prevalence\n";
    for (std::size_t t = 0; t < traj.K.size(); ++t)
        os << traj.times[t] << ',' << traj.S[t] << ',' << traj.I[t] << ',' << traj.R[t] << ',' << traj.K[t] << ','
           << traj.prevalence(t) << '\n';
    return os.str();
}

}  // namespace casebias
