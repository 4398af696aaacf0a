#pragma once

// Brute-force Brownian first-exit oracle for the interval (-a, b).
//
// Paths follow the Euler walk X_{k+1} = X_k + sqrt(dt) * N(0,1) from X_0 = 0
// with the barrier checked at every step; the recorded exit time is k*dt at
// the first step outside (-a, b).  This is the reference law every series or
// closed-form exit quantity is validated against.  Discrete barrier
// monitoring biases tau upward by O(sqrt(dt)); at dt = 1e-5 the effect on the
// CDF is a few parts in a thousand, which the comparison tolerances absorb.
//
// Each path consumes its own counter-RNG stream keyed by (seed, path index),
// so results are independent of scheduling and block sizes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tvslab/exit_law.hpp"
#include "tvslab/params.hpp"
#include "tvslab/rng.hpp"

namespace tvslab {

inline void exit_times_into(const TvsParams& p, std::uint64_t seed, std::size_t first_path,
                            std::size_t count, double dt, double t_cap, double* out) {
    if (!(dt > 0.0)) throw std::domain_error("exit_times_into: dt must be positive");
    const double sq = std::sqrt(dt);
    const double lo = -p.a, hi = p.b;
    const std::uint64_t cap_steps =
        t_cap > 0.0 && std::isfinite(t_cap) ? std::uint64_t(t_cap / dt) + 1 : ~std::uint64_t(0);
    for (std::size_t i = 0; i < count; ++i) {
        CounterRng rng(seed, first_path + i);
        double x = 0.0;
        std::uint64_t k = 0;
        while (true) {
            ++k;
            x += sq * rng.normal_fast();
            if (x <= lo || x >= hi || k >= cap_steps) break;
        }
        out[i] = double(k) * dt;
    }
}

inline std::vector<double> exit_times_mc(const TvsParams& p, std::size_t n_paths, double dt,
                                         std::uint64_t seed,
                                         double t_cap = std::numeric_limits<double>::infinity()) {
    std::vector<double> tau(n_paths);
    exit_times_into(p, seed, 0, n_paths, dt, t_cap, tau.data());
    return tau;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
    MeanSe r;
    r.n = v.size();
    if (r.n == 0) return r;
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(r.n);
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    r.mean = m;
    r.se = r.n > 1 ? std::sqrt(s2 / double(r.n - 1) / double(r.n)) : 0.0;
    return r;
}

// Monte Carlo mean and standard error of exp(sigma^2 tau / 2).
inline MeanSe laplace_mc(const std::vector<double>& tau, double sigma) {
    std::vector<double> w(tau.size());
    const double c = 0.5 * sigma * sigma;
    for (std::size_t i = 0; i < tau.size(); ++i) w[i] = std::exp(c * tau[i]);
    return mean_se(w);
}

// Kolmogorov-Smirnov distance between the empirical law of the samples and a
// reference CDF.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - double(i + 1) / n));
        d = std::max(d, std::abs(f - double(i) / n));
    }
    return d;
}

} // namespace tvslab
