#pragma once

// Exit law of one-dimensional Brownian motion from the interval (-a, b),
// started at 0.  This is the law of log r_D(z) - log r_{D \ A}(z) for the
// two-valued set with levels (-a, b) (field units, lambda = pi/2).
//
// After shifting to (0, L) with L = (a+b)*pi/(2*lambda) and start
// x0 = a*pi/(2*lambda), the survival probability solves the heat equation
// with absorbing ends and has the eigenfunction expansion
//
//   P{tau > t} = u(t, x0),   u(t,x) = sum_k b_k exp(-lambda_k^2 t/2) sin(lambda_k x)
//   lambda_k = k*pi/L,       b_k = (2/L) int_0^L sin(lambda_k x) dx = 2(1-(-1)^k)/(k*pi)
//
// Leading behavior: u(t, x0) = c_star * exp(-(2-d) t) * (1 + O(exp(-rho t)))
// with rho = (lambda_2^2 - lambda_1^2)/2.
//
// The exponential moment (Laplace transform at negative argument) is closed
// form: for sigma < sigma_c and start x in (-a, b),
//
//   E^x[exp(sigma^2 tau / 2)] = cos(sigma*(x - (b-a)/2)) / cos(sigma*(a+b)/2),
//
// the symmetric-interval formula cos(sigma x)/cos(sigma a) centered at the
// interval midpoint.  The underlying martingale exp(i sigma B_t + sigma^2 t/2)
// is uniformly integrable only for sigma below sigma_c; larger sigma is
// rejected.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>

#include "tvslab/params.hpp"

namespace tvslab {

struct ExitLaw {
    double L;        // interval length after rescaling to (0, L)
    double x0;       // starting point in (0, L)
    double rho;      // spectral gap (lambda_2^2 - lambda_1^2)/2
    double tol;      // truncation tolerance for t > 0

    explicit ExitLaw(const TvsParams& p, double tolerance = 1e-12)
        : L((p.a + p.b) * std::numbers::pi / (2.0 * p.lambda)),
          x0(p.a * std::numbers::pi / (2.0 * p.lambda)),
          rho(0.0),
          tol(tolerance) {
        const double l1 = eigenvalue(1), l2 = eigenvalue(2);
        rho = 0.5 * (l2 * l2 - l1 * l1);
    }

    double eigenvalue(std::size_t k) const { return double(k) * std::numbers::pi / L; }

    static double coefficient(std::size_t k) {
        if (k % 2 == 0) return 0.0;
        return 4.0 / (double(k) * std::numbers::pi);
    }

    // Truncation order: the k-th term is bounded by (4/pi) exp(-lambda_k^2 t/2),
    // so K ~ L*sqrt(2 ln(1/tol))/(pi sqrt(t)) suffices for t > 0.  At t = 0 the
    // series converges only conditionally (Gibbs); a fixed large K is used and
    // the value is accurate to about 1e-3 there.
    std::size_t truncation_order(double t) const {
        if (t <= 0.0) return 10000;
        const double k = L * std::sqrt(2.0 * std::log(1.0 / tol)) / (std::numbers::pi * std::sqrt(t));
        return std::max<std::size_t>(20, std::size_t(std::ceil(k)));
    }

    // P{tau > t} for the Brownian exit time tau from (0, L) started at x.
    double survival(double t, double x) const {
        if (t < 0.0) throw std::domain_error("ExitLaw::survival: t must be nonnegative");
        if (x <= 0.0 || x >= L) return 0.0;
        const std::size_t K = truncation_order(t);
        double s = 0.0;
        for (std::size_t k = K; k >= 1; --k) {   // small terms first
            const double bk = coefficient(k);
            if (bk == 0.0) continue;
            const double lk = eigenvalue(k);
            s += bk * std::exp(-0.5 * lk * lk * t) * std::sin(lk * x);
        }
        return s;
    }

    double survival(double t) const { return survival(t, x0); }

    // CDF of tau, clamped to [0, 1] to absorb truncation wiggle near t = 0.
    double cdf(double t) const {
        const double f = 1.0 - survival(t);
        return f < 0.0 ? 0.0 : (f > 1.0 ? 1.0 : f);
    }
};

inline double exit_survival(const ExitLaw& law, double t) { return law.survival(t); }

// E^x[exp(sigma^2 tau/2)] for tau the first exit of (-a, b); requires
// sigma < sigma_c and x strictly inside the interval.
inline double exit_laplace(const TvsParams& p, double sigma, double x = 0.0) {
    if (sigma < 0.0)
        throw std::domain_error("exit_laplace: sigma must be nonnegative");
    if (sigma >= sigma_critical(p))
        throw std::domain_error("exit_laplace: sigma >= sigma_c, exponential moment diverges");
    if (x <= -p.a || x >= p.b)
        throw std::domain_error("exit_laplace: start x outside (-a, b)");
    const double mid = 0.5 * (p.b - p.a);
    const double half = 0.5 * (p.a + p.b);
    return std::cos(sigma * (x - mid)) / std::cos(sigma * half);
}

} // namespace tvslab
