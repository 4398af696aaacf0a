#pragma once

// Closed-form unit-disc potential theory and the correlation functions of the
// purely imaginary multiplicative chaos V^{i sigma} = lim eps^{-sigma^2/2} e^{i sigma Gamma_eps}.
//
// Green's function (Brownian normalization, no 2*pi):
//   G(z,w) = log|1 - z*conj(w)| - log|z - w|,   G(0,w) = -log|w|.
// Conformal radius: r(z) = 1 - |z|^2 = exp(lim_{w->z} G(z,w) + log|z-w|).
//
// n-point correlation with m charges +sigma at x_j and n charges -sigma at y_k:
//
//   < prod V^{i sigma}(x_j) prod V^{-i sigma}(y_k) >
//     = prod_l r(z_l)^{-sigma^2/2}
//       * exp(-sigma^2 [ sum_{j<j'} G(x_j,x_j') + sum_{k<k'} G(y_k,y_k') ])
//       * exp(+sigma^2 sum_{j,k} G(x_j,y_k)).
//
// The kernel H^sigma(x,y,z) is twice the sum of the four three-point
// correlations with charge patterns (+++), (++-), (+-+), (-++); it gives
// E[C_U C_V C_W] for cosine observables C_U = 2 (cos(sigma Gamma), 1_U) by
// integration over U x V x W.  Each of the four summands is at most H/4.
//
// All functions here are domain-generic: they accept Green's-function and
// conformal-radius accessors, so the same code evaluates both closed-form
// disc targets and per-component quantities of an extracted two-valued set.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace tvslab {

using Point = std::complex<double>;

inline double disc_green(Point z, Point w) {
    if (std::abs(z) >= 1.0 || std::abs(w) >= 1.0)
        throw std::domain_error("disc_green: points must lie strictly inside the unit disc");
    const double d = std::abs(z - w);
    if (d == 0.0)
        throw std::domain_error("disc_green: coincident points (logarithmic singularity)");
    return std::log(std::abs(1.0 - z * std::conj(w))) - std::log(d);
}

inline double disc_conformal_radius(Point z) {
    const double n = std::norm(z);
    if (n >= 1.0)
        throw std::domain_error("disc_conformal_radius: point must lie strictly inside the unit disc");
    return 1.0 - n;
}

template <class Green, class Radius>
double correlation(const std::vector<Point>& xs, const std::vector<Point>& ys,
                   double sigma, Green&& green, Radius&& radius) {
    const double s2 = sigma * sigma;
    double log_val = 0.0;
    for (const Point& x : xs) log_val += -0.5 * s2 * std::log(radius(x));
    for (const Point& y : ys) log_val += -0.5 * s2 * std::log(radius(y));
    for (std::size_t j = 0; j < xs.size(); ++j)
        for (std::size_t j2 = j + 1; j2 < xs.size(); ++j2)
            log_val -= s2 * green(xs[j], xs[j2]);
    for (std::size_t k = 0; k < ys.size(); ++k)
        for (std::size_t k2 = k + 1; k2 < ys.size(); ++k2)
            log_val -= s2 * green(ys[k], ys[k2]);
    for (const Point& x : xs)
        for (const Point& y : ys)
            log_val += s2 * green(x, y);
    return std::exp(log_val);
}

struct CorrelationKernelInput {
    std::vector<Point> xs;   // charge +sigma
    std::vector<Point> ys;   // charge -sigma
    double sigma = 0.5;
    std::function<double(Point, Point)> green = disc_green;
    std::function<double(Point)> radius = disc_conformal_radius;
};

inline double correlation(const CorrelationKernelInput& in) {
    if (!(in.sigma > 0.0) || in.sigma >= std::sqrt(2.0))
        throw std::domain_error("correlation: sigma must lie in (0, sqrt(2))");
    return correlation(in.xs, in.ys, in.sigma, in.green, in.radius);
}

// Twice the sum of the four three-point correlations; charge patterns
// (x y z) = (+++), (++-), (+-+), (-++).
template <class Green, class Radius>
double h_sigma_kernel(Point x, Point y, Point z, double sigma,
                      Green&& green, Radius&& radius) {
    const double s2 = sigma * sigma;
    const double pref = std::exp(-0.5 * s2 * (std::log(radius(x)) + std::log(radius(y)) +
                                              std::log(radius(z))));
    const double gxy = green(x, y), gxz = green(x, z), gyz = green(y, z);
    const double t_ppp = std::exp(-s2 * (gxy + gxz + gyz));
    const double t_ppm = std::exp(-s2 * (gxy - gxz - gyz));  // z carries -sigma
    const double t_pmp = std::exp(-s2 * (gxz - gxy - gyz));  // y carries -sigma
    const double t_mpp = std::exp(-s2 * (gyz - gxy - gxz));  // x carries -sigma
    return 2.0 * pref * (t_ppp + t_ppm + t_pmp + t_mpp);
}

inline double h_sigma_kernel(Point x, Point y, Point z, double sigma) {
    return h_sigma_kernel(x, y, z, sigma, disc_green, disc_conformal_radius);
}

} // namespace tvslab
