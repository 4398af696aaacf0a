#pragma once

// Level parameters for two-valued sets of the 2D Gaussian free field.
//
// The field is normalized so that level lines carry height gap 2*lambda with
// lambda = pi/2.  A two-valued set with levels (-a, b) exists iff a + b >= 2*lambda.
// Derived constants:
//
//   d       = 2 - 2*lambda^2/(a+b)^2      (fractal dimension, in [3/2, 2))
//   sigma_c = 2*lambda/(a+b)              (critical chaos exponent, in (0, 1])
//   c_star  = (4/pi) * sin(pi*a/(a+b))    (one-point hitting constant)
//
// The identity d = 2 - sigma_c^2/2 holds exactly.

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tvslab {

inline constexpr double kLambda = std::numbers::pi / 2.0;

struct TvsParams {
    double a;
    double b;
    double lambda = kLambda;

    TvsParams(double a_, double b_) : a(a_), b(b_) {
        if (!(a > 0.0) || !(b > 0.0))
            throw std::domain_error("TvsParams: levels a, b must be positive");
        if (a + b < 2.0 * lambda - 1e-12)
            throw std::domain_error("TvsParams: a + b < 2*lambda, two-valued set does not exist");
    }

    double band_width() const { return a + b; }
};

inline double dimension(const TvsParams& p) {
    const double s = p.a + p.b;
    return 2.0 - 2.0 * p.lambda * p.lambda / (s * s);
}

inline double sigma_critical(const TvsParams& p) {
    return 2.0 * p.lambda / (p.a + p.b);
}

inline double c_star(const TvsParams& p) {
    return 4.0 / std::numbers::pi * std::sin(std::numbers::pi * p.a / (p.a + p.b));
}

} // namespace tvslab
