#pragma once

// Expected mass of the near-critical content measure
//
//   d mu_delta = delta * r_{D \ A}(z)^{-(sigma_c - delta)^2 / 2} dz
//
// supported (in the limit) on the two-valued set with levels (-a, b).
//
// For delta > 0 the expectation is exact: conditioning on the set and using
// the conditional one-point formula for the chaos with exponent
// sigma' = sigma_c - delta reduces E[mu_delta(f)] to the exponential moment
// of the radius-law exit time, which is closed form.  With start 0 in (-a,b):
//
//   E[mu_delta(f)] = delta * cos(sigma' (b-a)/2) / cos(sigma' (a+b)/2)
//                    * int_D f(z) r_D(z)^{-sigma'^2/2} dz.
//
// As delta -> 0 the prefactor tends to (2/(a+b)) sin(pi a/(a+b)) and the
// limit expectation is
//
//   E[mu(f)] = (2/(a+b)) sin(pi a/(a+b)) * int_D f(z) r_D(z)^{-sigma_c^2/2} dz.

#include <cmath>
#include <stdexcept>

#include "tvslab/exit_law.hpp"
#include "tvslab/params.hpp"
#include "tvslab/quadrature.hpp"

namespace tvslab {

template <class F>
double expected_measure_mass(const TvsParams& p, double delta, F&& f, double tol = 1e-8) {
    const double sc = sigma_critical(p);
    if (delta < 0.0 || delta >= sc)
        throw std::domain_error("expected_measure_mass: delta must lie in [0, sigma_c)");
    const double sp = sc - delta;   // chaos exponent backing the measure
    const double s = 0.5 * sp * sp; // conformal-radius exponent
    const double integral =
        disc_quadrature([&](Point z) { return f(z) * std::pow(disc_conformal_radius(z), -s); }, tol);
    if (delta > 0.0)
        return delta * exit_laplace(p, sp, 0.0) * integral;
    return 2.0 / (p.a + p.b) * std::sin(std::numbers::pi * p.a / (p.a + p.b)) * integral;
}

inline double expected_measure_mass(const TvsParams& p, double delta, double tol = 1e-8) {
    return expected_measure_mass(p, delta, [](Point) { return 1.0; }, tol);
}

} // namespace tvslab
