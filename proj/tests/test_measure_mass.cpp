#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "tvslab/measure_mass.hpp"

using namespace tvslab;
using Catch::Matchers::WithinRel;

// Frozen targets for a = b = 2*lambda: delta * sec-law * pi/(1 - s) with
// s = (sigma_c - delta)^2/2, evaluated at 30-digit precision.

TEST_CASE("frozen masses at a=b=2lambda", "[measure_mass]") {
    const TvsParams p(2 * kLambda, 2 * kLambda);
    CHECK_THAT(expected_measure_mass(p, 0.1), WithinRel(1.1050442809381, 1e-6));
    CHECK_THAT(expected_measure_mass(p, 0.05), WithinRel(1.1172452895176492, 1e-6));
    CHECK_THAT(expected_measure_mass(p, 0.025), WithinRel(1.1283170966032643, 1e-6));
    CHECK_THAT(expected_measure_mass(p, 0.0), WithinRel(8.0 / 7.0, 1e-6));
}

TEST_CASE("masses increase toward the delta -> 0 limit", "[measure_mass]") {
    const TvsParams p(2 * kLambda, 2 * kLambda);
    double prev = 0.0;
    for (const double d : {0.2, 0.1, 0.05, 0.025, 0.0}) {
        const double m = expected_measure_mass(p, d);
        REQUIRE(m > prev);
        prev = m;
    }
}

TEST_CASE("weighted mass respects symmetry", "[measure_mass]") {
    const TvsParams p(2 * kLambda, 2 * kLambda);
    // half-disc indicator carries half the rotation-invariant mass
    const double half = expected_measure_mass(
        p, 0.1, [](Point z) { return z.real() > 0.0 ? 1.0 : 0.0; });
    CHECK_THAT(half, WithinRel(0.5 * expected_measure_mass(p, 0.1), 1e-4));
    // and a ball away from the support of nothing: f = |z|^2 weighting
    const double w = expected_measure_mass(p, 0.1, [](Point z) { return std::norm(z); });
    CHECK(w > 0.0);
    CHECK(w < expected_measure_mass(p, 0.1));
}

TEST_CASE("critical exponent at a=b=lambda still integrates", "[measure_mass]") {
    // sigma_c = 1 gives the strongest admissible exponent s = 1/2 at delta = 0
    const TvsParams p(kLambda, kLambda);
    const double limit = expected_measure_mass(p, 0.0);
    // (2/(a+b)) sin(pi/2) * pi/(1 - 1/2) = (2/pi) * 2 pi = 4
    CHECK_THAT(limit, WithinRel(4.0, 1e-4));
}

TEST_CASE("delta domain errors", "[measure_mass]") {
    const TvsParams p(2 * kLambda, 2 * kLambda);
    CHECK_THROWS_AS(expected_measure_mass(p, -0.01), std::domain_error);
    CHECK_THROWS_AS(expected_measure_mass(p, 0.5), std::domain_error);
    CHECK_THROWS_AS(expected_measure_mass(p, 0.7), std::domain_error);
}
