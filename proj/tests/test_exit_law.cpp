#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tvslab/exit_law.hpp"

using namespace tvslab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

// Survival oracles: eigenfunction series summed independently at 30-digit
// precision (mpmath).  Laplace oracles: resolvent series
// 1 + theta sum_k b_k sin(l_k x0)/(l_k^2/2 - theta), independent of the
// cosine closed form used by the implementation.

TEST_CASE("survival matches the frozen series values", "[exit_law]") {
    struct Row {
        double a, b, t, value;
    };
    const Row rows[] = {
        {1, 1, 0.5, 0.94735785020969425}, {1, 1, 1, 0.76754496545576536},
        {1, 1, 2, 0.46834627545049943},   {1, 1, 4, 0.17231422795098488},
        {2, 2, 0.5, 0.99998224770726472}, {2, 2, 1, 0.9966393673269465},
        {2, 2, 2, 0.94735785020969425},   {2, 2, 4, 0.76754496545576536},
        {1, 3, 0.5, 0.97367892505167001}, {1, 3, 1, 0.88376758613847934},
        {1, 3, 2, 0.7324497134065896},    {1, 3, 4, 0.54940264843237877},
    };
    for (const Row& r : rows) {
        const ExitLaw law(TvsParams(r.a * kLambda, r.b * kLambda));
        INFO("a=" << r.a << " b=" << r.b << " t=" << r.t);
        REQUIRE_THAT(exit_survival(law, r.t), WithinAbs(r.value, 1e-12));
    }
}

TEST_CASE("laplace matches the frozen resolvent values", "[exit_law]") {
    struct Row {
        double a, b, frac, value;
    };
    const Row rows[] = {
        {1, 1, 0.5, 1.414213562373095},  {1, 1, 0.8, 3.2360679774997896},
        {2, 2, 0.5, 1.414213562373095},  {2, 2, 0.8, 3.2360679774997896},
        {1, 3, 0.5, 1.3065629648763765}, {1, 3, 0.8, 2.6180339887498948},
    };
    for (const Row& r : rows) {
        const TvsParams p(r.a * kLambda, r.b * kLambda);
        INFO("a=" << r.a << " b=" << r.b << " sigma=" << r.frac << "*sigma_c");
        REQUIRE_THAT(exit_laplace(p, r.frac * sigma_critical(p)), WithinRel(r.value, 1e-12));
    }
}

TEST_CASE("survival is a proper tail function", "[exit_law]") {
    const ExitLaw law(TvsParams(2 * kLambda, 2 * kLambda));
    CHECK_THAT(law.survival(0.0), WithinAbs(1.0, 2e-3));   // Gibbs at t = 0
    double prev = 1.0 + 1e-9;
    for (double t = 0.25; t <= 16.0; t *= 2.0) {
        const double s = law.survival(t);
        REQUIRE(s < prev);
        REQUIRE(s > 0.0);
        prev = s;
    }
    CHECK_THAT(law.cdf(0.0), WithinAbs(0.0, 2e-3));
    CHECK_THAT(law.cdf(40.0), WithinAbs(1.0, 1e-12));
}

TEST_CASE("survival decays at the principal rate", "[exit_law]") {
    // P{tau > t} = c_star exp(-(2-d) t) (1 + O(e^{-rho t}))
    const TvsParams p(kLambda, 3 * kLambda);
    const ExitLaw law(p);
    const double rate = 2.0 - dimension(p);
    for (const double t : {8.0, 12.0}) {
        const double lead = c_star(p) * std::exp(-rate * t);
        REQUIRE_THAT(law.survival(t), WithinRel(lead, std::exp(-law.rho * t) * 2.0));
    }
}

TEST_CASE("off-center start and domain errors", "[exit_law]") {
    const TvsParams p(kLambda, kLambda);
    // starting next to an endpoint exits almost immediately
    const ExitLaw law(p);
    CHECK(law.survival(1.0, 0.02) < law.survival(1.0, 0.5 * law.L));
    CHECK(law.survival(1.0, -1.0) == 0.0);
    CHECK_THROWS_AS(law.survival(-0.5), std::domain_error);
    CHECK_THROWS_AS(exit_laplace(p, sigma_critical(p)), std::domain_error);
    CHECK_THROWS_AS(exit_laplace(p, -0.1), std::domain_error);
    CHECK_THROWS_AS(exit_laplace(p, 0.5, p.b + 0.1), std::domain_error);
}

TEST_CASE("laplace grows without bound toward sigma_c", "[exit_law]") {
    const TvsParams p(2 * kLambda, 2 * kLambda);
    const double sc = sigma_critical(p);
    double prev = 1.0;
    for (const double f : {0.5, 0.9, 0.99, 0.999}) {
        const double v = exit_laplace(p, f * sc);
        REQUIRE(v > prev);
        prev = v;
    }
    CHECK(prev > 500.0);
}
