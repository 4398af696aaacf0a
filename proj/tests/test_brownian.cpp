#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tvslab/brownian.hpp"

using namespace tvslab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("paths replay independently of chunking", "[brownian]") {
    const TvsParams p(kLambda, kLambda);
    const double dt = 1e-3;
    std::vector<double> whole(64);
    exit_times_into(p, 17, 0, 64, dt, 1e3, whole.data());
    std::vector<double> parts(64);
    exit_times_into(p, 17, 0, 10, dt, 1e3, parts.data());
    exit_times_into(p, 17, 10, 30, dt, 1e3, parts.data() + 10);
    exit_times_into(p, 17, 40, 24, dt, 1e3, parts.data() + 40);
    REQUIRE(whole == parts);
}

TEST_CASE("mean exit time is a*b", "[brownian]") {
    // E[tau] = a*b for Brownian motion from 0 in (-a, b); the Euler walk
    // overshoots by O(sqrt(dt)), well inside 4 SE at this sample size.
    const TvsParams p(kLambda, 2 * kLambda);
    const auto tau = exit_times_mc(p, 4000, 1e-4, 3);
    const MeanSe m = mean_se(tau);
    REQUIRE_THAT(m.mean, WithinAbs(p.a * p.b, 4.0 * m.se + 0.05));
}

TEST_CASE("empirical law matches the series cdf", "[brownian]") {
    const TvsParams p(2 * kLambda, 2 * kLambda);
    const ExitLaw law(p);
    const auto tau = exit_times_mc(p, 4000, 1e-4, 5);
    const double ks = ks_statistic(tau, [&](double t) { return law.cdf(t); });
    // 4000 samples: KS noise floor ~ 1.36/sqrt(n) = 0.022
    CHECK(ks < 0.035);
}

TEST_CASE("laplace moment matches the closed form", "[brownian]") {
    const TvsParams p(2 * kLambda, 2 * kLambda);
    const auto tau = exit_times_mc(p, 4000, 1e-4, 7);
    for (const double f : {0.5, 0.8}) {
        const double sigma = f * sigma_critical(p);
        const MeanSe m = laplace_mc(tau, sigma);
        INFO("sigma = " << sigma);
        REQUIRE_THAT(m.mean, WithinAbs(exit_laplace(p, sigma), 4.0 * m.se + 0.02));
    }
}

TEST_CASE("time cap truncates the recorded times", "[brownian]") {
    const TvsParams p(kLambda, kLambda);
    std::vector<double> tau(32);
    exit_times_into(p, 1, 0, 32, 1e-3, 0.05, tau.data());
    for (const double t : tau) REQUIRE(t <= 0.05 + 2e-3);
}

TEST_CASE("mean_se on a fixed array", "[brownian]") {
    const MeanSe m = mean_se({1.0, 2.0, 3.0, 4.0});
    CHECK_THAT(m.mean, WithinAbs(2.5, 1e-15));
    // sample variance 5/3, se = sqrt(5/3/4)
    CHECK_THAT(m.se, WithinRel(std::sqrt(5.0 / 12.0), 1e-12));
    CHECK(m.n == 4);
    CHECK(mean_se({}).n == 0);
}

TEST_CASE("ks statistic detects a wrong law", "[brownian]") {
    std::vector<double> u(1000);
    for (int i = 0; i < 1000; ++i) u[i] = (i + 0.5) / 1000.0;
    CHECK(ks_statistic(u, [](double x) { return x; }) < 0.002);
    CHECK(ks_statistic(u, [](double x) { return x * x; }) > 0.2);
    CHECK_THAT(ks_statistic(u, [](double x) { return x < 0.5 ? 0.0 : 1.0; }),
               WithinAbs(0.5, 0.01));
}

TEST_CASE("dt validation", "[brownian]") {
    const TvsParams p(kLambda, kLambda);
    double out;
    CHECK_THROWS_AS(exit_times_into(p, 1, 0, 1, 0.0, 1.0, &out), std::domain_error);
    CHECK_THROWS_AS(exit_times_into(p, 1, 0, 1, -1e-3, 1.0, &out), std::domain_error);
}
