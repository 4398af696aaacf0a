#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "tvslab/chaos.hpp"

using namespace tvslab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double smooth_bump(Point u) {
    const double r2 = std::norm(u);
    return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
}

std::uint32_t cell_at(const LatticeDomain& d, Point z) {
    const int ci = int(std::floor((z.real() + 1.0) / d.h()));
    const int cj = int(std::floor((z.imag() + 1.0) / d.h()));
    return std::uint32_t(cj * d.n() + ci);
}

// Exact lattice mean of the normalized pairing: the Gaussian moment formula
// turns each node term into exp(-sigma^2/2 * Var(Gamma_eps)), with the
// variance taken from the exact quadratic form.
double exact_pairing_mean(const LatticeDomain& d, const WeightedRegion& reg, double sigma,
                          double eps) {
    const double s2 = sigma * sigma;
    const double amp = std::pow(eps, -0.5 * s2);
    const double scale =
        d.h() * d.h() * std::exp(0.5 * s2 * d.circle_variance_offset(eps));
    double acc = 0.0;
    for (std::size_t i = 0; i < reg.nodes.size(); ++i)
        acc += reg.weights[i] * amp *
               std::exp(-0.5 * s2 * d.circle_variance(d.coord(reg.nodes[i]), eps));
    return acc * scale;
}

} // namespace

TEST_CASE("one-point density targets", "[chaos]") {
    // int_{|z|<R} (1-|z|^2)^{-s} dz = pi (1 - (1-R^2)^{1-s}) / (1-s)
    CHECK_THAT(chaos_one_point_target(0.3, 0.5), WithinRel(0.28439016752049333, 1e-12));
    const double R = 0.25, s = 0.08;
    CHECK_THAT(disc_radial_moment(R, s),
               WithinRel(std::numbers::pi * (1.0 - std::pow(1.0 - R * R, 1.0 - s)) / (1.0 - s),
                         1e-13));
    CHECK_THAT(disc_radial_moment(0.3, 1.0), WithinRel(-std::numbers::pi * std::log(0.91), 1e-12));
    CHECK_THROWS_AS(disc_radial_moment(0.3, 1.2), std::domain_error);
    CHECK_THROWS_AS(disc_radial_moment(1.0, 0.5), std::domain_error);
}

TEST_CASE("second moment target", "[chaos]") {
    // frozen against an independent 4e7-point Monte Carlo of the double
    // integral: 0.11770537 +- 3.1e-6
    CHECK_THAT(chaos_second_moment_target(0.3, 0.5), WithinRel(0.11770537, 0.005));
    CHECK(chaos_second_moment_target(0.2, 0.5) < chaos_second_moment_target(0.3, 0.5));
    CHECK_THROWS_AS(chaos_second_moment_target(0.3, 0.0), std::domain_error);
    CHECK_THROWS_AS(chaos_second_moment_target(0.3, std::sqrt(2.0)), std::domain_error);
}

TEST_CASE("field modulus is exact and sigma=0 gives the constant field", "[chaos]") {
    LatticeDomain d(32);
    const auto f = d.sample_gff(4, 0);
    const double sigma = 0.7, eps = 0.2;
    const auto c = build_chaos(d, f, sigma, eps);
    const double amp = std::pow(eps, -0.5 * sigma * sigma);
    for (const auto& v : c.values) REQUIRE_THAT(std::abs(v), WithinRel(amp, 1e-12));

    const auto c0 = build_chaos(d, f, 0.0, eps);
    CHECK(c0.normalization == 1.0);
    for (const auto& v : c0.values) REQUIRE(v == std::complex<double>(1.0, 0.0));

    // slot is the inverse of nodes
    for (std::size_t i = 0; i < c.nodes.size(); ++i)
        REQUIRE(c.slot[std::size_t(c.nodes[i])] == std::int32_t(i));
}

TEST_CASE("negating the field conjugates the pairing", "[chaos]") {
    LatticeDomain d(32);
    const auto f = d.sample_gff(6, 0);
    GffSample neg = f;
    for (double& v : neg.values) v = -v;
    const double sigma = 0.5, eps = 0.2;
    const auto cells = cells_in_disc(d, Point(0.1, -0.1), 0.25);
    const auto cp = build_chaos(d, f, sigma, eps);
    const auto cm = build_chaos(d, neg, sigma, eps);
    const auto zp = pair_indicator(d, cp, cells);
    const auto zm = pair_indicator(d, cm, cells);
    REQUIRE_THAT(zm.real(), WithinAbs(zp.real(), 1e-12 * std::abs(zp)));
    REQUIRE_THAT(zm.imag(), WithinAbs(-zp.imag(), 1e-12 * std::abs(zp)));
    REQUIRE_THAT(cosine_observable(d, cp, cells), WithinAbs(cosine_observable(d, cm, cells),
                                                            1e-12 * std::abs(zp)));
}

TEST_CASE("pairing mean matches the Gaussian moment formula", "[chaos]") {
    LatticeDomain d(64);
    const double sigma = 0.5, eps = 0.1, R = 0.25;
    const auto cells = cells_in_disc(d, Point(0, 0), R);
    const auto reg = weighted_region(d, cells, eps);
    const double exact = exact_pairing_mean(d, reg, sigma, eps);

    const auto m = chaos_moments(d, cells, sigma, eps, 300, 42);
    REQUIRE_THAT(m.first.real(), WithinAbs(exact, 4.0 * m.first_se.real()));
    REQUIRE_THAT(m.first.imag(), WithinAbs(0.0, 4.0 * m.first_se.imag()));
    CHECK(m.second.mean > 0.0);

    // smoothing bias against the continuum density stays bounded at this
    // resolution (measured +3.5% at n=64, eps=0.1)
    CHECK_THAT(exact, WithinRel(chaos_one_point_target(R, sigma), 0.06));

    // the normalization makes the mean eps-invariant: the -log(eps) part of
    // the circle variance cancels against the amplitude, and what remains
    // depends on eps only through the tiny center-dependence of the offset
    const double e1 = exact_pairing_mean(d, weighted_region(d, cells, 0.095), sigma, 0.095);
    const double e2 = exact_pairing_mean(d, weighted_region(d, cells, 0.12), sigma, 0.12);
    CHECK_THAT(e1, WithinRel(e2, 1e-3));
}

TEST_CASE("triple target agrees with the correlation kernel", "[chaos]") {
    LatticeDomain d(64);
    const double sigma = 0.5, eps = 0.1;
    std::vector<std::vector<std::uint32_t>> regs;
    for (int k = 0; k < 3; ++k) {
        const double th = 2.0 * std::numbers::pi * k / 3.0;
        const Point c(0.3 * std::cos(th), 0.3 * std::sin(th));
        regs.push_back({cell_at(d, c)});
    }
    const auto tm = cosine_triple(d, regs[0], regs[1], regs[2], sigma, eps, 2, 1);

    double byhand = 0.0;
    std::vector<WeightedRegion> wr;
    for (const auto& r : regs) wr.push_back(weighted_region(d, r, eps));
    const double h2 = d.h() * d.h();
    for (std::size_t u = 0; u < wr[0].nodes.size(); ++u)
        for (std::size_t v = 0; v < wr[1].nodes.size(); ++v)
            for (std::size_t w = 0; w < wr[2].nodes.size(); ++w)
                byhand += wr[0].weights[u] * wr[1].weights[v] * wr[2].weights[w] * h2 * h2 * h2 *
                          h_sigma_kernel(d.coord(wr[0].nodes[u]), d.coord(wr[1].nodes[v]),
                                         d.coord(wr[2].nodes[w]), sigma);
    REQUIRE_THAT(tm.target, WithinRel(byhand, 1e-10));
}

TEST_CASE("conditional three-point closes on a synthetic two-blob set", "[chaos]") {
    LatticeDomain d(128);
    const TvsParams p(std::numbers::pi, std::numbers::pi);
    GffSample f{std::vector<double>(d.size(), 0.0), 0.0};
    for (std::size_t v = 0; v < d.size(); ++v) {
        const Point z = d.coord(std::int32_t(v));
        f.values[v] = 8.0 * smooth_bump((z - Point(0.45, 0)) / 0.3) -
                      8.0 * smooth_bump((z + Point(0.45, 0)) / 0.3);
    }
    const auto tvs = extract_tvs(d, f, p);
    REQUIRE(tvs.components.size() == 2);
    REQUIRE(tvs.components[0].label == -tvs.components[1].label);

    const double sigma = 0.3, eps = 0.047;
    const auto U = cells_in_disc(d, Point(-0.525, 0), 0.025);
    const auto V = cells_in_disc(d, Point(-0.35, 0), 0.025);
    const auto W = cells_in_disc(d, Point(0.45, 0), 0.025);
    const auto chk = conditional_three_point(d, tvs, f, U, V, W, sigma, eps, 500, 31);
    REQUIRE(chk.closed_form.support_cells_u > 0);
    REQUIRE(chk.closed_form.support_cells_v > 0);
    REQUIRE(chk.closed_form.support_cells_w > 0);
    CHECK(chk.closed_form.h_integral > 0.0);
    CHECK(chk.closed_form.rhs + 1e-15 >= chk.closed_form.lower_bound);
    REQUIRE_THAT(chk.inner.mean, WithinAbs(chk.closed_form.rhs, 4.0 * chk.inner.se));
}

TEST_CASE("degenerate sets reduce the conditional law to the plain one", "[chaos]") {
    LatticeDomain d(64);
    const TvsParams p(2 * kLambda, 2 * kLambda);
    GffSample zero{std::vector<double>(d.size(), 0.0), 0.0};
    const auto tvs = extract_tvs(d, zero, p);
    REQUIRE(tvs.degenerate());
    const auto r =
        conditional_one_point(d, tvs, zero, cells_in_disc(d, Point(0, 0), 0.3), 0.3, 0.1, 200, 77);
    REQUIRE(r.support_cells > 0);
    CHECK_THAT(r.rhs.imag(), WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(r.estimate.real(), WithinAbs(r.rhs.real(), 4.0 * r.se.real()));
    REQUIRE_THAT(r.estimate.imag(), WithinAbs(0.0, 4.0 * r.se.imag()));
}

TEST_CASE("conditional support classifies stencils consistently", "[chaos]") {
    LatticeDomain d(128);
    const TvsParams p(kLambda, kLambda);
    const auto f = d.sample_gff(1, 0);
    const auto tvs = extract_tvs(d, f, p);
    const auto cells = cells_in_disc(d, Point(0, 0), 1.0);
    const double eps = 0.05;
    const auto sup = build_conditional_support(d, tvs, cells, eps);
    REQUIRE(sup.cells.size() + sup.dropped_cells == cells.size());
    REQUIRE(sup.cells.size() > 0);
    REQUIRE(std::is_sorted(sup.comps.begin(), sup.comps.end()));
    for (const std::int32_t k : sup.comps) REQUIRE(k >= 0);
    for (std::size_t i = 0; i < sup.nodes.size(); i += 13) {
        REQUIRE(sup.node_comp[i] == stencil_component(d, tvs, sup.nodes[i], eps));
        REQUIRE(sup.weights[i] > 0.0);
    }
}

TEST_CASE("regions and separations", "[chaos]") {
    LatticeDomain d(64);
    const auto cells = cells_in_disc(d, Point(0, 0), 0.3);
    // cell-center count tracks the area
    const double expect = std::numbers::pi * 0.09 / (d.h() * d.h());
    CHECK(std::abs(double(cells.size()) - expect) < 0.1 * expect);
    CHECK(region_separation(d, cells, cells) == 0.0);
    const auto far = cells_in_disc(d, Point(0.6, 0), 0.1);
    CHECK(region_separation(d, cells, far) > 0.15);
    CHECK(region_separation(d, cells, far) < 0.21);
}

TEST_CASE("construction and pairing validation", "[chaos]") {
    LatticeDomain d(32);
    const auto f = d.sample_gff(2, 0);
    CHECK_THROWS_AS(build_chaos(d, f, 0.5, 2.0 * d.h()), std::domain_error);
    GffSample bad = f;
    bad.values.pop_back();
    CHECK_THROWS_AS(build_chaos(d, bad, 0.5, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(chaos_values_at(d, f.values, 0.0, -0.1, 0.2, {d.node(16, 16)}),
                    std::domain_error);

    // regions must keep clear of the eps-collar
    const auto rim = cells_in_disc(d, Point(0.9, 0), 0.05);
    REQUIRE_FALSE(rim.empty());
    CHECK_THROWS_AS(weighted_region(d, rim, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(weighted_region(d, {std::uint32_t(32 * 32)}, 0.1), std::invalid_argument);
    const auto edge = cells_in_disc(d, Point(0.86, 0), 0.04);
    REQUIRE_FALSE(edge.empty());
    const auto reg = weighted_region(d, edge, 0.05);
    const auto c = build_chaos(d, f, 0.5, 0.15);
    CHECK_THROWS_AS(pair_indicator(d, c, reg), std::invalid_argument);

    // triples need pairwise separation above 2 eps
    const auto u = cells_in_disc(d, Point(-0.2, 0), 0.05);
    const auto v = cells_in_disc(d, Point(0.0, 0), 0.05);
    const auto w = cells_in_disc(d, Point(0.4, 0), 0.05);
    CHECK_THROWS_AS(cosine_triple(d, u, v, w, 0.5, 0.2, 2, 1), std::invalid_argument);

    const TvsParams p(2 * kLambda, 2 * kLambda);
    const auto tvs = extract_tvs(d, f, p);
    const auto cells = cells_in_disc(d, Point(0, 0), 0.2);
    CHECK_THROWS_AS(conditional_one_point(d, tvs, f, cells, 0.6, 0.2, 10, 1),
                    std::domain_error);
    CHECK_THROWS_AS(conditional_one_point(d, tvs, f, cells, 0.3, 0.2, 1, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        conditional_three_point_rhs(d, tvs, u, v, w, 0.3, 0.05),
        std::invalid_argument);   // same separation rule
    const TvsParams asym(kLambda, 2 * kLambda);
    const auto tvs2 = extract_tvs(d, f, asym);
    const auto far1 = cells_in_disc(d, Point(-0.5, 0), 0.04);
    const auto far2 = cells_in_disc(d, Point(0.0, 0.5), 0.04);
    const auto far3 = cells_in_disc(d, Point(0.5, 0), 0.04);
    CHECK_THROWS_AS(conditional_three_point_rhs(d, tvs2, far1, far2, far3, 0.2, 0.05),
                    std::domain_error);
}

TEST_CASE("componentwise mean and error of complex samples", "[chaos]") {
    const auto [m, se] = complex_mean_se({{1.0, 2.0}, {3.0, 4.0}});
    CHECK_THAT(m.real(), WithinAbs(2.0, 1e-15));
    CHECK_THAT(m.imag(), WithinAbs(3.0, 1e-15));
    CHECK_THAT(se.real(), WithinAbs(1.0, 1e-12));
    CHECK_THAT(se.imag(), WithinAbs(1.0, 1e-12));
}
