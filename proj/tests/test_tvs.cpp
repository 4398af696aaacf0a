#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <vector>

#include "tvslab/tvs.hpp"

using namespace tvslab;
using Catch::Matchers::WithinAbs;

namespace {

bool crossing_ring_connected(const TvsApprox& tvs, const Component& c) {
    std::set<std::size_t> cells;
    for (const Point& p : c.crossing_points) cells.insert(tvs.cell_of(p));
    if (cells.empty()) return false;
    std::vector<std::size_t> stack = {*cells.begin()};
    std::set<std::size_t> seen = {*cells.begin()};
    const int n = tvs.n;
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        const int ci = int(cur % std::size_t(n)), cj = int(cur / std::size_t(n));
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                const int ni = ci + di, nj = cj + dj;
                if ((di == 0 && dj == 0) || ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
                const std::size_t nc = tvs.cell_index(ni, nj);
                if (cells.count(nc) && !seen.count(nc)) {
                    seen.insert(nc);
                    stack.push_back(nc);
                }
            }
    }
    return seen.size() == cells.size();
}

// two-sample KS; ties (the atom at zero) are consumed on both sides before
// the gap is recorded
double ks_two_sample(std::vector<double> x, std::vector<double> y) {
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double ks = 0;
    std::size_t i = 0, j = 0;
    while (i < x.size() || j < y.size()) {
        const double v = (i < x.size() && (j == y.size() || x[i] <= y[j])) ? x[i] : y[j];
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        ks = std::max(ks, std::abs(double(i) / double(x.size()) - double(j) / double(y.size())));
    }
    return ks;
}

} // namespace

TEST_CASE("extraction is deterministic", "[tvs]") {
    LatticeDomain d(64);
    const TvsParams p(kLambda, kLambda);
    const auto f = d.sample_gff(1, 0);
    const auto t1 = extract_tvs(d, f, p);
    const auto t2 = extract_tvs(d, f, p);
    REQUIRE(t1.frontier == t2.frontier);
    REQUIRE(t1.node_reachable == t2.node_reachable);
    REQUIRE(t1.components.size() == t2.components.size());
    for (std::size_t k = 0; k < t1.components.size(); ++k) {
        CHECK(t1.components[k].nodes == t2.components[k].nodes);
        CHECK(t1.components[k].label == t2.components[k].label);
    }
}

TEST_CASE("reachability and components partition the nodes", "[tvs]") {
    LatticeDomain d(64);
    const TvsParams p(kLambda, kLambda);
    const auto f = d.sample_gff(2, 0);
    const auto tvs = extract_tvs(d, f, p);
    REQUIRE_FALSE(tvs.degenerate());

    for (std::size_t v = 0; v < d.size(); ++v) {
        if (tvs.node_reachable[v])
            REQUIRE(tvs.component_of[v] == -1);
        else {
            REQUIRE(tvs.component_of[v] >= 0);
            REQUIRE(std::size_t(tvs.component_of[v]) < tvs.components.size());
        }
    }
    std::size_t in_components = 0;
    for (std::size_t k = 0; k < tvs.components.size(); ++k) {
        const Component& c = tvs.components[k];
        REQUIRE_FALSE(c.nodes.empty());
        REQUIRE(std::is_sorted(c.nodes.begin(), c.nodes.end()));
        in_components += c.nodes.size();
        for (const std::int32_t v : c.nodes)
            REQUIRE(tvs.component_of[std::size_t(v)] == std::int32_t(k));
        CHECK((c.label == p.b || c.label == -p.a));
        CHECK(std::size_t(c.crossings_low + c.crossings_high) == c.crossing_points.size());
        CHECK(c.crossing_points.size() > 0);
        if (c.label == p.b)
            CHECK(c.crossings_high >= c.crossings_low);
        else
            CHECK(c.crossings_low >= c.crossings_high);
    }
    std::size_t reached = 0;
    for (const auto r : tvs.node_reachable) reached += r;
    CHECK(reached + in_components == d.size());

    std::size_t nonzero_cells = 0;
    for (const auto m : tvs.frontier) nonzero_cells += m != 0;
    CHECK(nonzero_cells == tvs.frontier_cell_count);
    for (const Component& c : tvs.components)
        for (const Point& q : c.crossing_points) CHECK(tvs.frontier[tvs.cell_of(q)] != 0);
}

TEST_CASE("component labels carry the sign of the deep field value", "[tvs]") {
    // the inradius center sits one component-field fluctuation away from the
    // label, so agreement is strong but not sure; measured 0.946 at this size
    const TvsParams p(kLambda, kLambda);
    LatticeDomain d(128);
    std::size_t comps = 0, agree = 0;
    for (std::uint64_t s = 1; s <= 8; ++s) {
        const auto f = d.sample_gff(s, 0);
        const auto tvs = extract_tvs(d, f, p);
        for (std::size_t k = 0; k < tvs.components.size(); ++k) {
            const std::int32_t ctr = component_inradius_center(d, tvs, k);
            REQUIRE(tvs.component_of[std::size_t(ctr)] == std::int32_t(k));
            const double val = f.values[std::size_t(ctr)] + f.boundary_shift;
            ++comps;
            if ((tvs.components[k].label > 0) == (val > 0)) ++agree;
        }
    }
    REQUIRE(comps > 3000);
    CHECK(double(agree) / double(comps) > 0.90);
}

TEST_CASE("crossing cells of each component form one 8-connected ring", "[tvs]") {
    const TvsParams p(kLambda, kLambda);
    LatticeDomain d(64);
    for (std::uint64_t s = 1; s <= 8; ++s) {
        const auto f = d.sample_gff(s, 0);
        const auto tvs = extract_tvs(d, f, p);
        for (const Component& c : tvs.components) {
            INFO("seed " << s << ", component with " << c.nodes.size() << " nodes");
            REQUIRE(crossing_ring_connected(tvs, c));
        }
    }
}

TEST_CASE("frontier thins under refinement at the balanced band", "[tvs]") {
    const TvsParams p(kLambda, kLambda);
    double frac[2] = {0, 0};
    const int sizes[2] = {64, 128};
    for (int k = 0; k < 2; ++k) {
        LatticeDomain d(sizes[k]);
        for (std::uint64_t s = 1; s <= 8; ++s) {
            const auto tvs = extract_tvs(d, d.sample_gff(s, 0), p);
            frac[k] += double(tvs.frontier_cell_count) / double(sizes[k]) / double(sizes[k]);
        }
        frac[k] /= 8.0;
    }
    INFO("fractions " << frac[0] << " -> " << frac[1]);
    CHECK(frac[1] < frac[0]);
}

TEST_CASE("subset solver reproduces disc potential theory", "[tvs]") {
    LatticeDomain d(64);
    std::vector<std::int32_t> all(d.size());
    for (std::size_t v = 0; v < d.size(); ++v) all[v] = std::int32_t(v);
    SubsetSolver s(d, all);

    // conformal radius of the whole disc: 1 - |z|^2
    for (const auto [i, j] : {std::array{32, 32}, std::array{42, 38}, std::array{20, 30}}) {
        const std::int32_t v = d.node(i, j);
        REQUIRE_THAT(s.conformal_radius_at(v), WithinAbs(1.0 - std::norm(d.coord(v)), 0.01));
    }

    const auto u = s.dirichlet([](Point z) { return z.real(); });
    double worst = 0;
    for (std::size_t r = 0; r < all.size(); ++r)
        worst = std::max(worst, std::abs(u[r] - d.coord(std::int32_t(r)).real()));
    CHECK(worst < 1e-10);

    // the full-domain subset green function is the domain green function
    const std::int32_t va = d.node(32, 32), vb = d.node(40, 36);
    CHECK_THAT(s.green_at(va, vb), WithinAbs(d.discrete_green(va)[std::size_t(vb)], 1e-9));
    CHECK_THAT(s.green_at(va, vb), WithinAbs(s.green_at(vb, va), 1e-9));
    CHECK(s.green_at(va, va) > s.green_at(va, vb));

    CHECK(s.local(va) >= 0);
    CHECK_THROWS_AS(SubsetSolver(d, {}), std::invalid_argument);
    SubsetSolver small(d, {d.node(30, 30), d.node(31, 30)});
    CHECK(small.local(va) == -1);
    CHECK_THROWS_AS(small.conformal_radius_at(va), std::domain_error);
    CHECK_THROWS_AS(small.green_at(va, d.node(30, 30)), std::domain_error);
}

TEST_CASE("resampled components keep their labels on average", "[tvs]") {
    const TvsParams p(kLambda, kLambda);
    LatticeDomain d(128);
    const auto f = d.sample_gff(3, 0);
    const auto tvs = extract_tvs(d, f, p);
    std::size_t big = 0;
    for (std::size_t k = 1; k < tvs.components.size(); ++k)
        if (tvs.components[k].nodes.size() > tvs.components[big].nodes.size()) big = k;
    REQUIRE(tvs.components[big].nodes.size() > 500);
    const std::int32_t ctr = component_inradius_center(d, tvs, big);

    const int M = 200;
    double s1 = 0, s2 = 0;
    for (int r = 0; r < M; ++r) {
        const auto g = markov_resample(d, tvs, f, 99, std::uint64_t(r));
        const double val = g.values[std::size_t(ctr)] + g.boundary_shift;
        s1 += val;
        s2 += val * val;
    }
    const double mean = s1 / M;
    const double se = std::sqrt((s2 - M * mean * mean) / (M - 1) / M);
    REQUIRE_THAT(mean, WithinAbs(tvs.components[big].label, 3.0 * se));

    // reachable-zone values never move, and rounds are reproducible
    const auto g1 = markov_resample(d, tvs, f, 99, 7);
    const auto g2 = markov_resample(d, tvs, f, 99, 7);
    REQUIRE(g1.values == g2.values);
    const auto g3 = markov_resample(d, tvs, f, 99, 8);
    REQUIRE(g1.values != g3.values);
    for (std::size_t v = 0; v < d.size(); ++v)
        if (tvs.node_reachable[v]) REQUIRE(g1.values[v] == f.values[v]);
}

TEST_CASE("resampling preserves the law of the radius defect", "[tvs]") {
    // resampled fields should look like fresh fields; compare the radius-law
    // value at the origin between fresh extractions and re-extractions after
    // one resampling round.  samples whose origin cell is on the frontier
    // carry no value and are skipped (the skip rates differ, a resolution
    // artifact, but the kept values should agree in law)
    const TvsParams p(2 * kLambda, 2 * kLambda);
    LatticeDomain d(256);
    std::vector<double> fresh, resampled;
    int skip_fresh = 0, skip_resampled = 0;
    for (std::uint64_t s = 1; s <= 300; ++s) {
        const auto f = d.sample_gff(s, 0);
        const auto tvs = extract_tvs(d, f, p);
        try {
            fresh.push_back(radius_law_sample(d, tvs, Point(0, 0)));
        } catch (const std::domain_error&) {
            ++skip_fresh;
        }
        const auto g = markov_resample(d, tvs, f, 1000 + s, 0);
        try {
            resampled.push_back(radius_law_sample(d, g, p, Point(0, 0)));
        } catch (const std::domain_error&) {
            ++skip_resampled;
        }
    }
    REQUIRE(fresh.size() > 150);
    REQUIRE(resampled.size() > 150);
    const double ks = ks_two_sample(fresh, resampled);
    INFO("kept " << fresh.size() << " fresh / " << resampled.size() << " resampled, ks=" << ks);
    // 0.12 is the 95% two-sample quantile at these sizes; measured 0.057
    CHECK(ks < 0.12);
}

TEST_CASE("narrower bands reach less", "[tvs]") {
    LatticeDomain d(64);
    const TvsParams inner(kLambda, kLambda), outer(2 * kLambda, 2 * kLambda);
    for (std::uint64_t s = 1; s <= 3; ++s)
        REQUIRE(nesting_check(d, d.sample_gff(s, 0), inner, outer));
    CHECK_THROWS_AS(nesting_check(d, d.sample_gff(1, 0), outer, inner), std::invalid_argument);
}

TEST_CASE("a band wider than the field is degenerate", "[tvs]") {
    LatticeDomain d(32);
    const TvsParams wide(40.0, 40.0);
    const auto tvs = extract_tvs(d, d.sample_gff(1, 0), wide);
    CHECK(tvs.degenerate());
    CHECK(tvs.frontier_cell_count == 0);
    CHECK(radius_law_sample(d, tvs, Point(0.2, -0.1)) == 0.0);
}

TEST_CASE("extraction validates its inputs", "[tvs]") {
    LatticeDomain d(32);
    const TvsParams p(kLambda, kLambda);
    GffSample f = d.sample_gff(1, 0);
    GffSample bad = f;
    bad.values.pop_back();
    CHECK_THROWS_AS(extract_tvs(d, bad, p), std::invalid_argument);
    GffSample shifted = f;
    shifted.boundary_shift = p.b + 0.1;
    CHECK_THROWS_AS(extract_tvs(d, shifted, p), std::invalid_argument);

    const auto tvs = extract_tvs(d, f, p);
    std::size_t cell = 0;
    while (cell < tvs.frontier.size() && tvs.frontier[cell] == 0) ++cell;
    REQUIRE(cell < tvs.frontier.size());
    const double h = 2.0 / tvs.n;
    const Point in_frontier(-1.0 + (double(cell % std::size_t(tvs.n)) + 0.5) * h,
                            -1.0 + (double(cell / std::size_t(tvs.n)) + 0.5) * h);
    CHECK_THROWS_AS(radius_law_sample(d, tvs, in_frontier), std::domain_error);
    CHECK_THROWS_AS(radius_law_sample(d, tvs, Point(0.999, 0.999)), std::domain_error);
}

TEST_CASE("set snapshots round-trip", "[tvs]") {
    LatticeDomain d(64);
    const TvsParams p(kLambda, 2 * kLambda);
    const auto tvs = extract_tvs(d, d.sample_gff(5, 0), p);
    const std::string path = "tvs_snapshot_roundtrip.bin";
    export_tvs(path, tvs);
    const TvsSnapshot snap = import_tvs(path);
    CHECK(snap.n == 64);
    CHECK_THAT(snap.a, WithinAbs(p.a, 1e-12));
    CHECK_THAT(snap.b, WithinAbs(p.b, 1e-12));
    CHECK_THAT(snap.boundary_shift, WithinAbs(tvs.boundary_shift, 1e-12));
    REQUIRE(snap.frontier == tvs.frontier);
    REQUIRE(snap.labels.size() == tvs.components.size());
    for (std::size_t k = 0; k < snap.labels.size(); ++k)
        CHECK(snap.labels[k] == tvs.components[k].label);
    std::remove(path.c_str());
    CHECK_THROWS_AS(import_tvs("no_such_tvs_snapshot.bin"), std::runtime_error);
}
