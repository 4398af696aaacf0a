#pragma once

// Statistics over extracted two-valued sets: box-counting dimension of the
// frontier, one- and two-point hitting probabilities, the Minkowski-content
// measure mu_delta, generic content functionals of a radius field, and
// discrete energy integrals.
//
// The radius field r(z) = conformal radius of D \ A seen from z drives the
// content machinery.  Two evaluation modes exist: exact (one Dirichlet solve
// per node, affordable on coarse grids) and a calibrated Koebe proxy
// r = c_K * min(1 - |z|, dist(z, crossing points)), with c_K the median
// exact/proxy ratio on a subsample.  The Koebe quarter theorem sandwiches
// the true ratio in [1, 4]; measured medians sit near 2.
//
// One-point probabilities estimate P(r(z) <= eps) conditionally on z being
// unreached (reached samples are counted and reported separately); reached
// means the extraction's complement percolates through z, where the radius
// law has no small-eps content.  Two-point probabilities use the distance
// event d(x, A) <= delta read off the rasterized crossing set.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

#include "tvslab/brownian.hpp"
#include "tvslab/exit_law.hpp"
#include "tvslab/lattice.hpp"
#include "tvslab/params.hpp"
#include "tvslab/tvs.hpp"

namespace tvslab {

// ---------------------------------------------------------------------------
// Box counting

struct BoxCountResult {
    std::vector<double> scales;          // ascending
    std::vector<std::size_t> counts;     // occupied boxes per scale
    double slope = 0.0;                  // log N vs log(1/eps) over the window
    int window_lo = 0, window_hi = -1;   // inclusive index range used for the fit
    double window_radius = 0.5;          // counting restricted to |z| < this
};

// Dyadic scales 4h, 8h, ... capped at 1/8.
inline std::vector<double> dyadic_scales(int n) {
    std::vector<double> s;
    for (double e = 8.0 / n; e <= 0.125 + 1e-12; e *= 2.0) s.push_back(e);
    return s;
}

inline BoxCountResult box_count(const TvsApprox& tvs, std::vector<double> scales) {
    if (scales.size() < 4)
        throw std::invalid_argument("box_count: too few scales (need at least four)");
    std::sort(scales.begin(), scales.end());
    const int n = tvs.n;
    const double h = 2.0 / n;

    BoxCountResult res;
    res.scales = scales;

    // Prefix sums of frontier cells inside the counting window.
    std::vector<std::int64_t> pre((std::size_t(n) + 1) * (std::size_t(n) + 1), 0);
    auto at = [&](int i, int j) -> std::int64_t& {
        return pre[std::size_t(j) * std::size_t(n + 1) + std::size_t(i)];
    };
    for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci) {
            const double cx = -1.0 + (ci + 0.5) * h, cy = -1.0 + (cj + 0.5) * h;
            const bool occ = tvs.frontier[tvs.cell_index(ci, cj)] != 0 &&
                             cx * cx + cy * cy < res.window_radius * res.window_radius;
            at(ci + 1, cj + 1) =
                (occ ? 1 : 0) + at(ci, cj + 1) + at(ci + 1, cj) - at(ci, cj);
        }

    for (const double eps : scales) {
        const int c = std::max(1, int(std::lround(eps / h)));
        std::size_t count = 0;
        for (int bj = 0; bj < n; bj += c)
            for (int bi = 0; bi < n; bi += c) {
                const int i1 = std::min(bi + c, n), j1 = std::min(bj + c, n);
                if (at(i1, j1) - at(bi, j1) - at(i1, bj) + at(bi, bj) > 0) ++count;
            }
        res.counts.push_back(count);
    }

    // Fit window: the two finest scales carry lattice contamination, counts
    // under 20 carry noise.
    std::vector<std::size_t> kept;
    for (std::size_t k = 2; k < scales.size(); ++k)
        if (res.counts[k] >= 20) kept.push_back(k);
    if (kept.size() < 2)
        throw std::invalid_argument("box_count: too few scales survive the fit window");
    res.window_lo = int(kept.front());
    res.window_hi = int(kept.back());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const std::size_t k : kept) {
        const double x = std::log(1.0 / scales[k]), y = std::log(double(res.counts[k]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = double(kept.size());
    res.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return res;
}

// ---------------------------------------------------------------------------
// Nearest-crossing queries

// Bucketed point set over the dual cell grid with ring-expanding nearest
// queries.
class CrossingIndex {
  public:
    CrossingIndex(int n, std::vector<Point> pts) : n_(n), h_(2.0 / n), pts_(std::move(pts)) {
        std::vector<std::size_t> counts(std::size_t(n_) * std::size_t(n_) + 1, 0);
        for (const Point& p : pts_) ++counts[bucket(p) + 1];
        for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
        offsets_ = counts;
        order_.resize(pts_.size());
        for (std::size_t i = 0; i < pts_.size(); ++i) order_[counts[bucket(pts_[i])]++] = i;
    }

    std::size_t size() const { return pts_.size(); }

    // Distance to the nearest stored point; infinity when empty.
    double distance(Point z) const {
        double best = std::numeric_limits<double>::infinity();
        if (pts_.empty()) return best;
        const int ci = clamp_cell(int(std::floor((z.real() + 1.0) / h_)));
        const int cj = clamp_cell(int(std::floor((z.imag() + 1.0) / h_)));
        for (int ring = 0; ring < 2 * n_; ++ring) {
            if (double(ring - 1) * h_ >= best) break;
            const int i0 = ci - ring, i1 = ci + ring, j0 = cj - ring, j1 = cj + ring;
            for (int i = i0; i <= i1; ++i) {
                scan(i, j0, z, best);
                if (ring > 0) scan(i, j1, z, best);
            }
            for (int j = j0 + 1; j < j1; ++j) {
                scan(i0, j, z, best);
                scan(i1, j, z, best);
            }
        }
        return best;
    }

  private:
    int clamp_cell(int c) const { return std::min(std::max(c, 0), n_ - 1); }

    std::size_t bucket(Point p) const {
        const int ci = clamp_cell(int(std::floor((p.real() + 1.0) / h_)));
        const int cj = clamp_cell(int(std::floor((p.imag() + 1.0) / h_)));
        return std::size_t(cj) * std::size_t(n_) + std::size_t(ci);
    }

    void scan(int i, int j, Point z, double& best) const {
        if (i < 0 || j < 0 || i >= n_ || j >= n_) return;
        const std::size_t b = std::size_t(j) * std::size_t(n_) + std::size_t(i);
        for (std::size_t k = offsets_[b]; k < offsets_[b + 1]; ++k)
            best = std::min(best, std::abs(pts_[order_[k]] - z));
    }

    int n_;
    double h_;
    std::vector<Point> pts_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> order_;
};

// ---------------------------------------------------------------------------
// Radius field

struct RadiusFieldOptions {
    bool exact = false;    // per-node Dirichlet solves (coarse grids only)
    double koebe = 1.0;    // calibration constant for the distance proxy
};

inline std::vector<double> radius_field(const LatticeDomain& d, const TvsApprox& tvs,
                                        const RadiusFieldOptions& opt) {
    std::vector<double> r(d.size(), 0.0);
    if (opt.exact) {
        std::vector<std::int32_t> reachable;
        for (std::size_t v = 0; v < d.size(); ++v)
            if (tvs.node_reachable[v]) reachable.push_back(std::int32_t(v));
        std::unique_ptr<SubsetSolver> reach;
        if (!reachable.empty()) reach = std::make_unique<SubsetSolver>(d, reachable);
        for (std::size_t v = 0; v < d.size(); ++v) {
            if (tvs.node_reachable[v])
                r[v] = reach->conformal_radius_at(std::int32_t(v));
            else
                r[v] = tvs.components[std::size_t(tvs.component_of[v])].conformal_radius_at(
                    std::int32_t(v));
        }
    } else {
        const CrossingIndex idx(tvs.n, tvs.all_crossing_points());
        for (std::size_t v = 0; v < d.size(); ++v) {
            const Point z = d.coord(std::int32_t(v));
            r[v] = opt.koebe * std::min(1.0 - std::abs(z), idx.distance(z));
        }
    }
    return r;
}

// Median ratio of exact conformal radius to the distance proxy on a random
// node subsample; the Koebe constant for radius_field's proxy mode.
inline double koebe_calibrate(const LatticeDomain& d, const TvsApprox& tvs,
                              std::size_t max_nodes, std::uint64_t seed) {
    const CrossingIndex idx(tvs.n, tvs.all_crossing_points());
    std::unique_ptr<SubsetSolver> reach;
    CounterRng rng(seed, 0);
    std::vector<double> ratios;
    std::size_t attempts = 0;
    while (ratios.size() < max_nodes && attempts < 50 * max_nodes) {
        ++attempts;
        const auto v = std::int32_t(rng.uniform() * double(d.size()));
        if (v < 0 || std::size_t(v) >= d.size()) continue;
        const Point z = d.coord(v);
        const double proxy = std::min(1.0 - std::abs(z), idx.distance(z));
        if (!(proxy > 0.0) || !std::isfinite(proxy)) continue;
        double exact;
        if (tvs.node_reachable[std::size_t(v)]) {
            if (!reach) {
                std::vector<std::int32_t> reachable;
                for (std::size_t w = 0; w < d.size(); ++w)
                    if (tvs.node_reachable[w]) reachable.push_back(std::int32_t(w));
                reach = std::make_unique<SubsetSolver>(d, reachable);
            }
            exact = reach->conformal_radius_at(v);
        } else {
            exact = tvs.components[std::size_t(tvs.component_of[std::size_t(v)])]
                        .conformal_radius_at(v);
        }
        ratios.push_back(exact / proxy);
    }
    if (ratios.empty()) throw std::runtime_error("koebe_calibrate: no usable nodes");
    std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
    return ratios[ratios.size() / 2];
}

// ---------------------------------------------------------------------------
// Content functionals

// Sum over dual cells of f(center) * (corner average of F(r)) * h^2; corners
// with nonpositive radius or outside the node set contribute zero.
template <class Profile, class F>
double content_functional(const LatticeDomain& d, const std::vector<double>& radius,
                          Profile&& density, F&& f) {
    if (radius.size() != d.size())
        throw std::invalid_argument("content_functional: radius field does not match domain");
    const int n = d.n();
    const double h = d.h();
    double acc = 0.0;
    for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci) {
            const std::array<std::int32_t, 4> corner = {d.node(ci, cj), d.node(ci + 1, cj),
                                                        d.node(ci, cj + 1),
                                                        d.node(ci + 1, cj + 1)};
            double cell = 0.0;
            bool any = false;
            for (const std::int32_t v : corner) {
                if (v < 0) continue;
                any = true;
                const double r = radius[std::size_t(v)];
                if (r > 0.0) cell += density(r);
            }
            if (!any) continue;
            acc += f(Point(-1.0 + (ci + 0.5) * h, -1.0 + (cj + 0.5) * h)) * (cell * 0.25);
        }
    return acc * h * h;
}

// Profile F_delta(s) = delta * s^{-sigma_c^2/2 + delta*(sigma_c - delta/2)} on (0, 1).
struct FDeltaProfile {
    double delta;
    double sigma_c;
    double operator()(double s) const {
        if (!(s > 0.0) || s >= 1.0) return 0.0;
        return delta * std::pow(s, -0.5 * sigma_c * sigma_c + delta * (sigma_c - 0.5 * delta));
    }
};

// Profile J_u^sigma(s) = u^{-sigma^2/2} on (0, u).
struct JProfile {
    double u;
    double sigma;
    double operator()(double s) const {
        if (!(s > 0.0) || s >= u) return 0.0;
        return std::pow(u, -0.5 * sigma * sigma);
    }
};

// ---------------------------------------------------------------------------
// Minkowski-content measure

struct MeasureApprox {
    double delta = 0.0;
    std::vector<double> density;    // per dual cell; frontier cells carry zero
    double total_mass = 0.0;
};

inline MeasureApprox minkowski_density(const LatticeDomain& d, const TvsApprox& tvs, double delta,
                                       const RadiusFieldOptions& opt) {
    const double sc = sigma_critical(tvs.params);
    if (!(delta > 0.0) || !(delta < sc))
        throw std::domain_error("minkowski_density: delta must lie in (0, sigma_c)");
    const std::vector<double> r = radius_field(d, tvs, opt);
    const double q = 0.5 * (sc - delta) * (sc - delta);
    const int n = d.n();
    MeasureApprox m;
    m.delta = delta;
    m.density.assign(std::size_t(n) * std::size_t(n), 0.0);
    for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci) {
            const std::size_t cell = tvs.cell_index(ci, cj);
            if (tvs.frontier[cell] != 0) continue;
            const std::array<std::int32_t, 4> corner = {d.node(ci, cj), d.node(ci + 1, cj),
                                                        d.node(ci, cj + 1),
                                                        d.node(ci + 1, cj + 1)};
            double cellv = 0.0;
            for (const std::int32_t v : corner)
                if (v >= 0 && r[std::size_t(v)] > 0.0)
                    cellv += delta * std::pow(r[std::size_t(v)], -q);
            m.density[cell] = 0.25 * cellv;
            m.total_mass += m.density[cell];
        }
    m.total_mass *= d.h() * d.h();
    return m;
}

template <class F>
double minkowski_measure(const LatticeDomain& d, const TvsApprox& tvs, double delta, F&& f,
                         const RadiusFieldOptions& opt) {
    const MeasureApprox m = minkowski_density(d, tvs, delta, opt);
    const int n = d.n();
    const double h = d.h();
    double acc = 0.0;
    for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci) {
            const double dens = m.density[tvs.cell_index(ci, cj)];
            if (dens != 0.0)
                acc += f(Point(-1.0 + (ci + 0.5) * h, -1.0 + (cj + 0.5) * h)) * dens;
        }
    return acc * h * h;
}

// ---------------------------------------------------------------------------
// One-point probabilities

namespace detail {

// Conformal radius of the component at one node by conjugate gradient on the
// component's sub-Laplacian; avoids factorizing large components when only a
// single node is needed per extraction.
inline double component_radius_cg(const LatticeDomain& d, const Component& c, std::int32_t v) {
    const std::vector<std::int32_t>& nodes = c.nodes;
    auto local = [&](std::int32_t w) -> std::int32_t {
        const auto it = std::lower_bound(nodes.begin(), nodes.end(), w);
        if (it == nodes.end() || *it != w) return -1;
        return std::int32_t(it - nodes.begin());
    };
    const std::int32_t lv = local(v);
    if (lv < 0) throw std::domain_error("component_radius_cg: node not in component");
    const Point z = d.coord(v);
    const Eigen::Index N = Eigen::Index(nodes.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nodes.size() * 5);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        trips.emplace_back(int(r), int(r), 4.0);
        const auto [i, j] = d.grid_index(nodes[r]);
        for (auto [ni, nj] : {std::array{i - 1, j}, std::array{i + 1, j}, std::array{i, j - 1},
                              std::array{i, j + 1}}) {
            const std::int32_t w = d.node(ni, nj);
            const std::int32_t lw = w >= 0 ? local(w) : -1;
            if (lw >= 0) {
                trips.emplace_back(int(r), int(lw), -1.0);
            } else {
                rhs[Eigen::Index(r)] +=
                    std::log(std::abs(Point(-1.0 + ni * d.h(), -1.0 + nj * d.h()) - z));
            }
        }
    }
    Eigen::SparseMatrix<double> lap(N, N);
    lap.setFromTriplets(trips.begin(), trips.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(1e-12);
    cg.compute(lap);
    const Eigen::VectorXd u = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
        throw std::runtime_error("component_radius_cg: conjugate gradient did not converge");
    return std::exp(u[lv]);
}

} // namespace detail

struct OnePointRow {
    double eps = 0.0;
    double p_hat = 0.0, se = 0.0;
    double target_power = 0.0;     // c_star * r_D(z)^{d-2} * eps^{2-d}
    double target_series = 0.0;    // exit_survival at t = log(r_D(z)/eps)
    std::size_t hits = 0;
};

struct OnePointResult {
    std::vector<OnePointRow> rows;
    std::size_t samples = 0;
    std::size_t reached = 0;       // excluded from the denominator
    Point z;
};

inline OnePointResult one_point_probability(const LatticeDomain& d, const TvsParams& p, Point z,
                                            std::vector<double> eps_list, std::size_t samples,
                                            std::uint64_t seed) {
    if (eps_list.empty()) throw std::invalid_argument("one_point_probability: empty eps list");
    std::sort(eps_list.begin(), eps_list.end());
    if (!(1.0 - std::abs(z) >= 2.0 * eps_list.back()))
        throw std::domain_error("one_point_probability: z too close to boundary");
    const int i = int(std::lround((z.real() + 1.0) / d.h()));
    const int j = int(std::lround((z.imag() + 1.0) / d.h()));
    const std::int32_t v = d.node(i, j);
    if (v < 0) throw std::domain_error("one_point_probability: z outside the domain");

    OnePointResult res;
    res.z = z;
    res.samples = samples;
    std::vector<std::size_t> hits(eps_list.size(), 0);
    for (std::size_t s = 0; s < samples; ++s) {
        const GffSample f = d.sample_gff(seed, s);
        const TvsApprox tvs = extract_tvs(d, f, p);
        if (tvs.node_reachable[std::size_t(v)]) {
            ++res.reached;
            continue;
        }
        const Component& c = tvs.components[std::size_t(tvs.component_of[std::size_t(v)])];
        const double r = detail::component_radius_cg(d, c, v);
        for (std::size_t k = 0; k < eps_list.size(); ++k)
            if (r <= eps_list[k]) ++hits[k];
    }

    const std::size_t denom = samples - res.reached;
    const double dd = dimension(p);
    const double rD = 1.0 - std::norm(z);
    const ExitLaw law(p);
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        OnePointRow row;
        row.eps = eps_list[k];
        row.hits = hits[k];
        if (denom > 0) {
            row.p_hat = double(hits[k]) / double(denom);
            row.se = std::sqrt(std::max(row.p_hat * (1.0 - row.p_hat), 1e-12) / double(denom));
        }
        row.target_power = c_star(p) * std::pow(rD, dd - 2.0) * std::pow(row.eps, 2.0 - dd);
        row.target_series = exit_survival(law, std::log(rD / row.eps));
        res.rows.push_back(row);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Two-point probabilities

struct TwoPointResult {
    Point x, y;
    double delta = 0.0;
    double p_joint = 0.0, se_joint = 0.0;
    double p_x = 0.0, p_y = 0.0;    // marginal frequencies of the same event
    std::size_t samples = 0;
};

inline TwoPointResult two_point_probability(const LatticeDomain& d, const TvsParams& p, Point x,
                                            Point y, double delta, std::size_t samples,
                                            std::uint64_t seed) {
    if (!(delta > 0.0) || !(delta < std::abs(x - y) / 4.0))
        throw std::domain_error("two_point_probability: need 0 < delta < |x-y|/4");
    TwoPointResult res;
    res.x = x;
    res.y = y;
    res.delta = delta;
    res.samples = samples;
    std::size_t joint = 0, hx = 0, hy = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const GffSample f = d.sample_gff(seed, s);
        const TvsApprox tvs = extract_tvs(d, f, p);
        const CrossingIndex idx(tvs.n, tvs.all_crossing_points());
        const bool ax = idx.distance(x) <= delta;
        const bool ay = idx.distance(y) <= delta;
        hx += ax;
        hy += ay;
        joint += ax && ay;
    }
    res.p_joint = double(joint) / double(samples);
    res.se_joint =
        std::sqrt(std::max(res.p_joint * (1.0 - res.p_joint), 1e-12) / double(samples));
    res.p_x = double(hx) / double(samples);
    res.p_y = double(hy) / double(samples);
    return res;
}

// ---------------------------------------------------------------------------
// Energy integrals

namespace detail {

template <class Kernel>
double energy_sum(const std::vector<Point>& pts, const std::vector<double>& masses, Kernel k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point pi = pts[i];
        const double mi = masses[i];
        double row = 0.0;
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double d2 = std::norm(pts[j] - pi);
            if (d2 == 0.0)
                throw std::domain_error("energy_integral: coincident points at distinct indices");
            row += masses[j] * k(d2);
        }
        acc += mi * row;
    }
    return 2.0 * acc;    // both ordered pairs
}

} // namespace detail

// sum_{i != j} m_i m_j |x_i - x_j|^{-s}.
inline double energy_integral(const std::vector<Point>& pts, const std::vector<double>& masses,
                              double s) {
    if (pts.size() != masses.size())
        throw std::invalid_argument("energy_integral: points and masses differ in length");
    if (!(s > 0.0) || !(s < 2.0))
        throw std::domain_error("energy_integral: s must lie in (0, 2)");
    if (s == 0.5)
        return detail::energy_sum(pts, masses,
                                  [](double d2) { return 1.0 / std::sqrt(std::sqrt(d2)); });
    if (s == 1.0)
        return detail::energy_sum(pts, masses, [](double d2) { return 1.0 / std::sqrt(d2); });
    const double e = -0.5 * s;
    return detail::energy_sum(pts, masses, [e](double d2) { return std::pow(d2, e); });
}

} // namespace tvslab
