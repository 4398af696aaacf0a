#pragma once

// Extraction of the two-valued set approximation from a lattice field.
//
// A node is reachable when it is connected to the Dirichlet boundary by a
// grid path along which the (linearly interpolated) field stays strictly
// inside the band (-a, b).  Interpolation between two in-band values never
// leaves the band, so an edge is traversable exactly when both endpoint
// values are in-band; an edge from an in-band node to an out-of-band node is
// cut at the closed-form crossing of the level it exits through, and the
// crossing point is rasterized to a dual-grid cell of the frontier mask.
// Boundary ghosts carry the sample's boundary_shift, which must itself lie
// strictly inside the band.
//
// Maximal 4-connected sets of unreached nodes become Components.  Every
// component touches at least one cut edge (an unreached node adjacent to a
// reachable node or ghost is necessarily out-of-band), so its label is read
// off the crossed levels; mixed crossings are resolved by majority and
// flagged.
//
// Per-component potential theory (conformal radius, Green's function,
// resampling) runs on a lazily built factorization of the component's
// sub-Laplacian with Dirichlet data supplied at the grid coordinates of
// outside neighbors, matching LatticeDomain::harmonic_extension semantics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "tvslab/lattice.hpp"
#include "tvslab/params.hpp"

namespace tvslab {

// Dirichlet solver on an arbitrary node subset with a cached factorization.
// Used per component, and for the reachable zone viewed as a subdomain with
// boundary on the disc rim and the frontier.
class SubsetSolver {
  public:
    SubsetSolver(const LatticeDomain& d, std::vector<std::int32_t> nodes)
        : dom_(&d), nodes_(std::move(nodes)) {
        if (nodes_.empty()) throw std::invalid_argument("SubsetSolver: empty node set");
        std::sort(nodes_.begin(), nodes_.end());
        std::vector<std::array<std::int32_t, 4>> adj(nodes_.size());
        for (std::size_t r = 0; r < nodes_.size(); ++r) {
            const auto [i, j] = d.grid_index(nodes_[r]);
            const std::array<std::array<int, 2>, 4> nb = {
                std::array{i - 1, j}, std::array{i + 1, j}, std::array{i, j - 1},
                std::array{i, j + 1}};
            for (int k = 0; k < 4; ++k) {
                const std::int32_t w = d.node(nb[k][0], nb[k][1]);
                const std::int32_t lw = w >= 0 ? local(w) : -1;
                adj[r][k] = lw;
                if (lw < 0)
                    contacts_.push_back({std::int32_t(r),
                                         Point(-1.0 + nb[k][0] * d.h(), -1.0 + nb[k][1] * d.h())});
            }
        }
        op_ = GridOperator(adj);
    }

    const std::vector<std::int32_t>& nodes() const { return nodes_; }
    const GridOperator& op() const { return op_; }
    std::size_t size() const { return nodes_.size(); }

    std::int32_t local(std::int32_t v) const {
        const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), v);
        if (it == nodes_.end() || *it != v) return -1;
        return std::int32_t(it - nodes_.begin());
    }

    // Solution of the discrete Dirichlet problem with data evaluated at the
    // grid coordinates of outside neighbors, in subset order.
    template <class Data>
    std::vector<double> dirichlet(Data&& data) const {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op_.size());
        for (const auto& [r, p] : contacts_) rhs[r] += data(p);
        const Eigen::VectorXd u = op_.solve(rhs);
        std::vector<double> out(nodes_.size());
        for (Eigen::Index r = 0; r < u.size(); ++r) out[std::size_t(r)] = u[r];
        return out;
    }

    // Conformal radius of the subset (as a subdomain grounded at its contact
    // coordinates) seen from node v: exp of the harmonic extension of
    // log|zeta - z_v| evaluated back at v.
    double conformal_radius_at(std::int32_t v) const {
        const std::int32_t lv = local(v);
        if (lv < 0) throw std::domain_error("conformal_radius_at: node not in subset");
        const Point z = dom_->coord(v);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op_.size());
        for (const auto& [r, p] : contacts_) rhs[r] += std::log(std::abs(p - z));
        const Eigen::VectorXd u = op_.solve(rhs);
        return std::exp(u[lv]);
    }

    // Scaled Green's function 2*pi*(A^-1)_{vw} of the sub-Laplacian.
    double green_at(std::int32_t v, std::int32_t w) const {
        const std::int32_t lv = local(v), lw = local(w);
        if (lv < 0 || lw < 0) throw std::domain_error("green_at: node not in subset");
        return op_.green_column(lw)[std::size_t(lv)];
    }

    // Fresh zero-boundary field on the subset, in subset order.
    std::vector<double> sample(std::uint64_t seed, std::uint64_t task) const {
        return op_.sample(seed, task);
    }

  private:
    const LatticeDomain* dom_;
    std::vector<std::int32_t> nodes_;
    GridOperator op_;
    std::vector<std::pair<std::int32_t, Point>> contacts_;
};

struct Component {
    std::vector<std::int32_t> nodes;    // sorted
    double label = 0.0;
    bool mixed_crossings = false;       // cut edges at both levels
    bool label_tie = false;             // majority tied, broken by overshoot weight
    std::int64_t crossings_low = 0;     // cut edges through level -a
    std::int64_t crossings_high = 0;    // cut edges through level  b
    std::vector<Point> crossing_points;

    double conformal_radius_at(std::int32_t v) const { return solver().conformal_radius_at(v); }
    double green_at(std::int32_t v, std::int32_t w) const { return solver().green_at(v, w); }

    const SubsetSolver& solver() const {
        std::call_once(lazy_->flag, [this] {
            lazy_->solver = std::make_unique<SubsetSolver>(*domain_, nodes);
        });
        return *lazy_->solver;
    }

    // wired by extract_tvs
    const LatticeDomain* domain_ = nullptr;
    struct Lazy {
        std::once_flag flag;
        std::unique_ptr<SubsetSolver> solver;
    };
    std::shared_ptr<Lazy> lazy_ = std::make_shared<Lazy>();
};

struct TvsApprox {
    TvsParams params;
    int n = 0;
    double boundary_shift = 0.0;
    std::vector<std::uint8_t> node_reachable;    // per node
    std::vector<std::int32_t> component_of;      // per node, -1 when reachable
    std::vector<Component> components;
    std::vector<std::uint8_t> frontier;          // n*n dual cells; bit 1 = -a, bit 2 = b
    std::size_t frontier_cell_count = 0;
    std::size_t mixed_label_components = 0;

    explicit TvsApprox(const TvsParams& p) : params(p) {}

    bool degenerate() const { return components.empty(); }

    std::size_t cell_index(int ci, int cj) const {
        return std::size_t(cj) * std::size_t(n) + std::size_t(ci);
    }

    // Dual cell containing an interior point.
    std::size_t cell_of(Point z) const {
        const double h = 2.0 / n;
        int ci = int(std::floor((z.real() + 1.0) / h));
        int cj = int(std::floor((z.imag() + 1.0) / h));
        ci = std::min(std::max(ci, 0), n - 1);
        cj = std::min(std::max(cj, 0), n - 1);
        return cell_index(ci, cj);
    }

    std::vector<Point> all_crossing_points() const {
        std::vector<Point> out;
        for (const Component& c : components)
            out.insert(out.end(), c.crossing_points.begin(), c.crossing_points.end());
        return out;
    }
};

namespace detail {

struct CrossingScratch {
    std::vector<std::pair<std::int32_t, Point>> per_component;  // (component, crossing)
    std::vector<double> weight_low, weight_high;
};

// Record the cut of the segment p_from -> p_to with values v_from (in band)
// and v_to (outside), crediting the crossing to component comp.
inline void record_crossing(TvsApprox& tvs, double a, double b, Point p_from, double v_from,
                            Point p_to, double v_to, std::int32_t comp,
                            CrossingScratch& scratch) {
    const double level = v_to >= b ? b : -a;
    const double s = (level - v_from) / (v_to - v_from);
    const Point p = p_from + s * (p_to - p_from);
    const std::size_t cell = tvs.cell_of(p);
    const std::uint8_t bit = v_to >= b ? 2 : 1;
    if ((tvs.frontier[cell] & bit) == 0) {
        if (tvs.frontier[cell] == 0) ++tvs.frontier_cell_count;
        tvs.frontier[cell] |= bit;
    }
    scratch.per_component.push_back({comp, p});
    if (v_to >= b) {
        tvs.components[std::size_t(comp)].crossings_high += 1;
        scratch.weight_high[std::size_t(comp)] += v_to - b;
    } else {
        tvs.components[std::size_t(comp)].crossings_low += 1;
        scratch.weight_low[std::size_t(comp)] += -a - v_to;
    }
}

} // namespace detail

inline TvsApprox extract_tvs(const LatticeDomain& d, const GffSample& f, const TvsParams& p) {
    if (f.values.size() != d.size())
        throw std::invalid_argument("extract_tvs: sample does not match domain");
    const double a = p.a, b = p.b, shift = f.boundary_shift;
    if (!(shift > -a && shift < b))
        throw std::invalid_argument("extract_tvs: boundary value outside the band");

    const std::size_t N = d.size();
    auto value = [&](std::size_t v) { return f.values[v] + shift; };
    auto in_band = [&](std::size_t v) {
        const double x = value(v);
        return x > -a && x < b;
    };

    TvsApprox tvs(p);
    tvs.n = d.n();
    tvs.boundary_shift = shift;
    tvs.node_reachable.assign(N, 0);
    tvs.component_of.assign(N, -1);
    tvs.frontier.assign(std::size_t(d.n()) * std::size_t(d.n()), 0);

    // Reachability: flood through in-band nodes from the boundary ring.
    std::vector<std::int32_t> queue;
    queue.reserve(N / 4);
    for (std::size_t v = 0; v < N; ++v)
        if (d.boundary_adjacent(std::int32_t(v)) && in_band(v)) {
            tvs.node_reachable[v] = 1;
            queue.push_back(std::int32_t(v));
        }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto [i, j] = d.grid_index(queue[head]);
        for (auto [ni, nj] : {std::array{i - 1, j}, std::array{i + 1, j}, std::array{i, j - 1},
                              std::array{i, j + 1}}) {
            const std::int32_t w = d.node(ni, nj);
            if (w >= 0 && !tvs.node_reachable[std::size_t(w)] && in_band(std::size_t(w))) {
                tvs.node_reachable[std::size_t(w)] = 1;
                queue.push_back(w);
            }
        }
    }

    // Components: maximal 4-connected unreached sets, ordered by smallest
    // node index for determinism.
    for (std::size_t v = 0; v < N; ++v) {
        if (tvs.node_reachable[v] || tvs.component_of[v] >= 0) continue;
        const std::int32_t comp = std::int32_t(tvs.components.size());
        tvs.components.emplace_back();
        Component& c = tvs.components.back();
        c.domain_ = &d;
        std::vector<std::int32_t> stack = {std::int32_t(v)};
        tvs.component_of[v] = comp;
        while (!stack.empty()) {
            const std::int32_t u = stack.back();
            stack.pop_back();
            c.nodes.push_back(u);
            const auto [i, j] = d.grid_index(u);
            for (auto [ni, nj] : {std::array{i - 1, j}, std::array{i + 1, j},
                                  std::array{i, j - 1}, std::array{i, j + 1}}) {
                const std::int32_t w = d.node(ni, nj);
                if (w >= 0 && !tvs.node_reachable[std::size_t(w)] &&
                    tvs.component_of[std::size_t(w)] < 0) {
                    tvs.component_of[std::size_t(w)] = comp;
                    stack.push_back(w);
                }
            }
        }
        std::sort(c.nodes.begin(), c.nodes.end());
    }

    // Cut edges: out-of-band nodes seen from a reachable neighbor or a ghost.
    detail::CrossingScratch scratch;
    scratch.weight_low.assign(tvs.components.size(), 0.0);
    scratch.weight_high.assign(tvs.components.size(), 0.0);
    for (std::size_t v = 0; v < N; ++v) {
        const std::int32_t comp = tvs.component_of[v];
        if (comp < 0) continue;
        const double xv = value(v);
        if (xv > -a && xv < b) continue;   // enclosed in-band pocket, no cut here
        const auto [i, j] = d.grid_index(std::int32_t(v));
        const Point pv = d.coord(std::int32_t(v));
        for (auto [ni, nj] : {std::array{i - 1, j}, std::array{i + 1, j}, std::array{i, j - 1},
                              std::array{i, j + 1}}) {
            const std::int32_t w = d.node(ni, nj);
            if (w >= 0) {
                if (tvs.node_reachable[std::size_t(w)])
                    detail::record_crossing(tvs, a, b, d.coord(w), value(std::size_t(w)), pv, xv,
                                            comp, scratch);
            } else {
                const Point pg(-1.0 + ni * d.h(), -1.0 + nj * d.h());
                detail::record_crossing(tvs, a, b, pg, shift, pv, xv, comp, scratch);
            }
        }
    }

    for (auto& [comp, pt] : scratch.per_component)
        tvs.components[std::size_t(comp)].crossing_points.push_back(pt);

    // Labels: majority of crossed levels, overshoot weight on ties, ties that
    // survive both go to b.
    for (std::size_t k = 0; k < tvs.components.size(); ++k) {
        Component& c = tvs.components[k];
        c.mixed_crossings = c.crossings_low > 0 && c.crossings_high > 0;
        if (c.mixed_crossings) ++tvs.mixed_label_components;
        if (c.crossings_high > c.crossings_low) {
            c.label = b;
        } else if (c.crossings_low > c.crossings_high) {
            c.label = -a;
        } else {
            c.label_tie = true;
            c.label = scratch.weight_low[k] > scratch.weight_high[k] ? -a : b;
        }
    }
    return tvs;
}

// Band monotonicity: the reachable set through a narrower band is contained
// in the reachable set through a wider one.  Deterministically true; exposed
// as a check.
inline bool nesting_check(const LatticeDomain& d, const GffSample& f, const TvsParams& inner,
                          const TvsParams& outer) {
    if (inner.a > outer.a || inner.b > outer.b)
        throw std::invalid_argument("nesting_check: bands are not nested");
    const TvsApprox t1 = extract_tvs(d, f, inner);
    const TvsApprox t2 = extract_tvs(d, f, outer);
    for (std::size_t v = 0; v < d.size(); ++v)
        if (t1.node_reachable[v] && !t2.node_reachable[v]) return false;
    return true;
}

inline double component_conformal_radius(const Component& c, std::int32_t v) {
    return c.conformal_radius_at(v);
}

// log r_D(z) - log r_{D \ A}(z), evaluated at the grid node nearest z; zero
// when z is reachable, error when z falls in a frontier cell.
inline double radius_law_sample(const LatticeDomain& d, const TvsApprox& tvs, Point z) {
    if (tvs.frontier[tvs.cell_of(z)] != 0)
        throw std::domain_error("radius_law_sample: point falls in a frontier cell");
    const int i = std::min(std::max(int(std::lround((z.real() + 1.0) / d.h())), 0), d.n());
    const int j = std::min(std::max(int(std::lround((z.imag() + 1.0) / d.h())), 0), d.n());
    const std::int32_t v = d.node(i, j);
    if (v < 0) throw std::domain_error("radius_law_sample: point outside the domain");
    if (tvs.node_reachable[std::size_t(v)]) return 0.0;
    const Component& c = tvs.components[std::size_t(tvs.component_of[std::size_t(v)])];
    const double r_disc = 1.0 - std::norm(d.coord(v));
    const double r_comp = c.conformal_radius_at(v);
    return std::max(0.0, std::log(r_disc) - std::log(r_comp));
}

inline double radius_law_sample(const LatticeDomain& d, const GffSample& f, const TvsParams& p,
                                Point z) {
    const TvsApprox tvs = extract_tvs(d, f, p);
    return radius_law_sample(d, tvs, z);
}

// Conditional resampling: keep the reachable-zone values and each component's
// label, replace each component's fluctuation by a fresh zero-boundary field
// of the component.  Streams are keyed (seed, resample*2^20 + component), so
// components and resample rounds never share numbers.
inline GffSample markov_resample(const LatticeDomain& d, const TvsApprox& tvs,
                                 const GffSample& f, std::uint64_t seed,
                                 std::uint64_t resample = 0) {
    if (f.values.size() != d.size())
        throw std::invalid_argument("markov_resample: sample does not match domain");
    GffSample out;
    out.values = f.values;
    out.boundary_shift = f.boundary_shift;
    for (std::size_t k = 0; k < tvs.components.size(); ++k) {
        const Component& c = tvs.components[k];
        const std::vector<double> fresh = c.solver().sample(seed, (resample << 20) + k);
        const std::vector<std::int32_t>& nodes = c.solver().nodes();
        for (std::size_t r = 0; r < nodes.size(); ++r)
            out.values[std::size_t(nodes[r])] = c.label - f.boundary_shift + fresh[r];
    }
    return out;
}

// Node of the component's inradius center: maximal 4-connected hop distance
// to the complement, smallest node index on ties.
inline std::int32_t component_inradius_center(const LatticeDomain& d, const TvsApprox& tvs,
                                              std::size_t comp) {
    const Component& c = tvs.components[comp];
    std::vector<std::int32_t> dist;   // parallel to c.nodes (sorted, binary search)
    dist.assign(c.nodes.size(), -1);
    auto local = [&](std::int32_t v) -> std::int32_t {
        const auto it = std::lower_bound(c.nodes.begin(), c.nodes.end(), v);
        if (it == c.nodes.end() || *it != v) return -1;
        return std::int32_t(it - c.nodes.begin());
    };
    std::vector<std::int32_t> queue;
    for (std::size_t r = 0; r < c.nodes.size(); ++r) {
        const auto [i, j] = d.grid_index(c.nodes[r]);
        for (auto [ni, nj] : {std::array{i - 1, j}, std::array{i + 1, j}, std::array{i, j - 1},
                              std::array{i, j + 1}}) {
            const std::int32_t w = d.node(ni, nj);
            if (w < 0 || tvs.component_of[std::size_t(w)] != std::int32_t(comp)) {
                dist[r] = 0;
                queue.push_back(std::int32_t(r));
                break;
            }
        }
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::int32_t r = queue[head];
        const auto [i, j] = d.grid_index(c.nodes[std::size_t(r)]);
        for (auto [ni, nj] : {std::array{i - 1, j}, std::array{i + 1, j}, std::array{i, j - 1},
                              std::array{i, j + 1}}) {
            const std::int32_t w = d.node(ni, nj);
            if (w < 0) continue;
            const std::int32_t lw = local(w);
            if (lw >= 0 && dist[std::size_t(lw)] < 0) {
                dist[std::size_t(lw)] = dist[std::size_t(r)] + 1;
                queue.push_back(lw);
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < c.nodes.size(); ++r)
        if (dist[r] > dist[best]) best = r;
    return c.nodes[best];
}

// Snapshot: text header, then a run-length encoding of the frontier mask
// (u32 run length, u8 mask value) covering all n*n cells row-major, then one
// f64 label per component.
struct TvsSnapshot {
    int n = 0;
    double a = 0.0, b = 0.0;
    double boundary_shift = 0.0;
    std::vector<std::uint8_t> frontier;
    std::vector<double> labels;
};

inline void export_tvs(const std::string& path, const TvsApprox& tvs) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("export_tvs: cannot open " + path);
    std::size_t runs = 0;
    const std::size_t cells = tvs.frontier.size();
    for (std::size_t i = 0; i < cells;) {
        std::size_t j = i;
        while (j < cells && tvs.frontier[j] == tvs.frontier[i]) ++j;
        runs += (j - i + 0xFFFFFFFEull) / 0xFFFFFFFFull;
        i = j;
    }
    os << "tvslab-tvs 1\n"
       << "n " << tvs.n << "\n"
       << "levels " << -tvs.params.a << " " << tvs.params.b << "\n"
       << "shift " << tvs.boundary_shift << "\n"
       << "components " << tvs.components.size() << "\n"
       << "runs " << runs << "\n"
       << "payload\n";
    for (std::size_t i = 0; i < cells;) {
        std::size_t j = i;
        while (j < cells && tvs.frontier[j] == tvs.frontier[i]) ++j;
        std::size_t len = j - i;
        while (len > 0) {
            const std::uint32_t chunk = std::uint32_t(std::min<std::size_t>(len, 0xFFFFFFFFu));
            detail::put(os, chunk);
            detail::put(os, tvs.frontier[i]);
            len -= chunk;
        }
        i = j;
    }
    for (const Component& c : tvs.components) detail::put(os, c.label);
    if (!os) throw std::runtime_error("export_tvs: write failed for " + path);
}

inline TvsSnapshot import_tvs(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("import_tvs: cannot open " + path);
    std::string word;
    is >> word;
    int version = 0;
    if (word != "tvslab-tvs" || !(is >> version) || version != 1)
        throw std::runtime_error("import_tvs: bad header in " + path);
    TvsSnapshot snap;
    std::size_t n_components = 0, n_runs = 0;
    double neg_a = 0.0;
    while (is >> word && word != "payload") {
        if (word == "n")
            is >> snap.n;
        else if (word == "levels")
            is >> neg_a >> snap.b;
        else if (word == "shift")
            is >> snap.boundary_shift;
        else if (word == "components")
            is >> n_components;
        else if (word == "runs")
            is >> n_runs;
        else
            throw std::runtime_error("import_tvs: unknown header field " + word);
    }
    snap.a = -neg_a;
    if (word != "payload" || snap.n <= 0)
        throw std::runtime_error("import_tvs: truncated header in " + path);
    is.get();   // newline after "payload"
    snap.frontier.reserve(std::size_t(snap.n) * std::size_t(snap.n));
    for (std::size_t r = 0; r < n_runs; ++r) {
        const auto len = detail::get<std::uint32_t>(is);
        const auto val = detail::get<std::uint8_t>(is);
        snap.frontier.insert(snap.frontier.end(), len, val);
    }
    if (snap.frontier.size() != std::size_t(snap.n) * std::size_t(snap.n))
        throw std::runtime_error("import_tvs: run lengths do not cover the grid in " + path);
    snap.labels.resize(n_components);
    for (std::size_t k = 0; k < n_components; ++k) snap.labels[k] = detail::get<double>(is);
    if (!is) throw std::runtime_error("import_tvs: truncated payload in " + path);
    return snap;
}

} // namespace tvslab
