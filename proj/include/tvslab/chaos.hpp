#pragma once

// Purely imaginary multiplicative chaos on the lattice disc, and its
// conditional form given an extracted two-valued set.
//
// The field V_eps(z) = eps^{-sigma^2/2} exp(i sigma Gamma_eps(z)) is built
// from circle averages of a sampled field; the modulus eps^{-sigma^2/2} is
// exact by construction.  The lattice circle average has slightly less
// variance than its continuum counterpart, so pairings carry a separate
// factor exp(sigma^2 kappa / 2), with kappa the measured offset
// LatticeDomain::circle_variance_offset(eps); with that factor the mean of
// (V_eps, f) matches the continuum one-point density r_D^{-sigma^2/2}
// without touching the values themselves.
//
// Test regions are dual-grid cell sets.  A pairing sums the cell average of
// the four corner values times the cell area, which regroups into a node sum
// with corner weights in {1/4, 1/2, 3/4, 1}; moment targets are evaluated on
// the same weighted nodes so that estimator and target discretize the region
// identically.
//
// Conditional machinery: given an extracted set, a node is stencil-fit when
// the full interpolation stencil of its eps-circle stays inside one
// component.  Cells whose four corners are stencil-fit in the same component
// form the support of the conditional pairing; on that support, resampling
// the involved components (labels kept, fluctuation redrawn) realizes the
// conditional law, and the conditional one-point and three-point formulas
// close over per-component conformal radii, Green's functions, and labels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "tvslab/brownian.hpp"
#include "tvslab/disc.hpp"
#include "tvslab/lattice.hpp"
#include "tvslab/quadrature.hpp"
#include "tvslab/tvs.hpp"

namespace tvslab {

// ---------------------------------------------------------------------------
// Field construction

// Chaos values at the given nodes: eps^{-sigma^2/2} exp(i sigma Gamma_eps).
inline std::vector<std::complex<double>> chaos_values_at(
    const LatticeDomain& d, const std::vector<double>& field, double boundary_shift,
    double sigma, double eps, const std::vector<std::int32_t>& nodes) {
    if (!(sigma >= 0.0)) throw std::domain_error("chaos_values_at: sigma must be nonnegative");
    const double amp = std::pow(eps, -0.5 * sigma * sigma);
    std::vector<std::complex<double>> out;
    out.reserve(nodes.size());
    for (const std::int32_t v : nodes) {
        const double gamma = d.circle_average(field, d.coord(v), eps) + boundary_shift;
        out.push_back(std::polar(amp, sigma * gamma));
    }
    return out;
}

// Nodes at distance more than eps from the boundary, where the eps-circle
// average is defined.
inline std::vector<std::int32_t> chaos_nodes(const LatticeDomain& d, double eps) {
    std::vector<std::int32_t> out;
    for (std::size_t v = 0; v < d.size(); ++v)
        if (1.0 - std::abs(d.coord(std::int32_t(v))) > eps) out.push_back(std::int32_t(v));
    return out;
}

struct ChaosField {
    double sigma = 0.0;
    double eps = 0.0;
    double normalization = 1.0;                  // exp(sigma^2 kappa / 2)
    std::vector<std::int32_t> nodes;             // evaluation nodes
    std::vector<std::complex<double>> values;    // parallel to nodes
    std::vector<std::int32_t> slot;              // per domain node, -1 off support
};

inline ChaosField build_chaos(const LatticeDomain& d, const GffSample& f, double sigma,
                              double eps,
                              double kappa = std::numeric_limits<double>::quiet_NaN()) {
    if (f.values.size() != d.size())
        throw std::invalid_argument("build_chaos: sample does not match domain");
    if (!(eps >= 3.0 * d.h()))
        throw std::domain_error("build_chaos: eps must be at least 3h");
    ChaosField c;
    c.sigma = sigma;
    c.eps = eps;
    if (std::isnan(kappa)) kappa = d.circle_variance_offset(eps);
    c.normalization = std::exp(0.5 * sigma * sigma * kappa);
    c.nodes = chaos_nodes(d, eps);
    c.values = chaos_values_at(d, f.values, f.boundary_shift, sigma, eps, c.nodes);
    c.slot.assign(d.size(), -1);
    for (std::size_t i = 0; i < c.nodes.size(); ++i)
        c.slot[std::size_t(c.nodes[i])] = std::int32_t(i);
    return c;
}

// ---------------------------------------------------------------------------
// Test regions

inline Point cell_center(const LatticeDomain& d, std::uint32_t cell) {
    const int n = d.n();
    const int ci = int(cell) % n, cj = int(cell) / n;
    return {-1.0 + (ci + 0.5) * d.h(), -1.0 + (cj + 0.5) * d.h()};
}

// Dual cells whose centers lie in |z - center| < radius.
inline std::vector<std::uint32_t> cells_in_disc(const LatticeDomain& d, Point center,
                                                double radius) {
    const int n = d.n();
    const double h = d.h();
    const int ci0 = std::max(0, int(std::floor((center.real() - radius + 1.0) / h)) - 1);
    const int ci1 = std::min(n - 1, int(std::ceil((center.real() + radius + 1.0) / h)));
    const int cj0 = std::max(0, int(std::floor((center.imag() - radius + 1.0) / h)) - 1);
    const int cj1 = std::min(n - 1, int(std::ceil((center.imag() + radius + 1.0) / h)));
    std::vector<std::uint32_t> out;
    for (int cj = cj0; cj <= cj1; ++cj)
        for (int ci = ci0; ci <= ci1; ++ci) {
            const Point c(-1.0 + (ci + 0.5) * h, -1.0 + (cj + 0.5) * h);
            if (std::abs(c - center) < radius) out.push_back(std::uint32_t(cj * n + ci));
        }
    return out;
}

// Minimal gap between the closed cell squares of two regions.
inline double region_separation(const LatticeDomain& d, const std::vector<std::uint32_t>& a,
                                const std::vector<std::uint32_t>& b) {
    const double h = d.h();
    double best = std::numeric_limits<double>::infinity();
    for (const std::uint32_t ca : a) {
        const Point pa = cell_center(d, ca);
        for (const std::uint32_t cb : b) {
            const Point pb = cell_center(d, cb);
            const double gx = std::max(0.0, std::abs(pa.real() - pb.real()) - h);
            const double gy = std::max(0.0, std::abs(pa.imag() - pb.imag()) - h);
            best = std::min(best, std::hypot(gx, gy));
        }
    }
    return best;
}

// Corner-weight form of a cell region: sum over cells of the corner average
// times cell area equals sum over nodes of weight * value * h^2.
struct WeightedRegion {
    std::vector<std::uint32_t> cells;
    std::vector<std::int32_t> nodes;
    std::vector<double> weights;
};

namespace detail {

inline void corner_nodes(const LatticeDomain& d, std::uint32_t cell,
                         std::array<std::int32_t, 4>& out) {
    const int n = d.n();
    const int ci = int(cell) % n, cj = int(cell) / n;
    out = {d.node(ci, cj), d.node(ci + 1, cj), d.node(ci, cj + 1), d.node(ci + 1, cj + 1)};
}

inline void merge_node_weights(std::vector<std::pair<std::int32_t, double>>& acc,
                               std::vector<std::int32_t>& nodes, std::vector<double>& weights) {
    std::sort(acc.begin(), acc.end());
    for (std::size_t i = 0; i < acc.size();) {
        double w = 0.0;
        std::size_t j = i;
        while (j < acc.size() && acc[j].first == acc[i].first) w += acc[j++].second;
        nodes.push_back(acc[i].first);
        weights.push_back(w);
        i = j;
    }
}

} // namespace detail

template <class F>
WeightedRegion weighted_region(const LatticeDomain& d, const std::vector<std::uint32_t>& cells,
                               double eps, F&& cell_weight) {
    WeightedRegion reg;
    reg.cells = cells;
    std::vector<std::pair<std::int32_t, double>> acc;
    acc.reserve(cells.size() * 4);
    std::array<std::int32_t, 4> corner{};
    for (const std::uint32_t cell : cells) {
        if (cell >= std::uint32_t(d.n()) * std::uint32_t(d.n()))
            throw std::invalid_argument("weighted_region: cell index out of range");
        detail::corner_nodes(d, cell, corner);
        const double w = 0.25 * cell_weight(cell_center(d, cell));
        for (const std::int32_t v : corner) {
            if (v < 0 || !(1.0 - std::abs(d.coord(v)) > eps))
                throw std::invalid_argument("weighted_region: region touches the eps-collar");
            acc.push_back({v, w});
        }
    }
    detail::merge_node_weights(acc, reg.nodes, reg.weights);
    return reg;
}

inline WeightedRegion weighted_region(const LatticeDomain& d,
                                      const std::vector<std::uint32_t>& cells, double eps) {
    return weighted_region(d, cells, eps, [](Point) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Pairings

inline std::complex<double> pair_indicator(const LatticeDomain& d, const ChaosField& c,
                                           const WeightedRegion& reg) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < reg.nodes.size(); ++i) {
        const std::int32_t s = c.slot[std::size_t(reg.nodes[i])];
        if (s < 0)
            throw std::invalid_argument("pair_indicator: region touches the eps-collar");
        acc += reg.weights[i] * c.values[std::size_t(s)];
    }
    return acc * (d.h() * d.h() * c.normalization);
}

inline std::complex<double> pair_indicator(const LatticeDomain& d, const ChaosField& c,
                                           const std::vector<std::uint32_t>& cells) {
    return pair_indicator(d, c, weighted_region(d, cells, c.eps));
}

// Real test observable C_U = (V, 1_U) + conjugate.
inline double cosine_observable(const LatticeDomain& d, const ChaosField& c,
                                const std::vector<std::uint32_t>& cells) {
    return 2.0 * pair_indicator(d, c, cells).real();
}

// Componentwise mean and standard error of complex samples.
inline std::pair<std::complex<double>, std::complex<double>> complex_mean_se(
    const std::vector<std::complex<double>>& v) {
    std::vector<double> re(v.size()), im(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        re[i] = v[i].real();
        im[i] = v[i].imag();
    }
    const MeanSe mr = mean_se(re), mi = mean_se(im);
    return {{mr.mean, mi.mean}, {mr.se, mi.se}};
}

// ---------------------------------------------------------------------------
// Moment targets for centered discs

// int_{|z|<R} r_D(z)^{-s} dz, closed form.
inline double disc_radial_moment(double R, double s) {
    if (!(R > 0.0 && R < 1.0)) throw std::domain_error("disc_radial_moment: R must be in (0,1)");
    const double u = 1.0 - R * R;
    if (std::abs(1.0 - s) < 1e-12) return -std::numbers::pi * std::log(u);
    if (s >= 1.0) throw std::domain_error("disc_radial_moment: divergent exponent");
    return std::numbers::pi * (1.0 - std::pow(u, 1.0 - s)) / (1.0 - s);
}

inline double chaos_one_point_target(double R, double sigma) {
    return disc_radial_moment(R, 0.5 * sigma * sigma);
}

// E|mu(U)|^2 = iint_{UxU} r(x)^{-s} r(y)^{-s} e^{sigma^2 G(x,y)} dx dy for
// U = disc(0, R).  Rotational symmetry removes one angle; around each x the
// substitution q = |x-y|^{2-sigma^2}/(2-sigma^2) absorbs the contact
// singularity, leaving smooth integrands handled by fixed Gauss rules and a
// periodic trapezoid in the direction angle.
inline double chaos_second_moment_target(double R, double sigma) {
    if (!(sigma > 0.0) || sigma >= std::sqrt(2.0))
        throw std::domain_error("chaos_second_moment_target: sigma must lie in (0, sqrt(2))");
    const double s2 = sigma * sigma;
    const double beta = 2.0 - s2;
    static const GaussRule g_rad = gauss_legendre(48);
    static const GaussRule g_q = gauss_legendre(32);
    const int n_phi = 128;

    auto inner = [&](double rho) {
        const Point x(rho, 0.0);
        double acc_phi = 0.0;
        for (int m = 0; m < n_phi; ++m) {
            const double phi = 2.0 * std::numbers::pi * (m + 0.5) / n_phi;
            const Point dir(std::cos(phi), std::sin(phi));
            const double smax =
                -rho * dir.real() + std::sqrt(R * R - rho * rho * dir.imag() * dir.imag());
            const double qmax = std::pow(smax, beta) / beta;
            acc_phi += gauss_integrate(g_q, [&](double q) {
                const double s = std::pow(beta * q, 1.0 / beta);
                const Point y = x + s * dir;
                return std::pow(1.0 - std::norm(y), -0.5 * s2) *
                       std::pow(std::abs(1.0 - std::conj(x) * y), s2);
            }, 0.0, qmax);
        }
        return acc_phi * (2.0 * std::numbers::pi / n_phi);
    };

    const double outer = gauss_integrate(g_rad, [&](double rho) {
        return rho * std::pow(1.0 - rho * rho, -0.5 * s2) * inner(rho);
    }, 0.0, R);
    return 2.0 * std::numbers::pi * outer;
}

// ---------------------------------------------------------------------------
// Unconditional moments by Monte Carlo

struct ChaosMoments {
    std::complex<double> first{};      // mean of (V, 1_U)
    std::complex<double> first_se{};
    MeanSe second{};                   // mean of |(V, 1_U)|^2
    std::size_t samples = 0;
};

inline ChaosMoments chaos_moments(const LatticeDomain& d, const std::vector<std::uint32_t>& cells,
                                  double sigma, double eps, std::size_t samples,
                                  std::uint64_t seed) {
    if (samples < 2) throw std::invalid_argument("chaos_moments: need at least two samples");
    const WeightedRegion reg = weighted_region(d, cells, eps);
    const double kappa = d.circle_variance_offset(eps);
    const double scale = d.h() * d.h() * std::exp(0.5 * sigma * sigma * kappa);
    std::vector<std::complex<double>> firsts;
    std::vector<double> seconds;
    firsts.reserve(samples);
    seconds.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const GffSample f = d.sample_gff(seed, i);
        const auto vals =
            chaos_values_at(d, f.values, f.boundary_shift, sigma, eps, reg.nodes);
        std::complex<double> acc = 0.0;
        for (std::size_t k = 0; k < vals.size(); ++k) acc += reg.weights[k] * vals[k];
        acc *= scale;
        firsts.push_back(acc);
        seconds.push_back(std::norm(acc));
    }
    ChaosMoments out;
    std::tie(out.first, out.first_se) = complex_mean_se(firsts);
    out.second = mean_se(seconds);
    out.samples = samples;
    return out;
}

// ---------------------------------------------------------------------------
// Three-region cosine moment

struct TripleMoment {
    MeanSe estimate{};     // mean of C_U C_V C_W
    double target = 0.0;   // corner-weighted triple quadrature of the H kernel
    std::size_t samples = 0;
};

namespace detail {

// exp(-s2 * G(x_i, y_j)) for two weighted regions under the continuum disc
// Green's function, row-major.
inline std::vector<double> cross_exp_disc(const LatticeDomain& d, const WeightedRegion& a,
                                          const WeightedRegion& b, double s2) {
    std::vector<double> e(a.nodes.size() * b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        const Point x = d.coord(a.nodes[i]);
        for (std::size_t j = 0; j < b.nodes.size(); ++j)
            e[i * b.nodes.size() + j] = std::exp(-s2 * disc_green(x, d.coord(b.nodes[j])));
    }
    return e;
}

// Triple sum 2 * sum_{uvw} A_u A_v A_w (t_ppp + t_ppm + t_pmp + t_mpp) given
// the pair matrices of exp(-s2 G) and their reciprocals.
inline double triple_kernel_sum(const std::vector<double>& au, const std::vector<double>& av,
                                const std::vector<double>& aw, const std::vector<double>& euv,
                                const std::vector<double>& euw, const std::vector<double>& evw) {
    const std::size_t nu = au.size(), nv = av.size(), nw = aw.size();
    std::vector<double> iuw(euw.size()), ivw(evw.size());
    for (std::size_t i = 0; i < euw.size(); ++i) iuw[i] = 1.0 / euw[i];
    for (std::size_t i = 0; i < evw.size(); ++i) ivw[i] = 1.0 / evw[i];
    double total = 0.0;
    for (std::size_t u = 0; u < nu; ++u) {
        const double* e1 = &euw[u * nw];
        const double* i1 = &iuw[u * nw];
        double row = 0.0;
        for (std::size_t v = 0; v < nv; ++v) {
            const double* e2 = &evw[v * nw];
            const double* i2 = &ivw[v * nw];
            double same = 0.0, mixed = 0.0;
            for (std::size_t w = 0; w < nw; ++w) {
                same += aw[w] * (e1[w] * e2[w] + i1[w] * i2[w]);
                mixed += aw[w] * (e1[w] * i2[w] + i1[w] * e2[w]);
            }
            const double euv_ = euv[u * nv + v];
            row += av[v] * (euv_ * same + mixed / euv_);
        }
        total += au[u] * row;
    }
    return 2.0 * total;
}

inline std::vector<double> region_amplitudes(const LatticeDomain& d, const WeightedRegion& reg,
                                             double s2) {
    std::vector<double> a(reg.nodes.size());
    for (std::size_t i = 0; i < reg.nodes.size(); ++i)
        a[i] = reg.weights[i] * d.h() * d.h() *
               std::pow(1.0 - std::norm(d.coord(reg.nodes[i])), -0.5 * s2);
    return a;
}

} // namespace detail

inline TripleMoment cosine_triple(const LatticeDomain& d, const std::vector<std::uint32_t>& ucells,
                                  const std::vector<std::uint32_t>& vcells,
                                  const std::vector<std::uint32_t>& wcells, double sigma,
                                  double eps, std::size_t samples, std::uint64_t seed) {
    if (samples < 2) throw std::invalid_argument("cosine_triple: need at least two samples");
    if (region_separation(d, ucells, vcells) <= 2.0 * eps ||
        region_separation(d, ucells, wcells) <= 2.0 * eps ||
        region_separation(d, vcells, wcells) <= 2.0 * eps)
        throw std::invalid_argument("cosine_triple: regions must be separated by more than 2 eps");
    const double s2 = sigma * sigma;
    const WeightedRegion ru = weighted_region(d, ucells, eps);
    const WeightedRegion rv = weighted_region(d, vcells, eps);
    const WeightedRegion rw = weighted_region(d, wcells, eps);

    TripleMoment out;
    out.target = detail::triple_kernel_sum(
        detail::region_amplitudes(d, ru, s2), detail::region_amplitudes(d, rv, s2),
        detail::region_amplitudes(d, rw, s2), detail::cross_exp_disc(d, ru, rv, s2),
        detail::cross_exp_disc(d, ru, rw, s2), detail::cross_exp_disc(d, rv, rw, s2));

    const double kappa = d.circle_variance_offset(eps);
    const double scale = d.h() * d.h() * std::exp(0.5 * s2 * kappa);
    auto observable = [&](const WeightedRegion& reg, const GffSample& f) {
        const auto vals = chaos_values_at(d, f.values, f.boundary_shift, sigma, eps, reg.nodes);
        std::complex<double> acc = 0.0;
        for (std::size_t k = 0; k < vals.size(); ++k) acc += reg.weights[k] * vals[k];
        return 2.0 * (acc * scale).real();
    };
    std::vector<double> prods;
    prods.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const GffSample f = d.sample_gff(seed, i);
        prods.push_back(observable(ru, f) * observable(rv, f) * observable(rw, f));
    }
    out.estimate = mean_se(prods);
    out.samples = samples;
    return out;
}

// ---------------------------------------------------------------------------
// Conditional support

// Component whose area contains the whole interpolation stencil of the
// eps-circle around node v, or -1 when the stencil crosses components, meets
// the reachable zone, or leaves the evaluation margin.
inline std::int32_t stencil_component(const LatticeDomain& d, const TvsApprox& tvs,
                                      std::int32_t v, double eps) {
    const Point z = d.coord(v);
    if (!(1.0 - std::abs(z) > eps)) return -1;
    const std::int32_t k = tvs.component_of[std::size_t(v)];
    if (k < 0) return -1;
    const std::size_t M = d.circle_points(eps);
    for (std::size_t m = 0; m < M; ++m) {
        const double th = 2.0 * std::numbers::pi * double(m) / double(M);
        const Point p = z + eps * Point(std::cos(th), std::sin(th));
        const int i0 = int(std::floor((p.real() + 1.0) / d.h()));
        const int j0 = int(std::floor((p.imag() + 1.0) / d.h()));
        for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di) {
                const std::int32_t w = d.node(i0 + di, j0 + dj);
                if (w < 0 || tvs.component_of[std::size_t(w)] != k) return -1;
            }
    }
    return k;
}

// Degenerate-set variant: the stencil must stay on interior nodes.
inline bool stencil_in_nodes(const LatticeDomain& d, std::int32_t v, double eps) {
    const Point z = d.coord(v);
    if (!(1.0 - std::abs(z) > eps)) return false;
    const std::size_t M = d.circle_points(eps);
    for (std::size_t m = 0; m < M; ++m) {
        const double th = 2.0 * std::numbers::pi * double(m) / double(M);
        const Point p = z + eps * Point(std::cos(th), std::sin(th));
        const int i0 = int(std::floor((p.real() + 1.0) / d.h()));
        const int j0 = int(std::floor((p.imag() + 1.0) / d.h()));
        for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di)
                if (d.node(i0 + di, j0 + dj) < 0) return false;
    }
    return true;
}

// Cells of a test region kept for a conditional pairing, in corner-weight
// form.  node_comp is -1 throughout for a degenerate (empty) set, where the
// conditional law is the unconditional one on the whole disc.
struct ConditionalSupport {
    std::vector<std::uint32_t> cells;
    std::vector<std::int32_t> nodes;
    std::vector<double> weights;
    std::vector<std::int32_t> node_comp;
    std::vector<std::int32_t> comps;        // involved components, sorted
    std::size_t dropped_cells = 0;
};

template <class F>
ConditionalSupport build_conditional_support(const LatticeDomain& d, const TvsApprox& tvs,
                                             const std::vector<std::uint32_t>& cells, double eps,
                                             F&& cell_weight) {
    constexpr std::int32_t kUnknown = -2, kReject = -3;
    const bool degenerate = tvs.degenerate();
    std::vector<std::int32_t> cls(d.size(), kUnknown);
    auto classify = [&](std::int32_t v) {
        std::int32_t& c = cls[std::size_t(v)];
        if (c == kUnknown)
            c = degenerate ? (stencil_in_nodes(d, v, eps) ? -1 : kReject)
                           : stencil_component(d, tvs, v, eps);
        return c;
    };
    ConditionalSupport sup;
    std::vector<std::pair<std::int32_t, double>> acc;
    std::array<std::int32_t, 4> corner{};
    const std::int32_t floor_class = degenerate ? -1 : 0;
    for (const std::uint32_t cell : cells) {
        if (cell >= std::uint32_t(d.n()) * std::uint32_t(d.n()))
            throw std::invalid_argument("conditional support: cell index out of range");
        detail::corner_nodes(d, cell, corner);
        bool keep = corner[0] >= 0 && corner[1] >= 0 && corner[2] >= 0 && corner[3] >= 0;
        std::int32_t c0 = kReject;
        if (keep) {
            c0 = classify(corner[0]);
            keep = c0 >= floor_class && classify(corner[1]) == c0 && classify(corner[2]) == c0 &&
                   classify(corner[3]) == c0;
        }
        if (!keep) {
            ++sup.dropped_cells;
            continue;
        }
        sup.cells.push_back(cell);
        const double w = 0.25 * cell_weight(cell_center(d, cell));
        for (const std::int32_t v : corner) acc.push_back({v, w});
    }
    detail::merge_node_weights(acc, sup.nodes, sup.weights);
    sup.node_comp.reserve(sup.nodes.size());
    for (const std::int32_t v : sup.nodes) sup.node_comp.push_back(cls[std::size_t(v)]);
    sup.comps = sup.node_comp;
    std::sort(sup.comps.begin(), sup.comps.end());
    sup.comps.erase(std::unique(sup.comps.begin(), sup.comps.end()), sup.comps.end());
    if (!sup.comps.empty() && sup.comps.front() == -1) sup.comps.erase(sup.comps.begin());
    return sup;
}

inline ConditionalSupport build_conditional_support(const LatticeDomain& d, const TvsApprox& tvs,
                                                    const std::vector<std::uint32_t>& cells,
                                                    double eps) {
    return build_conditional_support(d, tvs, cells, eps, [](Point) { return 1.0; });
}

namespace detail {

// Redraw the fluctuation of the listed components on top of the frozen
// field, using the same per-component streams as markov_resample.
inline void refresh_components(const TvsApprox& tvs, const std::vector<std::int32_t>& comps,
                               double boundary_shift, std::uint64_t seed, std::uint64_t round,
                               std::vector<double>& work) {
    for (const std::int32_t k : comps) {
        const Component& c = tvs.components[std::size_t(k)];
        const std::vector<double> fresh =
            c.solver().sample(seed, (round << 20) + std::uint64_t(k));
        const std::vector<std::int32_t>& nodes = c.solver().nodes();
        for (std::size_t r = 0; r < nodes.size(); ++r)
            work[std::size_t(nodes[r])] = c.label - boundary_shift + fresh[r];
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Conditional one-point check

struct ConditionalOnePoint {
    std::complex<double> estimate{};   // inner mean of the conditional pairing
    std::complex<double> se{};         // componentwise standard error
    std::complex<double> rhs{};        // sum of f e^{i sigma label} r_comp^{-sigma^2/2}
    std::size_t support_cells = 0;
    std::size_t dropped_cells = 0;
    std::size_t resamples = 0;
};

template <class F>
ConditionalOnePoint conditional_one_point(const LatticeDomain& d, const TvsApprox& tvs,
                                          const GffSample& f,
                                          const std::vector<std::uint32_t>& cells,
                                          F&& cell_weight, double sigma, double eps,
                                          std::size_t resamples, std::uint64_t seed) {
    if (!(sigma < sigma_critical(tvs.params)))
        throw std::domain_error(
            "conditional_one_point: sigma must stay below 2*lambda/(a+b); at and above that "
            "threshold the one-point density r^{-sigma^2/2} is no longer integrable on the "
            "disc and the conditional identity has no finite normalization");
    if (resamples < 2)
        throw std::invalid_argument("conditional_one_point: need at least two resamples");
    if (f.values.size() != d.size())
        throw std::invalid_argument("conditional_one_point: sample does not match domain");

    const ConditionalSupport sup = build_conditional_support(d, tvs, cells, eps, cell_weight);
    ConditionalOnePoint out;
    out.support_cells = sup.cells.size();
    out.dropped_cells = sup.dropped_cells;
    out.resamples = resamples;

    const double s2 = sigma * sigma;
    const double h2 = d.h() * d.h();
    std::complex<double> rhs = 0.0;
    for (std::size_t i = 0; i < sup.nodes.size(); ++i) {
        double r, label;
        if (sup.node_comp[i] < 0) {
            r = 1.0 - std::norm(d.coord(sup.nodes[i]));
            label = 0.0;
        } else {
            const Component& c = tvs.components[std::size_t(sup.node_comp[i])];
            r = c.conformal_radius_at(sup.nodes[i]);
            label = c.label;
        }
        rhs += sup.weights[i] * std::polar(std::pow(r, -0.5 * s2), sigma * label);
    }
    out.rhs = rhs * h2;
    if (sup.nodes.empty()) return out;

    const double kappa = d.circle_variance_offset(eps);
    const double scale = h2 * std::exp(0.5 * s2 * kappa);
    std::vector<double> work = f.values;
    std::vector<std::complex<double>> pairings;
    pairings.reserve(resamples);
    for (std::size_t t = 0; t < resamples; ++t) {
        if (tvs.degenerate()) {
            work = d.sample_gff(seed, t).values;
        } else {
            detail::refresh_components(tvs, sup.comps, f.boundary_shift, seed, t, work);
        }
        const auto vals = chaos_values_at(d, work, f.boundary_shift, sigma, eps, sup.nodes);
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) acc += sup.weights[i] * vals[i];
        pairings.push_back(acc * scale);
    }
    std::tie(out.estimate, out.se) = complex_mean_se(pairings);
    return out;
}

inline ConditionalOnePoint conditional_one_point(const LatticeDomain& d, const TvsApprox& tvs,
                                                 const GffSample& f,
                                                 const std::vector<std::uint32_t>& cells,
                                                 double sigma, double eps, std::size_t resamples,
                                                 std::uint64_t seed) {
    return conditional_one_point(d, tvs, f, cells, [](Point) { return 1.0; }, sigma, eps,
                                 resamples, seed);
}

// ---------------------------------------------------------------------------
// Conditional three-point formula

struct ConditionalTriple {
    double rhs = 0.0;           // conditional expectation of C_U C_V C_W
    double h_integral = 0.0;    // triple quadrature of H over the supports
    double lower_bound = 0.0;   // 2 cos^3(a sigma) times the H integral
    std::size_t support_cells_u = 0, support_cells_v = 0, support_cells_w = 0;
};

namespace detail {

struct TripleSupports {
    ConditionalSupport u, v, w;
    std::vector<double> au, av, aw;     // weight * h^2 * r_comp^{-sigma^2/2}
    std::vector<double> lu, lv, lw;     // labels
};

inline std::vector<double> support_amplitudes(const LatticeDomain& d, const TvsApprox& tvs,
                                              const ConditionalSupport& sup, double s2,
                                              std::vector<double>& labels) {
    std::vector<double> a(sup.nodes.size());
    labels.resize(sup.nodes.size());
    for (std::size_t i = 0; i < sup.nodes.size(); ++i) {
        const Component& c = tvs.components[std::size_t(sup.node_comp[i])];
        a[i] = sup.weights[i] * d.h() * d.h() *
               std::pow(c.conformal_radius_at(sup.nodes[i]), -0.5 * s2);
        labels[i] = c.label;
    }
    return a;
}

// exp(-s2 * G_component(x_i, y_j)); the Green's function vanishes across
// components, so cross-component entries are 1.
inline std::vector<double> cross_exp_conditional(const TvsApprox& tvs,
                                                 const ConditionalSupport& a,
                                                 const ConditionalSupport& b, double s2) {
    std::vector<double> e(a.nodes.size() * b.nodes.size(), 1.0);
    for (std::size_t j = 0; j < b.nodes.size(); ++j) {
        const std::int32_t k = b.node_comp[j];
        bool shared = false;
        for (std::size_t i = 0; i < a.nodes.size() && !shared; ++i)
            shared = a.node_comp[i] == k;
        if (!shared) continue;
        const SubsetSolver& sol = tvs.components[std::size_t(k)].solver();
        const std::vector<double> col = sol.op().green_column(sol.local(b.nodes[j]));
        for (std::size_t i = 0; i < a.nodes.size(); ++i)
            if (a.node_comp[i] == k)
                e[i * b.nodes.size() + j] =
                    std::exp(-s2 * col[std::size_t(sol.local(a.nodes[i]))]);
    }
    return e;
}

} // namespace detail

inline ConditionalTriple conditional_three_point_rhs(const LatticeDomain& d,
                                                     const TvsApprox& tvs,
                                                     const std::vector<std::uint32_t>& ucells,
                                                     const std::vector<std::uint32_t>& vcells,
                                                     const std::vector<std::uint32_t>& wcells,
                                                     double sigma, double eps) {
    const TvsParams& p = tvs.params;
    if (std::abs(p.a - p.b) > 1e-12)
        throw std::domain_error(
            "conditional_three_point_rhs: the closed form requires a symmetric band (a = b); "
            "with unequal levels the label field is not spin-symmetric and the four-indicator "
            "decomposition does not close");
    if (!(sigma < sigma_critical(p)))
        throw std::domain_error("conditional_three_point_rhs: sigma must stay below sigma_c");
    if (region_separation(d, ucells, vcells) <= 2.0 * eps ||
        region_separation(d, ucells, wcells) <= 2.0 * eps ||
        region_separation(d, vcells, wcells) <= 2.0 * eps)
        throw std::invalid_argument(
            "conditional_three_point_rhs: regions must be separated by more than 2*eps");

    const double s2 = sigma * sigma;
    detail::TripleSupports ts;
    ts.u = build_conditional_support(d, tvs, ucells, eps);
    ts.v = build_conditional_support(d, tvs, vcells, eps);
    ts.w = build_conditional_support(d, tvs, wcells, eps);
    ConditionalTriple out;
    out.support_cells_u = ts.u.cells.size();
    out.support_cells_v = ts.v.cells.size();
    out.support_cells_w = ts.w.cells.size();
    if (ts.u.nodes.empty() || ts.v.nodes.empty() || ts.w.nodes.empty()) return out;

    ts.au = detail::support_amplitudes(d, tvs, ts.u, s2, ts.lu);
    ts.av = detail::support_amplitudes(d, tvs, ts.v, s2, ts.lv);
    ts.aw = detail::support_amplitudes(d, tvs, ts.w, s2, ts.lw);
    const std::vector<double> euv = detail::cross_exp_conditional(tvs, ts.u, ts.v, s2);
    const std::vector<double> euw = detail::cross_exp_conditional(tvs, ts.u, ts.w, s2);
    const std::vector<double> evw = detail::cross_exp_conditional(tvs, ts.v, ts.w, s2);

    const std::size_t nv = ts.av.size(), nw = ts.aw.size();
    double sum_h = 0.0;      // sum A A A (t_ppp + t_ppm + t_pmp + t_mpp)
    double sum_act = 0.0;    // sum A A A t_active, by label agreement
    for (std::size_t u = 0; u < ts.au.size(); ++u) {
        const double* e1 = &euw[u * nw];
        for (std::size_t v = 0; v < nv; ++v) {
            const double e_uv = euv[u * nv + v], i_uv = 1.0 / e_uv;
            const double avv = ts.av[v];
            const double* e2 = &evw[v * nw];
            const bool uv_same = ts.lu[u] == ts.lv[v];
            for (std::size_t w = 0; w < nw; ++w) {
                const double e_uw = e1[w], e_vw = e2[w];
                const double t_ppp = e_uv * e_uw * e_vw;
                const double t_ppm = e_uv / (e_uw * e_vw);
                const double t_pmp = i_uv * e_uw / e_vw;
                const double t_mpp = i_uv * e_vw / e_uw;
                const double aaa = ts.au[u] * avv * ts.aw[w];
                sum_h += aaa * (t_ppp + t_ppm + t_pmp + t_mpp);
                const bool uw_same = ts.lu[u] == ts.lw[w];
                double active;
                if (uv_same)
                    active = uw_same ? t_ppp : t_ppm;
                else
                    active = uw_same ? t_pmp : t_mpp;
                sum_act += aaa * active;
            }
        }
    }
    const double ca = std::cos(p.a * sigma), sa = std::sin(p.a * sigma);
    out.h_integral = 2.0 * sum_h;
    out.rhs = 2.0 * ca * sum_h - 8.0 * ca * sa * sa * sum_act;
    out.lower_bound = 2.0 * ca * ca * ca * sum_h;
    return out;
}

struct ConditionalTripleCheck {
    ConditionalTriple closed_form{};
    MeanSe inner{};          // resampled mean of C_U C_V C_W
    std::size_t resamples = 0;
};

inline ConditionalTripleCheck conditional_three_point(
    const LatticeDomain& d, const TvsApprox& tvs, const GffSample& f,
    const std::vector<std::uint32_t>& ucells, const std::vector<std::uint32_t>& vcells,
    const std::vector<std::uint32_t>& wcells, double sigma, double eps, std::size_t resamples,
    std::uint64_t seed) {
    if (resamples < 2)
        throw std::invalid_argument("conditional_three_point: need at least two resamples");
    ConditionalTripleCheck out;
    out.closed_form = conditional_three_point_rhs(d, tvs, ucells, vcells, wcells, sigma, eps);
    out.resamples = resamples;

    const ConditionalSupport su = build_conditional_support(d, tvs, ucells, eps);
    const ConditionalSupport sv = build_conditional_support(d, tvs, vcells, eps);
    const ConditionalSupport sw = build_conditional_support(d, tvs, wcells, eps);
    std::vector<std::int32_t> comps;
    for (const auto* s : {&su, &sv, &sw})
        comps.insert(comps.end(), s->comps.begin(), s->comps.end());
    std::sort(comps.begin(), comps.end());
    comps.erase(std::unique(comps.begin(), comps.end()), comps.end());

    const double s2 = sigma * sigma;
    const double kappa = d.circle_variance_offset(eps);
    const double scale = d.h() * d.h() * std::exp(0.5 * s2 * kappa);
    auto observable = [&](const ConditionalSupport& sup, const std::vector<double>& work) {
        if (sup.nodes.empty()) return 0.0;
        const auto vals = chaos_values_at(d, work, f.boundary_shift, sigma, eps, sup.nodes);
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) acc += sup.weights[i] * vals[i];
        return 2.0 * (acc * scale).real();
    };
    std::vector<double> work = f.values;
    std::vector<double> prods;
    prods.reserve(resamples);
    for (std::size_t t = 0; t < resamples; ++t) {
        detail::refresh_components(tvs, comps, f.boundary_shift, seed, t, work);
        prods.push_back(observable(su, work) * observable(sv, work) * observable(sw, work));
    }
    out.inner = mean_se(prods);
    return out;
}

} // namespace tvslab
