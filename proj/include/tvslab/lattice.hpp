#pragma once

// Lattice approximation of the zero-boundary Gaussian free field on the unit
// disc.
//
// The grid places nodes at (-1 + i*h, -1 + j*h) for i, j = 0..n with
// h = 2/n, and keeps the interior ones with |z| <= 1 - h/2.  The field is
// sampled with covariance 2*pi times the inverse of the combinatorial
// Laplacian (degree 4 on the diagonal, -1 across interior edges; absent
// neighbors act as Dirichlet zeros).  With that scaling the lattice Green
// function converges to the continuum one,
//
//     2*pi * (A^{-1})_{vw}  ->  log|1 - v conj(w)| - log|v - w|,
//
// at rate O(h^2), and on the diagonal
//
//     2*pi * (A^{-1})_{vv}  =  -log h + log(1 - |v|^2) + kappa + o(1),
//
// with kappa = gamma + (3/2) log 2, the potential-kernel constant of the
// square lattice.  Circle averages over radius eps carry their own, smaller
// lattice offset which circle_variance_offset measures exactly for a given
// (n, eps) through one quadratic form in A^{-1}.
//
// Factorizations use Eigen's SimplicialLLT.  A sample is sqrt(2*pi) times a
// permuted triangular backsolve applied to i.i.d. standard normals, so a
// (seed, task) pair fixes the field bit for bit.

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "tvslab/rng.hpp"

namespace tvslab {

inline constexpr double kGreenScale = 2.0 * std::numbers::pi;

// gamma + (3/2) log 2: additive constant in the diagonal Green asymptotics.
inline constexpr double kKappaDiagonal = 1.6169364357414508;

using Point = std::complex<double>;

namespace detail {

// Forward solve L y = e_col for lower-triangular CSC L, skipping the zero
// prefix; returns |y|^2, which is the (col, col) entry of (L L^T)^{-1}.
inline double inverse_diagonal_entry(const Eigen::SparseMatrix<double>& L, Eigen::Index col,
                                     std::vector<double>& work) {
    const Eigen::Index N = L.rows();
    work.assign(std::size_t(N), 0.0);
    work[std::size_t(col)] = 1.0;
    const auto* outer = L.outerIndexPtr();
    const auto* inner = L.innerIndexPtr();
    const double* vals = L.valuePtr();
    double norm2 = 0.0;
    for (Eigen::Index j = col; j < N; ++j) {
        double yj = work[std::size_t(j)];
        if (yj == 0.0) continue;
        const Eigen::Index p0 = outer[j], p1 = outer[j + 1];
        yj /= vals[p0];
        norm2 += yj * yj;
        work[std::size_t(j)] = yj;
        for (Eigen::Index p = p0 + 1; p < p1; ++p) work[std::size_t(inner[p])] -= vals[p] * yj;
    }
    return norm2;
}

} // namespace detail

// Dirichlet Laplacian on an arbitrary node subset of the square grid,
// together with its Cholesky factorization.  Used both for the full domain
// and for single components when the field is resampled or a component Green
// function is needed.
class GridOperator {
    using Solver = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>;

  public:
    GridOperator() = default;

    // adjacency: for each local node, up to four local neighbor indices
    // (negative = missing, i.e. Dirichlet).
    explicit GridOperator(const std::vector<std::array<std::int32_t, 4>>& adjacency) {
        const Eigen::Index N = Eigen::Index(adjacency.size());
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(std::size_t(N) * 5);
        for (Eigen::Index v = 0; v < N; ++v) {
            trip.emplace_back(v, v, 4.0);
            for (int d = 0; d < 4; ++d) {
                const std::int32_t w = adjacency[std::size_t(v)][std::size_t(d)];
                if (w >= 0) trip.emplace_back(v, w, -1.0);
            }
        }
        lap_.resize(N, N);
        lap_.setFromTriplets(trip.begin(), trip.end());
        llt_ = std::make_unique<Solver>();
        llt_->compute(lap_);
        if (llt_->info() != Eigen::Success)
            throw std::runtime_error("GridOperator: Cholesky factorization failed");
    }

    Eigen::Index size() const { return lap_.rows(); }
    const Eigen::SparseMatrix<double>& laplacian() const { return lap_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_->solve(rhs); }

    // One zero-boundary field sample on the subset, already scaled to the
    // 2*pi normalization.
    std::vector<double> sample(std::uint64_t seed, std::uint64_t task = 0) const {
        const Eigen::Index N = size();
        CounterRng rng(seed, task);
        Eigen::VectorXd xi(N);
        for (Eigen::Index v = 0; v < N; ++v) xi[v] = rng.normal();
        Eigen::VectorXd y = llt_->matrixU().solve(xi);
        Eigen::VectorXd x = llt_->permutationPinv() * y;
        std::vector<double> out(static_cast<std::size_t>(N));
        const double s = std::sqrt(kGreenScale);
        for (Eigen::Index v = 0; v < N; ++v) out[std::size_t(v)] = s * x[v];
        return out;
    }

    // Column of the scaled Green function: 2*pi * A^{-1} e_source.
    std::vector<double> green_column(Eigen::Index source) const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(size());
        e[source] = 1.0;
        Eigen::VectorXd g = llt_->solve(e);
        std::vector<double> out(static_cast<std::size_t>(size()));
        for (Eigen::Index v = 0; v < size(); ++v) out[std::size_t(v)] = kGreenScale * g[v];
        return out;
    }

    // Diagonal entry 2*pi * (A^{-1})_{vv} without a full solve per node pair.
    double green_diagonal(Eigen::Index v) const {
        ensure_factor_copy();
        const Eigen::Index pv = llt_->permutationP().indices()[v];
        return kGreenScale * detail::inverse_diagonal_entry(*factor_, pv, diag_work_);
    }

    // All diagonal entries of 2*pi * A^{-1}.
    std::vector<double> green_diagonal_all() const {
        ensure_factor_copy();
        const Eigen::Index N = size();
        std::vector<double> out(static_cast<std::size_t>(N));
        const auto& pidx = llt_->permutationP().indices();
        for (Eigen::Index v = 0; v < N; ++v)
            out[std::size_t(v)] =
                kGreenScale * detail::inverse_diagonal_entry(*factor_, pidx[v], diag_work_);
        return out;
    }

    double quadratic_form(const Eigen::VectorXd& w) const {
        return kGreenScale * w.dot(llt_->solve(w));
    }

  private:
    void ensure_factor_copy() const {
        if (!factor_) factor_ = std::make_unique<Eigen::SparseMatrix<double>>(llt_->matrixL());
    }

    Eigen::SparseMatrix<double> lap_;
    std::unique_ptr<Solver> llt_;
    mutable std::unique_ptr<Eigen::SparseMatrix<double>> factor_;
    mutable std::vector<double> diag_work_;
};

// One field realization.  values holds the zero-boundary sample per interior
// node; boundary_shift is an additive constant representing nonzero Dirichlet
// data (the content-lemma experiments shift the boundary to (b-a)/2).  The
// physical field at a node is values[v] + boundary_shift, and outside the
// domain it equals boundary_shift.
struct GffSample {
    std::vector<double> values;
    double boundary_shift = 0.0;
};

class LatticeDomain {
  public:
    explicit LatticeDomain(int n) : n_(n), h_(2.0 / n) {
        if (n < 16) throw std::invalid_argument("LatticeDomain: n must be at least 16");
        node_at_.assign(std::size_t(n + 1) * std::size_t(n + 1), -1);
        // |z| <= 1 - h/2 in exact integer arithmetic: with z = ((2i-n)/n,
        // (2j-n)/n) the cut is (2i-n)^2 + (2j-n)^2 <= (n-1)^2.
        const std::int64_t r2 = std::int64_t(n - 1) * std::int64_t(n - 1);
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i) {
                const std::int64_t u = 2 * std::int64_t(i) - n, v = 2 * std::int64_t(j) - n;
                if (u * u + v * v <= r2) {
                    node_at_[flat(i, j)] = std::int32_t(grid_.size());
                    grid_.push_back({i, j});
                }
            }
        std::vector<std::array<std::int32_t, 4>> adj(grid_.size());
        for (std::size_t v = 0; v < grid_.size(); ++v) {
            const auto [i, j] = grid_[v];
            adj[v] = {node(i - 1, j), node(i + 1, j), node(i, j - 1), node(i, j + 1)};
        }
        op_ = GridOperator(adj);
    }

    int n() const { return n_; }
    double h() const { return h_; }
    std::size_t size() const { return grid_.size(); }
    const GridOperator& op() const { return op_; }

    std::int32_t node(int i, int j) const {
        if (i < 0 || j < 0 || i > n_ || j > n_) return -1;
        return node_at_[flat(i, j)];
    }
    std::array<int, 2> grid_index(std::int32_t v) const { return grid_[std::size_t(v)]; }
    Point coord(std::int32_t v) const {
        const auto [i, j] = grid_[std::size_t(v)];
        return {-1.0 + i * h_, -1.0 + j * h_};
    }
    bool boundary_adjacent(std::int32_t v) const {
        const auto [i, j] = grid_[std::size_t(v)];
        return node(i - 1, j) < 0 || node(i + 1, j) < 0 || node(i, j - 1) < 0 ||
               node(i, j + 1) < 0;
    }

    GffSample sample_gff(std::uint64_t seed, std::uint64_t task = 0) const {
        return GffSample{op_.sample(seed, task), 0.0};
    }

    std::vector<double> discrete_green(std::int32_t source) const {
        return op_.green_column(source);
    }

    // Bilinear value of a node field at an off-grid point.  Grid corners that
    // are not interior nodes contribute zero, matching the Dirichlet boundary
    // condition of every field this is applied to.
    double interpolate(const std::vector<double>& field, Point z) const {
        const double fx = (z.real() + 1.0) / h_, fy = (z.imag() + 1.0) / h_;
        int i0 = int(std::floor(fx)), j0 = int(std::floor(fy));
        i0 = std::min(std::max(i0, 0), n_ - 1);
        j0 = std::min(std::max(j0, 0), n_ - 1);
        const double tx = fx - i0, ty = fy - j0;
        double acc = 0.0;
        const double w00 = (1 - tx) * (1 - ty), w10 = tx * (1 - ty);
        const double w01 = (1 - tx) * ty, w11 = tx * ty;
        const std::int32_t c00 = node(i0, j0), c10 = node(i0 + 1, j0);
        const std::int32_t c01 = node(i0, j0 + 1), c11 = node(i0 + 1, j0 + 1);
        if (c00 >= 0) acc += w00 * field[std::size_t(c00)];
        if (c10 >= 0) acc += w10 * field[std::size_t(c10)];
        if (c01 >= 0) acc += w01 * field[std::size_t(c01)];
        if (c11 >= 0) acc += w11 * field[std::size_t(c11)];
        return acc;
    }

    std::size_t circle_points(double eps) const {
        const double m = std::ceil(kGreenScale * eps / h_);
        return std::size_t(std::max(32.0, m));
    }

    double circle_average(const std::vector<double>& field, Point z, double eps) const {
        check_circle(z, eps);
        const std::size_t M = circle_points(eps);
        double acc = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const double th = 2.0 * std::numbers::pi * double(m) / double(M);
            acc += interpolate(field, z + eps * Point(std::cos(th), std::sin(th)));
        }
        return acc / double(M);
    }

    // Exact lattice variance of the circle average around z, as a quadratic
    // form in the scaled inverse Laplacian.
    double circle_variance(Point z, double eps) const {
        check_circle(z, eps);
        const std::size_t M = circle_points(eps);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(Eigen::Index(size()));
        for (std::size_t m = 0; m < M; ++m) {
            const double th = 2.0 * std::numbers::pi * double(m) / double(M);
            add_stencil(w, z + eps * Point(std::cos(th), std::sin(th)), 1.0 / double(M));
        }
        return op_.quadratic_form(w);
    }

    // Offset of the lattice circle-average variance against the continuum
    // value -log(eps) + log(1 - |z|^2); the multiplicative chaos
    // normalization consumes this measured at the origin.
    double circle_variance_offset(double eps, Point z = Point(0.0, 0.0)) const {
        const double cont = -std::log(eps) + std::log(1.0 - std::norm(z));
        return circle_variance(z, eps) - cont;
    }

    // Discrete Dirichlet problem on a connected node subset: every grid
    // neighbor outside the subset (interior node or not) acts as boundary,
    // with data evaluated at its grid coordinate.  Returns values in subset
    // order.  Throws if the subset is disconnected or the harmonic residual
    // of the solution exceeds 1e-10.
    template <class BoundaryData>
    std::vector<double> harmonic_extension(const std::vector<std::int32_t>& subset,
                                           BoundaryData&& data) const {
        if (subset.empty()) throw std::invalid_argument("harmonic_extension: empty subset");
        std::vector<std::int32_t> local(size(), -1);
        for (std::size_t r = 0; r < subset.size(); ++r)
            local[std::size_t(subset[r])] = std::int32_t(r);

        const Eigen::Index N = Eigen::Index(subset.size());
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(std::size_t(N) * 5);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
        for (Eigen::Index r = 0; r < N; ++r) {
            const auto [i, j] = grid_[std::size_t(subset[std::size_t(r)])];
            trip.emplace_back(r, r, 4.0);
            const std::array<std::array<int, 2>, 4> nb = {
                std::array{i - 1, j}, std::array{i + 1, j}, std::array{i, j - 1},
                std::array{i, j + 1}};
            for (auto [ni, nj] : nb) {
                const std::int32_t w = node(ni, nj);
                if (w >= 0 && local[std::size_t(w)] >= 0)
                    trip.emplace_back(r, local[std::size_t(w)], -1.0);
                else
                    rhs[r] += data(Point(-1.0 + ni * h_, -1.0 + nj * h_));
            }
        }
        Eigen::SparseMatrix<double> A(N, N);
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(A);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("harmonic_extension: factorization failed");
        Eigen::VectorXd u = llt.solve(rhs);

        std::vector<double> out(subset.size());
        for (Eigen::Index r = 0; r < N; ++r) out[std::size_t(r)] = u[r];
        const double res = (A * u - rhs).cwiseAbs().maxCoeff();
        if (res > 1e-10) throw std::runtime_error("harmonic_extension: residual above 1e-10");

        // Connectivity: a disconnected subset still factorizes, so check
        // explicitly by flood fill from the first node.
        std::vector<char> seen(subset.size(), 0);
        std::vector<std::int32_t> stack = {0};
        seen[0] = 1;
        std::size_t reached = 1;
        while (!stack.empty()) {
            const auto [i, j] = grid_[std::size_t(subset[std::size_t(stack.back())])];
            stack.pop_back();
            for (auto [ni, nj] : {std::array{i - 1, j}, std::array{i + 1, j},
                                  std::array{i, j - 1}, std::array{i, j + 1}}) {
                const std::int32_t w = node(ni, nj);
                if (w < 0) continue;
                const std::int32_t lw = local[std::size_t(w)];
                if (lw >= 0 && !seen[std::size_t(lw)]) {
                    seen[std::size_t(lw)] = 1;
                    ++reached;
                    stack.push_back(lw);
                }
            }
        }
        if (reached != subset.size())
            throw std::invalid_argument("harmonic_extension: subset is disconnected");
        return out;
    }

  private:
    std::size_t flat(int i, int j) const {
        return std::size_t(j) * std::size_t(n_ + 1) + std::size_t(i);
    }

    void check_circle(Point z, double eps) const {
        if (!(eps >= 3.0 * h_))
            throw std::domain_error("circle average: eps must be at least 3h");
        if (!(std::abs(z) + eps < 1.0))
            throw std::domain_error("circle average: circle must stay inside the disc");
    }

    void add_stencil(Eigen::VectorXd& w, Point p, double weight) const {
        const double fx = (p.real() + 1.0) / h_, fy = (p.imag() + 1.0) / h_;
        int i0 = int(std::floor(fx)), j0 = int(std::floor(fy));
        i0 = std::min(std::max(i0, 0), n_ - 1);
        j0 = std::min(std::max(j0, 0), n_ - 1);
        const double tx = fx - i0, ty = fy - j0;
        const std::array<std::pair<std::int32_t, double>, 4> c = {
            std::pair{node(i0, j0), (1 - tx) * (1 - ty)},
            std::pair{node(i0 + 1, j0), tx * (1 - ty)},
            std::pair{node(i0, j0 + 1), (1 - tx) * ty},
            std::pair{node(i0 + 1, j0 + 1), tx * ty}};
        for (auto [v, wgt] : c)
            if (v >= 0) w[v] += weight * wgt;
    }

    int n_ = 0;
    double h_ = 0.0;
    std::vector<std::array<int, 2>> grid_;
    std::vector<std::int32_t> node_at_;
    GridOperator op_;
};

inline LatticeDomain build_domain(int n) { return LatticeDomain(n); }

// Field snapshots: little-endian binary with a fixed-size header followed by
// one f64 per node in domain order.
struct FieldSnapshot {
    int n = 0;
    std::uint64_t seed = 0;
    double scaling = 0.0;
    std::vector<double> values;
};

namespace detail {
inline constexpr std::uint32_t kSnapshotMagic = 0x4C535654u; // "TVSL"
inline constexpr std::uint32_t kSnapshotVersion = 1u;
static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

template <class T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
} // namespace detail

inline void save_field(const std::string& path, const LatticeDomain& d, std::uint64_t seed,
                       const GffSample& sample) {
    if (sample.values.size() != d.size()) throw std::invalid_argument("save_field: size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_field: cannot open " + path);
    detail::put(os, detail::kSnapshotMagic);
    detail::put(os, detail::kSnapshotVersion);
    detail::put(os, std::uint32_t(d.n()));
    detail::put(os, std::uint32_t(0));
    detail::put(os, seed);
    detail::put(os, kGreenScale);
    detail::put(os, std::uint64_t(sample.values.size()));
    os.write(reinterpret_cast<const char*>(sample.values.data()),
             std::streamsize(sample.values.size() * sizeof(double)));
    if (!os) throw std::runtime_error("save_field: write failed for " + path);
}

inline FieldSnapshot load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_field: cannot open " + path);
    if (detail::get<std::uint32_t>(is) != detail::kSnapshotMagic)
        throw std::runtime_error("load_field: bad magic in " + path);
    if (detail::get<std::uint32_t>(is) != detail::kSnapshotVersion)
        throw std::runtime_error("load_field: unsupported version in " + path);
    FieldSnapshot snap;
    snap.n = int(detail::get<std::uint32_t>(is));
    detail::get<std::uint32_t>(is);
    snap.seed = detail::get<std::uint64_t>(is);
    snap.scaling = detail::get<double>(is);
    const auto count = detail::get<std::uint64_t>(is);
    snap.values.resize(count);
    is.read(reinterpret_cast<char*>(snap.values.data()), std::streamsize(count * sizeof(double)));
    if (!is) throw std::runtime_error("load_field: truncated payload in " + path);
    return snap;
}

} // namespace tvslab
