#pragma once

// The ten named experiments behind the CLI.  Each one composes library
// operations into a seeded, reproducible measurement and returns an
// ExperimentReport whose rows carry analytic targets and embedded pass rules.
// Monte Carlo loops run on the task pool with per-task RNG streams and
// task-indexed result slots, so every thread count produces identical rows.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tvslab/brownian.hpp"
#include "tvslab/chaos.hpp"
#include "tvslab/estimators.hpp"
#include "tvslab/exit_law.hpp"
#include "tvslab/lattice.hpp"
#include "tvslab/measure_mass.hpp"
#include "tvslab/parallel.hpp"
#include "tvslab/params.hpp"
#include "tvslab/quadrature.hpp"
#include "tvslab/report.hpp"
#include "tvslab/tvs.hpp"

namespace tvslab {

struct ExperimentConfig {
    std::string experiment;
    double a = 2.0 * kLambda;
    double b = 2.0 * kLambda;
    int lattice_n = 256;
    double sigma = 0.3;
    double eps = 0.05;
    double delta = 0.1;
    std::size_t samples = 200;
    std::size_t inner_resamples = 200;
    std::uint64_t seed = 1;
    std::string output_path = "tvslab-out";
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "exit-law",  "covariance", "chaos-moments", "conditional-one-point",
        "conditional-three-point", "dimension",     "one-point",
        "two-point", "minkowski",  "content-lemma"};
    return names;
}

// ---------------------------------------------------------------------------
// Config parsing

inline void config_set(ExperimentConfig& c, const std::string& key, const std::string& value) {
    auto num = [&](double& slot) { slot = std::stod(value); };
    if (key == "experiment") c.experiment = value;
    else if (key == "a") num(c.a);
    else if (key == "b") num(c.b);
    else if (key == "lattice_n") c.lattice_n = std::stoi(value);
    else if (key == "sigma") num(c.sigma);
    else if (key == "eps") num(c.eps);
    else if (key == "delta") num(c.delta);
    else if (key == "samples") c.samples = std::stoull(value);
    else if (key == "inner_resamples") c.inner_resamples = std::stoull(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "output_path") c.output_path = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

// key=value lines; '#' starts a comment; blank lines ignored.
inline ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        config_set(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

inline void apply_override(ExperimentConfig& c, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    config_set(c, kv.substr(0, eq), kv.substr(eq + 1));
}

// Field-level validation; throws before any lattice allocation.
inline void validate_config(const ExperimentConfig& c) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
        std::string msg = "config: unknown experiment '" + c.experiment + "'; valid names:";
        for (const auto& n : names) msg += " " + n;
        throw std::invalid_argument(msg);
    }
    TvsParams p(c.a, c.b);    // throws with its own field message
    const double sc = sigma_critical(p);
    if (c.lattice_n < 16 || c.lattice_n > 8192)
        throw std::invalid_argument("config: lattice_n must lie in [16, 8192]");
    if (c.samples < 1) throw std::invalid_argument("config: samples must be positive");
    if (c.experiment == "chaos-moments" &&
        (!(c.sigma > 0.0) || !(c.sigma < std::numbers::sqrt2)))
        throw std::invalid_argument("config: sigma must lie in (0, sqrt 2)");
    if ((c.experiment == "chaos-moments" || c.experiment == "covariance") && c.samples < 2)
        throw std::invalid_argument("config: samples must be at least 2");
    if (c.experiment == "conditional-one-point" || c.experiment == "conditional-three-point") {
        if (!(c.sigma > 0.0) || !(c.sigma < sc))
            throw std::invalid_argument(
                "config: sigma must lie in (0, sigma_c) for conditional experiments");
        if (c.inner_resamples < 2)
            throw std::invalid_argument("config: inner_resamples must be at least 2");
    }
    const double h = 2.0 / c.lattice_n;
    if (c.experiment == "covariance" || c.experiment == "chaos-moments" ||
        c.experiment == "conditional-one-point" || c.experiment == "conditional-three-point") {
        if (!(c.eps >= 3.0 * h))
            throw std::invalid_argument("config: eps must be at least 3 lattice spacings");
        if (!(c.eps <= 0.2))
            throw std::invalid_argument("config: eps too large for the fixed evaluation regions");
    }
    if (c.experiment == "dimension" && c.lattice_n < 512)
        throw std::invalid_argument(
            "config: dimension needs lattice_n >= 512 so at least four dyadic scales exist");
    if (c.experiment == "one-point" && !(c.eps > 0.0 && c.eps <= 0.45))
        throw std::invalid_argument("config: one-point needs eps in (0, 0.45]");
    if (c.experiment == "minkowski" && !(c.delta > 0.0 && c.delta < sc))
        throw std::invalid_argument("config: minkowski needs delta in (0, sigma_c)");
    if (c.experiment == "two-point" && !(c.delta > 0.0 && c.delta < 0.0625))
        throw std::invalid_argument(
            "config: two-point needs delta in (0, 0.0625) (quarter of the pinned |x-y| = 0.25)");
    if (c.output_path.empty()) throw std::invalid_argument("config: output_path is empty");
}

namespace exp_detail {

inline ReportRow base_row(const ExperimentConfig& c, std::string quantity) {
    ReportRow r;
    r.quantity = std::move(quantity);
    r.a = c.a;
    r.b = c.b;
    r.n = c.lattice_n;
    r.samples = c.samples;
    r.seed = c.seed;
    return r;
}

inline int within_se(double estimate, double target, double se, double k) {
    return std::abs(estimate - target) <= k * se ? 1 : 0;
}

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

inline void echo_config(ExperimentReport& rep, const ExperimentConfig& c) {
    rep.config_echo = {{"experiment", c.experiment},
                       {"a", fmt(c.a)},
                       {"b", fmt(c.b)},
                       {"lattice_n", std::to_string(c.lattice_n)},
                       {"sigma", fmt(c.sigma)},
                       {"eps", fmt(c.eps)},
                       {"delta", fmt(c.delta)},
                       {"samples", std::to_string(c.samples)},
                       {"inner_resamples", std::to_string(c.inner_resamples)},
                       {"seed", std::to_string(c.seed)},
                       {"output_path", c.output_path}};
}

} // namespace exp_detail

// ---------------------------------------------------------------------------
// exit-law: Brownian first-exit oracle vs the eigenfunction series.

inline ExperimentReport run_exit_law(const ExperimentConfig& c, int threads) {
    const TvsParams p(c.a, c.b);
    const ExitLaw law(p);
    ExperimentReport rep;
    rep.experiment = c.experiment;

    constexpr double kDt = 1e-5;
    constexpr double kCap = 1e3;
    std::vector<double> tau(c.samples);
    constexpr std::size_t kChunk = 512;
    const std::size_t tasks = (c.samples + kChunk - 1) / kChunk;
    run_tasks(tasks, threads, [&](std::size_t t) {
        const std::size_t first = t * kChunk;
        const std::size_t count = std::min(kChunk, c.samples - first);
        exit_times_into(p, c.seed, first, count, kDt, kCap, tau.data() + first);
    });

    for (const double t : {0.5, 1.0, 2.0, 4.0}) {
        std::size_t alive = 0;
        for (const double x : tau) alive += x > t;
        ReportRow r = exp_detail::base_row(c, "survival(t=" + exp_detail::fmt(t) + ")");
        r.estimate = double(alive) / double(c.samples);
        r.target = exit_survival(law, t);
        // score-test scale: the null variance keeps the gate meaningful when
        // p_hat sits at 0 or 1
        const double v = std::max(r.estimate * (1.0 - r.estimate),
                                  r.target * (1.0 - r.target)) +
                         1e-12;
        r.se = std::sqrt(v / double(c.samples));
        r.pass = exp_detail::within_se(r.estimate, r.target, r.se, 3.0);
        rep.rows.push_back(r);
    }
    {
        ReportRow r = exp_detail::base_row(c, "ks");
        r.estimate = ks_statistic(tau, [&](double t) { return law.cdf(t); });
        r.target = 0.01;
        r.pass = r.estimate <= 0.01 ? 1 : 0;
        rep.rows.push_back(r);
    }
    for (const double frac : {0.5, 0.8}) {
        const double s = frac * sigma_critical(p);
        const MeanSe m = laplace_mc(tau, s);
        ReportRow r = exp_detail::base_row(c, "laplace(sigma=" + exp_detail::fmt(s) + ")");
        r.sigma = s;
        r.estimate = m.mean;
        r.se = m.se;
        r.target = exit_laplace(p, s);
        r.pass = exp_detail::within_se(r.estimate, r.target, r.se, 3.0);
        rep.rows.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// covariance: circle-average covariances vs the closed-form Green function.

inline ExperimentReport run_covariance(const ExperimentConfig& c, int threads) {
    static const std::vector<std::pair<Point, Point>> pairs = {
        {{0.0, 0.0}, {0.3, 0.0}},    {{0.2, 0.1}, {-0.25, 0.15}}, {{-0.3, -0.2}, {0.1, 0.25}},
        {{0.4, 0.0}, {0.0, -0.35}},  {{-0.15, 0.3}, {0.2, -0.2}}};
    for (const auto& [z, w] : pairs)
        if (!(std::abs(z - w) > 2.0 * c.eps))
            throw std::invalid_argument("covariance: eps too large for the pinned pairs");

    const LatticeDomain d = build_domain(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;
    std::vector<double> vals(c.samples * 2 * pairs.size());
    run_tasks(c.samples, threads, [&](std::size_t s) {
        const GffSample f = d.sample_gff(c.seed, s);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            vals[(s * pairs.size() + k) * 2] = d.circle_average(f.values, pairs[k].first, c.eps);
            vals[(s * pairs.size() + k) * 2 + 1] =
                d.circle_average(f.values, pairs[k].second, c.eps);
        }
    });

    for (std::size_t k = 0; k < pairs.size(); ++k) {
        double mx = 0, my = 0;
        for (std::size_t s = 0; s < c.samples; ++s) {
            mx += vals[(s * pairs.size() + k) * 2];
            my += vals[(s * pairs.size() + k) * 2 + 1];
        }
        mx /= double(c.samples);
        my /= double(c.samples);
        double cov = 0, var = 0;
        for (std::size_t s = 0; s < c.samples; ++s) {
            const double u = (vals[(s * pairs.size() + k) * 2] - mx) *
                             (vals[(s * pairs.size() + k) * 2 + 1] - my);
            cov += u;
        }
        cov /= double(c.samples - 1);
        for (std::size_t s = 0; s < c.samples; ++s) {
            const double u = (vals[(s * pairs.size() + k) * 2] - mx) *
                                 (vals[(s * pairs.size() + k) * 2 + 1] - my) -
                             cov;
            var += u * u;
        }
        ReportRow r = exp_detail::base_row(c, "cov_pair" + std::to_string(k + 1));
        r.eps = c.eps;
        r.estimate = cov;
        r.se = std::sqrt(var / double(c.samples - 1) / double(c.samples));
        r.target = disc_green(pairs[k].first, pairs[k].second);
        r.pass = exp_detail::within_se(cov, r.target, r.se, 3.0);
        rep.rows.push_back(r);
        std::ostringstream note;
        note << "pair" << k + 1 << ": z=(" << pairs[k].first.real() << ","
             << pairs[k].first.imag() << ") w=(" << pairs[k].second.real() << ","
             << pairs[k].second.imag() << ")";
        rep.notes.push_back(note.str());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// chaos-moments: first/second moment on a disc and the cosine three-point.

inline ExperimentReport run_chaos_moments(const ExperimentConfig& c, int threads) {
    (void)threads;    // chaos_moments/cosine_triple stream per-sample internally
    const LatticeDomain d = build_domain(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;

    const auto ucells = cells_in_disc(d, Point(0, 0), 0.3);
    const ChaosMoments m = chaos_moments(d, ucells, c.sigma, c.eps, c.samples, c.seed);
    const double t1 = chaos_one_point_target(0.3, c.sigma);
    {
        ReportRow r = exp_detail::base_row(c, "first_re");
        r.sigma = c.sigma;
        r.eps = c.eps;
        r.estimate = m.first.real();
        r.se = m.first_se.real();
        r.target = t1;
        r.pass = exp_detail::within_se(r.estimate, r.target, r.se, 3.0);
        rep.rows.push_back(r);
        r.quantity = "first_im";
        r.estimate = m.first.imag();
        r.se = m.first_se.imag();
        r.target = 0.0;
        r.pass = exp_detail::within_se(r.estimate, 0.0, r.se, 3.0);
        rep.rows.push_back(r);
    }
    {
        const double t2 = chaos_second_moment_target(0.3, c.sigma);
        ReportRow r = exp_detail::base_row(c, "second");
        r.sigma = c.sigma;
        r.eps = c.eps;
        r.estimate = m.second.mean;
        r.se = m.second.se;
        r.target = t2;
        const double tol = std::max(3.0 * r.se, 0.05 * t2);
        r.pass = std::abs(r.estimate - t2) <= tol ? 1 : 0;
        rep.rows.push_back(r);
    }
    {
        std::vector<std::vector<std::uint32_t>> discs;
        for (int k = 0; k < 3; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / 3.0;
            discs.push_back(
                cells_in_disc(d, 0.35 * Point(std::cos(phi), std::sin(phi)), 0.08));
        }
        const TripleMoment tm =
            cosine_triple(d, discs[0], discs[1], discs[2], c.sigma, c.eps, c.samples, c.seed);
        ReportRow r = exp_detail::base_row(c, "triple");
        r.sigma = c.sigma;
        r.eps = c.eps;
        r.estimate = tm.estimate.mean;
        r.se = tm.estimate.se;
        r.target = tm.target;
        r.pass = exp_detail::within_se(r.estimate, r.target, r.se, 3.0);
        rep.rows.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// conditional-one-point: resampled conditional mean vs the label/radius sum,
// one comparison per outer extraction.

inline ExperimentReport run_conditional_one_point(const ExperimentConfig& c, int threads) {
    const TvsParams p(c.a, c.b);
    const LatticeDomain d = build_domain(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;
    const auto cells = cells_in_disc(d, Point(0, 0), 1.0);

    struct Outcome {
        ConditionalOnePoint r;
        bool ok = false;
    };
    std::vector<Outcome> out(c.samples);
    run_tasks(c.samples, threads, [&](std::size_t s) {
        const GffSample f = d.sample_gff(c.seed, s);
        const TvsApprox tvs = extract_tvs(d, f, p);
        out[s].r = conditional_one_point(d, tvs, f, cells, c.sigma, c.eps, c.inner_resamples,
                                         exp_detail::derived_seed(c.seed, s));
        out[s].ok = true;
    });

    std::size_t agreed = 0;
    for (std::size_t s = 0; s < c.samples; ++s) {
        const ConditionalOnePoint& q = out[s].r;
        const bool re_ok = std::abs(q.estimate.real() - q.rhs.real()) <= 3.0 * q.se.real();
        const bool im_ok = std::abs(q.estimate.imag() - q.rhs.imag()) <= 3.0 * q.se.imag();
        const bool empty = q.support_cells == 0;
        const bool ok = empty || (re_ok && im_ok);
        agreed += ok;
        ReportRow r = exp_detail::base_row(c, "outer" + std::to_string(s) + "_re");
        r.sigma = c.sigma;
        r.eps = c.eps;
        r.estimate = q.estimate.real();
        r.se = q.se.real();
        r.target = q.rhs.real();
        r.pass = -1;
        rep.rows.push_back(r);
        r.quantity = "outer" + std::to_string(s) + "_im";
        r.estimate = q.estimate.imag();
        r.se = q.se.imag();
        r.target = q.rhs.imag();
        rep.rows.push_back(r);
        if (empty) rep.notes.push_back("outer " + std::to_string(s) + ": empty support");
    }
    ReportRow r = exp_detail::base_row(c, "outer_agreement");
    r.sigma = c.sigma;
    r.eps = c.eps;
    r.estimate = double(agreed);
    r.target = std::ceil(0.85 * double(c.samples));
    r.pass = double(agreed) >= r.target ? 1 : 0;
    rep.rows.push_back(r);
    return rep;
}

// ---------------------------------------------------------------------------
// conditional-three-point: closed-form conditional expectation vs inner
// resampling on one extraction, plus the lower-bound inequality.

inline ExperimentReport run_conditional_three_point(const ExperimentConfig& c, int threads) {
    (void)threads;
    const TvsParams p(c.a, c.b);
    const LatticeDomain d = build_domain(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;

    const GffSample f = d.sample_gff(c.seed, 0);
    const TvsApprox tvs = extract_tvs(d, f, p);
    std::vector<std::vector<std::uint32_t>> discs;
    for (int k = 0; k < 3; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / 3.0;
        discs.push_back(cells_in_disc(d, 0.45 * Point(std::cos(phi), std::sin(phi)), 0.1));
    }
    const ConditionalTripleCheck chk =
        conditional_three_point(d, tvs, f, discs[0], discs[1], discs[2], c.sigma, c.eps,
                                c.inner_resamples, exp_detail::derived_seed(c.seed, 1));

    auto push = [&](const char* q, double est) {
        ReportRow r = exp_detail::base_row(c, q);
        r.sigma = c.sigma;
        r.eps = c.eps;
        r.estimate = est;
        rep.rows.push_back(r);
    };
    push("rhs", chk.closed_form.rhs);
    push("h_integral", chk.closed_form.h_integral);
    {
        ReportRow r = exp_detail::base_row(c, "lower_bound");
        r.sigma = c.sigma;
        r.eps = c.eps;
        r.estimate = chk.closed_form.lower_bound;
        r.pass = chk.closed_form.rhs + 1e-12 >= chk.closed_form.lower_bound ? 1 : 0;
        rep.rows.push_back(r);
    }
    {
        ReportRow r = exp_detail::base_row(c, "inner");
        r.sigma = c.sigma;
        r.eps = c.eps;
        r.estimate = chk.inner.mean;
        r.se = chk.inner.se;
        r.target = chk.closed_form.rhs;
        const bool empty = chk.closed_form.support_cells_u == 0 ||
                           chk.closed_form.support_cells_v == 0 ||
                           chk.closed_form.support_cells_w == 0;
        r.pass = empty ? 1 : exp_detail::within_se(r.estimate, r.target, r.se, 4.0);
        rep.rows.push_back(r);
    }
    push("support_cells", double(chk.closed_form.support_cells_u +
                                 chk.closed_form.support_cells_v +
                                 chk.closed_form.support_cells_w));
    return rep;
}

// ---------------------------------------------------------------------------
// dimension: mean box-count slope over an extraction ensemble.

inline ExperimentReport run_dimension(const ExperimentConfig& c, int threads) {
    const TvsParams p(c.a, c.b);
    const LatticeDomain d = build_domain(c.lattice_n);
    const std::vector<double> scales = dyadic_scales(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;

    std::vector<double> slopes(c.samples, std::nan(""));
    std::vector<std::vector<std::size_t>> counts(c.samples);
    run_tasks(c.samples, threads, [&](std::size_t s) {
        const GffSample f = d.sample_gff(c.seed, s);
        const TvsApprox tvs = extract_tvs(d, f, p);
        if (tvs.degenerate()) return;
        try {
            const BoxCountResult r = box_count(tvs, scales);
            slopes[s] = r.slope;
            counts[s] = r.counts;
        } catch (const std::invalid_argument&) {
            // frontier too sparse for the fit window; skipped below
        }
    });

    std::vector<double> kept;
    for (const double s : slopes)
        if (!std::isnan(s)) kept.push_back(s);
    if (kept.empty()) throw std::runtime_error("dimension: no sample produced a fit");
    if (kept.size() < c.samples)
        rep.notes.push_back(std::to_string(c.samples - kept.size()) +
                            " samples skipped (degenerate or sparse frontier)");
    const MeanSe m = mean_se(kept);
    const double target = dimension(p);
    {
        ReportRow r = exp_detail::base_row(c, "mean_slope");
        r.estimate = m.mean;
        r.se = m.se;
        r.target = target;
        double lo = target - 0.15, hi = target + 0.15;
        if (std::abs(target - 1.875) < 1e-9) { lo = 1.75; hi = 1.95; }
        if (std::abs(target - 1.5) < 1e-9) { lo = 1.40; hi = 1.60; }
        r.pass = (m.mean >= lo && m.mean <= hi) ? 1 : 0;
        rep.rows.push_back(r);
    }
    for (std::size_t k = 0; k < scales.size(); ++k) {
        double mean = 0.0;
        std::size_t cnt = 0;
        for (const auto& cs : counts)
            if (cs.size() == scales.size()) {
                mean += double(cs[k]);
                ++cnt;
            }
        ReportRow r = exp_detail::base_row(c, "count(eps=" + exp_detail::fmt(scales[k]) + ")");
        r.eps = scales[k];
        r.estimate = cnt ? mean / double(cnt) : 0.0;
        rep.rows.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// one-point: hitting probabilities at z = 0 across a short eps ladder.

inline ExperimentReport run_one_point(const ExperimentConfig& c, int threads) {
    (void)threads;    // the radius solves dominate; parallelised inside when needed
    const TvsParams p(c.a, c.b);
    const LatticeDomain d = build_domain(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;

    std::vector<double> eps_list;
    for (int k = 0; k < 4; ++k) eps_list.push_back(c.eps * std::exp(-0.5 * k));
    const OnePointResult res =
        one_point_probability(d, p, Point(0, 0), eps_list, c.samples, c.seed);

    std::vector<double> lx, ly;
    const double denom = double(c.samples - res.reached);
    for (const OnePointRow& row : res.rows) {
        ReportRow r = exp_detail::base_row(c, "p(eps=" + exp_detail::fmt(row.eps) + ")");
        r.eps = row.eps;
        r.estimate = row.p_hat;
        r.target = row.target_series;
        const double v = std::max(row.p_hat * (1.0 - row.p_hat),
                                  r.target * (1.0 - r.target)) +
                         1e-12;
        r.se = std::sqrt(v / std::max(denom, 1.0));
        r.pass = exp_detail::within_se(row.p_hat, r.target, r.se, 3.0);
        rep.rows.push_back(r);
        if (row.p_hat > 0.0) {
            lx.push_back(std::log(row.eps));
            ly.push_back(std::log(row.p_hat));
        }
    }
    {
        ReportRow r = exp_detail::base_row(c, "slope");
        r.target = 2.0 - dimension(p);
        if (lx.size() >= 2) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < lx.size(); ++i) {
                sx += lx[i];
                sy += ly[i];
                sxx += lx[i] * lx[i];
                sxy += lx[i] * ly[i];
            }
            const double m = double(lx.size());
            r.estimate = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            r.pass = std::abs(r.estimate - r.target) <= 0.1 ? 1 : 0;
        } else {
            r.estimate = std::nan("");
            r.pass = 0;
            rep.notes.push_back("slope: fewer than two nonzero frequencies");
        }
        rep.rows.push_back(r);
    }
    {
        ReportRow r = exp_detail::base_row(c, "reached_fraction");
        r.estimate = double(res.reached) / double(c.samples);
        rep.rows.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// two-point: joint delta-neighborhood probability at the pinned pair.

inline ExperimentReport run_two_point(const ExperimentConfig& c, int threads) {
    (void)threads;
    const TvsParams p(c.a, c.b);
    const LatticeDomain d = build_domain(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;

    const Point x(-0.125, 0.0), y(0.125, 0.0);
    const TwoPointResult res = two_point_probability(d, p, x, y, c.delta, c.samples, c.seed);
    {
        ReportRow r = exp_detail::base_row(c, "p_joint");
        r.delta = c.delta;
        r.estimate = res.p_joint;
        r.se = res.se_joint;
        r.pass = res.p_joint <= std::min(res.p_x, res.p_y) + 1e-12 ? 1 : 0;
        rep.rows.push_back(r);
    }
    for (const auto& [q, v] : {std::pair<const char*, double>{"p_x", res.p_x},
                               {"p_y", res.p_y},
                               {"product_gap", res.p_joint - res.p_x * res.p_y}}) {
        ReportRow r = exp_detail::base_row(c, q);
        r.delta = c.delta;
        r.estimate = v;
        rep.rows.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// minkowski: expected mass of the mu_delta approximation.

inline ExperimentReport run_minkowski(const ExperimentConfig& c, int threads) {
    const TvsParams p(c.a, c.b);
    const LatticeDomain d = build_domain(c.lattice_n);
    ExperimentReport rep;
    rep.experiment = c.experiment;

    RadiusFieldOptions opt;
    opt.exact = c.lattice_n <= 128;
    if (!opt.exact) {
        const GffSample f = d.sample_gff(c.seed, 0);
        const TvsApprox tvs = extract_tvs(d, f, p);
        opt.koebe = tvs.degenerate() ? 2.0 : koebe_calibrate(d, tvs, 300, c.seed + 17);
        rep.notes.push_back("radius mode: koebe proxy, c_K = " + exp_detail::fmt(opt.koebe));
    } else {
        rep.notes.push_back("radius mode: exact per-node solves");
    }

    std::vector<double> mass(c.samples);
    run_tasks(c.samples, threads, [&](std::size_t s) {
        const GffSample f = d.sample_gff(c.seed, s);
        const TvsApprox tvs = extract_tvs(d, f, p);
        mass[s] = minkowski_density(d, tvs, c.delta, opt).total_mass;
    });
    const MeanSe m = mean_se(mass);
    ReportRow r = exp_detail::base_row(c, "mass");
    r.delta = c.delta;
    r.estimate = m.mean;
    r.se = m.se;
    r.target = expected_measure_mass(p, c.delta);
    const double tol = std::max(3.0 * m.se, 0.1 * r.target);
    r.pass = std::abs(m.mean - r.target) <= tol ? 1 : 0;
    rep.rows.push_back(r);
    return rep;
}

// ---------------------------------------------------------------------------
// content-lemma: deterministic Abelian-lemma ratio on the synthetic field
// r = dist(z, K)^{2/sigma_c^2}, K a unit-length segment, f = 1_{dist < 0.45}.
// Both functionals reduce to one-dimensional integrals evaluated by Gauss
// quadrature after the substitution w = t^q that removes the F_delta
// singularity at the segment.

inline ExperimentReport run_content_lemma(const ExperimentConfig& c, int threads) {
    (void)threads;
    const TvsParams p(c.a, c.b);
    const double sc = sigma_critical(p);
    constexpr double kEll = 1.0;    // segment length
    constexpr double kR = 0.45;     // f cutoff distance
    ExperimentReport rep;
    rep.experiment = c.experiment;

    const GaussRule g = gauss_legendre(64);
    auto Jval = [&](double u) {
        // u^{-sc^2/2} * area{dist < u^{sc^2/2}} for the stadium
        const double t = std::pow(u, 0.5 * sc * sc);
        return 2.0 * kEll + std::numbers::pi * t;
    };
    auto Fval = [&](double delta) {
        const double ep = delta * (sc - 0.5 * delta);
        const double q = 2.0 * ep / (sc * sc);
        auto integrand = [&](double w) {
            const double t = std::pow(w, 1.0 / q);
            return 2.0 * kEll + 2.0 * std::numbers::pi * t;
        };
        return delta / q * gauss_integrate(g, integrand, 0.0, std::pow(kR, q));
    };

    const double us[3] = {0.1, 0.05, 0.025};
    double J[3], F[3];
    for (int i = 0; i < 3; ++i) {
        J[i] = Jval(us[i]);
        F[i] = Fval(us[i]);
        ReportRow r = exp_detail::base_row(c, "J(u=" + exp_detail::fmt(us[i]) + ")");
        r.estimate = J[i];
        rep.rows.push_back(r);
        r.quantity = "F(delta=" + exp_detail::fmt(us[i]) + ")";
        r.delta = us[i];
        r.estimate = F[i];
        rep.rows.push_back(r);
    }
    // J error is exactly proportional to u^{sc^2/2}: eliminate it on the
    // finest pair.  F has a genuine delta + delta^2 expansion: two linear
    // Richardson levels, then the quadratic level.
    const double rho = std::pow(2.0, 0.5 * sc * sc);
    const double jstar = (rho * J[2] - J[1]) / (rho - 1.0);
    const double fA = 2.0 * F[1] - F[0];
    const double fB = 2.0 * F[2] - F[1];
    const double fstar = (4.0 * fB - fA) / 3.0;
    {
        ReportRow r = exp_detail::base_row(c, "J_star");
        r.estimate = jstar;
        r.target = 2.0 * kEll;
        rep.rows.push_back(r);
        r.quantity = "F_star";
        r.estimate = fstar;
        r.target = kEll * sc;
        rep.rows.push_back(r);
    }
    {
        ReportRow r = exp_detail::base_row(c, "ratio");
        r.estimate = jstar / ((2.0 / sc) * fstar);
        r.target = 1.0;
        r.pass = std::abs(r.estimate - 1.0) <= 0.02 ? 1 : 0;
        rep.rows.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------

inline ExperimentReport run_experiment(const ExperimentConfig& c, int threads) {
    validate_config(c);
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport rep;
    if (c.experiment == "exit-law") rep = run_exit_law(c, threads);
    else if (c.experiment == "covariance") rep = run_covariance(c, threads);
    else if (c.experiment == "chaos-moments") rep = run_chaos_moments(c, threads);
    else if (c.experiment == "conditional-one-point") rep = run_conditional_one_point(c, threads);
    else if (c.experiment == "conditional-three-point")
        rep = run_conditional_three_point(c, threads);
    else if (c.experiment == "dimension") rep = run_dimension(c, threads);
    else if (c.experiment == "one-point") rep = run_one_point(c, threads);
    else if (c.experiment == "two-point") rep = run_two_point(c, threads);
    else if (c.experiment == "minkowski") rep = run_minkowski(c, threads);
    else rep = run_content_lemma(c, threads);
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    exp_detail::echo_config(rep, c);
    return rep;
}

} // namespace tvslab
