#pragma once

// Result rows and their persistence.  Every experiment produces one row per
// measured point; rows carry the estimate, its standard error, the analytic
// target when one exists, and a pass flag when the experiment embeds an
// acceptance rule for that row.  CSV is the stable contract; report.json
// additionally echoes the configuration and timing.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tvslab {

inline constexpr const char* kVersion = "0.1.0";

struct ReportRow {
    std::string quantity;
    double a = 0.0, b = 0.0;
    double sigma = std::nan(""), eps = std::nan(""), delta = std::nan("");
    double estimate = 0.0;
    double se = std::nan("");
    double target = std::nan("");
    int pass = -1;    // -1 = no rule, 0 = fail, 1 = pass
    int n = 0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

struct ExperimentReport {
    std::string experiment;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::vector<ReportRow> rows;
    double wall_seconds = 0.0;
    std::string version = kVersion;
    std::vector<std::string> notes;

    bool pass() const {
        for (const ReportRow& r : rows)
            if (r.pass == 0) return false;
        return true;
    }
};

namespace detail {

inline std::string csv_num(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline constexpr const char* kCsvHeader =
    "experiment,quantity,a,b,sigma,eps,delta,estimate,se,analytic_target,pass,n,samples,seed";

inline std::string csv_line(const std::string& experiment, const ReportRow& r) {
    std::string out = experiment;
    out += ',';
    out += r.quantity;
    for (const double v : {r.a, r.b, r.sigma, r.eps, r.delta, r.estimate, r.se, r.target}) {
        out += ',';
        out += detail::csv_num(v);
    }
    out += ',';
    if (r.pass >= 0) out += r.pass ? "1" : "0";
    out += ',' + std::to_string(r.n);
    out += ',' + std::to_string(r.samples);
    out += ',' + std::to_string(r.seed);
    return out;
}

inline void write_rows_csv(const std::string& path, const ExperimentReport& rep) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << kCsvHeader << '\n';
    for (const ReportRow& r : rep.rows) f << csv_line(rep.experiment, r) << '\n';
}

inline void write_report_json(const std::string& path, const ExperimentReport& rep) {
    nlohmann::json j;
    j["experiment"] = rep.experiment;
    j["version"] = rep.version;
    j["wall_seconds"] = rep.wall_seconds;
    j["pass"] = rep.pass();
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : rep.config_echo) cfg[k] = v;
    j["config"] = cfg;
    j["notes"] = rep.notes;
    nlohmann::json rows = nlohmann::json::array();
    for (const ReportRow& r : rep.rows) {
        nlohmann::json jr;
        jr["quantity"] = r.quantity;
        jr["a"] = r.a;
        jr["b"] = r.b;
        if (!std::isnan(r.sigma)) jr["sigma"] = r.sigma;
        if (!std::isnan(r.eps)) jr["eps"] = r.eps;
        if (!std::isnan(r.delta)) jr["delta"] = r.delta;
        jr["estimate"] = r.estimate;
        if (!std::isnan(r.se)) jr["se"] = r.se;
        if (!std::isnan(r.target)) jr["analytic_target"] = r.target;
        if (r.pass >= 0) jr["pass"] = bool(r.pass);
        jr["n"] = r.n;
        jr["samples"] = r.samples;
        jr["seed"] = r.seed;
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << '\n';
}

} // namespace tvslab
