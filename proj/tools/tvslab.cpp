// tvslab command line: run one experiment, or sweep one config key across a
// list of values.  Outputs go to <output_path>/rows.csv and report.json; the
// exit status is 0 when every embedded pass rule held, 1 otherwise, 2 on a
// usage or config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tvslab.hpp"

namespace fs = std::filesystem;
using namespace tvslab;

namespace {

void print_summary(const ExperimentReport& rep) {
    std::size_t rules = 0, held = 0;
    for (const auto& r : rep.rows) {
        if (r.pass >= 0) {
            ++rules;
            held += r.pass == 1;
        }
    }
    std::printf("[%s] %zu rows, %zu/%zu rules held, %.1f s\n", rep.experiment.c_str(),
                rep.rows.size(), held, rules, rep.wall_seconds);
    for (const auto& r : rep.rows) {
        std::printf("  %-28s est %-13.6g", r.quantity.c_str(), r.estimate);
        if (!std::isnan(r.se)) std::printf(" se %-10.3g", r.se);
        if (!std::isnan(r.target)) std::printf(" target %-13.6g", r.target);
        if (r.pass >= 0) std::printf(" %s", r.pass ? "ok" : "FAIL");
        std::printf("\n");
    }
    for (const auto& n : rep.notes) std::printf("  note: %s\n", n.c_str());
}

std::vector<std::string> split_values(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : csv) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tvslab: two-valued local sets and imaginary chaos on the unit disc"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string axis, values_csv;

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("--config", config_path, "key=value config file")->required();
    run->add_option("--set", sets, "override a config entry (key=value), repeatable");

    auto* sweep = app.add_subcommand("sweep", "repeat an experiment across an axis of values");
    sweep->add_option("--config", config_path, "key=value config file")->required();
    sweep->add_option("--axis", axis, "config key to vary")->required();
    sweep->add_option("--values", values_csv, "comma separated values for the axis")->required();
    sweep->add_option("--set", sets, "override a config entry (key=value), repeatable");

    CLI11_PARSE(app, argc, argv);

    try {
        const int threads = thread_budget();
        ExperimentConfig base = config_from_file(config_path);
        for (const auto& kv : sets) apply_override(base, kv);

        if (run->parsed()) {
            validate_config(base);
            const ExperimentReport rep = run_experiment(base, threads);
            fs::create_directories(base.output_path);
            write_rows_csv(base.output_path + "/rows.csv", rep);
            write_report_json(base.output_path + "/report.json", rep);
            print_summary(rep);
            return rep.pass() ? 0 : 1;
        }

        const std::vector<std::string> values = split_values(values_csv);
        if (values.empty()) throw std::invalid_argument("sweep: --values is empty");
        std::vector<ExperimentConfig> cfgs;
        for (std::size_t i = 0; i < values.size(); ++i) {
            ExperimentConfig c = base;
            config_set(c, axis, values[i]);
            if (axis != "seed") c.seed = base.seed + i;
            validate_config(c);
            cfgs.push_back(c);
        }
        fs::create_directories(base.output_path);
        std::ofstream csv(base.output_path + "/rows.csv");
        csv << kCsvHeader << '\n';
        bool all_pass = true;
        for (std::size_t i = 0; i < cfgs.size(); ++i) {
            const ExperimentReport rep = run_experiment(cfgs[i], threads);
            for (const auto& r : rep.rows) csv << csv_line(rep.experiment, r) << '\n';
            write_report_json(base.output_path + "/report_" + std::to_string(i) + ".json", rep);
            std::printf("-- %s = %s --\n", axis.c_str(), values[i].c_str());
            print_summary(rep);
            all_pass = all_pass && rep.pass();
        }
        return all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
