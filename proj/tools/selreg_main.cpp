#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "selreg/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"selreg: selective-regression benchmark and audit toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, results_dir;
    int jobs = 1;
    std::string seeds_csv;

    auto* bench = app.add_subcommand("bench", "run the (dataset x method x coverage x seed) grid");
    bench->add_option("--config", config_path, "experiment config JSON")->required();
    bench->add_option("--out", out_dir, "output directory (overrides config out_dir)");
    bench->add_option("--jobs", jobs, "parallel cells")->check(CLI::PositiveNumber);
    bench->add_option("--seeds", seeds_csv, "comma-separated seed list override");

    auto* audit = app.add_subcommand("audit", "run the audit + Shapley + shift pipeline");
    audit->add_option("--config", config_path, "experiment config JSON")->required();
    audit->add_option("--out", out_dir, "output directory (overrides config out_dir)");

    auto* report = app.add_subcommand("report", "summarize a finished bench run");
    report->add_option("results_dir", results_dir, "bench output directory")->required();
    report->add_option("--out", out_dir, "where to write the report (default: results dir)");

    std::string prep_csv, prep_target, prep_out;
    auto* prep = app.add_subcommand("prep", "preprocess a CSV into an encoded, scaled dataset");
    prep->add_option("csv", prep_csv, "input CSV path")->required();
    prep->add_option("--target", prep_target, "target column name")->required();
    prep->add_option("--out", prep_out, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) return selreg::run_report(results_dir, out_dir);
        if (prep->parsed()) return selreg::run_prep(prep_csv, prep_target, prep_out);

        auto config = selreg::config_from_json(read_file(config_path));
        if (!seeds_csv.empty()) {
            config.seeds.clear();
            std::stringstream ss(seeds_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) config.seeds.push_back(std::stoull(tok));
            if (config.seeds.empty()) throw std::invalid_argument("--seeds: empty list");
        }
        std::string dir = out_dir.empty() ? config.out_dir : out_dir;
        if (bench->parsed()) return selreg::run_bench(config, dir, jobs);
        return selreg::run_audit(config, dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
