#pragma once

#include "selreg/dataset.hpp"
#include "selreg/explain.hpp"

namespace selreg {

struct DatasetSpec {
    std::string name;
    std::string type;  // "synthetic" | "house" | "csv"
    std::size_t n = 400, d = 5;
    std::string profile = "increasing";
    std::uint64_t gen_seed = 0;
    std::string path, target_column;  // csv only
    bool add_random = false;
};

struct Q3Config {
    LearnerSpec audit_learner = LearnerSpec::logistic_spec();
    double target_coverage = 0.80;
    std::vector<std::string> shift_features;  // empty + shift_all=false -> no shifts
    bool shift_all = true;
    double noise_mean = 5.0, noise_sd = 1.0;
    int repeats = 5;
    std::size_t explain_rows = 100;
    std::size_t background_rows = 100;
    std::string method = "doubt_var";
};

struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<SelectiveMethod> methods;
    LearnerSpec learner = LearnerSpec::gbt_spec();
    std::vector<double> coverage_grid;  // empty = default grid
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::vector<std::pair<std::string, double>> split_fractions = {
        {"train", 0.6}, {"cal", 0.2}, {"test", 0.2}};
    double epsilon = 0.05;
    int folds = 5;
    std::optional<std::size_t> bootstrap_override;
    double cvplus_level = 0.95;
    std::string out_dir = "results";
    std::optional<Q3Config> q3;
};

/// Parse and strictly validate a config; unknown keys are an error.
ExperimentConfig config_from_json(const std::string& json_text);
std::string config_to_canonical_json(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

/// Materialize a dataset spec (synthetic generation or CSV load + encode).
SynthResult materialize_dataset(const DatasetSpec& spec);

// Exit codes: 0 success, 1 validation error, 2 partial cell failures, 3 fatal.
int run_bench(const ExperimentConfig& config, const std::string& out_dir, int jobs = 1);
int run_audit(const ExperimentConfig& config, const std::string& out_dir);
int run_report(const std::string& results_dir, const std::string& out_dir);
int run_prep(const std::string& csv_path, const std::string& target_column,
             const std::string& out_path);

}  // namespace selreg
