#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selreg/common.hpp"

namespace selreg {

enum class ColumnKind { numeric, categorical };

struct ColumnMeta {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<std::string> categories;  // categorical only, first-appearance order
};

/// Tabular regression data. Raw datasets (straight from load_csv) may carry
/// categorical columns whose cells hold category indices; preprocessed
/// datasets are all-numeric.
struct Dataset {
    Matrix features;
    std::vector<double> target;
    std::vector<ColumnMeta> columns;

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }

    std::optional<std::size_t> column_index(const std::string& name) const;
    Dataset take_rows(std::span<const std::size_t> idx) const;
};

struct PreprocessRecord {
    std::vector<double> col_min, col_max;  // post-encoding columns
    double target_min = 0.0, target_max = 1.0;
    // original column name -> produced column names (identity for numeric)
    std::map<std::string, std::vector<std::string>> expansion;

    double scale_target(double y) const;
    double unscale_target(double y) const;
};

struct SplitPlan {
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> fractions;
    std::vector<std::string> assignment;  // split name per row

    std::vector<std::size_t> rows_of(const std::string& split_name) const;
};

/// Load a raw dataset from CSV. Columns where every cell parses as a number
/// are numeric; anything else is categorical (cells become category indices).
/// `column_kinds` overrides inference per column name.
Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::map<std::string, ColumnKind>& column_kinds = {});

/// One-hot encode categoricals and min-max scale every column and the target,
/// with statistics computed on `fit_rows` only. Constant columns scale to 0;
/// categories unseen on fit rows produce no column (rows map to all zeros).
std::pair<Dataset, PreprocessRecord> preprocess(const Dataset& raw,
                                                std::span<const std::size_t> fit_rows);

/// Seeded shuffle, then partition at cumulative floor boundaries; remainder
/// rows go to the last split.
SplitPlan split(const Dataset& data,
                const std::vector<std::pair<std::string, double>>& fractions,
                std::uint64_t seed);

/// Append one Uniform[0,1] column named "X_Random" (suffixed on collision).
Dataset add_random_feature(const Dataset& data, std::uint64_t seed);

/// Add independent N(noise_mean, noise_sd^2) draws to the listed features.
Dataset perturb(const Dataset& data, const std::vector<std::string>& feature_names,
                double noise_mean, double noise_sd, std::uint64_t seed);

struct SynthResult {
    Dataset data;
    std::vector<double> true_sigma;  // per-row noise sd, for oracle tests
};

/// Heteroscedastic synthetic regression data: X ~ U[0,1]^d,
/// Y = g(X) + sigma(X) * eps. Profile "increasing" makes sigma grow with x1;
/// "constant:<sd>" uses a fixed sd.
SynthResult synth_heteroscedastic(std::size_t n, std::size_t d,
                                  const std::string& noise_profile, std::uint64_t seed);

/// House-price-flavoured synthetic dataset with named features; noise sd
/// grows with living_area so uncertainty-based rejection is learnable.
SynthResult synth_house(std::size_t n, std::uint64_t seed);

void write_csv(const Dataset& data, const std::string& path,
               const std::string& target_name = "target");
std::string split_plan_to_json(const SplitPlan& plan);

}  // namespace selreg
