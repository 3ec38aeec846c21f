#pragma once

#include "selreg/selective.hpp"

namespace selreg {

struct EvaluationRecord {
    std::string method;
    double target_coverage = 1.0;
    double actual_coverage = 0.0;
    double mse_full = 0.0;
    double mse_accepted = 0.0;  // meaningless when no row accepted
    double delta_mse = 0.0;     // mse_accepted/mse_full - 1 when cov_ok, else 0
    bool cov_ok = false;
    std::uint64_t seed = 0;
};

struct RankSummary {
    std::vector<std::string> methods;
    std::vector<double> mean_ranks;
    double critical_difference = 0.0;
    double friedman_statistic = 0.0;
    std::size_t n_datasets = 0;
    // Pairs of method indices whose mean ranks are closer than the CD.
    std::vector<std::pair<std::size_t, std::size_t>> not_separated;
};

double coverage(const std::vector<SelectivePrediction>& preds);

/// Coverage constraint check: satisfied iff target - actual < eps
/// (a gap of exactly eps counts as a violation).
bool cov_sat(double target, double actual, double eps = 0.05);

double mse(std::span<const double> predictions, std::span<const double> y_true);

/// Evaluate one (method, coverage) cell. `full_predictions` are the
/// underlying predictor's values for every row, used for mse_full.
EvaluationRecord delta_mse(const std::vector<SelectivePrediction>& preds,
                           const std::vector<double>& full_predictions,
                           const std::vector<double>& y_true, double alpha,
                           double eps = 0.05);

extern const std::vector<double> kDefaultCoverageGrid;  // 11 paper values + 1.0

std::vector<EvaluationRecord> risk_coverage_curve(const SelectiveModel& model,
                                                  const Matrix& X_test,
                                                  const std::vector<double>& y_test,
                                                  std::vector<double> coverage_grid = {},
                                                  double eps = 0.05);

/// Friedman ranks plus Nemenyi critical difference over a datasets x methods
/// table of delta-MSE values (lower = better, rank 1 = best).
RankSummary friedman_nemenyi(const std::vector<std::vector<double>>& table,
                             const std::vector<std::string>& methods,
                             double significance = 0.05);

/// AUC of `scores` against binary labels, via the rank statistic.
double auc_score(std::span<const double> scores, std::span<const double> labels);

std::string records_to_csv(const std::vector<EvaluationRecord>& records,
                           const std::string& dataset_name = "");

}  // namespace selreg
