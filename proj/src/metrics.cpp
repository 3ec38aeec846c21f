#include "selreg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace selreg {

double coverage(const std::vector<SelectivePrediction>& preds) {
    if (preds.empty()) throw std::invalid_argument("coverage: empty prediction list");
    std::size_t accepted = 0;
    for (const auto& p : preds) accepted += p.accepted ? 1 : 0;
    return static_cast<double>(accepted) / static_cast<double>(preds.size());
}

bool cov_sat(double target, double actual, double eps) {
    if (target < 0.0 || target > 1.0 || actual < 0.0 || actual > 1.0)
        throw std::invalid_argument("cov_sat: coverages must lie in [0,1]");
    return target - actual < eps;
}

double mse(std::span<const double> predictions, std::span<const double> y_true) {
    if (predictions.size() != y_true.size() || predictions.empty())
        throw std::invalid_argument("mse: size mismatch or empty");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double r = predictions[i] - y_true[i];
        acc += r * r;
    }
    return acc / static_cast<double>(predictions.size());
}

EvaluationRecord delta_mse(const std::vector<SelectivePrediction>& preds,
                           const std::vector<double>& full_predictions,
                           const std::vector<double>& y_true, double alpha, double eps) {
    if (preds.size() != y_true.size() || preds.size() != full_predictions.size())
        throw std::invalid_argument("delta_mse: size mismatch");
    EvaluationRecord rec;
    rec.target_coverage = alpha;
    rec.mse_full = mse(full_predictions, y_true);
    if (rec.mse_full == 0.0) throw std::runtime_error("delta_mse: degenerate perfect predictor");
    rec.actual_coverage = coverage(preds);
    rec.cov_ok = cov_sat(alpha, rec.actual_coverage, eps);

    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i].accepted) continue;
        double r = *preds[i].value - y_true[i];
        acc += r * r;
        ++count;
    }
    rec.mse_accepted = count > 0 ? acc / static_cast<double>(count) : 0.0;
    rec.delta_mse = (rec.cov_ok && count > 0) ? rec.mse_accepted / rec.mse_full - 1.0 : 0.0;
    return rec;
}

const std::vector<double> kDefaultCoverageGrid = {0.99, 0.95, 0.90, 0.85, 0.80, 0.75,
                                                  0.70, 0.65, 0.60, 0.55, 0.50, 1.00};

std::vector<EvaluationRecord> risk_coverage_curve(const SelectiveModel& model,
                                                  const Matrix& X_test,
                                                  const std::vector<double>& y_test,
                                                  std::vector<double> coverage_grid,
                                                  double eps) {
    if (coverage_grid.empty()) coverage_grid = kDefaultCoverageGrid;
    std::vector<EvaluationRecord> out;
    // Scores and point predictions are deterministic per row, so they are
    // computed once and only the threshold moves across the grid.
    std::size_t n = X_test.rows();
    if (model.scorer->uses_labels() && y_test.size() != n)
        throw std::invalid_argument("risk_coverage_curve: this scorer requires true labels");
    std::vector<double> full_preds(n), scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = X_test.row(i);
        full_preds[i] = model.predictor(x);
        scores[i] = model.scorer->uses_labels() ? model.scorer->score_labeled(x, y_test[i])
                                                : model.scorer->score(x);
    }
    for (double alpha : coverage_grid) {
        double tau = calibrate(model.calibration_scores, alpha);
        std::vector<SelectivePrediction> preds(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i].score = scores[i];
            preds[i].accepted = scores[i] <= tau;
            if (preds[i].accepted) preds[i].value = full_preds[i];
        }
        auto rec = delta_mse(preds, full_preds, y_test, alpha, eps);
        rec.method = to_string(model.method);
        out.push_back(rec);
    }
    return out;
}

namespace {

// Studentized-range constants q_{0.05,k} / sqrt(2) for the Nemenyi test,
// k = 2..10 (Demsar 2006, Table 5).
const double kNemenyiQ05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};

}  // namespace

RankSummary friedman_nemenyi(const std::vector<std::vector<double>>& table,
                             const std::vector<std::string>& methods,
                             double significance) {
    std::size_t n = table.size();
    std::size_t k = methods.size();
    if (n < 2 || k < 2) throw std::invalid_argument("friedman_nemenyi: need N >= 2 and k >= 2");
    if (significance != 0.05)
        throw std::invalid_argument("friedman_nemenyi: only the 0.05 level is tabulated");
    if (k > 10) throw std::invalid_argument("friedman_nemenyi: q constants tabulated for k <= 10");
    for (const auto& row : table)
        if (row.size() != k) throw std::invalid_argument("friedman_nemenyi: ragged/missing cells");

    RankSummary out;
    out.methods = methods;
    out.n_datasets = n;
    out.mean_ranks.assign(k, 0.0);
    for (const auto& row : table) {
        auto ranks = average_ranks(row);
        for (std::size_t j = 0; j < k; ++j) out.mean_ranks[j] += ranks[j];
    }
    for (auto& r : out.mean_ranks) r /= static_cast<double>(n);

    double nk = static_cast<double>(n), kk = static_cast<double>(k);
    double sum_r2 = 0.0;
    for (double r : out.mean_ranks) sum_r2 += r * r;
    out.friedman_statistic =
        12.0 * nk / (kk * (kk + 1.0)) * (sum_r2 - kk * (kk + 1.0) * (kk + 1.0) / 4.0);

    out.critical_difference = kNemenyiQ05[k - 2] * std::sqrt(kk * (kk + 1.0) / (6.0 * nk));
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            if (std::abs(out.mean_ranks[a] - out.mean_ranks[b]) < out.critical_difference)
                out.not_separated.emplace_back(a, b);
    return out;
}

double auc_score(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("auc_score: size mismatch or empty");
    auto ranks = average_ranks(scores);
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1.0) {
            pos_rank_sum += ranks[i];
            ++n_pos;
        } else if (labels[i] != 0.0) {
            throw std::invalid_argument("auc_score: labels must be 0/1");
        }
    }
    std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc_score: single-class labels");
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::string records_to_csv(const std::vector<EvaluationRecord>& records,
                           const std::string& dataset_name) {
    std::string out = "dataset,method,seed,target_coverage,actual_coverage,mse_full,"
                      "mse_accepted,delta_mse,cov_ok\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n",
                      dataset_name.c_str(), r.method.c_str(),
                      static_cast<unsigned long long>(r.seed), r.target_coverage,
                      r.actual_coverage, r.mse_full, r.mse_accepted, r.delta_mse,
                      r.cov_ok ? 1 : 0);
        out += buf;
    }
    return out;
}

}  // namespace selreg
