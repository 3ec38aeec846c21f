#pragma once

#include "selreg/metrics.hpp"

namespace selreg {

struct AuditModel {
    ModelPtr classifier;  // logistic by default; explained output is the probability
    std::vector<std::string> feature_names;
    double training_auc = 0.0;
};

struct ShapleyAttribution {
    Matrix phi;               // n_explained x d
    double base_value = 0.0;  // expected model output over the background
    Matrix standard_errors;   // sampling mode only (0 in exact mode)
};

enum class ShapleyMode { exact, permutation };

struct ShiftFeatureResult {
    std::string feature;
    double mean_distance = 0.0;
    double sd = 0.0;
    std::vector<double> per_repeat;
    double mean_phi_change = 0.0;  // mean Shapley shift of this feature (post - pre)
};

struct ShiftReport {
    std::vector<ShiftFeatureResult> features;
    int repeats = 0;
    double noise_mean = 5.0, noise_sd = 1.0;
};

/// Train the audit classifier on accept/reject labels produced by a
/// selective model on the validation split.
AuditModel fit_audit(const Matrix& X_val, const std::vector<double>& accept_labels,
                     const LearnerSpec& spec = LearnerSpec::logistic_spec(),
                     std::vector<std::string> feature_names = {});

/// Interventional Shapley values of the audit probability against an
/// empirical background. Exact mode enumerates all coalitions (d <= 12);
/// permutation mode is Monte Carlo over m seeded permutations.
ShapleyAttribution shapley(const AuditModel& audit, const Matrix& X_explain,
                           const Matrix& background, ShapleyMode mode = ShapleyMode::exact,
                           std::size_t samples = 2000, std::uint64_t seed = 0);

/// Exact W1 between two empirical 1-D distributions (quantile-function
/// integration over the merged probability breakpoints).
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// Table-1 style study: per listed feature, perturb the accepted test rows
/// with N(noise_mean, noise_sd^2) on that feature alone and measure the W1
/// distance between pre- and post-shift Shapley distributions of that
/// feature, repeated `repeats` times with derived seeds.
ShiftReport shift_audit(const AuditModel& audit, const Matrix& X_accepted,
                        const std::vector<std::string>& features_to_shift,
                        double noise_mean = 5.0, double noise_sd = 1.0, int repeats = 5,
                        std::uint64_t seed = 0, const Matrix* background = nullptr,
                        ShapleyMode mode = ShapleyMode::exact, std::size_t samples = 2000);

std::string shift_report_to_csv(const ShiftReport& report);
std::string shapley_to_csv(const ShapleyAttribution& attr,
                           const std::vector<std::string>& feature_names);

}  // namespace selreg
