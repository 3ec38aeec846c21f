#pragma once

#include <functional>
#include <optional>

#include "selreg/uncertainty.hpp"

namespace selreg {

enum class SelectiveMethod { doubt_var, doubt_int, plugin, scross, cvplus, goldcase };

std::string to_string(SelectiveMethod m);
SelectiveMethod selective_method_from_string(const std::string& s);

/// Uncertainty score for an input row. Higher score = less confident; the
/// paper's confidence function is the negated score. Scores are pure
/// deterministic functions of the row (goldcase also of the true label).
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score(RowView x) const = 0;
    virtual bool uses_labels() const { return false; }
    virtual double score_labeled(RowView x, double /*y*/) const { return score(x); }
};

struct SelectivePrediction {
    bool accepted = false;
    std::optional<double> value;  // present exactly when accepted
    double score = 0.0;
};

struct SelectiveModel {
    SelectiveMethod method = SelectiveMethod::doubt_var;
    std::function<double(RowView)> predictor;
    std::shared_ptr<const Scorer> scorer;
    double tau = 0.0;
    double target_coverage = 1.0;
    std::vector<double> calibration_scores;  // kept so tau can be re-derived per alpha

    /// Same scorer and predictor, threshold re-derived for a new target coverage.
    SelectiveModel with_target_coverage(double alpha) const;
};

/// Threshold calibration: tau is the empirical alpha-quantile (linear
/// interpolation) of the scores; acceptance uses score <= tau, ties accepted.
double calibrate(const std::vector<double>& calibration_scores, double alpha);

SelectiveModel build_doubt_var(const LearnerSpec& spec, const Matrix& X_train,
                               const std::vector<double>& y_train, const Matrix& X_cal,
                               double alpha, std::uint64_t seed,
                               std::optional<std::size_t> B = std::nullopt);

SelectiveModel build_doubt_int(const LearnerSpec& spec, const Matrix& X_train,
                               const std::vector<double>& y_train, const Matrix& X_cal,
                               double alpha, std::uint64_t seed,
                               std::optional<std::size_t> B = std::nullopt);

/// PlugIn baseline: residual model g fitted on in-sample squared residuals.
SelectiveModel build_plugin(const LearnerSpec& spec, const Matrix& X_train,
                            const std::vector<double>& y_train, const Matrix& X_cal,
                            double alpha, std::uint64_t seed);

/// SCross baseline: g fitted on out-of-fold squared residuals; predictor
/// refit on the full training set.
SelectiveModel build_scross(const LearnerSpec& spec, const Matrix& X_train,
                            const std::vector<double>& y_train, const Matrix& X_cal,
                            double alpha, int K, std::uint64_t seed);

/// CV+ conformal baseline: score is the width of the CV+ interval at `level`;
/// point prediction is the mean over fold models.
SelectiveModel build_cvplus(const LearnerSpec& spec, const Matrix& X_train,
                            const std::vector<double>& y_train, const Matrix& X_cal,
                            double alpha, int K, double level, std::uint64_t seed);

/// Label-using oracle: rejects the largest true squared residuals on the
/// evaluation set itself.
SelectiveModel build_goldcase(ModelPtr predictor, const Matrix& X_test,
                              const std::vector<double>& y_test, double alpha);

std::vector<SelectivePrediction> predict_selective(const SelectiveModel& model, const Matrix& X,
                                                   const std::vector<double>* y_true = nullptr);

std::string selective_model_summary_json(const SelectiveModel& model);

/// Full JSON envelope {method, alpha, tau, embedded models}; round-trips
/// through selective_model_from_json.
std::string selective_model_to_json(const SelectiveModel& model);
SelectiveModel selective_model_from_json(const std::string& json_text);

/// CSV export, columns: row_id,score,accepted,value (value empty on abstain).
std::string predictions_to_csv(const std::vector<SelectivePrediction>& preds);

}  // namespace selreg
