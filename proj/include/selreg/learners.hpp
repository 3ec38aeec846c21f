#pragma once

#include <memory>
#include <string>
#include <vector>

#include "selreg/common.hpp"

namespace selreg {

enum class LearnerKind { linear, tree, forest, gbt, logistic };

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& s);

struct LearnerSpec {
    LearnerKind kind = LearnerKind::linear;

    // tree
    int max_depth = -1;  // -1 = unlimited; gbt default overrides to 6
    int min_samples_leaf = 1;

    // forest
    int n_trees = 100;
    double feature_fraction = 1.0 / 3.0;
    bool bootstrap = true;

    // gbt
    int n_rounds = 100;
    double learning_rate = 0.3;

    // logistic
    double l2_strength = 1.0;
    int max_iterations = 1000;
    double tolerance = 1e-6;

    static LearnerSpec linear_spec();
    static LearnerSpec tree_spec(int max_depth = -1, int min_samples_leaf = 1);
    static LearnerSpec forest_spec(int n_trees = 100, double feature_fraction = 1.0 / 3.0);
    static LearnerSpec gbt_spec(int n_rounds = 100, double learning_rate = 0.3, int max_depth = 6);
    static LearnerSpec logistic_spec(double l2 = 1.0);

    void validate() const;
};

/// A trained regressor or classifier. Prediction is a pure function of the
/// stored parameters; fitted models are immutable and shareable.
class FittedModel {
public:
    virtual ~FittedModel() = default;
    virtual LearnerKind kind() const = 0;
    virtual std::size_t n_features() const = 0;
    virtual double predict_row(RowView x) const = 0;
    virtual std::string to_json() const = 0;

    std::vector<double> predict(const Matrix& X) const;
};

using ModelPtr = std::shared_ptr<const FittedModel>;

ModelPtr fit(const LearnerSpec& spec, const Matrix& X, const std::vector<double>& y,
             std::uint64_t seed);

std::vector<double> predict(const FittedModel& model, const Matrix& X);

/// Sigmoid of the linear score; logistic models only.
std::vector<double> predict_proba(const FittedModel& model, const Matrix& X);

ModelPtr model_from_json(const std::string& json_text);

/// Gradient of the l2-regularized mean log-loss at `weights` (last entry is
/// the unregularized intercept). Shared by the IRLS fitter and its tests.
std::vector<double> logistic_gradient(const Matrix& X, const std::vector<double>& y,
                                      const std::vector<double>& weights, double l2_strength);
double logistic_loss(const Matrix& X, const std::vector<double>& y,
                     const std::vector<double>& weights, double l2_strength);

}  // namespace selreg
