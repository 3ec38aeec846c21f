#include "selreg/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace selreg {

using nlohmann::json;

std::string to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::linear: return "linear";
        case LearnerKind::tree: return "tree";
        case LearnerKind::forest: return "forest";
        case LearnerKind::gbt: return "gbt";
        case LearnerKind::logistic: return "logistic";
    }
    throw std::logic_error("unknown learner kind");
}

LearnerKind learner_kind_from_string(const std::string& s) {
    if (s == "linear") return LearnerKind::linear;
    if (s == "tree") return LearnerKind::tree;
    if (s == "forest") return LearnerKind::forest;
    if (s == "gbt") return LearnerKind::gbt;
    if (s == "logistic") return LearnerKind::logistic;
    throw std::invalid_argument("unknown learner kind: " + s);
}

LearnerSpec LearnerSpec::linear_spec() {
    LearnerSpec s;
    s.kind = LearnerKind::linear;
    return s;
}
LearnerSpec LearnerSpec::tree_spec(int max_depth, int min_samples_leaf) {
    LearnerSpec s;
    s.kind = LearnerKind::tree;
    s.max_depth = max_depth;
    s.min_samples_leaf = min_samples_leaf;
    return s;
}
LearnerSpec LearnerSpec::forest_spec(int n_trees, double feature_fraction) {
    LearnerSpec s;
    s.kind = LearnerKind::forest;
    s.n_trees = n_trees;
    s.feature_fraction = feature_fraction;
    return s;
}
LearnerSpec LearnerSpec::gbt_spec(int n_rounds, double learning_rate, int max_depth) {
    LearnerSpec s;
    s.kind = LearnerKind::gbt;
    s.n_rounds = n_rounds;
    s.learning_rate = learning_rate;
    s.max_depth = max_depth;
    return s;
}
LearnerSpec LearnerSpec::logistic_spec(double l2) {
    LearnerSpec s;
    s.kind = LearnerKind::logistic;
    s.l2_strength = l2;
    return s;
}

void LearnerSpec::validate() const {
    if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
    if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
    if (n_rounds < 1) throw std::invalid_argument("n_rounds must be >= 1");
    if (feature_fraction <= 0.0 || feature_fraction > 1.0)
        throw std::invalid_argument("feature_fraction must be in (0,1]");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (l2_strength < 0.0) throw std::invalid_argument("l2_strength must be >= 0");
}

std::vector<double> FittedModel::predict(const Matrix& X) const {
    if (X.cols() != n_features())
        throw std::invalid_argument("predict: feature count mismatch");
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
    return out;
}

std::vector<double> predict(const FittedModel& model, const Matrix& X) {
    return model.predict(X);
}

namespace {

void check_training_inputs(const Matrix& X, const std::vector<double>& y) {
    if (X.rows() != y.size()) throw std::invalid_argument("fit: X/y row mismatch");
    if (X.rows() < 2) throw std::invalid_argument("fit: need at least 2 rows");
    for (double v : X.data())
        if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite feature");
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite target");
}

/// Cholesky solve of the SPD system A x = b, A stored row-major d x d.
std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b,
                                   std::size_t d) {
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * d + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * d + k] * a[j * d + k];
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
                a[i * d + i] = std::sqrt(s);
            } else {
                a[i * d + j] = s / a[j * d + j];
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * d + k] * b[k];
        b[i] = s / a[i * d + i];
    }
    for (std::size_t i = d; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < d; ++k) s -= a[k * d + i] * b[k];
        b[i] = s / a[i * d + i];
    }
    return b;
}

// ---------------------------------------------------------------------------
// Linear regression
// ---------------------------------------------------------------------------

class LinearModel final : public FittedModel {
public:
    std::vector<double> weights;  // size d
    double intercept = 0.0;

    LearnerKind kind() const override { return LearnerKind::linear; }
    std::size_t n_features() const override { return weights.size(); }
    double predict_row(RowView x) const override {
        double z = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
        return z;
    }
    std::string to_json() const override {
        json j{{"version", 1}, {"kind", "linear"}, {"weights", weights}, {"intercept", intercept}};
        return j.dump();
    }
};

std::shared_ptr<LinearModel> fit_linear(const Matrix& X, const std::vector<double>& y) {
    std::size_t n = X.rows(), d = X.cols();
    std::size_t m = d + 1;  // augmented with intercept column
    std::vector<double> a(m * m, 0.0), b(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = X.row(i);
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = 0; q <= p; ++q) a[p * m + q] += x[p] * x[q];
            a[d * m + p] += x[p];
            b[p] += x[p] * y[i];
        }
        b[d] += y[i];
    }
    a[d * m + d] = static_cast<double>(n);
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = p + 1; q < m; ++q) a[p * m + q] = a[q * m + p];
    // Tiny ridge keeps rank-deficient designs solvable.
    for (std::size_t p = 0; p < m; ++p) a[p * m + p] += 1e-8;

    auto sol = cholesky_solve(std::move(a), std::move(b), m);
    auto model = std::make_shared<LinearModel>();
    model->weights.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(d));
    model->intercept = sol[d];
    return model;
}

// ---------------------------------------------------------------------------
// CART regression tree
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(RowView x) const {
        int cur = 0;
        while (nodes[cur].feature >= 0)
            cur = x[static_cast<std::size_t>(nodes[cur].feature)] <= nodes[cur].threshold
                      ? nodes[cur].left
                      : nodes[cur].right;
        return nodes[cur].value;
    }
};

struct TreeFitter {
    const Matrix& X;
    const std::vector<double>& y;
    int max_depth;
    int min_samples_leaf;
    double feature_fraction;  // 1.0 = use all features at each split
    Rng* rng;                 // only used when feature_fraction < 1

    Tree tree;

    int build(std::vector<std::size_t>& idx, int depth) {
        double sum = 0.0, sumsq = 0.0;
        for (auto i : idx) {
            sum += y[i];
            sumsq += y[i] * y[i];
        }
        auto n = static_cast<double>(idx.size());
        double node_mean = sum / n;
        double node_sse = sumsq - sum * sum / n;

        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[static_cast<std::size_t>(node_id)].value = node_mean;

        bool depth_ok = max_depth < 0 || depth < max_depth;
        if (!depth_ok || idx.size() < 2 * static_cast<std::size_t>(min_samples_leaf) ||
            node_sse <= 1e-12)
            return node_id;

        std::vector<std::size_t> candidate_features(X.cols());
        std::iota(candidate_features.begin(), candidate_features.end(), std::size_t{0});
        if (feature_fraction < 1.0 && rng) {
            auto k = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(feature_fraction *
                                                         static_cast<double>(X.cols()))));
            rng->shuffle(candidate_features);
            candidate_features.resize(k);
            std::sort(candidate_features.begin(), candidate_features.end());
        }

        // Best split; ties broken toward lowest feature then lowest threshold
        // by scanning in order and requiring strict improvement.
        double best_gain = 1e-12;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        std::vector<std::pair<double, double>> vals;  // (feature value, target)
        for (auto f : candidate_features) {
            vals.clear();
            for (auto i : idx) vals.emplace_back(X(i, f), y[i]);
            std::sort(vals.begin(), vals.end());
            double lsum = 0.0, lsumsq = 0.0;
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                lsum += vals[k].second;
                lsumsq += vals[k].second * vals[k].second;
                if (vals[k].first == vals[k + 1].first) continue;
                auto ln = static_cast<double>(k + 1);
                auto rn = n - ln;
                if (ln < min_samples_leaf || rn < min_samples_leaf) continue;
                double rsum = sum - lsum, rsumsq = sumsq - lsumsq;
                double child_sse = (lsumsq - lsum * lsum / ln) + (rsumsq - rsum * rsum / rn);
                double gain = node_sse - child_sse;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[k].first + vals[k + 1].first);
                }
            }
        }
        if (best_gain <= 1e-12) return node_id;

        std::vector<std::size_t> left_idx, right_idx;
        for (auto i : idx)
            (X(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        if (left_idx.empty() || right_idx.empty()) return node_id;  // midpoint degenerated

        tree.nodes[static_cast<std::size_t>(node_id)].feature = static_cast<int>(best_feature);
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        int left = build(left_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left;
        int right = build(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

Tree fit_tree_impl(const Matrix& X, const std::vector<double>& y, int max_depth,
                   int min_samples_leaf, double feature_fraction = 1.0, Rng* rng = nullptr) {
    TreeFitter fitter{X, y, max_depth, min_samples_leaf, feature_fraction, rng, {}};
    std::vector<std::size_t> idx(X.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    fitter.build(idx, 0);
    return std::move(fitter.tree);
}

json tree_to_json(const Tree& t) {
    json feature = json::array(), threshold = json::array(), left = json::array(),
         right = json::array(), value = json::array();
    for (const auto& nd : t.nodes) {
        feature.push_back(nd.feature);
        threshold.push_back(nd.threshold);
        left.push_back(nd.left);
        right.push_back(nd.right);
        value.push_back(nd.value);
    }
    return json{{"feature", feature}, {"threshold", threshold}, {"left", left},
                {"right", right},     {"value", value}};
}

Tree tree_from_json(const json& j) {
    Tree t;
    std::size_t n = j.at("feature").size();
    t.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.nodes[i].feature = j.at("feature")[i];
        t.nodes[i].threshold = j.at("threshold")[i];
        t.nodes[i].left = j.at("left")[i];
        t.nodes[i].right = j.at("right")[i];
        t.nodes[i].value = j.at("value")[i];
    }
    return t;
}

class TreeModel final : public FittedModel {
public:
    Tree tree;
    std::size_t d = 0;

    LearnerKind kind() const override { return LearnerKind::tree; }
    std::size_t n_features() const override { return d; }
    double predict_row(RowView x) const override { return tree.predict_row(x); }
    std::string to_json() const override {
        json j{{"version", 1}, {"kind", "tree"}, {"n_features", d}, {"tree", tree_to_json(tree)}};
        return j.dump();
    }
};

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

class ForestModel final : public FittedModel {
public:
    std::vector<Tree> trees;
    std::size_t d = 0;

    LearnerKind kind() const override { return LearnerKind::forest; }
    std::size_t n_features() const override { return d; }
    double predict_row(RowView x) const override {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict_row(x);
        return s / static_cast<double>(trees.size());
    }
    std::string to_json() const override {
        json arr = json::array();
        for (const auto& t : trees) arr.push_back(tree_to_json(t));
        json j{{"version", 1}, {"kind", "forest"}, {"n_features", d}, {"trees", arr}};
        return j.dump();
    }
};

std::shared_ptr<ForestModel> fit_forest(const LearnerSpec& spec, const Matrix& X,
                                        const std::vector<double>& y, std::uint64_t seed) {
    auto model = std::make_shared<ForestModel>();
    model->d = X.cols();
    std::size_t n = X.rows();
    for (int t = 0; t < spec.n_trees; ++t) {
        // Independent stream per member so results do not depend on fit order.
        Rng rng(derive_seed(seed, 0xf0f0 + static_cast<std::uint64_t>(t)));
        if (spec.bootstrap) {
            std::vector<std::size_t> idx(n);
            for (auto& i : idx) i = rng.below(n);
            Matrix Xb = X.take_rows(idx);
            auto yb = take(y, idx);
            model->trees.push_back(fit_tree_impl(Xb, yb, spec.max_depth, spec.min_samples_leaf,
                                                 spec.feature_fraction, &rng));
        } else {
            model->trees.push_back(fit_tree_impl(X, y, spec.max_depth, spec.min_samples_leaf,
                                                 spec.feature_fraction, &rng));
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees (stagewise squared-error boosting)
// ---------------------------------------------------------------------------

class GbtModel final : public FittedModel {
public:
    double base = 0.0;
    double learning_rate = 0.3;
    std::vector<Tree> trees;
    std::size_t d = 0;

    LearnerKind kind() const override { return LearnerKind::gbt; }
    std::size_t n_features() const override { return d; }
    double predict_row(RowView x) const override {
        double s = base;
        for (const auto& t : trees) s += learning_rate * t.predict_row(x);
        return s;
    }
    std::string to_json() const override {
        json arr = json::array();
        for (const auto& t : trees) arr.push_back(tree_to_json(t));
        json j{{"version", 1},         {"kind", "gbt"},
               {"n_features", d},      {"base", base},
               {"learning_rate", learning_rate}, {"trees", arr}};
        return j.dump();
    }
};

std::shared_ptr<GbtModel> fit_gbt(const LearnerSpec& spec, const Matrix& X,
                                  const std::vector<double>& y) {
    auto model = std::make_shared<GbtModel>();
    model->d = X.cols();
    model->learning_rate = spec.learning_rate;
    model->base = mean(y);
    int depth = spec.max_depth < 0 ? 6 : spec.max_depth;

    std::vector<double> residual(y.size());
    std::vector<double> current(y.size(), model->base);
    for (int round = 0; round < spec.n_rounds; ++round) {
        for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - current[i];
        Tree t = fit_tree_impl(X, residual, depth, spec.min_samples_leaf);
        for (std::size_t i = 0; i < y.size(); ++i)
            current[i] += spec.learning_rate * t.predict_row(X.row(i));
        model->trees.push_back(std::move(t));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Logistic regression (Newton / IRLS)
// ---------------------------------------------------------------------------

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

class LogisticModel final : public FittedModel {
public:
    std::vector<double> weights;  // size d
    double intercept = 0.0;

    LearnerKind kind() const override { return LearnerKind::logistic; }
    std::size_t n_features() const override { return weights.size(); }
    double predict_row(RowView x) const override {
        double z = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
        return sigmoid(z);
    }
    std::string to_json() const override {
        json j{{"version", 1}, {"kind", "logistic"}, {"weights", weights},
               {"intercept", intercept}};
        return j.dump();
    }
};

}  // namespace

double logistic_loss(const Matrix& X, const std::vector<double>& y,
                     const std::vector<double>& w, double l2_strength) {
    std::size_t n = X.rows(), d = X.cols();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto x = X.row(i);
        double z = w[d];
        for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
        // log(1 + exp(z)) - y*z, numerically stable
        loss += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y[i] * z;
    }
    double reg = 0.0;
    for (std::size_t j = 0; j < d; ++j) reg += w[j] * w[j];
    return loss / static_cast<double>(n) + 0.5 * l2_strength * reg / static_cast<double>(n);
}

std::vector<double> logistic_gradient(const Matrix& X, const std::vector<double>& y,
                                      const std::vector<double>& w, double l2_strength) {
    std::size_t n = X.rows(), d = X.cols();
    std::vector<double> grad(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = X.row(i);
        double z = w[d];
        for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
        double e = sigmoid(z) - y[i];
        for (std::size_t j = 0; j < d; ++j) grad[j] += e * x[j];
        grad[d] += e;
    }
    for (std::size_t j = 0; j < d; ++j) grad[j] = (grad[j] + l2_strength * w[j]) / static_cast<double>(n);
    grad[d] /= static_cast<double>(n);
    return grad;
}

namespace {

std::shared_ptr<LogisticModel> fit_logistic(const LearnerSpec& spec, const Matrix& X,
                                            const std::vector<double>& y) {
    std::size_t n = X.rows(), d = X.cols();
    bool has0 = false, has1 = false;
    for (double v : y) {
        if (v == 0.0) has0 = true;
        else if (v == 1.0) has1 = true;
        else throw std::invalid_argument("logistic fit: labels must be 0/1");
    }
    if (!has0 || !has1) throw std::invalid_argument("logistic fit: single-class labels");

    std::size_t m = d + 1;
    std::vector<double> w(m, 0.0);
    double loss = logistic_loss(X, y, w, spec.l2_strength);
    for (int it = 0; it < spec.max_iterations; ++it) {
        auto grad = logistic_gradient(X, y, w, spec.l2_strength);
        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax < spec.tolerance) break;

        // Newton step: H = (X~^T S X~ + l2*diag(1..1,0)) / n
        std::vector<double> h(m * m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto x = X.row(i);
            double z = w[d];
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
            double p = sigmoid(z);
            double s = std::max(p * (1.0 - p), 1e-10);
            for (std::size_t p1 = 0; p1 < d; ++p1) {
                for (std::size_t q = 0; q <= p1; ++q) h[p1 * m + q] += s * x[p1] * x[q];
                h[d * m + p1] += s * x[p1];
            }
            h[d * m + d] += s;
        }
        for (std::size_t j = 0; j < d; ++j) h[j * m + j] += spec.l2_strength;
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) h[p * m + q] = h[q * m + p];
            h[p * m + p] += 1e-10 * static_cast<double>(n);
        }
        for (auto& v : h) v /= static_cast<double>(n);

        auto step = cholesky_solve(std::move(h), grad, m);
        double scale = 1.0;
        for (int half = 0; half < 30; ++half) {
            std::vector<double> cand = w;
            for (std::size_t j = 0; j < m; ++j) cand[j] -= scale * step[j];
            double cand_loss = logistic_loss(X, y, cand, spec.l2_strength);
            if (cand_loss <= loss + 1e-15) {
                w = std::move(cand);
                loss = cand_loss;
                break;
            }
            scale *= 0.5;
        }
    }

    auto model = std::make_shared<LogisticModel>();
    model->weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
    model->intercept = w[d];
    return model;
}

}  // namespace

ModelPtr fit(const LearnerSpec& spec, const Matrix& X, const std::vector<double>& y,
             std::uint64_t seed) {
    spec.validate();
    check_training_inputs(X, y);
    switch (spec.kind) {
        case LearnerKind::linear:
            return fit_linear(X, y);
        case LearnerKind::tree: {
            auto model = std::make_shared<TreeModel>();
            model->d = X.cols();
            model->tree = fit_tree_impl(X, y, spec.max_depth, spec.min_samples_leaf);
            return model;
        }
        case LearnerKind::forest:
            return fit_forest(spec, X, y, seed);
        case LearnerKind::gbt:
            return fit_gbt(spec, X, y);
        case LearnerKind::logistic:
            return fit_logistic(spec, X, y);
    }
    throw std::logic_error("unknown learner kind");
}

std::vector<double> predict_proba(const FittedModel& model, const Matrix& X) {
    if (model.kind() != LearnerKind::logistic)
        throw std::invalid_argument("predict_proba: model is not a classifier");
    return model.predict(X);
}

ModelPtr model_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    std::string kind = j.at("kind");
    if (kind == "linear") {
        auto m = std::make_shared<LinearModel>();
        m->weights = j.at("weights").get<std::vector<double>>();
        m->intercept = j.at("intercept");
        return m;
    }
    if (kind == "logistic") {
        auto m = std::make_shared<LogisticModel>();
        m->weights = j.at("weights").get<std::vector<double>>();
        m->intercept = j.at("intercept");
        return m;
    }
    if (kind == "tree") {
        auto m = std::make_shared<TreeModel>();
        m->d = j.at("n_features");
        m->tree = tree_from_json(j.at("tree"));
        return m;
    }
    if (kind == "forest") {
        auto m = std::make_shared<ForestModel>();
        m->d = j.at("n_features");
        for (const auto& tj : j.at("trees")) m->trees.push_back(tree_from_json(tj));
        return m;
    }
    if (kind == "gbt") {
        auto m = std::make_shared<GbtModel>();
        m->d = j.at("n_features");
        m->base = j.at("base");
        m->learning_rate = j.at("learning_rate");
        for (const auto& tj : j.at("trees")) m->trees.push_back(tree_from_json(tj));
        return m;
    }
    throw std::invalid_argument("model_from_json: unknown kind: " + kind);
}

}  // namespace selreg
