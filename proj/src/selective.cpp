#include "selreg/selective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

namespace selreg {

std::string to_string(SelectiveMethod m) {
    switch (m) {
        case SelectiveMethod::doubt_var: return "doubt_var";
        case SelectiveMethod::doubt_int: return "doubt_int";
        case SelectiveMethod::plugin: return "plugin";
        case SelectiveMethod::scross: return "scross";
        case SelectiveMethod::cvplus: return "cvplus";
        case SelectiveMethod::goldcase: return "goldcase";
    }
    throw std::logic_error("unknown selective method");
}

SelectiveMethod selective_method_from_string(const std::string& s) {
    if (s == "doubt_var") return SelectiveMethod::doubt_var;
    if (s == "doubt_int") return SelectiveMethod::doubt_int;
    if (s == "plugin") return SelectiveMethod::plugin;
    if (s == "scross") return SelectiveMethod::scross;
    if (s == "cvplus") return SelectiveMethod::cvplus;
    if (s == "goldcase") return SelectiveMethod::goldcase;
    throw std::invalid_argument("unknown selective method: " + s);
}

double calibrate(const std::vector<double>& calibration_scores, double alpha) {
    if (calibration_scores.empty()) throw std::invalid_argument("calibrate: empty calibration set");
    if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("calibrate: alpha outside (0,1]");
    return quantile(calibration_scores, alpha);
}

SelectiveModel SelectiveModel::with_target_coverage(double alpha) const {
    SelectiveModel out = *this;
    out.target_coverage = alpha;
    out.tau = calibrate(calibration_scores, alpha);
    return out;
}

namespace {

using nlohmann::json;

struct EnsembleScorer final : Scorer {
    std::shared_ptr<const BootstrapEnsemble> ensemble;
    bool use_variance = true;  // false = interval width

    double score(RowView x) const override {
        if (use_variance) return variance(*ensemble, x);
        auto [lo, hi] = interval(*ensemble, x);
        return hi - lo;
    }
};

struct ResidualModelScorer final : Scorer {
    ModelPtr point_model;     // f-hat
    ModelPtr residual_model;  // g-hat, predicts squared residuals

    double score(RowView x) const override { return residual_model->predict_row(x); }
};

struct CvPlusScorer final : Scorer {
    std::vector<ModelPtr> fold_models;
    std::vector<std::size_t> fold_of_row;   // training row -> fold index
    std::vector<double> abs_residuals;      // per training row, from its own OOF model
    std::size_t lower_index = 0, upper_index = 0;  // 1-based order statistics

    std::pair<double, double> interval_at(RowView x) const {
        std::vector<double> fold_pred(fold_models.size());
        for (std::size_t k = 0; k < fold_models.size(); ++k)
            fold_pred[k] = fold_models[k]->predict_row(x);
        std::size_t n = abs_residuals.size();
        std::vector<double> lo_vals(n), hi_vals(n);
        for (std::size_t i = 0; i < n; ++i) {
            double p = fold_pred[fold_of_row[i]];
            lo_vals[i] = p - abs_residuals[i];
            hi_vals[i] = p + abs_residuals[i];
        }
        std::nth_element(lo_vals.begin(), lo_vals.begin() + static_cast<std::ptrdiff_t>(lower_index - 1),
                         lo_vals.end());
        std::nth_element(hi_vals.begin(), hi_vals.begin() + static_cast<std::ptrdiff_t>(upper_index - 1),
                         hi_vals.end());
        return {lo_vals[lower_index - 1], hi_vals[upper_index - 1]};
    }

    double score(RowView x) const override {
        auto [lo, hi] = interval_at(x);
        return hi - lo;
    }
};

struct GoldCaseScorer final : Scorer {
    ModelPtr predictor;

    double score(RowView) const override {
        throw std::logic_error("goldcase scorer requires true labels");
    }
    bool uses_labels() const override { return true; }
    double score_labeled(RowView x, double y) const override {
        double r = y - predictor->predict_row(x);
        return r * r;
    }
};

std::vector<double> score_matrix(const Scorer& scorer, const Matrix& X) {
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = scorer.score(X.row(i));
    return out;
}

SelectiveModel finish_model(SelectiveMethod method, std::function<double(RowView)> predictor,
                            std::shared_ptr<const Scorer> scorer, const Matrix& X_cal,
                            double alpha) {
    SelectiveModel model;
    model.method = method;
    model.predictor = std::move(predictor);
    model.scorer = std::move(scorer);
    model.calibration_scores = score_matrix(*model.scorer, X_cal);
    model.target_coverage = alpha;
    model.tau = calibrate(model.calibration_scores, alpha);
    return model;
}

SelectiveModel build_doubt(const LearnerSpec& spec, const Matrix& X_train,
                           const std::vector<double>& y_train, const Matrix& X_cal,
                           double alpha, std::uint64_t seed, std::optional<std::size_t> B,
                           bool use_variance) {
    auto ensemble = std::make_shared<BootstrapEnsemble>(
        fit_ensemble(spec, X_train, y_train, B, derive_seed(seed, 0xd0b7)));
    auto scorer = std::make_shared<EnsembleScorer>();
    scorer->ensemble = ensemble;
    scorer->use_variance = use_variance;
    auto predictor = [ensemble](RowView x) { return ensemble->center(x); };
    return finish_model(use_variance ? SelectiveMethod::doubt_var : SelectiveMethod::doubt_int,
                        predictor, scorer, X_cal, alpha);
}

/// Deterministic K-fold assignment: seeded shuffle, then contiguous blocks
/// with the remainder spread over the first folds.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0xf01d));
    rng.shuffle(order);
    std::vector<std::size_t> fold_of(n);
    std::size_t base = n / k, extra = n % k, pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t sz = base + (f < extra ? 1 : 0);
        for (std::size_t i = 0; i < sz; ++i) fold_of[order[pos++]] = f;
    }
    return fold_of;
}

}  // namespace

SelectiveModel build_doubt_var(const LearnerSpec& spec, const Matrix& X_train,
                               const std::vector<double>& y_train, const Matrix& X_cal,
                               double alpha, std::uint64_t seed, std::optional<std::size_t> B) {
    return build_doubt(spec, X_train, y_train, X_cal, alpha, seed, B, true);
}

SelectiveModel build_doubt_int(const LearnerSpec& spec, const Matrix& X_train,
                               const std::vector<double>& y_train, const Matrix& X_cal,
                               double alpha, std::uint64_t seed, std::optional<std::size_t> B) {
    return build_doubt(spec, X_train, y_train, X_cal, alpha, seed, B, false);
}

SelectiveModel build_plugin(const LearnerSpec& spec, const Matrix& X_train,
                            const std::vector<double>& y_train, const Matrix& X_cal,
                            double alpha, std::uint64_t seed) {
    auto f = fit(spec, X_train, y_train, derive_seed(seed, 0x1));
    auto preds = f->predict(X_train);
    std::vector<double> sq_residuals(y_train.size());
    for (std::size_t i = 0; i < y_train.size(); ++i) {
        double r = y_train[i] - preds[i];
        sq_residuals[i] = r * r;
    }
    auto scorer = std::make_shared<ResidualModelScorer>();
    scorer->point_model = f;
    scorer->residual_model = fit(spec, X_train, sq_residuals, derive_seed(seed, 0x2));
    auto predictor = [f](RowView x) { return f->predict_row(x); };
    return finish_model(SelectiveMethod::plugin, predictor, scorer, X_cal, alpha);
}

SelectiveModel build_scross(const LearnerSpec& spec, const Matrix& X_train,
                            const std::vector<double>& y_train, const Matrix& X_cal,
                            double alpha, int K, std::uint64_t seed) {
    std::size_t n = X_train.rows();
    if (K < 2) throw std::invalid_argument("build_scross: K must be >= 2");
    if (n < static_cast<std::size_t>(K)) throw std::invalid_argument("build_scross: n_train < K");

    auto k = static_cast<std::size_t>(K);
    auto fold_of = fold_assignment(n, k, seed);
    std::vector<double> oof_sq_residuals(n);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train_idx, hold_idx;
        for (std::size_t i = 0; i < n; ++i)
            (fold_of[i] == f ? hold_idx : train_idx).push_back(i);
        Matrix Xf = X_train.take_rows(train_idx);
        auto yf = take(y_train, train_idx);
        auto model = fit(spec, Xf, yf, derive_seed(seed, 0x5c20 + f));
        for (auto i : hold_idx) {
            double r = y_train[i] - model->predict_row(X_train.row(i));
            oof_sq_residuals[i] = r * r;
        }
    }
    auto scorer = std::make_shared<ResidualModelScorer>();
    scorer->residual_model = fit(spec, X_train, oof_sq_residuals, derive_seed(seed, 0x5c2f));
    auto f_full = fit(spec, X_train, y_train, derive_seed(seed, 0x5c00));
    scorer->point_model = f_full;
    auto predictor = [f_full](RowView x) { return f_full->predict_row(x); };
    return finish_model(SelectiveMethod::scross, predictor, scorer, X_cal, alpha);
}

SelectiveModel build_cvplus(const LearnerSpec& spec, const Matrix& X_train,
                            const std::vector<double>& y_train, const Matrix& X_cal,
                            double alpha, int K, double level, std::uint64_t seed) {
    std::size_t n = X_train.rows();
    if (K < 2) throw std::invalid_argument("build_cvplus: K must be >= 2");
    if (n < static_cast<std::size_t>(K)) throw std::invalid_argument("build_cvplus: n_train < K");
    if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("build_cvplus: level in (0,1)");

    auto np1 = static_cast<double>(n + 1);
    auto lower_index = static_cast<std::size_t>(std::floor((1.0 - level) * np1));
    auto upper_index = static_cast<std::size_t>(std::ceil(level * np1));
    if (lower_index < 1 || upper_index > n)
        throw std::invalid_argument("build_cvplus: n_train too small for the order statistics");

    auto k = static_cast<std::size_t>(K);
    auto scorer = std::make_shared<CvPlusScorer>();
    scorer->fold_of_row = fold_assignment(n, k, seed);
    scorer->abs_residuals.resize(n);
    scorer->lower_index = lower_index;
    scorer->upper_index = upper_index;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train_idx, hold_idx;
        for (std::size_t i = 0; i < n; ++i)
            (scorer->fold_of_row[i] == f ? hold_idx : train_idx).push_back(i);
        Matrix Xf = X_train.take_rows(train_idx);
        auto yf = take(y_train, train_idx);
        auto model = fit(spec, Xf, yf, derive_seed(seed, 0xc7 + f));
        for (auto i : hold_idx)
            scorer->abs_residuals[i] = std::abs(y_train[i] - model->predict_row(X_train.row(i)));
        scorer->fold_models.push_back(std::move(model));
    }
    auto fold_models = scorer->fold_models;
    auto predictor = [fold_models](RowView x) {
        double s = 0.0;
        for (const auto& m : fold_models) s += m->predict_row(x);
        return s / static_cast<double>(fold_models.size());
    };
    return finish_model(SelectiveMethod::cvplus, predictor, scorer, X_cal, alpha);
}

SelectiveModel build_goldcase(ModelPtr predictor, const Matrix& X_test,
                              const std::vector<double>& y_test, double alpha) {
    if (X_test.rows() != y_test.size())
        throw std::invalid_argument("build_goldcase: X/y row mismatch");
    auto scorer = std::make_shared<GoldCaseScorer>();
    scorer->predictor = predictor;

    SelectiveModel model;
    model.method = SelectiveMethod::goldcase;
    model.predictor = [predictor](RowView x) { return predictor->predict_row(x); };
    model.scorer = scorer;
    model.calibration_scores.resize(y_test.size());
    for (std::size_t i = 0; i < y_test.size(); ++i)
        model.calibration_scores[i] = scorer->score_labeled(X_test.row(i), y_test[i]);
    model.target_coverage = alpha;
    model.tau = calibrate(model.calibration_scores, alpha);
    return model;
}

std::vector<SelectivePrediction> predict_selective(const SelectiveModel& model, const Matrix& X,
                                                   const std::vector<double>* y_true) {
    if (!model.scorer || !model.predictor)
        throw std::logic_error("predict_selective: model not built");
    if (model.scorer->uses_labels()) {
        if (!y_true || y_true->size() != X.rows())
            throw std::invalid_argument("predict_selective: this scorer requires true labels");
    }
    std::vector<SelectivePrediction> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        auto x = X.row(i);
        double s = model.scorer->uses_labels() ? model.scorer->score_labeled(x, (*y_true)[i])
                                               : model.scorer->score(x);
        out[i].score = s;
        out[i].accepted = s <= model.tau;
        if (out[i].accepted) out[i].value = model.predictor(x);
    }
    return out;
}

std::string selective_model_summary_json(const SelectiveModel& model) {
    nlohmann::json j;
    j["method"] = to_string(model.method);
    j["alpha"] = model.target_coverage;
    j["tau"] = model.tau;
    j["n_calibration_scores"] = model.calibration_scores.size();
    return j.dump();
}

std::string selective_model_to_json(const SelectiveModel& model) {
    json j;
    j["version"] = 1;
    j["method"] = to_string(model.method);
    j["alpha"] = model.target_coverage;
    j["tau"] = model.tau;
    j["calibration_scores"] = model.calibration_scores;

    json state;
    if (auto* es = dynamic_cast<const EnsembleScorer*>(model.scorer.get())) {
        state["ensemble"] = json::parse(ensemble_to_json(*es->ensemble));
    } else if (auto* rs = dynamic_cast<const ResidualModelScorer*>(model.scorer.get())) {
        state["point_model"] = json::parse(rs->point_model->to_json());
        state["residual_model"] = json::parse(rs->residual_model->to_json());
    } else if (auto* cs = dynamic_cast<const CvPlusScorer*>(model.scorer.get())) {
        json folds = json::array();
        for (const auto& m : cs->fold_models) folds.push_back(json::parse(m->to_json()));
        state["fold_models"] = folds;
        state["fold_of_row"] = cs->fold_of_row;
        state["abs_residuals"] = cs->abs_residuals;
        state["lower_index"] = cs->lower_index;
        state["upper_index"] = cs->upper_index;
    } else if (auto* gs = dynamic_cast<const GoldCaseScorer*>(model.scorer.get())) {
        state["predictor"] = json::parse(gs->predictor->to_json());
    } else {
        throw std::logic_error("selective_model_to_json: unknown scorer type");
    }
    j["state"] = std::move(state);
    return j.dump();
}

SelectiveModel selective_model_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    SelectiveModel model;
    model.method = selective_method_from_string(j.at("method"));
    model.target_coverage = j.at("alpha");
    model.tau = j.at("tau");
    model.calibration_scores = j.at("calibration_scores").get<std::vector<double>>();
    const json& state = j.at("state");

    switch (model.method) {
        case SelectiveMethod::doubt_var:
        case SelectiveMethod::doubt_int: {
            auto ensemble = std::make_shared<BootstrapEnsemble>(
                ensemble_from_json(state.at("ensemble").dump()));
            auto scorer = std::make_shared<EnsembleScorer>();
            scorer->ensemble = ensemble;
            scorer->use_variance = model.method == SelectiveMethod::doubt_var;
            model.scorer = scorer;
            model.predictor = [ensemble](RowView x) { return ensemble->center(x); };
            break;
        }
        case SelectiveMethod::plugin:
        case SelectiveMethod::scross: {
            auto scorer = std::make_shared<ResidualModelScorer>();
            scorer->point_model = model_from_json(state.at("point_model").dump());
            scorer->residual_model = model_from_json(state.at("residual_model").dump());
            auto f = scorer->point_model;
            model.scorer = scorer;
            model.predictor = [f](RowView x) { return f->predict_row(x); };
            break;
        }
        case SelectiveMethod::cvplus: {
            auto scorer = std::make_shared<CvPlusScorer>();
            for (const auto& mj : state.at("fold_models"))
                scorer->fold_models.push_back(model_from_json(mj.dump()));
            scorer->fold_of_row = state.at("fold_of_row").get<std::vector<std::size_t>>();
            scorer->abs_residuals = state.at("abs_residuals").get<std::vector<double>>();
            scorer->lower_index = state.at("lower_index");
            scorer->upper_index = state.at("upper_index");
            auto fold_models = scorer->fold_models;
            model.scorer = scorer;
            model.predictor = [fold_models](RowView x) {
                double s = 0.0;
                for (const auto& m : fold_models) s += m->predict_row(x);
                return s / static_cast<double>(fold_models.size());
            };
            break;
        }
        case SelectiveMethod::goldcase: {
            auto scorer = std::make_shared<GoldCaseScorer>();
            scorer->predictor = model_from_json(state.at("predictor").dump());
            auto f = scorer->predictor;
            model.scorer = scorer;
            model.predictor = [f](RowView x) { return f->predict_row(x); };
            break;
        }
    }
    return model;
}

std::string predictions_to_csv(const std::vector<SelectivePrediction>& preds) {
    std::string out = "row_id,score,accepted,value\n";
    char buf[96];
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].accepted)
            std::snprintf(buf, sizeof buf, "%zu,%.12g,1,%.12g\n", i, preds[i].score,
                          *preds[i].value);
        else
            std::snprintf(buf, sizeof buf, "%zu,%.12g,0,\n", i, preds[i].score);
        out += buf;
    }
    return out;
}

}  // namespace selreg
