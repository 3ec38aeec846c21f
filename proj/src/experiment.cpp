#include "selreg/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace selreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
}

LearnerSpec learner_from_json(const json& j, const std::string& where) {
    reject_unknown_keys(j, {"kind", "max_depth", "min_samples_leaf", "n_trees",
                            "feature_fraction", "bootstrap", "n_rounds", "learning_rate",
                            "l2_strength", "max_iterations", "tolerance"},
                        where);
    LearnerSpec spec;
    spec.kind = learner_kind_from_string(j.at("kind"));
    if (spec.kind == LearnerKind::gbt) spec.max_depth = 6;
    if (j.contains("max_depth")) spec.max_depth = j["max_depth"];
    if (j.contains("min_samples_leaf")) spec.min_samples_leaf = j["min_samples_leaf"];
    if (j.contains("n_trees")) spec.n_trees = j["n_trees"];
    if (j.contains("feature_fraction")) spec.feature_fraction = j["feature_fraction"];
    if (j.contains("bootstrap")) spec.bootstrap = j["bootstrap"];
    if (j.contains("n_rounds")) spec.n_rounds = j["n_rounds"];
    if (j.contains("learning_rate")) spec.learning_rate = j["learning_rate"];
    if (j.contains("l2_strength")) spec.l2_strength = j["l2_strength"];
    if (j.contains("max_iterations")) spec.max_iterations = j["max_iterations"];
    if (j.contains("tolerance")) spec.tolerance = j["tolerance"];
    spec.validate();
    return spec;
}

json learner_to_json(const LearnerSpec& s) {
    return json{{"kind", to_string(s.kind)},
                {"max_depth", s.max_depth},
                {"min_samples_leaf", s.min_samples_leaf},
                {"n_trees", s.n_trees},
                {"feature_fraction", s.feature_fraction},
                {"bootstrap", s.bootstrap},
                {"n_rounds", s.n_rounds},
                {"learning_rate", s.learning_rate},
                {"l2_strength", s.l2_strength},
                {"max_iterations", s.max_iterations},
                {"tolerance", s.tolerance}};
}

DatasetSpec dataset_from_json(const json& j) {
    reject_unknown_keys(j, {"name", "type", "n", "d", "profile", "gen_seed", "path",
                            "target_column", "add_random_feature"},
                        "datasets[]");
    DatasetSpec spec;
    spec.type = j.at("type");
    if (spec.type != "synthetic" && spec.type != "house" && spec.type != "csv")
        throw std::invalid_argument("config: unknown dataset type: " + spec.type);
    spec.name = j.value("name", spec.type);
    spec.n = j.value("n", std::size_t{400});
    spec.d = j.value("d", std::size_t{5});
    spec.profile = j.value("profile", std::string("increasing"));
    spec.gen_seed = j.value("gen_seed", std::uint64_t{0});
    spec.path = j.value("path", std::string());
    spec.target_column = j.value("target_column", std::string());
    spec.add_random = j.value("add_random_feature", false);
    if (spec.type == "csv" && (spec.path.empty() || spec.target_column.empty()))
        throw std::invalid_argument("config: csv dataset needs path and target_column");
    return spec;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    reject_unknown_keys(j, {"datasets", "methods", "learner", "coverage_grid", "seeds",
                            "n_seeds", "split_fractions", "epsilon", "K", "B",
                            "cvplus_level", "out_dir", "q3"},
                        "top level");
    ExperimentConfig cfg;
    if (!j.contains("datasets") || j["datasets"].empty())
        throw std::invalid_argument("config: at least one dataset required");
    std::set<std::string> names;
    for (const auto& dj : j["datasets"]) {
        auto d = dataset_from_json(dj);
        if (!names.insert(d.name).second)
            throw std::invalid_argument("config: duplicate dataset name: " + d.name);
        cfg.datasets.push_back(std::move(d));
    }

    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : j["methods"])
            cfg.methods.push_back(selective_method_from_string(m));
    } else {
        cfg.methods = {SelectiveMethod::doubt_var, SelectiveMethod::doubt_int,
                       SelectiveMethod::plugin, SelectiveMethod::scross,
                       SelectiveMethod::cvplus, SelectiveMethod::goldcase};
    }
    if (cfg.methods.empty()) throw std::invalid_argument("config: methods must be nonempty");

    if (j.contains("learner")) cfg.learner = learner_from_json(j["learner"], "learner");
    if (j.contains("coverage_grid")) {
        cfg.coverage_grid = j["coverage_grid"].get<std::vector<double>>();
        for (double c : cfg.coverage_grid)
            if (c <= 0.0 || c > 1.0)
                throw std::invalid_argument("config: coverage values must lie in (0,1]");
    }
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    else if (j.contains("n_seeds")) {
        cfg.seeds.clear();
        for (std::uint64_t s = 0; s < j["n_seeds"].get<std::uint64_t>(); ++s)
            cfg.seeds.push_back(s);
    }
    if (cfg.seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");

    if (j.contains("split_fractions")) {
        cfg.split_fractions.clear();
        for (const auto& fj : j["split_fractions"]) {
            reject_unknown_keys(fj, {"name", "fraction"}, "split_fractions[]");
            cfg.split_fractions.emplace_back(fj.at("name"), fj.at("fraction"));
        }
    }
    cfg.epsilon = j.value("epsilon", 0.05);
    cfg.folds = j.value("K", 5);
    if (j.contains("B") && !j["B"].is_null()) cfg.bootstrap_override = j["B"].get<std::size_t>();
    cfg.cvplus_level = j.value("cvplus_level", 0.95);
    cfg.out_dir = j.value("out_dir", std::string("results"));

    if (j.contains("q3")) {
        const auto& qj = j["q3"];
        reject_unknown_keys(qj, {"audit_learner", "target_coverage", "shift_features",
                                 "noise_mean", "noise_sd", "repeats", "explain_rows",
                                 "background_rows", "method"},
                            "q3");
        Q3Config q3;
        if (qj.contains("audit_learner"))
            q3.audit_learner = learner_from_json(qj["audit_learner"], "q3.audit_learner");
        q3.target_coverage = qj.value("target_coverage", 0.80);
        if (q3.target_coverage <= 0.0 || q3.target_coverage > 1.0)
            throw std::invalid_argument("config: q3.target_coverage outside (0,1]");
        if (qj.contains("shift_features")) {
            q3.shift_all = false;
            q3.shift_features = qj["shift_features"].get<std::vector<std::string>>();
        }
        q3.noise_mean = qj.value("noise_mean", 5.0);
        q3.noise_sd = qj.value("noise_sd", 1.0);
        q3.repeats = qj.value("repeats", 5);
        q3.explain_rows = qj.value("explain_rows", std::size_t{100});
        q3.background_rows = qj.value("background_rows", std::size_t{100});
        q3.method = qj.value("method", std::string("doubt_var"));
        selective_method_from_string(q3.method);  // validate
        cfg.q3 = std::move(q3);
    }
    return cfg;
}

std::string config_to_canonical_json(const ExperimentConfig& cfg) {
    json j;
    auto& ds = j["datasets"] = json::array();
    for (const auto& d : cfg.datasets)
        ds.push_back(json{{"name", d.name}, {"type", d.type}, {"n", d.n}, {"d", d.d},
                          {"profile", d.profile}, {"gen_seed", d.gen_seed}, {"path", d.path},
                          {"target_column", d.target_column},
                          {"add_random_feature", d.add_random}});
    auto& ms = j["methods"] = json::array();
    for (auto m : cfg.methods) ms.push_back(to_string(m));
    j["learner"] = learner_to_json(cfg.learner);
    j["coverage_grid"] = cfg.coverage_grid.empty() ? kDefaultCoverageGrid : cfg.coverage_grid;
    j["seeds"] = cfg.seeds;
    auto& sf = j["split_fractions"] = json::array();
    for (const auto& [name, f] : cfg.split_fractions)
        sf.push_back(json{{"name", name}, {"fraction", f}});
    j["epsilon"] = cfg.epsilon;
    j["K"] = cfg.folds;
    if (cfg.bootstrap_override) j["B"] = *cfg.bootstrap_override;
    else j["B"] = nullptr;
    j["cvplus_level"] = cfg.cvplus_level;
    if (cfg.q3) {
        j["q3"] = json{{"audit_learner", learner_to_json(cfg.q3->audit_learner)},
                       {"target_coverage", cfg.q3->target_coverage},
                       {"shift_features", cfg.q3->shift_features},
                       {"shift_all", cfg.q3->shift_all},
                       {"noise_mean", cfg.q3->noise_mean},
                       {"noise_sd", cfg.q3->noise_sd},
                       {"repeats", cfg.q3->repeats},
                       {"explain_rows", cfg.q3->explain_rows},
                       {"background_rows", cfg.q3->background_rows},
                       {"method", cfg.q3->method}};
    }
    return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : config_to_canonical_json(cfg)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

SynthResult materialize_dataset(const DatasetSpec& spec) {
    SynthResult result;
    if (spec.type == "synthetic") {
        result = synth_heteroscedastic(spec.n, spec.d, spec.profile, spec.gen_seed);
    } else if (spec.type == "house") {
        result = synth_house(spec.n, spec.gen_seed);
    } else {
        result.data = load_csv(spec.path, spec.target_column);
        result.true_sigma.assign(result.data.n(), 0.0);
    }
    if (spec.add_random) {
        result.data = add_random_feature(result.data, derive_seed(spec.gen_seed, 0xabcd));
        result.true_sigma.resize(result.data.n(), 0.0);
    }
    return result;
}

namespace {

struct SplitData {
    Matrix X;
    std::vector<double> y;
};

SplitData extract(const Dataset& data, const std::vector<std::size_t>& rows) {
    SplitData out;
    out.X = data.features.take_rows(rows);
    out.y = take(data.target, rows);
    return out;
}

SelectiveModel build_method(SelectiveMethod method, const ExperimentConfig& cfg,
                            const SplitData& train, const SplitData& cal,
                            const SplitData& test, double alpha, std::uint64_t seed) {
    switch (method) {
        case SelectiveMethod::doubt_var:
            return build_doubt_var(cfg.learner, train.X, train.y, cal.X, alpha, seed,
                                   cfg.bootstrap_override);
        case SelectiveMethod::doubt_int:
            return build_doubt_int(cfg.learner, train.X, train.y, cal.X, alpha, seed,
                                   cfg.bootstrap_override);
        case SelectiveMethod::plugin:
            return build_plugin(cfg.learner, train.X, train.y, cal.X, alpha, seed);
        case SelectiveMethod::scross:
            return build_scross(cfg.learner, train.X, train.y, cal.X, alpha, cfg.folds, seed);
        case SelectiveMethod::cvplus:
            return build_cvplus(cfg.learner, train.X, train.y, cal.X, alpha, cfg.folds,
                                cfg.cvplus_level, seed);
        case SelectiveMethod::goldcase: {
            auto f = fit(cfg.learner, train.X, train.y, derive_seed(seed, 0x901d));
            return build_goldcase(f, test.X, test.y, alpha);
        }
    }
    throw std::logic_error("unknown selective method");
}

struct CellResult {
    std::vector<EvaluationRecord> records;
    std::string error;  // empty on success
};

CellResult run_cell(const ExperimentConfig& cfg, const SynthResult& dataset,
                    std::uint64_t seed) {
    CellResult out;
    try {
        auto plan = split(dataset.data, cfg.split_fractions, seed);
        auto train_rows = plan.rows_of(cfg.split_fractions[0].first);
        auto [processed, record] = preprocess(dataset.data, train_rows);
        auto train = extract(processed, train_rows);
        auto cal = extract(processed, plan.rows_of(cfg.split_fractions[1].first));
        auto test = extract(processed, plan.rows_of(cfg.split_fractions.back().first));

        auto grid = cfg.coverage_grid.empty() ? kDefaultCoverageGrid : cfg.coverage_grid;
        for (auto method : cfg.methods) {
            auto model = build_method(method, cfg, train, cal, test, grid[0], seed);
            auto records = risk_coverage_curve(model, test.X, test.y, grid, cfg.epsilon);
            for (auto& r : records) r.seed = seed;
            out.records.insert(out.records.end(), records.begin(), records.end());
        }
    } catch (const std::exception& e) {
        out.records.clear();
        out.error = e.what();
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

struct CellRow {
    std::string dataset, method;
    std::uint64_t seed;
    double target_coverage, actual_coverage, mse_full, mse_accepted, delta_mse;
    bool cov_ok;
};

/// Per-dataset appendix-style summary plus per-coverage rank summaries,
/// shared between bench and report.
void write_summaries(const fs::path& out_dir, const std::vector<std::string>& dataset_names,
                     const std::vector<std::string>& method_names,
                     const std::vector<double>& grid, const std::vector<CellRow>& rows,
                     const std::string& prefix) {
    for (const auto& ds : dataset_names) {
        std::string csv = "method,coverage,mean_actual_coverage,sd_actual_coverage,"
                          "mean_delta_mse,sd_delta_mse,covsat_rate\n";
        json jsum;
        for (const auto& m : method_names) {
            for (double c : grid) {
                std::vector<double> covs, deltas;
                double sat = 0.0;
                for (const auto& r : rows) {
                    if (r.dataset != ds || r.method != m || r.target_coverage != c) continue;
                    covs.push_back(r.actual_coverage);
                    deltas.push_back(r.delta_mse);
                    sat += r.cov_ok ? 1.0 : 0.0;
                }
                if (covs.empty()) continue;
                auto ncells = static_cast<double>(covs.size());
                csv += m + "," + fmt(c) + "," + fmt(mean(covs)) + "," + fmt(sample_sd(covs)) +
                       "," + fmt(mean(deltas)) + "," + fmt(sample_sd(deltas)) + "," +
                       fmt(sat / ncells) + "\n";
                std::string key = fmt(c);
                jsum["coverage"][m][key] = {mean(covs), sample_sd(covs)};
                jsum["delta_mse"][m][key] = {mean(deltas), sample_sd(deltas)};
            }
        }
        jsum["spread_statistic"] = "sample_sd";
        write_file(out_dir / (prefix + "summary_" + ds + ".csv"), csv);
        write_file(out_dir / (prefix + "summary_" + ds + ".json"), jsum.dump(2));
    }

    // Rank/CD per coverage level over the datasets x methods mean delta-MSE table.
    std::string ranks = "coverage,method,mean_rank,critical_difference,n_datasets\n";
    if (dataset_names.size() >= 2 && method_names.size() >= 2) {
        for (double c : grid) {
            if (c == 1.0) continue;
            std::vector<std::vector<double>> table;
            bool complete = true;
            for (const auto& ds : dataset_names) {
                std::vector<double> row;
                for (const auto& m : method_names) {
                    std::vector<double> deltas;
                    for (const auto& r : rows)
                        if (r.dataset == ds && r.method == m && r.target_coverage == c)
                            deltas.push_back(r.delta_mse);
                    if (deltas.empty()) {
                        complete = false;
                        break;
                    }
                    row.push_back(mean(deltas));
                }
                if (!complete) break;
                table.push_back(std::move(row));
            }
            if (!complete) continue;
            auto summary = friedman_nemenyi(table, method_names);
            for (std::size_t m = 0; m < method_names.size(); ++m)
                ranks += fmt(c) + "," + method_names[m] + "," + fmt(summary.mean_ranks[m]) +
                         "," + fmt(summary.critical_difference) + "," +
                         std::to_string(summary.n_datasets) + "\n";
        }
    }
    write_file(out_dir / (prefix + "ranks.csv"), ranks);
}

}  // namespace

int run_bench(const ExperimentConfig& cfg, const std::string& out_dir_str, int jobs) {
    try {
        fs::path out_dir(out_dir_str);
        fs::create_directories(out_dir);

        struct Cell {
            std::size_t dataset_idx;
            std::uint64_t seed;
        };
        std::vector<Cell> cells;
        std::vector<SynthResult> datasets(cfg.datasets.size());
        std::vector<std::string> dataset_errors(cfg.datasets.size());
        for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
            try {
                datasets[di] = materialize_dataset(cfg.datasets[di]);
            } catch (const std::exception& e) {
                dataset_errors[di] = e.what();
            }
            for (auto s : cfg.seeds) cells.push_back({di, s});
        }

        std::vector<CellResult> results(cells.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= cells.size()) return;
                const auto& cell = cells[i];
                if (!dataset_errors[cell.dataset_idx].empty()) {
                    results[i].error = dataset_errors[cell.dataset_idx];
                    continue;
                }
                results[i] = run_cell(cfg, datasets[cell.dataset_idx], cell.seed);
            }
        };
        int n_threads = std::max(1, jobs);
        std::vector<std::thread> threads;
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();

        // Deterministic serialization: cells were enumerated in config order
        // and results land in preassigned slots, so output order is fixed
        // regardless of the thread count.
        std::string csv = "dataset,method,seed,target_coverage,actual_coverage,mse_full,"
                          "mse_accepted,delta_mse,cov_ok\n";
        std::vector<CellRow> all_rows;
        json failures = json::array();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& name = cfg.datasets[cells[i].dataset_idx].name;
            if (!results[i].error.empty()) {
                failures.push_back(json{{"dataset", name}, {"seed", cells[i].seed},
                                        {"error", results[i].error}});
                continue;
            }
            for (const auto& r : results[i].records) {
                csv += name + "," + r.method + "," + std::to_string(r.seed) + "," +
                       fmt(r.target_coverage) + "," + fmt(r.actual_coverage) + "," +
                       fmt(r.mse_full) + "," + fmt(r.mse_accepted) + "," + fmt(r.delta_mse) +
                       "," + (r.cov_ok ? "1" : "0") + "\n";
                all_rows.push_back({name, r.method, r.seed, r.target_coverage,
                                    r.actual_coverage, r.mse_full, r.mse_accepted,
                                    r.delta_mse, r.cov_ok});
            }
        }
        write_file(out_dir / "records.csv", csv);

        std::vector<std::string> dataset_names, method_names;
        for (const auto& d : cfg.datasets) dataset_names.push_back(d.name);
        for (auto m : cfg.methods) method_names.push_back(to_string(m));
        auto grid = cfg.coverage_grid.empty() ? kDefaultCoverageGrid : cfg.coverage_grid;
        write_summaries(out_dir, dataset_names, method_names, grid, all_rows, "");

        char hash_hex[32];
        std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        json manifest;
        manifest["kind"] = "bench";
        manifest["version"] = 1;
        manifest["config"] = json::parse(config_to_canonical_json(cfg));
        manifest["config_hash"] = hash_hex;
        manifest["seeds"] = cfg.seeds;
        manifest["n_cells"] = cells.size();
        manifest["failures"] = failures;
        write_file(out_dir / "manifest.json", manifest.dump(2));

        return failures.empty() ? 0 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bench: fatal: %s\n", e.what());
        return 3;
    }
}

int run_audit(const ExperimentConfig& cfg, const std::string& out_dir_str) {
    if (!cfg.q3) {
        std::fprintf(stderr, "audit: config has no q3 block\n");
        return 1;
    }
    try {
        const auto& q3 = *cfg.q3;
        fs::path out_dir(out_dir_str);
        fs::create_directories(out_dir);

        auto dataset = materialize_dataset(cfg.datasets.at(0));
        std::uint64_t seed = cfg.seeds.at(0);
        std::vector<std::pair<std::string, double>> fractions = {
            {"train", 0.25}, {"cal", 0.25}, {"val", 0.25}, {"test", 0.25}};
        auto plan = split(dataset.data, fractions, seed);
        auto train_rows = plan.rows_of("train");
        auto [processed, record] = preprocess(dataset.data, train_rows);
        auto train = extract(processed, train_rows);
        auto cal = extract(processed, plan.rows_of("cal"));
        auto val = extract(processed, plan.rows_of("val"));
        auto test = extract(processed, plan.rows_of("test"));

        auto method = selective_method_from_string(q3.method);
        auto model = build_method(method, cfg, train, cal, test, q3.target_coverage, seed);

        auto val_preds = predict_selective(model, val.X,
                                           model.scorer->uses_labels() ? &val.y : nullptr);
        std::vector<double> val_labels(val_preds.size());
        for (std::size_t i = 0; i < val_preds.size(); ++i)
            val_labels[i] = val_preds[i].accepted ? 1.0 : 0.0;

        std::vector<std::string> feature_names;
        for (const auto& c : processed.columns) feature_names.push_back(c.name);
        auto audit = fit_audit(val.X, val_labels, q3.audit_learner, feature_names);

        auto test_preds = predict_selective(model, test.X,
                                            model.scorer->uses_labels() ? &test.y : nullptr);
        std::vector<double> test_labels(test_preds.size());
        std::vector<std::size_t> accepted_rows;
        for (std::size_t i = 0; i < test_preds.size(); ++i) {
            test_labels[i] = test_preds[i].accepted ? 1.0 : 0.0;
            if (test_preds[i].accepted) accepted_rows.push_back(i);
        }
        auto test_proba = predict_proba(*audit.classifier, test.X);
        double heldout_auc = auc_score(test_proba, test_labels);

        if (accepted_rows.empty()) throw std::runtime_error("audit: no accepted test rows");
        Matrix accepted = test.X.take_rows(accepted_rows);
        std::size_t n_explain = std::min<std::size_t>(q3.explain_rows, accepted.rows());
        std::vector<std::size_t> explain_idx(n_explain);
        std::iota(explain_idx.begin(), explain_idx.end(), std::size_t{0});
        Matrix explain_rows = accepted.take_rows(explain_idx);

        // Background: seeded sample of validation rows.
        std::vector<std::size_t> bg_idx(val.X.rows());
        std::iota(bg_idx.begin(), bg_idx.end(), std::size_t{0});
        Rng bg_rng(derive_seed(seed, 0xb6));
        bg_rng.shuffle(bg_idx);
        bg_idx.resize(std::min<std::size_t>(q3.background_rows, bg_idx.size()));
        Matrix background = val.X.take_rows(bg_idx);

        auto shap_mode = processed.features.cols() <= 12 ? ShapleyMode::exact
                                                         : ShapleyMode::permutation;
        auto attr = shapley(audit, explain_rows, background, shap_mode, 2000,
                            derive_seed(seed, 0x5a9));
        write_file(out_dir / "shapley_test_accepted.csv", shapley_to_csv(attr, feature_names));

        auto shift_features = q3.shift_all ? feature_names : q3.shift_features;
        auto report = shift_audit(audit, explain_rows, shift_features, q3.noise_mean,
                                  q3.noise_sd, q3.repeats, derive_seed(seed, 0x5f7),
                                  &background, shap_mode, 2000);
        write_file(out_dir / "shift_report.csv", shift_report_to_csv(report));

        json aj;
        aj["method"] = q3.method;
        aj["target_coverage"] = q3.target_coverage;
        aj["tau"] = model.tau;
        aj["training_auc"] = audit.training_auc;
        aj["heldout_auc"] = heldout_auc;
        aj["n_accepted_test"] = accepted_rows.size();
        aj["n_explained"] = n_explain;
        aj["shapley_mode"] = shap_mode == ShapleyMode::exact ? "exact" : "permutation";
        aj["shapley_note"] =
            "interventional Shapley values against an empirical background sample";
        write_file(out_dir / "audit.json", aj.dump(2));

        char hash_hex[32];
        std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        json manifest;
        manifest["kind"] = "audit";
        manifest["version"] = 1;
        manifest["config"] = json::parse(config_to_canonical_json(cfg));
        manifest["config_hash"] = hash_hex;
        manifest["failures"] = json::array();
        write_file(out_dir / "manifest.json", manifest.dump(2));

        std::printf("audit AUC (held-out): %.4f\n", heldout_auc);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "audit: fatal: %s\n", e.what());
        return 3;
    }
}

int run_report(const std::string& results_dir_str, const std::string& out_dir_str) {
    try {
        fs::path results_dir(results_dir_str);
        fs::path out_dir(out_dir_str.empty() ? results_dir_str : out_dir_str);
        std::ifstream mf(results_dir / "manifest.json");
        if (!mf) {
            std::fprintf(stderr, "report: missing manifest in %s\n", results_dir_str.c_str());
            return 1;
        }
        json manifest;
        try {
            mf >> manifest;
        } catch (const std::exception&) {
            std::fprintf(stderr, "report: corrupt manifest\n");
            return 1;
        }
        std::ifstream rf(results_dir / "records.csv");
        if (!rf) {
            std::fprintf(stderr, "report: missing records.csv\n");
            return 1;
        }
        fs::create_directories(out_dir);

        std::vector<CellRow> rows;
        std::string line;
        std::getline(rf, line);  // header
        while (std::getline(rf, line)) {
            std::stringstream ss(line);
            CellRow r;
            std::string field;
            std::getline(ss, r.dataset, ',');
            std::getline(ss, r.method, ',');
            std::getline(ss, field, ',');
            r.seed = std::stoull(field);
            std::getline(ss, field, ',');
            r.target_coverage = std::stod(field);
            std::getline(ss, field, ',');
            r.actual_coverage = std::stod(field);
            std::getline(ss, field, ',');
            r.mse_full = std::stod(field);
            std::getline(ss, field, ',');
            r.mse_accepted = std::stod(field);
            std::getline(ss, field, ',');
            r.delta_mse = std::stod(field);
            std::getline(ss, field, ',');
            r.cov_ok = field == "1";
            rows.push_back(std::move(r));
        }

        // Orders from the stored config keep output bytes deterministic.
        std::vector<std::string> dataset_names, method_names;
        for (const auto& d : manifest.at("config").at("datasets"))
            dataset_names.push_back(d.at("name"));
        for (const auto& m : manifest.at("config").at("methods"))
            method_names.push_back(m);
        auto grid = manifest.at("config").at("coverage_grid").get<std::vector<double>>();

        // Fig. 3a analogue: % of cells satisfying coverage per method.
        std::string covsat = "method,covsat_rate,n_cells\n";
        std::string report_txt = "selective-regression benchmark report\n";
        report_txt += "cells recorded: " + std::to_string(rows.size()) + "\n\n";
        report_txt += "coverage satisfaction by method:\n";
        for (const auto& m : method_names) {
            std::size_t total = 0, sat = 0;
            for (const auto& r : rows) {
                if (r.method != m || r.target_coverage == 1.0) continue;
                ++total;
                sat += r.cov_ok ? 1 : 0;
            }
            double rate = total ? static_cast<double>(sat) / static_cast<double>(total) : 0.0;
            covsat += m + "," + fmt(rate) + "," + std::to_string(total) + "\n";
            report_txt += "  " + m + ": " + fmt(100.0 * rate) + "% of " +
                          std::to_string(total) + " cells\n";
        }
        write_file(out_dir / "covsat_by_method.csv", covsat);

        // Fig. 3b analogue: mean delta-MSE per (method, coverage).
        std::string mean_delta = "method,coverage,mean_delta_mse,n_cells\n";
        for (const auto& m : method_names) {
            for (double c : grid) {
                std::vector<double> deltas;
                for (const auto& r : rows)
                    if (r.method == m && r.target_coverage == c) deltas.push_back(r.delta_mse);
                if (deltas.empty()) continue;
                mean_delta += m + "," + fmt(c) + "," + fmt(mean(deltas)) + "," +
                              std::to_string(deltas.size()) + "\n";
            }
        }
        write_file(out_dir / "mean_delta_mse.csv", mean_delta);

        write_summaries(out_dir, dataset_names, method_names, grid, rows, "report_");
        write_file(out_dir / "report.txt", report_txt);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "report: fatal: %s\n", e.what());
        return 3;
    }
}

int run_prep(const std::string& csv_path, const std::string& target_column,
             const std::string& out_path) {
    try {
        auto raw = load_csv(csv_path, target_column);
        std::vector<std::size_t> all(raw.n());
        std::iota(all.begin(), all.end(), std::size_t{0});
        auto [processed, record] = preprocess(raw, all);
        write_csv(processed, out_path, target_column);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "prep: %s\n", e.what());
        return 1;
    }
}

}  // namespace selreg
