#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "selreg/experiment.hpp"

namespace py = pybind11;
using namespace selreg;

namespace {

Matrix matrix_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Matrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), m.data().begin());
    return m;
}

py::array_t<double> matrix_to_numpy(const Matrix& m) {
    py::array_t<double> arr({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), arr.mutable_data());
    return arr;
}

LearnerSpec spec_from_kwargs(const std::string& kind, const py::dict& kw) {
    LearnerSpec spec;
    spec.kind = learner_kind_from_string(kind);
    if (spec.kind == LearnerKind::gbt) spec.max_depth = 6;
    for (auto item : kw) {
        auto key = item.first.cast<std::string>();
        if (key == "max_depth") spec.max_depth = item.second.cast<int>();
        else if (key == "min_samples_leaf") spec.min_samples_leaf = item.second.cast<int>();
        else if (key == "n_trees") spec.n_trees = item.second.cast<int>();
        else if (key == "feature_fraction") spec.feature_fraction = item.second.cast<double>();
        else if (key == "bootstrap") spec.bootstrap = item.second.cast<bool>();
        else if (key == "n_rounds") spec.n_rounds = item.second.cast<int>();
        else if (key == "learning_rate") spec.learning_rate = item.second.cast<double>();
        else if (key == "l2_strength") spec.l2_strength = item.second.cast<double>();
        else if (key == "max_iterations") spec.max_iterations = item.second.cast<int>();
        else if (key == "tolerance") spec.tolerance = item.second.cast<double>();
        else throw std::invalid_argument("unknown learner option: " + key);
    }
    spec.validate();
    return spec;
}

struct PyModel {
    ModelPtr ptr;
};

py::dict prediction_to_dict(const SelectivePrediction& p) {
    py::dict d;
    d["accepted"] = p.accepted;
    d["score"] = p.score;
    d["value"] = p.accepted ? py::cast(*p.value) : py::none();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Selective regression with bootstrap uncertainty, conformal baselines, "
              "and Shapley-based rejection auditing";

    py::class_<PyModel>(m, "FittedModel")
        .def("predict", [](const PyModel& self, py::array_t<double> X) {
            return self.ptr->predict(matrix_from_numpy(X));
        })
        .def("to_json", [](const PyModel& self) { return self.ptr->to_json(); })
        .def_property_readonly("kind",
                               [](const PyModel& self) { return to_string(self.ptr->kind()); });

    m.def(
        "fit",
        [](const std::string& kind, py::array_t<double> X, std::vector<double> y,
           std::uint64_t seed, const py::kwargs& kw) {
            return PyModel{fit(spec_from_kwargs(kind, kw), matrix_from_numpy(X), y, seed)};
        },
        py::arg("kind"), py::arg("X"), py::arg("y"), py::arg("seed") = 0);
    m.def("predict_proba", [](const PyModel& model, py::array_t<double> X) {
        return predict_proba(*model.ptr, matrix_from_numpy(X));
    });
    m.def("model_from_json",
          [](const std::string& text) { return PyModel{model_from_json(text)}; });

    py::class_<SelectiveModel>(m, "SelectiveModel")
        .def_property_readonly("method",
                               [](const SelectiveModel& s) { return to_string(s.method); })
        .def_readonly("tau", &SelectiveModel::tau)
        .def_readonly("target_coverage", &SelectiveModel::target_coverage)
        .def("with_target_coverage", &SelectiveModel::with_target_coverage)
        .def("predict_selective",
             [](const SelectiveModel& self, py::array_t<double> X,
                std::optional<std::vector<double>> y) {
                 auto preds = predict_selective(self, matrix_from_numpy(X),
                                                y ? &*y : nullptr);
                 py::list out;
                 for (const auto& p : preds) out.append(prediction_to_dict(p));
                 return out;
             },
             py::arg("X"), py::arg("y") = py::none())
        .def("to_json", &selective_model_to_json);
    m.def("selective_model_from_json", &selective_model_from_json);

    auto build_wrapper = [](const std::string& method, const std::string& kind,
                            py::array_t<double> Xt, std::vector<double> yt,
                            py::array_t<double> Xc, double alpha, std::uint64_t seed, int K,
                            double level, std::optional<std::size_t> B, const py::kwargs& kw) {
        auto spec = spec_from_kwargs(kind, kw);
        auto X_train = matrix_from_numpy(Xt);
        auto X_cal = matrix_from_numpy(Xc);
        auto tag = selective_method_from_string(method);
        switch (tag) {
            case SelectiveMethod::doubt_var:
                return build_doubt_var(spec, X_train, yt, X_cal, alpha, seed, B);
            case SelectiveMethod::doubt_int:
                return build_doubt_int(spec, X_train, yt, X_cal, alpha, seed, B);
            case SelectiveMethod::plugin:
                return build_plugin(spec, X_train, yt, X_cal, alpha, seed);
            case SelectiveMethod::scross:
                return build_scross(spec, X_train, yt, X_cal, alpha, K, seed);
            case SelectiveMethod::cvplus:
                return build_cvplus(spec, X_train, yt, X_cal, alpha, K, level, seed);
            default:
                throw std::invalid_argument("use build_goldcase for the oracle");
        }
    };
    m.def("build_selective", build_wrapper, py::arg("method"), py::arg("learner"),
          py::arg("X_train"), py::arg("y_train"), py::arg("X_cal"), py::arg("alpha"),
          py::arg("seed") = 0, py::arg("K") = 5, py::arg("level") = 0.95,
          py::arg("B") = py::none());
    m.def("build_goldcase",
          [](const PyModel& predictor, py::array_t<double> X, std::vector<double> y,
             double alpha) {
              return build_goldcase(predictor.ptr, matrix_from_numpy(X), y, alpha);
          });

    m.def("calibrate", &calibrate);
    m.def("cov_sat", &cov_sat, py::arg("target"), py::arg("actual"), py::arg("eps") = 0.05);
    m.def("auc_score", [](std::vector<double> s, std::vector<double> l) {
        return auc_score(s, l);
    });
    m.def("wasserstein_1d", [](std::vector<double> a, std::vector<double> b) {
        return wasserstein_1d(a, b);
    });

    m.def(
        "risk_coverage_curve",
        [](const SelectiveModel& model, py::array_t<double> X, std::vector<double> y,
           std::vector<double> grid, double eps) {
            auto records = risk_coverage_curve(model, matrix_from_numpy(X), y, grid, eps);
            py::list out;
            for (const auto& r : records) {
                py::dict d;
                d["method"] = r.method;
                d["target_coverage"] = r.target_coverage;
                d["actual_coverage"] = r.actual_coverage;
                d["mse_full"] = r.mse_full;
                d["mse_accepted"] = r.mse_accepted;
                d["delta_mse"] = r.delta_mse;
                d["cov_ok"] = r.cov_ok;
                out.append(d);
            }
            return out;
        },
        py::arg("model"), py::arg("X_test"), py::arg("y_test"),
        py::arg("coverage_grid") = std::vector<double>{}, py::arg("eps") = 0.05);

    m.def(
        "synth_heteroscedastic",
        [](std::size_t n, std::size_t d, const std::string& profile, std::uint64_t seed) {
            auto r = synth_heteroscedastic(n, d, profile, seed);
            return py::make_tuple(matrix_to_numpy(r.data.features), r.data.target, r.true_sigma);
        },
        py::arg("n"), py::arg("d"), py::arg("profile") = "increasing", py::arg("seed") = 0);
    m.def("synth_house", [](std::size_t n, std::uint64_t seed) {
        auto r = synth_house(n, seed);
        std::vector<std::string> names;
        for (const auto& c : r.data.columns) names.push_back(c.name);
        return py::make_tuple(matrix_to_numpy(r.data.features), r.data.target, names);
    });

    py::class_<AuditModel>(m, "AuditModel")
        .def_readonly("training_auc", &AuditModel::training_auc)
        .def_readonly("feature_names", &AuditModel::feature_names)
        .def_property_readonly("classifier",
                               [](const AuditModel& a) { return PyModel{a.classifier}; });
    m.def(
        "fit_audit",
        [](py::array_t<double> X, std::vector<double> labels,
           std::vector<std::string> names) {
            return fit_audit(matrix_from_numpy(X), labels, LearnerSpec::logistic_spec(),
                             std::move(names));
        },
        py::arg("X_val"), py::arg("accept_labels"),
        py::arg("feature_names") = std::vector<std::string>{});
    m.def(
        "shapley",
        [](const AuditModel& audit, py::array_t<double> X, py::array_t<double> background,
           const std::string& mode, std::size_t samples, std::uint64_t seed) {
            auto attr = shapley(audit, matrix_from_numpy(X), matrix_from_numpy(background),
                                mode == "exact" ? ShapleyMode::exact : ShapleyMode::permutation,
                                samples, seed);
            return py::make_tuple(matrix_to_numpy(attr.phi), attr.base_value,
                                  matrix_to_numpy(attr.standard_errors));
        },
        py::arg("audit"), py::arg("X_explain"), py::arg("background"),
        py::arg("mode") = "exact", py::arg("samples") = 2000, py::arg("seed") = 0);

    m.def("run_bench", [](const std::string& config_json, const std::string& out_dir, int jobs) {
        return run_bench(config_from_json(config_json), out_dir, jobs);
    });
    m.def("run_audit", [](const std::string& config_json, const std::string& out_dir) {
        return run_audit(config_from_json(config_json), out_dir);
    });
    m.def("run_report", &run_report);
}
