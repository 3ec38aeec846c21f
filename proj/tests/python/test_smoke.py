"""End-to-end smoke tests for the Python bindings."""

import json
import math

import numpy as np
import pytest

import selreg


def make_split(n=400, d=3, seed=7):
    X, y, sigma = selreg.synth_heteroscedastic(n, d, "increasing", seed)
    X = np.asarray(X)
    y = np.asarray(y)
    third = n // 3
    return (X[:third], y[:third], X[third : 2 * third], y[third : 2 * third],
            X[2 * third :], y[2 * third :])


def test_fit_predict_roundtrip():
    Xtr, ytr, _, _, Xte, yte = make_split()
    model = selreg.fit("gbt", Xtr, ytr, seed=1, n_rounds=20, max_depth=3)
    preds = np.asarray(model.predict(Xte))
    assert preds.shape == (len(yte),)
    baseline = float(np.mean((yte - ytr.mean()) ** 2))
    assert float(np.mean((yte - preds) ** 2)) < baseline

    clone = selreg.model_from_json(model.to_json())
    assert np.allclose(np.asarray(clone.predict(Xte)), preds)
    assert clone.kind == "gbt"


def test_selective_coverage_and_json():
    Xtr, ytr, Xcal, ycal, Xte, yte = make_split(n=600)
    model = selreg.build_selective("scross", "linear", Xtr, ytr, Xcal, alpha=0.8,
                                  seed=3, K=5)
    assert model.method == "scross"
    preds = model.predict_selective(Xte)
    cov = sum(p["accepted"] for p in preds) / len(preds)
    assert 0.6 <= cov <= 0.95
    for p in preds:
        assert (p["value"] is None) == (not p["accepted"])

    clone = selreg.selective_model_from_json(model.to_json())
    assert [p["accepted"] for p in clone.predict_selective(Xte)] == \
           [p["accepted"] for p in preds]

    curve = selreg.risk_coverage_curve(model, Xte, list(yte))
    assert len(curve) == 12
    assert curve[-1]["target_coverage"] == 1.0
    assert curve[-1]["actual_coverage"] >= 0.95


def test_calibrate_and_metrics():
    assert selreg.calibrate(list(range(1, 101)), 0.5) == pytest.approx(50.5)
    assert selreg.cov_sat(0.8, 0.78)
    assert not selreg.cov_sat(0.8, 0.70)
    assert selreg.auc_score([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert selreg.wasserstein_1d([0.0], [1.0]) == pytest.approx(1.0)
    assert selreg.wasserstein_1d([0.0], [0.0, 1.0]) == pytest.approx(0.5)


def test_audit_and_shapley():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 2))
    labels = (X[:, 0] > 0).astype(float)
    audit = selreg.fit_audit(X, list(labels), ["a", "b"])
    assert audit.training_auc > 0.95
    assert audit.feature_names == ["a", "b"]

    phi, base, se = selreg.shapley(audit, X[:5], X[:50], mode="exact")
    phi = np.asarray(phi)
    proba = np.asarray(selreg.predict_proba(audit.classifier, X[:5]))
    assert np.allclose(phi.sum(axis=1) + base, proba, atol=1e-6)


def test_run_bench_and_report(tmp_path):
    cfg = {
        "datasets": [{"name": "synth", "type": "synthetic", "n": 150, "d": 2,
                      "gen_seed": 5}],
        "methods": ["plugin", "goldcase"],
        "learner": {"kind": "linear"},
        "coverage_grid": [0.8, 1.0],
        "seeds": [0],
    }
    out = tmp_path / "bench"
    assert selreg.run_bench(json.dumps(cfg), str(out), 1) == 0
    records = (out / "records.csv").read_text().strip().splitlines()
    assert len(records) == 1 + 1 * 2 * 2  # header + datasets*methods*grid
    report_dir = tmp_path / "report"
    assert selreg.run_report(str(out), str(report_dir)) == 0
    covsat = (report_dir / "covsat_by_method.csv").read_text()
    assert covsat.startswith("method,covsat_rate,n_cells")
