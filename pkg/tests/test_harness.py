import csv
import json
import math

import numpy as np
import pytest

from weakguide.core import GuidanceKind
from weakguide.errors import ConfigError
from weakguide.estimators import Method
from weakguide.harness import (
    ExperimentConfig,
    MethodSpec,
    ResultRow,
    derive_seed,
    emit_results,
    read_results_csv,
    run_experiment,
    summarize,
)
from weakguide.tuning import TuneSpec

SMALL_TUNE = TuneSpec(lambda_grid=(0.0, 1e-2, 1.0), cv_repeats=3)


def _cfg(**kw):
    base = dict(dataset_source={"synthetic": {"n": 60, "d": 5, "noise": 1.0}}, methods=["ridge"],
                guidance_kind=None, n_labeled_sweep=[10], n_guidance_sweep=[20], n_test=20,
                trials=1, seed=0, tune=SMALL_TUNE)
    base.update(kw)
    return ExperimentConfig(**base)


def _row(method="ridge", n_labeled=10, trial=0, rmse=1.0, mae=0.5):
    return ResultRow("synthetic", method, "", n_labeled, 20, trial, rmse, mae, 0.0, 0.0, None)


def test_smoke_single_row():
    rows = run_experiment(_cfg())
    assert len(rows) == 1 and math.isfinite(rows[0].rmse) and rows[0].rmse >= 0


def test_deterministic_rows():
    cfg = _cfg(methods=["ridge", "mixed:relative", "hinge"], guidance_kind="relative", trials=2)
    assert run_experiment(cfg) == run_experiment(cfg)


def test_all_methods_run():
    cfg = _cfg(methods=["ridge", "mixed:bound", "mixed:neighbor", "mixed:similar", "hinge", "pseudo",
                        "laplacian"], n_labeled_sweep=[8])
    rows = run_experiment(cfg)
    assert {r.method for r in rows} == {"ridge", "mixed:bound", "mixed:neighbor", "mixed:similar",
                                        "hinge", "pseudo", "laplacian"}
    assert all(math.isfinite(r.rmse) and r.rmse >= 0 and r.mae >= 0 for r in rows)
    lap = next(r for r in rows if r.method == "laplacian")
    assert lap.sigma is not None and lap.sigma > 0
    sim = next(r for r in rows if r.method == "mixed:similar")
    assert sim.s is not None and sim.s > 0


def test_guidance_free_methods_shared_across_guidance_sweep():
    rows = run_experiment(_cfg(n_guidance_sweep=[20, 40], trials=2))
    by = {(r.n_guidance, r.trial): r.rmse for r in rows}
    assert by[(20, 0)] == by[(40, 0)] and by[(20, 1)] == by[(40, 1)]


def test_sweeps_and_ordering():
    rows = run_experiment(_cfg(methods=["ridge", "mixed:relative"], n_labeled_sweep=[8, 12], trials=2))
    assert len(rows) == 2 * 2 * 2
    keys = [(r.method, r.n_labeled, r.n_guidance, r.trial) for r in rows]
    assert keys == sorted(keys)


def test_derive_seed_stable_and_distinct():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert len({derive_seed(0, t) for t in range(100)}) == 100
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)


def test_method_spec_parse():
    assert MethodSpec.parse("mixed:bound") == MethodSpec(Method.MIXED_GUIDANCE, GuidanceKind.BOUND)
    assert MethodSpec.parse("mixed", "similar").label == "mixed:similar"
    assert MethodSpec.parse("hinge").kind is GuidanceKind.RELATIVE
    with pytest.raises(ConfigError):
        MethodSpec.parse("lasso")
    with pytest.raises(ConfigError):
        MethodSpec.parse("mixed")


def test_config_json_round_trip(tmp_path):
    cfg = _cfg(methods=["ridge", "mixed:bound"])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg


def test_config_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"trails": 3})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"trials": 0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n_labeled_sweep": []})


def test_config_defaults():
    cfg = ExperimentConfig()
    assert cfg.trials == 30 and 20 in cfg.n_guidance_sweep and 50 in cfg.n_guidance_sweep


def test_csv_dataset_source(tmp_path):
    from weakguide.data import gen_synthetic, save_csv
    path = tmp_path / "toy.csv"
    save_csv(gen_synthetic(60, 6, 1.0, 2), path)
    rows = run_experiment(_cfg(dataset_source={"csv": {"path": str(path), "target": "y"}},
                               feature_select_k=3))
    assert rows[0].dataset == "toy"


def test_emit_single_row(tmp_path):
    paths = emit_results([_row()], tmp_path)
    assert len(paths["results"].read_text().splitlines()) == 2
    back = read_results_csv(paths["results"])
    assert back == [_row()]


def test_emit_stderr_definition(tmp_path):
    rmse = np.random.default_rng(0).uniform(0.5, 2.0, 30)
    rows = [_row(trial=t, rmse=float(v)) for t, v in enumerate(rmse)]
    paths = emit_results(rows, tmp_path)
    entry = json.loads(paths["summary"].read_text())[0]
    assert entry["rmse_mean"] == pytest.approx(rmse.mean(), rel=1e-14)
    assert entry["rmse_stderr"] == pytest.approx(rmse.std(ddof=1) / math.sqrt(30), rel=1e-12)


def test_emit_curves_count(tmp_path):
    rows = [_row(method=m, n_labeled=n, trial=t) for m in ("ridge", "mixed:bound")
            for n in (10, 20, 30) for t in range(3)]
    paths = emit_results(rows, tmp_path)
    with open(paths["curves"]) as fh:
        assert len(list(csv.DictReader(fh))) == 6


def test_emit_requires_rows(tmp_path):
    with pytest.raises(ValueError):
        emit_results([], tmp_path)


def test_summarize_single_trial_has_no_stderr():
    assert summarize([_row()])[0]["rmse_stderr"] is None
