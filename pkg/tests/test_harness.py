"""Preset expansion, CSV canonicalization, determinism, parallel equivalence."""

import os

import numpy as np
import pytest

from robust_adrf.harness import (
    PRESETS,
    RESULT_COLUMNS,
    HarnessConfig,
    _fmt,
    _row,
    _run_cell,
    aggregate,
    build_cells,
    make_learner,
    preset_csv_name,
    rows_to_csv,
    run_preset,
)

EXPECTED_CELL_COUNTS = {
    "main_sweep": 200,
    "ablation": 80,
    "sensitivity_n": 40,
    "sensitivity_gamma": 50,
    "sensitivity_bandwidth": 30,
    "sensitivity_pcov": 15,
    "t_family": 20,
    "walltime": 5,
    "coverage_percentile": 12,
    "detection_curves": 20,
    "cutoff_sweep": 90,
    "evt_suite": 5,
    "decision_rule_eval": 5,
    "nuisance_ablation": 24,
    "multi_treatment": 20,
    "ts_benchmark": 10,
    "rx_benchmark": 30,
    "ihdp_benchmark": 5,
    "a5_table": 200,
    "contraction_diag": 15,
}


def test_every_preset_has_expected_cell_count():
    cfg = HarnessConfig()
    assert set(EXPECTED_CELL_COUNTS) == set(PRESETS)
    for preset in PRESETS:
        assert len(build_cells(preset, cfg)) == EXPECTED_CELL_COUNTS[preset]


def test_build_cells_rejects_unknown_preset():
    with pytest.raises(ValueError):
        build_cells("nope", HarnessConfig())


def test_cells_are_picklable_dicts():
    import pickle

    for preset in PRESETS:
        for cell in build_cells(preset, HarnessConfig()):
            pickle.dumps(cell)


def test_fmt_rules():
    assert _fmt(None) == ""
    assert _fmt("") == ""
    assert _fmt(0.25) == "0.25"
    assert _fmt(float("nan")) == ""
    assert _fmt(1 / 3) == "0.3333333333"
    assert _fmt(5) == "5"


def test_row_rejects_unknown_column():
    with pytest.raises(KeyError):
        _row(not_a_column=1)


def test_rows_to_csv_header_and_order():
    csv = rows_to_csv([_row(preset="x", seed=1, value=2.0)])
    lines = csv.splitlines()
    assert lines[0] == ",".join(RESULT_COLUMNS)
    assert len(lines) == 2


def test_make_learner_labels():
    from robust_adrf.nuisance import Gbt, Lasso, Ridge

    assert isinstance(make_learner("ridge"), Ridge)
    assert isinstance(make_learner("lasso"), Lasso)
    assert make_learner("gbt_absolute") == Gbt(loss="absolute")
    with pytest.raises(ValueError):
        make_learner("mlp")


def test_preset_csv_name():
    assert preset_csv_name("main_sweep") == "verification_results.csv"
    assert preset_csv_name("ablation") == "ablation.csv"


def test_error_row_on_cell_failure():
    cfg = HarnessConfig()
    cfg_d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    cell = dict(kind="standard", preset="main_sweep", dgp="no_such_dgp",
                p=0.1, n=200, seed=0, methods=["standard_dml"], cfg=cfg_d)
    rows, artifacts = _run_cell(cell)
    assert len(rows) == 1
    assert rows[0]["error"].startswith("ValueError")
    assert artifacts == []


def test_run_preset_deterministic_bytes(tmp_path):
    cfg = HarnessConfig(n=200)
    p1 = run_preset("a5_table", cfg, out_dir=str(tmp_path / "r1"), quiet=True)
    p2 = run_preset("a5_table", cfg, out_dir=str(tmp_path / "r2"), quiet=True)
    with open(p1, "rb") as f1, open(p2, "rb") as f2:
        assert f1.read() == f2.read()


def test_run_preset_parallel_matches_serial(tmp_path):
    serial = run_preset("a5_table", HarnessConfig(n=200, jobs=1),
                        out_dir=str(tmp_path / "serial"), quiet=True)
    parallel = run_preset("a5_table", HarnessConfig(n=200, jobs=2),
                          out_dir=str(tmp_path / "parallel"), quiet=True)
    with open(serial, "rb") as f1, open(parallel, "rb") as f2:
        assert f1.read() == f2.read()


def test_run_preset_root_seed_changes_output(tmp_path):
    a = run_preset("a5_table", HarnessConfig(n=200, root_seed=0),
                   out_dir=str(tmp_path / "s0"), quiet=True)
    b = run_preset("a5_table", HarnessConfig(n=200, root_seed=99),
                   out_dir=str(tmp_path / "s99"), quiet=True)
    with open(a) as f1, open(b) as f2:
        assert f1.read() != f2.read()


def test_each_cell_once_per_seed(tmp_path):
    path = run_preset("a5_table", HarnessConfig(n=200),
                      out_dir=str(tmp_path), quiet=True)
    import csv

    with open(path) as f:
        rows = list(csv.DictReader(f))
    keys = [(r["dgp"], r["p_contam"], r["seed"]) for r in rows]
    assert len(keys) == len(set(keys)) == EXPECTED_CELL_COUNTS["a5_table"]


def test_aggregate_roundtrip(tmp_path):
    path = run_preset("a5_table", HarnessConfig(n=200),
                      out_dir=str(tmp_path), quiet=True)
    table = aggregate(path)
    assert "value_mean" in table.columns
    assert len(table) > 0
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        aggregate(str(bad))


def test_harness_config_gnc_overrides():
    cfg = HarnessConfig(gamma=0.5, cutoff_mult=4.0)
    g = cfg.gnc()
    assert g.gamma == 0.5 and g.cutoff_mult == 4.0
    g2 = cfg.gnc(gamma=1.0)
    assert g2.gamma == 1.0 and g2.cutoff_mult == 4.0


def test_standard_cell_emits_metric_rows():
    cfg = HarnessConfig()
    cfg_d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    cell = dict(kind="standard", preset="main_sweep", dgp="sinusoidal",
                p=0.25, n=200, seed=0, methods=["standard_dml", "shift"],
                cfg=cfg_d, dump_curves=True)
    rows, artifacts = _run_cell(cell)
    assert [r["method"] for r in rows] == ["standard_dml", "shift"]
    for r in rows:
        assert r["error"] == ""
        assert float(r["rmse_level"]) >= 0
        assert float(r["walltime_s"]) > 0
        assert r["f1"] != ""  # detection metrics present when contaminated
    assert len(artifacts) == 1
    name, text = artifacts[0]
    assert name == "curves_sinusoidal_p0_25.csv"
    header = text.splitlines()[0].split(",")
    assert header[:3] == ["grid_t", "theta_true", "g_true_centered"]
    assert "g_hat_shift" in header
