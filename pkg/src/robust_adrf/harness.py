"""Experiment presets, deterministic CSV persistence, and aggregation.

Each preset expands into a list of independent cells (one dataset plus a
set of second-stage fits); cells run serially or across a process pool
and always produce the same canonical row ordering, so reruns are
byte-identical and parallel runs match serial ones.  Cell failures are
recorded as error rows and the run continues.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dgp
from .adrf import (
    METHODS,
    curve_residuals,
    fit_adrf,
    fit_adrf_multid,
    make_grid,
    raw_residualized,
)
from .evt import compute_tail_report, decision_rule
from .extensions import rxlearner_fit, ts_fit
from .metrics import (
    a5_failure_rate,
    detection_at_matched_k,
    rank_curves,
    shape_metrics,
    surface_rmse,
)
from .nuisance import Gbt, Lasso, Ridge, crossfit_residualize
from .seeding import child_rng
from .smoothers import GncConfig, silverman_bandwidth

PRESETS = (
    "main_sweep",
    "ablation",
    "sensitivity_n",
    "sensitivity_gamma",
    "sensitivity_bandwidth",
    "sensitivity_pcov",
    "t_family",
    "walltime",
    "coverage_percentile",
    "detection_curves",
    "cutoff_sweep",
    "evt_suite",
    "decision_rule_eval",
    "nuisance_ablation",
    "multi_treatment",
    "ts_benchmark",
    "rx_benchmark",
    "ihdp_benchmark",
    "a5_table",
    "contraction_diag",
)

RESULT_COLUMNS = (
    "preset", "dgp", "method", "p_contam", "n", "seed",
    "param", "param_value",
    "rmse_level", "mae_level", "sup_err", "mase_deriv",
    "precision", "recall", "f1", "roc_auc", "pr_auc",
    "value", "walltime_s", "error",
)

MAIN_P_LEVELS = (0.0, 0.05, 0.15, 0.25)
MAIN_DGPS = tuple(k.label for k in dgp.MAIN_KINDS)
NONUNIFORM_METHODS = ("winsor_dml", "gnc_fixed", "shift")

LEARNER_LABELS = ("ridge", "lasso", "gbt_squared", "gbt_absolute")


@dataclass(frozen=True)
class HarnessConfig:
    """Run-wide knobs; every field can be overridden from the CLI/config file."""

    root_seed: int = 0
    n: int | None = None  # overrides each preset's default sample size
    jobs: int = 1
    gamma: float = 0.2
    cutoff_mult: float = 3.0
    mad_scale_factor: float = 1.0
    learner: str = "gbt_squared"
    crossfit_k: int = 3
    bootstrap_b: int = 50
    grid_points: int = 40

    def gnc(self, **overrides) -> GncConfig:
        base = GncConfig(gamma=self.gamma, cutoff_mult=self.cutoff_mult,
                         mad_scale_factor=self.mad_scale_factor)
        return replace(base, **overrides) if overrides else base


def make_learner(label: str):
    if label == "ridge":
        return Ridge()
    if label == "lasso":
        return Lasso()
    if label == "gbt_squared":
        return Gbt(loss="squared")
    if label == "gbt_absolute":
        return Gbt(loss="absolute")
    raise ValueError(f"unknown learner label: {label!r}")


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        if not np.isfinite(v):
            return ""
        return f"{v:.10g}"
    return str(v)


def _row(**kv) -> dict:
    out = {c: "" for c in RESULT_COLUMNS}
    for k, v in kv.items():
        if k not in out:
            raise KeyError(f"unknown result column: {k}")
        out[k] = v
    return out


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for r in rows:
        lines.append(",".join(_fmt(r[c]) for c in RESULT_COLUMNS))
    return "\n".join(lines) + "\n"


def _sort_key(r: dict):
    return tuple(_fmt(r[c]) for c in RESULT_COLUMNS)


# ---------------------------------------------------------------------------
# cell execution
# ---------------------------------------------------------------------------

def _fit_rows(cell, ds, res, methods, cfg: HarnessConfig, fit_kwargs=None,
              anneal_overrides=None):
    """Fit each method on one residualized dataset and emit metric rows."""
    fit_kwargs = fit_kwargs or {}
    gnc = cfg.gnc(**(anneal_overrides or {}))
    truth_grid = None
    rows = []
    for method in methods:
        base = dict(preset=cell["preset"], dgp=ds.kind.label, method=method,
                    p_contam=ds.p_contam, n=ds.n, seed=cell["seed"],
                    param=cell.get("param", ""),
                    param_value=cell.get("param_value", ""))
        try:
            use = raw_residualized(ds) if method == "naive_ll" else res
            t0 = time.perf_counter()
            est = fit_adrf(use, method, cfg=gnc,
                           grid_points=cfg.grid_points, **fit_kwargs)
            wall = time.perf_counter() - t0
            if truth_grid is None:
                truth_grid = ds.true_curve(est.grid)
            sm = shape_metrics(est.g_curve, truth_grid, est.grid)
            base.update(rmse_level=sm.rmse_level, mae_level=sm.mae_level,
                        sup_err=sm.sup_err, mase_deriv=sm.mase_deriv,
                        walltime_s=wall)
            if ds.p_contam > 0:
                det = detection_at_matched_k(est.sample_scores,
                                             ds.outlier_mask, ds.p_contam)
                if det.defined:
                    base.update(precision=det.precision, recall=det.recall,
                                f1=det.f1)
                roc, pr = rank_curves(est.sample_scores, ds.outlier_mask)
                base.update(roc_auc=roc, pr_auc=pr)
            rows.append((_row(**base), est))
        except Exception as exc:  # noqa: BLE001 - error rows by contract
            base.update(error=f"{type(exc).__name__}: {exc}")
            rows.append((_row(**base), None))
    return rows


def _curve_artifact(ds, fits) -> tuple[str, str]:
    """Seed-0 curve dump: truth plus each method's recovered curve."""
    grid = None
    cols = {}
    for row, est in fits:
        if est is None:
            continue
        grid = est.grid
        cols[row["method"]] = est.g_curve - est.g_curve.mean()
    if grid is None:
        return None
    truth = ds.true_curve(grid)
    header = ["grid_t", "theta_true", "g_true_centered"]
    data = [grid, ds.true_curve(grid), truth - truth.mean()]
    for m in METHODS:
        if m in cols:
            header.append(f"g_hat_{m}")
            data.append(cols[m])
    lines = [",".join(header)]
    for i in range(len(grid)):
        lines.append(",".join(_fmt(float(c[i])) for c in data))
    p_tag = _fmt(ds.p_contam).replace(".", "_")
    name = f"curves_{ds.kind.label}_p{p_tag}.csv"
    return name, "\n".join(lines) + "\n"


def _run_cell(cell: dict):
    """Execute one cell; returns (rows, artifacts)."""
    cfg = HarnessConfig(**cell["cfg"])
    kind_label = cell.get("dgp", "")
    seed = cfg.root_seed + cell["seed"]
    artifacts = []
    try:
        ck = cell["kind"]
        if ck == "standard":
            ds = dgp.generate(dgp.parse_kind(kind_label), n=cell["n"],
                              p_contam=cell["p"], seed=seed,
                              p_cov=cell.get("p_cov", 5))
            learner = make_learner(cell.get("learner", cfg.learner))
            res = crossfit_residualize(ds, learner, K=cfg.crossfit_k, seed=seed)
            fits = _fit_rows(cell, ds, res, cell["methods"], cfg,
                             fit_kwargs=cell.get("fit_kwargs"),
                             anneal_overrides=cell.get("gnc"))
            if cell.get("dump_curves") and cell["seed"] == 0:
                art = _curve_artifact(ds, fits)
                if art:
                    artifacts.append(art)
            return [r for r, _ in fits], artifacts
        if ck == "a5":
            ds = dgp.generate(dgp.parse_kind(kind_label), n=cell["n"],
                              p_contam=cell["p"], seed=seed)
            h = silverman_bandwidth(ds.t)
            grid = make_grid(ds.t, cfg.grid_points)
            frac = a5_failure_rate(ds, grid, h)
            return [_row(preset=cell["preset"], dgp=kind_label, method="",
                         p_contam=cell["p"], n=ds.n, seed=cell["seed"],
                         param="a5_fail_frac", value=frac)], artifacts
        if ck == "contraction":
            ds = dgp.generate(dgp.parse_kind(kind_label), n=cell["n"],
                              p_contam=cell["p"], seed=seed)
            res = crossfit_residualize(ds, make_learner(cfg.learner),
                                       K=cfg.crossfit_k, seed=seed)
            est = fit_adrf(res, "shift", cfg=cfg.gnc(),
                           grid_points=cfg.grid_points)
            by_mu = {}
            for mu, ratio in est.contraction:
                by_mu.setdefault(mu, []).append(ratio)
            rows = []
            for mu in sorted(by_mu, reverse=True):
                rows.append(_row(preset=cell["preset"], dgp=kind_label,
                                 method="shift", p_contam=cell["p"], n=ds.n,
                                 seed=cell["seed"], param="mu",
                                 param_value=mu,
                                 value=float(np.median(by_mu[mu]))))
            return rows, artifacts
        if ck == "coverage":
            return _coverage_cell(cell, cfg, seed), artifacts
        if ck == "multi":
            return _multi_cell(cell, cfg, seed), artifacts
        if ck == "ts":
            return _ts_cell(cell, cfg, seed), artifacts
        if ck == "rx":
            ds = dgp.generate_binary(n=cell["n"], p_contam=cell["p"], seed=seed)
            robust = cell["robust"]
            t0 = time.perf_counter()
            est = rxlearner_fit(ds, robust=robust, seed=seed)
            return [_row(preset=cell["preset"], dgp="binary",
                         method="rx_robust" if robust else "rx_vanilla",
                         p_contam=cell["p"], n=ds.n, seed=cell["seed"],
                         rmse_level=est.rmse_vs_truth,
                         walltime_s=time.perf_counter() - t0)], artifacts
        if ck == "evt":
            return _evt_cell(cell, cfg, seed)
        if ck == "decision":
            return _decision_cell(cell, cfg, seed)
        raise ValueError(f"unknown cell kind: {ck}")
    except Exception as exc:  # noqa: BLE001 - error rows by contract
        return [_row(preset=cell["preset"], dgp=kind_label,
                     method=cell.get("method", ""),
                     p_contam=cell.get("p", ""), n=cell.get("n", ""),
                     seed=cell["seed"],
                     error=f"{type(exc).__name__}: {exc}")], artifacts


def _coverage_cell(cell, cfg: HarnessConfig, seed: int):
    kind = dgp.parse_kind(cell["dgp"])
    ds = dgp.generate(kind, n=cell["n"], p_contam=cell["p"], seed=seed)
    learner = make_learner(cfg.learner)
    res = crossfit_residualize(ds, learner, K=cfg.crossfit_k, seed=seed)
    est = fit_adrf(res, "shift", cfg=cfg.gnc(),
                   grid_points=cfg.grid_points,
                   h_scale=cell.get("h_scale", 1.0))
    grid = est.grid
    truth = ds.true_curve(grid)
    truth_c = truth - truth.mean()
    rng = child_rng(seed, "bootstrap", cell["dgp"], round(cell["p"] * 100))
    curves = []
    for b in range(cfg.bootstrap_b):
        idx = rng.integers(0, ds.n, size=ds.n)
        ds_b = dgp.Dataset(x=ds.x[idx], t=ds.t[idx], y=ds.y[idx],
                           outlier_mask=ds.outlier_mask[idx], kind=kind,
                           p_contam=ds.p_contam, seed=seed,
                           jumps=ds.jumps[idx])
        res_b = crossfit_residualize(ds_b, learner, K=cfg.crossfit_k, seed=b)
        est_b = fit_adrf(res_b, "shift", cfg=cfg.gnc(),
                         grid_points=cfg.grid_points,
                         h_scale=cell.get("h_scale", 1.0))
        curves.append(np.interp(grid, est_b.grid,
                                est_b.g_curve - est_b.g_curve.mean()))
    lo, hi = np.percentile(np.asarray(curves), [2.5, 97.5], axis=0)
    coverage = float(np.mean((truth_c >= lo) & (truth_c <= hi)))
    return [_row(preset=cell["preset"], dgp=cell["dgp"], method="shift",
                 p_contam=cell["p"], n=ds.n, seed=cell["seed"],
                 param="coverage", param_value="percentile",
                 value=coverage)]


def _multi_cell(cell, cfg: HarnessConfig, seed: int):
    d = cell["d"]
    ds = dgp.generate_multi(d, n=cell["n"], p_contam=cell["p"], seed=seed)
    res = crossfit_residualize(ds, make_learner(cfg.learner),
                               K=cfg.crossfit_k, seed=seed)
    rows = []
    for method in cell["methods"]:
        t0 = time.perf_counter()
        est = fit_adrf_multid(res, method, cfg=cfg.gnc())
        wall = time.perf_counter() - t0
        mesh = np.meshgrid(*est.axes, indexing="ij")
        truth = dgp.true_theta_multi(d, *mesh)
        rows.append(_row(preset=cell["preset"], dgp=f"multi_d{d}",
                         method=method, p_contam=cell["p"], n=ds.n,
                         seed=cell["seed"], param="d", param_value=d,
                         rmse_level=surface_rmse(est.alpha, truth),
                         walltime_s=wall))
    return rows


def _ts_cell(cell, cfg: HarnessConfig, seed: int):
    ds = dgp.generate_ts(n=cell["n"], rho=cell["rho"],
                         p_contam=cell["p"], seed=seed)
    rows = []
    for method in cell["methods"]:
        t0 = time.perf_counter()
        est = ts_fit(ds, method, cfg=cfg.gnc(),
                     learner=make_learner(cfg.learner), seed=seed,
                     grid_points=cfg.grid_points)
        wall = time.perf_counter() - t0
        truth = dgp.true_theta(dgp.SINUSOIDAL, est.grid)
        sm = shape_metrics(est.g_curve, truth, est.grid)
        base = dict(preset=cell["preset"], dgp="timeseries", method=method,
                    p_contam=cell["p"], n=ds.n, seed=cell["seed"],
                    param="rho", param_value=cell["rho"],
                    rmse_level=sm.rmse_level, mae_level=sm.mae_level,
                    sup_err=sm.sup_err, mase_deriv=sm.mase_deriv,
                    walltime_s=wall)
        if cell["p"] > 0:
            det = detection_at_matched_k(est.sample_scores, ds.outlier_mask,
                                         cell["p"])
            if det.defined:
                base.update(precision=det.precision, recall=det.recall,
                            f1=det.f1)
        rows.append(_row(**base))
    return rows


def _tail_report_for(kind_label: str, cfg: HarnessConfig, seed: int,
                     n: int, p: float):
    """Fit the fixed-cutoff annealed estimator and diagnose its residual tail."""
    ds = dgp.generate(dgp.parse_kind(kind_label), n=n, p_contam=p, seed=seed)
    res = crossfit_residualize(ds, make_learner(cfg.learner),
                               K=cfg.crossfit_k, seed=seed)
    est = fit_adrf(res, "gnc_fixed", cfg=cfg.gnc(),
                   grid_points=cfg.grid_points)
    abs_res = np.abs(curve_residuals(est, res.t_raw, res.y_tilde))
    report = compute_tail_report(abs_res, t_raw=res.t_raw, seed=seed)
    return ds, abs_res, report


TAIL_CSV_HEADER = "dgp,technique,estimate,ci_low,ci_high,detail\n"


def _tail_rows_csv(kind_label: str, report) -> str:
    xi_m, s_m = report.gpd_mle
    xi_p, s_p = report.gpd_pwm
    xi_g, s_g, mu_g = report.gev
    mef_slope = ""
    if len(report.mef) >= 2:
        us = np.array([u for u, _ in report.mef])
        es = np.array([e for _, e in report.mef])
        mef_slope = _fmt(float(np.polyfit(us, es, 1)[0]))
    stab_xi = ""
    if report.stability:
        stab_xi = _fmt(float(np.median([x for _, x, _ in report.stability])))
    rl = report.return_levels[0] if report.return_levels else None
    lines = [
        f"{kind_label},hill,{_fmt(report.hill_alpha)},,,k={report.tail_n}",
        f"{kind_label},gpd_mle,{_fmt(xi_m)},,,sigma={_fmt(s_m)}",
        f"{kind_label},gpd_pwm,{_fmt(xi_p)},,,sigma={_fmt(s_p)}",
        f"{kind_label},gev,{_fmt(xi_g)},,,sigma={_fmt(s_g)};mu={_fmt(mu_g)}",
        f"{kind_label},mean_excess,{mef_slope},,,slope over thresholds",
        (f"{kind_label},return_level,{_fmt(rl[1])},{_fmt(rl[2])},{_fmt(rl[3])},"
         f"p={_fmt(rl[0])};stability_xi={stab_xi}" if rl else
         f"{kind_label},return_level,,,,stability_xi={stab_xi}"),
    ]
    return "\n".join(lines) + "\n"


def _evt_cell(cell, cfg: HarnessConfig, seed: int):
    kind_label = cell["dgp"]
    ds, abs_res, report = _tail_report_for(kind_label, cfg, seed,
                                           cell["n"], cell["p"])
    artifacts = [(f"tail_report_{kind_label}.csv",
                  TAIL_CSV_HEADER + _tail_rows_csv(kind_label, report))]
    res_lines = ["idx,t,abs_residual"]
    for i in range(ds.n):
        res_lines.append(f"{i},{_fmt(float(ds.t[i]))},{_fmt(float(abs_res[i]))}")
    artifacts.append((f"residuals_{kind_label}.csv",
                      "\n".join(res_lines) + "\n"))
    mef_lines = ["threshold,mean_excess"] + \
        [f"{_fmt(u)},{_fmt(e)}" for u, e in report.mef]
    artifacts.append((f"mean_excess_{kind_label}.csv",
                      "\n".join(mef_lines) + "\n"))
    stab_lines = ["threshold,xi,modified_scale"] + \
        [f"{_fmt(u)},{_fmt(x)},{_fmt(s)}" for u, x, s in report.stability]
    artifacts.append((f"stability_{kind_label}.csv",
                      "\n".join(stab_lines) + "\n"))
    rl_lines = ["exceed_prob,level,ci_low,ci_high"] + \
        [f"{_fmt(p)},{_fmt(l)},{_fmt(lo)},{_fmt(hi)}"
         for p, l, lo, hi in report.return_levels]
    artifacts.append((f"return_levels_{kind_label}.csv",
                      "\n".join(rl_lines) + "\n"))
    rows = []
    for tech, val in (("hill_alpha", report.hill_alpha),
                      ("gpd_mle_xi", report.gpd_mle[0]),
                      ("gpd_pwm_xi", report.gpd_pwm[0]),
                      ("gev_xi", report.gev[0]),
                      ("gamma_ctc", report.gamma_ctc),
                      ("threshold", report.threshold)):
        rows.append(_row(preset=cell["preset"], dgp=kind_label,
                         method="gnc_fixed", p_contam=cell["p"], n=cell["n"],
                         seed=cell["seed"], param=tech, value=val))
    return rows, artifacts


def _decision_cell(cell, cfg: HarnessConfig, seed: int):
    kind_label = cell["dgp"]
    _, _, report = _tail_report_for(kind_label, cfg, seed,
                                    cell["n"], cell["p"])
    rec = decision_rule(report)
    art = (f"decision_{kind_label}.csv",
           "dgp,domain_label,t_dependence,recommended_method,ambiguous\n"
           f"{kind_label},{rec.domain_label},{rec.t_dependence},"
           f"{rec.recommended_method},{int(rec.ambiguous)}\n")
    row = _row(preset=cell["preset"], dgp=kind_label, method="",
               p_contam=cell["p"], n=cell["n"], seed=cell["seed"],
               param="recommendation", param_value=rec.recommended_method,
               value=float(rec.ambiguous))
    return [row], [art]


def _walltime_cells(cfg_d: dict, n: int):
    return [dict(kind="standard", preset="walltime", dgp="sinusoidal",
                 p=0.25, n=n, seed=s, methods=list(METHODS), cfg=cfg_d)
            for s in range(5)]


# ---------------------------------------------------------------------------
# preset cell grids
# ---------------------------------------------------------------------------

def build_cells(preset: str, cfg: HarnessConfig) -> list[dict]:
    """Expand one preset into its full list of independent cells."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset: {preset}")
    cfg_d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    n = cfg.n or 800
    cells = []

    def std(dgp_label, p, seed, methods, nn=None, **extra):
        cells.append(dict(kind="standard", preset=preset, dgp=dgp_label,
                          p=p, n=nn or n, seed=seed, methods=list(methods),
                          cfg=cfg_d, **extra))

    if preset == "main_sweep":
        for label in MAIN_DGPS:
            for p in MAIN_P_LEVELS:
                for s in range(10):
                    std(label, p, s, METHODS, dump_curves=True)
    elif preset == "ablation":
        for label in ("parabola", "sinusoidal_region"):
            for p in MAIN_P_LEVELS:
                for s in range(10):
                    std(label, p, s, ("gnc_fixed", "shift"))
    elif preset == "sensitivity_n":
        for label in ("sinusoidal_region", "sinusoidal_heavytail"):
            for nn in (200, 800, 2000, 5000):
                for s in range(5):
                    std(label, 0.25, s,
                        ("standard_dml", "huber_dml", "quantile_dml",
                         "gnc_fixed", "shift"),
                        nn=nn, param="n", param_value=nn)
    elif preset == "sensitivity_gamma":
        for label in ("sinusoidal_region", "sinusoidal_heavytail"):
            for g in (0.05, 0.1, 0.2, 0.5, 1.0):
                for s in range(5):
                    std(label, 0.25, s, ("shift",), param="gamma",
                        param_value=g, gnc=dict(gamma=g))
    elif preset == "sensitivity_bandwidth":
        for hs in (0.5, 0.75, 1.0, 1.25, 1.5, 2.0):
            for s in range(5):
                std("sinusoidal_region", 0.25, s, ("standard_dml", "shift"),
                    param="h_scale", param_value=hs,
                    fit_kwargs=dict(h_scale=hs))
    elif preset == "sensitivity_pcov":
        for pc in (5, 20, 50):
            for s in range(5):
                std("sinusoidal_region", 0.25, s, ("standard_dml", "shift"),
                    param="p_cov", param_value=pc, p_cov=pc)
    elif preset == "t_family":
        for nu in (2, 3, 5, 10):
            for s in range(5):
                std(f"t_family_nu{nu}", 0.15, s, METHODS,
                    param="nu", param_value=nu)
    elif preset == "walltime":
        cells = _walltime_cells(cfg_d, n)
    elif preset == "coverage_percentile":
        for label in ("sinusoidal", "sinusoidal_region"):
            for p in (0.0, 0.25):
                for s in range(3):
                    cells.append(dict(kind="coverage", preset=preset,
                                      dgp=label, p=p, n=n, seed=s, cfg=cfg_d))
    elif preset == "detection_curves":
        for label in MAIN_DGPS:
            if label == "parabola":
                continue
            for s in range(5):
                std(label, 0.25, s, NONUNIFORM_METHODS)
    elif preset == "cutoff_sweep":
        for label in ("sinusoidal", "sinusoidal_region", "sinusoidal_heavytail"):
            for c in (2.0, 2.5, 3.0, 3.5, 4.0, 5.0):
                for s in range(5):
                    std(label, 0.25, s, ("shift",), param="cutoff_mult",
                        param_value=c, gnc=dict(cutoff_mult=c))
    elif preset == "evt_suite":
        for label in MAIN_DGPS:
            cells.append(dict(kind="evt", preset=preset, dgp=label,
                              p=0.25, n=n, seed=0, cfg=cfg_d))
    elif preset == "decision_rule_eval":
        for label in MAIN_DGPS:
            cells.append(dict(kind="decision", preset=preset, dgp=label,
                              p=0.25, n=n, seed=0, cfg=cfg_d))
    elif preset == "nuisance_ablation":
        for label in ("sinusoidal", "sinusoidal_region"):
            for lr in LEARNER_LABELS:
                for s in range(3):
                    std(label, 0.25, s, ("standard_dml", "huber_dml", "shift"),
                        param="learner", param_value=lr, learner=lr)
    elif preset == "multi_treatment":
        for d in (2, 3):
            for p in (0.0, 0.15):
                for s in range(5):
                    cells.append(dict(kind="multi", preset=preset, d=d,
                                      p=p, n=n, seed=s, cfg=cfg_d,
                                      methods=["standard_dml", "shift"]))
    elif preset == "ts_benchmark":
        for p in (0.0, 0.1):
            for s in range(5):
                cells.append(dict(kind="ts", preset=preset, rho=0.7, p=p,
                                  n=cfg.n or 1000, seed=s, cfg=cfg_d,
                                  methods=["standard_dml", "huber_dml", "shift"]))
    elif preset == "rx_benchmark":
        for p in (0.0, 0.1, 0.2):
            for robust in (False, True):
                for s in range(5):
                    cells.append(dict(kind="rx", preset=preset, p=p,
                                      n=cfg.n or 2000, seed=s, robust=robust,
                                      cfg=cfg_d))
    elif preset == "ihdp_benchmark":
        for s in range(5):
            std("ihdp_like", 0.15, s, METHODS, nn=cfg.n or 747)
    elif preset == "a5_table":
        for label in MAIN_DGPS:
            for p in MAIN_P_LEVELS:
                for s in range(10):
                    cells.append(dict(kind="a5", preset=preset, dgp=label,
                                      p=p, n=n, seed=s, cfg=cfg_d))
    elif preset == "contraction_diag":
        for label in ("sinusoidal", "sinusoidal_heavytail", "sinusoidal_region"):
            for s in range(5):
                cells.append(dict(kind="contraction", preset=preset,
                                  dgp=label, p=0.25, n=n, seed=s, cfg=cfg_d))
    return cells


def preset_csv_name(preset: str) -> str:
    return "verification_results.csv" if preset == "main_sweep" else f"{preset}.csv"


def run_preset(preset: str, cfg: HarnessConfig = HarnessConfig(),
               out_dir: str = "results", quiet: bool = False) -> str:
    """Run every cell of a preset and write its CSV(s); returns the CSV path."""
    import os

    cells = build_cells(preset, cfg)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    rows = []
    artifacts = {}
    for rlist, arts in results:
        rows.extend(rlist)
        for name, text in arts:
            artifacts[name] = text
    rows.sort(key=_sort_key)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, preset_csv_name(preset))
    with open(path, "w", encoding="utf-8") as f:
        f.write(rows_to_csv(rows))
    for name in sorted(artifacts):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
            f.write(artifacts[name])
    if not quiet:
        n_err = sum(1 for r in rows if r["error"])
        print(f"{preset}: {len(rows)} rows -> {path}"
              + (f" ({n_err} error rows)" if n_err else ""))
    return path


def aggregate(csv_path: str) -> "object":
    """Mean/std/min/max pivot per (preset, dgp, method, p, param) cell."""
    import pandas as pd

    df = pd.read_csv(csv_path)
    missing = [c for c in RESULT_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"schema mismatch, missing columns: {missing}")
    keys = ["preset", "dgp", "method", "p_contam", "param", "param_value"]
    for k in keys:
        df[k] = df[k].fillna("")
    metrics_cols = ["rmse_level", "mae_level", "sup_err", "mase_deriv",
                    "precision", "recall", "f1", "roc_auc", "pr_auc",
                    "value", "walltime_s"]
    present = [c for c in metrics_cols if df[c].notna().any()]
    agg = df.groupby(keys, dropna=False)[present].agg(
        ["mean", "std", "min", "max", "count"])
    agg.columns = ["_".join(c) for c in agg.columns]
    return agg.reset_index()
