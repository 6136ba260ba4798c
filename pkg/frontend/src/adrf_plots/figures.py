"""Figure rendering from benchmark result CSVs.

Each figure kind declares the columns it needs; a mismatch raises
SchemaError before anything is written.  Layout, colors and markers are
fixed per method so the same estimator looks identical across figures,
and no timestamps are embedded so re-rendering is byte-idempotent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

FIGURE_KINDS = ("breakdown", "sensitivity", "evt_panel", "curves",
                "ablation", "detection")

RESULT_COLUMNS = (
    "preset", "dgp", "method", "p_contam", "n", "seed",
    "param", "param_value",
    "rmse_level", "mae_level", "sup_err", "mase_deriv",
    "precision", "recall", "f1", "roc_auc", "pr_auc",
    "value", "walltime_s", "error",
)

# fixed color/marker per method across every figure
METHOD_STYLE = {
    "naive_ll": ("#999999", "x"),
    "standard_dml": ("#1f77b4", "o"),
    "huber_dml": ("#ff7f0e", "s"),
    "quantile_dml": ("#2ca02c", "^"),
    "winsor_dml": ("#d62728", "v"),
    "gnc_fixed": ("#9467bd", "D"),
    "shift": ("#000000", "*"),
}
DPI = 150


class SchemaError(ValueError):
    """Input CSV does not carry the columns a figure kind needs."""


@dataclass
class FigureSpec:
    figure_kind: str
    input_csv: str
    output_path: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.figure_kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind: {self.figure_kind}; "
                             f"expected one of {FIGURE_KINDS}")


def _read(path: str, required: tuple, label: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise SchemaError(f"{label}: input file not found: {path}")
    try:
        df = pd.read_csv(path)
    except Exception as exc:
        raise SchemaError(f"{label}: cannot parse {path}: {exc}") from exc
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(
            f"{label}: {path} is missing columns {missing}; "
            f"expected at least {list(required)}")
    if df.empty:
        raise SchemaError(f"{label}: {path} has no data rows")
    return df


def _style(method: str):
    return METHOD_STYLE.get(method, ("#8c564b", "."))


def _save(fig, out_path: str, vector: bool):
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    if vector:
        fig.savefig(out_path, format="svg",
                    metadata={"Date": None, "Creator": None})
    else:
        fig.savefig(out_path, format="png", dpi=DPI,
                    metadata={"Software": None})
    plt.close(fig)


def _result_means(df: pd.DataFrame, metric: str, keys: list) -> pd.DataFrame:
    ok = df[df["error"].isna()] if df["error"].notna().any() else df
    ok = ok[ok[metric].notna()]
    if ok.empty:
        raise SchemaError(f"no usable rows with metric '{metric}'")
    return ok.groupby(keys, dropna=False)[metric].mean().reset_index()


def _render_breakdown(spec: FigureSpec):
    metric = spec.options.get("metric", "rmse_level")
    df = _read(spec.input_csv, RESULT_COLUMNS, "breakdown")
    if metric not in df.columns:
        raise SchemaError(f"breakdown: unknown metric column '{metric}'")
    means = _result_means(df, metric, ["p_contam", "dgp", "method"])
    levels = sorted(means["p_contam"].unique())
    dgps = sorted(means["dgp"].unique())
    fig, axes = plt.subplots(1, len(levels),
                             figsize=(3.2 * len(levels), 3.4),
                             sharey=True, squeeze=False)
    for ax, p in zip(axes[0], levels):
        sub = means[means["p_contam"] == p]
        for method in sorted(sub["method"].unique()):
            line = sub[sub["method"] == method].set_index("dgp")
            ys = [line[metric].get(d, np.nan) for d in dgps]
            color, marker = _style(method)
            ax.plot(range(len(dgps)), ys, color=color, marker=marker,
                    label=method, linewidth=1.2, markersize=4)
        ax.set_title(f"p = {p:g}")
        ax.set_xticks(range(len(dgps)))
        ax.set_xticklabels(dgps, rotation=45, ha="right", fontsize=7)
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel(metric)
    axes[0][-1].legend(fontsize=7)
    fig.tight_layout()
    return fig


def _render_sensitivity(spec: FigureSpec):
    metric = spec.options.get("metric", "rmse_level")
    df = _read(spec.input_csv, RESULT_COLUMNS, "sensitivity")
    df = df[df["param"].notna()]
    if df.empty:
        raise SchemaError("sensitivity: no rows with a 'param' value; "
                          "expected a sensitivity-preset results CSV")
    means = _result_means(df, metric, ["dgp", "method", "param",
                                       "param_value"])
    param = means["param"].iloc[0]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for (d, m), sub in means.groupby(["dgp", "method"]):
        sub = sub.sort_values("param_value")
        color, marker = _style(m)
        ax.plot(pd.to_numeric(sub["param_value"], errors="coerce"),
                sub[metric], color=color, marker=marker,
                label=f"{m} / {d}", linewidth=1.2, markersize=4)
    ax.set_xlabel(param)
    ax.set_ylabel(metric)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _sibling(path: str, prefix: str) -> str:
    """Locate a companion tail-diagnostic CSV next to the input file."""
    base = os.path.basename(path)
    for known in ("residuals_", "mean_excess_", "stability_",
                  "return_levels_", "tail_report_"):
        if base.startswith(known):
            tag = base[len(known):]
            return os.path.join(os.path.dirname(path), prefix + tag)
    raise SchemaError(
        "evt_panel: input must be one of the tail-diagnostic CSVs "
        "(residuals_<dgp>.csv and siblings)")


def _render_evt_panel(spec: FigureSpec):
    res = _read(_sibling(spec.input_csv, "residuals_"),
                ("idx", "t", "abs_residual"), "evt_panel")
    mef = _read(_sibling(spec.input_csv, "mean_excess_"),
                ("threshold", "mean_excess"), "evt_panel")
    stab = _read(_sibling(spec.input_csv, "stability_"),
                 ("threshold", "xi", "modified_scale"), "evt_panel")
    rl = _read(_sibling(spec.input_csv, "return_levels_"),
               ("exceed_prob", "level", "ci_low", "ci_high"), "evt_panel")

    fig, axes = plt.subplots(2, 2, figsize=(7.2, 5.4))
    r = res["abs_residual"].to_numpy()
    ax = axes[0][0]
    ax.hist(r, bins=40, color="#1f77b4", alpha=0.8)
    mad = float(np.median(np.abs(r - np.median(r))))
    for mult in (3.0, 5.0):
        ax.axvline(np.median(r) + mult * mad, color="#d62728",
                   linestyle="--", linewidth=1.0)
    ax.set_title("absolute residuals with MAD cutoffs", fontsize=8)

    ax = axes[0][1]
    ax.plot(mef["threshold"], mef["mean_excess"], color="#2ca02c",
            marker=".", linewidth=1.2)
    ax.set_title("mean excess vs threshold", fontsize=8)

    ax = axes[1][0]
    ax.plot(stab["threshold"], stab["xi"], color="#9467bd",
            marker=".", linewidth=1.2)
    ax.axhline(0.0, color="#999999", linewidth=0.8)
    ax.set_title("tail shape stability", fontsize=8)

    ax = axes[1][1]
    p = rl["exceed_prob"].to_numpy()
    ax.fill_between(p, rl["ci_low"], rl["ci_high"], color="#ff7f0e",
                    alpha=0.3)
    ax.plot(p, rl["level"], color="#ff7f0e", marker="o", linewidth=1.2)
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_title("return levels with 95% CI", fontsize=8)
    for row in axes:
        for a in row:
            a.grid(alpha=0.3)
            a.tick_params(labelsize=7)
    fig.tight_layout()
    return fig


def _render_curves(spec: FigureSpec):
    df = _read(spec.input_csv, ("grid_t", "theta_true", "g_true_centered"),
               "curves")
    hat_cols = [c for c in df.columns if c.startswith("g_hat_")]
    if not hat_cols:
        raise SchemaError("curves: expected at least one g_hat_<method> "
                          "column")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(df["grid_t"], df["g_true_centered"], color="#17becf",
            linewidth=2.0, label="truth")
    for c in hat_cols:
        method = c[len("g_hat_"):]
        color, marker = _style(method)
        ax.plot(df["grid_t"], df[c], color=color, linewidth=1.2,
                marker=marker, markersize=3, markevery=4, label=method)
    ax.set_xlabel("treatment level")
    ax.set_ylabel("centered response curve")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _render_ablation(spec: FigureSpec):
    metric = spec.options.get("metric", "rmse_level")
    df = _read(spec.input_csv, RESULT_COLUMNS, "ablation")
    means = _result_means(df, metric, ["dgp", "method", "p_contam"])
    dgps = sorted(means["dgp"].unique())
    fig, axes = plt.subplots(1, len(dgps), figsize=(3.4 * len(dgps), 3.4),
                             sharey=True, squeeze=False)
    for ax, d in zip(axes[0], dgps):
        sub = means[means["dgp"] == d]
        for method in sorted(sub["method"].unique()):
            line = sub[sub["method"] == method].sort_values("p_contam")
            color, marker = _style(method)
            ax.plot(line["p_contam"], line[metric], color=color,
                    marker=marker, label=method, linewidth=1.2,
                    markersize=4)
        ax.set_title(d, fontsize=9)
        ax.set_xlabel("contamination fraction")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel(metric)
    axes[0][-1].legend(fontsize=7)
    fig.tight_layout()
    return fig


def _render_detection(spec: FigureSpec):
    df = _read(spec.input_csv, RESULT_COLUMNS, "detection")
    df = df[df["f1"].notna()]
    if df.empty:
        raise SchemaError("detection: no rows with detection scores (f1); "
                          "expected a contaminated-run results CSV")
    means = df.groupby(["dgp", "method"])[["precision", "recall",
                                           "f1"]].mean().reset_index()
    dgps = sorted(means["dgp"].unique())
    methods = sorted(means["method"].unique())
    fig, ax = plt.subplots(figsize=(1.4 * len(dgps) + 2.4, 3.6))
    width = 0.8 / len(methods)
    for j, m in enumerate(methods):
        sub = means[means["method"] == m].set_index("dgp")
        ys = [sub["f1"].get(d, np.nan) for d in dgps]
        color, _ = _style(m)
        ax.bar(np.arange(len(dgps)) + j * width, ys, width, color=color,
               label=m)
    ax.set_xticks(np.arange(len(dgps)) + 0.4 - width / 2)
    ax.set_xticklabels(dgps, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("matched-k F1")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3, axis="y")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "breakdown": _render_breakdown,
    "sensitivity": _render_sensitivity,
    "evt_panel": _render_evt_panel,
    "curves": _render_curves,
    "ablation": _render_ablation,
    "detection": _render_detection,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path.

    The output file is only written after the input validates, so a
    schema error never leaves a partial image behind.
    """
    fig = _RENDERERS[spec.figure_kind](spec)
    _save(fig, spec.output_path, bool(spec.options.get("vector")))
    return spec.output_path
