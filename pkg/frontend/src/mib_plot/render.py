"""Turn benchmark CSV artifacts into figures.

Four figure kinds, keyed by the experiment that produced the CSVs:

  fig2  training traces: raw estimates (light), smoothed (dark), true-MI staircase
  fig3  bias / variance / MSE versus MI, one line per estimator, panel per batch size
  fig4  gradient-MSE curves plus the best-alpha heatmap over (batch size, MI)
  fig7  bias-variance scatter comparing interpolation schemes

This package is deliberately decoupled from the estimator library: it consumes
only the documented CSV schemas and the run manifest, so it works against any
implementation that writes the same files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

FIGURES = ("fig2", "fig3", "fig4", "fig7")

REQUIRED_COLUMNS = {
    "fig2": ["step", "estimate", "smoothed", "objective", "target_mi", "clamp_count"],
    "fig3": ["estimator", "alpha", "batch_size", "target_mi", "mean", "stderr",
             "variance", "bias", "mse", "n_batches"],
    "fig4_curves": ["estimator", "alpha", "batch_size", "target_mi", "grad_mse",
                    "grad_mse_stderr", "n_reps"],
    "fig4_best": ["batch_size", "target_mi", "best_alpha", "best_grad_mse"],
    "fig7": ["mode", "alpha", "batch_size", "target_mi", "mean", "stderr",
             "variance", "bias", "mse", "n_batches"],
}


class RenderError(Exception):
    pass


class SchemaError(RenderError):
    def __init__(self, path, missing):
        super().__init__(f"{path}: missing required columns {sorted(missing)}")
        self.missing = sorted(missing)


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    inputs: tuple[Path, ...]
    output: Path
    fmt: str = "png"

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise RenderError(f"unknown figure id {self.figure!r}")
        if self.fmt not in ("png", "svg"):
            raise RenderError(f"unknown format {self.fmt!r}")


def _load(path: Path, schema: str) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise RenderError(f"input file does not exist: {path}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise RenderError(f"input file is empty: {path}") from None
    if df.empty:
        raise RenderError(f"input file has no data rows: {path}")
    missing = set(REQUIRED_COLUMNS[schema]) - set(df.columns)
    if missing:
        raise SchemaError(path, missing)
    return df


def _trace_title(path: Path) -> str:
    # fig2_<dataset>_<estimator>_<critic>_<hash>.csv
    parts = Path(path).stem.split("_")
    return " ".join(parts[1:-1]) if len(parts) > 2 else Path(path).stem


def build_fig2(inputs) -> plt.Figure:
    frames = [(p, _load(p, "fig2")) for p in inputs]
    n = len(frames)
    cols = min(4, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3 * rows),
                             squeeze=False, sharey=True)
    for ax, (path, df) in zip(axes.ravel(), frames):
        ax.plot(df["step"], df["estimate"], color="tab:blue", alpha=0.25, lw=0.7,
                label="estimate")
        ax.plot(df["step"], df["smoothed"], color="tab:blue", lw=1.8, label="smoothed")
        ax.plot(df["step"], df["target_mi"], color="black", ls="--", lw=1.2,
                drawstyle="steps-post", label="true MI")
        ax.set_title(_trace_title(path), fontsize=9)
        ax.set_xlabel("step")
    axes.ravel()[0].set_ylabel("MI estimate (nats)")
    axes.ravel()[0].legend(fontsize=7)
    for ax in axes.ravel()[n:]:
        ax.axis("off")
    fig.tight_layout()
    return fig


def build_fig3(inputs) -> plt.Figure:
    df = pd.concat([_load(p, "fig3") for p in inputs], ignore_index=True)
    batch_sizes = sorted(df["batch_size"].unique())
    metrics = ["bias", "variance", "mse"]
    fig, axes = plt.subplots(len(metrics), len(batch_sizes),
                             figsize=(3.4 * len(batch_sizes), 7.5), squeeze=False)
    for col, K in enumerate(batch_sizes):
        sub = df[df["batch_size"] == K]
        for row, metric in enumerate(metrics):
            ax = axes[row][col]
            for estimator, grp in sub.groupby("estimator"):
                grp = grp.sort_values("target_mi")
                ax.plot(grp["target_mi"], grp[metric], marker="o", ms=3,
                        label=estimator, gid=f"{metric}:{estimator}:{K}")
            if metric == "bias":
                ax.axhline(0.0, color="grey", lw=0.6)
                ax.set_title(f"batch size {K}")
            if metric in ("variance", "mse"):
                ax.set_yscale("log")
            ax.set_ylabel(metric if col == 0 else "")
            ax.set_xlabel("true MI (nats)")
    axes[0][0].legend(fontsize=6)
    fig.tight_layout()
    return fig


def _split_fig4_inputs(inputs):
    curves, best = [], []
    for p in inputs:
        if not Path(p).exists():
            raise RenderError(f"input file does not exist: {p}")
        try:
            cols = set(pd.read_csv(p, nrows=0).columns)
        except pd.errors.EmptyDataError:
            raise RenderError(f"input file is empty: {p}") from None
        (best if "best_alpha" in cols else curves).append(p)
    return curves, best


def build_fig4(inputs) -> plt.Figure:
    curve_paths, best_paths = _split_fig4_inputs(inputs)
    if not best_paths:
        raise RenderError("fig4 needs a best-alpha grid CSV among its inputs")
    best = pd.concat([_load(p, "fig4_best") for p in best_paths], ignore_index=True)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    if curve_paths:
        curves = pd.concat([_load(p, "fig4_curves") for p in curve_paths],
                           ignore_index=True)
        for (estimator, K), grp in curves.groupby(["estimator", "batch_size"]):
            grp = grp.sort_values("target_mi")
            ax1.plot(grp["target_mi"], grp["grad_mse"], marker="o", ms=3,
                     label=f"{estimator} K={K}", gid=f"grad:{estimator}:{K}")
        ax1.set_yscale("log")
        ax1.set_xlabel("true MI (nats)")
        ax1.set_ylabel("gradient MSE")
        ax1.legend(fontsize=5)
    ks = sorted(best["batch_size"].unique())
    mis = sorted(best["target_mi"].unique())
    grid = np.full((len(ks), len(mis)), np.nan)
    for _, row in best.iterrows():
        grid[ks.index(row["batch_size"]), mis.index(row["target_mi"])] = row["best_alpha"]
    im = ax2.imshow(grid, origin="lower", aspect="auto", vmin=0.0, vmax=1.0,
                    cmap="viridis")
    ax2.set_xticks(range(len(mis)), [f"{m:g}" for m in mis])
    ax2.set_yticks(range(len(ks)), [f"{k:g}" for k in ks])
    ax2.set_xlabel("true MI (nats)")
    ax2.set_ylabel("batch size")
    ax2.set_title("best alpha")
    fig.colorbar(im, ax=ax2)
    fig.tight_layout()
    return fig


def build_fig7(inputs) -> plt.Figure:
    df = pd.concat([_load(p, "fig7") for p in inputs], ignore_index=True)
    mis = sorted(df["target_mi"].unique())
    fig, axes = plt.subplots(1, len(mis), figsize=(3.6 * len(mis), 3.4), squeeze=False)
    for ax, mi in zip(axes[0], mis):
        sub = df[df["target_mi"] == mi]
        for mode, grp in sub.groupby("mode"):
            ax.scatter(np.abs(grp["bias"]), grp["variance"], s=14, label=mode,
                       gid=f"scatter:{mode}:{mi:g}")
        ax.set_xlabel("|bias| (nats)")
        ax.set_yscale("log")
        ax.set_title(f"MI = {mi:g}")
    axes[0][0].set_ylabel("variance")
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    return fig


_BUILDERS = {"fig2": build_fig2, "fig3": build_fig3, "fig4": build_fig4,
             "fig7": build_fig7}


def build_figure(spec: FigureSpec) -> plt.Figure:
    """Build the figure in memory; raises before any file is written."""
    if not spec.inputs:
        raise RenderError(f"{spec.figure}: no input files")
    return _BUILDERS[spec.figure](spec.inputs)


def render(spec: FigureSpec) -> Path:
    fig = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, format=spec.fmt, dpi=120)
    finally:
        plt.close(fig)
    return out


def render_all(directory, out_dir=None, fmt: str = "png") -> list[Path]:
    """Render every figure the manifest declares; idempotent on rerun."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise RenderError(f"no manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text())
    out_dir = Path(out_dir) if out_dir is not None else directory
    written = []
    for key in sorted(manifest.get("runs", {})):
        entry = manifest["runs"][key]
        for fig_entry in entry.get("figures", []):
            spec = FigureSpec(
                figure=fig_entry["figure"],
                inputs=tuple(directory / name for name in fig_entry["inputs"]),
                output=out_dir / f"{fig_entry['figure']}_{key}.{fmt}",
                fmt=fmt)
            written.append(render(spec))
    return written
