"""The four standard panels.

curves        normalized relaxation curves versus cumulative masks (log x)
tau_vs_f      relaxation time against rule density with threshold markers
heatmap       (f, rho) map of the plateau in pair-std units with overlays
layer_panels  one curves panel per input file, shared axes

Figures are pure functions of their input files; re-rendering the same
inputs yields pixel-identical images.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, read_curves, read_summary, read_thresholds

KINDS = ("curves", "tau_vs_f", "heatmap", "layer_panels")


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    out: str
    levels: list[int] | None = None  # None: all levels present
    thresholds: str | None = None  # ThresholdReport JSON for overlays
    summary_level: int = 0  # level shown in summary-based panels
    dpi: int = 130
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("no input files given")


def _select_levels(curves, wanted):
    if wanted is None:
        return sorted(curves)
    missing = [l for l in wanted if l not in curves]
    if missing:
        raise SchemaError(f"level(s) {missing} not present in the input")
    selected = sorted(set(wanted))
    if not selected:
        raise SchemaError("empty level selection")
    return selected


def _threshold_overlays(ax, spec):
    if spec.thresholds is None:
        return
    marks = read_thresholds(spec.thresholds)
    styles = {"f_per": ("--", "0.2"), "f_inv": (":", "0.2")}
    for name, (ls, color) in styles.items():
        val = marks.get(name)
        if val is not None:
            ax.axvline(val, ls=ls, color=color, lw=1.2)
            ax.text(val, 1.01, name.replace("_", " "), transform=ax.get_xaxis_transform(),
                    ha="center", va="bottom", fontsize=8, color=color)


def _draw_curves(ax, curves, levels, cmap_name="viridis"):
    colors = plt.get_cmap(cmap_name)(np.linspace(0.0, 0.9, len(levels)))
    for color, level in zip(colors, levels):
        c = curves[level]
        x = np.maximum(c.masks, 1)  # log axis; the n=0 point sits at 1
        ax.plot(x, c.C_tilde, color=color, lw=1.5, label=f"level {level}")
        band = c.stderr_tilde()
        ax.fill_between(x, c.C_tilde - band, c.C_tilde + band, color=color, alpha=0.25, lw=0)
    ax.set_xscale("log")
    ax.set_xlabel("cumulative masked positions")
    ax.set_ylabel("normalized overlap with start")
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.legend(fontsize=8)


def plot_curves(spec: FigureSpec) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for path in spec.inputs:
        curves = read_curves(path)
        levels = _select_levels(curves, spec.levels)
        _draw_curves(ax, curves, levels)
        if len(spec.inputs) > 1:  # distinguish files by line style only
            for line in ax.get_lines()[-len(levels):]:
                line.set_linestyle(["-", "--", ":", "-."][spec.inputs.index(path) % 4])
    return _finish(fig, spec)


def plot_layer_panels(spec: FigureSpec) -> Path:
    n = len(spec.inputs)
    fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 3.4), sharey=True, squeeze=False)
    for ax, path in zip(axes[0], spec.inputs):
        curves = read_curves(path)
        levels = _select_levels(curves, spec.levels)
        _draw_curves(ax, curves, levels)
        ax.set_title(Path(path).stem, fontsize=9)
    return _finish(fig, spec)


def plot_tau_vs_f(spec: FigureSpec) -> Path:
    rows = []
    for path in spec.inputs:
        rows.extend(read_summary(path))
    rows = [r for r in rows if r["level"] == spec.summary_level]
    if not rows:
        raise SchemaError(f"no rows at level {spec.summary_level}")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for rho in sorted({r["rho"] for r in rows}):
        sel = sorted((r for r in rows if r["rho"] == rho), key=lambda r: r["f"])
        ok = [r for r in sel if r["status"] == "ok"]
        if not ok:
            continue
        ax.plot([r["f"] for r in ok], [r["tau"] for r in ok], "o-", ms=4,
                label=f"rho = {rho:g}")
    ax.set_xlabel("rule density f")
    ax.set_ylabel(f"relaxation time (steps), level {spec.summary_level}")
    ax.set_yscale("log")
    _threshold_overlays(ax, spec)
    ax.legend(fontsize=8)
    return _finish(fig, spec)


def plot_heatmap(spec: FigureSpec) -> Path:
    rows = []
    for path in spec.inputs:
        rows.extend(read_summary(path))
    level_rows = [r for r in rows if r["level"] == spec.summary_level]
    if not level_rows:
        raise SchemaError(f"no rows at level {spec.summary_level}")
    fs = sorted({r["f"] for r in level_rows})
    rhos = sorted({r["rho"] for r in level_rows})
    grid = np.full((len(rhos), len(fs)), np.nan)
    for r in level_rows:
        grid[rhos.index(r["rho"]), fs.index(r["f"])] = r["plateau_over_std"]

    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    mesh = ax.pcolormesh(
        _edges(fs), _edges(rhos), grid, cmap="RdBu_r", vmin=-10, vmax=10, shading="flat"
    )
    fig.colorbar(mesh, ax=ax, label="plateau / pair std")
    ax.set_yscale("log")
    ax.set_xlabel("rule density f")
    ax.set_ylabel("masking fraction rho")
    _threshold_overlays(ax, spec)

    # empirical inversion locus: cells where the top compared level relaxes
    # faster than the leaves (both taus present in the file)
    top = max(r["level"] for r in rows)
    for f in fs:
        for rho in rhos:
            lo = next((r for r in rows if r["f"] == f and r["rho"] == rho and r["level"] == 0), None)
            hi = next((r for r in rows if r["f"] == f and r["rho"] == rho and r["level"] == top), None)
            if lo and hi and lo["status"] == "ok" and hi["status"] == "ok":
                if hi["tau"] < lo["tau"]:
                    ax.plot(f, rho, "x", color="k", ms=5, mew=1.2)
    return _finish(fig, spec)


def _edges(vals):
    vals = np.asarray(vals, dtype=float)
    if len(vals) == 1:
        return np.array([vals[0] * 0.9, vals[0] * 1.1])
    mids = 0.5 * (vals[1:] + vals[:-1])
    first = vals[0] - (mids[0] - vals[0])
    last = vals[-1] + (vals[-1] - mids[-1])
    return np.concatenate([[max(first, 1e-12)], mids, [last]])


def _finish(fig, spec: FigureSpec) -> Path:
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out, dpi=spec.dpi, metadata=_clean_metadata(out.suffix))
    plt.close(fig)
    return out


def _clean_metadata(suffix):
    # strip renderer timestamps so identical inputs give identical bytes
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".png":
        return {"Software": None}
    return None


def render(spec: FigureSpec) -> Path:
    fn = {
        "curves": plot_curves,
        "tau_vs_f": plot_tau_vs_f,
        "heatmap": plot_heatmap,
        "layer_panels": plot_layer_panels,
    }[spec.kind]
    return fn(spec)
