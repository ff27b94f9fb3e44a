"""Figure builders over the epifam experiment CSV schemas.

Three kinds of figures, all reading only the documented CSV columns and
never recomputing statistics:

* ``bias-scatter``: per-replicate relative biases of one method against
  another, faceted by variant allele frequency (columns) and
  population x prevalence (rows), with dotted identity diagonals
  partitioning each square panel.
* ``power-grid``: rejection rates per hypothesis (rows) and risk setting
  (columns); each panel spans the population x prevalence regions,
  separated by vertical dotted lines, with a dashed horizontal line at
  the 0.05 nominal level.
* ``sensitivity-scatter``: per-replicate biases under a misspecified
  prevalence against the correctly specified analysis of the same data,
  faceted by multiplier (rows) and variant allele frequency (columns).

Rendering is deterministic for fixed inputs: figures carry no
timestamps and the SVG id hash salt is pinned, so re-rendering
reproduces both output files byte for byte.  Every figure is written as
PNG and SVG.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

FIGURE_KINDS = ("bias-scatter", "power-grid", "sensitivity-scatter")
RISK_PARAMS = ("r1", "r2", "r_im", "s1", "s2")
HYPOTHESES = ("association", "imprinting", "maternal")
NOMINAL_LEVEL = 0.05

matplotlib.rcParams["svg.hashsalt"] = "epifam-plots"

_METHOD_STYLE = {
    "lime-mix": dict(color="#1b7837", marker="o"),
    "lime-pair": dict(color="#5aae61", marker="s"),
    "ll-lrt": dict(color="#762a83", marker="^"),
    "cll": dict(color="#9970ab", marker="v"),
}


class MissingColumnsError(ValueError):
    """The input CSV lacks columns the figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw and from which CSV files."""

    kind: str
    inputs: tuple[str, ...]
    output: str  # path stem; .png and .svg are appended
    x_method: str = "cll"
    y_method: str = "lime-pair"
    parameters: tuple[str, ...] = RISK_PARAMS
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))
        object.__setattr__(self, "parameters", tuple(self.parameters))


def _read_inputs(spec: FigureSpec, required: Sequence[str]) -> pd.DataFrame:
    frames = []
    for path in spec.inputs:
        frame = pd.read_csv(path)
        missing = [c for c in required if c not in frame.columns]
        if missing:
            raise MissingColumnsError(f"{path}: missing columns: {', '.join(missing)}")
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def _save(fig, spec: FigureSpec) -> tuple[str, str]:
    stem = Path(spec.output)
    stem.parent.mkdir(parents=True, exist_ok=True)
    png = stem.with_suffix(".png")
    svg = stem.with_suffix(".svg")
    fig.savefig(png, dpi=spec.dpi, metadata={"Software": "epifam-plots"})
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return str(png), str(svg)


def _empty_figure(spec: FigureSpec, message: str) -> tuple[str, str]:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.set_axis_off()
    ax.annotate(
        f"warning: {message}", (0.5, 0.5), ha="center", va="center", fontsize=11, wrap=True
    )
    return _save(fig, spec)


def _facet_rows(df: pd.DataFrame) -> list[tuple[str, float]]:
    combos = df[["population", "prevalence"]].drop_duplicates()
    return sorted(
        ((str(p), float(v)) for p, v in combos.itertuples(index=False)),
        key=lambda it: (it[0] != "hwe", it[0], it[1]),
    )


def bias_points(df: pd.DataFrame, x_method: str, y_method: str, parameters) -> pd.DataFrame:
    """Long table of paired per-replicate biases: one row per parameter point."""
    keys = ["scenario_index", "risk_setting", "vaf", "population", "prevalence", "replicate"]
    ok = df[(df["converged"] == 1)]
    x = ok[ok["method"] == x_method]
    y = ok[ok["method"] == y_method]
    merged = x.merge(y, on=keys, suffixes=("_x", "_y"))
    frames = []
    for param in parameters:
        cols = merged[keys + [f"bias_{param}_x", f"bias_{param}_y"]].dropna()
        cols = cols.rename(columns={f"bias_{param}_x": "x", f"bias_{param}_y": "y"})
        cols["parameter"] = param
        frames.append(cols)
    if not frames:
        return pd.DataFrame(columns=keys + ["x", "y", "parameter"])
    return pd.concat(frames, ignore_index=True)


def _render_bias_scatter(spec: FigureSpec) -> tuple[str, str]:
    required = (
        ["scenario_index", "risk_setting", "vaf", "population", "prevalence",
         "replicate", "method", "converged"]
        + [f"bias_{p}" for p in spec.parameters]
    )
    df = _read_inputs(spec, required)
    points = bias_points(df, spec.x_method, spec.y_method, spec.parameters)
    if points.empty:
        return _empty_figure(
            spec, f"no paired biases for methods {spec.x_method} vs {spec.y_method}"
        )
    vafs = sorted(points["vaf"].unique(), key=str)
    rows = _facet_rows(points)
    fig, axes = plt.subplots(
        len(rows), len(vafs),
        figsize=(3.2 * len(vafs), 3.0 * len(rows)),
        squeeze=False,
    )
    limit = float(np.nanmax(np.abs(points[["x", "y"]].to_numpy()))) * 1.05 or 1.0
    for i, (population, prevalence) in enumerate(rows):
        for j, vaf in enumerate(vafs):
            ax = axes[i][j]
            sub = points[
                (points["population"] == population)
                & (points["prevalence"] == prevalence)
                & (points["vaf"] == vaf)
            ]
            ax.plot([-limit, limit], [-limit, limit], ":", color="gray", lw=0.8)
            ax.plot([-limit, limit], [limit, -limit], ":", color="gray", lw=0.8)
            ax.scatter(sub["x"], sub["y"], s=6, alpha=0.5, color="#1b7837", linewidths=0)
            ax.set_xlim(-limit, limit)
            ax.set_ylim(-limit, limit)
            if i == 0:
                ax.set_title(f"VAF {vaf}", fontsize=10)
            if j == 0:
                ax.set_ylabel(f"{population}\nprev {prevalence:g}", fontsize=8)
            ax.tick_params(labelsize=7)
    fig.supxlabel(f"relative bias: {spec.x_method}", fontsize=10)
    fig.supylabel(f"relative bias: {spec.y_method}", fontsize=10)
    fig.tight_layout()
    return _save(fig, spec)


def _render_power_grid(spec: FigureSpec) -> tuple[str, str]:
    required = ["risk_setting", "vaf", "population", "prevalence", "method"] + [
        f"reject_{h}" for h in HYPOTHESES
    ]
    df = _read_inputs(spec, required)
    if df.empty:
        return _empty_figure(spec, "empty metrics CSV")
    settings = sorted(df["risk_setting"].unique(), key=str)
    regions = _facet_rows(df)
    methods = [m for m in _METHOD_STYLE if m in set(df["method"])] or sorted(set(df["method"]))
    fig, axes = plt.subplots(
        len(HYPOTHESES), len(settings),
        figsize=(2.2 * len(settings) + 1.0, 7.0),
        squeeze=False, sharey=True,
    )
    for i, hypothesis in enumerate(HYPOTHESES):
        for j, setting in enumerate(settings):
            ax = axes[i][j]
            ax.axhline(NOMINAL_LEVEL, ls="--", color="gray", lw=0.8)
            for r in range(1, len(regions)):
                ax.axvline(r - 0.5, ls=":", color="lightgray", lw=0.8)
            sub = df[df["risk_setting"] == setting]
            for method in methods:
                rows = sub[sub["method"] == method]
                xs, ys = [], []
                for r, (population, prevalence) in enumerate(regions):
                    cell = rows[
                        (rows["population"] == population) & (rows["prevalence"] == prevalence)
                    ][f"reject_{hypothesis}"].dropna()
                    if len(cell):
                        xs.append(r)
                        ys.append(float(cell.mean()))
                if xs:
                    style = _METHOD_STYLE.get(method, dict(color="black", marker="x"))
                    ax.plot(xs, ys, ms=4, lw=1, label=method, **style)
            ax.set_xlim(-0.5, len(regions) - 0.5)
            ax.set_ylim(-0.02, 1.02)
            ax.set_xticks(range(len(regions)))
            ax.set_xticklabels([str(r + 1) for r in range(len(regions))], fontsize=7)
            if i == 0:
                ax.set_title(f"setting {setting}", fontsize=9)
            if j == 0:
                ax.set_ylabel(f"{hypothesis}\nrejection rate", fontsize=8)
            ax.tick_params(labelsize=7)
    handles, labels = axes[0][0].get_legend_handles_labels()
    if not handles:
        for row in axes:
            for ax in row:
                h, l = ax.get_legend_handles_labels()
                if h:
                    handles, labels = h, l
                    break
            if handles:
                break
    if handles:
        fig.legend(handles, labels, loc="lower center", ncol=len(labels), fontsize=8)
    fig.supxlabel("population x prevalence region", fontsize=9)
    fig.tight_layout(rect=(0, 0.05, 1, 1))
    return _save(fig, spec)


def sensitivity_points(df: pd.DataFrame, parameters) -> pd.DataFrame:
    """Paired per-replicate biases: misspecified multiplier against multiplier 1."""
    keys = ["scenario_index", "risk_setting", "vaf", "population", "prevalence", "replicate"]
    ok = df[df["converged"] == 1]
    base = ok[ok["multiplier"] == 1.0]
    rest = ok[ok["multiplier"] != 1.0]
    merged = rest.merge(base, on=keys, suffixes=("", "_base"))
    frames = []
    for param in parameters:
        cols = merged[keys + ["multiplier", f"bias_{param}_base", f"bias_{param}"]].dropna()
        cols = cols.rename(columns={f"bias_{param}_base": "x", f"bias_{param}": "y"})
        cols["parameter"] = param
        frames.append(cols)
    if not frames:
        return pd.DataFrame(columns=keys + ["multiplier", "x", "y", "parameter"])
    return pd.concat(frames, ignore_index=True)


def _render_sensitivity_scatter(spec: FigureSpec) -> tuple[str, str]:
    required = (
        ["scenario_index", "risk_setting", "vaf", "population", "prevalence",
         "replicate", "multiplier", "converged"]
        + [f"bias_{p}" for p in spec.parameters]
    )
    df = _read_inputs(spec, required)
    points = sensitivity_points(df, spec.parameters)
    if points.empty:
        return _empty_figure(spec, "no paired sensitivity records (need multiplier 1.0 baselines)")
    multipliers = sorted(points["multiplier"].unique())
    vafs = sorted(points["vaf"].unique(), key=str)
    fig, axes = plt.subplots(
        len(multipliers), len(vafs),
        figsize=(3.2 * len(vafs), 2.8 * len(multipliers)),
        squeeze=False,
    )
    limit = float(np.nanmax(np.abs(points[["x", "y"]].to_numpy()))) * 1.05 or 1.0
    for i, multiplier in enumerate(multipliers):
        for j, vaf in enumerate(vafs):
            ax = axes[i][j]
            sub = points[(points["multiplier"] == multiplier) & (points["vaf"] == vaf)]
            ax.plot([-limit, limit], [-limit, limit], "--", color="gray", lw=0.8)
            ax.scatter(sub["x"], sub["y"], s=6, alpha=0.5, color="#2166ac", linewidths=0)
            ax.set_xlim(-limit, limit)
            ax.set_ylim(-limit, limit)
            if i == 0:
                ax.set_title(f"VAF {vaf}", fontsize=10)
            if j == 0:
                ax.set_ylabel(f"multiplier {multiplier:g}", fontsize=9)
            ax.tick_params(labelsize=7)
    fig.supxlabel("relative bias at the true prevalence", fontsize=10)
    fig.supylabel("relative bias at the misspecified prevalence", fontsize=10)
    fig.tight_layout()
    return _save(fig, spec)


def render(spec: FigureSpec) -> tuple[str, str]:
    """Draw the figure and return the (png, svg) paths."""
    if spec.kind == "bias-scatter":
        return _render_bias_scatter(spec)
    if spec.kind == "power-grid":
        return _render_power_grid(spec)
    return _render_sensitivity_scatter(spec)
