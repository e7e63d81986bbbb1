"""Render static figures from migrasim CSV outputs.

Rendering is a pure function of the CSV: every number on a figure comes
from the file, nothing is recomputed. Input schemas are the ones the
migrasim CLI documents for its sweep, trajectory, and extinction outputs.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

Z95 = 1.959963984540054

KINDS = ("threshold_compare", "derivative_vs_mu", "trajectory", "extinction")

REQUIRED_COLUMNS = {
    "threshold_compare": ("alpha", "eta_c_sis", "eta_c_sis_se", "eta_c_docs",
                          "eta_c_air"),
    "derivative_vs_mu": ("mu", "gprime0", "gprime0_se"),
    "trajectory": ("t", "total_infected", "mean_x", "mean_y"),
    "extinction": ("rep", "absorption_time", "censored"),
}


class SchemaError(ValueError):
    """The CSV does not match the documented schema for the figure kind."""


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[str, ...]
    kind: str
    out: str
    xlabel: str | None = None
    ylabel: str | None = None
    xscale: str | None = None
    yscale: str | None = None
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind: {self.kind}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


def read_table(path: str, kind: str) -> dict[str, list[float]]:
    """Columns as float lists; missing column or empty body is a hard error."""
    required = REQUIRED_COLUMNS[kind]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing} for "
                              f"{kind} (found {header})")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    table: dict[str, list[float]] = {c: [] for c in required}
    for i, row in enumerate(rows):
        for c in required:
            try:
                table[c].append(float(row[c]))
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: row {i + 1}, column {c}: "
                                  f"{row[c]!r} is not numeric") from exc
    return table


def _axes_cosmetics(ax, spec: FigureSpec, xlabel: str, ylabel: str):
    ax.set_xlabel(spec.xlabel or xlabel)
    ax.set_ylabel(spec.ylabel or ylabel)
    if spec.xscale:
        ax.set_xscale(spec.xscale)
    if spec.yscale:
        ax.set_yscale(spec.yscale)
    if spec.title:
        ax.set_title(spec.title)


def _draw_threshold_compare(ax, spec: FigureSpec):
    for path in spec.inputs:
        t = read_table(path, spec.kind)
        ax.errorbar(t["alpha"], t["eta_c_sis"],
                    yerr=[Z95 * s for s in t["eta_c_sis_se"]],
                    fmt="o", capsize=3, label="SIS (simulated, 95% CI)")
        ax.plot(t["alpha"], t["eta_c_docs"], "-", label="DOCS (analytic)")
        ax.plot(t["alpha"], t["eta_c_air"], "--", label="AIR (analytic)")
    if spec.xscale is None:
        ax.set_xscale("log")
    _axes_cosmetics(ax, spec, "alpha", "critical density")
    ax.legend()


def _draw_derivative_vs_mu(ax, spec: FigureSpec):
    for path in spec.inputs:
        t = read_table(path, spec.kind)
        lo = [v - Z95 * s for v, s in zip(t["gprime0"], t["gprime0_se"])]
        hi = [v + Z95 * s for v, s in zip(t["gprime0"], t["gprime0_se"])]
        ax.plot(t["mu"], t["gprime0"], "o-",
                label=os.path.basename(path))
        ax.fill_between(t["mu"], lo, hi, alpha=0.25)
    ax.axhline(1.0, color="k", lw=0.8, linestyle=":", label="slope = 1")
    if spec.xscale is None:
        ax.set_xscale("log")
    _axes_cosmetics(ax, spec, "mu", "derivative of g at p = 0")
    ax.legend()


def _draw_trajectory(ax, spec: FigureSpec):
    for path in spec.inputs:
        t = read_table(path, spec.kind)
        base = os.path.basename(path)
        ax.plot(t["t"], t["total_infected"], label=f"{base}: infected total")
        ax.plot(t["t"], t["mean_y"], "--", label=f"{base}: mean infected")
        ax.plot(t["t"], t["mean_x"], ":", label=f"{base}: mean susceptible")
    _axes_cosmetics(ax, spec, "time", "count")
    ax.legend()


def _draw_extinction(ax, spec: FigureSpec):
    for path in spec.inputs:
        t = read_table(path, spec.kind)
        done = [(r, a) for r, a, c in
                zip(t["rep"], t["absorption_time"], t["censored"]) if not c]
        cens = [(r, a) for r, a, c in
                zip(t["rep"], t["absorption_time"], t["censored"]) if c]
        if done:
            ax.scatter([r for r, _ in done], [a for _, a in done],
                       marker="o", label=f"{os.path.basename(path)}: absorbed")
        if cens:
            ax.scatter([r for r, _ in cens], [a for _, a in cens],
                       marker="^", label=f"{os.path.basename(path)}: censored")
    _axes_cosmetics(ax, spec, "replication", "absorption time")
    ax.legend()


_DRAWERS = {
    "threshold_compare": _draw_threshold_compare,
    "derivative_vs_mu": _draw_derivative_vs_mu,
    "trajectory": _draw_trajectory,
    "extinction": _draw_extinction,
}


def build_figure(spec: FigureSpec):
    """Validate inputs and return the assembled matplotlib Figure."""
    for path in spec.inputs:
        if not os.path.exists(path):
            raise SchemaError(f"input CSV not found: {path}")
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        _DRAWERS[spec.kind](ax, spec)
    except Exception:
        plt.close(fig)
        raise
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Write the figure to spec.out; no file is created on invalid input."""
    fig = build_figure(spec)
    try:
        fig.savefig(spec.out, dpi=150)
    finally:
        plt.close(fig)
    return spec.out
