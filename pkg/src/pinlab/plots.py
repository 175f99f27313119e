"""Static diagnostic plots rendered from CSV files.

Figures are always rebuilt from a file on disk, never from in-memory
state, so every plot is reproducible from shipped data.  Output is SVG
with no styling knobs: these are diagnostics, not publication figures.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .csvio import parse_csv  # noqa: E402

PLOT_KINDS = ("free-energy-vs-h", "exponent-fit", "correlation-decay",
              "heat-map")


def _column(doc, name) -> np.ndarray:
    if name not in doc.columns:
        raise ValueError(f"unrecognized schema: column {name!r} missing "
                         f"from {doc.columns}")
    j = doc.columns.index(name)
    values = [row[j] for row in doc.rows]
    if not values:
        raise ValueError("unrecognized schema: no data rows to plot")
    if not all(isinstance(v, float) for v in values):
        raise ValueError(f"unrecognized schema: column {name!r} is not "
                         "numeric")
    return np.asarray(values, dtype=np.float64)


def _first_column(doc, names) -> tuple[str, np.ndarray]:
    for name in names:
        if name in doc.columns:
            return name, _column(doc, name)
    raise ValueError(f"unrecognized schema: none of {names} present")


def _save(fig, out_path) -> None:
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_free_energy(doc, out_path) -> None:
    xname, x = _first_column(doc, ("h", "delta"))
    y = _column(doc, "free_energy")
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if "stderr" in doc.columns:
        ax.errorbar(x, y, yerr=4.0 * _column(doc, "stderr"), fmt="o-",
                    capsize=2, label="estimate (4 s.e.)")
    else:
        ax.plot(x, y, "o-", label="free energy")
    for extra in ("annealed", "ceiling", "homogeneous_value"):
        if extra in doc.columns:
            ax.plot(x, _column(doc, extra), "--", label=extra)
    ax.set_xlabel(xname)
    ax.set_ylabel("free energy")
    ax.legend(fontsize=8)
    _save(fig, out_path)


def _plot_exponent_fit(doc, out_path) -> None:
    x = _column(doc, "delta")
    y = _column(doc, "free_energy")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("unrecognized schema: exponent fit needs "
                         "positive delta and free_energy")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.loglog(x, y, "o", label="data")
    ax.loglog(x, np.exp(intercept) * x ** slope, "-",
              label=f"slope {slope:.4f}")
    ax.set_xlabel("shift above critical point")
    ax.set_ylabel("free energy")
    ax.legend(fontsize=8)
    _save(fig, out_path)


def _plot_correlation_decay(doc, out_path) -> None:
    k = _column(doc, "k")
    c = _column(doc, "mean_abs_correlation")
    if np.any(c <= 0):
        raise ValueError("unrecognized schema: correlations must be "
                         "positive to plot on a log axis")
    slope, intercept = np.polyfit(k, np.log(c), 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(k, c, "o", label="mean |correlation|")
    ax.semilogy(k, np.exp(intercept + slope * k), "-",
                label=f"decay rate {-slope:.4f}")
    ax.set_xlabel("separation k")
    ax.set_ylabel("two-point function")
    ax.legend(fontsize=8)
    _save(fig, out_path)


def _plot_heat_map(doc, out_path) -> None:
    betas = _column(doc, "beta")
    deltas = _column(doc, "delta")
    ratio = _column(doc, "ratio")
    bvals = np.unique(betas)
    dvals = np.unique(deltas)
    grid = np.full((dvals.size, bvals.size), math.nan)
    for b, d, r in zip(betas, deltas, ratio):
        grid[np.searchsorted(dvals, d), np.searchsorted(bvals, b)] = r
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    im = ax.imshow(grid, origin="lower", aspect="auto",
                   extent=(bvals[0], bvals[-1], dvals[0], dvals[-1]))
    fig.colorbar(im, ax=ax, label="quenched / homogeneous")
    guide_b, guide_d = [], []
    for line in doc.config:
        if line.startswith("guide "):
            fields = dict(part.split("=", 1)
                          for part in line[len("guide "):].split())
            guide_b.append(float(fields["beta"]))
            guide_d.append(float(fields["delta"]))
    if guide_b:
        ax.plot(guide_b, guide_d, "w--", label="exp(-1/beta^2) guide")
        ax.legend(fontsize=8, loc="upper left")
    ax.set_xlabel("coupling beta")
    ax.set_ylabel("shift delta")
    _save(fig, out_path)


_RENDERERS = {
    "free-energy-vs-h": _plot_free_energy,
    "exponent-fit": _plot_exponent_fit,
    "correlation-decay": _plot_correlation_decay,
    "heat-map": _plot_heat_map,
}


def emit_plot(csv_path, kind: str, out_path) -> None:
    """Render one CSV file to an SVG figure of the given kind."""
    if kind not in _RENDERERS:
        raise ValueError(f"unknown plot kind {kind!r}; "
                         f"choose one of {', '.join(PLOT_KINDS)}")
    _RENDERERS[kind](parse_csv(csv_path), out_path)
