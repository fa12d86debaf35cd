"""Figures written next to the CLI's CSV/JSON reports.

Uses the object-oriented Agg API (no pyplot state), so rendering is safe to
call from worker threads and never opens a window.
"""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

REGIME_COLORS = {1: "tab:blue", 2: "tab:red"}


def _figure(width=7.0, height=4.0):
    fig = Figure(figsize=(width, height), facecolor="w")
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def _marks(ax, marks):
    for name, value in marks.items():
        if value is None or not np.isfinite(value):
            continue
        ax.axhline(value, color="0.4", lw=0.8, ls="--")
        ax.text(ax.get_xlim()[1], value, f" {name}", va="center", fontsize=8, color="0.3")


def save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})


def trajectory_figure(traj, marks=None):
    fig, ax = _figure()
    ax.plot(traj.t, traj.x, color="k", lw=0.9)
    for regime, color in REGIME_COLORS.items():
        sel = traj.regime == regime
        ax.scatter(traj.t[sel], traj.x[sel], s=2, color=color, label=f"regime {regime}")
    ax.set_xlabel("t")
    ax.set_ylabel("x (type-1 frequency)")
    ax.set_ylim(0, 1)
    _marks(ax, marks or {})
    ax.legend(loc="best", fontsize=8)
    return fig


def ensemble_figure(summary, marks=None, max_paths=50):
    fig, ax = _figure()
    for row in summary.paths[:max_paths]:
        ax.plot(summary.grid, row, color="0.75", lw=0.5)
    sd = np.sqrt(summary.var_x)
    ax.fill_between(summary.grid, summary.mean_x - sd, summary.mean_x + sd, color="tab:blue", alpha=0.25)
    ax.plot(summary.grid, summary.mean_x, color="tab:blue", lw=1.5, label="mean")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_ylim(0, 1)
    _marks(ax, marks or {})
    ax.legend(loc="best", fontsize=8)
    return fig


def bifurcation_figure(rows, mu_c):
    fig, ax = _figure()
    for row in rows:
        ys = [row[k] for k in ("a1", "a2", "a3_or_ahat") if row[k] is not None]
        if row["num_roots"] == 3:
            ax.plot([row["mu"]] * 2, [ys[0], ys[2]], ".", color="tab:blue", ms=3)
            ax.plot(row["mu"], ys[1], ".", color="tab:red", ms=3)
        elif ys:
            ax.plot(row["mu"], ys[-1], ".", color="tab:blue", ms=3)
    ax.axvline(mu_c, color="0.4", ls="--", lw=0.8)
    ax.set_xlabel("mutation rate")
    ax.set_ylabel("fixed point")
    ax.set_title(f"critical rate {mu_c:.6g}")
    return fig


def occupation_figure(hist, marks=None):
    fig, ax = _figure()
    widths = np.diff(hist.bin_edges)
    ax.bar(hist.bin_edges[:-1], hist.mass, width=widths, align="edge", color="tab:blue", edgecolor="k", lw=0.3)
    for name, value in (marks or {}).items():
        if value is not None and np.isfinite(value):
            ax.axvline(value, color="0.4", ls="--", lw=0.8)
            ax.text(value, ax.get_ylim()[1], name, ha="center", va="bottom", fontsize=8)
    ax.set_xlabel("x")
    ax.set_ylabel("occupation mass")
    ax.set_xlim(0, 1)
    return fig


def moments_figure(curve):
    fig, ax = _figure()
    ax.plot(curve.grid, curve.estimate, color="k", lw=1.0, label=f"E[x^{curve.p:g}]")
    ax.fill_between(curve.grid, curve.estimate - 2 * curve.std_error, curve.estimate + 2 * curve.std_error,
                    color="0.7", alpha=0.5)
    ax.plot(curve.grid, curve.running_max(), color="tab:red", lw=0.8, ls="--", label="running max")
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    return fig


def classification_figure(results):
    fig, ax = _figure()
    x0 = np.array(sorted(results))
    f = np.array([results[k].fraction_below for k in x0])
    ax.plot(x0, f, "o-", color="k", ms=3)
    for k in x0:
        ax.annotate(results[k].label.value[0], (k, results[k].fraction_below), fontsize=7,
                    textcoords="offset points", xytext=(0, 5), ha="center")
    sep = next(iter(results.values())).separator if results else None
    if sep is not None:
        ax.axvline(sep, color="0.4", ls="--", lw=0.8)
    ax.set_xlabel("x0")
    ax.set_ylabel("fraction of paths settled below a2")
    ax.set_ylim(-0.05, 1.05)
    return fig


def hitting_figure(estimate):
    fig, ax = _figure()
    times = estimate.times[~np.isnan(estimate.times)]
    if times.size:
        ax.hist(times, bins=40, color="tab:blue", edgecolor="k", lw=0.3)
    ax.set_xlabel("first passage time")
    ax.set_ylabel("paths")
    ax.set_title(f"censored fraction {estimate.fraction_censored:.3g}")
    return fig
