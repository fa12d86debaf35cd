"""CSV and JSON serialisation of trajectories, ensembles and estimator records.

CSV floats are written with 17 significant digits. JSON floats use Python's
shortest round-trip repr, which is equally lossless; NaN becomes ``null``.
"""

import csv
import json
import math

import numpy as np


def fmt(v):
    return f"{float(v):.17g}"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if hasattr(obj, "value") and hasattr(obj, "name"):  # Enum
        return obj.value
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def write_json(obj, fh):
    fh.write(dumps(obj))


def write_trajectory_csv(traj, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "x", "regime"])
    for t, x, r in zip(traj.t, traj.x, traj.regime):
        w.writerow([fmt(t), fmt(x), int(r)])


def read_trajectory_csv(fh):
    rows = list(csv.DictReader(fh))
    return (
        np.array([float(r["t"]) for r in rows]),
        np.array([float(r["x"]) for r in rows]),
        np.array([int(r["regime"]) for r in rows]),
    )


def write_histogram_csv(hist, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bin_left", "bin_right", "mass"])
    for lo, hi, m in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.mass):
        w.writerow([fmt(lo), fmt(hi), fmt(m)])


def write_bifurcation_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["mu", "num_roots", "a1", "a2", "a3_or_ahat"])
    for row in rows:
        w.writerow([fmt(row["mu"]), row["num_roots"]] + [
            "" if row[k] is None else fmt(row[k]) for k in ("a1", "a2", "a3_or_ahat")
        ])


def write_moments_csv(curve, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "estimate", "std_error"])
    for t, e, s in zip(curve.grid, curve.estimate, curve.std_error):
        w.writerow([fmt(t), fmt(e), fmt(s)])


def record(model, config, seed, **stats):
    """Estimator output with the provenance fields every report carries."""
    out = {"model": model.to_dict(), "config": config, "seed": seed}
    out.update(stats)
    return out


def ensemble_record(summary, config):
    return {
        "config": config,
        "model": summary.model.to_dict(),
        "seed": summary.master_seed,
        "grid": summary.grid,
        "mean_x": summary.mean_x,
        "var_x": summary.var_x,
        "final_x": summary.final_x,
        "final_regime": summary.final_regime,
        "crossings": summary.crossings(),
    }
