"""Command-line front end.

Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure.
"""

import argparse
import contextlib
import logging
import sys

import numpy as np

from . import config as cfgmod
from . import io, plotting
from .analysis import (
    Direction,
    HittingSpec,
    classify_basin,
    hitting_time_from_ensemble,
    moment_from_ensemble,
    occupation_from_ensemble,
)
from .ctmc import GeneratorQ, RngStream
from .dynamics import TwoTypeGame, check_mu, critical_mu, fixed_points, unit_root_count
from .errors import DegenerateBifurcation, NumericalError, ValidationError, WrongSide
from .hybrid import SimConfig, SwitchedModel, default_workers, ensemble, simulate_hybrid
from .lyapunov import Family, LyapunovSpec, find_negative_drift_region, search_weights

log = logging.getLogger("rmswitch")

_FIELD_SECTION = {
    "b1": "game", "b2": "game",
    "mu1": "mutation", "mu2": "mutation",
    "q12": "generator", "q21": "generator",
    "dt": "sim", "horizon": "sim", "sample_every": "sim", "seed": "sim", "paths": "sim",
    "x0": "run", "i0": "run", "mu": "run", "threshold": "run", "direction": "run",
    "bins": "run", "burn_in": "run", "p": "run", "x0_grid": "run", "workers": "run",
}


def _locate(cfg, exc):
    """Re-raise a validation error with the config-file location of its field."""
    field = exc.field.split()[-1] if isinstance(exc.field, str) else exc.field
    section = _FIELD_SECTION.get(field)
    where = cfgmod.where(cfg, section, field) if section else ""
    if where:
        return cfgmod.ConfigError(where, f"[{section}] {field}", str(exc).split(": ", 1)[-1])
    return exc


def _require(cfg, section, key):
    value = cfg[section].get(key)
    if value is None:
        raise ValidationError(key, f"missing value (set [{section}] {key} in a config file, --{key.replace('_', '-')}, or use --preset)")
    return value


def _game(cfg):
    try:
        return TwoTypeGame(_require(cfg, "game", "b1"), _require(cfg, "game", "b2"))
    except ValidationError as exc:
        raise _locate(cfg, exc)


def _model(cfg):
    try:
        game = _game(cfg)
        Q = GeneratorQ(_require(cfg, "generator", "q12"), _require(cfg, "generator", "q21"))
        return SwitchedModel(game, _require(cfg, "mutation", "mu1"), _require(cfg, "mutation", "mu2"), Q)
    except ValidationError as exc:
        raise _locate(cfg, exc)


def _sim(cfg):
    s = cfg["sim"]
    try:
        return SimConfig(dt=s["dt"], horizon=s["horizon"], sample_every=s["sample_every"])
    except ValidationError as exc:
        raise _locate(cfg, exc)


def _paths(cfg):
    n = cfg["sim"]["paths"]
    if n < 1:
        raise _locate(cfg, ValidationError("paths", f"need at least one path, got {n}"))
    return n


def _start(cfg):
    x0 = _require(cfg, "run", "x0")
    i0 = cfg["run"].get("i0", 1)
    if not (0.0 < x0 < 1.0):
        raise _locate(cfg, ValidationError("x0", f"initial frequency must lie in (0, 1), got {x0!r}"))
    if i0 not in (1, 2):
        raise _locate(cfg, ValidationError("i0", f"initial regime must be 1 or 2, got {i0!r}"))
    return x0, i0


def _workers(cfg):
    w = cfg["run"].get("workers")
    return default_workers() if w is None else w


def _thresholds(model):
    """Named thresholds from the two regimes' fixed points."""
    out = {}
    low = fixed_points(model.game, model.mu1)
    high = fixed_points(model.game, model.mu2)
    if len(low.points) == 3:
        out.update(a1=low.a1, a2=low.a2, a3=low.a3)
    if len(high.points) == 1:
        out["ahat"] = high.ahat
    return out


def _resolve_point(token, model, field):
    if isinstance(token, str) and token.startswith("auto-"):
        name = token[len("auto-"):]
        marks = _thresholds(model)
        if name not in marks:
            raise ValidationError(field, f"{token!r} is undefined for this model (available: {sorted(marks)})")
        return marks[name]
    try:
        return float(token)
    except (TypeError, ValueError):
        raise ValidationError(field, f"expected a number or auto-a1/auto-a2/auto-a3/auto-ahat, got {token!r}")


def _parse_range(text, field):
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise ValidationError(field, f"expected lo:hi[:step], got {text!r}")
    if len(parts) == 2:
        return tuple(parts)
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise ValidationError(field, f"expected lo:hi:step with step > 0, got {text!r}")
    lo, hi, step = parts
    n = int(round((hi - lo) / step)) + 1
    return [round(lo + k * step, 12) for k in range(n)]


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _echo(cfg):
    return cfgmod.public(cfg)


def _save_figure(fig, path):
    if path:
        plotting.save(fig, path)
        log.info("wrote figure %s", path)


def _sidecar(path, payload):
    if path and path != "-":
        with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
            io.write_json(payload, fh)


# -- subcommands --------------------------------------------------------------

def cmd_fixed_points(args, cfg):
    game = _game(cfg)
    mu = check_mu(_require(cfg, "run", "mu"), "mu")
    fps = fixed_points(game, mu)
    payload = {"game": {"b1": game.b1, "b2": game.b2}, "mu": mu, "fixed_points": fps.to_dict()}
    if args.json == "-":
        io.write_json(payload, sys.stdout)
        return
    print(f"b1={game.b1:g} b2={game.b2:g} mu={mu:g}: {fps.kind.value}")
    names = ("a1", "a2", "a3") if len(fps.points) == 3 else ("ahat",)
    for name, p in zip(names, fps.points):
        print(f"  {name:<5} {io.fmt(p.location):>22}  {p.stability.value}")
    if args.json:
        with _output(args.json) as fh:
            io.write_json(payload, fh)


def bifurcation_scan(game, mu_min, mu_max, steps):
    rows = []
    for mu in np.linspace(mu_min, mu_max, steps):
        mu = float(mu)
        row = {"mu": mu, "num_roots": unit_root_count(game, mu), "a1": None, "a2": None, "a3_or_ahat": None}
        try:
            fps = fixed_points(game, mu)
        except DegenerateBifurcation:
            rows.append(row)
            continue
        locs = fps.locations
        row["num_roots"] = len(locs)
        if len(locs) == 3:
            row.update(a1=locs[0], a2=locs[1], a3_or_ahat=locs[2])
        else:
            row["a3_or_ahat"] = locs[0]
        rows.append(row)
    return rows


def cmd_bifurcation(args, cfg):
    game = _game(cfg)
    for name in ("mu_min", "mu_max"):
        check_mu(getattr(args, name), name)
    if args.steps < 2:
        raise ValidationError("steps", "need at least 2 scan points")
    mu_c = critical_mu(game)
    rows = bifurcation_scan(game, args.mu_min, args.mu_max, args.steps)
    if args.out in (None, "-"):
        print(f"# mu_c = {io.fmt(mu_c)}")
        io.write_bifurcation_csv(rows, sys.stdout)
    else:
        print(f"mu_c = {io.fmt(mu_c)}")
        with _output(args.out) as fh:
            io.write_bifurcation_csv(rows, fh)
        _sidecar(args.out, {"config": _echo(cfg), "mu_c": mu_c})
    if args.figure:
        _save_figure(plotting.bifurcation_figure(rows, mu_c), args.figure)


def cmd_simulate(args, cfg):
    model, sim = _model(cfg), _sim(cfg)
    x0, i0 = _start(cfg)
    seed = cfg["sim"]["seed"]
    traj = simulate_hybrid(model, sim, x0, i0, RngStream(seed, 0))
    with _output(args.out) as fh:
        io.write_trajectory_csv(traj, fh)
    _sidecar(args.out, {"config": _echo(cfg), "model": model.to_dict(), "seed": seed, "stream_index": 0})
    if args.figure:
        _save_figure(plotting.trajectory_figure(traj, _thresholds(model)), args.figure)


def _ensemble(cfg, model, sim, thresholds=()):
    x0, i0 = _start(cfg)
    return ensemble(model, sim, x0, i0, _paths(cfg), cfg["sim"]["seed"], _workers(cfg), thresholds)


def cmd_ensemble(args, cfg):
    model, sim = _model(cfg), _sim(cfg)
    marks = _thresholds(model)
    ens = _ensemble(cfg, model, sim, [marks["a2"]] if "a2" in marks else [])
    with _output(args.out) as fh:
        io.write_json(io.ensemble_record(ens, _echo(cfg)), fh)
    if args.figure:
        _save_figure(plotting.ensemble_figure(ens, marks), args.figure)


def cmd_classify(args, cfg):
    model, sim = _model(cfg), _sim(cfg)
    grid_text = cfg["run"].get("x0_grid", "0.05:0.95:0.05")
    x0_grid = _parse_range(grid_text, "x0_grid")
    if not isinstance(x0_grid, list) or any(not (0 < v < 1) for v in x0_grid):
        raise _locate(cfg, ValidationError("x0_grid", "need lo:hi:step with points inside (0, 1)"))
    burn = cfg["run"].get("burn_in", 0.5)
    results = classify_basin(model, sim, x0_grid, cfg["run"].get("i0", 1), _paths(cfg), cfg["sim"]["seed"],
                             burn, _workers(cfg))
    payload = io.record(model, _echo(cfg), cfg["sim"]["seed"], labels=[
        dict(x0=x0, **res.to_dict()) for x0, res in results.items()
    ])
    with _output(args.out) as fh:
        io.write_json(payload, fh)
    if args.figure:
        _save_figure(plotting.classification_figure(results), args.figure)


def cmd_hitting(args, cfg):
    model, sim = _model(cfg), _sim(cfg)
    x0, _ = _start(cfg)
    threshold = _resolve_point(_require(cfg, "run", "threshold"), model, "threshold")
    direction = cfg["run"].get("direction") or ("from-left" if x0 <= threshold else "from-right")
    try:
        spec = HittingSpec(threshold, Direction(direction), sim.horizon)
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("direction", "must be from-left or from-right")
    if spec.direction is Direction.FROM_LEFT and x0 > threshold:
        raise WrongSide(f"x0={x0} lies right of threshold {threshold} for a from-left hitting time")
    if spec.direction is Direction.FROM_RIGHT and x0 < threshold:
        raise WrongSide(f"x0={x0} lies left of threshold {threshold} for a from-right hitting time")
    est = hitting_time_from_ensemble(_ensemble(cfg, model, sim), spec)
    payload = io.record(model, _echo(cfg), cfg["sim"]["seed"], threshold=threshold,
                        direction=spec.direction.value, **est.to_dict())
    with _output(args.out) as fh:
        io.write_json(payload, fh)
    if args.figure:
        _save_figure(plotting.hitting_figure(est), args.figure)


def cmd_occupation(args, cfg):
    model, sim = _model(cfg), _sim(cfg)
    bins = cfg["run"].get("bins", 50)
    burn = cfg["run"].get("burn_in", 0.5)
    if bins < 10:
        raise _locate(cfg, ValidationError("bins", f"need at least 10 bins, got {bins}"))
    if not (0.0 <= burn < 1.0):
        raise _locate(cfg, ValidationError("burn_in", "must lie in [0, 1)"))
    ens = _ensemble(cfg, model, sim)
    hist = occupation_from_ensemble(ens, bins, burn)
    marks = _thresholds(model)
    intervals = {}
    if "a1" in marks and "ahat" in marks:
        intervals["a1_ahat"] = hist.fraction_in(min(marks["a1"], marks["ahat"]), max(marks["a1"], marks["ahat"]))
    if "a2" in marks:
        intervals["below_a2"] = hist.fraction_in(0.0, marks["a2"])
    payload = io.record(model, _echo(cfg), cfg["sim"]["seed"], burn_in_fraction=burn,
                        bin_edges=hist.bin_edges, mass=hist.mass, interval_mass=intervals, marks=marks)
    with _output(args.out) as fh:
        io.write_json(payload, fh)
    if args.csv:
        with _output(args.csv) as fh:
            io.write_histogram_csv(hist, fh)
    if args.figure:
        _save_figure(plotting.occupation_figure(hist, marks), args.figure)


def cmd_moments(args, cfg):
    model, sim = _model(cfg), _sim(cfg)
    p = cfg["run"].get("p", 1.0)
    if not p > 0:
        raise _locate(cfg, ValidationError("p", f"moment order must be positive, got {p!r}"))
    curve = moment_from_ensemble(_ensemble(cfg, model, sim), p)
    payload = io.record(model, _echo(cfg), cfg["sim"]["seed"], p=p, grid=curve.grid, estimate=curve.estimate,
                        std_error=curve.std_error, late_running_max_increase=curve.late_increase())
    with _output(args.out) as fh:
        io.write_json(payload, fh)
    if args.csv:
        with _output(args.csv) as fh:
            io.write_moments_csv(curve, fh)
    if args.figure:
        _save_figure(plotting.moments_figure(curve), args.figure)


def cmd_lyapunov(args, cfg):
    model = _model(cfg)
    anchor = _resolve_point(args.anchor, model, "anchor") if args.anchor is not None else None
    try:
        family = Family(args.family)
    except ValueError:
        raise ValidationError("family", f"choose from {[f.value for f in Family]}")
    spec = LyapunovSpec(family, anchor=anchor, alpha=args.alpha, c1=args.c1, c2=args.c2,
                        sign=args.sign, side=args.side)
    lo_text, hi_text = args.interval.split(":") if ":" in args.interval else (None, None)
    if lo_text is None:
        raise ValidationError("interval", "expected lo:hi")
    lo = _resolve_point(lo_text, model, "interval") + args.offset
    hi = _resolve_point(hi_text, model, "interval") - args.offset
    if args.search:
        region = search_weights(model, spec, (lo, hi), args.grid_n, anchored=args.anchored)
    else:
        region = find_negative_drift_region(model, spec, (lo, hi), args.grid_n)
    payload = io.record(model, _echo(cfg), None, search_interval=[lo, hi], grid_n=args.grid_n,
                        region=region.to_dict())
    with _output(args.out) as fh:
        io.write_json(payload, fh)


# -- argument parsing ---------------------------------------------------------

def _add_model_flags(p, sim=True):
    p.add_argument("--config", help="INI run configuration file")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="built-in parameter set")
    p.add_argument("--b1", type=float)
    p.add_argument("--b2", type=float)
    if not sim:
        return
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--q12", type=float)
    p.add_argument("--q21", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--sample-every", dest="sample_every", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--x0", type=float)
    p.add_argument("--i0", type=int)
    p.add_argument("--workers", type=int, help="threads for ensembles (results do not depend on it)")


def _add_outputs(p, figure=True):
    p.add_argument("--out", default="-", help="output file, '-' for stdout")
    if figure:
        p.add_argument("--figure", help="also render a PNG figure to this path")


def build_parser():
    parser = argparse.ArgumentParser(prog="rmswitch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixed-points", help="fixed points of the two-type drift")
    _add_model_flags(p, sim=False)
    p.add_argument("--mu", type=float)
    p.add_argument("--json", help="write JSON here ('-' prints only JSON)")
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("bifurcation", help="critical mutation rate and root-count scan")
    _add_model_flags(p, sim=False)
    p.add_argument("--mu-min", dest="mu_min", type=float, default=0.0)
    p.add_argument("--mu-max", dest="mu_max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=201)
    _add_outputs(p)
    p.set_defaults(func=cmd_bifurcation)

    p = sub.add_parser("simulate", help="one hybrid trajectory as CSV")
    _add_model_flags(p)
    _add_outputs(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="seeded ensemble summary as JSON")
    _add_model_flags(p)
    _add_outputs(p)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("classify", help="basin label per initial condition")
    _add_model_flags(p)
    p.add_argument("--x0-grid", dest="x0_grid", help="lo:hi:step (default 0.05:0.95:0.05)")
    p.add_argument("--burn-in", dest="burn_in", type=float)
    _add_outputs(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("hitting", help="first-passage time estimate")
    _add_model_flags(p)
    p.add_argument("--threshold", help="number or auto-a1/auto-a2/auto-a3/auto-ahat")
    p.add_argument("--direction", choices=[d.value for d in Direction])
    _add_outputs(p)
    p.set_defaults(func=cmd_hitting)

    p = sub.add_parser("occupation", help="post-burn-in occupation histogram")
    _add_model_flags(p)
    p.add_argument("--bins", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=float)
    p.add_argument("--csv", help="also write bin_left,bin_right,mass CSV here")
    _add_outputs(p)
    p.set_defaults(func=cmd_occupation)

    p = sub.add_parser("moments", help="ensemble moment curve E[x^p(t)]")
    _add_model_flags(p)
    p.add_argument("--p", type=float)
    p.add_argument("--csv", help="also write t,estimate,std_error CSV here")
    _add_outputs(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("lyapunov", help="negative-generator region for a test function")
    _add_model_flags(p)
    p.add_argument("--family", required=True, help=", ".join(f.value for f in Family))
    p.add_argument("--anchor", help="number or auto-a1/auto-a2/auto-a3/auto-ahat")
    p.add_argument("--interval", required=True, help="lo:hi, endpoints may be auto-* tokens")
    p.add_argument("--offset", type=float, default=1e-6, help="pull both endpoints inward by this much")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--c1", type=float, default=1.01)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--sign", type=int, default=1, choices=(1, -1))
    p.add_argument("--side", default="above", choices=("above", "below"))
    p.add_argument("--grid-n", dest="grid_n", type=int, default=10_000)
    p.add_argument("--search", action="store_true", help="fall back to a weight search if needed")
    p.add_argument("--anchored", choices=("lo", "hi"), default=None,
                   help="with --search, require the region to touch this end")
    _add_outputs(p, figure=False)
    p.set_defaults(func=cmd_lyapunov)
    return parser


def _overrides(args):
    out = {}
    for key, section in _FIELD_SECTION.items():
        value = getattr(args, key, None)
        if value is not None:
            out.setdefault(section, {})[key] = value
    return out


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = cfgmod.resolve(getattr(args, "preset", None), getattr(args, "config", None), _overrides(args))
        args.func(args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
