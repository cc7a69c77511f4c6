"""Command line front end.

Settings resolve in three layers: built-in defaults, then flags, then the
JSON file named by --config, which wins where it speaks. The resolved
settings are embedded in every summary.json under "config", so a finished
run can be repeated exactly with --config summary.json and nothing else.
The output directory is a delivery address, not part of the experiment,
and is never embedded.

Replica work in `simulate` and `velocity` fans out over a process pool
when EASTLAB_THREADS asks for more than one worker. Each replica owns a
counter-based stream keyed by (seed, replica), so the pool size changes
wall time and nothing else.

Exit status: 0 on success, 1 when verify reports a failing check, 2 for
configuration problems.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from . import __version__
from .dynamics import (
    LazyQuadrant,
    infections_to_csv,
    mean_hitting,
    run_trajectory,
    velocity_fit,
)
from .errors import BudgetExceededError, EastLabError
from .lattice import Box

_DEFAULTS = {
    "simulate": {
        "d": 2, "q": 0.2, "seed": 0, "replicas": 1,
        "t_max": 50.0, "max_events": None,
    },
    "shape": {"d": 2, "q": 0.2, "seed": 0, "t_max": 100.0, "max_events": None},
    "velocity": {
        "d": 1, "q": 0.3, "seed": 0, "replicas": 20,
        "direction": None, "n_grid": [4, 8, 12, 16],
    },
    "gap": {"region": "box:2", "q": 0.3},
    "dirichlet": {"region": "box:1x1", "q": 0.3, "target": None},
    "bottleneck": {"d": 1, "q": 0.1, "l_max": None},
    "cutoff": {
        "n": 1, "d": 2, "q": 0.3, "mode": "exact",
        "t_grid": "0:80:4", "replicas": 800, "seed": 0,
    },
    "theory": {"d": 2, "beta": 0.0, "alpha": 0.25},
    "verify": {"suite": "small", "checks": None},
}


def _threads() -> int:
    raw = os.environ.get("EASTLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"EASTLAB_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _pool_map(func, items):
    n = _threads()
    if n <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    workers = min(n, len(items))
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------------
# parsing and normalisation


def _span(text: str, cast, label: str) -> list:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"{label} must look like start:stop:step, got {text!r}")
    a, b, step = (cast(p) for p in parts)
    if step <= 0:
        raise ValueError(f"{label} step must be positive")
    if b < a:
        raise ValueError(f"{label} stop lies before start")
    out = []
    k = 0
    while True:
        v = a + k * step
        if v > b + (1e-9 * step if cast is float else 0):
            break
        out.append(cast(v))
        k += 1
    return out


def _site_list(value, d: int, label: str) -> list:
    if isinstance(value, str):
        coords = [int(tok) for tok in value.split(",")]
    else:
        coords = [int(c) for c in value]
    if len(coords) != d:
        raise ValueError(f"{label} needs {d} coordinates, got {coords}")
    if any(c < 0 for c in coords):
        raise ValueError(f"{label} must lie in the quadrant")
    return coords


def _parse_box(text: str) -> Box:
    kind, _, rest = str(text).partition(":")
    if kind != "box" or not rest:
        raise ValueError(f"region must look like box:L or box:AxB, got {text!r}")
    try:
        lengths = tuple(int(tok) for tok in rest.split("x"))
    except ValueError:
        raise ValueError(f"bad box lengths in {text!r}")
    if any(L < 0 for L in lengths):
        raise ValueError("box lengths must be nonnegative")
    return Box((0,) * len(lengths), lengths)


def _normalize(cmd: str, cfg: dict) -> dict:
    if "d" in cfg:
        cfg["d"] = int(cfg["d"])
        if cfg["d"] < 1:
            raise ValueError("dimension must be positive")
    if "q" in cfg:
        cfg["q"] = float(cfg["q"])
        if not 0.0 < cfg["q"] < 1.0:
            raise ValueError("q must lie strictly between 0 and 1")
    for key in ("seed", "replicas", "n", "max_events", "l_max"):
        if key in cfg and cfg[key] is not None:
            cfg[key] = int(cfg[key])
    if cfg.get("replicas") is not None and cfg["replicas"] < 1:
        raise ValueError("need at least one replica")
    if "t_max" in cfg and cfg["t_max"] is not None:
        cfg["t_max"] = float(cfg["t_max"])
        if cfg["t_max"] < 0:
            raise ValueError("t_max must be nonnegative")

    if cmd == "simulate" and cfg["t_max"] is None and cfg["max_events"] is None:
        raise ValueError("simulate needs t_max or max_events")
    if cmd == "shape":
        if cfg["d"] != 2:
            raise ValueError("shape rendering is a d = 2 feature")
        if cfg["t_max"] is None:
            raise ValueError("shape needs t_max")
    if cmd == "velocity":
        d = cfg["d"]
        if cfg["direction"] is None:
            cfg["direction"] = [[1] + [0] * (d - 1)]
        cfg["direction"] = [
            _site_list(vec, d, "direction") for vec in cfg["direction"]
        ]
        for vec in cfg["direction"]:
            if all(c == 0 for c in vec):
                raise ValueError("direction must have a nonzero coordinate")
        if isinstance(cfg["n_grid"], str):
            cfg["n_grid"] = _span(cfg["n_grid"], int, "n-grid")
        cfg["n_grid"] = [int(v) for v in cfg["n_grid"]]
        if len(cfg["n_grid"]) < 3:
            raise ValueError("n-grid needs at least three points for the fit")
        if min(cfg["n_grid"]) < 1:
            raise ValueError("n-grid entries must be positive")
    if cmd in ("gap", "dirichlet"):
        _parse_box(cfg["region"])  # validate early, keep the string form
        cfg["region"] = str(cfg["region"])
    if cmd == "dirichlet" and cfg["target"] is not None:
        box = _parse_box(cfg["region"])
        cfg["target"] = _site_list(cfg["target"], box.region().dim, "target")
    if cmd == "bottleneck":
        if cfg["l_max"] is None:
            cfg["l_max"] = 8 if cfg["d"] == 1 else 3
        if cfg["l_max"] < 1:
            raise ValueError("l-max must be at least 1")
    if cmd == "cutoff":
        if isinstance(cfg["t_grid"], str):
            cfg["t_grid"] = _span(cfg["t_grid"], float, "t-grid")
        cfg["t_grid"] = [float(v) for v in cfg["t_grid"]]
        if cfg["n"] < 1:
            raise ValueError("n must be at least 1")
    if cmd == "theory":
        cfg["beta"] = float(cfg["beta"])
        cfg["alpha"] = float(cfg["alpha"])
    if cmd == "verify":
        if cfg["suite"] not in ("small", "full"):
            raise ValueError("suite must be 'small' or 'full'")
        if cfg["checks"] is not None:
            cfg["checks"] = [str(c) for c in cfg["checks"]]
    return cfg


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return dict(data)


def _resolve(cmd: str, args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS[cmd])
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "config", None):
        data = _load_config(args.config)
        sub = data.pop("subcommand", None)
        if sub is not None and sub != cmd:
            raise ValueError(f"config file belongs to '{sub}', not '{cmd}'")
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(data)
    return _normalize(cmd, cfg)


# ---------------------------------------------------------------------------
# output helpers


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    text = str(value)
    if "," in text or "\n" in text:
        raise ValueError(f"cell value {text!r} would break the CSV")
    return text


def _write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _write_summary(out: str, cmd: str, cfg: dict, outputs: dict) -> None:
    payload = {
        "config": {"subcommand": cmd, **cfg},
        "outputs": outputs,
        "version": __version__,
    }
    path = os.path.join(out, "summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# runners


def _simulate_one(payload) -> tuple:
    d, q, seed, replica, t_max, max_events = payload
    try:
        res = run_trajectory(
            LazyQuadrant(d), q, seed=seed, replica=replica,
            t_max=t_max, max_events=max_events,
        )
    except BudgetExceededError as err:
        # running out of events is a reported outcome, not a failure
        res = err.partial
    n_vacanted = sum(1 for rec in res.infections.values() if np.isfinite(rec.tau))
    return (
        replica, res.t_end, res.n_events, res.stopped, n_vacanted,
        *res.tracked_extent,
    )


def _run_simulate(cfg: dict, out: str) -> int:
    payloads = [
        (cfg["d"], cfg["q"], cfg["seed"], r, cfg["t_max"], cfg["max_events"])
        for r in range(cfg["replicas"])
    ]
    rows = _pool_map(_simulate_one, payloads)
    header = ["replica", "t_end", "n_events", "stopped", "n_infected"] + [
        f"extent_x{k + 1}" for k in range(cfg["d"])
    ]
    _write_csv(os.path.join(out, "results.csv"), header, rows)
    infected = [row[4] for row in rows]
    _write_summary(out, "simulate", cfg, {
        "mean_infected": float(np.mean(infected)),
        "max_infected": int(max(infected)),
        "mean_events": float(np.mean([row[2] for row in rows])),
    })
    return 0


def _run_shape(cfg: dict, out: str) -> int:
    from .render import shape_render

    res = run_trajectory(
        LazyQuadrant(2), cfg["q"], seed=cfg["seed"], replica=0,
        t_max=cfg["t_max"], max_events=cfg["max_events"], record_events=True,
    )
    shape_render(res, res.t_end, os.path.join(out, "shape.ppm"))
    infections_to_csv(res, os.path.join(out, "results.csv"))
    _write_summary(out, "shape", cfg, {
        "t_end": res.t_end,
        "n_events": res.n_events,
        "tracked_extent": list(res.tracked_extent),
        "n_sites_recorded": len(res.infections),
    })
    return 0


def _velocity_one(payload) -> tuple:
    q, seed, replicas, dir_index, vec, n = payload
    target = tuple(n * c for c in vec)
    est = mean_hitting(target, q, replicas=replicas, seed=seed)
    return (dir_index, n, target, est.mean, est.stderr)


def _run_velocity(cfg: dict, out: str) -> int:
    d = cfg["d"]
    payloads = [
        (cfg["q"], cfg["seed"], cfg["replicas"], i, vec, n)
        for i, vec in enumerate(cfg["direction"])
        for n in cfg["n_grid"]
    ]
    # one shared seed across the grid: replica streams repeat, so raw
    # noise largely cancels out of the fitted slope
    results = _pool_map(_velocity_one, payloads)
    rows = []
    fits = []
    for i, vec in enumerate(cfg["direction"]):
        points = []
        for dir_index, n, target, mean, stderr in results:
            if dir_index != i:
                continue
            rows.append((dir_index, n, *target, mean, stderr))
            points.append((n, mean, stderr))
        fit = velocity_fit(points, cfg["q"])
        fits.append({
            "direction": list(vec),
            "velocity": fit.velocity,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "normalized_exponent": fit.normalized_exponent,
        })
    header = ["direction", "n"] + [f"x{k + 1}" for k in range(d)] + [
        "mean_tau", "stderr",
    ]
    _write_csv(os.path.join(out, "results.csv"), header, rows)
    _write_summary(out, "velocity", cfg, {
        "fits": fits,
        "theta": float(np.log2(1.0 / cfg["q"])),
    })
    return 0


def _run_gap(cfg: dict, out: str) -> int:
    from .spectral import spectral_gap

    region = _parse_box(cfg["region"]).region()
    res = spectral_gap(region, cfg["q"])
    relax = 1.0 / res.gap if res.gap > 0 else float("inf")
    _write_csv(
        os.path.join(out, "results.csv"),
        ["n_sites", "gap", "relaxation_time", "ergodic"],
        [(region.size, res.gap, relax, res.ergodic)],
    )
    _write_summary(out, "gap", cfg, {
        "gap": res.gap,
        "ergodic": res.ergodic,
        "n_components": res.n_components,
    })
    return 0


def _run_dirichlet(cfg: dict, out: str) -> int:
    from .spectral import dirichlet_eigenvalue

    box = _parse_box(cfg["region"])
    target = tuple(cfg["target"]) if cfg["target"] is not None else None
    lam = dirichlet_eigenvalue(box, cfg["q"], target=target)
    shown = list(target) if target is not None else list(box.corner)
    _write_csv(
        os.path.join(out, "results.csv"),
        ["n_sites", "eigenvalue", "q"],
        [(box.region().size, lam, cfg["q"])],
    )
    _write_summary(out, "dirichlet", cfg, {
        "eigenvalue": lam,
        "target": shown,
    })
    return 0


def _run_bottleneck(cfg: dict, out: str) -> int:
    from .lattice import Box as _Box
    from .pathspace import barrier, bottleneck_measure

    d, q = cfg["d"], cfg["q"]
    rows = []
    heights = []
    for L in range(1, cfg["l_max"] + 1):
        region = _Box.cube(d, L).region()
        target = (L,) * d
        k = barrier(region, target)
        meas = bottleneck_measure(
            lambda w: w.vacancy_count >= k, region, q, d=d, L=L
        )
        rows.append((L, region.size, k, meas.mu, meas.reference_exponent))
        heights.append(k)
    _write_csv(
        os.path.join(out, "results.csv"),
        ["l", "n_sites", "barrier_height", "level_set_mass",
         "reference_exponent"],
        rows,
    )
    _write_summary(out, "bottleneck", cfg, {"barrier_heights": heights})
    return 0


def _run_cutoff(cfg: dict, out: str) -> int:
    from .cutoff import cutoff_curve

    curve = cutoff_curve(
        cfg["n"], cfg["d"], cfg["q"], np.array(cfg["t_grid"]),
        mode=cfg["mode"], replicas=cfg["replicas"], seed=cfg["seed"],
    )
    rows = list(zip(curve.ts, curve.values))
    _write_csv(os.path.join(out, "results.csv"), ["t", "distance"], rows)
    crossings = {}
    for label, level in (("half", 0.5), ("quarter", 0.25)):
        try:
            crossings[f"crossing_{label}"] = curve.crossing_time(level)
        except ValueError:
            crossings[f"crossing_{label}"] = None
    _write_summary(out, "cutoff", cfg, {"mode": curve.mode, **crossings})
    return 0


def _run_theory(cfg: dict, out: str) -> int:
    from .theory import map_fixed_point, theory_exponents

    expo = theory_exponents(cfg["d"], beta=cfg["beta"], alpha=cfg["alpha"])
    fixed = map_fixed_point(cfg["d"])
    rows = [(key, float(val)) for key, val in sorted(expo.items())]
    rows.append(("fixed_point_steps", fixed.steps))
    rows.append(("fixed_point_residual", fixed.residual))
    _write_csv(os.path.join(out, "results.csv"), ["quantity", "value"], rows)
    _write_summary(out, "theory", cfg, {
        "exponents": {k: float(v) for k, v in expo.items()},
        "fixed_point": {
            "value": fixed.value,
            "steps": fixed.steps,
            "residual": fixed.residual,
        },
    })
    return 0


def _run_verify(cfg: dict, out: str) -> int:
    from . import acceptance

    results = acceptance.run_suite(cfg["suite"], names=cfg["checks"])
    print(acceptance.format_results(results))
    _write_csv(
        os.path.join(out, "results.csv"),
        ["check", "passed", "seconds"],
        [(r.name, r.passed, r.seconds) for r in results],
    )
    _write_summary(out, "verify", cfg, {
        "all_passed": all(r.passed for r in results),
        "results": [
            {"name": r.name, "passed": r.passed, "seconds": r.seconds,
             "detail": r.detail}
            for r in results
        ],
    })
    return 0 if all(r.passed for r in results) else 1


_RUNNERS = {
    "simulate": _run_simulate,
    "shape": _run_shape,
    "velocity": _run_velocity,
    "gap": _run_gap,
    "dirichlet": _run_dirichlet,
    "bottleneck": _run_bottleneck,
    "cutoff": _run_cutoff,
    "theory": _run_theory,
    "verify": _run_verify,
}


# ---------------------------------------------------------------------------
# argument wiring


def _add(parser, *flags):
    spec = {
        "d": (["--d"], dict(type=int)),
        "q": (["--q"], dict(type=float)),
        "seed": (["--seed"], dict(type=int)),
        "replicas": (["--replicas"], dict(type=int)),
        "t_max": (["--t-max"], dict(type=float, dest="t_max")),
        "max_events": (["--max-events"], dict(type=int, dest="max_events")),
        "direction": (
            ["--direction"],
            dict(action="append", metavar="X1,..,XD"),
        ),
        "n_grid": (["--n-grid"], dict(dest="n_grid", metavar="A:B:STEP")),
        "t_grid": (["--t-grid"], dict(dest="t_grid", metavar="A:B:STEP")),
        "region": (["--region"], dict(metavar="box:AxB")),
        "target": (["--target"], dict(metavar="X1,..,XD")),
        "n": (["--n"], dict(type=int)),
        "mode": (
            ["--mode"],
            dict(choices=["exact", "all_ones", "monte_carlo"]),
        ),
        "beta": (["--beta"], dict(type=float)),
        "alpha": (["--alpha"], dict(type=float)),
        "l_max": (["--l-max"], dict(type=int, dest="l_max")),
        "suite": (["--suite"], dict(choices=["small", "full"])),
        "checks": (["--check"], dict(action="append", dest="checks")),
    }
    for name in flags:
        names, kwargs = spec[name]
        parser.add_argument(*names, default=None, **kwargs)
    parser.add_argument("--out", default=None, metavar="DIR")
    parser.add_argument("--config", default=None, metavar="FILE")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eastlab",
        description="Simulation and exact analysis of the oriented "
        "constrained spin model on the quadrant.",
    )
    parser.add_argument(
        "--version", action="version", version=f"eastlab {__version__}"
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    _add(sub.add_parser("simulate", help="replicated runs on the quadrant"),
         "d", "q", "seed", "replicas", "t_max", "max_events")
    _add(sub.add_parser("shape", help="render the infected droplet"),
         "d", "q", "seed", "t_max", "max_events")
    _add(sub.add_parser("velocity", help="front speed along a direction"),
         "d", "q", "seed", "replicas", "direction", "n_grid")
    _add(sub.add_parser("gap", help="exact relaxation rate on a box"),
         "region", "q")
    _add(sub.add_parser("dirichlet", help="exact hitting rate on a box"),
         "region", "q", "target")
    _add(sub.add_parser("bottleneck", help="energy barriers up a box ladder"),
         "d", "q", "l_max")
    _add(sub.add_parser("cutoff", help="distance to equilibrium over time"),
         "n", "d", "q", "mode", "t_grid", "replicas", "seed")
    _add(sub.add_parser("theory", help="limit exponents and the map"),
         "d", "beta", "alpha")
    _add(sub.add_parser("verify", help="run the verification battery"),
         "suite", "checks")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        cfg = _resolve(args.cmd, args)
        out = args.out if args.out is not None else "."
        os.makedirs(out, exist_ok=True)
        return _RUNNERS[args.cmd](cfg, out)
    except (ValueError, KeyError, OSError, EastLabError) as exc:
        print(f"eastlab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
