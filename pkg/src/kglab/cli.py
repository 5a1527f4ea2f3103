"""Command-line entry point: ``kglab <subcommand> [--config FILE] [--key value ...]``.

Configuration is a flat ``key = value`` file (``#`` starts a comment); every
key can be overridden with ``--key value``.  Artifacts go to the directory in
``out`` (or ``$KGLAB_OUT``): a CSV per experiment plus a JSON summary echoing
the configuration.  CSVs depend only on the configuration and seed.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 failed
validation check.
"""
import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._accel import backend
from ._parallel import default_workers
from .covariance import SQRT2, CharCoords, ToleranceError, covariance_matrix, write_covariance_csv
from .kernels import ModelParams

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATE = 0, 2, 3, 4
SUBCOMMANDS = ("validate", "cov", "sample", "picard", "lil", "mc", "simlil", "scan", "propagate")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


class NumericalFailure(RuntimeError):
    pass


def _point(text):
    parts = [float(v) for v in str(text).split(",")]
    if len(parts) != 2:
        raise ValueError("expected 't,x'")
    return tuple(parts)


def _points(text):
    return [_point(p) for p in str(text).split(";") if p.strip()]


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


# key -> (parser, default); None default means required by the subcommand that uses it
COMMON = {
    "a": (float, 2.0),
    "m": (float, 1.0),
    "T": (float, 2.0),
    "seed": (int, 0),
    "replicas": (int, 100),
    "out": (str, "."),
}
SPECIFIC = {
    "validate": {},
    "cov": {"p": (_point, "1,0"), "q": (_point, "1,0"), "points": (_points, "")},
    "sample": {"points": (_points, "1,0;0.5,0.25;0.75,-0.25"), "method": (str, "exact"), "step": (float, 2.0**-8)},
    "picard": {"x_lo": (float, -0.5), "x_hi": (float, 0.5), "step": (float, 2.0**-7), "tol": (float, 1e-8),
               "max_iter": (int, 50)},
    "lil": {"w": (float, 0.5), "z": (float, 1.0), "n_min": (int, 4), "n_max": (int, 20)},
    "mc": {"z_lo": (float, 1.0), "z_hi": (float, 1.02), "w0": (float, 0.5), "n_min": (int, 12), "n_max": (int, 20),
           "process": (str, "u"), "points_per_shift": (int, 3)},
    "simlil": {"z0": (float, 1.0), "w_max": (float, 0.5), "w_count": (int, 8), "n_min": (int, 12), "n_max": (int, 20)},
    "scan": {"z_lo": (float, 0.05), "z_hi": (float, 0.15), "w0": (float, 2.0), "n_star": (int, 16),
             "null_runs": (int, 200)},
    "propagate": {"z_lo": (float, 0.05), "z_hi": (float, 0.15), "w0": (float, 2.0), "n_star": (int, 16),
                  "null_runs": (int, 200), "w_values": (_floats, "2.05,2.25,2.5")},
}
SPECIFIC_DEFAULT_PARAMS = {
    "scan": {"a": 0.5, "m": 0.25, "T": 3.0},
    "propagate": {"a": 0.5, "m": 0.25, "T": 3.0},
    "lil": {"T": 3.0},
    "mc": {"T": 3.0},
    "simlil": {"T": 3.0},
    "picard": {"a": 2.0, "m": 1.2, "T": 1.5},
}


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", "expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def _parse_overrides(tokens):
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(tok, "unexpected argument")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(key, "missing value")
            value = tokens[i + 1]
            i += 2
        out[key.replace("-", "_")] = value
    return out


def build_config(command, file_values, overrides):
    """Merge defaults, file and flags, then convert and validate every key."""
    schema = dict(COMMON)
    schema.update(SPECIFIC[command])
    raw = {k: v[1] for k, v in schema.items()}
    raw.update(SPECIFIC_DEFAULT_PARAMS.get(command, {}))
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in schema:
                raise ConfigError(key, f"unknown key for '{command}' (known: {', '.join(schema)})")
            raw[key] = value
    cfg = {}
    for key, (conv, _) in schema.items():
        value = raw[key]
        try:
            cfg[key] = conv(value) if isinstance(value, str) or conv in (float, int) else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"cannot parse {value!r} ({exc})") from None
    if os.environ.get("KGLAB_OUT"):
        cfg["out"] = os.environ["KGLAB_OUT"]
    try:
        ModelParams(cfg["a"], cfg["m"], cfg["T"])
    except ValueError as exc:
        key = str(exc).split(" ", 1)[0]
        raise ConfigError(key, str(exc)) from None
    if cfg["replicas"] < 1:
        raise ConfigError("replicas", "must be at least 1")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    _check_specific(command, cfg)
    return cfg


def _check_specific(command, cfg):
    def positive(key):
        if not cfg[key] > 0:
            raise ConfigError(key, "must be positive")

    if command == "sample":
        if cfg["method"] not in ("exact", "walsh"):
            raise ConfigError("method", "must be 'exact' or 'walsh'")
        positive("step")
        if not cfg["points"]:
            raise ConfigError("points", "no points given")
    if command == "picard":
        positive("step")
        positive("tol")
        if cfg["max_iter"] < 1:
            raise ConfigError("max_iter", "must be at least 1")
        if cfg["x_hi"] < cfg["x_lo"]:
            raise ConfigError("x_hi", "must not be below x_lo")
        n = cfg["T"] / cfg["step"]
        if abs(n - round(n)) > 1e-9:
            raise ConfigError("T", "must be a multiple of step")
    for key in ("n_min", "n_star"):
        if key in cfg and 2.0 ** (-cfg[key]) >= math.exp(-math.e):
            raise ConfigError(key, "scales 2^-n must be below e^-e (n >= 4)")
    if "n_max" in cfg and cfg["n_max"] < cfg["n_min"]:
        raise ConfigError("n_max", "must not be below n_min")
    if command == "mc":
        if cfg["process"] not in ("u", "Y", "bm"):
            raise ConfigError("process", "must be 'u', 'Y' or 'bm'")
        if cfg["z_lo"] <= 0:
            raise ConfigError("z_lo", "must be positive")
        if cfg["z_hi"] < cfg["z_lo"]:
            raise ConfigError("z_hi", "must not be below z_lo")
        if cfg["points_per_shift"] < 3:
            raise ConfigError("points_per_shift", "must be at least 3")
    if command in ("scan", "propagate"):
        if cfg["z_lo"] <= 0:
            raise ConfigError("z_lo", "must be positive")
        if cfg["z_hi"] <= cfg["z_lo"]:
            raise ConfigError("z_hi", "must exceed z_lo")
        if cfg["w0"] < 0:
            raise ConfigError("w0", "must be non-negative")
        if cfg["m"] * 2 != cfg["a"] and abs(cfg["a"] ** 2 / 4 - cfg["m"] ** 2) > 1e-12:
            raise ConfigError("m", "scan and propagation need critical damping m = a/2")
    if command == "propagate" and any(w <= cfg["w0"] for w in cfg["w_values"]):
        raise ConfigError("w_values", "must all exceed w0")
    if command == "simlil" and cfg["w_max"] < 0:
        raise ConfigError("w_max", "must be non-negative")


# ---------------------------------------------------------------------------
# artifacts


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_summary(cfg, command, results, started):
    path = os.path.join(cfg["out"], f"{command}_summary.json")
    doc = {
        "command": command,
        "version": __version__,
        "backend": backend(),
        "seed": cfg["seed"],
        "config": cfg,
        "results": results,
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _params(cfg):
    return ModelParams(cfg["a"], cfg["m"], cfg["T"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg, workers):
    from .validation import run_validation

    rows = run_validation(sys.stdout)
    failed = [r for r in rows if not r[1]]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return (EXIT_VALIDATE if failed else EXIT_OK), {"checks": [{"name": r[0], "passed": r[1], "detail": r[2]}
                                                               for r in rows]}


def cmd_cov(cfg, workers):
    P = _params(cfg)
    if cfg["points"]:
        C = covariance_matrix(cfg["points"], P)
        path = os.path.join(cfg["out"], "covariance.csv")
        write_covariance_csv(path, cfg["points"], C)
        print(path)
        return EXIT_OK, {"matrix_csv": path, "n_points": len(cfg["points"])}
    from .covariance import covariance

    value = covariance(cfg["p"], cfg["q"], P)
    print(f"{value:.15g}")
    return EXIT_OK, {"covariance": value}


def cmd_sample(cfg, workers):
    from .sampler import FieldSample, GaussianEnsemble, SeedSpec, grid_walsh_many, write_samples_csv

    P = _params(cfg)
    pts = np.array(cfg["points"], dtype=float)
    ids = range(cfg["replicas"])
    if cfg["method"] == "exact":
        ens = GaussianEnsemble(pts, P)
        vals = ens.draw_many(cfg["seed"], ids)
        tag = "exact"
    else:
        if P.regime.value != "critical":
            raise ConfigError("method", "the grid sampler needs critical damping")
        vals = grid_walsh_many(pts, P.a, cfg["step"], cfg["seed"], ids)
        tag = "grid_walsh"
    samples = [FieldSample(pts, vals[k], SeedSpec(cfg["seed"], r), tag) for k, r in enumerate(ids)]
    path = os.path.join(cfg["out"], "samples.csv")
    write_samples_csv(path, samples)
    emp = np.cov(vals.T) if len(vals) > 1 else np.zeros((len(pts), len(pts)))
    return EXIT_OK, {"samples_csv": path, "empirical_covariance": np.atleast_2d(emp)}


def cmd_picard(cfg, workers):
    from .reduction import decompose, solve_general

    P = _params(cfg)
    u, uC, rep = solve_general((cfg["x_lo"], cfg["x_hi"]), P, cfg["step"], cfg["seed"], cfg["tol"], cfg["max_iter"])
    lip = decompose(u, uC, P, region=(cfg["x_lo"], cfg["x_hi"]))
    win = u.crop(cfg["x_lo"], cfg["x_hi"])
    out = cfg["out"]
    win.to_csv(os.path.join(out, "picard_u.csv"))
    win.to_binary(os.path.join(out, "picard_u.bin"))
    uC.crop(cfg["x_lo"], cfg["x_hi"]).to_csv(os.path.join(out, "picard_uC.csv"))
    res = {"iterations": rep.iterations, "residual_history": rep.residual_history, "converged": rep.converged,
           "lipschitz_statistic": lip.statistic, "lipschitz_bound": lip.bound}
    if not rep.converged:
        print(f"Picard iteration did not converge in {rep.iterations} iterations", file=sys.stderr)
        return EXIT_NUMERIC, res
    return EXIT_OK, res


def cmd_lil(cfg, workers):
    from .regularity import brownian_lil, lil_experiment, write_records

    P = _params(cfg)
    rng_n = range(cfg["n_min"], cfg["n_max"] + 1)
    res = lil_experiment(CharCoords(cfg["w"], cfg["z"]), rng_n, P, cfg["replicas"], cfg["seed"], workers)
    bm = brownian_lil(rng_n, cfg["replicas"], cfg["seed"], workers)
    write_records(os.path.join(cfg["out"], "lil.csv"), res.records())
    summary = {"n": res.n, "median_running_max": res.median, "iqr_running_max": res.iqr,
               "bm_median_running_max": bm.median}
    if cfg["n_min"] <= 12 and cfg["n_max"] >= 20:
        summary["stabilization_20_12"] = res.stabilization()
        summary["bm_stabilization_20_12"] = bm.stabilization()
    return EXIT_OK, summary


def cmd_mc(cfg, workers):
    from .regularity import levy_limit, mc_experiment, write_records

    P = _params(cfg)
    res = mc_experiment((cfg["z_lo"], cfg["z_hi"]), cfg["w0"], range(cfg["n_min"], cfg["n_max"] + 1), P,
                        cfg["replicas"], cfg["seed"], cfg["process"], cfg["points_per_shift"], workers)
    write_records(os.path.join(cfg["out"], "mc.csv"), res.records())
    summary = {"n": res.n, "median_sup_ratio_mc": res.median_mc, "median_sup_ratio_lil": res.median_lil,
               "base_grid_points": res.grid_points}
    if cfg["process"] == "Y":
        summary["levy_limit"] = levy_limit(cfg["w0"] / SQRT2, cfg["a"])
    return EXIT_OK, summary


def cmd_simlil(cfg, workers):
    from .regularity import IncrementStatistic, sim_lil_bound, write_records

    P = _params(cfg)
    w_grid = np.linspace(0.0, cfg["w_max"], cfg["w_count"]) if cfg["w_max"] > 0 else np.array([0.0])
    res = sim_lil_bound(cfg["z0"], w_grid, range(cfg["n_min"], cfg["n_max"] + 1), P, cfg["replicas"], cfg["seed"],
                        workers)
    recs = []
    from .regularity import lil_norm

    for r in range(cfg["replicas"]):
        for k, h in enumerate(res.h):
            num = float(res.per_scale_sup[r, k] * lil_norm(h))
            recs.append(IncrementStatistic(float(h), CharCoords(float("nan"), cfg["z0"]), num, r))
    write_records(os.path.join(cfg["out"], "simlil.csv"), recs)
    return EXIT_OK, {"n": res.n, "median_per_scale_sup": res.median, "bound": res.bound, "bounded": res.bounded,
                     "growth": res.growth}


def _scan_runs(cfg):
    from .regularity import singularity_scan
    from .sampler import SeedSpec

    P = _params(cfg)
    for r in range(cfg["replicas"]):
        seed = SeedSpec(cfg["seed"], r)
        yield r, seed, P, singularity_scan((cfg["z_lo"], cfg["z_hi"]), cfg["w0"], cfg["n_star"], P, seed,
                                           cfg["null_runs"])


def cmd_scan(cfg, workers):
    from .regularity import IncrementStatistic, lil_norm, write_records

    recs, exceed, degenerate = [], [], False
    for r, seed, P, scan in _scan_runs(cfg):
        degenerate |= scan.degenerate
        num = scan.statistic * float(lil_norm(scan.h_star))
        if not scan.degenerate:
            recs.append(IncrementStatistic(scan.h_star, scan.Z_hat, num, r))
        exceed.append(scan.exceeds(0.95))
    write_records(os.path.join(cfg["out"], "scan.csv"), recs)
    return EXIT_OK, {"exceedance_rate_95": float(np.mean(exceed)), "degenerate": degenerate}


def cmd_propagate(cfg, workers):
    from .regularity import IncrementStatistic, lil_norm, propagation_experiment, write_records

    recs, exceed, xy = [], [], []
    for r, seed, P, scan in _scan_runs(cfg):
        if scan.degenerate:
            raise ConfigError("w0", "w0 = 0 gives a degenerate scan")
        res = propagation_experiment(scan, cfg["w_values"], P, seed, cfg["null_runs"])
        for w, s in zip(res.w_values, res.statistic):
            recs.append(IncrementStatistic(scan.h_star, CharCoords(float(w), res.Z), float(s * lil_norm(scan.h_star)), r))
        exceed.append(res.exceed)
        xy.append(res.x_over_y)
    write_records(os.path.join(cfg["out"], "propagate.csv"), recs)
    return EXIT_OK, {"w_values": cfg["w_values"], "exceedance_rate": np.mean(exceed, axis=0),
                     "max_x_over_y": np.max(xy, axis=0)}


COMMANDS = {
    "validate": cmd_validate, "cov": cmd_cov, "sample": cmd_sample, "picard": cmd_picard, "lil": cmd_lil,
    "mc": cmd_mc, "simlil": cmd_simlil, "scan": cmd_scan, "propagate": cmd_propagate,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="kglab", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--workers", type=int, default=None, help="worker processes for replicas")
    args, rest = parser.parse_known_args(argv)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, _parse_overrides(rest))
        workers = args.workers if args.workers is not None else default_workers()
        if workers < 1:
            raise ConfigError("workers", "must be at least 1")
        os.makedirs(cfg["out"], exist_ok=True)
        code, results = COMMANDS[args.command](cfg, workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: config key 'out' or 'config': {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ToleranceError, NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RuntimeError as exc:  # FactorizationError and friends
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command != "cov" or cfg["points"]:
        cfg_echo = dict(cfg, workers=workers)
        write_summary(cfg_echo, args.command, results, started)
    return code


if __name__ == "__main__":
    sys.exit(main())
