"""Command-line entry point.

Subcommands: denoise, sweep, consistency, degrees, spectrum.  Parameters
live in an INI-style config file with one section per command; any key can
be overridden on the command line with --key=value (flags win).  Outputs go
to a fixed layout under the output directory: records.csv, summary.json,
config.echo.

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from multiprocessing import Pool

import numpy as np

from . import experiments as xp
from .continuum import FourierFunction, continuum_solve_uniform
from .geometry import (
    INDICATOR,
    UNIFORM,
    DensitySpec,
    KernelProfile,
    PointCloud,
    sample_cloud,
)
from .graph import build_graph, dense_spectrum, dirichlet_energy, l2_mu_n
from .solver import SolverError, resolvent_problem, solve_resolvent

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_IO = 3


class ValidationError(Exception):
    pass


def parse_modes(text, d):
    """Fourier modes from 'k:a:b;k:a:b' with k a comma-joined integer vector."""
    entries = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ValidationError(f"bad mode entry {part!r} (want k:a:b)")
        k = tuple(int(c) for c in pieces[0].split(","))
        entries.append((k, float(pieces[1]), float(pieces[2])))
    if not entries:
        raise ValidationError("empty mode list")
    return FourierFunction.from_modes(d, entries)


def parse_density(params):
    kind = params.get("density", "uniform")
    if kind == "uniform":
        return UNIFORM
    if kind == "cosine_bump":
        amp = float(params.get("density_amplitude", "0.5"))
        mode = tuple(int(c) for c in params.get("density_mode", "1").split(","))
        return DensitySpec("cosine_bump", amp, mode)
    raise ValidationError(f"unknown density {kind!r}")


def parse_noise(params):
    return xp.NoiseSpec(
        params.get("noise", "gaussian"), float(params.get("noise_scale", "0.1"))
    )


def parse_kernel(params):
    return KernelProfile(params.get("kernel", "indicator"))


def _collect_params(args, extras):
    cfg = configparser.ConfigParser()
    if args.config:
        if not os.path.exists(args.config):
            raise ValidationError(f"config file {args.config!r} not found")
        cfg.read(args.config)
    params = {}
    if cfg.has_section(args.command):
        params.update(dict(cfg.items(args.command)))
    errors = []
    for extra in extras:
        if not extra.startswith("--") or "=" not in extra:
            errors.append(f"cannot parse override {extra!r} (want --key=value)")
            continue
        key, _, value = extra[2:].partition("=")
        params[key.replace("-", "_")] = value
    if errors:
        raise ValidationError("; ".join(errors))
    if args.out is not None:
        params["out"] = args.out
    if args.seed is not None:
        params["seed"] = str(args.seed)
    return params


def _resolve_threads(args, params):
    if args.threads is not None:
        return args.threads
    if "threads" in params:
        return int(params["threads"])
    env = os.environ.get("POLYLAP_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _outdir(params):
    out = params.get("out", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _echo_config(out, params):
    with open(os.path.join(out, "config.echo"), "w", encoding="utf-8") as f:
        for key in sorted(params):
            f.write(f"{key}={params[key]}\n")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_points_csv(path, d):
    points, labels = [], []
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if len(header) != d + 1:
            raise ValidationError(f"expected {d + 1} columns in {path!r}")
        for lineno, line in enumerate(f, start=2):
            vals = line.strip().split(",")
            if len(vals) != d + 1:
                raise ValidationError(f"{path}:{lineno}: expected {d + 1} fields")
            try:
                nums = [float(v) for v in vals]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric field")
            points.append(nums[:d])
            labels.append(nums[d])
    if not points:
        raise ValidationError(f"{path!r} contains no data rows")
    return np.array(points), np.array(labels)


def cmd_denoise(params, threads, dry_run):
    d = int(params.get("d", "1"))
    s = int(params.get("s", "1"))
    eps = float(params["eps"])
    tau = float(params.get("tau", "0.01"))
    tol = float(params.get("tol", "1e-10"))
    kernel = parse_kernel(params)
    seed = int(params.get("seed", "0"))
    if eps <= 0 or eps > 0.5:
        raise ValidationError("eps must lie in (0, 1/2]")
    if dry_run:
        return {"command": "denoise", "d": d, "s": s, "eps": eps, "tau": tau}

    if "input_csv" in params:
        points, y = _load_points_csv(params["input_csv"], d)
        points = points % 1.0
    else:
        n = int(params["n"])
        g = parse_modes(params["modes"], d)
        noise = parse_noise(params)
        cloud = sample_cloud(parse_density(params), n, d, seed)
        points = cloud.points
        y = xp.gen_labels(g, cloud, noise, xp.derive_seed(seed, 1))

    graph = build_graph(PointCloud(points, UNIFORM, seed), eps, kernel)
    try:
        report = solve_resolvent(resolvent_problem(graph, y, tau, s), tol=tol)
    except SolverError as err:
        raise err
    u = report.solution

    out = _outdir(params)
    with open(os.path.join(out, "records.csv"), "w", encoding="utf-8") as f:
        f.write(",".join([f"x{i + 1}" for i in range(d)] + ["y", "u"]) + "\n")
        for row, yi, ui in zip(points, y, u):
            f.write(",".join(repr(float(v)) for v in row) + f",{float(yi)!r},{float(ui)!r}\n")
    reg = dirichlet_energy(graph, u, s)
    energy = l2_mu_n(u - y) ** 2 + tau * reg
    summary = {
        "energy": energy,
        "regularizer": reg,
        "solver_iterations": report.iterations,
        "solver_residual": report.final_relative_residual,
        "total_err_vs_labels": l2_mu_n(u - y),
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    _echo_config(out, params)
    return summary


def cmd_sweep(params, threads, dry_run):
    d = int(params.get("d", "1"))
    s = int(params.get("s", "1"))
    n_grid = tuple(int(v) for v in params.get(
        "n_grid", "1024,2048,4096,8192,16384,32768").split(","))
    schedule = xp.Schedule(
        d=d,
        s=s,
        n_grid=n_grid,
        eps_mult=float(params.get("eps_mult", "1.5")),
        tau_mult=float(params.get("tau_mult", "1.0")),
    )
    g = parse_modes(params.get("modes", "1:1.0:0.0;2:0.0:0.5"), d)
    noise = parse_noise(params)
    trials = int(params.get("trials", "10"))
    seed = int(params.get("seed", "0"))
    tol = float(params.get("tol", "1e-10"))
    resolved = {
        "command": "sweep", "d": d, "s": s, "n_grid": list(n_grid),
        "eps": [schedule.eps_of(n) for n in n_grid],
        "tau": [schedule.tau_of(n) for n in n_grid],
        "trials": trials, "seed": seed,
    }
    if dry_run:
        return resolved

    if threads > 1:
        with Pool(threads) as pool:
            result = xp.rate_sweep(schedule, g, noise, trials, seed, tol=tol, map_fn=pool.map)
    else:
        result = xp.rate_sweep(schedule, g, noise, trials, seed, tol=tol)
    if result.failure_count == len(result.records):
        raise SolverError("every trial failed", None)

    out = _outdir(params)
    xp.write_records_csv(result.records, os.path.join(out, "records.csv"))
    summary = {
        "slope": result.slope_vs_rate,
        "stderr": result.slope_vs_rate_stderr,
        "predicted": result.predicted_exponent,
        "slope_vs_n": result.slope_vs_n,
        "slope_vs_n_stderr": result.slope_vs_n_stderr,
        "failures": result.failure_count,
        "config": resolved,
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    _echo_config(out, params)
    return summary


def cmd_consistency(params, threads, dry_run):
    d = int(params.get("d", "1"))
    s = int(params.get("s", "1"))
    u = parse_modes(params.get("modes", "1:0.0:1.0"), d)
    eps_grid = [float(v) for v in params.get("eps_grid", "0.2,0.14,0.1,0.07").split(",")]
    k_mult = float(params.get("k_mult", "40"))
    trials = int(params.get("trials", "5"))
    seed = int(params.get("seed", "0"))
    n_cap = int(params.get("n_cap", "100000000"))
    rule = xp.default_n_rule(k_mult, d, s)
    resolved = {
        "command": "consistency", "d": d, "s": s, "eps_grid": eps_grid,
        "n": [rule(e) for e in eps_grid], "trials": trials, "seed": seed,
    }
    if dry_run:
        return resolved

    result = xp.consistency_sweep(u, UNIFORM, s, eps_grid, rule, trials, seed, n_cap=n_cap)
    out = _outdir(params)
    xp.write_records_csv(result.records, os.path.join(out, "records.csv"))
    summary = {"slope": result.slope, "stderr": result.slope_stderr, "config": resolved}
    _write_json(os.path.join(out, "summary.json"), summary)
    _echo_config(out, params)
    return summary


def cmd_degrees(params, threads, dry_run):
    n = int(params.get("n", "10000"))
    d = int(params.get("d", "1"))
    eps = float(params.get("eps", "0.05"))
    trials = int(params.get("trials", "10"))
    seed = int(params.get("seed", "0"))
    resolved = {"command": "degrees", "n": n, "d": d, "eps": eps, "trials": trials}
    if dry_run:
        return resolved
    summary_obj = xp.degree_concentration_check(
        n, d, eps, parse_density(params), parse_kernel(params), trials, seed,
        cap_mult=float(params.get("cap_mult", "10")),
    )
    out = _outdir(params)
    summary = {
        "min_normalized_degree": summary_obj.min_normalized_degree,
        "max_normalized_degree": summary_obj.max_normalized_degree,
        "max_neighbor_count": summary_obj.max_neighbor_count,
        "neighbor_cap": summary_obj.neighbor_cap,
        "within_cap": summary_obj.within_cap,
        "config": resolved,
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    _echo_config(out, params)
    return summary


def cmd_spectrum(params, threads, dry_run):
    d = int(params.get("d", "1"))
    eps = float(params["eps"])
    seed = int(params.get("seed", "0"))
    if "input_csv" in params:
        points, _ = _load_points_csv(params["input_csv"], d)
        points = points % 1.0
    else:
        n = int(params.get("n", "100"))
        points = sample_cloud(parse_density(params), n, d, seed).points
    resolved = {"command": "spectrum", "d": d, "eps": eps, "n": len(points)}
    if dry_run:
        return resolved
    graph = build_graph(PointCloud(points, UNIFORM, seed), eps, parse_kernel(params))
    vals, _ = dense_spectrum(graph, threshold=int(params.get("dense_threshold", "500")))
    out = _outdir(params)
    summary = {"eigenvalues": [float(v) for v in vals], "config": resolved}
    _write_json(os.path.join(out, "summary.json"), summary)
    _echo_config(out, params)
    return summary


COMMANDS = {
    "denoise": cmd_denoise,
    "sweep": cmd_sweep,
    "consistency": cmd_consistency,
    "degrees": cmd_degrees,
    "spectrum": cmd_spectrum,
}


def main(argv=None):
    # allow_abbrev off: unknown --key=value pairs must reach the override
    # parser instead of being prefix-matched onto the built-in flags
    parser = argparse.ArgumentParser(prog="polylap", description=__doc__, allow_abbrev=False)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="INI config file with one section per command")
    parser.add_argument("--out", help="output directory (default: 'out')")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--dry-run", action="store_true",
                        help="validate and print the resolved parameters only")
    args, extras = parser.parse_known_args(argv)

    try:
        params = _collect_params(args, extras)
        threads = _resolve_threads(args, params)
        result = COMMANDS[args.command](params, threads, args.dry_run)
    except (ValidationError, KeyError, ValueError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except MemoryError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO

    if args.dry_run:
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        print(json.dumps({k: v for k, v in result.items() if k != "config"},
                         indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
