"""Command-line entry point.

Subcommands: sample, sweep, verify-taming, bounds, optimize, reference.
Every run reads a flat `key = value` config file, writes its CSV artifacts
into --out, and drops a manifest.cfg with every default materialized, so any
run can be reproduced byte-for-byte from the manifest alone:

    ktula sample --config run.cfg --out results/
    ktula sample --config results/manifest.cfg --out replay/

Exit codes: 0 success, 1 usage error, 2 numerical or divergence error.
"""

from __future__ import annotations

import os
import sys

import numpy as np

from . import __version__
from .bounds import BoundInputs, ConstantInit, GaussianInit, convergence_constants
from .diagnostics import excess_risk, fit_rate
from .errors import (ConfigurationError, DimensionError, KtulaError, UsageError)
from .potentials import PotentialModel, make_double_well, make_quadratic
from .reference import gaussian_init_kl, grid_minimize, quadrature_target_1d
from .sampler import ChainConfig, SampleBatch, build_model, run_chains
from .sweep import sweep_error_curve
from .taming import TamingParams, verify_taming_properties

SUBCOMMANDS = ("sample", "sweep", "verify-taming", "bounds", "optimize", "reference")

_INT = "int"
_FLOAT = "float"
_STR = "str"
_FLOATS = "floats"   # comma-separated list

_POTENTIAL_KEYS = {
    "potential": _STR, "d": _INT, "quadratic_a": _FLOAT,
    "nn_eta": _FLOAT, "nn_dataset": _STR, "nn_c0": _STR,
}

_SAMPLE_KEYS = {
    **_POTENTIAL_KEYS,
    "beta": _FLOAT, "step_size": _FLOAT, "eps_h": _FLOAT,
    "n_steps": _INT, "n_chains": _INT, "burn_in": _INT, "thinning": _INT,
    "seed": _INT, "init": _STR, "init_value": _FLOATS, "init_sigma": _FLOAT,
    "algorithm": _STR, "divergence_threshold": _FLOAT,
}

_SCHEMAS = {
    "sample": _SAMPLE_KEYS,
    "optimize": {**_SAMPLE_KEYS, "box_lo": _FLOAT, "box_hi": _FLOAT,
                 "resolution": _INT},
    "verify-taming": {**_POTENTIAL_KEYS, "step_size": _FLOAT, "eps_h": _FLOAT,
                      "n_points": _INT, "radius": _FLOAT, "seed": _INT},
    "bounds": {**_POTENTIAL_KEYS, "beta": _FLOAT, "eps_h": _FLOAT,
               "eps": _FLOAT, "c_ls": _FLOAT, "init": _STR,
               "init_value": _FLOATS, "init_sigma": _FLOAT, "j0": _FLOAT,
               "kl0": _FLOAT, "delta": _FLOAT},
    "sweep": {**_POTENTIAL_KEYS, "beta": _FLOAT, "eps_h": _FLOAT,
              "algorithm": _STR, "seed": _INT, "metric": _STR,
              "lambdas": _FLOATS, "n_groups": _INT, "chains_per_group": _INT,
              "thinning": _INT, "sde_time": _FLOAT, "n_steps": _INT,
              "quad_radius": _FLOAT, "quad_grid": _INT, "bins": _INT,
              "extent": _FLOAT, "n_proj": _INT},
    "reference": {**_POTENTIAL_KEYS, "beta": _FLOAT, "radius": _FLOAT,
                  "grid": _INT},
}

_DEFAULTS = {
    "sample": {"potential": "double_well", "d": 1, "quadratic_a": 1.0,
               "nn_eta": 0.5, "nn_dataset": "", "nn_c0": "", "beta": 1.0,
               "step_size": 1e-5, "eps_h": 0.5, "n_steps": 100_000,
               "n_chains": 1, "burn_in": 0, "thinning": 1, "seed": 0,
               "init": "constant", "init_value": (0.0,), "init_sigma": 1.0,
               "algorithm": "ktula", "divergence_threshold": 1e12},
    "verify-taming": {"potential": "double_well", "d": 1, "quadratic_a": 1.0,
                      "nn_eta": 0.5, "nn_dataset": "", "nn_c0": "",
                      "step_size": 1e-5, "eps_h": 0.5, "n_points": 10_000,
                      "radius": 10.0, "seed": 0},
    "bounds": {"potential": "double_well", "d": 1, "quadratic_a": 1.0,
               "nn_eta": 0.5, "nn_dataset": "", "nn_c0": "", "beta": 1.0,
               "eps_h": 0.5, "eps": 0.1, "c_ls": 1.0, "init": "constant",
               "init_value": (0.0,), "init_sigma": 1.0, "delta": 0.01},
    "sweep": {"potential": "double_well", "d": 1, "quadratic_a": 1.0,
              "nn_eta": 0.5, "nn_dataset": "", "nn_c0": "", "beta": 1.0,
              "eps_h": 0.5, "algorithm": "ktula", "seed": 0,
              "metric": "w1_1d", "n_groups": 8, "chains_per_group": 1,
              "thinning": 100, "quad_radius": 8.0, "quad_grid": 8193,
              "bins": 512, "extent": 8.0, "n_proj": 64},
    "reference": {"potential": "double_well", "d": 1, "quadratic_a": 1.0,
                  "nn_eta": 0.5, "nn_dataset": "", "nn_c0": "", "beta": 1.0,
                  "radius": 8.0, "grid": 8193},
}
_DEFAULTS["optimize"] = {**_DEFAULTS["sample"], "beta": 20.0,
                         "box_lo": -3.0, "box_hi": 3.0, "resolution": 201}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _parse_value(key: str, raw: str, kind: str):
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _FLOATS:
            return tuple(float(v) for v in raw.split(",") if v.strip() != "")
        return raw
    except ValueError:
        raise UsageError(f"config key '{key}': cannot parse {raw!r} as {kind}")


def parse_config(path: str, subcommand: str) -> dict:
    """Read a flat key = value file against the subcommand's schema."""
    schema = _SCHEMAS[subcommand]
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    values = {}
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key == "subcommand":
            if raw != subcommand:
                raise UsageError(
                    f"{path}:{lineno}: manifest is for subcommand '{raw}', "
                    f"not '{subcommand}'")
            continue
        if key not in schema:
            valid = ", ".join(sorted(schema))
            raise UsageError(
                f"{path}:{lineno}: unknown key '{key}' for {subcommand}; "
                f"valid keys: {valid}")
        if key in values:
            raise UsageError(f"{path}:{lineno}: duplicate key '{key}'")
        values[key] = _parse_value(key, raw, schema[key])
    return values


def _resolved(subcommand: str, values: dict) -> dict:
    out = dict(_DEFAULTS[subcommand])
    out.update(values)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(out_dir, subcommand, resolved, outputs):
    path = os.path.join(out_dir, "manifest.cfg")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# run manifest; rerun with: ktula {subcommand} "
                 f"--config manifest.cfg --out DIR\n")
        fh.write(f"# tool_version = {__version__}\n")
        fh.write(f"# outputs = {', '.join(outputs)}\n")
        fh.write(f"subcommand = {subcommand}\n")
        for key in sorted(resolved):
            fh.write(f"{key} = {_fmt(resolved[key])}\n")
    return path


def _model_from(resolved: dict) -> PotentialModel:
    label = resolved["potential"]
    if label == "double_well":
        return make_double_well(resolved["d"])
    if label == "quadratic":
        return make_quadratic(resolved["d"], resolved["quadratic_a"])
    if label == "neural_net":
        cfg = ChainConfig(potential="neural_net", d=resolved["d"], beta=1.0,
                          step_size=1e-5, n_steps=1, seed=0,
                          nn_eta=resolved["nn_eta"],
                          nn_dataset=resolved["nn_dataset"],
                          nn_c0=resolved["nn_c0"])
        return build_model(cfg)
    raise UsageError(f"unknown potential '{label}'")


def _chain_config(resolved: dict) -> ChainConfig:
    return ChainConfig(
        potential=resolved["potential"], d=resolved["d"],
        beta=resolved["beta"], step_size=resolved["step_size"],
        eps_h=resolved["eps_h"], n_steps=resolved["n_steps"],
        n_chains=resolved["n_chains"], burn_in=resolved["burn_in"],
        thinning=resolved["thinning"], seed=resolved["seed"],
        init=resolved["init"], init_value=resolved["init_value"],
        init_sigma=resolved["init_sigma"], algorithm=resolved["algorithm"],
        divergence_threshold=resolved["divergence_threshold"],
        quadratic_a=resolved["quadratic_a"], nn_eta=resolved["nn_eta"],
        nn_dataset=resolved["nn_dataset"], nn_c0=resolved["nn_c0"])


def _write_batch(batch: SampleBatch, out_dir) -> list:
    cfg = batch.config
    sample_rows = []
    for k, samples in enumerate(batch.samples):
        for i, row in enumerate(samples):
            step = cfg.burn_in + (i + 1) * cfg.thinning
            sample_rows.append((k, step, *row))
    _write_csv(os.path.join(out_dir, "samples.csv"),
               ["chain", "step"] + [f"coord_{j}" for j in range(cfg.d)],
               sample_rows)
    moment_rows = []
    for k in range(batch.n_chains):
        moment_rows.append((
            k, int(batch.n_accumulated[k]),
            batch.moment_means[k, 0], batch.moment_means[k, 1],
            batch.moment_means[k, 2], batch.moment_means[k, 3],
            bool(batch.diverged[k])))
    _write_csv(os.path.join(out_dir, "moments.csv"),
               ["chain", "n", "mean_sq_norm", "mean_norm_p4", "mean_norm_p6",
                "mean_norm_p8", "diverged"],
               moment_rows)
    return ["samples.csv", "moments.csv"]


def _cmd_sample(resolved, out_dir, strict):
    batch = run_chains(_chain_config(resolved), strict=strict)
    return _write_batch(batch, out_dir), batch


def _cmd_optimize(resolved, out_dir, strict):
    model = _model_from(resolved)
    batch = run_chains(_chain_config(resolved), model=model, strict=strict)
    outputs = _write_batch(batch, out_dir)
    theta_star, u_star = grid_minimize(
        model, (resolved["box_lo"], resolved["box_hi"]), resolved["resolution"])
    risk = excess_risk(batch, model, u_star)
    rows = [("u_star", u_star), ("excess_risk", risk),
            ("mean_final_u", risk + u_star)]
    rows.extend((f"theta_star_{j}", theta_star[j]) for j in range(model.dimension))
    _write_csv(os.path.join(out_dir, "optimize.csv"), ["quantity", "value"], rows)
    outputs.append("optimize.csv")
    return outputs, batch


def _cmd_verify_taming(resolved, out_dir, strict):
    model = _model_from(resolved)
    tp = TamingParams.for_model(model, resolved["step_size"], resolved["eps_h"])
    rng = np.random.default_rng(resolved["seed"])
    pts = rng.uniform(-1.0, 1.0, size=(resolved["n_points"], model.dimension))
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    radii = resolved["radius"] * rng.uniform(0.0, 1.0, size=(resolved["n_points"], 1))
    pts = np.where(norms > 0, pts / norms * radii, pts)
    report = verify_taming_properties(model, tp, pts)
    _write_csv(os.path.join(out_dir, "taming_report.csv"),
               ["property", "pass", "worst_margin", "witness_norm", "n_points"],
               report.rows())
    return ["taming_report.csv"], report


def _cmd_bounds(resolved, out_dir, strict):
    model = _model_from(resolved)
    d = resolved["d"]
    if resolved["init"] == "constant":
        vec = np.asarray(resolved["init_value"], dtype=np.float64)
        if vec.size == 1:
            vec = np.full(d, vec[0])
        init = ConstantInit.at(vec)
    else:
        init = GaussianInit(sigma=resolved["init_sigma"], d=d)
    kl0 = resolved.get("kl0")
    if kl0 is None and resolved["init"] == "gaussian" and d <= 2:
        kl0 = gaussian_init_kl(model, resolved["beta"], resolved["init_sigma"])
        resolved["kl0"] = kl0
    inputs = BoundInputs(
        rc=model.constants, d=d, beta=resolved["beta"],
        eps_h=resolved["eps_h"], init=init, eps=resolved["eps"],
        c_ls=resolved["c_ls"], j0=resolved.get("j0"), kl0=kl0,
        delta=resolved["delta"])
    report = convergence_constants(inputs)
    rows = list(report.rows())
    rows.append(("rate_exponent", 2.0 - inputs.eps_h
                 - inputs.eps * (1.0 - inputs.eps_h / 2.0)))
    _write_csv(os.path.join(out_dir, "bounds.csv"), ["constant", "value"], rows)
    if report.non_finite:
        print("warning: non-finite constants: "
              + ", ".join(report.non_finite), file=sys.stderr)
    return ["bounds.csv"], report


def _cmd_sweep(resolved, out_dir, strict):
    lams = resolved.get("lambdas")
    if not lams or len(lams) < 3:
        raise UsageError("sweep needs at least 3 step sizes in 'lambdas' "
                         "for rate fitting")
    if ("sde_time" in resolved) == ("n_steps" in resolved):
        raise UsageError("sweep needs exactly one of sde_time and n_steps")
    model = _model_from(resolved)
    curve = sweep_error_curve(
        model, resolved["beta"], lams, resolved["n_groups"], resolved["seed"],
        resolved["metric"], sde_time=resolved.get("sde_time"),
        n_steps=resolved.get("n_steps"),
        chains_per_group=resolved["chains_per_group"],
        thinning=resolved["thinning"], eps_h=resolved["eps_h"],
        algorithm=resolved["algorithm"], quad_radius=resolved["quad_radius"],
        quad_grid=resolved["quad_grid"], bins=resolved["bins"],
        extent=resolved["extent"], n_proj=resolved["n_proj"])
    fit = fit_rate(curve)
    _write_csv(os.path.join(out_dir, "error_curve.csv"),
               ["lambda", "error", "error_std", "metric"],
               [(lam, err, std, curve.metric) for lam, err, std in curve.points])
    _write_csv(os.path.join(out_dir, "rate_fit.csv"),
               ["slope", "intercept", "r2"],
               [(fit.slope, fit.intercept, fit.r2)])
    return ["error_curve.csv", "rate_fit.csv"], fit


def _cmd_reference(resolved, out_dir, strict):
    model = _model_from(resolved)
    if model.dimension != 1:
        raise DimensionError("reference tables are 1-D; set d = 1")
    target = quadrature_target_1d(model, resolved["beta"], resolved["radius"],
                                  resolved["grid"])
    _write_csv(os.path.join(out_dir, "reference.csv"),
               ["x", "density", "cdf"],
               zip(target.grid, target.density, target.cdf))
    return ["reference.csv"], target

_HANDLERS = {
    "sample": _cmd_sample,
    "optimize": _cmd_optimize,
    "verify-taming": _cmd_verify_taming,
    "bounds": _cmd_bounds,
    "sweep": _cmd_sweep,
    "reference": _cmd_reference,
}

_USAGE = (f"usage: ktula {{{'|'.join(SUBCOMMANDS)}}} --config PATH "
          f"[--out DIR] [--seed N] [--strict]")


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit code."""
    try:
        return _dispatch(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(_USAGE, file=sys.stderr)
        return 1
    except (ConfigurationError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KtulaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(argv) -> int:
    if not argv or argv[0] in ("-h", "--help"):
        print(_USAGE)
        return 0 if argv else 1
    subcommand = argv[0]
    if subcommand not in SUBCOMMANDS:
        raise UsageError(f"unknown subcommand '{subcommand}'")
    config_path = None
    out_dir = "."
    seed_override = None
    strict = False
    args = list(argv[1:])
    while args:
        flag = args.pop(0)
        if flag == "--config":
            if not args:
                raise UsageError("--config needs a path")
            config_path = args.pop(0)
        elif flag == "--out":
            if not args:
                raise UsageError("--out needs a directory")
            out_dir = args.pop(0)
        elif flag == "--seed":
            if not args:
                raise UsageError("--seed needs an integer")
            try:
                seed_override = int(args.pop(0))
            except ValueError:
                raise UsageError("--seed needs an integer")
        elif flag == "--strict":
            strict = True
        else:
            raise UsageError(f"unknown flag '{flag}'")
    if config_path is None:
        raise UsageError("--config is required")

    values = parse_config(config_path, subcommand)
    resolved = _resolved(subcommand, values)
    if seed_override is not None and "seed" in _SCHEMAS[subcommand]:
        resolved["seed"] = seed_override
    os.makedirs(out_dir, exist_ok=True)
    outputs, _ = _HANDLERS[subcommand](resolved, out_dir, strict)
    _write_manifest(out_dir, subcommand, resolved, outputs)
    for name in outputs:
        print(os.path.join(out_dir, name))
    return 0


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
