"""Command-line interface: simulate / moments / solve / match / gradcheck / surface.

Configuration comes from a JSON file (``--config``) merged with ``--key value``
overrides that mirror the JSON fields (dotted keys reach nested blocks).
Structured results are JSON, matrices and traces are headerless CSV.  Exit
status 0 means success, 1 a usage or I/O problem, and 2 an infeasibility
outcome: the closed-form solver rejected the targets or the matcher stopped
at the feasible-region boundary.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .analytic import cpmf_solve, pmf_solve
from .dispersion import EdFamily, poisson_normal, unit_summand
from .empirical import DEFAULT_MAX_PAIRS, estimate_moments
from .errors import FeasibilityError, PriorMatchError
from .layered import model_for
from .matching import (
    MatchProblem,
    OptimizerConfig,
    Regularizer,
    SampleBudget,
    STATUS_BOUNDARY,
    estimate_prior_moments,
    gradient_check,
    match,
)
from .params import hyper_from_json, hyper_to_json, pack
from .sampling import RngHandle, simulate_cpmf, simulate_hpf, simulate_pmf

SUBCOMMANDS = ("simulate", "moments", "solve", "match", "gradcheck", "surface")


def _parse_override(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _set_nested(config: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = config
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"override {dotted!r} descends into a non-object field")
    node[keys[-1]] = value


def _load_config(args, extra: list[str]) -> dict:
    config: dict = {}
    if args.config is not None:
        config = fileio.read_json(args.config)
        if not isinstance(config, dict):
            raise ValueError("config file must hold a JSON object")
    if len(extra) % 2 != 0:
        raise ValueError(f"overrides must come as --key value pairs, got {extra!r}")
    for flag, raw in zip(extra[::2], extra[1::2]):
        if not flag.startswith("--"):
            raise ValueError(f"expected an override flag, got {flag!r}")
        _set_nested(config, flag[2:], _parse_override(raw))
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["out"] = args.out
    if args.threads is not None:
        config["threads"] = args.threads
    config.setdefault("seed", 0)
    config.setdefault("threads", os.cpu_count() or 1)
    return config


def _out_dir(config: dict) -> Path:
    out = Path(config.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ed_from_config(obj) -> EdFamily:
    if obj is None:
        raise ValueError("this command needs an 'ed' block for the cpmf model")
    name = obj.get("name", "poisson_normal")
    if name == "poisson_normal":
        return poisson_normal(mean=float(obj.get("mean", 1.0)), std=float(obj.get("std", 1.0)))
    if name == "unit_summand":
        return unit_summand()
    if name == "custom":
        return EdFamily(
            name="custom",
            kappa=float(obj.get("kappa", 1.0)),
            psi_prime=float(obj["psi_prime"]),
            psi_double_prime=float(obj["psi_double_prime"]),
        )
    raise ValueError(f"unknown observation family {name!r}")


def _resolved(config: dict) -> dict:
    return {"config": config, "seed": config["seed"]}


def _cmd_simulate(config: dict) -> int:
    hyper_json = config["model"]
    model_tag = hyper_json["model"]
    ed = _ed_from_config(config.get("ed")) if model_tag == "cpmf" else None
    hyper = hyper_from_json(hyper_json, ed=ed)
    rows, cols = int(config["rows"]), int(config["cols"])
    rng = RngHandle(int(config["seed"]), int(config.get("stream", 0)))
    threads = int(config["threads"])
    if model_tag == "pmf":
        matrix = simulate_pmf(rng, hyper, rows, cols, threads=threads)
    elif model_tag == "cpmf":
        matrix = simulate_cpmf(rng, hyper, rows, cols, threads=threads)
    else:
        matrix = simulate_hpf(rng, hyper, rows, cols, threads=threads)
    out = _out_dir(config)
    fileio.write_matrix_csv(out / "matrix.csv", matrix)
    sidecar = {
        "hyperparameters": hyper_json,
        "ed": config.get("ed"),
        "rows": rows,
        "cols": cols,
        **_resolved(config),
    }
    fileio.write_json(out / "matrix.json", sidecar)
    print(f"wrote {out / 'matrix.csv'} ({rows}x{cols})")
    return 0


def _cmd_moments(config: dict) -> int:
    matrix = fileio.read_matrix_csv(config["input"])
    est = estimate_moments(
        matrix,
        max_pairs=int(config.get("max_pairs", DEFAULT_MAX_PAIRS)),
        rng=RngHandle(int(config["seed"])),
    )
    out = _out_dir(config)
    payload = {**fileio.estimate_to_dict(est), **_resolved(config)}
    fileio.write_json(out / "moments.json", payload)
    print(f"wrote {out / 'moments.json'}")
    return 0


def _cmd_solve(config: dict) -> int:
    targets = fileio.moments_from_dict(config["targets"])
    model_tag = config.get("model", "pmf")
    if model_tag == "pmf":
        sol = pmf_solve(targets)
    elif model_tag == "cpmf":
        sol = cpmf_solve(targets, _ed_from_config(config.get("ed")))
    else:
        raise ValueError(f"solve supports pmf and cpmf, got {model_tag!r}")
    out = _out_dir(config)
    payload = {**fileio.solution_to_dict(sol), "model": model_tag, **_resolved(config)}
    fileio.write_json(out / "solution.json", payload)
    print(f"wrote {out / 'solution.json'}")
    return 0


def _budget_from_config(obj) -> SampleBudget:
    if obj is None:
        return SampleBudget()
    s_latent = obj.get("s_latent", 1000)
    if isinstance(s_latent, list):
        s_latent = tuple(int(v) for v in s_latent)
    else:
        s_latent = int(s_latent)
    return SampleBudget(
        s_latent=s_latent,
        s_output=int(obj.get("s_output", 10)),
        c_discrete=int(obj.get("c_discrete", 1000)),
    )


def _optimizer_from_config(obj, seed: int) -> OptimizerConfig:
    obj = dict(obj or {})
    obj.setdefault("seed", seed)
    return OptimizerConfig(
        step_size=float(obj.get("step_size", 0.1)),
        max_iterations=int(obj.get("max_iterations", 5000)),
        tolerance=float(obj.get("tolerance", 1e-3)),
        seed=int(obj["seed"]),
        relative_residuals=bool(obj.get("relative_residuals", True)),
    )


def _cmd_match(config: dict) -> int:
    init = hyper_from_json(config["init"])
    vec = pack(init, config["init"].get("parameterization"))
    model = model_for(vec)
    targets = fileio.moments_from_dict(config["targets"])
    reg = None
    if config.get("regularizer"):
        reg = Regularizer(
            statistic=config["regularizer"].get("statistic", "log_variance"),
            weight=float(config["regularizer"].get("weight", 0.0)),
        )
    problem = MatchProblem(
        model=model,
        init=vec,
        targets=targets,
        weights=config.get("weights"),
        budget=_budget_from_config(config.get("budget")),
        optimizer=_optimizer_from_config(config.get("optimizer"), int(config["seed"])),
        regularizer=reg,
        sampled_output=bool(config.get("sampled_output", False)),
    )
    result = match(problem)
    out = _out_dir(config)
    fileio.write_trace_csv(out / "trace.csv", result.trace, vec.names)
    payload = {
        "fitted": hyper_to_json(result.fitted, vec.parameterization),
        "discrepancy": result.discrepancy,
        "status": result.status,
        "iterations": len(result.trace),
        "trace_columns": ["iteration", "discrepancy", "mean_estimate", "variance_estimate"]
        + list(vec.names),
        **_resolved(config),
    }
    fileio.write_json(out / "match.json", payload)
    print(f"wrote {out / 'match.json'} (status: {result.status})")
    return 2 if result.status == STATUS_BOUNDARY else 0


def _cmd_gradcheck(config: dict) -> int:
    hyper = hyper_from_json(config["model"])
    vec = pack(hyper, config["model"].get("parameterization"))
    model = model_for(vec)
    report = gradient_check(
        model,
        vec,
        _budget_from_config(config.get("budget")),
        h=float(config.get("step", 1e-4)),
        rng=RngHandle(int(config["seed"])),
    )
    payload = {**report.to_dict(), **_resolved(config)}
    print(json.dumps(payload, indent=2, sort_keys=True))
    if config.get("out"):
        fileio.write_json(_out_dir(config) / "gradcheck.json", payload)
    return 0


def _cmd_surface(config: dict) -> int:
    base = hyper_from_json(config["base"])
    vec = pack(base, config["base"].get("parameterization"))
    model = model_for(vec)
    targets = fileio.moments_from_dict(config["targets"])
    budget = _budget_from_config(config.get("budget"))
    grid = config["grid"]
    names = grid["params"]
    if isinstance(names, str):
        names = [names]
    if not 1 <= len(names) <= 2:
        raise ValueError("grid.params must name one or two hyperparameters")
    for n in names:
        if n not in vec.names:
            raise ValueError(f"grid parameter {n!r} is not a hyperparameter of this model")
    counts = grid.get("count", 21)
    counts = [counts] * len(names) if isinstance(counts, int) else [int(c) for c in counts]
    los = grid["min"] if isinstance(grid["min"], list) else [grid["min"]] * len(names)
    his = grid["max"] if isinstance(grid["max"], list) else [grid["max"]] * len(names)
    log_scale = bool(grid.get("log", True))

    def axis(lo, hi, n):
        if log_scale:
            return np.exp(np.linspace(np.log(float(lo)), np.log(float(hi)), n))
        return np.linspace(float(lo), float(hi), n)

    axes = [axis(lo, hi, n) for lo, hi, n in zip(los, his, counts)]
    mesh = [g.ravel() for g in np.meshgrid(*axes, indexing="ij")]
    natural = vec.natural()
    seed = int(config["seed"])
    weights = config.get("weights") or {}
    rows = []
    for i in range(mesh[0].size):
        point = dict(natural)
        for name, grid_vals in zip(names, mesh):
            point[name] = float(grid_vals[i])
        est_mean, est_second = estimate_prior_moments(
            model,
            vec.from_natural(point),
            budget,
            RngHandle(seed, stream=i),
            with_grad=False,
        )
        mean_hat = est_mean.value
        var_hat = est_second.value - mean_hat**2
        d = 0.0
        for key, hat in (("mean", mean_hat), ("variance", var_hat)):
            target = getattr(targets, key)
            if target is None:
                continue
            w = float(weights.get(key, 1.0))
            scale = max(1.0, abs(target))
            d += w * ((hat - target) / scale) ** 2
        rows.append([mesh[j][i] for j in range(len(names))] + [d, mean_hat, var_hat])
    out = _out_dir(config)
    fileio.write_grid_csv(out / "surface.csv", rows)
    print(f"wrote {out / 'surface.csv'} ({len(rows)} points)")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "moments": _cmd_moments,
    "solve": _cmd_solve,
    "match": _cmd_match,
    "gradcheck": _cmd_gradcheck,
    "surface": _cmd_surface,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priormatch",
        description="Prior predictive moment matching for Poisson factorization models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"{name} (see README for the config schema)")
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="seed recorded in all outputs")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker cap for simulation")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        config = _load_config(args, extra)
        return _HANDLERS[args.command](config)
    except FeasibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PriorMatchError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
