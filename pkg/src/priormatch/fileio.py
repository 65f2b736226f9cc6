"""File formats: headerless CSV for matrices and traces, JSON for the rest.

Matrices are written one row per line, comma separated, with ``%.17g``
formatting so integer-valued counts print without a decimal point and reals
keep 17 significant digits.  Structured results (moments, solutions, match
results, gradient-check reports) serialize to plain JSON dictionaries.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .analytic import InverseSolution, MomentSet
from .empirical import MomentEstimate
from .errors import DataShapeError, DomainError


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataShapeError(f"expected a 2-d matrix, got ndim={matrix.ndim}")
    np.savetxt(path, matrix, fmt="%.17g", delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    matrix = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    return matrix


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def moments_to_dict(moments: MomentSet) -> dict:
    return {
        "mean": moments.mean,
        "variance": moments.variance,
        "rho1": moments.rho1,
        "rho2": moments.rho2,
    }


def moments_from_dict(obj: Mapping) -> MomentSet:
    known = {"mean", "variance", "rho1", "rho2"}
    unknown = set(obj) - known
    if unknown:
        raise DomainError(f"unknown moment fields {sorted(unknown)}")
    return MomentSet(**{k: (None if obj.get(k) is None else float(obj[k])) for k in known})


def estimate_to_dict(est: MomentEstimate) -> dict:
    out = moments_to_dict(est.moments)
    out.update(
        {
            "stderr_mean": est.stderr_mean,
            "stderr_variance": est.stderr_variance,
            "stderr_rho1": est.stderr_rho1,
            "stderr_rho2": est.stderr_rho2,
            "n_pairs_rho1": est.n_pairs_rho1,
            "n_pairs_rho2": est.n_pairs_rho2,
            "rho1_clipped": est.rho1_clipped,
            "rho2_clipped": est.rho2_clipped,
        }
    )
    return out


def solution_to_dict(sol: InverseSolution) -> dict:
    return {
        "k_real": sol.k_real,
        "k": sol.k,
        "cv_theta_sq": sol.cv_theta_sq,
        "cv_beta_sq": sol.cv_beta_sq,
        "sigma_product": sol.sigma_product,
        "a": sol.gamma_shapes[0],
        "c": sol.gamma_shapes[1],
        "rate_constraint": sol.rate_constraint,
    }


def write_trace_csv(path, trace: Sequence, hyper_names: Sequence[str]) -> None:
    """Trace rows: iteration, discrepancy, mean and variance estimates, hypers."""
    with open(path, "w") as fh:
        for point in trace:
            cells = [
                "%d" % point.iteration,
                "%.17g" % point.discrepancy,
                "%.17g" % point.mean_estimate,
                "%.17g" % point.variance_estimate,
            ]
            cells.extend("%.17g" % point.hypers[name] for name in hyper_names)
            fh.write(",".join(cells) + "\n")


def write_grid_csv(path, rows: Sequence[Sequence[float]]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(",".join("%.17g" % float(v) for v in row) + "\n")


def require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value
