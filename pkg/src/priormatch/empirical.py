"""Moment estimation from observed or simulated data matrices.

The grand mean and unbiased grand variance come straight from the flattened
matrix.  The same-row correlation is estimated as the average correlation
over sampled unordered column pairs, computed across rows and standardized
by the pooled mean and variance; the same-column correlation symmetrically
over row pairs.  Pooled standardization matters: normalizing each column by
its own mean and variance converges to rho1 / (1 - rho2) on factor-structured
data, because entries within a column are themselves correlated.  Pair
sampling keeps the cost bounded on large matrices; standard errors are
reported per field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import InverseSolution, MomentSet, cpmf_solve, pmf_solve
from .dispersion import EdFamily
from .errors import DataShapeError, DomainError
from .sampling import RngHandle

DEFAULT_MAX_PAIRS = 2000


@dataclass(frozen=True)
class MomentEstimate:
    """Estimated moments with standard errors and pair-sampling bookkeeping.

    ``rho1_clipped`` / ``rho2_clipped`` flag correlation estimates that fell
    outside [0, 1] and were clipped.
    """

    moments: MomentSet
    stderr_mean: float
    stderr_variance: float
    stderr_rho1: float
    stderr_rho2: float
    n_pairs_rho1: int
    n_pairs_rho2: int
    rho1_clipped: bool = False
    rho2_clipped: bool = False


def _decode_pairs(idx: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map indices in [0, n*(n-1)/2) to unordered pairs (i, j), i < j, row-major."""
    idx = np.asarray(idx, dtype=np.int64)
    b = 2 * n - 1
    i = ((b - np.sqrt(b * b - 8.0 * idx)) / 2.0).astype(np.int64)
    # guard against float rounding at block boundaries
    for _ in range(2):
        start = i * (2 * n - i - 1) // 2
        i = np.where(idx < start, i - 1, i)
        nxt = (i + 1) * (2 * n - i - 2) // 2
        i = np.where(idx >= nxt, i + 1, i)
    start = i * (2 * n - i - 1) // 2
    j = idx - start + i + 1
    return i, j


def _sample_pair_indices(n: int, max_pairs: int, gen: np.random.Generator) -> np.ndarray:
    total = n * (n - 1) // 2
    if total <= max_pairs:
        return np.arange(total, dtype=np.int64)
    return np.sort(gen.choice(total, size=max_pairs, replace=False))


def _mean_pair_correlation(
    matrix: np.ndarray,
    max_pairs: int,
    gen: np.random.Generator,
    grand_mean: float,
    grand_var: float,
):
    """Average correlation between sampled column pairs, across rows.

    Each pair contributes the cross-product of its grand-mean-centered
    columns divided by the pooled variance.
    """
    n_cols = matrix.shape[1]
    idx = _sample_pair_indices(n_cols, max_pairs, gen)
    js, ls = _decode_pairs(idx, n_cols)
    x = matrix[:, js] - grand_mean
    y = matrix[:, ls] - grand_mean
    r = (x * y).mean(axis=0) / grand_var
    n_used = int(r.size)
    stderr = float(r.std(ddof=1) / np.sqrt(n_used)) if n_used > 1 else 0.0
    return float(r.mean()), stderr, n_used


def estimate_moments(
    matrix: np.ndarray,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    rng: RngHandle | None = None,
) -> MomentEstimate:
    """Estimate mean, variance and both correlations from a data matrix.

    Correlation estimates are clipped to [0, 1]; the clip is flagged in the
    result.  Raises :class:`DataShapeError` for matrices smaller than 2x2 or
    with no variation.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataShapeError(f"expected a 2-d matrix, got ndim={matrix.ndim}")
    n_rows, n_cols = matrix.shape
    if n_rows < 2 or n_cols < 2:
        raise DataShapeError(f"need at least a 2x2 matrix, got {n_rows}x{n_cols}")
    if max_pairs < 1:
        raise DomainError(f"max_pairs must be >= 1, got {max_pairs}")
    flat = matrix.ravel()
    variance = float(flat.var(ddof=1))
    if variance == 0.0:
        raise DataShapeError("matrix is constant; variance and correlations are degenerate")
    mean = float(flat.mean())
    n_entries = flat.size
    stderr_mean = float(flat.std(ddof=1) / np.sqrt(n_entries))
    m4 = float(((flat - mean) ** 4).mean())
    stderr_variance = float(np.sqrt(max(m4 - variance**2, 0.0) / n_entries))

    if rng is None:
        rng = RngHandle(0)
    gen = rng.generator()
    rho1_raw, se1, n1 = _mean_pair_correlation(matrix, max_pairs, gen, mean, variance)
    rho2_raw, se2, n2 = _mean_pair_correlation(matrix.T, max_pairs, gen, mean, variance)
    rho1 = min(max(rho1_raw, 0.0), 1.0)
    rho2 = min(max(rho2_raw, 0.0), 1.0)
    return MomentEstimate(
        moments=MomentSet(mean=mean, variance=variance, rho1=rho1, rho2=rho2),
        stderr_mean=stderr_mean,
        stderr_variance=stderr_variance,
        stderr_rho1=se1,
        stderr_rho2=se2,
        n_pairs_rho1=n1,
        n_pairs_rho2=n2,
        rho1_clipped=rho1 != rho1_raw,
        rho2_clipped=rho2 != rho2_raw,
    )


def estimate_k(
    matrix: np.ndarray,
    model: str = "pmf",
    ed: EdFamily | None = None,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    rng: RngHandle | None = None,
) -> InverseSolution:
    """Estimate moments from a matrix and invert them for the latent dimension.

    Feasibility errors from the solver propagate with the measured slacks.
    """
    est = estimate_moments(matrix, max_pairs=max_pairs, rng=rng)
    if model == "pmf":
        return pmf_solve(est.moments)
    if model == "cpmf":
        if ed is None:
            raise DomainError("estimating k for cpmf requires the observation family (ed=...)")
        return cpmf_solve(est.moments, ed)
    raise DomainError(f"unknown model {model!r}; expected 'pmf' or 'cpmf'")
