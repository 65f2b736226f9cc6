"""Closed-form prior predictive moments and inverse solvers.

For Poisson factorization the prior predictive mean, variance and the
same-row / same-column correlations have exact expressions in the
hyperparameters; those expressions invert, giving the latent dimension and
the prior coefficients of variation directly from four target statistics.
The compound-Poisson generalization rescales the same structure by the
observation family's conditional mean and variance per unit count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .dispersion import EdFamily
from .errors import DomainError, FeasibilityError
from .params import CpmfHyper, PmfHyper


@dataclass(frozen=True)
class MomentSet:
    """Mean, variance and same-row/same-column correlations of a matrix law.

    ``rho1`` is the correlation of two entries sharing a row, ``rho2`` of two
    entries sharing a column.  Any field may be absent (``None``), e.g. when
    used as a partial optimization target.
    """

    mean: Optional[float] = None
    variance: Optional[float] = None
    rho1: Optional[float] = None
    rho2: Optional[float] = None

    def __post_init__(self):
        for name in ("mean", "variance"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise DomainError(f"{name} must be a finite real >= 0, got {v!r}")
        for name in ("rho1", "rho2"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or not 0.0 <= v <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")

    def require_all(self) -> None:
        missing = [n for n in ("mean", "variance", "rho1", "rho2") if getattr(self, n) is None]
        if missing:
            raise DomainError(f"moment set is missing fields {missing}")

    @property
    def tau(self) -> float:
        """One minus the sum of the two correlations."""
        self.require_all()
        return 1.0 - (self.rho1 + self.rho2)


@dataclass(frozen=True)
class InverseSolution:
    """Hyperparameters recovered from target moments.

    ``k_real`` is the exact (real-valued) latent dimension, ``k`` its
    rounding (half-up, floored at 1).  ``cv_theta_sq`` and ``cv_beta_sq`` are
    the squared coefficients of variation of the row and column priors;
    ``gamma_shapes`` holds the corresponding Gamma shapes ``(a, c)`` (their
    reciprocals).  One degree of freedom remains: any rates with
    ``b * d == rate_constraint`` reproduce the target mean.
    """

    k_real: float
    k: int
    cv_theta_sq: float
    cv_beta_sq: float
    sigma_product: float
    gamma_shapes: tuple[float, float]
    rate_constraint: float


def _round_k(k_real: float) -> int:
    return max(1, int(math.floor(k_real + 0.5)))


def pmf_moments_from_values(
    k: float, mu_theta: float, sigma_theta: float, mu_beta: float, sigma_beta: float
) -> MomentSet:
    """Prior predictive moments of Poisson factorization from raw values.

    Accepts a real-valued ``k`` and zero standard deviations, which is
    useful for verifying solver output and degenerate limits; the typed
    entry point is :func:`pmf_forward_moments`.
    """
    mm = mu_theta * mu_beta
    t_row = (mu_beta * sigma_theta) ** 2
    t_col = (mu_theta * sigma_beta) ** 2
    t_cross = (sigma_theta * sigma_beta) ** 2
    per_factor = mm + t_row + t_col + t_cross
    return MomentSet(
        mean=k * mm,
        variance=k * per_factor,
        rho1=t_row / per_factor,
        rho2=t_col / per_factor,
    )


def pmf_forward_moments(h: PmfHyper) -> MomentSet:
    """Prior predictive mean, variance and correlations of PMF."""
    r, c = h.row_meanstd(), h.col_meanstd()
    return pmf_moments_from_values(h.k, r.mean, r.std, c.mean, c.std)


def pmf_covariance(h: PmfHyper, same_row: bool, same_col: bool) -> float:
    """Prior predictive covariance of two entries in the four index cases.

    Entries sharing neither index are uncorrelated; sharing both indices
    gives the variance.
    """
    r, c = h.row_meanstd(), h.col_meanstd()
    out = 0.0
    if same_row:
        out += (c.mean * r.std) ** 2
    if same_col:
        out += (r.mean * c.std) ** 2
    if same_row and same_col:
        out += r.mean * c.mean + (r.std * c.std) ** 2
    return h.k * out


def cpmf_moments_from_values(
    k: float,
    mu_theta: float,
    sigma_theta: float,
    mu_beta: float,
    sigma_beta: float,
    ed: EdFamily,
) -> MomentSet:
    """Compound-Poisson prior predictive moments from raw values."""
    mm = mu_theta * mu_beta
    t_row = (mu_beta * sigma_theta) ** 2
    t_col = (mu_theta * sigma_beta) ** 2
    t_cross = (sigma_theta * sigma_beta) ** 2
    ms, vs = ed.mean_scale, ed.variance_scale
    variance = vs * k * mm + ms**2 * k * (mm + t_row + t_col + t_cross)
    return MomentSet(
        mean=ms * k * mm,
        variance=variance,
        rho1=k * ms**2 * t_row / variance,
        rho2=k * ms**2 * t_col / variance,
    )


def cpmf_forward_moments(h: CpmfHyper) -> MomentSet:
    """Prior predictive moments of compound-Poisson factorization."""
    r, c = h.base.row_meanstd(), h.base.col_meanstd()
    return cpmf_moments_from_values(h.k, r.mean, r.std, c.mean, c.std, h.ed)


def _check_feasible(violations) -> None:
    violated = [(name, slack) for name, slack in violations if not slack > 0]
    if violated:
        raise FeasibilityError(violated)


def _solve_from_excess(targets: MomentSet, excess: float, mean_scale: float) -> InverseSolution:
    mean, var = targets.mean, targets.variance
    rho1, rho2 = targets.rho1, targets.rho2
    k_real = excess / (rho1 * rho2) * (mean / var) ** 2
    cv_theta_sq = excess / (rho2 * var)
    cv_beta_sq = excess / (rho1 * var)
    a = 1.0 / cv_theta_sq
    c = 1.0 / cv_beta_sq
    return InverseSolution(
        k_real=k_real,
        k=_round_k(k_real),
        cv_theta_sq=cv_theta_sq,
        cv_beta_sq=cv_beta_sq,
        sigma_product=var / (mean * mean_scale) * math.sqrt(rho1 * rho2),
        gamma_shapes=(a, c),
        rate_constraint=mean_scale * k_real * a * c / mean,
    )


def pmf_solve(targets: MomentSet) -> InverseSolution:
    """Invert the PMF forward moments: targets -> latent dimension and priors.

    Raises :class:`FeasibilityError` naming each violated inequality and its
    signed slack when no PMF prior can reach the targets.
    """
    targets.require_all()
    mean, var = targets.mean, targets.variance
    rho1, rho2 = targets.rho1, targets.rho2
    tau = 1.0 - (rho1 + rho2)
    excess = tau * var - mean
    _check_feasible(
        [
            ("variance > mean", var - mean),
            ("rho1 > 0", rho1),
            ("rho2 > 0", rho2),
            ("(1 - rho1 - rho2) * variance > mean", excess),
        ]
    )
    return _solve_from_excess(targets, excess, mean_scale=1.0)


def cpmf_solve(targets: MomentSet, ed: EdFamily) -> InverseSolution:
    """Invert the compound-Poisson forward moments for a fixed observation family."""
    targets.require_all()
    if ed.psi_prime == 0:
        raise DomainError("psi_prime must be nonzero to invert compound-Poisson moments")
    mean, var = targets.mean, targets.variance
    rho1, rho2 = targets.rho1, targets.rho2
    tau = 1.0 - (rho1 + rho2)
    coef = ed.mean_scale + ed.psi_double_prime / ed.psi_prime
    excess = tau * var - coef * mean
    _check_feasible(
        [
            ("rho1 > 0", rho1),
            ("rho2 > 0", rho2),
            (
                f"(1 - rho1 - rho2) * variance > {coef:.6g} * mean",
                excess,
            ),
        ]
    )
    return _solve_from_excess(targets, excess, mean_scale=ed.mean_scale)


def rate_constraint(sol: InverseSolution, targets: MomentSet) -> float:
    """Product the two Gamma rates must have to reproduce the target mean.

    Any rates ``(b, d)`` with ``b * d`` equal to the returned value leave all
    four moments at their targets; the unrounded latent dimension is used so
    the identity is exact.
    """
    if targets.mean is None or targets.mean <= 0:
        raise DomainError("rate_constraint requires a positive target mean")
    a, c = sol.gamma_shapes
    return sol.k_real * a * c / targets.mean


def solution_hyper_values(sol: InverseSolution, rate_b: Optional[float] = None) -> tuple:
    """Concrete ``(mu_theta, sigma_theta, mu_beta, sigma_beta)`` on the solution curve.

    Picks ``b = d = sqrt(rate_constraint)`` unless ``rate_b`` fixes the row
    rate, in which case ``d = rate_constraint / rate_b``.
    """
    a, c = sol.gamma_shapes
    b = math.sqrt(sol.rate_constraint) if rate_b is None else rate_b
    d = sol.rate_constraint / b
    return (a / b, math.sqrt(a) / b, c / d, math.sqrt(c) / d)
