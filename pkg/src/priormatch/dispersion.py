"""Exponential-dispersion observation families for compound-Poisson models.

An :class:`EdFamily` describes the conditional law of an observation given a
latent Poisson count ``N``: the conditional mean is ``kappa * N * psi_prime``
and the conditional variance ``kappa * N * psi_double_prime``.  Only the
evaluated derivatives of the cumulant function enter any formula, so the
family stores those scalars directly instead of a symbolic cumulant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

ConditionalSampler = Callable[[np.random.Generator, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EdFamily:
    """Observation family for the compound-Poisson model.

    ``conditional_sampler(gen, counts)`` draws one observation per entry of
    the integer array ``counts``; a count of zero must produce exactly zero
    (empty-sum convention).  ``psi_double_prime == 0`` is allowed and denotes
    the degenerate family whose observation equals the count itself.
    """

    name: str
    kappa: float
    psi_prime: float
    psi_double_prime: float
    conditional_sampler: Optional[ConditionalSampler] = field(default=None, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise DomainError(f"kappa must be a positive finite real, got {self.kappa!r}")
        if not math.isfinite(self.psi_prime):
            raise DomainError(f"psi_prime must be finite, got {self.psi_prime!r}")
        if not (math.isfinite(self.psi_double_prime) and self.psi_double_prime >= 0):
            raise DomainError(
                f"psi_double_prime must be a finite real >= 0, got {self.psi_double_prime!r}"
            )

    @property
    def mean_scale(self) -> float:
        """Conditional mean per unit count, ``kappa * psi_prime``."""
        return self.kappa * self.psi_prime

    @property
    def variance_scale(self) -> float:
        """Conditional variance per unit count, ``kappa * psi_double_prime``."""
        return self.kappa * self.psi_double_prime

    def sample_conditional(self, gen: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        if self.conditional_sampler is None:
            raise DomainError(
                f"family {self.name!r} has no conditional sampler; simulation is unavailable"
            )
        return self.conditional_sampler(gen, counts)


def poisson_normal(mean: float = 1.0, std: float = 1.0) -> EdFamily:
    """Family where the observation is a sum of ``N`` iid Normal(mean, std**2) terms.

    The sum of ``N`` such terms is Normal(N*mean, N*std**2), sampled in one
    draw per entry; ``N == 0`` yields exactly zero.
    """
    if not (math.isfinite(std) and std > 0):
        raise DomainError(f"std must be a positive finite real, got {std!r}")

    def sampler(gen: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.float64)
        out = gen.normal(counts * mean, np.sqrt(counts) * std)
        return np.where(counts > 0, out, 0.0)

    return EdFamily(
        name=f"poisson_normal({mean:g},{std:g})",
        kappa=1.0,
        psi_prime=mean,
        psi_double_prime=std**2,
        conditional_sampler=sampler,
    )


def unit_summand() -> EdFamily:
    """Degenerate family whose summands are identically 1, so the observation is ``N``."""

    def sampler(gen: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        return np.asarray(counts, dtype=np.float64)

    return EdFamily(
        name="unit_summand",
        kappa=1.0,
        psi_prime=1.0,
        psi_double_prime=0.0,
        conditional_sampler=sampler,
    )
