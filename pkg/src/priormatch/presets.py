"""Benchmark hyperparameter configurations and documented test grids.

The PMF configurations A-G and HPF configurations K-P are the reference
grids used throughout the test-suite, the demos and the acceptance run;
``PMF_REFERENCE_MOMENTS`` and ``HPF_REFERENCE_MEANS`` hold their documented
prior predictive values (HPF values are simulation-based references quoted
at two decimals).
"""

from __future__ import annotations

import numpy as np

from .params import GammaParams, HpfHyper, MeanStdParams, PmfHyper

DEFAULT_K = 25


def _pmf(a, b, c, d, k=DEFAULT_K) -> PmfHyper:
    return PmfHyper(k=k, row_prior=GammaParams(a, b), col_prior=GammaParams(c, d))


PMF_CONFIGS: dict[str, PmfHyper] = {
    "A": _pmf(10.0, 1.0, 10.0, 1.0),
    "B": _pmf(10.0, 2.0, 10.0, 2.0),
    "C": _pmf(0.001, 0.01, 0.01, 0.1),
    "D": _pmf(0.1, 1.0, 0.1, 1.0),
    "E": _pmf(0.1, 0.1, 0.1, 0.1),
    "F": _pmf(1.0, 1.0, 0.1, 0.1),
    "G": _pmf(1000.0, 1000.0, 1000.0, 1000.0),
}

# (mean, variance) of the prior predictive for each PMF configuration at K=25,
# quoted at the reference precision of two decimals.
PMF_REFERENCE_MOMENTS: dict[str, tuple[float, float]] = {
    "A": (2500.00, 55000.00),
    "B": (625.00, 3906.25),
    "C": (0.25, 253.00),
    "D": (0.25, 0.55),
    "E": (25.00, 3025.00),
    "F": (25.00, 550.00),
    "G": (25.00, 25.05),
}


def _hpf(a, a_prime, b_prime, c, c_prime, d_prime, k=DEFAULT_K) -> HpfHyper:
    return HpfHyper(a=a, a_prime=a_prime, b_prime=b_prime, c=c, c_prime=c_prime, d_prime=d_prime, k=k)


HPF_CONFIGS: dict[str, HpfHyper] = {
    "K": _hpf(1.0, 100.0, 10.0, 1.0, 100.0, 10.0),
    "L": _hpf(0.1, 100.0, 1.0, 1.0, 100.0, 1.0),
    "M": _hpf(50.0, 5000.0, 10.0, 1.0, 5000.0, 1.0),
    "N": _hpf(1.0, 100.0, 1.0, 10.0, 10.0, 1.0),
    "O": _hpf(450.0, 4500.0, 100.0, 10.0, 400.0, 1.0),
    "P": _hpf(50.0, 50.0, 1.0, 1.0, 50.0, 1.0),
}

# Reference prior predictive means (and variances) for the HPF configurations
# at K=25, quoted at two decimals.
HPF_REFERENCE_MEANS: dict[str, float] = {
    "K": 0.26,
    "L": 2.55,
    "M": 125.05,
    "N": 280.57,
    "O": 1128.10,
    "P": 1301.71,
}

HPF_REFERENCE_VARIANCES: dict[str, float] = {
    "K": 0.26,
    "L": 8.25,
    "M": 781.42,
    "N": 15309.26,
    "O": 9833.55,
    "P": 146074.01,
}

# Prior grid for the latent-dimension recovery protocol: simulate, estimate
# moments, invert.  Both priors are well inside the feasible region so the
# inversion is numerically stable.
K_RECOVERY_PRIORS: dict[str, tuple[MeanStdParams, MeanStdParams]] = {
    "wide": (MeanStdParams(10.0, 10.0**0.5), MeanStdParams(10.0, 10.0**0.5)),
    "tight": (MeanStdParams(5.0, 2.5**0.5), MeanStdParams(5.0, 2.5**0.5)),
}

K_RECOVERY_DIMENSIONS = (5, 25, 50)

# Sampling bounds for the inversion round-trip property: means and standard
# deviations are drawn log-uniformly within these ranges, with the
# coefficient of variation floored at CV_FLOOR.  The floor keeps the
# inversion well-conditioned: as sigma/mu -> 0 the excess-variance term that
# carries the latent dimension is an O((sigma_t*sigma_b/mu_t/mu_b)^2)
# correction to the variance, and float64 targets cannot resolve it to the
# required precision below the floor.
ROUNDTRIP_MU_RANGE = (0.05, 50.0)
ROUNDTRIP_SIGMA_RANGE = (0.05, 10.0)
ROUNDTRIP_CV_FLOOR = 0.05
ROUNDTRIP_K_RANGE = (1, 100)


def sample_roundtrip_hypers(gen: np.random.Generator, n: int) -> list[PmfHyper]:
    """Draw ``n`` PMF hyperparameter sets from the documented round-trip grid."""
    out = []
    lo_mu, hi_mu = np.log(ROUNDTRIP_MU_RANGE)
    lo_sd, hi_sd = np.log(ROUNDTRIP_SIGMA_RANGE)
    k_lo, k_hi = ROUNDTRIP_K_RANGE
    for _ in range(n):
        priors = []
        for _ in range(2):
            mu = float(np.exp(gen.uniform(lo_mu, hi_mu)))
            sd_floor = max(ROUNDTRIP_SIGMA_RANGE[0], ROUNDTRIP_CV_FLOOR * mu)
            sd = float(np.exp(gen.uniform(np.log(sd_floor), hi_sd)))
            priors.append(MeanStdParams(mu, sd))
        k = int(gen.integers(k_lo, k_hi + 1))
        out.append(PmfHyper(k=k, row_prior=priors[0], col_prior=priors[1]))
    return out
