"""Seeded generative simulation of the factorization models.

All samplers are driven by an :class:`RngHandle` built on counter-based
Philox streams: identical ``(seed, stream)`` reproduce a matrix bit for bit,
distinct streams are statistically independent.  Matrix generation is
partitioned into fixed row blocks, each drawing from a sub-stream derived
from the block index, so output does not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .params import CpmfHyper, GammaParams, HpfHyper, PmfHyper

_BLOCK_ROWS = 512


@dataclass(frozen=True)
class RngHandle:
    """Seed plus stream id addressing one reproducible random stream."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
                raise DomainError(f"{name} must be a non-negative integer, got {v!r}")

    def generator(self, *subkeys: int) -> np.random.Generator:
        """Fresh generator for this stream, optionally descended by sub-keys."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *subkeys))
        return np.random.Generator(np.random.Philox(seq))


def _require_dims(n_rows: int, n_cols: int) -> None:
    if n_rows < 1 or n_cols < 1:
        raise DomainError(f"matrix dimensions must be >= 1, got {n_rows}x{n_cols}")


def _blocks(n_rows: int):
    for bi, r0 in enumerate(range(0, n_rows, _BLOCK_ROWS)):
        yield bi, r0, min(r0 + _BLOCK_ROWS, n_rows)


def _run_blocks(fill, n_rows: int, threads: int) -> None:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda args: fill(*args), _blocks(n_rows)))
    else:
        for args in _blocks(n_rows):
            fill(*args)


def sample_gamma(rng: RngHandle, p: GammaParams, n: int) -> np.ndarray:
    """Draw ``n`` iid Gamma(shape, rate) variates."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return rng.generator().gamma(p.shape, 1.0, size=n) / p.rate


def simulate_pmf(rng: RngHandle, h: PmfHyper, n_rows: int, n_cols: int, threads: int = 1) -> np.ndarray:
    """Simulate a count matrix from Poisson factorization.

    Row and column factors are drawn once; each entry is Poisson with rate
    equal to the inner product of its row and column factor vectors.
    """
    _require_dims(n_rows, n_cols)
    row_g, col_g = h.row_gamma(), h.col_gamma()
    beta = rng.generator(0).gamma(col_g.shape, 1.0, size=(n_cols, h.k)) / col_g.rate
    out = np.empty((n_rows, n_cols), dtype=np.float64)

    def fill(bi, r0, r1):
        gen = rng.generator(1 + bi)
        theta = gen.gamma(row_g.shape, 1.0, size=(r1 - r0, h.k)) / row_g.rate
        out[r0:r1] = gen.poisson(theta @ beta.T)

    _run_blocks(fill, n_rows, threads)
    return out


def simulate_cpmf(rng: RngHandle, h: CpmfHyper, n_rows: int, n_cols: int, threads: int = 1) -> np.ndarray:
    """Simulate a compound-Poisson matrix: latent counts feed the observation family.

    A zero latent count forces a zero observation (empty-sum convention).
    """
    _require_dims(n_rows, n_cols)
    base = h.base
    row_g, col_g = base.row_gamma(), base.col_gamma()
    beta = rng.generator(0).gamma(col_g.shape, 1.0, size=(n_cols, base.k)) / col_g.rate
    out = np.empty((n_rows, n_cols), dtype=np.float64)

    def fill(bi, r0, r1):
        gen = rng.generator(1 + bi)
        theta = gen.gamma(row_g.shape, 1.0, size=(r1 - r0, base.k)) / row_g.rate
        counts = gen.poisson(theta @ beta.T)
        out[r0:r1] = h.ed.sample_conditional(gen, counts)

    _run_blocks(fill, n_rows, threads)
    return out


def simulate_hpf(rng: RngHandle, h: HpfHyper, n_rows: int, n_cols: int, threads: int = 1) -> np.ndarray:
    """Simulate hierarchical Poisson factorization.

    Each row draws its own factor rate ``xi ~ Gamma(a', a'/b')`` and factors
    ``theta ~ Gamma(a, xi)``; columns analogously with ``(c, c', d')``.
    """
    _require_dims(n_rows, n_cols)
    gen0 = rng.generator(0)
    eta = gen0.gamma(h.c_prime, 1.0, size=n_cols) / (h.c_prime / h.d_prime)
    beta = gen0.gamma(h.c, 1.0, size=(n_cols, h.k)) / eta[:, None]
    out = np.empty((n_rows, n_cols), dtype=np.float64)

    def fill(bi, r0, r1):
        gen = rng.generator(1 + bi)
        rows = r1 - r0
        xi = gen.gamma(h.a_prime, 1.0, size=rows) / (h.a_prime / h.b_prime)
        theta = gen.gamma(h.a, 1.0, size=(rows, h.k)) / xi[:, None]
        out[r0:r1] = gen.poisson(theta @ beta.T)

    _run_blocks(fill, n_rows, threads)
    return out
