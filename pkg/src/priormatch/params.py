"""Hyperparameter containers and parameterization transforms.

Gamma priors are handled in two interchangeable coordinate systems:
``shape_rate`` (the natural Gamma parameters) and ``mean_std`` (the mean and
standard deviation of the prior).  Optimization happens on an unconstrained
log-scale vector; :func:`pack` and :func:`unpack` convert between typed
hyperparameter objects and that vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Union

import numpy as np

from .dispersion import EdFamily
from .errors import DomainError

MEAN_STD = "mean_std"
SHAPE_RATE = "shape_rate"

LOG_POSITIVE = "log-positive"
IDENTITY = "identity"

_PMF_MEANSTD_NAMES = ("mu_theta", "sigma_theta", "mu_beta", "sigma_beta")
_PMF_SHAPERATE_NAMES = ("a", "b", "c", "d")
_HPF_NAMES = ("a", "a_prime", "b_prime", "c", "c_prime", "d_prime")


def _require_positive(name: str, value) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise DomainError(f"{name} must be a positive finite real, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite real, got {value!r}")


def _require_count(name: str, value) -> None:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise DomainError(f"{name} must be an integer >= 1, got {value!r}")


@dataclass(frozen=True)
class GammaParams:
    """Shape/rate parameters of a Gamma prior."""

    shape: float
    rate: float

    def __post_init__(self):
        _require_positive("shape", self.shape)
        _require_positive("rate", self.rate)

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / self.rate**2


@dataclass(frozen=True)
class MeanStdParams:
    """Mean and standard deviation of a positive prior."""

    mean: float
    std: float

    def __post_init__(self):
        _require_positive("mean", self.mean)
        _require_positive("std", self.std)


PriorParams = Union[GammaParams, MeanStdParams]


def gamma_from_meanstd(p: MeanStdParams) -> GammaParams:
    """Convert a mean/std description to Gamma shape/rate.

    The shape is the inverse squared coefficient of variation,
    ``(mean/std)**2``, and the rate is ``mean/std**2``.
    """
    if not isinstance(p, MeanStdParams):
        raise DomainError(f"expected MeanStdParams, got {type(p).__name__}")
    return GammaParams(shape=(p.mean / p.std) ** 2, rate=p.mean / p.std**2)


def meanstd_from_gamma(p: GammaParams) -> MeanStdParams:
    """Convert Gamma shape/rate to the mean/std description (exact inverse)."""
    if not isinstance(p, GammaParams):
        raise DomainError(f"expected GammaParams, got {type(p).__name__}")
    return MeanStdParams(mean=p.shape / p.rate, std=math.sqrt(p.shape) / p.rate)


def as_gamma(p: PriorParams) -> GammaParams:
    return p if isinstance(p, GammaParams) else gamma_from_meanstd(p)


def as_meanstd(p: PriorParams) -> MeanStdParams:
    return p if isinstance(p, MeanStdParams) else meanstd_from_gamma(p)


@dataclass(frozen=True)
class PmfHyper:
    """Hyperparameters of Poisson matrix factorization.

    ``k`` is the latent dimension; ``row_prior`` and ``col_prior`` describe
    the Gamma priors of the row and column factors in either coordinate
    system.
    """

    k: int
    row_prior: PriorParams
    col_prior: PriorParams

    def __post_init__(self):
        _require_count("k", self.k)
        for field_name, p in (("row_prior", self.row_prior), ("col_prior", self.col_prior)):
            if not isinstance(p, (GammaParams, MeanStdParams)):
                raise DomainError(f"{field_name} must be GammaParams or MeanStdParams")

    def row_gamma(self) -> GammaParams:
        return as_gamma(self.row_prior)

    def col_gamma(self) -> GammaParams:
        return as_gamma(self.col_prior)

    def row_meanstd(self) -> MeanStdParams:
        return as_meanstd(self.row_prior)

    def col_meanstd(self) -> MeanStdParams:
        return as_meanstd(self.col_prior)


@dataclass(frozen=True)
class CpmfHyper:
    """Compound-Poisson factorization: PMF latents plus an observation family."""

    base: PmfHyper
    ed: EdFamily

    def __post_init__(self):
        if not isinstance(self.base, PmfHyper):
            raise DomainError("base must be a PmfHyper")
        if not isinstance(self.ed, EdFamily):
            raise DomainError("ed must be an EdFamily")

    @property
    def k(self) -> int:
        return self.base.k


@dataclass(frozen=True)
class HpfHyper:
    """Hyperparameters of hierarchical Poisson factorization.

    Row factors: ``theta ~ Gamma(a, xi)`` with ``xi ~ Gamma(a', a'/b')`` per
    row; column factors analogously with ``(c, c', d')``.
    """

    a: float
    a_prime: float
    b_prime: float
    c: float
    c_prime: float
    d_prime: float
    k: int

    def __post_init__(self):
        for name in ("a", "a_prime", "b_prime", "c", "c_prime", "d_prime"):
            _require_positive(name, getattr(self, name))
        _require_count("k", self.k)


Hyper = Union[PmfHyper, CpmfHyper, HpfHyper]


@dataclass(frozen=True)
class UnconstrainedVector:
    """Log-scale optimization coordinates for positive hyperparameters.

    Each entry is tagged with the hyperparameter name it maps to and the
    transform linking the unconstrained value to the natural one
    (``log-positive`` entries exponentiate).  The latent dimension ``k`` is
    carried alongside but never optimized.
    """

    values: tuple[float, ...]
    names: tuple[str, ...]
    transforms: tuple[str, ...]
    model: str
    k: int
    parameterization: str

    def __post_init__(self):
        if not (len(self.values) == len(self.names) == len(self.transforms)):
            raise DomainError("values, names and transforms must have equal length")
        for t in self.transforms:
            if t not in (LOG_POSITIVE, IDENTITY):
                raise DomainError(f"unknown transform tag {t!r}")

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def with_values(self, values) -> "UnconstrainedVector":
        vals = tuple(float(v) for v in np.asarray(values, dtype=np.float64))
        if len(vals) != len(self.names):
            raise DomainError("replacement values have wrong length")
        return replace(self, values=vals)

    def natural(self) -> dict[str, float]:
        """Map each entry to the natural hyperparameter value."""
        out = {}
        for v, name, t in zip(self.values, self.names, self.transforms):
            out[name] = math.exp(v) if t == LOG_POSITIVE else v
        return out

    def from_natural(self, natural: Mapping[str, float]) -> "UnconstrainedVector":
        """Rebuild the vector from natural values (inverse of :meth:`natural`)."""
        vals = []
        for name, t in zip(self.names, self.transforms):
            v = natural[name]
            if t == LOG_POSITIVE:
                _require_positive(name, float(v))
                vals.append(math.log(v))
            else:
                vals.append(float(v))
        return self.with_values(vals)


def _pmf_natural(h: PmfHyper, parameterization: str) -> dict[str, float]:
    if parameterization == MEAN_STD:
        r, c = h.row_meanstd(), h.col_meanstd()
        return {
            "mu_theta": r.mean,
            "sigma_theta": r.std,
            "mu_beta": c.mean,
            "sigma_beta": c.std,
        }
    if parameterization == SHAPE_RATE:
        r, c = h.row_gamma(), h.col_gamma()
        return {"a": r.shape, "b": r.rate, "c": c.shape, "d": c.rate}
    raise DomainError(f"unknown parameterization {parameterization!r}")


def pack(h: Hyper, parameterization: str | None = None) -> UnconstrainedVector:
    """Flatten hyperparameters into log-scale optimization coordinates.

    ``k`` is excluded from the vector (it is an integer, solved only by the
    closed-form route).  The default parameterization is ``mean_std`` for
    PMF/CPMF; HPF always uses its native shape-style coordinates.
    """
    if parameterization is None:
        parameterization = SHAPE_RATE if isinstance(h, HpfHyper) else MEAN_STD
    if isinstance(h, PmfHyper):
        nat = _pmf_natural(h, parameterization)
        names = _PMF_MEANSTD_NAMES if parameterization == MEAN_STD else _PMF_SHAPERATE_NAMES
        model, k = "pmf", h.k
    elif isinstance(h, CpmfHyper):
        nat = _pmf_natural(h.base, parameterization)
        names = _PMF_MEANSTD_NAMES if parameterization == MEAN_STD else _PMF_SHAPERATE_NAMES
        model, k = "cpmf", h.k
    elif isinstance(h, HpfHyper):
        if parameterization != SHAPE_RATE:
            raise DomainError("HPF hyperparameters only support the shape_rate parameterization")
        nat = {name: getattr(h, name) for name in _HPF_NAMES}
        names = _HPF_NAMES
        model, k = "hpf", h.k
    else:
        raise DomainError(f"cannot pack object of type {type(h).__name__}")
    values = tuple(math.log(nat[n]) for n in names)
    return UnconstrainedVector(
        values=values,
        names=names,
        transforms=(LOG_POSITIVE,) * len(names),
        model=model,
        k=k,
        parameterization=parameterization,
    )


def unpack(vec: UnconstrainedVector, ed: EdFamily | None = None) -> Hyper:
    """Rebuild the typed hyperparameter object from optimization coordinates."""
    nat = vec.natural()
    if vec.model in ("pmf", "cpmf"):
        if vec.parameterization == MEAN_STD:
            base = PmfHyper(
                k=vec.k,
                row_prior=MeanStdParams(nat["mu_theta"], nat["sigma_theta"]),
                col_prior=MeanStdParams(nat["mu_beta"], nat["sigma_beta"]),
            )
        else:
            base = PmfHyper(
                k=vec.k,
                row_prior=GammaParams(nat["a"], nat["b"]),
                col_prior=GammaParams(nat["c"], nat["d"]),
            )
        if vec.model == "pmf":
            return base
        if ed is None:
            raise DomainError("unpacking a cpmf vector requires the observation family (ed=...)")
        return CpmfHyper(base=base, ed=ed)
    if vec.model == "hpf":
        return HpfHyper(k=vec.k, **{name: nat[name] for name in _HPF_NAMES})
    raise DomainError(f"unknown model tag {vec.model!r}")


def hyper_to_json(h: Hyper, parameterization: str | None = None) -> dict:
    """Serialize hyperparameters to the JSON schema used by the command line.

    The schema is ``{"model", "k", "params", "parameterization"}`` with
    parameter names ``mu_theta, sigma_theta, mu_beta, sigma_beta`` or
    ``a, b, c, d`` for PMF/CPMF and ``a, a_prime, b_prime, c, c_prime,
    d_prime`` for HPF.
    """
    if isinstance(h, HpfHyper):
        parameterization = SHAPE_RATE
    elif parameterization is None:
        parameterization = MEAN_STD
    vec = pack(h, parameterization)
    return {
        "model": vec.model,
        "k": vec.k,
        "params": vec.natural(),
        "parameterization": parameterization,
    }


def hyper_from_json(obj: Mapping, ed: EdFamily | None = None) -> Hyper:
    """Parse the hyperparameter JSON schema back into a typed object."""
    try:
        model = obj["model"]
        k = obj["k"]
        params = obj["params"]
    except (KeyError, TypeError) as exc:
        raise DomainError(f"hyperparameter JSON is missing field {exc}") from exc
    parameterization = obj.get("parameterization", MEAN_STD)
    if model in ("pmf", "cpmf"):
        names = _PMF_MEANSTD_NAMES if parameterization == MEAN_STD else _PMF_SHAPERATE_NAMES
    elif model == "hpf":
        names = _HPF_NAMES
        parameterization = SHAPE_RATE
    else:
        raise DomainError(f"unknown model tag {model!r}")
    missing = [n for n in names if n not in params]
    if missing:
        raise DomainError(f"hyperparameter JSON is missing params {missing}")
    values = []
    for n in names:
        _require_positive(n, float(params[n]))
        values.append(math.log(float(params[n])))
    _require_count("k", k)
    vec = UnconstrainedVector(
        values=tuple(values),
        names=names,
        transforms=(LOG_POSITIVE,) * len(names),
        model=model,
        k=int(k),
        parameterization=parameterization,
    )
    return unpack(vec, ed=ed)
