"""Stochastic prior predictive matching.

Monte Carlo estimators of E[Y] and E[Y^2] over layered generative models,
differentiable in the hyperparameters: continuous latents are sampled with
reparameterization (implicit differentiation through the Gamma CDF for the
shape direction), discrete nodes contribute gradients through their
probability masses via self-normalized sampled sums, and Poisson or normal
outputs default to exact conditional moments.  A from-scratch Adam loop
minimizes a weighted squared discrepancy between target statistics and the
estimates, with feasibility diagnostics for unreachable targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy import special

from .analytic import MomentSet
from .duals import Dual
from .errors import (
    DomainError,
    EstimatorError,
    GradientError,
    ModelSpecError,
    OptimizationError,
)
from .layered import DISCRETE, NORMAL, POISSON, LayeredModel, Node, OutputNode
from .params import UnconstrainedVector, unpack
from .sampling import RngHandle

RNG_NOISE = "rng"
QUANTILE_NOISE = "quantile"

STATUS_CONVERGED = "converged-to-target"
STATUS_BOUNDARY = "boundary-suspected"
STATUS_MAX_ITERATIONS = "max-iterations"

_LARGE_SHAPE = 1e6


# ---------------------------------------------------------------------------
# reparameterized primitive draws
# ---------------------------------------------------------------------------


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngHandle):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError(f"expected RngHandle or numpy Generator, got {type(rng).__name__}")


def gamma_shape_grad(shape, value_std) -> np.ndarray:
    """Derivative of a standard Gamma(shape, 1) draw with respect to the shape.

    Implicit differentiation through the CDF: d z / d shape equals minus the
    shape-derivative of the regularized lower incomplete gamma divided by the
    density at the draw.  The CDF derivative uses a central difference with
    step ``1e-5 * shape`` floored at 1e-8; above shape 1e6 the normal
    approximation ``1 + (z - shape) / (2 shape)`` takes over, where the
    difference step would span the entire CDF transition.
    """
    a = np.asarray(shape, dtype=np.float64)
    x = np.asarray(value_std, dtype=np.float64)
    a, x = np.broadcast_arrays(a, x)
    out = np.zeros(a.shape, dtype=np.float64)

    large = a > _LARGE_SHAPE
    if np.any(large):
        out[large] = 1.0 + (x[large] - a[large]) / (2.0 * a[large])

    rest = ~large & (x > 0)
    if np.any(rest):
        ar, xr = a[rest], x[rest]
        h = np.minimum(np.maximum(1e-5 * ar, 1e-8), 0.5 * ar)
        dcdf = (special.gammainc(ar + h, xr) - special.gammainc(ar - h, xr)) / (2.0 * h)
        logpdf = special.xlogy(ar - 1.0, xr) - xr - special.gammaln(ar)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            mag = np.exp(np.log(np.abs(dcdf), where=dcdf != 0, out=np.full_like(dcdf, -np.inf)) - logpdf)
        grad = np.where(dcdf != 0, -np.sign(dcdf) * mag, 0.0)
        out[rest] = grad

    bad = ~np.isfinite(out)
    if np.any(bad):
        i = np.argwhere(bad)[0]
        raise GradientError(
            "non-finite gamma shape gradient", context={"shape": a[tuple(i)], "value": x[tuple(i)]}
        )
    return out


def reparam_normal(rng, mu: float, sigma: float, size=None):
    """Draw Normal(mu, sigma^2) and return (value, d/dmu, d/dsigma).

    The location-scale path gives d/dmu = 1 exactly and d/dsigma equal to
    the standard normal noise.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    gen = _as_generator(rng)
    eps = gen.standard_normal(size)
    value = mu + sigma * eps
    return value, np.ones_like(np.asarray(value, dtype=np.float64)), eps


def reparam_gamma(rng, shape: float, rate: float, size=None):
    """Draw Gamma(shape, rate) and return (value, d/dshape, d/drate).

    The rate direction is exact (scale family): d/drate = -value / rate.
    The shape direction uses :func:`gamma_shape_grad`.
    """
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    if not rate > 0:
        raise DomainError(f"rate must be positive, got {rate!r}")
    gen = _as_generator(rng)
    x = gen.gamma(shape, 1.0, size=size)
    value = x / rate
    dshape = gamma_shape_grad(np.broadcast_to(shape, np.shape(x)), x) / rate
    drate = -value / rate
    return value, dshape, drate


# ---------------------------------------------------------------------------
# conditional output moments
# ---------------------------------------------------------------------------


def output_conditional_moments(family: str, parent_value: float, g: str, scale: float | None = None):
    """Exact conditional expectation of g(Y) given the parent-driven parameter.

    Returns ``(value, d value / d parent_value)``.  For a Poisson output the
    parent value is the rate; for a normal output it is the location, with
    ``scale`` supplying the standard deviation.  ``g`` is ``"y"`` or ``"y2"``.
    """
    if g not in ("y", "y2"):
        raise DomainError(f"g must be 'y' or 'y2', got {g!r}")
    if family == POISSON:
        lam = parent_value
        if lam < 0:
            raise DomainError(f"Poisson rate must be >= 0, got {lam!r}")
        if g == "y":
            return lam, 1.0
        return lam + lam * lam, 1.0 + 2.0 * lam
    if family == NORMAL:
        if scale is None or not scale >= 0:
            raise DomainError("normal output needs a non-negative scale")
        if g == "y":
            return parent_value, 1.0
        return parent_value * parent_value + scale * scale, 2.0 * parent_value
    raise ModelSpecError(f"no exact conditional moments for family {family!r}")


def sampled_discrete_expectation(rng, rate: float, g: str, c: int):
    """Self-normalized sampled sum for a Poisson node: draw a support set.

    Draws ``c`` values, keeps the distinct ones, and returns
    ``sum g(y) p(y) / sum p(y)`` over that set together with the derivative
    with respect to the rate (flowing through the masses).  Biased for
    finite ``c`` because the sampled set truncates the support.
    """
    if g not in ("y", "y2"):
        raise DomainError(f"g must be 'y' or 'y2', got {g!r}")
    if c < 1:
        raise DomainError(f"c must be >= 1, got {c}")
    if rate < 0:
        raise DomainError(f"Poisson rate must be >= 0, got {rate!r}")
    if rate == 0:
        # one-point support at 0; the rate derivative is the exact limit
        return 0.0, 1.0
    gen = _as_generator(rng)
    ys = np.unique(gen.poisson(rate, size=c)).astype(np.float64)
    logp = special.xlogy(ys, rate) - rate - special.gammaln(ys + 1.0)
    p = np.exp(logp)
    total = p.sum()
    if total == 0.0:
        raise EstimatorError(f"all probability masses underflowed at rate {rate!r}")
    gy = ys if g == "y" else ys * ys
    dp = p * (ys / rate - 1.0)
    value = float((gy * p).sum() / total)
    dvalue = float(((gy * dp).sum() * total - (gy * p).sum() * dp.sum()) / total**2)
    return value, dvalue


# ---------------------------------------------------------------------------
# layered estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleBudget:
    """Draw counts for the nested Monte Carlo estimator.

    ``s_latent`` is the number of draws of the first continuous latent layer;
    deeper continuous layers draw once per parent sample unless a per-layer
    tuple is given.  ``s_output`` is the output draw count on the sampled
    path and ``c_discrete`` the support-set size for internal discrete sums.
    """

    s_latent: Union[int, tuple[int, ...]] = 1000
    s_output: int = 10
    c_discrete: int = 1000

    def __post_init__(self):
        counts = self.s_latent if isinstance(self.s_latent, tuple) else (self.s_latent,)
        for v in (*counts, self.s_output, self.c_discrete):
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise DomainError(f"sample counts must be integers >= 1, got {v!r}")

    def latent_draws(self, n_continuous_layers: int) -> tuple[int, ...]:
        if isinstance(self.s_latent, tuple):
            if len(self.s_latent) != n_continuous_layers:
                raise DomainError(
                    f"s_latent has {len(self.s_latent)} entries for "
                    f"{n_continuous_layers} continuous layers"
                )
            return self.s_latent
        return (self.s_latent,) + (1,) * (n_continuous_layers - 1)


@dataclass(frozen=True)
class MomentGrad:
    """A scalar moment estimate with partials per hyperparameter name."""

    value: float
    partials: Mapping[str, float] = field(default_factory=dict)


def _eval_expr(expr, env) -> Dual:
    try:
        out = expr(env)
    except KeyError as exc:
        raise ModelSpecError(f"parameter expression references unknown name {exc}") from exc
    return out if isinstance(out, Dual) else Dual.constant(out)


def _as_paths(d: Dual, n: int) -> Dual:
    if d.value.ndim == 0:
        return d.broadcast_to((n,))
    if d.value.shape == (n,):
        return d
    if d.value.shape == (n, 1):
        return d.reshape(n)
    raise ModelSpecError(
        f"expression must reduce to one value per path, got shape {d.value.shape}"
    )


def _draw_gamma_node(gen, shape_d: Dual, rate_d: Dual, full, noise: str, with_grad: bool) -> Dual:
    a = np.broadcast_to(shape_d.value, full)
    if np.any(a <= 0) or np.any(rate_d.value <= 0):
        raise DomainError("gamma node received a non-positive shape or rate")
    if noise == RNG_NOISE:
        x = gen.gamma(a)
    else:
        x = special.gammaincinv(a, gen.random(full))
    rate = np.broadcast_to(rate_d.value, full)
    value = x / rate
    if not with_grad:
        return Dual.constant(value)
    partials = {}
    dxda = gamma_shape_grad(a, x) if shape_d.partials else None
    for name in shape_d.partials.keys() | rate_d.partials.keys():
        term = 0.0
        if name in shape_d.partials:
            term = term + dxda * np.broadcast_to(shape_d.partials[name], full) / rate
        if name in rate_d.partials:
            term = term + (-value / rate) * np.broadcast_to(rate_d.partials[name], full)
        partials[name] = term
    return Dual(value, partials)


def _draw_normal_node(gen, mu_d: Dual, sigma_d: Dual, full, noise: str) -> Dual:
    if np.any(sigma_d.value <= 0):
        raise DomainError("normal node received a non-positive standard deviation")
    if noise == RNG_NOISE:
        eps = gen.standard_normal(full)
    else:
        eps = special.ndtri(gen.random(full))
    return mu_d.broadcast_to(full) + sigma_d.broadcast_to(full) * Dual.constant(eps)


def _dedup_mask(grouped: np.ndarray) -> np.ndarray:
    """Sort each row in place and mark the first occurrence of each value."""
    grouped.sort(axis=1)
    mask = np.ones(grouped.shape, dtype=np.float64)
    mask[:, 1:] = (grouped[:, 1:] != grouped[:, :-1]).astype(np.float64)
    return mask


def _poisson_mass(values: np.ndarray, rate: Dual) -> Dual:
    logw = (
        Dual.constant(values) * rate.log_clipped()
        - rate
        - Dual.constant(special.gammaln(values + 1.0))
    )
    return logw.exp()


def _self_normalized_output(gen, rate: Dual, s_output: int):
    n = rate.value.shape[0]
    y = gen.poisson(rate.value[:, None], size=(n, s_output)).astype(np.float64)
    mask = _dedup_mask(y)
    rate_col = rate.reshape(n, 1)
    w = _poisson_mass(y, rate_col) * Dual.constant(mask)
    den = w.sum(axis=1)
    if np.any(den.value <= 0):
        raise EstimatorError("output-level sampled sum underflowed to zero mass")
    yd = Dual.constant(y)
    ey = (w * yd).sum(axis=1) / den
    ey2 = (w * yd * yd).sum(axis=1) / den
    return ey, ey2


class _Estimator:
    def __init__(self, model, hyper_duals, budget, gen, sampled_output, noise):
        self.model = model
        self.hypers = hyper_duals
        self.budget = budget
        self.gen = gen
        self.sampled_output = sampled_output
        self.noise = noise
        cont = sum(1 for layer in model.layers if layer[0].kind != DISCRETE)
        draws = iter(budget.latent_draws(max(cont, 1)))
        self.layer_draws = [
            next(draws) if layer[0].kind != DISCRETE else None for layer in model.layers
        ]

    def run(self):
        ey, ey2 = self._recurse(0, {}, 1)
        return ey, ey2

    def _recurse(self, level, prev_nodes, n_paths):
        if level == len(self.model.layers):
            return self._output(prev_nodes, n_paths)
        layer = self.model.layers[level]
        if layer[0].kind == DISCRETE:
            return self._discrete_layer(level, layer[0], prev_nodes, n_paths)
        return self._continuous_layer(level, layer, prev_nodes, n_paths)

    def _continuous_layer(self, level, layer, prev_nodes, n_paths):
        s = self.layer_draws[level]
        if s > 1:
            prev_nodes = {k: d.repeat_paths(s) for k, d in prev_nodes.items()}
        n_new = n_paths * s
        env = {**self.hypers, **prev_nodes}
        with_grad = any(d.partials for d in self.hypers.values())
        new_nodes = {}
        for node in layer:
            full = (n_new, node.size)
            if node.family == "gamma":
                shape_d = _eval_expr(node.params[0], env)
                rate_d = _eval_expr(node.params[1], env)
                new_nodes[node.name] = _draw_gamma_node(
                    self.gen, shape_d, rate_d, full, self.noise, with_grad
                )
            elif node.family == NORMAL:
                mu_d = _eval_expr(node.params[0], env)
                sigma_d = _eval_expr(node.params[1], env)
                new_nodes[node.name] = _draw_normal_node(self.gen, mu_d, sigma_d, full, self.noise)
            else:  # pragma: no cover - guarded by LayeredModel validation
                raise ModelSpecError(f"unsupported continuous family {node.family!r}")
        ey, ey2 = self._recurse(level + 1, new_nodes, n_new)
        if s > 1:
            ey = ey.reshape(n_paths, s).mean(axis=1)
            ey2 = ey2.reshape(n_paths, s).mean(axis=1)
        return ey, ey2

    def _discrete_layer(self, level, node: Node, prev_nodes, n_paths):
        if self.noise != RNG_NOISE:
            raise ModelSpecError("fixed-noise mode does not support sampled discrete layers")
        c = self.budget.c_discrete
        prev_nodes = {k: d.repeat_paths(c) for k, d in prev_nodes.items()}
        n_new = n_paths * c
        env = {**self.hypers, **prev_nodes}
        rate = _as_paths(_eval_expr(node.params[0], env), n_new)
        if np.any(rate.value < 0):
            raise DomainError(f"discrete node {node.name!r} received a negative rate")
        values = self.gen.poisson(rate.value).astype(np.float64).reshape(n_paths, c)
        mask = _dedup_mask(values).reshape(-1)
        flat = values.reshape(-1)
        w = _poisson_mass(flat, rate) * Dual.constant(mask)
        ey, ey2 = self._recurse(
            level + 1, {node.name: Dual.constant(flat.reshape(n_new, 1))}, n_new
        )
        den = w.reshape(n_paths, c).sum(axis=1)
        if np.any(den.value <= 0):
            raise EstimatorError(f"sampled sum for node {node.name!r} underflowed to zero mass")
        ey = (w * ey).reshape(n_paths, c).sum(axis=1) / den
        ey2 = (w * ey2).reshape(n_paths, c).sum(axis=1) / den
        return ey, ey2

    def _output(self, prev_nodes, n_paths):
        out = self.model.output
        env = {**self.hypers, **prev_nodes}
        use_exact = out.exact_moments and not self.sampled_output
        if out.family == POISSON:
            rate = _as_paths(_eval_expr(out.params[0], env), n_paths)
            if np.any(rate.value < 0):
                raise DomainError("output node received a negative Poisson rate")
            if use_exact:
                return rate, rate + rate * rate
            if self.noise != RNG_NOISE:
                raise ModelSpecError("fixed-noise mode requires exact output moments")
            return _self_normalized_output(self.gen, rate, self.budget.s_output)
        mu = _as_paths(_eval_expr(out.params[0], env), n_paths)
        sigma = _as_paths(_eval_expr(out.params[1], env), n_paths)
        if np.any(sigma.value < 0):
            raise DomainError("output node received a negative standard deviation")
        if use_exact:
            return mu, mu * mu + sigma * sigma
        s = self.budget.s_output
        full = (n_paths, s)
        if self.noise == RNG_NOISE:
            eps = self.gen.standard_normal(full)
        else:
            eps = special.ndtri(self.gen.random(full))
        y = mu.reshape(n_paths, 1).broadcast_to(full) + sigma.reshape(n_paths, 1).broadcast_to(
            full
        ) * Dual.constant(eps)
        return y.mean(axis=1), (y * y).mean(axis=1)


def estimate_prior_moments(
    model: LayeredModel,
    hypers: UnconstrainedVector,
    budget: SampleBudget,
    rng: RngHandle,
    *,
    sampled_output: bool = False,
    noise: str = RNG_NOISE,
    with_grad: bool = True,
) -> tuple[MomentGrad, MomentGrad]:
    """Nested MC estimate of (E[Y], E[Y^2]) with hyperparameter partials.

    Continuous layers are sampled with reparameterization so the partials
    flow through the draws; internal discrete layers and (optionally) the
    output use self-normalized sampled sums with gradients through the
    masses.  ``noise="quantile"`` draws continuous latents through fixed
    uniform noise and the gamma quantile, which makes repeated calls with
    the same ``rng`` suitable for common-random-number finite differences.
    With ``with_grad=False`` the partials maps are empty.
    """
    if noise not in (RNG_NOISE, QUANTILE_NOISE):
        raise DomainError(f"noise must be 'rng' or 'quantile', got {noise!r}")
    missing = [n for n in model.hyper_names if n not in hypers.names]
    if missing:
        raise ModelSpecError(f"vector does not bind hyperparameters {missing}")
    natural = hypers.natural()
    hyper_duals = {
        name: (Dual.seed(name, natural[name]) if with_grad else Dual.constant(natural[name]))
        for name in hypers.names
    }
    est = _Estimator(model, hyper_duals, budget, rng.generator(), sampled_output, noise)
    ey, ey2 = est.run()
    ey = ey.mean()
    ey2 = ey2.mean()

    def to_grad(d: Dual) -> MomentGrad:
        value = float(d.value)
        if not math.isfinite(value):
            raise EstimatorError(f"moment estimate is non-finite: {value!r}")
        if not with_grad:
            return MomentGrad(value=value, partials={})
        partials = {}
        for name in hypers.names:
            p = float(np.asarray(d.partial(name)))
            if not math.isfinite(p):
                raise GradientError("non-finite moment partial", context={"hyper": name})
            partials[name] = p
        return MomentGrad(value=value, partials=partials)

    return to_grad(ey), to_grad(ey2)


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradientCheckEntry:
    hyper: str
    statistic: str
    analytic: float
    numeric: float
    rel_err: float


@dataclass(frozen=True)
class GradientCheckReport:
    entries: tuple[GradientCheckEntry, ...]
    step: float

    @property
    def max_rel_err(self) -> float:
        return max(e.rel_err for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "max_rel_err": self.max_rel_err,
            "entries": [
                {
                    "hyper": e.hyper,
                    "statistic": e.statistic,
                    "analytic": e.analytic,
                    "numeric": e.numeric,
                    "rel_err": e.rel_err,
                }
                for e in self.entries
            ],
        }


def gradient_check(
    model: LayeredModel,
    hypers: UnconstrainedVector,
    budget: SampleBudget,
    h: float = 1e-4,
    rng: RngHandle | None = None,
) -> GradientCheckReport:
    """Compare estimator partials against common-random-number differences.

    The same fixed-noise estimator is evaluated at hyperparameter values
    shifted by ``+-h`` relative to each coordinate and the central difference
    is compared to the reported partial, for both E[Y] and E[Y^2].
    """
    if not h > 0:
        raise DomainError(f"step h must be positive, got {h!r}")
    if rng is None:
        rng = RngHandle(0)

    def run(vec):
        return estimate_prior_moments(
            model, vec, budget, rng, sampled_output=False, noise=QUANTILE_NOISE
        )

    base_mean, base_second = run(hypers)
    natural = hypers.natural()
    entries = []
    for name in hypers.names:
        delta = h * abs(natural[name])
        hi = dict(natural)
        lo = dict(natural)
        hi[name] = natural[name] + delta
        lo[name] = natural[name] - delta
        mean_hi, second_hi = run(hypers.from_natural(hi))
        mean_lo, second_lo = run(hypers.from_natural(lo))
        for stat, base, up, down in (
            ("mean", base_mean, mean_hi, mean_lo),
            ("second_moment", base_second, second_hi, second_lo),
        ):
            numeric = (up.value - down.value) / (2.0 * delta)
            analytic = base.partials[name]
            denom = max(abs(numeric), abs(analytic), 1e-12)
            entries.append(
                GradientCheckEntry(
                    hyper=name,
                    statistic=stat,
                    analytic=analytic,
                    numeric=numeric,
                    rel_err=abs(analytic - numeric) / denom,
                )
            )
    return GradientCheckReport(entries=tuple(entries), step=h)


# ---------------------------------------------------------------------------
# discrepancy minimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam settings and stopping rules for :func:`match`."""

    step_size: float = 0.1
    max_iterations: int = 5000
    tolerance: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    relative_residuals: bool = True
    # The stall test uses Adam's bias-corrected gradient average: the
    # per-iteration sample gradient carries Monte Carlo spikes that would
    # reset the run even when the underlying gradient has vanished.
    grad_norm_threshold: float = 1e-4
    stall_iterations: int = 50

    def __post_init__(self):
        if not self.step_size > 0:
            raise DomainError("step_size must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")


@dataclass(frozen=True)
class Regularizer:
    """Additional statistic subtracted (scaled by ``weight``) from the objective.

    ``log_variance`` pushes solutions toward broader prior predictive
    variance, resolving ties when multiple hyperparameters match the targets.
    """

    statistic: str = "log_variance"
    weight: float = 0.0

    def __post_init__(self):
        if self.statistic not in ("mean", "variance", "log_variance"):
            raise DomainError(f"unknown regularizer statistic {self.statistic!r}")
        if not self.weight >= 0:
            raise DomainError("regularizer weight must be >= 0")


@dataclass(frozen=True)
class MatchProblem:
    """Targets, budgets and optimizer configuration for one matching run."""

    model: LayeredModel
    init: UnconstrainedVector
    targets: MomentSet
    weights: Optional[Mapping[str, float]] = None
    budget: SampleBudget = SampleBudget()
    optimizer: OptimizerConfig = OptimizerConfig()
    regularizer: Optional[Regularizer] = None
    sampled_output: bool = False

    def __post_init__(self):
        if self.targets.rho1 is not None or self.targets.rho2 is not None:
            raise ModelSpecError(
                "the stochastic matcher handles mean/variance targets; "
                "correlation targets are solved by the closed-form route"
            )
        if self.targets.mean is None and self.targets.variance is None:
            raise ModelSpecError("at least one target statistic is required")
        if self.weights is not None:
            for key, w in self.weights.items():
                if key not in ("mean", "variance"):
                    raise ModelSpecError(f"unknown weight key {key!r}")
                if not (math.isfinite(w) and w >= 0):
                    raise DomainError(f"weight for {key!r} must be finite and >= 0")

    def weight(self, key: str) -> float:
        if self.weights is None or key not in self.weights:
            return 1.0
        return float(self.weights[key])


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    discrepancy: float
    mean_estimate: float
    variance_estimate: float
    hypers: Mapping[str, float]


@dataclass(frozen=True)
class MatchResult:
    fitted: object
    vector: UnconstrainedVector
    discrepancy: float
    trace: tuple[TracePoint, ...]
    status: str


def _objective(problem: MatchProblem, est_mean: MomentGrad, est_second: MomentGrad, names):
    mean_hat = est_mean.value
    var_hat = est_second.value - mean_hat * mean_hat
    var_partials = {
        n: est_second.partials[n] - 2.0 * mean_hat * est_mean.partials[n] for n in names
    }
    relative = problem.optimizer.relative_residuals
    d = 0.0
    grad = {n: 0.0 for n in names}
    stats = (
        ("mean", problem.targets.mean, mean_hat, est_mean.partials),
        ("variance", problem.targets.variance, var_hat, var_partials),
    )
    for key, target, value, partials in stats:
        if target is None:
            continue
        w = problem.weight(key)
        scale = max(1.0, abs(target)) if relative else 1.0
        r = (value - target) / scale
        d += w * r * r
        for n in names:
            grad[n] += 2.0 * w * r / scale * partials[n]
    reg = problem.regularizer
    if reg is not None and reg.weight > 0:
        if reg.statistic == "mean":
            t, dt = mean_hat, est_mean.partials
        elif reg.statistic == "variance":
            t, dt = var_hat, var_partials
        else:
            floor = 1e-300
            safe = max(var_hat, floor)
            t = math.log(safe)
            dt = {n: (var_partials[n] / safe if var_hat > floor else 0.0) for n in names}
        d -= reg.weight * t
        for n in names:
            grad[n] -= reg.weight * dt[n]
    return d, grad, mean_hat, var_hat


def match(problem: MatchProblem) -> MatchResult:
    """Minimize the target discrepancy with Adam in unconstrained coordinates.

    Each iteration re-estimates the moments with a fresh stream derived from
    the optimizer seed.  Stops when the discrepancy falls under the
    tolerance, when the unconstrained gradient norm stays under its
    threshold for a run of iterations while the discrepancy stays above
    tolerance (``boundary-suspected``: the targets lie outside the model's
    feasible region), or at the iteration cap.
    """
    cfg = problem.optimizer
    vec = problem.init
    extra = [n for n in vec.names if n not in problem.model.hyper_names]
    missing = [n for n in problem.model.hyper_names if n not in vec.names]
    if extra or missing:
        raise ModelSpecError(
            f"init vector names do not match the model (extra {extra}, missing {missing})"
        )
    names = vec.names
    u = vec.array()
    m = np.zeros_like(u)
    v = np.zeros_like(u)
    trace: list[TracePoint] = []
    status = STATUS_MAX_ITERATIONS
    stall = 0
    current = vec
    for it in range(cfg.max_iterations):
        if not np.all(np.isfinite(u)) or np.any(u > 700):
            raise OptimizationError("optimization diverged to non-finite parameters", trace)
        current = vec.with_values(u)
        rng_it = RngHandle(cfg.seed, stream=it)
        try:
            est_mean, est_second = estimate_prior_moments(
                problem.model,
                current,
                problem.budget,
                rng_it,
                sampled_output=problem.sampled_output,
            )
        except (EstimatorError, GradientError) as exc:
            raise OptimizationError(f"estimator failed during optimization: {exc}", trace)
        d, grad_nat, mean_hat, var_hat = _objective(problem, est_mean, est_second, names)
        if not math.isfinite(d):
            raise OptimizationError("discrepancy became non-finite", trace)
        trace.append(
            TracePoint(
                iteration=it,
                discrepancy=d,
                mean_estimate=mean_hat,
                variance_estimate=var_hat,
                hypers=current.natural(),
            )
        )
        if d < cfg.tolerance:
            status = STATUS_CONVERGED
            break
        natural = current.natural()
        g_u = np.array([grad_nat[n] * natural[n] for n in names])
        t = it + 1
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g_u
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g_u * g_u
        m_hat = m / (1.0 - cfg.beta1**t)
        v_hat = v / (1.0 - cfg.beta2**t)
        if float(np.linalg.norm(m_hat)) < cfg.grad_norm_threshold:
            stall += 1
            if stall >= cfg.stall_iterations:
                status = STATUS_BOUNDARY
                break
        else:
            stall = 0
        u = u - cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return MatchResult(
        fitted=unpack(current),
        vector=current,
        discrepancy=trace[-1].discrepancy,
        trace=tuple(trace),
        status=status,
    )
