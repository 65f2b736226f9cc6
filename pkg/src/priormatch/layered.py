"""Layered generative model descriptions consumed by the moment estimator.

A model is an ordered sequence of latent layers ending in an output node.
Each node names a distribution family and supplies its parameters as
expressions over the bound hyperparameters and the previous layer's node
values; expressions are plain callables evaluated on :class:`~priormatch.duals.Dual`
environments, so gradients flow through them automatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

from .duals import Dual
from .errors import ModelSpecError
from .params import MEAN_STD, SHAPE_RATE, UnconstrainedVector

GAMMA = "gamma"
NORMAL = "normal"
POISSON = "poisson"

CONTINUOUS = "continuous-reparam"
DISCRETE = "discrete"

_N_PARAMS = {GAMMA: 2, NORMAL: 2, POISSON: 1}

ParamExpr = Callable[[Mapping[str, Dual]], Union[Dual, float]]


@dataclass(frozen=True)
class Node:
    """One latent node group: ``size`` iid draws from the family per path.

    ``params`` are the family parameters in natural order: (shape, rate) for
    gamma, (mean, std) for normal, (rate,) for poisson.
    """

    name: str
    family: str
    params: tuple[ParamExpr, ...]
    size: int = 1

    def __post_init__(self):
        if self.family not in _N_PARAMS:
            raise ModelSpecError(f"unsupported family {self.family!r} for node {self.name!r}")
        if len(self.params) != _N_PARAMS[self.family]:
            raise ModelSpecError(
                f"node {self.name!r}: family {self.family} takes "
                f"{_N_PARAMS[self.family]} parameters, got {len(self.params)}"
            )
        if self.size < 1:
            raise ModelSpecError(f"node {self.name!r}: size must be >= 1")
        if self.family == POISSON and self.size != 1:
            raise ModelSpecError("discrete nodes must have size 1")

    @property
    def kind(self) -> str:
        return DISCRETE if self.family == POISSON else CONTINUOUS


@dataclass(frozen=True)
class OutputNode:
    """Terminal observation node.

    ``exact_moments`` marks that closed-form conditional moments are used
    for E[Y | parents] and E[Y^2 | parents]; the sampled fallback draws
    output values instead.
    """

    family: str
    params: tuple[ParamExpr, ...]
    exact_moments: bool = True

    def __post_init__(self):
        if self.family not in (POISSON, NORMAL):
            raise ModelSpecError(f"unsupported output family {self.family!r}")
        if len(self.params) != _N_PARAMS[self.family]:
            raise ModelSpecError(
                f"output family {self.family} takes {_N_PARAMS[self.family]} parameters"
            )


@dataclass(frozen=True)
class LayeredModel:
    """Ordered latent layers terminating in an output node.

    Parameter expressions of layer ``l`` may reference hyperparameters and
    the node values of layer ``l - 1`` only (enforced at evaluation time by
    restricting the environment).  A layer is either all-continuous or a
    single discrete node.
    """

    layers: tuple[tuple[Node, ...], ...]
    output: OutputNode
    hyper_names: tuple[str, ...]

    def __post_init__(self):
        if not self.layers:
            raise ModelSpecError("a layered model needs at least one latent layer")
        seen = set()
        for layer in self.layers:
            if not layer:
                raise ModelSpecError("empty layer")
            kinds = {node.kind for node in layer}
            if len(kinds) > 1:
                raise ModelSpecError("layers mixing continuous and discrete nodes are unsupported")
            if DISCRETE in kinds and len(layer) > 1:
                raise ModelSpecError("a discrete layer must hold a single node")
            for node in layer:
                if node.name in seen or node.name in self.hyper_names:
                    raise ModelSpecError(f"duplicate node name {node.name!r}")
                seen.add(node.name)


def hyper_ref(name: str) -> ParamExpr:
    """Expression returning the named hyperparameter (or parent node) as-is."""

    def expr(env):
        return env[name]

    return expr


def _inner_product(left: str, right: str) -> ParamExpr:
    def expr(env):
        return (env[left] * env[right]).sum(axis=-1)

    return expr


def pmf_model(k: int, parameterization: str = MEAN_STD) -> LayeredModel:
    """Two-group single-layer model: gamma factors feeding a Poisson output.

    In ``mean_std`` coordinates the gamma shape and rate are derived from the
    prior mean and standard deviation, which gives the smoother optimization
    surface; ``shape_rate`` exposes the natural gamma parameters directly.
    """
    if parameterization == MEAN_STD:
        names = ("mu_theta", "sigma_theta", "mu_beta", "sigma_beta")
        theta = Node(
            "theta",
            GAMMA,
            (
                lambda e: (e["mu_theta"] / e["sigma_theta"]) ** 2,
                lambda e: e["mu_theta"] / e["sigma_theta"] ** 2,
            ),
            size=k,
        )
        beta = Node(
            "beta",
            GAMMA,
            (
                lambda e: (e["mu_beta"] / e["sigma_beta"]) ** 2,
                lambda e: e["mu_beta"] / e["sigma_beta"] ** 2,
            ),
            size=k,
        )
    elif parameterization == SHAPE_RATE:
        names = ("a", "b", "c", "d")
        theta = Node("theta", GAMMA, (hyper_ref("a"), hyper_ref("b")), size=k)
        beta = Node("beta", GAMMA, (hyper_ref("c"), hyper_ref("d")), size=k)
    else:
        raise ModelSpecError(f"unknown parameterization {parameterization!r}")
    output = OutputNode(POISSON, (_inner_product("theta", "beta"),))
    return LayeredModel(layers=((theta, beta),), output=output, hyper_names=names)


def hpf_model(k: int) -> LayeredModel:
    """Hierarchical Poisson factorization: per-group gamma rate hyperpriors.

    Layer one draws the rate variables ``xi`` and ``eta``; layer two draws
    the factor vectors given those rates; the output is Poisson with the
    factor inner product as rate.
    """
    names = ("a", "a_prime", "b_prime", "c", "c_prime", "d_prime")
    xi = Node(
        "xi",
        GAMMA,
        (hyper_ref("a_prime"), lambda e: e["a_prime"] / e["b_prime"]),
    )
    eta = Node(
        "eta",
        GAMMA,
        (hyper_ref("c_prime"), lambda e: e["c_prime"] / e["d_prime"]),
    )
    theta = Node("theta", GAMMA, (hyper_ref("a"), hyper_ref("xi")), size=k)
    beta = Node("beta", GAMMA, (hyper_ref("c"), hyper_ref("eta")), size=k)
    output = OutputNode(POISSON, (_inner_product("theta", "beta"),))
    return LayeredModel(layers=((xi, eta), (theta, beta)), output=output, hyper_names=names)


def model_for(vec: UnconstrainedVector) -> LayeredModel:
    """Build the layered model matching an optimization vector's tags."""
    if vec.model == "pmf":
        return pmf_model(vec.k, vec.parameterization)
    if vec.model == "hpf":
        return hpf_model(vec.k)
    raise ModelSpecError(
        f"no layered model for tag {vec.model!r}; the stochastic matcher supports pmf and hpf"
    )
