"""Forward-mode derivative bookkeeping for the Monte Carlo estimators.

A :class:`Dual` carries an array value together with its partial derivatives
with respect to a set of named hyperparameters.  Only the handful of
operations the layered estimator needs are implemented; missing partial keys
are implicitly zero.
"""

from __future__ import annotations

import numpy as np


def _as_value(x):
    return np.asarray(x, dtype=np.float64)


def _bcast(p, shape):
    p = np.asarray(p, dtype=np.float64)
    return p if p.shape == shape else np.broadcast_to(p, shape)


class Dual:
    __slots__ = ("value", "partials")

    def __init__(self, value, partials=None):
        self.value = _as_value(value)
        self.partials = {} if partials is None else dict(partials)

    @classmethod
    def constant(cls, value) -> "Dual":
        return cls(value, {})

    @classmethod
    def seed(cls, name: str, value) -> "Dual":
        v = _as_value(value)
        return cls(v, {name: np.ones_like(v)})

    def partial(self, name: str) -> np.ndarray:
        p = self.partials.get(name)
        return np.zeros_like(self.value) if p is None else _bcast(p, self.value.shape)

    def _combine(self, other, value, d_self, d_other) -> "Dual":
        out = {}
        for k in self.partials.keys() | other.partials.keys():
            term = 0.0
            if k in self.partials:
                term = term + d_self * self.partials[k]
            if k in other.partials:
                term = term + d_other * other.partials[k]
            out[k] = _bcast(term, value.shape)
        return Dual(value, out)

    def _map(self, value, dval) -> "Dual":
        return Dual(value, {k: _bcast(dval * p, value.shape) for k, p in self.partials.items()})

    # --- arithmetic ---

    def __add__(self, other):
        other = other if isinstance(other, Dual) else Dual.constant(other)
        return self._combine(other, self.value + other.value, 1.0, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        other = other if isinstance(other, Dual) else Dual.constant(other)
        return self._combine(other, self.value - other.value, 1.0, -1.0)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        return self._map(-self.value, -1.0)

    def __mul__(self, other):
        other = other if isinstance(other, Dual) else Dual.constant(other)
        return self._combine(other, self.value * other.value, other.value, self.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = other if isinstance(other, Dual) else Dual.constant(other)
        value = self.value / other.value
        return self._combine(other, value, 1.0 / other.value, -value / other.value)

    def __rtruediv__(self, other):
        return Dual.constant(other).__truediv__(self)

    def __pow__(self, exponent):
        if isinstance(exponent, Dual):
            raise TypeError("only constant exponents are supported")
        value = self.value**exponent
        return self._map(value, exponent * self.value ** (exponent - 1))

    def log(self) -> "Dual":
        return self._map(np.log(self.value), 1.0 / self.value)

    def log_clipped(self, floor: float = 1e-300) -> "Dual":
        """log with the value floored away from zero; keeps Poisson(0) masses finite."""
        safe = np.maximum(self.value, floor)
        return self._map(np.log(safe), 1.0 / safe)

    def exp(self) -> "Dual":
        value = np.exp(self.value)
        return self._map(value, value)

    def sqrt(self) -> "Dual":
        value = np.sqrt(self.value)
        return self._map(value, 0.5 / value)

    # --- structure ---

    def reshape(self, *shape) -> "Dual":
        return Dual(
            self.value.reshape(*shape),
            {k: _bcast(p, self.value.shape).reshape(*shape) for k, p in self.partials.items()},
        )

    def sum(self, axis=None) -> "Dual":
        return Dual(
            self.value.sum(axis=axis),
            {k: _bcast(p, self.value.shape).sum(axis=axis) for k, p in self.partials.items()},
        )

    def mean(self, axis=None) -> "Dual":
        return Dual(
            self.value.mean(axis=axis),
            {k: _bcast(p, self.value.shape).mean(axis=axis) for k, p in self.partials.items()},
        )

    def repeat_paths(self, times: int) -> "Dual":
        """Repeat each leading-axis entry ``times`` times (path expansion)."""
        return Dual(
            np.repeat(self.value, times, axis=0),
            {
                k: np.repeat(_bcast(p, self.value.shape), times, axis=0)
                for k, p in self.partials.items()
            },
        )

    def broadcast_to(self, shape) -> "Dual":
        return Dual(
            np.broadcast_to(self.value, shape),
            {k: _bcast(p, shape) for k, p in self.partials.items()},
        )

    def __repr__(self):
        return f"Dual(value={self.value!r}, partials={sorted(self.partials)})"
