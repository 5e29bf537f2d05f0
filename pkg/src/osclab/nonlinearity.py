"""Reaction laws ``f(x, u)``, ``g(x, u)`` with a smooth cut-off at large ``|u|``.

The shipped laws do not depend on the point ``x``; the point argument is
kept in every signature so that spatially varying laws can be added.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Law:
    """Scalar law with its first two ``u``-derivatives."""

    name: str
    value: Callable
    du: Callable
    duu: Callable


def _const(c):
    return lambda u: np.full_like(u, c)


LAWS = {
    "zero": Law("zero", _const(0.0), _const(0.0), _const(0.0)),
    "one": Law("one", _const(1.0), _const(0.0), _const(0.0)),
    "linear": Law("linear", lambda u: u.copy(), _const(1.0), _const(0.0)),
    "u_minus_one": Law("u_minus_one", lambda u: u - 1.0, _const(1.0), _const(0.0)),
    "cubic": Law("cubic", lambda u: u ** 3 - u, lambda u: 3 * u ** 2 - 1.0, lambda u: 6 * u),
    "sine": Law("sine", np.sin, np.cos, lambda u: -np.sin(u)),
}


def get_law(name):
    try:
        return LAWS[name]
    except KeyError:
        raise ValueError(f"unknown law {name!r}; choose from {sorted(LAWS)}") from None


def saturate(t):
    """C^2 odd ramp: identity on ``[-1, 1]``, ``1 + tanh(t - 1)`` beyond."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    return np.where(a <= 1.0, t, np.sign(t) * (1.0 + np.tanh(a - 1.0)))


def saturate_derivative(t):
    a = np.abs(np.asarray(t, dtype=float))
    return np.where(a <= 1.0, 1.0, 1.0 / np.cosh(a - 1.0) ** 2)


@dataclass(frozen=True)
class Nonlinearity:
    """Pair of laws ``f`` (concentrated) and ``g`` (boundary) with cut-off radius ``R``.

    Each law ``L`` is evaluated as ``L(x, R * saturate(u / R))``, so the
    clamped law and its first two derivatives are bounded in ``u``.
    """

    f_law: Law
    g_law: Law
    R: float = 10.0

    @classmethod
    def from_names(cls, f="zero", g="zero", R=10.0):
        return cls(get_law(f), get_law(g), float(R))

    def _clamp(self, u):
        u = np.asarray(u, dtype=float)
        return self.R * saturate(u / self.R), saturate_derivative(u / self.R)

    def f(self, x, u):
        v, _ = self._clamp(u)
        return self.f_law.value(v)

    def df(self, x, u):
        v, dv = self._clamp(u)
        return self.f_law.du(v) * dv

    def g(self, x, u):
        v, _ = self._clamp(u)
        return self.g_law.value(v)

    def dg(self, x, u):
        v, dv = self._clamp(u)
        return self.g_law.du(v) * dv

    @property
    def trivial(self):
        return self.f_law.name == "zero" and self.g_law.name == "zero"
