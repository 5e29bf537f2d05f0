"""Charts, oscillation profiles and the perturbed boundary geometry.

Everything here works in two dimensions with a single boundary chart.  A
chart maps the reference square ``Q = [-1, 1]^2`` with coordinates
``(x, s)`` into the plane so that ``s < 0`` is inside the fixed domain and
``s = 0`` is its boundary.  The oscillating domain is obtained by lifting
the boundary to the graph ``s = rho_eps(x)`` of an oscillation profile.

All objects are immutable after construction.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .numerics import composite_gauss, gauss_legendre

_TOL = 1e-12


@dataclass(frozen=True)
class Affine:
    """Callable ``c0 + c1 * x``; used for radii and amplitude modulations."""

    c0: float
    c1: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.c0 + self.c1 * x

    def derivative(self):
        return Affine(self.c1, 0.0)


def _check_interval(x, lo, hi, what="x"):
    x = np.asarray(x, dtype=float)
    if np.any(x < lo - _TOL) or np.any(x > hi + _TOL) or np.any(np.isnan(x)):
        raise DomainError(f"{what} outside [{lo}, {hi}]")
    return x


class Chart:
    """Lipschitz map from the reference square into the plane.

    Subclasses provide ``forward``, the partial derivatives ``d_dx`` and
    ``d_ds`` and an explicit ``inverse``.  Arrays broadcast; points are
    returned with a trailing axis of length 2.
    """

    domain = (-1.0, 1.0)

    def _check(self, x, s):
        x = _check_interval(x, *self.domain, what="x'")
        s = _check_interval(s, -1.0, 1.0, what="s")
        return np.broadcast_arrays(x, s)

    def forward(self, x, s):
        raise NotImplementedError

    def d_dx(self, x, s):
        raise NotImplementedError

    def d_ds(self, x, s):
        raise NotImplementedError

    def inverse(self, X, Y):
        raise NotImplementedError

    def jacobian(self, x, s):
        """Absolute value of the Jacobian determinant."""
        a = self.d_dx(x, s)
        b = self.d_ds(x, s)
        return np.abs(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])

    def trace(self, x):
        """Boundary parametrization ``x -> forward(x, 0)``."""
        return self.forward(x, np.zeros_like(np.asarray(x, dtype=float)))

    def trace_derivative(self, x):
        return self.d_dx(x, np.zeros_like(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class FlatStrip(Chart):
    """Identity chart; the fixed domain is ``(-1, 1) x (-1, 0)``."""

    kind = "flat"

    def forward(self, x, s):
        x, s = self._check(x, s)
        return np.stack([x, s], axis=-1)

    def d_dx(self, x, s):
        x, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float))
        return np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1)

    def d_ds(self, x, s):
        x, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float))
        return np.stack([np.zeros_like(x), np.ones_like(x)], axis=-1)

    def inverse(self, X, Y):
        return np.asarray(X, dtype=float).copy(), np.asarray(Y, dtype=float).copy()


@dataclass(frozen=True)
class AnnulusSector(Chart):
    """Polar chart ``((r(x) + s/2) cos(pi x/2), (r(x) + s/2) sin(pi x/2))``.

    The fixed domain is the half annulus between radii ``r - 1/2`` and
    ``r``; the oscillating boundary sits on the outer arc.
    """

    radius: Callable = field(default_factory=lambda: Affine(2.0))
    dradius: Callable = None
    kind = "annulus"

    def __post_init__(self):
        if self.dradius is None:
            if not hasattr(self.radius, "derivative"):
                raise ValueError("dradius is required for a radius without derivative()")
            object.__setattr__(self, "dradius", self.radius.derivative())

    @classmethod
    def constant(cls, r0):
        return cls(Affine(float(r0)))

    @classmethod
    def linear(cls, r0, slope):
        return cls(Affine(float(r0), float(slope)))

    def forward(self, x, s):
        x, s = self._check(x, s)
        rad = self.radius(x) + 0.5 * s
        th = 0.5 * np.pi * x
        return np.stack([rad * np.cos(th), rad * np.sin(th)], axis=-1)

    def d_dx(self, x, s):
        x, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float))
        rad = self.radius(x) + 0.5 * s
        dr = self.dradius(x) * np.ones_like(x)
        th = 0.5 * np.pi * x
        c, sn = np.cos(th), np.sin(th)
        return np.stack([dr * c - 0.5 * np.pi * rad * sn, dr * sn + 0.5 * np.pi * rad * c], axis=-1)

    def d_ds(self, x, s):
        x, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float))
        th = 0.5 * np.pi * x
        return np.stack([0.5 * np.cos(th), 0.5 * np.sin(th)], axis=-1)

    def jacobian(self, x, s):
        x, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float))
        return 0.25 * np.pi * np.abs(self.radius(x) + 0.5 * s)

    def inverse(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        x = np.arctan2(Y, X) / (0.5 * np.pi)
        s = 2.0 * (np.hypot(X, Y) - self.radius(x))
        return x, s


# --- oscillation profiles -------------------------------------------------


@dataclass(frozen=True)
class ConstantShape:
    value: float

    def __call__(self, z):
        return np.full_like(np.asarray(z, dtype=float), self.value)

    def derivative(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class SawtoothShape:
    """Triangle wave of slope ``+-slope``, minimum ``offset``, period ``period``.

    Decreasing on ``(0, period/2)``, increasing on ``(period/2, period)``.
    The derivative is the right derivative at the kinks.
    """

    slope: float
    offset: float
    period: float

    def __call__(self, z):
        w = np.mod(np.asarray(z, dtype=float), self.period)
        return self.offset + self.slope * np.abs(w - 0.5 * self.period)

    def derivative(self, z):
        w = np.mod(np.asarray(z, dtype=float), self.period)
        return np.where(w < 0.5 * self.period, -self.slope, self.slope)


@dataclass(frozen=True)
class SineShape:
    amplitude: float
    offset: float
    period: float

    def __call__(self, z):
        return self.offset + self.amplitude * np.sin(2 * np.pi * np.asarray(z, float) / self.period)

    def derivative(self, z):
        k = 2 * np.pi / self.period
        return self.amplitude * k * np.cos(k * np.asarray(z, float))


@dataclass(frozen=True)
class OscillationProfile:
    """Periodic profile ``rho`` scaled into ``rho_eps(x) = eps phi(x) rho(x / eps**alpha)``.

    Parameters
    ----------
    shape, dshape : callable
        The cell profile and its (right) derivative.
    period : float
        Length of the periodicity cell.
    alpha : float
        Oscillation exponent in ``(0, 1]``.
    modulation : callable
        Amplitude modulation ``phi``; needs ``derivative()`` unless
        ``dmodulation`` is given.
    kinks : tuple of float
        Positions inside ``[0, period)`` where ``dshape`` jumps.
    """

    shape: Callable
    dshape: Callable
    period: float
    alpha: float = 1.0
    modulation: Callable = Affine(1.0)
    dmodulation: Callable = None
    kinks: tuple = ()
    label: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.period > 0:
            raise DomainError("period must be positive")
        if self.dmodulation is None:
            object.__setattr__(self, "dmodulation", self.modulation.derivative())

    def rho(self, z):
        return self.shape(z)

    def phi(self, x):
        return self.modulation(x) * np.ones_like(np.asarray(x, float))

    def scale(self, eps):
        """Length of one oscillation period in the boundary parameter."""
        return eps ** self.alpha * self.period

    def rho_eps(self, eps, x):
        _check_eps(eps)
        x = np.asarray(x, dtype=float)
        return eps * self.phi(x) * self.shape(x / eps ** self.alpha)

    def drho_eps(self, eps, x):
        _check_eps(eps)
        x = np.asarray(x, dtype=float)
        z = x / eps ** self.alpha
        return (eps * self.dmodulation(x) * self.shape(z)
                + eps ** (1.0 - self.alpha) * self.phi(x) * self.dshape(z))

    def kinks_in(self, eps, a, b):
        """Kink positions of ``rho_eps`` inside ``[a, b]``."""
        if not self.kinks:
            return np.empty(0)
        sc = eps ** self.alpha
        lo = int(np.floor(a / (sc * self.period))) - 1
        hi = int(np.ceil(b / (sc * self.period))) + 1
        cells = np.arange(lo, hi + 1)[:, None] * self.period
        pts = (cells + np.asarray(self.kinks)[None, :]).ravel() * sc
        return np.sort(pts[(pts >= a) & (pts <= b)])


def _check_eps(eps):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")


def constant_profile(value, period=1.0, alpha=1.0, modulation=Affine(1.0)):
    return OscillationProfile(ConstantShape(value), ConstantShape(value).derivative, period,
                              alpha, modulation, label="constant")


def sawtooth_profile(slope=1.0, offset=1.0, period=2.0, alpha=1.0, modulation=Affine(1.0)):
    sh = SawtoothShape(slope, offset, period)
    return OscillationProfile(sh, sh.derivative, period, alpha, modulation,
                              kinks=(0.0, 0.5 * period), label="sawtooth")


def sine_profile(amplitude=1.0, offset=2.0, period=2.0, alpha=1.0, modulation=Affine(1.0)):
    sh = SineShape(amplitude, offset, period)
    return OscillationProfile(sh, sh.derivative, period, alpha, modulation, label="sine")


# --- reparametrizations ----------------------------------------------------


@dataclass(frozen=True)
class CubicStretch:
    """Boundary reparametrization ``t -> t**3`` restricted to ``[delta, 1]``."""

    delta: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")

    @property
    def domain(self):
        return (self.delta, 1.0)

    def __call__(self, t):
        return np.asarray(t, dtype=float) ** 3

    def derivative(self, t):
        return 3.0 * np.asarray(t, dtype=float) ** 2

    def inverse(self, x):
        return np.cbrt(np.asarray(x, dtype=float))

    def max_derivative(self):
        return 3.0


@dataclass(frozen=True)
class ReparametrizedChart(Chart):
    """``(t, s) -> base(sigma(t), s)`` for a monotone boundary stretch ``sigma``."""

    base: Chart
    sigma: CubicStretch

    @property
    def domain(self):
        return self.sigma.domain

    def forward(self, t, s):
        t, s = self._check(t, s)
        return self.base.forward(self.sigma(t), s)

    def d_dx(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        return self.base.d_dx(self.sigma(t), s) * self.sigma.derivative(t)[..., None]

    def d_ds(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        return self.base.d_ds(self.sigma(t), s)

    def inverse(self, X, Y):
        x, s = self.base.inverse(X, Y)
        return self.sigma.inverse(x), s


@dataclass(frozen=True)
class ReparametrizedProfile:
    """The same physical boundary graph read in the stretched parameter."""

    base: OscillationProfile
    sigma: CubicStretch

    # the periodic cell is unchanged
    shape = property(lambda self: self.base.shape)
    dshape = property(lambda self: self.base.dshape)
    period = property(lambda self: self.base.period)
    alpha = property(lambda self: self.base.alpha)
    kinks = property(lambda self: self.base.kinks)
    label = property(lambda self: self.base.label + "/stretched")

    def rho(self, z):
        return self.base.rho(z)

    def phi(self, t):
        return self.base.phi(self.sigma(t))

    def scale(self, eps):
        return self.base.scale(eps) / self.sigma.max_derivative()

    def rho_eps(self, eps, t):
        return self.base.rho_eps(eps, self.sigma(t))

    def drho_eps(self, eps, t):
        return self.base.drho_eps(eps, self.sigma(t)) * self.sigma.derivative(t)

    def kinks_in(self, eps, a, b):
        k = self.base.kinks_in(eps, float(self.sigma(a)), float(self.sigma(b)))
        return self.sigma.inverse(k)


def stretched(chart, profile, delta=0.25):
    """Chart and profile of the same geometry under the cubic stretch."""
    sig = CubicStretch(delta)
    return ReparametrizedChart(chart, sig), ReparametrizedProfile(profile, sig)


# --- perturbed chart and strip ----------------------------------------------


@dataclass(frozen=True)
class PerturbedChart(Chart):
    """``Phi_eps = Phi o T_eps`` with the piecewise-affine lift ``T_eps``."""

    base: Chart
    profile: object
    eps: float

    def __post_init__(self):
        _check_eps(self.eps)

    @property
    def domain(self):
        return self.base.domain

    def height(self, x):
        return self.profile.rho_eps(self.eps, x)

    def dheight(self, x):
        return self.profile.drho_eps(self.eps, x)

    def lift(self, x, s):
        """The map ``T_eps``; returns the lifted pair ``(x, s')``."""
        x, s = self._check(x, s)
        r = self.height(x)
        return x, np.where(s < 0, s + s * r + r, s - s * r + r)

    def unlift(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        r = self.height(x)
        return x, np.where(t < r, (t - r) / (1.0 + r), (t - r) / (1.0 - r))

    def forward(self, x, s):
        return self.base.forward(*self.lift(x, s))

    def inverse(self, X, Y):
        x, t = self.base.inverse(X, Y)
        return self.unlift(x, t)

    def trace(self, x):
        x = _check_interval(x, *self.domain, what="x'")
        return self.base.forward(x, self.height(x))

    def trace_derivative(self, x):
        x = np.asarray(x, dtype=float)
        r = self.height(x)
        return self.base.d_dx(x, r) + self.base.d_ds(x, r) * self.dheight(x)[..., None]

    def breakpoints(self):
        a, b = self.domain
        return np.unique(np.concatenate([[a, b], self.profile.kinks_in(self.eps, a, b)]))

    def strip(self):
        return StripRegion(self)


@dataclass(frozen=True)
class StripRegion:
    """The layer ``{Phi(x, s) : 0 <= s < rho_eps(x)}`` between both boundaries."""

    chart: PerturbedChart

    def contains(self, X, Y):
        x, s = self.chart.base.inverse(X, Y)
        lo, hi = self.chart.domain
        inside = (x >= lo - _TOL) & (x <= hi + _TOL)
        xc = np.clip(x, lo, hi)
        return inside & (s >= -_TOL) & (s < self.chart.height(xc))

    def density(self, x, n_s=6):
        """``int_0^{rho_eps(x)} J(x, s) ds``: strip area per unit boundary parameter."""
        x = np.asarray(x, dtype=float)
        r = self.chart.height(x)
        t, w = gauss_legendre(n_s)
        s = r[..., None] * t
        J = self.chart.base.jacobian(x[..., None], s)
        return r * (J * w).sum(axis=-1)

    def integrate(self, fn=None, n_s=6, per_scale=32):
        """``int_{strip} fn dA`` by Gauss quadrature in chart coordinates."""
        sc = self.chart.profile.scale(self.chart.eps)
        lo, hi = self.chart.domain
        x, wx = composite_gauss(self.chart.breakpoints(), min(sc / per_scale, (hi - lo) / 64))
        r = self.chart.height(x)
        t, wt = gauss_legendre(n_s)
        s = r[:, None] * t[None, :]
        X = np.broadcast_to(x[:, None], s.shape)
        J = self.chart.base.jacobian(X, s)
        vals = J if fn is None else J * fn(self.chart.base.forward(X, s))
        return float(np.sum(wx * r * (vals * wt).sum(axis=1)))

    def area(self):
        return self.integrate()


# --- operation-level helpers ------------------------------------------------


def chart_forward(chart, p):
    """Image of a reference point (or array of points) under the chart."""
    p = np.asarray(p, dtype=float)
    return chart.forward(p[..., 0], p[..., 1])


def rho_eval(profile, eps, x):
    return profile.rho_eps(eps, x)


def jacobian_boundary(param, x):
    """Length of the tangent vector of a boundary parametrization.

    ``param`` is a chart (its trace is used) or a callable returning the
    tangent vector.
    """
    if hasattr(param, "trace_derivative"):
        d = param.trace_derivative(x)
    else:
        d = np.asarray(param(x), dtype=float)
    return np.hypot(d[..., 0], d[..., 1])


def jacobian_volume(chart, p):
    p = np.asarray(p, dtype=float)
    chart._check(p[..., 0], p[..., 1])
    return chart.jacobian(p[..., 0], p[..., 1])
