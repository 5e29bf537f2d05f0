"""Effective boundary coefficients beta and gamma.

``beta`` is the surface density of the concentrated layer and ``gamma`` the
surface density of the oscillating boundary measure, both relative to the
fixed boundary.  Two independent routes are provided: closed-form cell
averages (periodic profiles with ``alpha = 1``) and a numerical weak-limit
estimator that tests epsilon-families against hat functions and
extrapolates.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ClosedFormUnavailable, EstimationError, SingularParametrization
from .geometry import PerturbedChart, ReparametrizedProfile, jacobian_boundary, stretched
from .numerics import composite_gauss, richardson_limit

CELL_POINTS = 10_000
# Hat moments of periodic families converge like eps^2 with a phase that
# changes along the ladder, so the estimator ladder runs deeper than the
# study ladder; the extra levels cost only quadrature points.
ESTIMATOR_LADDER = 0.2 * 0.5 ** np.arange(13)


def commensurate_ladder(profile, domain, levels=13, cells=5):
    """Ladder on which the oscillation cell ``eps**alpha * l`` halves and tiles ``domain``.

    The first level fits ``cells`` cells into the interval.  With whole cells
    the hat moments carry no truncated cell at the interval ends, whose
    contribution would otherwise decay only like the cell size with an
    erratic phase.
    """
    length = domain[1] - domain[0]
    cell = length / (cells * 2.0 ** np.arange(levels))
    return (cell / profile.period) ** (1.0 / profile.alpha)


def default_ladder(chart, profile):
    """Estimator ladder: ``ESTIMATOR_LADDER``, or a commensurate ladder when ``alpha != 1``."""
    if isinstance(profile, ReparametrizedProfile) or profile.alpha == 1.0:
        return ESTIMATOR_LADDER
    return commensurate_ladder(profile, chart.domain)


def _cell_rule(profile, points=CELL_POINTS):
    l = profile.period
    x, w = composite_gauss(np.concatenate([[0.0, l], profile.kinks]), 4 * l / points)
    return x, w / l


def cell_average(profile, points=CELL_POINTS):
    """Mean of the periodic profile over one cell."""
    z, w = _cell_rule(profile, points)
    return float(np.dot(w, profile.rho(z)))


def _chart_profile(scenario_or_pair):
    if isinstance(scenario_or_pair, tuple):
        return scenario_or_pair
    return scenario_or_pair.chart, scenario_or_pair.profile


def _boundary_jacobian(chart, x):
    j = jacobian_boundary(chart, x)
    if np.any(j <= 1e-14):
        raise SingularParametrization("boundary parametrization has a vanishing tangent")
    return j


def beta_closed_form(scenario, x):
    """``phi(x) M(rho) J2(x, 0) / J1(x)`` for a periodic profile.

    ``scenario`` is a scenario or a ``(chart, profile)`` pair.
    """
    chart, profile = _chart_profile(scenario)
    x = np.asarray(x, dtype=float)
    j1 = _boundary_jacobian(chart, x)
    return profile.phi(x) * cell_average(profile) * chart.jacobian(x, np.zeros_like(x)) / j1


def gamma_tilde_closed_form(scenario, x, points=CELL_POINTS, chunk=256):
    """Cell average of the limiting boundary tangent length at ``x``.

    With the fast variable ``z`` frozen, the tangent of the oscillating
    trace tends to ``dPhi/dx(x, 0) + phi(x) rho'(z) dPhi/ds(x, 0)``.
    """
    chart, profile = _chart_profile(scenario)
    if isinstance(profile, ReparametrizedProfile):
        sig = profile.sigma
        x = np.asarray(x, dtype=float)
        return sig.derivative(x) * gamma_tilde_closed_form((chart.base, profile.base), sig(x), points, chunk)
    if profile.alpha != 1.0:
        raise ClosedFormUnavailable("closed-form gamma is only available for alpha = 1")
    z, w = _cell_rule(profile, points)
    dr = profile.dshape(z)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    flat_x, flat_out = x.ravel(), out.reshape(-1)
    for k in range(0, flat_x.size, chunk):
        xs = flat_x[k:k + chunk]
        zero = np.zeros_like(xs)
        a = chart.d_dx(xs, zero)
        b = chart.d_ds(xs, zero) * profile.phi(xs)[:, None]
        tx = a[:, None, 0] + dr[None, :] * b[:, None, 0]
        ty = a[:, None, 1] + dr[None, :] * b[:, None, 1]
        flat_out[k:k + chunk] = np.hypot(tx, ty) @ w
    return out


def gamma_closed_form(scenario, x, points=CELL_POINTS):
    """``gamma_tilde(x) / J1(x)``; needs ``alpha = 1``."""
    chart, _ = _chart_profile(scenario)
    x = np.asarray(x, dtype=float)
    j1 = _boundary_jacobian(chart, x)
    return gamma_tilde_closed_form(scenario, x, points).reshape(x.shape) / j1


# --- weak limits --------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryFamily:
    """Epsilon-indexed density on the boundary parameter interval.

    ``fn(eps, x)`` evaluates the density, ``breakpoints(eps)`` lists points
    where it may be non-smooth and ``resolution(eps)`` bounds the length of
    quadrature sub-intervals.
    """

    fn: Callable
    breakpoints: Callable = None
    resolution: Callable = None

    def __call__(self, eps, x):
        return self.fn(eps, x)


@dataclass
class WeakLimit:
    """Piecewise-linear density recovered from extrapolated hat moments."""

    nodes: np.ndarray
    values: np.ndarray
    moments: np.ndarray        # (ladder, hats)
    limit_moments: np.ndarray
    residuals: np.ndarray      # per hat, in density units
    orders: np.ndarray
    ladder: np.ndarray = field(default=None)

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values)

    def table(self):
        return np.column_stack([self.nodes, self.values, self.residuals, self.orders])


def hat_gram(nodes):
    """Mass matrix of the hat functions on the given nodes (tridiagonal, dense)."""
    h = np.diff(nodes)
    n = nodes.size
    G = np.zeros((n, n))
    idx = np.arange(n - 1)
    G[idx, idx] += h / 3
    G[idx + 1, idx + 1] += h / 3
    G[idx, idx + 1] += h / 6
    G[idx + 1, idx] += h / 6
    return G


def hat_moments(values, x, w, nodes):
    """``int values * hat_j`` for all hats, given a quadrature ``(x, w)``."""
    k = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
    t = (x - nodes[k]) / (nodes[k + 1] - nodes[k])
    vw = values * w
    return (np.bincount(k, vw * (1 - t), minlength=nodes.size)
            + np.bincount(k + 1, vw * t, minlength=nodes.size))


def weak_limit_estimate(family, ladder=ESTIMATOR_LADDER, n_hats=32, domain=(-1.0, 1.0), tol=1e-3):
    """Estimate the weak limit of ``family`` as ``eps -> 0`` along ``ladder``.

    For each hat ``v`` the moments ``int family_eps v`` are computed with a
    quadrature that resolves the oscillation, extrapolated by Richardson on
    the last three ladder points (order estimated from the data), and the
    piecewise-linear density matching the limit moments is returned.

    Raises
    ------
    EstimationError
        If any extrapolation residual, measured in density units, exceeds
        ``tol``.
    """
    ladder = np.asarray(ladder, dtype=float)
    if ladder.size < 3 or np.any(np.diff(ladder) >= 0):
        raise ValueError("ladder must be strictly decreasing with at least three points")
    if not isinstance(family, BoundaryFamily):
        family = BoundaryFamily(family)
    a, b = domain
    nodes = np.linspace(a, b, n_hats)
    hat_mass = np.full(n_hats, nodes[1] - nodes[0])
    hat_mass[[0, -1]] *= 0.5
    moments = np.empty((ladder.size, n_hats))
    for i, eps in enumerate(ladder):
        brk = [nodes]
        if family.breakpoints is not None:
            brk.append(family.breakpoints(eps))
        res = family.resolution(eps) if family.resolution is not None else eps / 8
        x, w = composite_gauss(np.concatenate(brk), res, order=6)
        moments[i] = hat_moments(family(eps, x), x, w, nodes)
    limits = np.empty(n_hats)
    residuals = np.empty(n_hats)
    orders = np.empty(n_hats)
    for j in range(n_hats):
        limits[j], orders[j], r = richardson_limit(moments[:, j] / hat_mass[j])
        limits[j] *= hat_mass[j]
        residuals[j] = r
    values = np.linalg.solve(hat_gram(nodes), limits)
    est = WeakLimit(nodes, values, moments, limits, residuals, orders, ladder)
    if np.max(residuals) > tol:
        raise EstimationError(
            f"weak limit did not settle: max residual {np.max(residuals):.3e} > {tol:.1e}",
            table=est.table(),
        )
    return est


def _strip_family(chart, profile, resolution_per_scale=16):
    def fn(eps, x):
        strip = PerturbedChart(chart, profile, eps).strip()
        return strip.density(x) / eps / _boundary_jacobian(chart, x)

    return BoundaryFamily(
        fn,
        breakpoints=lambda eps: profile.kinks_in(eps, *chart.domain),
        resolution=lambda eps: profile.scale(eps) / resolution_per_scale,
    )


def _length_family(chart, profile, resolution_per_scale=16):
    def fn(eps, x):
        t = PerturbedChart(chart, profile, eps).trace_derivative(x)
        return np.hypot(t[..., 0], t[..., 1]) / _boundary_jacobian(chart, x)

    return BoundaryFamily(
        fn,
        breakpoints=lambda eps: profile.kinks_in(eps, *chart.domain),
        resolution=lambda eps: profile.scale(eps) / resolution_per_scale,
    )


def beta_family(chart, profile):
    """``(1/eps) int_0^{rho_eps} J2 ds / J1``: strip density per unit surface."""
    return _strip_family(chart, profile)


def gamma_family(chart, profile):
    """``J1(psi_eps) / J1(psi)``: oscillating arc length per unit surface."""
    return _length_family(chart, profile)


# --- coefficient bundles ---------------------------------------------------------


@dataclass(frozen=True)
class EffectiveCoefficients:
    """Boundary densities ``beta(x)``, ``gamma(x)`` in the chart parameter."""

    beta: Callable
    gamma: Callable
    provenance: str  # "closed_form" or "weak_limit_estimate"

    def tabulated(self, domain=(-1.0, 1.0), n=2049):
        """Piecewise-linear interpolants on a fine grid (cheap to evaluate)."""
        xs = np.linspace(*domain, n)
        bv, gv = np.asarray(self.beta(xs), float), np.asarray(self.gamma(xs), float)
        return EffectiveCoefficients(_Interp(xs, bv), _Interp(xs, gv), self.provenance)


@dataclass(frozen=True)
class _Interp:
    xs: np.ndarray
    ys: np.ndarray

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)


@dataclass(frozen=True)
class _Bound:
    fn: Callable
    scenario: tuple

    def __call__(self, x):
        return self.fn(self.scenario, x)


def closed_form_coefficients(scenario):
    pair = _chart_profile(scenario)
    return EffectiveCoefficients(_Bound(beta_closed_form, pair), _Bound(gamma_closed_form, pair), "closed_form")


def estimate_coefficients(scenario, ladder=None, n_hats=32, tol=1e-3):
    """Both coefficients from the weak-limit estimator (ladder from :func:`default_ladder`)."""
    chart, profile = _chart_profile(scenario)
    ladder = default_ladder(chart, profile) if ladder is None else ladder
    beta = weak_limit_estimate(beta_family(chart, profile), ladder, n_hats, chart.domain, tol)
    gamma = weak_limit_estimate(gamma_family(chart, profile), ladder, n_hats, chart.domain, tol)
    return EffectiveCoefficients(beta, gamma, "weak_limit_estimate")


# --- parametrization independence ------------------------------------------------


@dataclass(frozen=True)
class UniquenessReport:
    discrepancy: float
    passed: bool
    t: np.ndarray
    beta_reference: np.ndarray
    beta_stretched: np.ndarray


def check_beta_uniqueness(reference, stretched_coeffs, chart_ref, chart_str, samples=201, tol=1e-3):
    """Compare ``beta`` from two parametrizations at matched boundary points.

    Sample points are taken in the stretched parameter, mapped to the plane
    by the stretched chart and pulled back through the reference chart.
    """
    lo, hi = chart_str.domain
    t = np.linspace(lo, hi, samples)
    P = chart_str.trace(t)
    x_ref, _ = chart_ref.inverse(P[:, 0], P[:, 1])
    b_ref = np.asarray(reference.beta(x_ref), float)
    b_str = np.asarray(stretched_coeffs.beta(t), float)
    d = float(np.max(np.abs(b_ref - b_str))) if samples else 0.0
    return UniquenessReport(d, d < tol, t, b_ref, b_str)


def beta_uniqueness_study(scenario, delta=0.25, estimate=True, ladder=ESTIMATOR_LADDER, tol=1e-3):
    """Run the parametrization-independence check for a scenario."""
    chart, profile = _chart_profile(scenario)
    chart_s, profile_s = stretched(chart, profile, delta)
    if estimate:
        ref = estimate_coefficients((chart, profile), ladder)
        other = estimate_coefficients((chart_s, profile_s), ladder)
    else:
        ref = closed_form_coefficients((chart, profile))
        other = closed_form_coefficients((chart_s, profile_s))
    return check_beta_uniqueness(ref, other, chart, chart_s, tol=tol)
