"""Quadrature rules and sequence extrapolation used across the package."""

import numpy as np

_GAUSS_CACHE = {}


def gauss_legendre(order):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if order not in _GAUSS_CACHE:
        t, w = np.polynomial.legendre.leggauss(order)
        _GAUSS_CACHE[order] = (0.5 * (t + 1.0), 0.5 * w)
    return _GAUSS_CACHE[order]


def composite_gauss(breakpoints, max_length, order=4):
    """Composite Gauss rule on the union of intervals between breakpoints.

    Every interval ``[b_k, b_{k+1}]`` is split into equal pieces no longer
    than ``max_length`` and each piece receives an ``order``-point rule, so
    functions that are smooth between breakpoints (kinks included) are
    integrated to high accuracy.

    Returns
    -------
    x, w : ndarray
        Quadrature nodes (sorted) and weights.
    """
    b = np.unique(np.asarray(breakpoints, dtype=float))
    if b.size < 2:
        raise ValueError("need at least two distinct breakpoints")
    lengths = np.diff(b)
    counts = np.maximum(1, np.ceil(lengths / max_length - 1e-9).astype(int))
    starts = np.repeat(b[:-1], counts)
    widths = np.repeat(lengths / counts, counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    left = starts + offsets * widths
    t, wt = gauss_legendre(order)
    x = (left[:, None] + widths[:, None] * t[None, :]).ravel()
    w = (widths[:, None] * wt[None, :]).ravel()
    return x, w


# Symmetric 3-point rule on triangles, exact for quadratics (barycentric rows).
TRIANGLE_RULE_3 = (
    np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.full(3, 1 / 3),
)

# 7-point Dunavant rule, exact for degree 5; used for error norms.
_a1, _b1 = 0.059715871789770, 0.470142064105115
_a2, _b2 = 0.797426985353087, 0.101286507323456
TRIANGLE_RULE_7 = (
    np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [_a1, _b1, _b1], [_b1, _a1, _b1], [_b1, _b1, _a1],
        [_a2, _b2, _b2], [_b2, _a2, _b2], [_b2, _b2, _a2],
    ]),
    np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3),
)

# 2-point Gauss rule on edges (parameter in [0, 1]).
EDGE_RULE_2 = (np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]), np.array([0.5, 0.5]))


def _aitken(v1, v2, v3, ratio_range):
    d1, d2 = v1 - v2, v2 - v3
    if abs(d2) <= 1e-14 * max(1.0, abs(v3)):
        return float(v3), float("inf")
    q = d1 / d2
    if ratio_range[0] <= q <= ratio_range[1]:
        return float(v3 - d2 / (q - 1.0)), float(np.log2(q))
    return None, float("nan")


def richardson_limit(values, ratio_range=(1.5, 64.0)):
    """Extrapolate the last three terms of a sequence taken on a halving ladder.

    The convergence order is estimated from the ratio of successive
    differences. When the differences do not shrink geometrically (ratio
    outside ``ratio_range``) the last term is returned unchanged; extrapolating
    with an implausible ratio would only amplify noise.

    Returns
    -------
    limit : float
    order : float
        Estimated order (``nan`` when not geometric, ``inf`` when the
        sequence is already stationary).
    residual : float
        Error indicator of ``limit``: the change against the extrapolation
        from the preceding triple when both are geometric, otherwise the
        larger of the correction and the last difference.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("Richardson extrapolation needs three terms")
    limit, order = _aitken(*v[-3:], ratio_range)
    if limit is None:
        return float(v[-1]), order, float(max(abs(v[-3] - v[-2]), abs(v[-2] - v[-1])))
    correction = abs(limit - v[-1])
    prev = _aitken(*v[-4:-1], ratio_range)[0] if v.size >= 4 else None
    if prev is not None:
        residual = min(correction, abs(limit - prev))
    else:
        # a single geometric triple may be a coincidence of erratic data
        residual = max(correction, abs(v[-2] - v[-1]))
    return limit, order, float(residual)
