"""P1 finite-element forms on tagged meshes.

Residual convention: ``r(u) = A u - h(u)`` with ``A`` the Neumann form of
``-Laplace + 1`` and

* on ``Omega_eps``: ``h(u) = (1/eps) int_strip f(x, u) phi - int_outer g(x, u) phi``,
* on ``Omega``:     ``h(u) = int_outer (beta f(x, u) - gamma g(x, u)) phi``.

Volume terms use the symmetric 3-point triangle rule, edge terms 2-point
Gauss.  Matrices are assembled in COO form with a fixed element order, so
the result does not depend on scheduling.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConsistencyError, GeometryError
from .meshing import OUTER, STRIP, PointLocator
from .numerics import EDGE_RULE_2, TRIANGLE_RULE_3


def _coo(rows, cols, vals, n):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def _element_pairs(conn):
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1)
    cols = np.tile(conn, (1, k))
    return rows, cols


class VolumeQuadrature:
    """Quadrature on a subset of triangles with P1 shape values at the points."""

    def __init__(self, mesh, mask=None, rule=TRIANGLE_RULE_3):
        self.n = mesh.n_vertices
        self.tri = mesh.triangles if mask is None else mesh.triangles[mask]
        bary, w = rule
        self.bary = bary                                      # (nq, 3)
        area = np.abs(mesh.signed_areas() if mask is None else mesh.signed_areas()[mask])
        self.weights = area[:, None] * w[None, :]             # (ne, nq)
        self.points = np.einsum("qk,ekd->eqd", bary, mesh.vertices[self.tri])

    def at_points(self, u):
        return np.asarray(u)[self.tri] @ self.bary.T          # (ne, nq)

    def load(self, vals):
        """``int vals * phi_j`` for all vertices, ``vals`` given at the points."""
        local = (vals * self.weights) @ self.bary             # (ne, 3)
        return np.bincount(self.tri.ravel(), local.ravel(), minlength=self.n)

    def matrix(self, vals=None):
        """``int vals * phi_i * phi_j`` (weighted mass matrix)."""
        wv = self.weights if vals is None else vals * self.weights
        local = np.einsum("eq,qi,qj->eij", wv, self.bary, self.bary)
        rows, cols = _element_pairs(self.tri)
        return _coo(rows, cols, local, self.n)


class EdgeQuadrature:
    """2-point Gauss quadrature on the boundary edges with a given tag."""

    def __init__(self, mesh, tag=OUTER, rule=EDGE_RULE_2):
        self.n = mesh.n_vertices
        self.edges = mesh.edges[mesh.edge_tags == tag]
        t, w = rule
        self.shape = np.column_stack([1.0 - t, t])            # (nq, 2)
        p = mesh.vertices[self.edges]
        length = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        self.weights = length[:, None] * w[None, :]
        self.points = np.einsum("qk,ekd->eqd", self.shape, p)

    def at_points(self, u):
        return np.asarray(u)[self.edges] @ self.shape.T

    def load(self, vals):
        local = (vals * self.weights) @ self.shape
        return np.bincount(self.edges.ravel(), local.ravel(), minlength=self.n)

    def matrix(self, vals=None):
        wv = self.weights if vals is None else vals * self.weights
        local = np.einsum("eq,qi,qj->eij", wv, self.shape, self.shape)
        rows, cols = _element_pairs(self.edges)
        return _coo(rows, cols, local, self.n)


@dataclass
class H1Forms:
    """Stiffness ``K``, mass ``M`` and the H1 form ``A = K + M``."""

    K: sp.csr_matrix
    M: sp.csr_matrix

    @property
    def A(self):
        if not hasattr(self, "_A"):
            self._A = (self.K + self.M).tocsr()
        return self._A

    def h1_norm(self, u):
        return float(np.sqrt(max(u @ (self.A @ u), 0.0)))

    def l2_norm(self, u):
        return float(np.sqrt(max(u @ (self.M @ u), 0.0)))


def element_matrices(vertices, triangles):
    """Per-element P1 stiffness and mass matrices, shape ``(m, 3, 3)`` each."""
    p = vertices[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    scale = np.maximum(np.einsum("ij,ij->i", d1, d1), np.einsum("ij,ij->i", d2, d2))
    bad = np.where(np.abs(det) <= 1e-13 * scale)[0]
    if bad.size:
        raise AssemblyError(f"degenerate triangle {int(bad[0])} with vertices {triangles[bad[0]].tolist()}")
    area = 0.5 * np.abs(det)
    # gradients of the barycentric coordinates: rotate the opposite edge
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    g = np.stack([-e[..., 1], e[..., 0]], axis=-1) / det[:, None, None]
    K = area[:, None, None] * np.einsum("eid,ejd->eij", g, g)
    M = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    return K, M


def assemble_h1_operator(mesh):
    """Neumann forms of ``-Laplace + 1`` on the whole mesh."""
    Ke, Me = element_matrices(mesh.vertices, mesh.triangles)
    rows, cols = _element_pairs(mesh.triangles)
    n = mesh.n_vertices
    return H1Forms(_coo(rows, cols, Ke, n), _coo(rows, cols, Me, n))


# --- nonlinear terms ------------------------------------------------------------


def _check_eps(mesh, eps):
    if mesh.eps <= 0 or not np.isclose(mesh.eps, eps, rtol=1e-12, atol=0.0):
        raise ConsistencyError(f"mesh realises eps = {mesh.eps}, requested eps = {eps}")


def _strip_quadrature(mesh):
    if "strip_q" not in mesh._cache:
        mesh._cache["strip_q"] = VolumeQuadrature(mesh, mesh.element_tags == STRIP)
    return mesh._cache["strip_q"]


def _outer_quadrature(mesh):
    if "outer_q" not in mesh._cache:
        mesh._cache["outer_q"] = EdgeQuadrature(mesh, OUTER)
    return mesh._cache["outer_q"]


def assemble_concentrated_term(mesh, nl, u, eps):
    """``(1/eps) int_strip f(x, u) phi_j``."""
    _check_eps(mesh, eps)
    q = _strip_quadrature(mesh)
    return q.load(nl.f(q.points, q.at_points(u))) / eps


def assemble_boundary_term(mesh, nl, u):
    """``int_outer g(x, u) phi_j`` (enters ``h`` with a minus sign)."""
    q = _outer_quadrature(mesh)
    return q.load(nl.g(q.points, q.at_points(u)))


class LimitBoundaryData:
    """Outer-edge quadrature of the fixed mesh with ``beta``, ``gamma`` at the points."""

    def __init__(self, mesh0, coeffs, chart):
        if mesh0.eps != 0:
            raise ConsistencyError("limit terms need the fixed-domain mesh (eps = 0)")
        self.q = _outer_quadrature(mesh0)
        pts = self.q.points
        x, _ = chart.inverse(pts[..., 0], pts[..., 1])
        lo, hi = chart.domain
        if not np.all(np.isfinite(x)) or np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
            raise GeometryError("outer quadrature point failed chart pullback")
        x = np.clip(x, lo, hi)
        self.beta = np.asarray(coeffs.beta(x), dtype=float).reshape(x.shape)
        self.gamma = np.asarray(coeffs.gamma(x), dtype=float).reshape(x.shape)


def _limit_data(mesh0, coeffs, chart):
    # keep the objects alive next to the data so the identity check is sound
    c = mesh0._cache.get("limit")
    if c is None or c[0] is not coeffs or c[1] is not chart:
        c = (coeffs, chart, LimitBoundaryData(mesh0, coeffs, chart))
        mesh0._cache["limit"] = c
    return c[2]


def assemble_limit_boundary_term(mesh0, coeffs, nl, u, chart):
    """``int_outer (beta f(x, u) - gamma g(x, u)) phi_j`` on the fixed mesh."""
    d = _limit_data(mesh0, coeffs, chart)
    up = d.q.at_points(u)
    return d.q.load(d.beta * nl.f(d.q.points, up) - d.gamma * nl.g(d.q.points, up))


def strip_mass(mesh, weight=None):
    """``int_strip w phi_i phi_j``; ``weight`` is given at the quadrature points."""
    return _strip_quadrature(mesh).matrix(weight)


def boundary_mass(mesh, weight=None, tag=OUTER):
    q = _outer_quadrature(mesh) if tag == OUTER else EdgeQuadrature(mesh, tag)
    return q.matrix(weight)


def assemble_linearization(mesh, nl, u, eps=None, coeffs=None, chart=None, forms=None):
    """Jacobian of the residual ``A u - h(u)`` at ``u``.

    On an ``Omega_eps`` mesh pass ``eps``; on the fixed mesh pass ``coeffs``
    and ``chart``.
    """
    forms = forms or assemble_h1_operator(mesh)
    if coeffs is None:
        _check_eps(mesh, eps)
        sq, bq = _strip_quadrature(mesh), _outer_quadrature(mesh)
        L = (forms.A - sq.matrix(nl.df(sq.points, sq.at_points(u))) / eps
             + bq.matrix(nl.dg(bq.points, bq.at_points(u))))
    else:
        d = _limit_data(mesh, coeffs, chart)
        up = d.q.at_points(u)
        L = forms.A - d.q.matrix(d.beta * nl.df(d.q.points, up) - d.gamma * nl.dg(d.q.points, up))
    return L.tocsr()


# --- generic loads (manufactured solutions) -------------------------------------


def assemble_volume_load(mesh, fn, rule=TRIANGLE_RULE_3):
    """``int fn(x) phi_j`` over the whole mesh."""
    q = VolumeQuadrature(mesh, None, rule)
    return q.load(fn(q.points))


def assemble_edge_load(mesh, fn, tag=OUTER):
    """``int_edges fn(x, normal) phi_j`` over edges with ``tag``.

    ``fn`` receives the points ``(ne, nq, 2)`` and the outward unit normals
    ``(ne, 1, 2)``.
    """
    q = EdgeQuadrature(mesh, tag)
    p = mesh.vertices[q.edges]
    t = p[:, 1] - p[:, 0]
    normal = np.column_stack([t[:, 1], -t[:, 0]]) / np.linalg.norm(t, axis=1)[:, None]
    # flip normals that point towards the opposite vertex of the adjacent triangle
    opposite = {}
    for tri in mesh.triangles.tolist():
        for k in range(3):
            a, b = sorted((tri[k], tri[(k + 1) % 3]))
            opposite[a, b] = tri[(k + 2) % 3]
    far = np.array([opposite[tuple(sorted(e))] for e in q.edges.tolist()])
    inward = np.einsum("ij,ij->i", mesh.vertices[far] - p[:, 0], normal) > 0
    normal[inward] *= -1.0
    return q.load(fn(q.points, normal[:, None, :]))


# --- fields -----------------------------------------------------------------------


@dataclass
class Field:
    """Piecewise-linear function on a mesh (one coefficient per vertex)."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ConsistencyError("field length does not match the vertex count")

    def forms(self):
        return forms_of(self.mesh)

    def h1_norm(self):
        return self.forms().h1_norm(self.values)

    def l2_norm(self):
        return self.forms().l2_norm(self.values)

    def evaluate(self, points):
        if "locator" not in self.mesh._cache:
            self.mesh._cache["locator"] = PointLocator(self.mesh)
        return self.mesh._cache["locator"].interpolate(self.values, points)

    def restrict_omega(self):
        """Restriction to the fixed-domain submesh (exact: shared vertices)."""
        return Field(self.mesh.omega_submesh(), self.values[: self.mesh.n_omega])


def forms_of(mesh):
    """H1 forms of a mesh, cached on the mesh."""
    if "forms" not in mesh._cache:
        mesh._cache["forms"] = assemble_h1_operator(mesh)
    return mesh._cache["forms"]


def export_coo(op, path):
    """Write a sparse operator as ``row col value`` lines (values in round-trip form)."""
    c = sp.coo_matrix(op)
    order = np.lexsort((c.col, c.row))
    with open(path, "w") as fh:
        fh.write(f"# {c.shape[0]} {c.shape[1]} {c.nnz}\n")
        for r, k, v in zip(c.row[order].tolist(), c.col[order].tolist(), c.data[order].tolist()):
            fh.write(f"{r} {k} {v!r}\n")
