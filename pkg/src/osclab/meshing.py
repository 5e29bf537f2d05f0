"""Boundary-fitted triangulations of the fixed and the oscillating domains.

The fixed domain ``Omega`` is meshed once; its top boundary (the chart
trace ``s = 0``) becomes the bottom of a separate strip mesh for every
epsilon.  Gluing both gives a conforming mesh of ``Omega_eps`` in which the
fixed-domain mesh is an exact submesh: its vertices come first and keep
their numbering, so restriction to ``Omega`` is slicing.

Triangle (Shewchuk) generates the unstructured meshes; ``Y`` keeps every
boundary vertex exactly where it was sampled.
"""

from dataclasses import dataclass, field

import numpy as np
import triangle
from scipy.spatial import cKDTree

from .errors import GeometryError, ResolutionError
from .geometry import PerturbedChart
from .numerics import composite_gauss

INTERIOR, STRIP = 0, 1
OUTER, WALL = 0, 1
_INTERFACE = 2  # only used while gluing


@dataclass
class Mesh:
    """Conforming P1 triangulation with tagged boundary edges and elements.

    Attributes
    ----------
    vertices : (n, 2) array
    triangles : (m, 3) int array, counter-clockwise
    edges : (k, 2) int array of boundary edges
    edge_tags : (k,) int array, ``OUTER`` or ``WALL``
    element_tags : (m,) int array, ``INTERIOR`` or ``STRIP``
    h : float
        Target size near the (oscillating) outer boundary.
    eps : float
        Epsilon realised by the mesh, 0 for the fixed domain.
    n_omega : int
        The first ``n_omega`` vertices span the fixed-domain submesh.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    element_tags: np.ndarray
    h: float
    eps: float = 0.0
    n_omega: int = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.edges = np.ascontiguousarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.edge_tags = np.asarray(self.edge_tags, dtype=np.int64)
        self.element_tags = np.asarray(self.element_tags, dtype=np.int64)
        if self.n_omega is None:
            self.n_omega = len(self.vertices)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def areas(self):
        return np.abs(self.signed_areas())

    def edge_lengths(self, tag=None):
        e = self.edges if tag is None else self.edges[self.edge_tags == tag]
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def boundary_length(self, tag=OUTER):
        return float(self.edge_lengths(tag).sum())

    def strip_area(self):
        return float(self.areas()[self.element_tags == STRIP].sum())

    @property
    def omega_triangles(self):
        return self.triangles[self.element_tags == INTERIOR]

    def omega_submesh(self):
        """The fixed-domain part as a mesh of its own (shares numbering)."""
        if "omega" not in self._cache:
            keep = self.element_tags == INTERIOR
            tri = self.triangles[keep]
            if tri.size and tri.max() >= self.n_omega:
                raise GeometryError("interior elements reference strip vertices")
            self._cache["omega"] = Mesh(self.vertices[: self.n_omega], tri, np.empty((0, 2)),
                                        np.empty(0), np.zeros(len(tri)), self.h, 0.0)
        return self._cache["omega"]


def structured_mesh(n, box=(0.0, 1.0, 0.0, 1.0)):
    """Uniform ``n x n`` grid of squares, each split in two right triangles.

    The diagonal alternates from cell to cell (union-jack pattern).  All
    boundary edges are tagged ``OUTER``.
    """
    x0, x1, y0, y1 = box
    xs, ys = np.linspace(x0, x1, n + 1), np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = j * (n + 1) + i
    b, c, d = a + 1, a + n + 2, a + n + 1
    flip = (i + j) % 2 == 1
    t1 = np.where(flip[:, None], np.column_stack([a, b, d]), np.column_stack([a, b, c]))
    t2 = np.where(flip[:, None], np.column_stack([b, c, d]), np.column_stack([a, c, d]))
    tris = np.concatenate([t1, t2])
    k = np.arange(n)
    edges = np.concatenate([
        np.column_stack([k, k + 1]),                                  # bottom
        np.column_stack([k * (n + 1) + n, (k + 1) * (n + 1) + n]),    # right
        np.column_stack([n * (n + 1) + k + 1, n * (n + 1) + k]),      # top
        np.column_stack([(k + 1) * (n + 1), k * (n + 1)]),            # left
    ])
    h = (x1 - x0) / n
    return Mesh(verts, tris, edges, np.full(len(edges), OUTER), np.zeros(len(tris)), h, 0.0)


# --- boundary sampling --------------------------------------------------------


def _arclength_samples(tangent, breakpoints, h, dense):
    """Parameter values splitting each piece into equal arc-length chunks <= h.

    ``tangent(x)`` returns the curve's tangent vectors; breakpoints are kept.
    """
    out = [breakpoints[:1]]
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        x, w = composite_gauss([a, b], dense, order=4)
        t = tangent(x)
        speed = np.hypot(t[:, 0], t[:, 1])
        # cumulative arc length at the right end of every quadrature cell
        cell = (speed * w).reshape(-1, 4).sum(axis=1)
        knots = np.linspace(a, b, cell.size + 1)
        cum = np.concatenate([[0.0], np.cumsum(cell)])
        n = max(1, int(np.ceil(cum[-1] / h - 1e-9)))
        targets = np.linspace(0.0, cum[-1], n + 1)[1:-1]
        out.append(np.interp(targets, cum, knots))
        out.append([b])
    return np.concatenate(out)


def _graded(length, h_start, h_max, growth=1.2):
    """Offsets ``0 < ... < length`` starting at ``h_start`` and growing to ``h_max``."""
    d, step, pts = 0.0, h_start, []
    while d + step < length - 0.5 * min(step, h_max):
        d += step
        pts.append(d)
        step = min(step * growth, h_max)
    pts = np.asarray(pts)
    return pts * (length / (d + step)) if pts.size else pts


def _quality_flags(h):
    # the option parser only reads digits and a point, so no exponent notation
    return f"pq30a{np.sqrt(3) / 4 * h * h:.20f}Y"


def _triangulate(verts, segs, markers, h):
    out = triangle.triangulate(
        {"vertices": verts, "segments": segs, "segment_markers": markers[:, None]},
        _quality_flags(h),
    )
    V = out["vertices"]
    if not np.array_equal(V[: len(verts)], verts):
        raise GeometryError("mesh generator moved boundary vertices")
    T = out["triangles"]
    p = V[T]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    T = np.where((sa < 0)[:, None], T[:, [0, 2, 1]], T)
    return V, T


def _polygon(chains):
    """Close a list of ``(points, marker)`` chains into segments.

    Consecutive chains share their end/start point, which is dropped once.
    """
    pts, marks = [], []
    for P, m in chains:
        pts.append(P[:-1])
        marks.append(np.full(len(P) - 1, m))
    verts = np.concatenate(pts)
    n = len(verts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return verts, segs, np.concatenate(marks)


# --- fixed and oscillating domains ---------------------------------------------


def _interface_params(chart, h):
    lo, hi = chart.domain
    return _arclength_samples(chart.trace_derivative, np.array([lo, hi]), h, min(h / 4, (hi - lo) / 64))


def limit_mesh(scenario, h_interface, h_max=None):
    """Mesh of the fixed domain, size ``h_interface`` along the chart trace.

    The trace vertices come first, ordered by increasing boundary parameter.
    Side walls are graded from ``h_interface`` to ``h_max``.
    """
    chart = scenario.chart
    h_max = max(h_max or scenario.h0, h_interface)
    lo, hi = chart.domain
    xs = _interface_params(chart, h_interface)
    top = chart.trace(xs)
    wall_len = float(np.hypot(*chart.d_ds(hi, -0.5)))      # walls are straight in both charts
    s = -np.concatenate([[0.0], _graded(wall_len, h_interface, h_max), [wall_len]]) / wall_len
    right = chart.forward(np.full_like(s, hi), s[::-1])
    bottom_x = _arclength_samples(lambda x: chart.d_dx(x, -np.ones_like(x)), np.array([lo, hi]), h_max, h_max / 4)
    bottom = chart.forward(bottom_x, -np.ones_like(bottom_x))
    left = chart.forward(np.full_like(s, lo), s)
    verts, segs, marks = _polygon([
        (top[::-1], 10 + OUTER), (left, 10 + WALL), (bottom, 10 + WALL), (right, 10 + WALL),
    ])
    # reorder so the trace (listed right-to-left above) comes first, left-to-right
    n_if = len(xs)
    order = np.concatenate([np.arange(n_if)[::-1], np.arange(n_if, len(verts))])
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    verts, segs = verts[order], inv[segs]
    V, T = _triangulate(verts, segs, marks, h_max)
    tags = np.where(marks == 10 + OUTER, OUTER, WALL)
    mesh = Mesh(V, T, segs, tags, np.full(len(T), INTERIOR), h_interface, 0.0)
    mesh._cache["interface"] = xs
    return mesh


def _check_resolution(profile, eps, h):
    if not h > 0:
        raise ResolutionError("h must be positive")
    if eps > 0 and h > profile.scale(eps) / 8 * (1 + 1e-12):
        raise ResolutionError(
            f"h = {h:g} exceeds one eighth of the oscillation period {profile.scale(eps):g}")


def oscillating_trace_params(scenario, eps, h):
    """Boundary parameters of the outer polyline of ``Omega_eps``.

    Consecutive points are equally spaced in arc length (at most ``h``)
    between kinks; kinks and the chart ends are always included.
    """
    chart = PerturbedChart(scenario.chart, scenario.profile, eps)
    return _arclength_samples(chart.trace_derivative, chart.breakpoints(), h,
                              min(h / 4, scenario.profile.scale(eps) / 64))


def mesh_domain(scenario, eps, h, base=None):
    """Mesh of ``Omega_eps`` with boundary spacing ``<= h`` along the oscillating trace.

    ``base`` is the fixed-domain mesh to glue onto; by default it is built
    with interface spacing ``h``.  For ``eps = 0`` the fixed-domain mesh is
    returned.
    """
    _check_resolution(scenario.profile, eps, h)
    if base is None:
        base = limit_mesh(scenario, h)
    if eps == 0:
        return base
    chart = PerturbedChart(scenario.chart, scenario.profile, eps)
    lo, hi = chart.domain
    xs_if = base._cache["interface"]
    n_if = len(xs_if)
    bottom = base.vertices[:n_if]
    xs_top = oscillating_trace_params(scenario, eps, h)
    top = chart.trace(xs_top)
    if np.min(chart.height(xs_top)) <= 0:
        raise GeometryError("the strip must have positive thickness to be meshed")

    h_if = float(np.linalg.norm(bottom[1] - bottom[0]))

    def wall(x):
        # graded from the interface spacing so that no sliver forms at the corner
        r = float(chart.height(x))
        length = r * float(np.hypot(*scenario.chart.d_ds(x, 0.0)))
        s = np.concatenate([[0.0], _graded(length, min(h_if, h), h), [length]]) * (r / length)
        return scenario.chart.forward(np.full_like(s, x), s)

    verts, segs, marks = _polygon([
        (bottom, 10 + _INTERFACE), (wall(hi), 10 + WALL), (top[::-1], 10 + OUTER), (wall(lo)[::-1], 10 + WALL),
    ])
    V, T = _triangulate(verts, segs, marks, h)
    _check_strip_pullback(chart, V[n_if:], h)
    n0 = base.n_vertices
    remap = np.concatenate([np.arange(n_if), n0 + np.arange(len(V) - n_if)])
    keep = marks != 10 + _INTERFACE
    edges = np.concatenate([base.edges[base.edge_tags == WALL], remap[segs[keep]]])
    tags = np.concatenate([np.full(int((base.edge_tags == WALL).sum()), WALL),
                           np.where(marks[keep] == 10 + OUTER, OUTER, WALL)])
    mesh = Mesh(
        np.concatenate([base.vertices, V[n_if:]]),
        np.concatenate([base.triangles, remap[T]]),
        edges, tags,
        np.concatenate([base.element_tags, np.full(len(T), STRIP)]),
        h, float(eps), n_omega=n0,
    )
    mesh._cache["interface"] = xs_if
    mesh._cache["outer_params"] = xs_top
    return mesh


def _check_strip_pullback(chart, pts, h):
    x, s = chart.base.inverse(pts[:, 0], pts[:, 1])
    if not np.all(np.isfinite(x) & np.isfinite(s)):
        raise GeometryError("strip vertex failed chart pullback")
    lo, hi = chart.domain
    tol = 1e-9
    xc = np.clip(x, lo, hi)
    if (np.any(x < lo - tol) or np.any(x > hi + tol) or np.any(s < -tol)
            or np.any(s > chart.height(xc) + tol)):
        raise GeometryError("strip vertex outside the chart image of the strip")


def outer_polyline(mesh):
    """OUTER boundary vertices ordered along the boundary (as an index array)."""
    e = mesh.edges[mesh.edge_tags == OUTER]
    nxt = dict(zip(e[:, 0].tolist(), e[:, 1].tolist()))
    start = set(nxt) - set(e[:, 1].tolist())
    if len(start) != 1:
        raise GeometryError("outer boundary is not a single open chain")
    v = start.pop()
    chain = [v]
    while v in nxt:
        v = nxt[v]
        chain.append(v)
    return np.asarray(chain)


# --- quality and I/O ------------------------------------------------------------


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float          # degrees
    max_aspect_ratio: float   # longest edge / shortest altitude
    n_elements: int
    n_strip: int
    boundary_length: float    # length of the OUTER polyline
    min_angle_regular: float  # degrees, ignoring triangles near sharp domain corners
    sharp_corners: int        # boundary vertices with interior angle below SHARP_CORNER


def triangle_angles(mesh):
    p = mesh.vertices[mesh.triangles]
    ang = np.empty((mesh.n_triangles, 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        ang[:, k] = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
    return ang


SHARP_CORNER = 18.0


def mesh_quality(mesh, corner_radius=3.0):
    """Shape statistics of ``mesh``.

    A domain corner sharper than ``SHARP_CORNER`` forces some triangle angle
    below it; ``min_angle_regular`` skips triangles with a vertex within
    ``corner_radius * h`` of such a corner.
    """
    ang = triangle_angles(mesh)
    p = mesh.vertices[mesh.triangles]
    lens = np.stack([np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1) for k in range(3)], axis=1)
    lmax = lens.max(axis=1)
    aspect = lmax * lmax / (2.0 * mesh.areas())
    bnd, interior = corner_angles(mesh, ang)
    sharp = mesh.vertices[bnd[interior < SHARP_CORNER]]
    keep = np.ones(mesh.n_triangles, dtype=bool)
    if len(sharp):
        dist = cKDTree(sharp).query(mesh.vertices)[0]
        near = dist <= corner_radius * mesh.h
        keep = ~near[mesh.triangles].any(axis=1)
    regular = float(ang[keep].min()) if keep.any() else float("nan")
    return MeshQuality(float(ang.min()), float(aspect.max()), mesh.n_triangles,
                       int((mesh.element_tags == STRIP).sum()), mesh.boundary_length(OUTER),
                       regular, len(sharp))


def corner_angles(mesh, ang=None):
    """Interior angle of the domain at every boundary vertex (degrees)."""
    ang = triangle_angles(mesh) if ang is None else ang
    total = np.bincount(mesh.triangles.ravel(), ang.ravel(), minlength=mesh.n_vertices)
    bnd = np.unique(mesh.edges)
    return bnd, total[bnd]


def check_conforming(mesh):
    """Raise ``GeometryError`` unless edges are shared by at most two triangles
    and boundary edges by exactly one."""
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    if counts.max() > 2:
        raise GeometryError("edge shared by more than two triangles")
    single = {tuple(r) for r in uniq[counts == 1].tolist()}
    bnd = {tuple(r) for r in np.sort(mesh.edges, axis=1).tolist()}
    if single != bnd:
        raise GeometryError("boundary edges do not match the edges of exactly one triangle")
    if np.any(mesh.signed_areas() <= 0):
        raise GeometryError("triangle with non-positive orientation")


def write_mesh(mesh, path):
    """Plain-text export; floats are written in shortest round-trip form."""
    lines = [f"vertices {mesh.n_vertices} triangles {mesh.n_triangles} edges {len(mesh.edges)}",
             f"# eps {mesh.eps!r} h {mesh.h!r} omega {mesh.n_omega}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{a} {b} {c} {t}" for (a, b, c), t in zip(mesh.triangles.tolist(), mesh.element_tags.tolist())]
    lines += [f"{a} {b} {t}" for (a, b), t in zip(mesh.edges.tolist(), mesh.edge_tags.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = lines[0].split()
    if head[0::2] != ["vertices", "triangles", "edges"]:
        raise ValueError("not a mesh file")
    nv, nt, ne = (int(v) for v in head[1::2])
    meta = lines[1].split()
    eps, h, n_omega = float(meta[2]), float(meta[4]), int(meta[6])
    body = lines[2:]
    V = np.array([[float(v) for v in ln.split()] for ln in body[:nv]]).reshape(nv, 2)
    T = np.array([[int(v) for v in ln.split()] for ln in body[nv:nv + nt]], dtype=np.int64).reshape(nt, 4)
    E = np.array([[int(v) for v in ln.split()] for ln in body[nv + nt:nv + nt + ne]], dtype=np.int64).reshape(ne, 3)
    return Mesh(V, T[:, :3], E[:, :2], E[:, 2], T[:, 3], h, eps, n_omega)


# --- point location --------------------------------------------------------------


class PointLocator:
    """Find the containing triangle and barycentric coordinates of points."""

    def __init__(self, mesh, candidates=12):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        self._tree = cKDTree(p.mean(axis=1))
        self._k = min(candidates, mesh.n_triangles)
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self._inv = np.stack([np.stack([d2[:, 1], -d2[:, 0]], -1), np.stack([-d1[:, 1], d1[:, 0]], -1)], 1) / det[:, None, None]
        self._origin = p[:, 0]

    def barycentric(self, tri, pts):
        local = np.einsum("nij,nj->ni", self._inv[tri], pts - self._origin[tri])
        return np.column_stack([1.0 - local.sum(axis=1), local])

    def locate(self, pts):
        """Return ``(triangle index, barycentric coordinates)``.

        Points outside every candidate triangle (boundary round-off) are
        assigned to the candidate whose smallest barycentric coordinate is
        largest, with coordinates clipped to the triangle.
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        _, cand = self._tree.query(pts, k=self._k)
        cand = cand.reshape(len(pts), -1)
        best_t = np.empty(len(pts), dtype=np.int64)
        best_b = np.empty((len(pts), 3))
        best_m = np.full(len(pts), -np.inf)
        for j in range(cand.shape[1]):
            b = self.barycentric(cand[:, j], pts)
            m = b.min(axis=1)
            better = m > best_m
            best_m[better] = m[better]
            best_t[better] = cand[better, j]
            best_b[better] = b[better]
        outside = best_m < -1e-10
        if np.any(outside):
            b = np.clip(best_b[outside], 0.0, None)
            best_b[outside] = b / b.sum(axis=1, keepdims=True)
        return best_t, best_b

    def interpolate(self, values, pts):
        tri, b = self.locate(pts)
        return np.einsum("ij,ij->i", np.asarray(values)[self.mesh.triangles[tri]], b)
