import numpy as np
import pytest
import scipy.sparse.linalg as spla

from osclab.assembly import (
    Field,
    assemble_boundary_term,
    assemble_concentrated_term,
    assemble_edge_load,
    assemble_h1_operator,
    assemble_limit_boundary_term,
    assemble_linearization,
    boundary_mass,
    element_matrices,
    export_coo,
    forms_of,
    strip_mass,
)
from osclab.coefficients import EffectiveCoefficients, closed_form_coefficients
from osclab.errors import AssemblyError, ConsistencyError
from osclab.meshing import limit_mesh, mesh_domain, structured_mesh
from osclab.nonlinearity import Nonlinearity
from osclab.scenarios import get_scenario


def _const(c):
    return lambda x: np.full(np.shape(x), float(c))


def _coeffs(beta, gamma):
    return EffectiveCoefficients(_const(beta), _const(gamma), "closed_form")


@pytest.fixture(scope="module")
def flat():
    sc = get_scenario("flat_constant")
    base = limit_mesh(sc, 0.025)
    return sc, base, mesh_domain(sc, 0.2, 0.025, base=base)


@pytest.fixture(scope="module")
def sine():
    sc = get_scenario("annulus_sine")
    base = limit_mesh(sc, 0.025)
    return sc, base, mesh_domain(sc, 0.2, 0.025, base=base)


def test_reference_triangle_matrices():
    K, M = element_matrices(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    assert np.allclose(K[0], 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]))
    assert np.allclose(M[0], np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24)


def test_degenerate_triangle_is_named():
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(AssemblyError, match="degenerate triangle 1"):
        element_matrices(V, np.array([[0, 1, 2], [0, 1, 3]]))


def test_constant_field_energy_is_area(flat):
    _, _, m = flat
    forms = forms_of(m)
    c = 1.7
    u = np.full(m.n_vertices, c)
    assert u @ (forms.A @ u) == pytest.approx(c * c * m.areas().sum(), rel=1e-12)


def test_operators_symmetric_and_positive(sine):
    _, _, m = sine
    f = forms_of(m)
    for op in (f.A, f.M, strip_mass(m), boundary_mass(m)):
        assert abs(op - op.T).max() <= 1e-12 * abs(op).max()
    small = assemble_h1_operator(structured_mesh(6))
    assert np.linalg.eigvalsh(small.A.toarray()).min() > 0


def test_concentrated_term_partition_of_unity(flat):
    _, _, m = flat
    u = np.random.default_rng(0).normal(size=m.n_vertices)
    one = Nonlinearity.from_names("one", "zero")
    assert assemble_concentrated_term(m, one, u, 0.2).sum() == pytest.approx(4.0, rel=1e-12)
    zero = Nonlinearity.from_names("zero", "zero")
    assert not np.any(assemble_concentrated_term(m, zero, u, 0.2))
    lin = Nonlinearity.from_names("linear", "zero")
    c = 0.7
    assert assemble_concentrated_term(m, lin, np.full(m.n_vertices, c), 0.2).sum() == pytest.approx(4 * c, rel=1e-12)


def test_concentrated_term_checks_eps(flat):
    _, base, m = flat
    nl = Nonlinearity.from_names("one", "zero")
    with pytest.raises(ConsistencyError):
        assemble_concentrated_term(m, nl, np.zeros(m.n_vertices), 0.1)
    with pytest.raises(ConsistencyError):
        assemble_concentrated_term(base, nl, np.zeros(base.n_vertices), 0.1)


def test_boundary_term_partition_of_unity(sine):
    _, _, m = sine
    L = m.boundary_length()
    u = np.zeros(m.n_vertices)
    assert assemble_boundary_term(m, Nonlinearity.from_names("zero", "one"), u).sum() == pytest.approx(L, rel=1e-12)
    assert not np.any(assemble_boundary_term(m, Nonlinearity.from_names("zero", "zero"), u))
    c = -0.4
    lin = assemble_boundary_term(m, Nonlinearity.from_names("zero", "linear"), np.full(m.n_vertices, c))
    assert lin.sum() == pytest.approx(c * L, rel=1e-12)


def test_limit_boundary_term_examples(sine):
    sc, base, _ = sine
    rng = np.random.default_rng(2)
    u = rng.normal(size=base.n_vertices)
    nl = Nonlinearity.from_names("cubic", "sine")
    lim = assemble_limit_boundary_term(base, _coeffs(0.0, 1.0), nl, u, sc.chart)
    assert np.allclose(lim, -assemble_boundary_term(base, nl, u), atol=1e-13)
    c = 2.5
    load = assemble_limit_boundary_term(base, _coeffs(c, 1.0), Nonlinearity.from_names("one", "zero"), u, sc.chart)
    assert load.sum() == pytest.approx(c * base.boundary_length(), rel=1e-12)
    zero = assemble_limit_boundary_term(base, _coeffs(c, 1.0), Nonlinearity.from_names("linear", "linear"),
                                        np.zeros(base.n_vertices), sc.chart)
    assert not np.any(zero)


def test_limit_term_needs_fixed_mesh(sine):
    sc, _, m = sine
    with pytest.raises(ConsistencyError):
        assemble_limit_boundary_term(m, _coeffs(1, 1), Nonlinearity.from_names("one", "zero"),
                                     np.zeros(m.n_vertices), sc.chart)


def test_linearization_examples(flat):
    sc, base, m = flat
    zero = Nonlinearity.from_names("one", "one")
    u = np.zeros(m.n_vertices)
    assert abs(assemble_linearization(m, zero, u, eps=0.2) - forms_of(m).A).max() == 0.0
    lin_g = Nonlinearity.from_names("zero", "linear")
    ub = np.zeros(base.n_vertices)
    L = assemble_linearization(base, lin_g, ub, coeffs=_coeffs(0.0, 1.0), chart=sc.chart)
    block = L - forms_of(base).A
    assert block.sum() == pytest.approx(base.boundary_length(), rel=1e-12)
    assert abs(block - boundary_mass(base)).max() < 1e-14
    lin_f = Nonlinearity.from_names("linear", "zero")
    Lf = assemble_linearization(m, lin_f, u, eps=0.2)
    assert (forms_of(m).A - Lf).sum() == pytest.approx(m.strip_area() / 0.2, rel=1e-12)


def _h_eps(m, nl, eps):
    return lambda u: assemble_concentrated_term(m, nl, u, eps) - assemble_boundary_term(m, nl, u)


@pytest.mark.parametrize("limit", [False, True])
def test_directional_derivative(sine, limit):
    sc, base, m = sine
    nl = Nonlinearity.from_names("cubic", "sine", R=3.0)
    rng = np.random.default_rng(5)
    if limit:
        coeffs = closed_form_coefficients(sc)
        mesh = base
        h = lambda u: assemble_limit_boundary_term(base, coeffs, nl, u, sc.chart)  # noqa: E731
        jac = lambda u: assemble_linearization(base, nl, u, coeffs=coeffs, chart=sc.chart)  # noqa: E731
    else:
        mesh = m
        h = _h_eps(m, nl, 0.2)
        jac = lambda u: assemble_linearization(m, nl, u, eps=0.2)  # noqa: E731
    u, v = rng.normal(size=mesh.n_vertices), rng.normal(size=mesh.n_vertices)
    A = forms_of(mesh).A
    dh = A @ v - jac(u) @ v
    errs = [np.linalg.norm((h(u + t * v) - h(u)) / t - dh) for t in (1e-3, 1e-4)]
    slope = np.log10(errs[0] / errs[1])
    assert slope >= 0.9


def test_loads_uniformly_bounded_over_ladder():
    sc = get_scenario("flat_sine")
    nl = Nonlinearity.from_names("one", "linear")
    base = limit_mesh(sc, 0.2 / 64)
    norms = []
    for eps in sc.ladder[:4]:
        m = mesh_domain(sc, eps, sc.h_for(eps), base=base)
        u = np.ones(m.n_vertices)
        load = _h_eps(m, nl, eps)(u)
        z = spla.spsolve(forms_of(m).A.tocsc(), load)
        norms.append(np.sqrt(z @ load) / (forms_of(m).h1_norm(u) + 1))
    assert max(norms) / min(norms) < 2.0


def test_edge_load_normals_point_outward():
    m = structured_mesh(4)
    b = assemble_edge_load(m, lambda P, n: n[..., 0] * P[..., 0] + n[..., 1] * P[..., 1])
    # int_boundary x . n = 2 |square|
    assert b.sum() == pytest.approx(2.0, rel=1e-12)


def test_field_operations(flat):
    _, base, m = flat
    f = Field(m, np.full(m.n_vertices, 2.0))
    assert f.l2_norm() == pytest.approx(2.0 * np.sqrt(m.areas().sum()))
    r = f.restrict_omega()
    assert r.values.shape == (base.n_vertices,)
    assert np.allclose(f.evaluate(np.array([[0.1, -0.2], [0.3, 0.35]])), 2.0)
    with pytest.raises(ConsistencyError):
        Field(m, np.zeros(3))


def test_export_coo(tmp_path):
    A = forms_of(structured_mesh(2)).A
    path = tmp_path / "a.txt"
    export_coo(A, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# 9 9 {A.nnz}"
    r, c, v = lines[1].split()
    assert float(v) == A[int(r), int(c)]
