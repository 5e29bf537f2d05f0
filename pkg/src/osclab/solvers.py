"""Linear, nonlinear and eigenvalue solvers for the assembled forms."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    assemble_boundary_term,
    assemble_concentrated_term,
    assemble_limit_boundary_term,
    assemble_linearization,
    forms_of,
)
from .errors import EigenSolverError, SolverError


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list)
    damping: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    picard_steps: int = 0


def solve_spd(op, rhs, tol=1e-10, maxiter=None, x0=None, report=False):
    """Jacobi-preconditioned conjugate gradients to relative residual ``tol``.

    Raises
    ------
    SolverError
        If ``maxiter`` (default ten times the dimension) is exhausted; the
        residual history is attached.
    """
    op = sp.csr_matrix(op)
    rhs = np.asarray(rhs, dtype=float)
    n = op.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        x = np.zeros(n)
        return (x, SolveReport(0, 0.0, True, [0.0])) if report else x
    diag = op.diagonal()
    if np.any(diag <= 0):
        raise SolverError("operator has a non-positive diagonal; not SPD", [])
    prec = sp.diags(1.0 / diag)
    history = []

    def track(xk):
        history.append(float(np.linalg.norm(rhs - op @ xk) / bnorm))

    x, info = spla.cg(op, rhs, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=prec, callback=track)
    res = float(np.linalg.norm(rhs - op @ x) / bnorm)
    if info != 0 or res > tol * (1 + 1e-6):
        raise SolverError(f"CG did not reach tol {tol:g} in {maxiter} iterations (residual {res:.3e})", history)
    rep = SolveReport(len(history), res, True, history)
    return (x, rep) if report else x


class _Problem:
    """Shared machinery: ``A`` with a cached factorization and the residual."""

    def __init__(self, mesh, nl):
        self.mesh = mesh
        self.nl = nl
        self.forms = forms_of(mesh)
        self.A = self.forms.A

    @property
    def n(self):
        return self.mesh.n_vertices

    def solve_A(self, rhs):
        if "lu" not in self.mesh._cache:
            self.mesh._cache["lu"] = spla.splu(self.A.tocsc())
        return self.mesh._cache["lu"].solve(rhs)

    def residual(self, u):
        return self.A @ u - self.h(u)


class PerturbedProblem(_Problem):
    """``-Laplace u + u = (1/eps) chi_strip f(x, u)`` with ``du/dn + g(x, u) = 0`` outside."""

    def __init__(self, mesh, nl, eps):
        super().__init__(mesh, nl)
        self.eps = eps

    def h(self, u):
        return (assemble_concentrated_term(self.mesh, self.nl, u, self.eps)
                - assemble_boundary_term(self.mesh, self.nl, u))

    def jacobian(self, u):
        return assemble_linearization(self.mesh, self.nl, u, eps=self.eps, forms=self.forms)


class LimitProblem(_Problem):
    """``-Laplace u + u = 0`` with ``du/dn + gamma g(x, u) = beta f(x, u)`` outside."""

    def __init__(self, mesh, coeffs, nl, chart):
        super().__init__(mesh, nl)
        self.coeffs = coeffs
        self.chart = chart

    def h(self, u):
        return assemble_limit_boundary_term(self.mesh, self.coeffs, self.nl, u, self.chart)

    def jacobian(self, u):
        return assemble_linearization(self.mesh, self.nl, u, coeffs=self.coeffs, chart=self.chart,
                                      forms=self.forms)


def solve_nonlinear(problem, initial=None, tol=1e-10, theta=0.5, max_picard=200, max_newton=50,
                    stall_window=5, stall_reduction=0.02):
    """Find ``u`` with ``|A u - h(u)| <= tol``.

    Damped Picard steps ``u <- (1 - theta) u + theta A^{-1} h(u)`` run first.
    If the Picard increment (in the energy norm) drops by less than
    ``stall_reduction`` over ``stall_window`` steps, Newton with a
    backtracking line search takes over; accepted Newton steps never
    increase the residual.

    Returns
    -------
    u : ndarray
    report : SolveReport

    Raises
    ------
    SolverError
        When both stages stall; the residual history is attached.
    """
    u = np.zeros(problem.n) if initial is None else np.array(initial, dtype=float)
    r = problem.residual(u)
    rn = float(np.linalg.norm(r))
    rep = SolveReport(0, rn, False, [rn], [], [])
    if rn <= tol:
        rep.converged = True
        return u, rep
    rep.stages.append("picard")
    # stall is judged on the energy norm of the Picard increment, i.e. the
    # residual in the dual norm, which is what a contraction reduces
    increments = []
    best = (rn, u, r)
    hu = problem.A @ u - r
    for _ in range(max_picard):
        delta = problem.solve_A(hu) - u
        increments.append(float(np.sqrt(max(delta @ (problem.A @ delta), 0.0))))
        u = u + theta * delta
        hu = problem.h(u)
        r = problem.A @ u - hu
        rn = float(np.linalg.norm(r))
        rep.iterations += 1
        rep.picard_steps += 1
        rep.history.append(rn)
        rep.damping.append(theta)
        if rn <= tol:
            rep.residual, rep.converged = rn, True
            return u, rep
        if rn < best[0]:
            best = (rn, u, r)
        if (len(increments) > stall_window
                and increments[-1] > (1.0 - stall_reduction) * increments[-1 - stall_window]):
            break
    # a diverging Picard stage hands over its best iterate, not its last
    rn, u, r = best
    rep.stages.append("newton")
    for _ in range(max_newton):
        J = problem.jacobian(u)
        du = spla.splu(J.tocsc()).solve(-r)
        t = 1.0
        while True:
            trial = u + t * du
            r_trial = problem.residual(trial)
            rt = float(np.linalg.norm(r_trial))
            if rt <= (1.0 - 1e-4 * t) * rn or rt <= tol:
                break
            t *= 0.5
            if t < 1.0 / 1024:
                rep.residual = rn
                raise SolverError(f"Newton line search failed at residual {rn:.3e}", rep.history)
        u, r, rn = trial, r_trial, rt
        rep.iterations += 1
        rep.history.append(rn)
        rep.damping.append(t)
        if rn <= tol:
            rep.residual, rep.converged = rn, True
            return u, rep
    rep.residual = rn
    raise SolverError(f"nonlinear solve stalled at residual {rn:.3e}", rep.history)


@dataclass
class EigenReport:
    method: str
    residuals: np.ndarray
    orthogonality: float


def solve_eigen(S, M, k, which="smallest", sigma=-1.0, dense_below=500, report=False):
    """Generalized symmetric eigenpairs ``S v = lambda M v``.

    ``which='smallest'`` returns the ``k`` smallest eigenvalues (shift-invert
    Lanczos about ``sigma``, which must lie below the wanted part of the
    spectrum); ``which='largest'`` returns the ``k`` largest, with ``M``
    positive definite.  Small problems use a dense solver.  Eigenvalues are
    sorted ascending and eigenvectors are ``M``-orthonormal.  The Lanczos start
    vector is seeded by the dimension, so repeated calls give identical output.
    """
    n = S.shape[0]
    if k >= n:
        raise ValueError("k must be smaller than the dimension")
    # ARPACK otherwise draws its start vector from internal state that
    # advances between calls, which breaks run-to-run reproducibility
    v0 = np.random.default_rng(n).uniform(-1.0, 1.0, n)
    try:
        if n < dense_below:
            Sd = S.toarray() if sp.issparse(S) else np.asarray(S)
            Md = M.toarray() if sp.issparse(M) else np.asarray(M)
            vals, vecs = sla.eigh(Sd, Md)
            sel = slice(0, k) if which == "smallest" else slice(n - k, n)
            vals, vecs, method = vals[sel], vecs[:, sel], "dense"
        elif which == "smallest":
            vals, vecs = spla.eigsh(sp.csc_matrix(S), k, sp.csc_matrix(M), sigma=sigma, which="LM", tol=0, v0=v0)
            method = "shift-invert"
        elif which == "largest":
            vals, vecs = spla.eigsh(sp.csr_matrix(S), k, sp.csc_matrix(M), which="LA", tol=0, v0=v0)
            method = "lanczos"
        else:
            raise ValueError(f"unknown which={which!r}")
    except (spla.ArpackError, spla.ArpackNoConvergence, sla.LinAlgError) as exc:
        raise EigenSolverError(f"eigensolver breakdown: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    vecs = vecs / np.sqrt(np.einsum("ij,ij->j", vecs, M @ vecs))
    res = np.linalg.norm(S @ vecs - (M @ vecs) * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    gram = vecs.T @ (M @ vecs)
    orth = float(np.max(np.abs(gram - np.eye(len(vals)))))
    if report:
        return vals, vecs, EigenReport(method, res, orth)
    return vals, vecs
