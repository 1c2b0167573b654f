"""P1 finite-element forms and Dirichlet solves for div(sigma grad u) = 0
and -Delta v + q v = 0 on tetrahedral meshes.

Coefficients are sampled at tet centroids; the solver is a deterministic
sparse LU of the interior block, shared across right-hand sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateMeshError, ResonanceError, SolverFailureError
from .geometry import Mesh, tet_centroids

Field = np.ndarray  # one coefficient per mesh vertex


@dataclass(frozen=True)
class Conductivity:
    """Scalar conductivity field with analytic derivatives and bounds.

    sigma, grad_sigma, laplacian_sigma are vectorized callbacks on (N,3)
    arrays, defined on a neighborhood of the domain (finite-difference
    stencils and extensions may evaluate slightly outside).  kappa certifies
    kappa^-1 <= sigma <= kappa on the domain.  matrix_a, when present, is a
    symmetric matrix field with ellipticity constant mu.
    """

    name: str
    params: dict
    kappa: float
    sigma: Callable[[np.ndarray], np.ndarray]
    grad_sigma: Callable[[np.ndarray], np.ndarray]
    laplacian_sigma: Optional[Callable[[np.ndarray], np.ndarray]] = None
    matrix_a: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mu: float = 1.0

    def sqrt_sigma_laplacian(self, x: np.ndarray) -> np.ndarray:
        """Laplacian of sigma^(1/2), from the analytic sigma derivatives.

        Uses Delta(s) = Delta(sigma)/(2 s) - |grad sigma|^2/(4 s^3) with
        s = sigma^(1/2); requires laplacian_sigma.
        """
        if self.laplacian_sigma is None:
            raise ValueError(f"{self.name}: no analytic Laplacian available")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.sqrt(self.sigma(x))
        g = self.grad_sigma(x)
        return (self.laplacian_sigma(x) / (2.0 * s)
                - np.einsum("ni,ni->n", g, g) / (4.0 * s**3))

    @property
    def has_analytic_laplacian(self) -> bool:
        return self.laplacian_sigma is not None


def _bounds_corners(bounds):
    (lo, hi) = bounds
    lo = np.full(3, lo, dtype=float) if np.isscalar(lo) else np.asarray(lo, float)
    hi = np.full(3, hi, dtype=float) if np.isscalar(hi) else np.asarray(hi, float)
    corners = np.array([[lo[i] if b & (1 << i) == 0 else hi[i] for i in range(3)]
                        for b in range(8)])
    return lo, hi, corners


def constant(c: float) -> Conductivity:
    if c <= 0:
        raise ValueError("conductivity must be positive")
    return Conductivity(
        name="constant", params={"c": c}, kappa=max(c, 1.0 / c),
        sigma=lambda x: np.full(np.atleast_2d(x).shape[0], float(c)),
        grad_sigma=lambda x: np.zeros((np.atleast_2d(x).shape[0], 3)),
        laplacian_sigma=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
    )


def affine(a, b: float, bounds=(0.0, 1.0)) -> Conductivity:
    """sigma = a . x + b, positive on the bounding box of the domain."""
    a = np.asarray(a, dtype=float).reshape(3)
    _, _, corners = _bounds_corners(bounds)
    vals = corners @ a + b
    if vals.min() <= 0:
        raise ValueError("affine conductivity not positive on the domain box")
    kappa = max(vals.max(), 1.0 / vals.min())
    return Conductivity(
        name="affine", params={"a": a.tolist(), "b": b}, kappa=kappa,
        sigma=lambda x: np.atleast_2d(x) @ a + b,
        grad_sigma=lambda x: np.broadcast_to(a, (np.atleast_2d(x).shape[0], 3)).copy(),
        laplacian_sigma=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
    )


def gaussian_bump(center, width: float, amplitude: float,
                  bounds=(0.0, 1.0)) -> Conductivity:
    """sigma = 1 + amplitude * exp(-|x-center|^2 / (2 width^2))."""
    c = np.asarray(center, dtype=float).reshape(3)
    w2 = float(width) ** 2
    if amplitude <= -1.0:
        raise ValueError("amplitude must exceed -1 for positivity")

    def sig(x):
        x = np.atleast_2d(x)
        r2 = np.sum((x - c) ** 2, axis=1)
        return 1.0 + amplitude * np.exp(-r2 / (2 * w2))

    def grad(x):
        x = np.atleast_2d(x)
        d = x - c
        r2 = np.sum(d**2, axis=1)
        return (-amplitude / w2) * np.exp(-r2 / (2 * w2))[:, None] * d

    def lap(x):
        x = np.atleast_2d(x)
        r2 = np.sum((x - c) ** 2, axis=1)
        return amplitude * np.exp(-r2 / (2 * w2)) * (r2 / w2**2 - 3.0 / w2)

    smin = 1.0 + min(amplitude, 0.0)
    smax = 1.0 + max(amplitude, 0.0)
    kappa = max(smax, 1.0 / smin)
    return Conductivity(
        name="gaussian_bump",
        params={"center": c.tolist(), "width": width, "amplitude": amplitude},
        kappa=kappa, sigma=sig, grad_sigma=grad, laplacian_sigma=lap,
    )


def product_quadratic(beta: float, bounds=(0.0, 1.0)) -> Conductivity:
    """sigma = (1 + beta x1^2)^2 with analytic sqrt-Laplacian 2 beta."""
    lo, hi, _ = _bounds_corners(bounds)
    t = max(abs(lo[0]), abs(hi[0]))
    if beta < 0 and 1.0 + beta * t**2 <= 0:
        raise ValueError("sigma vanishes on the domain box")

    def sig(x):
        x1 = np.atleast_2d(x)[:, 0]
        return (1.0 + beta * x1**2) ** 2

    def grad(x):
        x = np.atleast_2d(x)
        g = np.zeros_like(x)
        g[:, 0] = 4.0 * beta * x[:, 0] * (1.0 + beta * x[:, 0] ** 2)
        return g

    def lap(x):
        x1 = np.atleast_2d(x)[:, 0]
        return 4.0 * beta * (1.0 + 3.0 * beta * x1**2)

    vals = [(1.0 + beta * s**2) ** 2 for s in (0.0, t)]
    kappa = max(max(vals), 1.0 / min(vals))
    return Conductivity(
        name="product_quadratic", params={"beta": beta}, kappa=kappa,
        sigma=sig, grad_sigma=grad, laplacian_sigma=lap,
    )


def isotropic_matrix(cond: Conductivity, a_matrix: Callable, mu: float) -> Conductivity:
    """Attach a symmetric matrix coefficient A(x) to a scalar conductivity."""
    return Conductivity(
        name=cond.name + "+matrix", params=cond.params, kappa=cond.kappa,
        sigma=cond.sigma, grad_sigma=cond.grad_sigma,
        laplacian_sigma=cond.laplacian_sigma, matrix_a=a_matrix, mu=mu,
    )


_FAMILIES = {
    "constant": constant,
    "affine": affine,
    "gaussian_bump": gaussian_bump,
    "product_quadratic": product_quadratic,
}


def family(name: str, **params) -> Conductivity:
    """Look up a built-in conductivity family by name."""
    if name not in _FAMILIES:
        raise ValueError(f"unknown conductivity family {name!r}; "
                         f"choose from {sorted(_FAMILIES)}")
    return _FAMILIES[name](**params)


# ---------------------------------------------------------------------------
# P1 element data


def p1_gradients(mesh: Mesh):
    """Per-tet volumes and barycentric gradients.

    Returns (vols, grads) with grads of shape (nt, 4, 3); row i is the
    constant gradient of the hat function of local vertex i.
    """
    p = mesh.vertices[mesh.tets]
    e = p[:, 1:] - p[:, :1]                    # (nt, 3, 3)
    det = np.einsum("ti,ti->t", e[:, 0], np.cross(e[:, 1], e[:, 2]))
    if np.any(det <= 0):
        raise DegenerateMeshError("non-positive tet volume in assembly")
    vols = det / 6.0
    inv = np.linalg.inv(e)                     # rows of inv.T are grads 1..3
    g = np.transpose(inv, (0, 2, 1))
    grads = np.empty((len(vols), 4, 3))
    grads[:, 1:, :] = g
    grads[:, 0, :] = -g.sum(axis=1)
    return vols, grads


def tet_gradients(mesh: Mesh, u: Field) -> np.ndarray:
    """Piecewise-constant gradient of a P1 field, shape (nt, 3)."""
    vols, grads = p1_gradients(mesh)
    return np.einsum("tlj,tl->tj", grads, u[mesh.tets])


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    nt = mesh.num_tets
    rows = np.repeat(mesh.tets, 4, axis=1).reshape(nt, 4, 4)
    cols = np.tile(mesh.tets, (1, 4)).reshape(nt, 4, 4)
    mat = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())),
        shape=(mesh.num_vertices, mesh.num_vertices),
    )
    return mat.tocsr()


def assemble_forms(mesh: Mesh, cond: Conductivity):
    """Stiffness and mass matrices; coefficient evaluated at centroids.

    K is the matrix of integral(sigma grad u . grad v), or of the matrix
    form integral(sigma A grad u . grad v) when cond carries matrix_a.
    M is the consistent P1 mass matrix.
    """
    vols, grads = p1_gradients(mesh)
    cent = tet_centroids(mesh)
    sig = cond.sigma(cent)
    if cond.matrix_a is not None:
        a = cond.matrix_a(cent)                 # (nt, 3, 3)
        coeff = sig[:, None, None] * a
        kloc = np.einsum("t,tli,tij,tmj->tlm", vols, grads, coeff, grads)
    else:
        kloc = np.einsum("t,tli,tmi->tlm", vols * sig, grads, grads)
    K = _scatter(mesh, kloc)

    mloc = (np.ones((4, 4)) + np.eye(4)) / 20.0
    mloc = vols[:, None, None] * mloc[None, :, :]
    M = _scatter(mesh, mloc)
    return K, M


def weighted_mass(mesh: Mesh, w: Callable[[np.ndarray], np.ndarray]) -> sp.csr_matrix:
    """Mass matrix with scalar coefficient w sampled at centroids."""
    vols, _ = p1_gradients(mesh)
    wc = w(tet_centroids(mesh))
    mloc = (np.ones((4, 4)) + np.eye(4)) / 20.0
    mloc = (vols * wc)[:, None, None] * mloc[None, :, :]
    return _scatter(mesh, mloc)


def assemble_schrodinger(mesh: Mesh, q: Callable[[np.ndarray], np.ndarray]):
    """Matrix of integral(grad v . grad w + q v w)."""
    K, M = assemble_forms(mesh, constant(1.0))
    return K + weighted_mass(mesh, q), M


# ---------------------------------------------------------------------------
# Dirichlet solver


class DirichletSolver:
    """Interior LU factorization of a symmetric form, reused across traces.

    The full matrix A acts on all vertices; solve(g) returns the discrete
    solution with boundary values g and vanishing interior residual.
    """

    def __init__(self, mesh: Mesh, A: sp.spmatrix):
        self.mesh = mesh
        self.A = A.tocsr()
        self.bidx = mesh.boundary_vertices
        self.iidx = mesh.interior_vertices
        a_ii = self.A[self.iidx][:, self.iidx].tocsc()
        self._a_ib = self.A[self.iidx][:, self.bidx].tocsr()
        try:
            self._lu = spla.splu(a_ii)
        except RuntimeError as exc:
            raise SolverFailureError(f"interior factorization failed: {exc}") from exc

    @classmethod
    def conductivity(cls, mesh: Mesh, cond: Conductivity) -> "DirichletSolver":
        K, _ = assemble_forms(mesh, cond)
        solver = cls(mesh, K)
        solver.K = K
        return solver

    @classmethod
    def schrodinger(cls, mesh: Mesh, q: Callable) -> "DirichletSolver":
        A, _ = assemble_schrodinger(mesh, q)
        try:
            solver = cls(mesh, A)
        except SolverFailureError as exc:
            raise ResonanceError(str(exc)) from exc
        return solver

    def solve(self, g: np.ndarray, rtol: float = 1e-10) -> Field:
        g = np.asarray(g, dtype=float)
        if g.shape != (len(self.bidx),):
            raise SolverFailureError(
                f"trace length {g.shape} != boundary size {len(self.bidx)}")
        rhs = -self._a_ib @ g
        ui = self._lu.solve(rhs)
        u = np.zeros(self.mesh.num_vertices)
        u[self.bidx] = g
        u[self.iidx] = ui
        res = np.linalg.norm((self.A @ u)[self.iidx])
        scale = 1.0 + np.linalg.norm(rhs)
        if not np.isfinite(res) or res > rtol * scale * 1e3:
            raise SolverFailureError(
                f"interior residual {res:.3e} exceeds tolerance (scale {scale:.3e})")
        return u

    def solve_interior_load(self, f: np.ndarray) -> Field:
        """Solve A_II z = f_I with zero boundary values (dual/Riesz solves)."""
        z = np.zeros(self.mesh.num_vertices)
        z[self.iidx] = self._lu.solve(np.asarray(f, dtype=float)[self.iidx])
        return z


def solve_dirichlet(mesh: Mesh, cond: Conductivity, g: np.ndarray) -> Field:
    """Discrete solution of div(sigma grad u) = 0 with trace g."""
    return DirichletSolver.conductivity(mesh, cond).solve(g)


def solve_schrodinger(mesh: Mesh, q: Callable, g: np.ndarray) -> Field:
    """Discrete solution of -Delta v + q v = 0 with trace g.

    Raises ResonanceError when the interior block is singular or the solve
    is dominated by roundoff (near-resonant q).
    """
    solver = DirichletSolver.schrodinger(mesh, q)
    try:
        return solver.solve(g)
    except SolverFailureError as exc:
        a_ii = solver.A[solver.iidx][:, solver.iidx]
        est = spla.onenormest(a_ii.tocsc())
        raise ResonanceError(
            f"near-singular Schroedinger system: {exc}",
            condition_estimate=float(est)) from exc


def energy(mesh: Mesh, cond: Conductivity, u: Field, K: sp.spmatrix | None = None) -> float:
    """Quadratic energy integral(sigma |grad u|^2) = u^T K u."""
    if K is None:
        K, _ = assemble_forms(mesh, cond)
    return float(u @ (K @ u))


def h1_norm(mesh: Mesh, u: Field, forms=None) -> float:
    """Full H^1 norm via the sigma = 1 forms."""
    if forms is None:
        forms = assemble_forms(mesh, constant(1.0))
    K, M = forms
    return float(np.sqrt(u @ (K @ u) + u @ (M @ u)))


def interpolate(mesh: Mesh, f: Callable[[np.ndarray], np.ndarray]) -> Field:
    return np.asarray(f(mesh.vertices), dtype=float).reshape(mesh.num_vertices)


def trace_values(mesh: Mesh, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    return np.asarray(
        f(mesh.vertices[mesh.boundary_vertices]), dtype=float
    ).reshape(len(mesh.boundary_vertices))


def fd_laplacian(f: Callable, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Fourth-order centered finite-difference Laplacian of a callback."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    total = np.zeros(x.shape[0])
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        total += (-f(x + 2 * e) + 16 * f(x + e) - 30 * f(x)
                  + 16 * f(x - e) - f(x - 2 * e)) / (12 * h**2)
    return total
