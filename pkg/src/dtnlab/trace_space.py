"""Boundary surface FEM and the spectral realization of H^s(Gamma).

All fractional norms, s in [-1, 1], are defined through the generalized
eigenbasis of the surface Laplace-Beltrami pencil (S, M): the H^s norm of
a nodal boundary function g is (sum_i (1+mu_i)^s ghat_i^2)^(1/2) with
ghat = E^T M g.  Operators that map traces to boundary functionals (loads)
get their H^(1/2) -> H^(-1/2) norm exactly in this basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import RangeError, ShapeMismatchError, SpectralFailureError
from .fem import assemble_forms, constant
from .geometry import Mesh


def boundary_matrices(mesh: Mesh):
    """Surface P1 mass and stiffness on the boundary triangulation.

    Indices follow the order of mesh.boundary_vertices.
    """
    nb = len(mesh.boundary_vertices)
    glob2loc = np.full(mesh.num_vertices, -1, dtype=np.int64)
    glob2loc[mesh.boundary_vertices] = np.arange(nb)
    faces = glob2loc[mesh.boundary_faces]

    p = mesh.vertices[mesh.boundary_faces]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    nvec = np.cross(e1, e2)
    area2 = np.linalg.norm(nvec, axis=1)            # 2A
    nunit = nvec / area2[:, None]
    area = area2 / 2.0

    # in-plane hat gradients: grad lambda_i = n x e_opp / (2A)
    opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]],
                   axis=1)                          # (nf, 3 verts, 3)
    grads = np.cross(nunit[:, None, :], opp) / area2[:, None, None]

    sloc = np.einsum("f,fli,fmi->flm", area, grads, grads)
    mloc = area[:, None, None] * ((np.ones((3, 3)) + np.eye(3)) / 12.0)[None]

    rows = np.repeat(faces, 3, axis=1).reshape(-1)
    cols = np.tile(faces, (1, 3)).reshape(-1)
    S = sp.coo_matrix((sloc.ravel(), (rows, cols)), shape=(nb, nb)).tocsr()
    M = sp.coo_matrix((mloc.ravel(), (rows, cols)), shape=(nb, nb)).tocsr()
    return M, S


@dataclass(frozen=True)
class TraceBasis:
    """Laplace-Beltrami eigenpairs of the boundary pencil.

    mu is ascending with mu[0] = 0 (constants); columns of modes are
    M-orthonormal.
    """

    mesh: Mesh
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    mu: np.ndarray
    modes: np.ndarray

    def __post_init__(self):
        self.mu.setflags(write=False)
        self.modes.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.mu)


@dataclass
class TraceFunction:
    """Nodal boundary function tied to its basis."""

    coeffs: np.ndarray
    basis: TraceBasis

    def norm(self, s: float) -> float:
        return hs_norm(self.basis, self.coeffs, s)


def build_trace_basis(mesh: Mesh) -> TraceBasis:
    if len(mesh.boundary_vertices) < 4:
        raise SpectralFailureError("boundary has fewer than 4 vertices")
    M, S = boundary_matrices(mesh)
    try:
        mu, modes = sla.eigh(S.toarray(), M.toarray())
    except sla.LinAlgError as exc:
        raise SpectralFailureError(f"boundary eigensolve failed: {exc}") from exc
    mu = np.maximum(mu, 0.0)  # clip roundoff negatives of the zero mode
    return TraceBasis(mesh=mesh, mass=M, stiffness=S, mu=mu, modes=modes)


def function_coeffs(basis: TraceBasis, g: np.ndarray) -> np.ndarray:
    """Spectral coefficients of a nodal boundary function."""
    return basis.modes.T @ (basis.mass @ g)


def dual_coeffs(basis: TraceBasis, f: np.ndarray) -> np.ndarray:
    """Spectral coefficients of the function represented by a load vector."""
    return basis.modes.T @ f


def hs_norm(basis: TraceBasis, g: np.ndarray, s: float) -> float:
    """H^s(Gamma) norm of a nodal boundary function, s in [-1, 1]."""
    if not -1.0 <= s <= 1.0:
        raise RangeError(f"s={s} outside [-1, 1]")
    g = np.asarray(g, dtype=float)
    if g.shape != (basis.size,):
        raise ShapeMismatchError(
            f"trace length {g.shape} != boundary size {basis.size}")
    ghat = function_coeffs(basis, g)
    return float(np.sqrt(np.sum((1.0 + basis.mu) ** s * ghat**2)))


def hs_dual_norm(basis: TraceBasis, f: np.ndarray, s: float) -> float:
    """H^s norm of the boundary functional f (load-vector convention)."""
    if not -1.0 <= s <= 1.0:
        raise RangeError(f"s={s} outside [-1, 1]")
    fhat = dual_coeffs(basis, np.asarray(f, dtype=float))
    return float(np.sqrt(np.sum((1.0 + basis.mu) ** s * fhat**2)))


def operator_norm_half(basis: TraceBasis, T: np.ndarray) -> float:
    """Norm of T as a map H^(1/2) -> H^(-1/2).

    T takes nodal trace coefficients to load coefficients (the <Tg, h> =
    h^T T g convention used by the discrete Dirichlet-to-Neumann operator).
    """
    T = np.asarray(T, dtype=float)
    if T.shape != (basis.size, basis.size):
        raise ShapeMismatchError(
            f"operator shape {T.shape} != ({basis.size}, {basis.size})")
    w = (1.0 + basis.mu) ** (-0.25)
    B = basis.modes.T @ T @ basis.modes
    B *= w[:, None]
    B *= w[None, :]
    return float(sla.svdvals(B)[0]) if basis.size else 0.0


def norm_equivalence_eigenvalue(mesh: Mesh, basis: TraceBasis | None = None) -> float:
    """Smallest eigenvalue lambda of the quadratic form
    |grad w|_{L2}^2 + |w|_{H^{-1/2}(Gamma)}^2 against |w|_{L2}^2.

    A strictly positive, refinement-stable value realizes the equivalence
    of this norm pair with the full H^1 norm at the discrete level.
    """
    if basis is None:
        basis = build_trace_basis(mesh)
    K, M = assemble_forms(mesh, constant(1.0))
    A = K.toarray()
    w = (1.0 + basis.mu) ** (-0.5)
    ME = basis.mass @ basis.modes
    B = (ME * w[None, :]) @ ME.T
    bidx = mesh.boundary_vertices
    A[np.ix_(bidx, bidx)] += B
    vals = sla.eigh(A, M.toarray(), eigvals_only=True,
                    subset_by_index=[0, 0])
    return float(vals[0])


def export_spectrum_csv(basis: TraceBasis, path) -> None:
    """Eigenvalue table (index, mu) for spectrum plots."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("index,mu\r\n")
        for i, m in enumerate(basis.mu):
            fh.write("%d,%.17g\r\n" % (i, m))
