"""Discrete Dirichlet-to-Neumann operators via Schur complements.

The operator maps nodal trace coefficients to boundary load coefficients:
<Lambda g, h> = h^T Lambda g equals the energy pairing a_sigma(u(g), E h)
for every discrete extension E h, exactly at the discrete level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ShapeMismatchError
from .fem import Conductivity, DirichletSolver, assemble_forms, p1_gradients
from .geometry import Mesh, tet_centroids
from .trace_space import TraceBasis, operator_norm_half


def mesh_id(mesh: Mesh) -> str:
    return f"{mesh.domain_tag}-v{mesh.num_vertices}-t{mesh.num_tets}"


def cond_id(cond: Conductivity) -> str:
    items = ",".join(f"{k}={v}" for k, v in sorted(cond.params.items()))
    return f"{cond.name}({items})"


@dataclass(frozen=True)
class DtnOperator:
    """Dense symmetric boundary operator in the load convention."""

    matrix: np.ndarray
    cond_id: str
    mesh_id: str

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def pairing(self, g: np.ndarray, h: np.ndarray) -> float:
        """<Lambda g, h> in the H^(1/2) duality."""
        return float(h @ (self.matrix @ g))


def assemble_dtn(mesh: Mesh, cond: Conductivity,
                 solver: DirichletSolver | None = None) -> DtnOperator:
    """Schur complement of the stiffness onto the boundary vertices."""
    if solver is None:
        solver = DirichletSolver.conductivity(mesh, cond)
    K = solver.A
    bidx, iidx = solver.bidx, solver.iidx
    k_bb = K[bidx][:, bidx].toarray()
    k_ib = K[iidx][:, bidx].toarray()
    x = solver._lu.solve(k_ib)
    lam = k_bb - k_ib.T @ x
    return DtnOperator(matrix=lam, cond_id=cond_id(cond), mesh_id=mesh_id(mesh))


def alessandrini_identity(mesh: Mesh, cond1: Conductivity, cond2: Conductivity,
                          g: np.ndarray, h: np.ndarray,
                          solver1: DirichletSolver | None = None,
                          solver2: DirichletSolver | None = None,
                          dtn1: DtnOperator | None = None,
                          dtn2: DtnOperator | None = None):
    """Both sides of the identity linking interior conductivity gaps to
    Dirichlet-to-Neumann gaps.

    Returns (lhs, rhs) with
        lhs = integral (sigma1 - sigma2) [A] grad u1 . grad u2,
        rhs = <(Lambda_1 - Lambda_2) g, h>,
    where u1 solves with cond1 and trace g, u2 with cond2 and trace h.
    The matrix coefficient A is included when the conductivities carry one.
    """
    if solver1 is None:
        solver1 = DirichletSolver.conductivity(mesh, cond1)
    if solver2 is None:
        solver2 = DirichletSolver.conductivity(mesh, cond2)
    u1 = solver1.solve(np.asarray(g, dtype=float))
    u2 = solver2.solve(np.asarray(h, dtype=float))

    vols, grads = p1_gradients(mesh)
    cent = tet_centroids(mesh)
    g1 = np.einsum("tlj,tl->tj", grads, u1[mesh.tets])
    g2 = np.einsum("tlj,tl->tj", grads, u2[mesh.tets])
    dsig = cond1.sigma(cent) - cond2.sigma(cent)
    if cond1.matrix_a is not None:
        a = cond1.matrix_a(cent)
        lhs = float(np.sum(vols * dsig * np.einsum("ti,tij,tj->t", g1, a, g2)))
    else:
        lhs = float(np.sum(vols * dsig * np.einsum("ti,ti->t", g1, g2)))

    if dtn1 is None:
        dtn1 = assemble_dtn(mesh, cond1, solver1)
    if dtn2 is None:
        dtn2 = assemble_dtn(mesh, cond2, solver2)
    rhs = float(h @ ((dtn1.matrix - dtn2.matrix) @ g))
    return lhs, rhs


def dtn_diff_norm(basis: TraceBasis, L1: DtnOperator, L2: DtnOperator) -> float:
    """H^(1/2) -> H^(-1/2) norm of the operator gap on a shared mesh."""
    if L1.mesh_id != L2.mesh_id:
        raise ShapeMismatchError(
            f"operators live on different meshes: {L1.mesh_id} vs {L2.mesh_id}")
    if L1.matrix.shape != (basis.size, basis.size):
        raise ShapeMismatchError("operator size does not match the trace basis")
    return operator_norm_half(basis, L1.matrix - L2.matrix)


def export_dtn(dtn: DtnOperator, path, meta_path=None) -> None:
    """Matrix Market array format plus a key=value sidecar."""
    from scipy.io import mmwrite

    mmwrite(str(path), np.asarray(dtn.matrix))
    if meta_path is not None:
        with open(meta_path, "w", encoding="ascii") as fh:
            fh.write(f"mesh_id={dtn.mesh_id}\n")
            fh.write(f"cond_id={dtn.cond_id}\n")
            fh.write(f"size={dtn.matrix.shape[0]}\n")


def export_forms(K: sp.spmatrix, path) -> None:
    """Sparse form export in Matrix Market coordinate format."""
    from scipy.io import mmwrite

    mmwrite(str(path), K.tocoo())
