"""Boundary determination experiments.

Two estimators recover sigma at a boundary point from Dirichlet-to-Neumann
data: a quotient of quadratic forms over localized bump data of shrinking
support (scale index k), and a normalized pairing against the trace of the
free-space kernel with an exterior pole approaching the point (scale
delta).  Supporting diagnostics measure how the bump solutions decay away
from the probe and concentrate near it, and a sweep harness fits the
stability exponents linking boundary gaps to operator gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dtn import DtnOperator, assemble_dtn, dtn_diff_norm, cond_id as _cid
from .errors import DegenerateDatumError, UnresolvableScaleError, UsageError
from .fem import Conductivity, DirichletSolver, constant, p1_gradients
from .fitting import ExponentFit, fit_exponent
from .geometry import Mesh, Probe, boundary_distance, tet_centroids
from .kernels import fundamental_h, pole_energy, pole_from_probe
from .trace_space import TraceBasis, TraceFunction, hs_norm


def bump_profile(t: np.ndarray) -> np.ndarray:
    """Smooth bump on [0, 1): exp(1 - 1/(1-t^2)), zero for t >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = t < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass(frozen=True)
class OscillatingDatum:
    """Unit-H^(1/2) boundary bump supported in B(x0, support_radius)."""

    k: int
    probe: Probe
    trace: TraceFunction
    support_radius: float


def min_boundary_edge(mesh: Mesh) -> float:
    p = mesh.vertices[mesh.boundary_faces]
    return min(
        float(np.linalg.norm(p[:, a] - p[:, b], axis=1).min())
        for a, b in ((0, 1), (1, 2), (2, 0))
    )


def build_psi_k(basis: TraceBasis, probe: Probe, k: int,
                support_scale: float = 0.5, guard_cells: int = 3) -> OscillatingDatum:
    """Localized boundary datum at scale k, normalized in H^(1/2).

    The support radius is support_scale / k and must span at least
    guard_cells boundary edges, otherwise the scale is declared
    unresolvable (the admissibility gate of every k-sweep).
    """
    if k < 1:
        raise UsageError(f"scale index must be >= 1, got {k}")
    mesh = basis.mesh
    radius = support_scale / k
    if radius < guard_cells * min_boundary_edge(mesh):
        raise UnresolvableScaleError(
            f"support radius {radius:.4g} below {guard_cells} boundary cells "
            f"({min_boundary_edge(mesh):.4g} each)")
    bv = mesh.vertices[mesh.boundary_vertices]
    dist = np.linalg.norm(bv - probe.x0[None, :], axis=1)
    coeffs = bump_profile(dist / radius)
    norm = hs_norm(basis, coeffs, 0.5)
    if norm < 1e-14:
        raise DegenerateDatumError("bump datum vanished on the mesh")
    coeffs = coeffs / norm
    return OscillatingDatum(k=k, probe=probe,
                            trace=TraceFunction(coeffs=coeffs, basis=basis),
                            support_radius=radius)


def _quadratic_form(mesh: Mesh, cond: Conductivity, g: np.ndarray,
                    solver: DirichletSolver | None,
                    dtn_op: DtnOperator | None) -> float:
    """<Lambda_sigma g, g> via the operator if given, else one solve."""
    if dtn_op is not None:
        return dtn_op.pairing(g, g)
    if solver is None:
        solver = DirichletSolver.conductivity(mesh, cond)
    u = solver.solve(g)
    return float(u @ (solver.A @ u))


def kv_estimate_sigma(mesh: Mesh, cond: Conductivity, probe: Probe, k: int,
                      basis: TraceBasis,
                      solver_sigma: DirichletSolver | None = None,
                      solver_one: DirichletSolver | None = None,
                      dtn_sigma: DtnOperator | None = None,
                      dtn_one: DtnOperator | None = None,
                      support_scale: float = 0.5) -> float:
    """Quotient estimate of sigma(x0) from localized bump data.

    sigma_hat = <Lambda_sigma psi_k, psi_k> / <Lambda_1 psi_k, psi_k>;
    both forms equal the Dirichlet energies of the corresponding harmonic
    extensions, so the quotient concentrates at the probe as k grows.
    """
    psi = build_psi_k(basis, probe, k, support_scale=support_scale)
    g = psi.trace.coeffs
    num = _quadratic_form(mesh, cond, g, solver_sigma, dtn_sigma)
    den = _quadratic_form(mesh, constant(1.0), g, solver_one, dtn_one)
    if abs(den) < 1e-14:
        raise DegenerateDatumError(f"reference form degenerate: {den}")
    return num / den


def singular_estimate_sigma(mesh: Mesh, cond: Conductivity, probe: Probe,
                            delta: float,
                            solver_sigma: DirichletSolver | None = None,
                            solver_one: DirichletSolver | None = None) -> float:
    """Pole-kernel estimate of sigma(x0).

    With g_delta the trace of H(., y_delta) and E_delta the pole energy,
    sigma_hat = 1 + <(Lambda_sigma - Lambda_1) g_delta, g_delta> / E_delta.
    Exact for sigma = 1; for constants the gap to sigma(x0) is the
    harmonic-extension-versus-kernel energy mismatch, which vanishes under
    refinement.
    """
    pole = pole_from_probe(probe, delta)
    gvals, _ = fundamental_h(mesh.vertices[mesh.boundary_vertices], pole.y)
    q_sig = _quadratic_form(mesh, cond, gvals, solver_sigma, None)
    q_one = _quadratic_form(mesh, constant(1.0), gvals, solver_one, None)
    e_delta = pole_energy(mesh, pole)
    return 1.0 + (q_sig - q_one) / e_delta


def exterior_decay_profile(mesh: Mesh, cond: Conductivity, probe: Probe,
                           k: int, rho_list, basis: TraceBasis,
                           solver: DirichletSolver | None = None,
                           support_scale: float = 0.5):
    """H^1 norms of the bump solution outside balls B(x0, rho).

    Requires k >= 2 * support_scale / rho so the datum is supported well
    inside every ball.  Returns a list of (rho, norm).
    """
    rho_list = list(rho_list)
    for rho in rho_list:
        if k < 2.0 * support_scale / rho:
            raise UnresolvableScaleError(
                f"k={k} below 2c/rho={2 * support_scale / rho:.3g} for rho={rho}")
    psi = build_psi_k(basis, probe, k, support_scale=support_scale)
    if solver is None:
        solver = DirichletSolver.conductivity(mesh, cond)
    u = solver.solve(psi.trace.coeffs)

    vols, grads = p1_gradients(mesh)
    cent = tet_centroids(mesh)
    gu = np.einsum("tlj,tl->tj", grads, u[mesh.tets])
    dens = np.einsum("ti,ti->t", gu, gu) + u[mesh.tets].mean(axis=1) ** 2
    dist = np.linalg.norm(cent - probe.x0[None, :], axis=1)
    out = []
    for rho in rho_list:
        outside = dist > rho
        out.append((float(rho), float(np.sqrt(np.sum(vols[outside] * dens[outside])))))
    return out


def local_gradient_mass(mesh: Mesh, u: np.ndarray, x0: np.ndarray,
                        rho: float) -> float:
    """L^2 norm of grad u over B(x0, rho) intersected with the domain."""
    vols, grads = p1_gradients(mesh)
    cent = tet_centroids(mesh)
    gu = np.einsum("tlj,tl->tj", grads, u[mesh.tets])
    inside = np.linalg.norm(cent - np.asarray(x0, float)[None, :], axis=1) < rho
    return float(np.sqrt(np.sum(vols[inside]
                                * np.einsum("ti,ti->t", gu[inside], gu[inside]))))


def collar_weighted_energy(mesh: Mesh, u: np.ndarray, x0: np.ndarray,
                           rho: float) -> float:
    """integral over B(x0, rho) of dist(x, Gamma) |grad u|^2."""
    vols, grads = p1_gradients(mesh)
    cent = tet_centroids(mesh)
    gu = np.einsum("tlj,tl->tj", grads, u[mesh.tets])
    inside = np.linalg.norm(cent - np.asarray(x0, float)[None, :], axis=1) < rho
    w = boundary_distance(mesh, cent[inside])
    return float(np.sum(vols[inside] * w
                        * np.einsum("ti,ti->t", gu[inside], gu[inside])))


# ---------------------------------------------------------------------------
# stability sweep


@dataclass(frozen=True)
class StabilityRecord:
    pair_id: str
    sup_gap: float
    normal_gap: float
    dtn_gap: float
    h: float
    alpha: float

    def as_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "sup_gap": self.sup_gap,
            "normal_gap": self.normal_gap,
            "dtn_gap": self.dtn_gap,
            "h": self.h,
            "alpha": self.alpha,
        }


def boundary_sample_points(mesh: Mesh, n: int = 10000):
    """Deterministic dense sampling of Gamma with outward normals.

    Cube: uniform grids on the six faces; ball: Fibonacci sphere points.
    """
    if mesh.domain_tag == "cube":
        per_face = max(2, int(math.ceil(math.sqrt(n / 6.0))))
        t = (np.arange(per_face) + 0.5) / per_face
        u, v = np.meshgrid(t, t, indexing="ij")
        u, v = u.ravel(), v.ravel()
        pts, nrm = [], []
        for axis in range(3):
            for side in (0.0, 1.0):
                p = np.zeros((len(u), 3))
                p[:, axis] = side
                p[:, (axis + 1) % 3] = u
                p[:, (axis + 2) % 3] = v
                nv = np.zeros((len(u), 3))
                nv[:, axis] = 1.0 if side == 1.0 else -1.0
                pts.append(p)
                nrm.append(nv)
        return np.concatenate(pts), np.concatenate(nrm)
    i = np.arange(n) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(1.0 - z**2, 0.0))
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return pts, pts.copy()


def boundary_gaps(mesh: Mesh, cond1: Conductivity, cond2: Conductivity,
                  n: int = 10000):
    """Sup norms of sigma1 - sigma2 and of its normal derivative on Gamma,
    by dense analytic sampling."""
    pts, nrm = boundary_sample_points(mesh, n)
    dsig = cond1.sigma(pts) - cond2.sigma(pts)
    dgrad = cond1.grad_sigma(pts) - cond2.grad_sigma(pts)
    sup_gap = float(np.abs(dsig).max())
    normal_gap = float(np.abs(np.einsum("ni,ni->n", dgrad, nrm)).max())
    return sup_gap, normal_gap


def stability_sweep(mesh: Mesh, basis: TraceBasis, pairs,
                    n_boundary_samples: int = 10000):
    """Boundary gaps versus operator gaps over a family of pairs.

    pairs is a sequence of (cond1, cond2, alpha).  Returns the records and
    the fitted exponents of sup_gap and normal_gap against dtn_gap.
    """
    pairs = list(pairs)
    if not pairs:
        raise UsageError("empty pair family")
    records = []
    dtn_cache: dict[str, DtnOperator] = {}
    for cond1, cond2, alpha in pairs:
        for cond in (cond1, cond2):
            if _cid(cond) not in dtn_cache:
                dtn_cache[_cid(cond)] = assemble_dtn(mesh, cond)
        sup_gap, normal_gap = boundary_gaps(mesh, cond1, cond2, n_boundary_samples)
        gap = dtn_diff_norm(basis, dtn_cache[_cid(cond1)], dtn_cache[_cid(cond2)])
        records.append(StabilityRecord(
            pair_id=f"{_cid(cond1)}|{_cid(cond2)}",
            sup_gap=sup_gap, normal_gap=normal_gap, dtn_gap=gap,
            h=mesh.h, alpha=alpha))
    fits: dict[str, ExponentFit | None] = {"sup_vs_dtn": None, "normal_vs_dtn": None}
    pos = [r for r in records if r.dtn_gap > 0 and r.sup_gap > 0]
    if len(pos) >= 3:
        fits["sup_vs_dtn"] = fit_exponent([r.dtn_gap for r in pos],
                                          [r.sup_gap for r in pos])
    posn = [r for r in records if r.dtn_gap > 0 and r.normal_gap > 0]
    if len(posn) >= 3:
        fits["normal_vs_dtn"] = fit_exponent([r.dtn_gap for r in posn],
                                             [r.normal_gap for r in posn])
    return records, fits
