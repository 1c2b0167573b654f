"""Closed-form singular kernels and pole-energy quadrature.

The free-space fundamental solution of the Laplacian, its anisotropic
counterpart for div(sigma A grad .), and the pole energies that normalize
the singular boundary estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EllipticityError, GeometryError, PolePlacementError
from .fem import Conductivity, p1_gradients
from .geometry import (Mesh, Probe, boundary_distance, exterior_distance,
                       project_to_boundary, tet_centroids)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def fundamental_h(x: np.ndarray, y: np.ndarray, n: int = 3):
    """Fundamental solution H(x, y) of the Laplacian and its x-gradient.

    H = |x-y|^(2-n) / ((n-2) |S^(n-1)|); for n = 3 this is 1/(4 pi |x-y|).
    Vectorized over x; x may be (3,) or (N, 3) for n = 3 (general n only
    enters through the prefactors, points stay three-dimensional).
    """
    if n < 3:
        raise ValueError("dimension must be >= 3")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    d = x - y[None, :]
    r = np.linalg.norm(d, axis=1)
    if np.any(r == 0.0):
        raise GeometryError("fundamental solution evaluated at its pole")
    omega = sphere_area(n)
    value = r ** (2 - n) / ((n - 2) * omega)
    grad = -(r ** (-n) / omega)[:, None] * d
    return value, grad


def anisotropic_parametrix(x: np.ndarray, y: np.ndarray,
                           cond: Conductivity, n: int = 3) -> np.ndarray:
    """Canonical parametrix of div(sigma A grad .) frozen at the pole y.

    H_sigma(x,y) = [A^(-1)(y)(x-y).(x-y)]^((2-n)/2)
                   / ((n-2)|S^(n-1)| sigma(y) det A(y)^(1/2)).
    Reduces to H(x,y)/sigma(y) when A = I.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(1, 3)
    a = cond.matrix_a(y)[0] if cond.matrix_a is not None else np.eye(3)
    w = np.linalg.eigvalsh(a)
    if w.min() <= 0:
        raise EllipticityError(f"A(y) not positive definite, eigs {w}")
    ainv = np.linalg.inv(a)
    d = x - y
    q = np.einsum("ni,ij,nj->n", d, ainv, d)
    if np.any(q == 0.0):
        raise GeometryError("parametrix evaluated at its pole")
    sig_y = float(cond.sigma(y)[0])
    denom = (n - 2) * sphere_area(n) * sig_y * math.sqrt(np.linalg.det(a))
    return q ** ((2 - n) / 2.0) / denom


def anisotropic_parametrix_gradient(x: np.ndarray, y: np.ndarray,
                                    cond: Conductivity, n: int = 3) -> np.ndarray:
    """x-gradient of the canonical parametrix."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(1, 3)
    a = cond.matrix_a(y)[0] if cond.matrix_a is not None else np.eye(3)
    ainv = np.linalg.inv(a)
    d = x - y
    q = np.einsum("ni,ij,nj->n", d, ainv, d)
    sig_y = float(cond.sigma(y)[0])
    denom = sphere_area(n) * sig_y * math.sqrt(np.linalg.det(a))
    return -(q ** (-n / 2.0))[:, None] * (d @ ainv.T) / denom


def gradient_product_bounds(cond1: Conductivity, cond2: Conductivity,
                            y: np.ndarray, samples: np.ndarray, n: int = 3):
    """Two-sided comparison of A grad H_1 . grad H_2 with |x-y|^(2-2n).

    Returns (c, rmin, rmax): the sampled ratios lie in [rmin, rmax] and
    c = max(rmax, 1/rmin) is the achieved two-sided constant.
    """
    samples = np.atleast_2d(samples)
    g1 = anisotropic_parametrix_gradient(samples, y, cond1, n)
    g2 = anisotropic_parametrix_gradient(samples, y, cond2, n)
    a_at = (cond1.matrix_a(samples) if cond1.matrix_a is not None
            else np.broadcast_to(np.eye(3), (len(samples), 3, 3)))
    prod = np.einsum("ni,nij,nj->n", g1, a_at, g2)
    r = np.linalg.norm(samples - np.asarray(y, float)[None, :], axis=1)
    ratio = prod / r ** (2 - 2 * n)
    rmin, rmax = float(ratio.min()), float(ratio.max())
    if rmin <= 0:
        raise EllipticityError("gradient product not uniformly positive")
    return max(rmax, 1.0 / rmin), rmin, rmax


@dataclass(frozen=True)
class PoleConfig:
    """Exterior pole attached to a probe at offset delta."""

    y: np.ndarray
    probe: Probe
    delta: float

    def __post_init__(self):
        self.y.setflags(write=False)


def pole_from_probe(probe: Probe, delta: float, mesh: Mesh | None = None) -> PoleConfig:
    """Place the pole at x0 + (delta/2) xi_minus and certify exteriority.

    Unlike the cone-pair construction this only requires the pole to keep
    the exterior-cone margin dist(y, closure) >= (delta/2) sin(theta),
    which holds for every delta when the exterior axis is the normal.
    """
    if delta <= 0:
        raise PolePlacementError(f"delta must be positive, got {delta}")
    y = probe.x0 + (delta / 2.0) * probe.xi_minus
    margin = (delta / 2.0) * math.sin(probe.theta)
    dist = _exterior_distance_tag(probe.domain_tag, y)
    if dist + 1e-12 < margin:
        raise PolePlacementError(
            f"pole {y} at exterior distance {dist:.3e} < margin {margin:.3e}")
    return PoleConfig(y=y, probe=probe, delta=delta)


def _exterior_distance_tag(tag: str, y: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    if tag == "cube":
        gap = np.maximum(np.maximum(-y, y - 1.0), 0.0)
        return float(np.linalg.norm(gap))
    return max(float(np.linalg.norm(y)) - 1.0, 0.0)


def pole_energy(mesh: Mesh, pole: PoleConfig, n: int = 3) -> float:
    """E_delta = integral over Omega of |grad H(., y_delta)|^2 by
    tet-centroid quadrature.  Finite because the pole is exterior."""
    if exterior_distance(mesh, pole.y)[0] <= 0:
        raise PolePlacementError(f"pole {pole.y} is not exterior to the domain")
    vols, _ = p1_gradients(mesh)
    cent = tet_centroids(mesh)
    _, grad = fundamental_h(cent, pole.y, n)
    return float(np.sum(vols * np.einsum("ti,ti->t", grad, grad)))


def near_pole_gradient_integral(mesh: Mesh, u: np.ndarray, pole: PoleConfig,
                                radius: float, n: int = 3) -> float:
    """integral over B(x0, radius) of grad u . grad H(., y_delta).

    u is a discrete field (typically the sigma-harmonic extension of the
    trace of H); the integral concentrates like delta^(2-n) as the pole
    approaches the boundary.
    """
    vols, grads = p1_gradients(mesh)
    cent = tet_centroids(mesh)
    gu = np.einsum("tlj,tl->tj", grads, u[mesh.tets])
    _, gh = fundamental_h(cent, pole.y, n)
    inside = np.linalg.norm(cent - pole.probe.x0[None, :], axis=1) < radius
    return float(np.sum(vols[inside]
                        * np.einsum("ti,ti->t", gu[inside], gh[inside])))


def boundary_taylor_margin(mesh: Mesh, f, grad_f, x0: np.ndarray, alpha: float,
                           holder_bound: float, samples: np.ndarray) -> float:
    """Margin of the collar Taylor inequality for a C^(1,alpha) field.

    For f with [grad f]_alpha <= holder_bound and inward-increasing normal
    derivative at x0, checks at each sample x in the projection collar:
        |d_nu f(x0)| dist(x, Gamma)
            <= f(x) - f(p(x)) + 3 holder_bound |x - x0|^(1+alpha).
    Returns the minimum slack (rhs - lhs); nonnegative means it holds.
    """
    x0 = np.asarray(x0, dtype=float)
    # normal at x0 from the analytic domain
    if mesh.domain_tag == "cube":
        on_low = np.abs(x0) < 1e-12
        on_high = np.abs(x0 - 1.0) < 1e-12
        axis = int(np.nonzero(on_low | on_high)[0][0])
        nu0 = np.zeros(3)
        nu0[axis] = 1.0 if on_high[axis] else -1.0
    else:
        nu0 = x0 / np.linalg.norm(x0)
    dn = float(np.asarray(grad_f(x0[None, :])).reshape(3) @ nu0)
    if dn >= 0:
        raise ValueError("predicate requires -d_nu f(x0) = |d_nu f(x0)| > 0")
    margin = np.inf
    for x in np.atleast_2d(samples):
        p, d, _ = project_to_boundary(mesh, x)
        lhs = abs(dn) * d
        rhs = (float(f(x[None, :])[0]) - float(f(p[None, :])[0])
               + 3.0 * holder_bound * np.linalg.norm(x - x0) ** (1 + alpha))
        margin = min(margin, rhs - lhs)
    return float(margin)
