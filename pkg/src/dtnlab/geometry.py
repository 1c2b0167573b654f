"""Tetrahedral meshes of the model domains and exact boundary geometry.

Two domains are supported: the unit cube [0,1]^3 and the unit ball.  Both
come with closed-form boundary projection, distance and outward normals,
plus the interior/exterior cone construction used to place singular probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousProjectionError,
    ConeViolationError,
    GeometryError,
    InvalidResolutionError,
)

# Axis-path permutations of a cube cell and their parities.  Each cell is
# split into the six tetrahedra spanned by lattice paths from the low corner
# to the high corner; odd permutations need a vertex swap to keep a positive
# orientation.
_KUHN_PERMS = [
    ((0, 1, 2), +1),
    ((0, 2, 1), -1),
    ((1, 0, 2), -1),
    ((1, 2, 0), +1),
    ((2, 0, 1), +1),
    ((2, 1, 0), -1),
]

_FACE_LOCAL = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])


@dataclass(frozen=True)
class Mesh:
    """Conforming tetrahedral mesh with boundary face structure.

    vertices : (nv, 3) float array
    tets : (nt, 4) int array, positively oriented
    boundary_faces : (nf, 3) int array, ordered so the right-hand normal
        points outward
    boundary_normals : (nf, 3) unit outward normals
    boundary_vertices : sorted int array of vertex ids lying on the boundary
    domain_tag : "cube" or "ball"
    h : maximum edge length
    """

    vertices: np.ndarray
    tets: np.ndarray
    boundary_faces: np.ndarray
    boundary_normals: np.ndarray
    boundary_vertices: np.ndarray
    domain_tag: str
    h: float

    def __post_init__(self):
        for arr in (self.vertices, self.tets, self.boundary_faces,
                    self.boundary_normals, self.boundary_vertices):
            arr.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_tets(self) -> int:
        return self.tets.shape[0]

    @property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.num_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.nonzero(mask)[0]


@dataclass(frozen=True)
class Probe:
    """Boundary point with its cone axes.

    The interior cone around ``xi_plus`` of half-angle ``theta`` and radius
    ``R`` lies in the domain; the mirror cone around ``xi_minus`` lies
    outside the closed domain.
    """

    x0: np.ndarray
    nu: np.ndarray
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    R: float
    theta: float
    domain_tag: str

    def __post_init__(self):
        self.x0.setflags(write=False)
        self.nu.setflags(write=False)
        self.xi_plus.setflags(write=False)
        self.xi_minus.setflags(write=False)


def _tet_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    e = p[:, 1:] - p[:, :1]
    return np.einsum("ti,ti->t", e[:, 0], np.cross(e[:, 1], e[:, 2])) / 6.0


def tet_volumes(mesh: Mesh) -> np.ndarray:
    return _tet_volumes(mesh.vertices, mesh.tets)


def tet_centroids(mesh: Mesh) -> np.ndarray:
    return mesh.vertices[mesh.tets].mean(axis=1)


def _max_edge(vertices: np.ndarray, tets: np.ndarray) -> float:
    p = vertices[tets]
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    h = 0.0
    for a, b in pairs:
        d = np.linalg.norm(p[:, a] - p[:, b], axis=1)
        h = max(h, float(d.max()))
    return h


def _extract_boundary(vertices: np.ndarray, tets: np.ndarray):
    """Faces occurring in exactly one tet, ordered with outward normals."""
    nt = tets.shape[0]
    faces = tets[:, _FACE_LOCAL]              # (nt, 4, 3)
    faces = faces.reshape(-1, 3)
    opp = tets[:, [0, 1, 2, 3]].reshape(-1)   # vertex opposite each face
    key = np.sort(faces, axis=1)
    order = np.lexsort((key[:, 2], key[:, 1], key[:, 0]))
    key_sorted = key[order]
    new_group = np.ones(len(order), dtype=bool)
    new_group[1:] = np.any(key_sorted[1:] != key_sorted[:-1], axis=1)
    group_id = np.cumsum(new_group) - 1
    counts = np.bincount(group_id)
    single = counts[group_id] == 1
    bidx = order[single]

    bfaces = faces[bidx]
    bopp = opp[bidx]
    p = vertices[bfaces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    to_opp = vertices[bopp] - p[:, 0]
    inward = np.einsum("fi,fi->f", n, to_opp) > 0
    bfaces[inward] = bfaces[inward][:, [0, 2, 1]]
    p = vertices[bfaces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    n /= np.linalg.norm(n, axis=1)[:, None]

    # canonical deterministic ordering by sorted vertex triple
    key = np.sort(bfaces, axis=1)
    order = np.lexsort((key[:, 2], key[:, 1], key[:, 0]))
    bfaces = bfaces[order]
    n = n[order]
    bverts = np.unique(bfaces)
    return bfaces, n, bverts


def _assemble_mesh(vertices, tets, domain_tag) -> Mesh:
    vols = _tet_volumes(vertices, tets)
    if np.any(vols <= 0):
        raise GeometryError(
            f"{int(np.sum(vols <= 0))} tetrahedra have non-positive volume")
    bfaces, normals, bverts = _extract_boundary(vertices, tets)
    return Mesh(
        vertices=vertices,
        tets=tets,
        boundary_faces=bfaces,
        boundary_normals=normals,
        boundary_vertices=bverts,
        domain_tag=domain_tag,
        h=_max_edge(vertices, tets),
    )


def _kuhn_lattice(m: int):
    """Vertices and tets of the Kuhn split of the unit lattice [0,m]^3."""
    idx = np.arange(m + 1)
    ii, jj, kk = np.meshgrid(idx, idx, idx, indexing="ij")
    verts = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1).astype(float)

    def vid(i, j, k):
        return (i * (m + 1) + j) * (m + 1) + k

    c = np.arange(m)
    ci, cj, ck = np.meshgrid(c, c, c, indexing="ij")
    ci, cj, ck = ci.ravel(), cj.ravel(), ck.ravel()
    corner = np.stack([ci, cj, ck], axis=1)

    tets = []
    eye = np.eye(3, dtype=int)
    for perm, parity in _KUHN_PERMS:
        v0 = corner
        v1 = v0 + eye[perm[0]]
        v2 = v1 + eye[perm[1]]
        v3 = v2 + eye[perm[2]]
        quad = [vid(v[:, 0], v[:, 1], v[:, 2]) for v in (v0, v1, v2, v3)]
        if parity < 0:
            quad = [quad[0], quad[2], quad[1], quad[3]]
        tets.append(np.stack(quad, axis=1))
    tets = np.concatenate(tets, axis=0)
    # deterministic order: sort by (cell, permutation) encoded via row content
    order = np.lexsort(tuple(tets[:, c] for c in (3, 2, 1, 0)))
    return verts, tets[order]


def build_cube_mesh(m: int) -> Mesh:
    """Structured mesh of the unit cube with 6*m^3 tets and h = sqrt(3)/m."""
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise InvalidResolutionError(f"cube subdivisions must be >= 2, got {m}")
    verts, tets = _kuhn_lattice(m)
    verts /= m
    return _assemble_mesh(verts, tets, "cube")


def _sphere_triangulation(m: int):
    """Triangulated unit sphere from the cube-surface grid.

    The boundary grid of a [-1,1]^3 cube mesh is mapped to the sphere by
    the smooth per-coordinate area-balancing map, which avoids the corner
    shearing of a plain radial projection.
    """
    verts, tets = _kuhn_lattice(m)
    verts = 2.0 * verts / m - 1.0
    bfaces, _, bverts = _extract_boundary(verts, tets)
    g2l = np.full(len(verts), -1, dtype=np.int64)
    g2l[bverts] = np.arange(len(bverts))
    tris = g2l[bfaces]
    v = verts[bverts]
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    px = x * np.sqrt(np.maximum(1 - y**2 / 2 - z**2 / 2 + y**2 * z**2 / 3, 0))
    py = y * np.sqrt(np.maximum(1 - z**2 / 2 - x**2 / 2 + z**2 * x**2 / 3, 0))
    pz = z * np.sqrt(np.maximum(1 - x**2 / 2 - y**2 / 2 + x**2 * y**2 / 3, 0))
    p = np.stack([px, py, pz], axis=1)
    p /= np.linalg.norm(p, axis=1)[:, None]
    return p, tris


def build_ball_mesh(level: int, grade: float = 0.45) -> Mesh:
    """Mesh of the unit ball from radially stacked sphere layers.

    The sphere triangulation (cube-surface grid with 2*level cells per
    axis) is copied onto concentric layers r_j = (1+grade) t - grade t^3,
    t = j/n_r, so the radial spacing shrinks toward the boundary where the
    harmonics r^l Y_l are steep.  Prisms between layers are split into
    three tets by the index-staircase rule (conforming); the innermost
    layer is coned to the center.  Boundary vertices sit on the unit
    sphere up to roundoff.
    """
    if not isinstance(level, (int, np.integer)) or level < 1:
        raise InvalidResolutionError(f"ball level must be >= 1, got {level}")
    if not 0.0 <= grade < 0.5:
        raise InvalidResolutionError("grade must lie in [0, 1/2) for monotone layers")
    m = 2 * level
    sphere, tris = _sphere_triangulation(m)
    nb = len(sphere)
    nr = max(3, int(level))
    t = np.arange(1, nr + 1) / nr
    radii = (1 + grade) * t - grade * t**3
    verts = np.concatenate([np.zeros((1, 3))]
                           + [r * sphere for r in radii], axis=0)

    def vid(layer, s):
        return 1 + (layer - 1) * nb + s

    ts_ = np.sort(tris, axis=1)
    a, b, c = ts_[:, 0], ts_[:, 1], ts_[:, 2]
    blocks = [np.stack([np.zeros(len(ts_), dtype=np.int64),
                        vid(1, a), vid(1, b), vid(1, c)], axis=1)]
    for j in range(1, nr):
        ab, bb, cb = vid(j, a), vid(j, b), vid(j, c)
        at, bt, ct = vid(j + 1, a), vid(j + 1, b), vid(j + 1, c)
        blocks.append(np.stack([ab, bb, cb, at], axis=1))
        blocks.append(np.stack([bb, cb, at, bt], axis=1))
        blocks.append(np.stack([cb, at, bt, ct], axis=1))
    tets = np.concatenate(blocks, axis=0).astype(np.int64)
    p = verts[tets]
    e = p[:, 1:] - p[:, :1]
    det = np.einsum("ti,ti->t", e[:, 0], np.cross(e[:, 1], e[:, 2]))
    tets[det < 0] = tets[det < 0][:, [0, 2, 1, 3]]
    return _assemble_mesh(verts, tets, "ball")


# ---------------------------------------------------------------------------
# analytic boundary geometry of the model domains


def boundary_distance(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """dist(x, Gamma) for points inside the domain (vectorized)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if mesh.domain_tag == "cube":
        d = np.minimum(x, 1.0 - x).min(axis=1)
    else:
        d = 1.0 - np.linalg.norm(x, axis=1)
    return d


def contains(mesh: Mesh, x: np.ndarray, strict: bool = True) -> np.ndarray:
    """Membership test against the analytic domain (not the mesh hull)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if mesh.domain_tag == "cube":
        if strict:
            return np.all((x > 0.0) & (x < 1.0), axis=1)
        return np.all((x >= 0.0) & (x <= 1.0), axis=1)
    r = np.linalg.norm(x, axis=1)
    return r < 1.0 if strict else r <= 1.0


def exterior_distance(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """dist(x, closure of the domain), zero for interior points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if mesh.domain_tag == "cube":
        gap = np.maximum(np.maximum(-x, x - 1.0), 0.0)
        return np.linalg.norm(gap, axis=1)
    return np.maximum(np.linalg.norm(x, axis=1) - 1.0, 0.0)


def project_to_boundary(mesh: Mesh, x: np.ndarray, tol: float = 1e-12):
    """Nearest boundary point, distance and outward normal at it.

    Raises AmbiguousProjectionError when the nearest point is not unique
    (cube: two faces equidistant; ball: the center).
    """
    x = np.asarray(x, dtype=float).reshape(3)
    if mesh.domain_tag == "cube":
        if np.any(x <= 0.0) or np.any(x >= 1.0):
            raise GeometryError(f"point {x} is not interior to the cube")
        gaps = np.concatenate([x, 1.0 - x])
        order = np.argsort(gaps, kind="stable")
        if gaps[order[1]] - gaps[order[0]] < tol:
            raise AmbiguousProjectionError(
                f"point {x} is equidistant to two faces")
        f = order[0]
        axis, side = f % 3, f // 3
        p = x.copy()
        p[axis] = float(side)
        nu = np.zeros(3)
        nu[axis] = 1.0 if side == 1 else -1.0
        return p, float(gaps[f]), nu
    r = float(np.linalg.norm(x))
    if r < tol:
        raise AmbiguousProjectionError("center of the ball has no unique projection")
    if r >= 1.0:
        raise GeometryError(f"point {x} is not interior to the ball")
    p = x / r
    return p, 1.0 - r, p.copy()


# ---------------------------------------------------------------------------
# probes and cones


def cube_face_probe(x0, theta: float = math.pi / 4, r_cap: float = 0.25) -> Probe:
    """Probe at a point in the interior of a cube face."""
    x0 = np.asarray(x0, dtype=float).reshape(3)
    on_low = np.abs(x0) < 1e-12
    on_high = np.abs(x0 - 1.0) < 1e-12
    face_hits = int(on_low.sum() + on_high.sum())
    if face_hits != 1:
        raise GeometryError(
            f"{x0} must lie on exactly one open cube face, hits {face_hits}")
    axis = int(np.nonzero(on_low | on_high)[0][0])
    side = 1.0 if on_high[axis] else 0.0
    nu = np.zeros(3)
    nu[axis] = 1.0 if side == 1.0 else -1.0
    others = [a for a in range(3) if a != axis]
    edge_dist = min(min(x0[a], 1.0 - x0[a]) for a in others)
    if edge_dist <= 0:
        raise GeometryError(f"{x0} lies on a cube edge")
    R = min(edge_dist, r_cap)
    return Probe(x0=x0, nu=nu, xi_plus=-nu, xi_minus=nu.copy(),
                 R=R, theta=theta, domain_tag="cube")


def ball_probe(x0, theta: float = math.pi / 4, r_cap: float = 0.25) -> Probe:
    x0 = np.asarray(x0, dtype=float).reshape(3)
    r = np.linalg.norm(x0)
    if abs(r - 1.0) > 1e-12:
        raise GeometryError(f"{x0} is not on the unit sphere")
    nu = x0 / r
    return Probe(x0=x0, nu=nu, xi_plus=-nu, xi_minus=nu.copy(),
                 R=r_cap, theta=theta, domain_tag="ball")


def cone_points(probe: Probe, delta: float):
    """Interior/exterior pole pair at depth delta/2 along the cone axes."""
    if not (0.0 < delta < probe.R / 2):
        raise ConeViolationError(
            f"delta={delta} outside (0, R/2) with R={probe.R}")
    x_delta = probe.x0 + (delta / 2.0) * probe.xi_plus
    y_delta = probe.x0 + (delta / 2.0) * probe.xi_minus
    return x_delta, y_delta


def cone_samples(probe: Probe, sign: int, n: int, rng: np.random.Generator):
    """Random points of the interior (+1) or exterior (-1) cone."""
    axis = probe.xi_plus if sign > 0 else probe.xi_minus
    r = probe.R * rng.uniform(0.05, 0.999, size=n)
    u = rng.uniform(math.cos(probe.theta) + 1e-9, 1.0, size=n)
    phi = rng.uniform(0.0, 2 * math.pi, size=n)
    # orthonormal frame around the axis
    a = np.array([1.0, 0.0, 0.0])
    if abs(axis @ a) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(axis, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(axis, t1)
    s = np.sqrt(1.0 - u**2)
    dirs = (u[:, None] * axis[None, :]
            + (s * np.cos(phi))[:, None] * t1[None, :]
            + (s * np.sin(phi))[:, None] * t2[None, :])
    return probe.x0[None, :] + r[:, None] * dirs


# ---------------------------------------------------------------------------
# plain-text mesh exchange format


def save_mesh(mesh: Mesh, path) -> None:
    """Write the documented plain-text mesh format (see README)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("dtnlab-mesh 1\n")
        fh.write(f"domain {mesh.domain_tag}\n")
        fh.write(f"vertices {mesh.num_vertices}\n")
        for v in mesh.vertices:
            fh.write("%.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
        fh.write(f"tets {mesh.num_tets}\n")
        for t in mesh.tets:
            fh.write("%d %d %d %d\n" % tuple(t))
        fh.write(f"boundary_faces {len(mesh.boundary_faces)}\n")
        for f, n in zip(mesh.boundary_faces, mesh.boundary_normals):
            fh.write("%d %d %d %.17g %.17g %.17g\n"
                     % (f[0], f[1], f[2], n[0], n[1], n[2]))


def load_mesh(path) -> Mesh:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if header[:1] != ["dtnlab-mesh"]:
            raise GeometryError(f"{path} is not a dtnlab mesh file")
        tag = fh.readline().split()[1]
        nv = int(fh.readline().split()[1])
        verts = np.array([[float(w) for w in fh.readline().split()]
                          for _ in range(nv)])
        nt = int(fh.readline().split()[1])
        tets = np.array([[int(w) for w in fh.readline().split()]
                         for _ in range(nt)], dtype=np.int64)
        nf = int(fh.readline().split()[1])
        rows = [fh.readline().split() for _ in range(nf)]
    faces = np.array([[int(w) for w in r[:3]] for r in rows], dtype=np.int64)
    normals = np.array([[float(w) for w in r[3:]] for r in rows])
    bverts = np.unique(faces)
    return Mesh(vertices=verts, tets=tets, boundary_faces=faces,
                boundary_normals=normals, boundary_vertices=bverts,
                domain_tag=tag, h=_max_edge(verts, tets))
