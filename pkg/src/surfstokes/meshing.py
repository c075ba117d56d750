"""Polyhedral base meshes and degree-k curved surface meshes.

The base mesh is a closed, consistently oriented triangulation with
vertices on the exact surface.  The curved mesh attaches to each
triangle a degree-k polynomial map from the reference triangle,
interpolating the closest-point projection of the affine element at
the equispaced degree-k lattice.  Shared-edge lattice points are
sampled in the canonical (low global vertex -> high global vertex)
direction so adjacent element maps agree exactly on edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateElement
from .reference import LOCAL_EDGES, LagrangeBasis, triangle_nodes

_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0

ICOSAHEDRON_VERTICES = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
], dtype=float)

ICOSAHEDRON_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=int)


@dataclass
class BaseMesh:
    """Closed oriented triangulation with global edge bookkeeping.

    edges hold vertex pairs (lo, hi) with lo < hi.  tri_edges[t, m] is
    the global edge id of local edge m in LOCAL_EDGES order, and
    tri_edge_reversed[t, m] is True when the local traversal direction
    opposes the canonical lo -> hi direction.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(init=False)
    tri_edges: np.ndarray = field(init=False)
    tri_edge_reversed: np.ndarray = field(init=False)
    edge_tris: np.ndarray = field(init=False)
    edge_local: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        tris = self.triangles
        pairs = {}
        tri_edges = np.empty((len(tris), 3), dtype=int)
        reversed_ = np.empty((len(tris), 3), dtype=bool)
        for t, tri in enumerate(tris):
            for m, (i, j) in enumerate(LOCAL_EDGES):
                a, b = int(tri[i]), int(tri[j])
                key = (min(a, b), max(a, b))
                e = pairs.setdefault(key, len(pairs))
                tri_edges[t, m] = e
                reversed_[t, m] = a > b
        self.edges = np.array(sorted(pairs, key=pairs.get), dtype=int)
        self.tri_edges = tri_edges
        self.tri_edge_reversed = reversed_
        n_e = len(self.edges)
        self.edge_tris = np.full((n_e, 2), -1, dtype=int)
        self.edge_local = np.full((n_e, 2), -1, dtype=int)
        for t in range(len(tris)):
            for m in range(3):
                e = tri_edges[t, m]
                slot = 0 if self.edge_tris[e, 0] < 0 else 1
                self.edge_tris[e, slot] = t
                self.edge_local[e, slot] = m

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def is_closed_manifold(self) -> bool:
        return bool(np.all(self.edge_tris >= 0))

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    def triangle_diameters(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        e01 = np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        e02 = np.linalg.norm(v[:, 2] - v[:, 0], axis=1)
        e12 = np.linalg.norm(v[:, 2] - v[:, 1], axis=1)
        return np.max(np.stack([e01, e02, e12]), axis=0)


def _orient_outward(vertices, triangles, oracle):
    cent = vertices[triangles].mean(axis=1)
    _, _, nu = oracle.project(cent, check_tube=False)
    v = vertices[triangles]
    nrm = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = np.einsum("ti,ti->t", nrm, nu) < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def _validate_closed(mesh: BaseMesh):
    if not mesh.is_closed_manifold():
        raise ValueError("mesh is not a closed 2-manifold (boundary edges)")
    if mesh.euler_characteristic() != 2:
        raise ValueError(
            f"Euler characteristic {mesh.euler_characteristic()} != 2")


def split_triangles(vertices, triangles, n: int):
    """n-way uniform split of every triangle (n^2 children each).

    Lattice points on shared edges are deduplicated through the global
    edge orientation, so the result is again a conforming mesh.
    """
    if n < 2:
        return np.asarray(vertices, dtype=float), np.asarray(triangles)
    verts = list(map(tuple, np.asarray(vertices, dtype=float)))
    edge_pts = {}

    def edge_point(a, b, i):
        # i-th of n-1 interior points, counted from the lower vertex id
        lo, hi = (a, b) if a < b else (b, a)
        idx = i if a < b else n - i
        key = (lo, hi, idx)
        if key not in edge_pts:
            t = idx / n
            edge_pts[key] = len(verts)
            verts.append(tuple((1 - t) * np.asarray(verts[lo])
                               + t * np.asarray(verts[hi])))
        return edge_pts[key]

    new_tris = []
    for a, b, c in np.asarray(triangles):
        A, B, C = (np.asarray(verts[v]) for v in (a, b, c))
        grid = {}
        for i in range(n + 1):
            for j in range(n + 1 - i):
                if (i, j) == (0, 0):
                    grid[i, j] = a
                elif (i, j) == (n, 0):
                    grid[i, j] = b
                elif (i, j) == (0, n):
                    grid[i, j] = c
                elif j == 0:
                    grid[i, j] = edge_point(a, b, i)
                elif i == 0:
                    grid[i, j] = edge_point(a, c, j)
                elif i + j == n:
                    grid[i, j] = edge_point(b, c, j)
                else:
                    grid[i, j] = len(verts)
                    verts.append(tuple(A + (i / n) * (B - A)
                                       + (j / n) * (C - A)))
        for i in range(n):
            for j in range(n - i):
                new_tris.append([grid[i, j], grid[i + 1, j], grid[i, j + 1]])
                if i + j < n - 1:
                    new_tris.append([grid[i + 1, j], grid[i + 1, j + 1],
                                     grid[i, j + 1]])
    return np.array(verts, dtype=float), np.array(new_tris, dtype=int)


def subdivide(vertices, triangles):
    """One 4-way midpoint refinement; returns (vertices, triangles)."""
    verts = list(map(tuple, vertices))
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            midpoint[key] = len(verts)
            verts.append(tuple(0.5 * (vertices[a] + vertices[b])))
        return midpoint[key]

    new_tris = []
    for a, b, c in triangles:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_tris += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return np.array(verts, dtype=float), np.array(new_tris, dtype=int)


def build_icosphere_base(oracle, level: int) -> BaseMesh:
    """Icosahedron subdivided `level` times, vertices projected to the surface."""
    if level < 0:
        raise ValueError("level must be >= 0")
    verts = ICOSAHEDRON_VERTICES / np.linalg.norm(
        ICOSAHEDRON_VERTICES, axis=1, keepdims=True)
    tris = ICOSAHEDRON_FACES
    verts, _, _ = oracle.project(verts, check_tube=False)
    for _ in range(level):
        verts, tris = subdivide(verts, tris)
        verts, _, _ = oracle.project(verts, check_tube=False)
    tris = _orient_outward(verts, tris, oracle)
    mesh = BaseMesh(verts, tris)
    _validate_closed(mesh)
    return mesh


def base_mesh_from_off(path, oracle) -> BaseMesh:
    """Read an ASCII OFF triangle mesh and project its vertices to the surface."""
    verts, tris = read_off(path)
    verts, _, _ = oracle.project(verts, check_tube=False)
    tris = _orient_outward(verts, tris, oracle)
    mesh = BaseMesh(verts, tris)
    _validate_closed(mesh)
    return mesh


def read_off(path):
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens += line.split()
    if not tokens or tokens[0] != "OFF":
        raise ValueError(f"{path}: missing OFF header")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4  # skip edge count
    verts = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    tris = np.empty((nf, 3), dtype=int)
    for f in range(nf):
        cnt = int(tokens[pos])
        if cnt != 3:
            raise ValueError(f"{path}: only triangles supported, got {cnt}-gon")
        tris[f] = [int(v) for v in tokens[pos + 1:pos + 4]]
        pos += 4
    return verts, tris


def write_off(path, mesh: BaseMesh):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def assign_edge_slots(mesh: BaseMesh, per_edge: int):
    """Global index of each canonical edge slot, shape (T, 3, per_edge).

    Canonical slot s on local edge m sits at the s-th symmetric parameter
    measured from the lower local vertex; the global index counts slots
    from the lower *global* vertex, so reversed edges flip the order.
    """
    T = mesh.n_triangles
    out = np.empty((T, 3, per_edge), dtype=int)
    fwd = np.arange(per_edge)
    for m in range(3):
        base = mesh.tri_edges[:, m][:, None] * per_edge
        order = np.where(mesh.tri_edge_reversed[:, m][:, None],
                         per_edge - 1 - fwd[None, :], fwd[None, :])
        out[:, m, :] = base + order
    return out


@dataclass
class HighOrderMesh:
    """Degree-k curved triangulation: one polynomial map per base triangle."""

    base: BaseMesh
    k: int
    control_points: np.ndarray  # (T, n_geo, 3), canonical lattice order
    geo_basis: LagrangeBasis
    h_per_tri: np.ndarray = field(init=False)

    def __post_init__(self):
        self.h_per_tri = self.base.triangle_diameters()

    @property
    def n_triangles(self) -> int:
        return self.base.n_triangles

    @property
    def h_max(self) -> float:
        return float(self.h_per_tri.max())

    @property
    def h_min(self) -> float:
        return float(self.h_per_tri.min())

    def eval_maps(self, ref_pts, elems=None, nderiv: int = 1):
        """Map data at reference points for a batch of elements.

        Returns a dict with 'x' (T, Q, 3) and, per nderiv, 'J' (T, Q, 3, 2)
        and 'dJ' (T, Q, 3, 2, 2) where dJ[..., b] is the derivative of J in
        reference direction b.
        """
        ref_pts = np.atleast_2d(np.asarray(ref_pts, dtype=float))
        pts = self.control_points if elems is None else self.control_points[elems]
        phi = self.geo_basis.eval(ref_pts)
        out = {"x": np.einsum("tgc,gq->tqc", pts, phi)}
        if nderiv >= 1:
            dphi = self.geo_basis.grad(ref_pts)
            out["J"] = np.einsum("tgc,gqa->tqca", pts, dphi)
        if nderiv >= 2:
            hphi = self.geo_basis.hess(ref_pts)
            out["dJ"] = np.einsum("tgc,gqab->tqcab", pts, hphi)
        return out


def build_high_order_mesh(base: BaseMesh, oracle, k: int) -> HighOrderMesh:
    """Interpolate the closest-point projection at the degree-k lattice."""
    if k < 1:
        raise ValueError("geometry degree must be >= 1")
    lattice = triangle_nodes(k)
    basis = LagrangeBasis(k, lattice)
    T, V, E = base.n_triangles, base.n_vertices, base.n_edges
    n_geo = len(lattice)
    per_edge = k - 1
    n_int = n_geo - 3 - 3 * per_edge

    ctrl = np.empty((T, n_geo, 3))
    ctrl[:, :3, :] = base.vertices[base.triangles]
    if per_edge:
        params = np.arange(1, k) / k
        lo = base.vertices[base.edges[:, 0]]
        hi = base.vertices[base.edges[:, 1]]
        pts = lo[:, None, :] + params[None, :, None] * (hi - lo)[:, None, :]
        proj, _, _ = oracle.project(pts.reshape(-1, 3), check_tube=False)
        edge_pts = proj.reshape(E * per_edge, 3)
        slots = assign_edge_slots(base, per_edge).reshape(T, 3 * per_edge)
        ctrl[:, 3:3 + 3 * per_edge, :] = edge_pts[slots]
    if n_int:
        interior = lattice[3 + 3 * per_edge:]
        v = base.vertices[base.triangles]
        flat = (v[:, 0][:, None, :]
                + interior[None, :, 0:1] * (v[:, 1] - v[:, 0])[:, None, :]
                + interior[None, :, 1:2] * (v[:, 2] - v[:, 0])[:, None, :])
        proj, _, _ = oracle.project(flat.reshape(-1, 3), check_tube=False)
        ctrl[:, 3 + 3 * per_edge:, :] = proj.reshape(T, n_int, 3)

    mesh = HighOrderMesh(base=base, k=k, control_points=ctrl, geo_basis=basis)
    _check_nondegenerate(mesh)
    return mesh


def _check_nondegenerate(mesh: HighOrderMesh):
    sample = np.vstack([triangle_nodes(max(2 * mesh.k, 2)),
                        [[1 / 3, 1 / 3]]])
    data = mesh.eval_maps(sample, nderiv=1)
    J = data["J"]
    G = np.einsum("tqca,tqcb->tqab", J, J)
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    if np.any(det <= 0):
        bad = int(np.argwhere(np.any(det <= 0, axis=1))[0, 0])
        raise DegenerateElement(f"non-positive metric on element {bad}")


def element_map_eval(mesh: HighOrderMesh, K: int, xhat):
    """Point, Jacobian, metric and area factor of one element map."""
    data = mesh.eval_maps(np.asarray(xhat, dtype=float).reshape(1, 2),
                          elems=np.array([K]), nderiv=1)
    point = data["x"][0, 0]
    J = data["J"][0, 0]
    G = J.T @ J
    sqrt_det_g = float(np.sqrt(np.linalg.det(G)))
    return point, J, G, sqrt_det_g


def mesh_statistics(mesh: HighOrderMesh) -> dict:
    """Mesh size and shape-regularity summary."""
    sample = np.vstack([triangle_nodes(2), [[1 / 3, 1 / 3]]])
    data = mesh.eval_maps(sample, nderiv=1)
    J = data["J"]
    G = np.einsum("tqca,tqcb->tqab", J, J)
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    ratio = det / mesh.h_per_tri[:, None]**4
    return {
        "h_max": mesh.h_max,
        "h_min": mesh.h_min,
        "n_triangles": mesh.n_triangles,
        "shape_regularity_min": float(ratio.min()),
        "shape_regularity_max": float(ratio.max()),
    }
