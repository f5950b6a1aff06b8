"""Conforming triangulations of plane polygons.

Provides structured template meshes for rectilinear domains (squares,
L-shapes), ear-clipping plus refinement for general simple polygons,
uniform red refinement, corner-graded refinement by longest-edge
bisection, and the barycentric split of every triangle into three
quadrilaterals with their bilinear reference maps.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Polygon",
    "Mesh",
    "QuadSplit",
    "unit_square",
    "lshape",
    "triangulate",
    "refine_uniform",
    "refine_corner_graded",
    "quad_split",
    "max_diameter",
    "edge_lengths",
    "locate_points",
    "validate_mesh",
    "write_mesh",
    "read_mesh",
    "mesh_to_text",
    "mesh_from_text",
]

_MERGE_DECIMALS = 12


class MeshError(ValueError):
    """Raised for invalid geometry or broken mesh invariants."""


def _signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p, q, r, s) -> bool:
    """Proper crossing test for open segments pq and rs."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(r, s, p)
    d2 = orient(r, s, q)
    d3 = orient(p, q, r)
    d4 = orient(p, q, s)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given by counterclockwise vertices; the domain is its interior."""

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise MeshError("polygon needs at least 3 planar vertices")
        area = _signed_area(verts)
        if abs(area) < 1e-14:
            raise MeshError("polygon is degenerate (zero area)")
        if area < 0:
            verts = verts[::-1].copy()
        k = len(verts)
        for i in range(k):
            p, q = verts[i], verts[(i + 1) % k]
            if np.allclose(p, q):
                raise MeshError("polygon has a zero-length edge")
            for j in range(i + 1, k):
                if j == i or (j + 1) % k == i or (i + 1) % k == j:
                    continue
                r, s = verts[j], verts[(j + 1) % k]
                if _segments_cross(p, q, r, s):
                    raise MeshError("polygon is self-intersecting")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Crossing-number inclusion test, vectorized over points (n, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        verts = self.vertices
        inside = np.zeros(len(pts), dtype=bool)
        x, y = pts[:, 0], pts[:, 1]
        k = len(verts)
        for i in range(k):
            x1, y1 = verts[i]
            x2, y2 = verts[(i + 1) % k]
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < np.where(crosses, xint, np.inf))
        return inside


def unit_square() -> Polygon:
    return Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def lshape() -> Polygon:
    """(-1, 1)^2 with the quadrant [0, 1) x (-1, 0] removed; reentrant corner at the origin."""
    return Polygon(
        np.array(
            [
                [-1.0, -1.0],
                [0.0, -1.0],
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [-1.0, 1.0],
            ]
        )
    )


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation: nodes, CCW triangles, and boundary topology."""

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    boundary_edges: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


def _edge_counts(triangles: np.ndarray) -> dict:
    counts: dict = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    return counts


def _build_mesh(nodes: np.ndarray, triangles: np.ndarray) -> Mesh:
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    p = nodes[triangles]
    areas = 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    flip = areas < 0
    if np.any(flip):
        triangles = triangles.copy()
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        areas = np.abs(areas)
    if np.any(areas <= 1e-16):
        raise MeshError("degenerate triangle in mesh")
    counts = _edge_counts(triangles)
    boundary_edges = np.array(
        sorted(e for e, c in counts.items() if c == 1), dtype=np.int64
    ).reshape(-1, 2)
    if np.any(np.array(list(counts.values())) > 2):
        raise MeshError("edge shared by more than two triangles")
    boundary_nodes = np.unique(boundary_edges)
    nodes = nodes.copy()
    nodes.setflags(write=False)
    triangles.setflags(write=False)
    boundary_nodes.setflags(write=False)
    boundary_edges.setflags(write=False)
    return Mesh(nodes, triangles, boundary_nodes, boundary_edges)


def edge_lengths(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    e = np.stack(
        [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1
    )
    return np.sqrt(np.sum(e**2, axis=2))


def max_diameter(mesh: Mesh) -> float:
    return float(edge_lengths(mesh).max())


def _triangle_diameters(mesh: Mesh) -> np.ndarray:
    return edge_lengths(mesh).max(axis=1)


def _is_rectilinear(polygon: Polygon) -> bool:
    verts = polygon.vertices
    k = len(verts)
    for i in range(k):
        d = verts[(i + 1) % k] - verts[i]
        if abs(d[0]) > 1e-14 and abs(d[1]) > 1e-14:
            return False
    return True


def _grid_lines(coords: np.ndarray, step: float) -> np.ndarray:
    """Refine each interval between sorted corner coordinates into pieces <= step."""
    coords = np.unique(coords)
    lines = [coords[0]]
    for a, b in zip(coords[:-1], coords[1:]):
        n = max(1, int(np.ceil((b - a) / step - 1e-12)))
        lines.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.asarray(lines)


def _structured_rectilinear(polygon: Polygon, h_target: float) -> Mesh:
    # Cell diagonal must stay below h_target, so each axis pitch <= h/sqrt(2).
    step = h_target / np.sqrt(2.0)
    xs = _grid_lines(polygon.vertices[:, 0], step)
    ys = _grid_lines(polygon.vertices[:, 1], step)
    nx, ny = len(xs), len(ys)
    node_id = -np.ones((nx, ny), dtype=np.int64)
    nodes = []
    triangles = []
    centers_x = 0.5 * (xs[:-1, None] + xs[1:, None])
    centers_y = 0.5 * (ys[None, :-1] + ys[None, 1:])
    cx, cy = np.broadcast_arrays(centers_x, centers_y)
    keep = polygon.contains(np.column_stack([cx.ravel(), cy.ravel()])).reshape(cx.shape)

    def nid(i, j):
        if node_id[i, j] < 0:
            node_id[i, j] = len(nodes)
            nodes.append((xs[i], ys[j]))
        return node_id[i, j]

    for i in range(nx - 1):
        for j in range(ny - 1):
            if not keep[i, j]:
                continue
            n00, n10 = nid(i, j), nid(i + 1, j)
            n11, n01 = nid(i + 1, j + 1), nid(i, j + 1)
            triangles.append((n00, n10, n11))
            triangles.append((n00, n11, n01))
    if not triangles:
        raise MeshError("no cell center inside polygon; h_target too coarse?")
    return _build_mesh(np.asarray(nodes), np.asarray(triangles))


def _ear_clip(polygon: Polygon) -> np.ndarray:
    """Triangle fan of a simple polygon by ear clipping (indices into its vertices)."""
    verts = polygon.vertices
    idx = list(range(len(verts)))
    triangles = []

    def is_ear(i0, i1, i2):
        a, b, c = verts[i0], verts[i1], verts[i2]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if cross <= 1e-14:
            return False
        for j in idx:
            if j in (i0, i1, i2):
                continue
            p = verts[j]
            d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
            d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
            if d1 >= -1e-14 and d2 >= -1e-14 and d3 >= -1e-14:
                return False
        return True

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(verts) ** 2:
            raise MeshError("ear clipping failed; polygon may be degenerate")
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            if is_ear(i0, i1, i2):
                triangles.append((i0, i1, i2))
                idx.pop(k)
                break
    triangles.append(tuple(idx))
    return np.asarray(triangles, dtype=np.int64)


def triangulate(polygon: Polygon, h_target: float) -> Mesh:
    """Conforming mesh of the polygon with max triangle diameter <= h_target.

    Rectilinear polygons get a structured grid aligned with all corners;
    general polygons are ear-clipped and uniformly refined. Every polygon
    vertex appears as a mesh node.
    """
    if h_target <= 0:
        raise MeshError("h_target must be positive")
    if _is_rectilinear(polygon):
        return _structured_rectilinear(polygon, h_target)
    mesh = _build_mesh(polygon.vertices, _ear_clip(polygon))
    while max_diameter(mesh) > h_target:
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle is split into 4 via edge midpoints.

    Original nodes keep their indices and exact coordinates.
    """
    nodes = [tuple(p) for p in mesh.nodes]
    midpoint: dict = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            midpoint[key] = len(nodes)
            pa, pb = mesh.nodes[a], mesh.nodes[b]
            nodes.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
        return midpoint[key]

    triangles = []
    for v0, v1, v2 in mesh.triangles:
        m01, m12, m20 = mid(v0, v1), mid(v1, v2), mid(v2, v0)
        triangles.extend(
            [(v0, m01, m20), (v1, m12, m01), (v2, m20, m12), (m01, m12, m20)]
        )
    return _build_mesh(np.asarray(nodes), np.asarray(triangles))


def _longest_edge(tri, nodes) -> int:
    """Local index k of the edge (k, k+1) with maximal length; deterministic ties."""
    best, best_key = 0, None
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        d = nodes[a] - nodes[b]
        key = (float(d @ d), -min(a, b), -max(a, b))
        if best_key is None or key > best_key:
            best, best_key = k, key
    return best


def _bisect_conforming(mesh: Mesh, marked: np.ndarray) -> Mesh:
    """Longest-edge bisection of marked triangles with Rivara propagation."""
    nodes = [np.asarray(p, dtype=float) for p in mesh.nodes]
    tris: dict = {i: tuple(t) for i, t in enumerate(mesh.triangles)}
    next_id = len(tris)
    edge_map: dict = {}
    for i, t in tris.items():
        for k in range(3):
            key = (min(t[k], t[(k + 1) % 3]), max(t[k], t[(k + 1) % 3]))
            edge_map.setdefault(key, set()).add(i)
    midpoints: dict = {}

    def mid(a, b):
        nonlocal nodes
        key = (min(a, b), max(a, b))
        if key not in midpoints:
            midpoints[key] = len(nodes)
            nodes.append((nodes[a] + nodes[b]) / 2.0)
        return midpoints[key]

    def remove(i):
        t = tris.pop(i)
        for k in range(3):
            key = (min(t[k], t[(k + 1) % 3]), max(t[k], t[(k + 1) % 3]))
            edge_map[key].discard(i)

    def insert(t):
        nonlocal next_id
        i = next_id
        next_id += 1
        tris[i] = t
        for k in range(3):
            key = (min(t[k], t[(k + 1) % 3]), max(t[k], t[(k + 1) % 3]))
            edge_map.setdefault(key, set()).add(i)
        return i

    def split_across(i, edge_key):
        """Replace triangle i by its two halves across the given edge."""
        t = tris[i]
        a, b = edge_key
        c = [v for v in t if v not in edge_key][0]
        m = mid(a, b)
        remove(i)
        insert((c, a, m) if _ccw(nodes, c, a, m) else (c, m, a))
        insert((c, m, b) if _ccw(nodes, c, m, b) else (c, b, m))

    def _ccw(nds, i0, i1, i2):
        p0, p1, p2 = nds[i0], nds[i1], nds[i2]
        return (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (
            p2[0] - p0[0]
        ) > 0

    def refine(i, depth=0):
        if depth > 200:
            raise MeshError("bisection propagation did not terminate")
        if i not in tris:
            return
        t = tris[i]
        k = _longest_edge(t, nodes)
        a, b = t[k], t[(k + 1) % 3]
        key = (min(a, b), max(a, b))
        neighbors = [j for j in edge_map.get(key, ()) if j != i]
        for j in list(neighbors):
            tn = tris.get(j)
            if tn is None:
                continue
            kn = _longest_edge(tn, nodes)
            keyn = (
                min(tn[kn], tn[(kn + 1) % 3]),
                max(tn[kn], tn[(kn + 1) % 3]),
            )
            if keyn != key:
                refine(j, depth + 1)
        # after propagation the (possibly new) neighbor across `key` shares it as
        # longest edge or was already split; split both sides across `key`
        split_across(i, key)
        for j in [j for j in edge_map.get(key, ()) if j in tris]:
            split_across(j, key)

    for i in np.flatnonzero(np.asarray(marked)):
        refine(int(i))
    tri_arr = np.asarray([tris[i] for i in sorted(tris)], dtype=np.int64)
    return _build_mesh(np.asarray(nodes), tri_arr)


def refine_corner_graded(
    mesh: Mesh, corners, grading: float, levels: int
) -> Mesh:
    """Uniform refinement plus bisection grading toward the given corners.

    After `levels` red refinements (width h), triangles at distance r from a
    marked corner are bisected until their diameter is below
    h * (r / d0)^(1 - grading), d0 the coarse-mesh diameter. Empty corner
    list reduces to plain uniform refinement.
    """
    if not (0.0 < grading < 1.0):
        raise MeshError("grading must lie in (0, 1)")
    corners = np.atleast_2d(np.asarray(corners, dtype=float)) if len(corners) else None
    d0 = max_diameter(mesh)
    out = mesh
    for _ in range(levels):
        out = refine_uniform(out)
    if corners is None or levels == 0:
        return out
    h_uniform = max_diameter(out)
    for _ in range(100):
        pts = out.nodes[out.triangles].mean(axis=1)
        r = np.min(
            np.sqrt(((pts[:, None, :] - corners[None, :, :]) ** 2).sum(axis=2)),
            axis=1,
        )
        target = h_uniform * np.power(np.maximum(r / d0, 1e-300), 1.0 - grading)
        marked = _triangle_diameters(out) > target * (1.0 + 1e-12)
        if not marked.any():
            break
        out = _bisect_conforming(out, marked)
    return out


@dataclass(frozen=True)
class QuadSplit:
    """Barycentric split of each triangle into 3 quadrilaterals.

    corners[t, i] holds the 4 corner points of the quad at local vertex i of
    triangle t, ordered to match the reference square corners
    (-1,-1) -> vertex, (1,-1) -> first CCW edge midpoint, (1,1) -> barycenter,
    (-1,1) -> second edge midpoint.
    """

    mesh: Mesh
    corners: np.ndarray  # (t, 3, 4, 2)

    def bilinear_coefficients(self):
        """Coefficients (a0, a1, a2, a3) with G(s,t) = a0 + a1 s + a2 t + a3 st."""
        p = self.corners
        a0 = (p[..., 0, :] + p[..., 1, :] + p[..., 2, :] + p[..., 3, :]) / 4.0
        a1 = (-p[..., 0, :] + p[..., 1, :] + p[..., 2, :] - p[..., 3, :]) / 4.0
        a2 = (-p[..., 0, :] - p[..., 1, :] + p[..., 2, :] + p[..., 3, :]) / 4.0
        a3 = (p[..., 0, :] - p[..., 1, :] + p[..., 2, :] - p[..., 3, :]) / 4.0
        return a0, a1, a2, a3

    def map_points(self, t: int, i: int, st: np.ndarray) -> np.ndarray:
        a0, a1, a2, a3 = (a[t, i] for a in self.bilinear_coefficients())
        st = np.atleast_2d(st)
        s, u = st[:, 0:1], st[:, 1:2]
        return a0[None, :] + a1[None, :] * s + a2[None, :] * u + a3[None, :] * s * u

    def jacobians(self, t: int, i: int, st: np.ndarray) -> np.ndarray:
        a0, a1, a2, a3 = (a[t, i] for a in self.bilinear_coefficients())
        st = np.atleast_2d(st)
        s, u = st[:, 0], st[:, 1]
        gx_s = a1[0] + a3[0] * u
        gy_s = a1[1] + a3[1] * u
        gx_t = a2[0] + a3[0] * s
        gy_t = a2[1] + a3[1] * s
        return gx_s * gy_t - gx_t * gy_s


def quad_split(mesh: Mesh) -> QuadSplit:
    """Split every triangle into 3 quads around its barycenter."""
    p = mesh.nodes[mesh.triangles]  # (t, 3, 2)
    bary = p.mean(axis=1)
    corners = np.empty((mesh.n_triangles, 3, 4, 2))
    for i in range(3):
        v = p[:, i]
        m_next = 0.5 * (p[:, i] + p[:, (i + 1) % 3])
        m_prev = 0.5 * (p[:, i] + p[:, (i + 2) % 3])
        corners[:, i, 0] = v
        corners[:, i, 1] = m_next
        corners[:, i, 2] = bary
        corners[:, i, 3] = m_prev
    return QuadSplit(mesh, corners)


def locate_points(mesh: Mesh, pts: np.ndarray, tol: float = 1e-12):
    """Assign each point to a containing triangle.

    Returns (tri_index, barycentric) arrays; index -1 for points outside.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = len(pts)
    tri_idx = -np.ones(n, dtype=np.int64)
    bary = np.zeros((n, 3))
    p = mesh.nodes[mesh.triangles]
    v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
    d = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v2[:, 0] - v0[:, 0]) * (
        v1[:, 1] - v0[:, 1]
    )
    remaining = np.arange(n)
    for t in range(mesh.n_triangles):
        if len(remaining) == 0:
            break
        q = pts[remaining]
        l1 = (
            (q[:, 0] - v0[t, 0]) * (v2[t, 1] - v0[t, 1])
            - (q[:, 1] - v0[t, 1]) * (v2[t, 0] - v0[t, 0])
        ) / d[t]
        l2 = (
            (q[:, 1] - v0[t, 1]) * (v1[t, 0] - v0[t, 0])
            - (q[:, 0] - v0[t, 0]) * (v1[t, 1] - v0[t, 1])
        ) / d[t]
        l0 = 1.0 - l1 - l2
        hit = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
        if hit.any():
            rows = remaining[hit]
            tri_idx[rows] = t
            bary[rows, 0] = l0[hit]
            bary[rows, 1] = l1[hit]
            bary[rows, 2] = l2[hit]
            remaining = remaining[~hit]
    return tri_idx, bary


def validate_mesh(mesh: Mesh) -> None:
    """Check conformity invariants; raises MeshError on violation.

    Verifies unique node coordinates, positive triangle areas, consistent
    edge orientation (each interior edge traversed once per direction), and
    2*pi angle sums at interior nodes, which together rule out overlaps and
    hanging nodes.
    """
    rounded = np.round(mesh.nodes, _MERGE_DECIMALS)
    if len(np.unique(rounded, axis=0)) != mesh.n_nodes:
        raise MeshError("duplicate node coordinates")
    p = mesh.nodes[mesh.triangles]
    areas = 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    if np.any(areas <= 0):
        raise MeshError("non-positive triangle area")
    directed: dict = {}
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if (a, b) in directed:
                raise MeshError("edge traversed twice in the same direction")
            directed[(a, b)] = True
    counts = _edge_counts(mesh.triangles)
    if np.any(np.array(list(counts.values())) > 2):
        raise MeshError("edge shared by more than two triangles")
    boundary = set(map(tuple, mesh.boundary_edges))
    recomputed = {e for e, c in counts.items() if c == 1}
    if boundary != recomputed:
        raise MeshError("boundary edges out of date")
    angle_sum = np.zeros(mesh.n_nodes)
    for tri in mesh.triangles:
        for k in range(3):
            a = mesh.nodes[tri[k]]
            b = mesh.nodes[tri[(k + 1) % 3]]
            c = mesh.nodes[tri[(k + 2) % 3]]
            u, v = b - a, c - a
            cosang = np.clip(
                (u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)), -1.0, 1.0
            )
            angle_sum[tri[k]] += np.arccos(cosang)
    interior = np.setdiff1d(np.arange(mesh.n_nodes), mesh.boundary_nodes)
    if len(interior) and np.max(np.abs(angle_sum[interior] - 2 * np.pi)) > 1e-9:
        raise MeshError("interior angle sum differs from 2*pi (overlap or gap)")


def mesh_to_text(mesh: Mesh) -> str:
    buf = io.StringIO()
    buf.write(f"NODES {mesh.n_nodes} TRIANGLES {mesh.n_triangles}\n")
    flags = np.zeros(mesh.n_nodes, dtype=int)
    flags[mesh.boundary_nodes] = 1
    for (x, y), flag in zip(mesh.nodes, flags):
        buf.write(f"{x:.17g} {y:.17g} {flag}\n")
    for i, j, k in mesh.triangles:
        buf.write(f"{i} {j} {k}\n")
    return buf.getvalue()


def mesh_from_text(text: str) -> Mesh:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "NODES" or head[2] != "TRIANGLES":
        raise MeshError("bad mesh header")
    n, t = int(head[1]), int(head[3])
    nodes = np.empty((n, 2))
    for i in range(n):
        x, y, _flag = lines[1 + i].split()
        nodes[i] = (float(x), float(y))
    tris = np.empty((t, 3), dtype=np.int64)
    for j in range(t):
        tris[j] = [int(v) for v in lines[1 + n + j].split()]
    return _build_mesh(nodes, tris)


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(mesh_to_text(mesh))


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        return mesh_from_text(fh.read())
