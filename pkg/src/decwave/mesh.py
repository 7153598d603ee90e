"""Triangulated surface meshes: loading, generation, indexing and quality checks.

A :class:`SurfaceMesh` is the primal simplicial complex on which the DEC
operators are built.  Edges are stored once, as ``(min, max)`` vertex pairs;
the orientation in which each triangle traverses an edge is kept separately
in ``triangle_edge_signs``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateTriangleError, MeshError, MeshParseError, NonManifoldEdgeError

logger = logging.getLogger(__name__)

DEGENERATE_AREA_RATIO = 1e-12
ANGLE_TOLERANCE = 1e-9
MAX_ICOSPHERE_SUBDIVISIONS = 7


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Indexed triangle mesh with derived edge and adjacency tables.

    Build instances with :func:`build_mesh` (or a loader/generator); the
    constructor itself performs no checking.

    Attributes
    ----------
    vertices : ndarray, shape (n_vertices, 3)
    triangles : ndarray, shape (n_triangles, 3)
        Vertex indices, orientation as given.
    edges : ndarray, shape (n_edges, 2)
        Unique unordered vertex pairs stored as ``(min, max)``.
    triangle_edges : ndarray, shape (n_triangles, 3)
        ``triangle_edges[t, k]`` is the edge opposite local vertex ``k``, i.e.
        the edge running from local vertex ``k+1`` to ``k+2``.
    triangle_edge_signs : ndarray, shape (n_triangles, 3)
        +1 when the triangle traverses that edge from ``min`` to ``max``.
    edge_to_triangles : tuple of tuple of int
        The one or two triangles incident to each edge.
    vertex_to_edges : tuple of ndarray
        Incident edges per vertex, in cyclic (fan) order where the local
        neighbourhood allows it, otherwise by edge index.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    triangle_edge_signs: np.ndarray
    edge_to_triangles: tuple
    vertex_to_edges: tuple
    is_consistently_oriented: bool = True

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.array([e for e, tris in enumerate(self.edge_to_triangles) if len(tris) == 1], dtype=np.int64)

    @property
    def is_closed(self) -> bool:
        return all(len(tris) == 2 for tris in self.edge_to_triangles)

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(_triangle_cross(self.vertices, self.triangles), axis=1)

    def surface_area(self) -> float:
        return float(self.triangle_areas().sum())


@dataclass(frozen=True)
class MeshQualityReport:
    n_vertices: int
    n_edges: int
    n_triangles: int
    is_closed: bool
    is_well_centered: bool
    obtuse_triangle_indices: list
    min_angle: float
    euler_characteristic: int
    is_consistently_oriented: bool = True
    warnings: list = field(default_factory=list)

    def format(self) -> str:
        lines = [
            f"vertices:             {self.n_vertices}",
            f"edges:                {self.n_edges}",
            f"triangles:            {self.n_triangles}",
            f"euler characteristic: {self.euler_characteristic}",
            f"closed:               {self.is_closed}",
            f"oriented:             {self.is_consistently_oriented}",
            f"well-centered:        {self.is_well_centered}",
            f"obtuse triangles:     {len(self.obtuse_triangle_indices)}",
            f"min angle (deg):      {math.degrees(self.min_angle):.6f}",
        ]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _triangle_cross(vertices, triangles):
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return np.cross(b - a, c - a)


def _cyclic_vertex_edges(v, incident, triangles, triangle_edges):
    """Order the edges around ``v`` by walking its triangle fan.

    Returns None when the fan is not a single consistently oriented strip or
    cycle; the caller then falls back to index order.
    """
    succ = {}
    edge_of = {}
    for t in incident:
        tri = triangles[t]
        k = int(np.nonzero(tri == v)[0][0])
        a, b = int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3])
        if a in succ:
            return None
        succ[a] = b
        # edge (v, a) is opposite local vertex k+2, edge (v, b) opposite k+1
        edge_of[a] = int(triangle_edges[t, (k + 2) % 3])
        edge_of[b] = int(triangle_edges[t, (k + 1) % 3])
    starts = set(succ) - set(succ.values())
    if len(starts) > 1:
        return None
    start = starts.pop() if starts else min(succ)
    order = [start]
    cur = start
    while cur in succ:
        cur = succ[cur]
        if cur == start:
            break
        order.append(cur)
    if len(order) != len(edge_of):
        return None
    return np.array([edge_of[u] for u in order], dtype=np.int64)


def build_mesh(vertices, triangles) -> SurfaceMesh:
    """Validate raw arrays and derive the edge/adjacency tables.

    Raises
    ------
    MeshError
        Bad shapes, non-finite positions or out-of-range indices.
    NonManifoldEdgeError
        An edge is shared by more than two triangles.
    DegenerateTriangleError
        A triangle's area is below ``1e-12`` times the mean triangle area.
    """
    V = np.asarray(vertices, dtype=np.float64)
    T = np.asarray(triangles, dtype=np.int64)
    if V.ndim != 2 or V.shape[1] != 3:
        raise MeshError(f"vertices must have shape (n, 3), got {V.shape}")
    if T.ndim != 2 or T.shape[1] != 3 or len(T) == 0:
        raise MeshError(f"triangles must have shape (m, 3) with m > 0, got {T.shape}")
    if not np.all(np.isfinite(V)):
        raise MeshError("vertex positions must be finite")
    if T.min() < 0 or T.max() >= len(V):
        raise MeshError("triangle vertex index out of range")

    areas = 0.5 * np.linalg.norm(_triangle_cross(V, T), axis=1)
    repeated = (T[:, 0] == T[:, 1]) | (T[:, 1] == T[:, 2]) | (T[:, 0] == T[:, 2])
    bad = np.nonzero(repeated | (areas <= DEGENERATE_AREA_RATIO * areas.mean()))[0]
    if len(bad):
        raise DegenerateTriangleError(
            f"{len(bad)} degenerate triangle(s), first is triangle {bad[0]} {T[bad[0]].tolist()}"
        )

    # directed edge opposite local vertex k runs k+1 -> k+2
    tails = T[:, [1, 2, 0]]
    heads = T[:, [2, 0, 1]]
    lo = np.minimum(tails, heads).ravel()
    hi = np.maximum(tails, heads).ravel()
    edges, inverse, counts = np.unique(
        np.stack([lo, hi], axis=1), axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    if counts.max() > 2:
        e = int(np.argmax(counts))
        raise NonManifoldEdgeError(
            f"edge {edges[e].tolist()} is shared by {counts[e]} triangles"
        )
    triangle_edges = inverse.reshape(-1, 3)
    signs = np.where(tails < heads, 1, -1).astype(np.int8)

    edge_to_triangles = [[] for _ in range(len(edges))]
    for t in range(len(T)):
        for k in range(3):
            edge_to_triangles[triangle_edges[t, k]].append(t)

    # each interior edge must be traversed once in each direction
    sign_sum = np.zeros(len(edges), dtype=np.int64)
    np.add.at(sign_sum, triangle_edges.ravel(), signs.ravel().astype(np.int64))
    interior = counts == 2
    consistent = bool(np.all(sign_sum[interior] == 0))

    vertex_tris = [[] for _ in range(len(V))]
    for t, tri in enumerate(T):
        for v in tri:
            vertex_tris[v].append(t)
    vertex_edges = [[] for _ in range(len(V))]
    for e, (a, b) in enumerate(edges):
        vertex_edges[a].append(e)
        vertex_edges[b].append(e)
    vertex_to_edges = []
    for v in range(len(V)):
        ordered = None
        if consistent and vertex_tris[v]:
            ordered = _cyclic_vertex_edges(v, vertex_tris[v], T, triangle_edges)
        if ordered is None:
            ordered = np.array(vertex_edges[v], dtype=np.int64)
        vertex_to_edges.append(_frozen(ordered))

    return SurfaceMesh(
        vertices=_frozen(V),
        triangles=_frozen(T),
        edges=_frozen(edges.astype(np.int64)),
        triangle_edges=_frozen(triangle_edges),
        triangle_edge_signs=_frozen(signs),
        edge_to_triangles=tuple(tuple(ts) for ts in edge_to_triangles),
        vertex_to_edges=tuple(vertex_to_edges),
        is_consistently_oriented=consistent,
    )


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _guess_format(path: Path, fmt):
    if fmt is None:
        fmt = path.suffix.lstrip(".")
    fmt = str(fmt).upper()
    if fmt not in ("OFF", "OBJ"):
        raise MeshParseError(f"unsupported mesh format {fmt!r} (expected OFF or OBJ)")
    return fmt


def _content_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(text):
    lines = _content_lines(text)
    try:
        header = next(lines)
    except StopIteration:
        raise MeshParseError("empty OFF file") from None
    tokens = header.split()
    if tokens[0] != "OFF":
        raise MeshParseError(f"expected 'OFF' header, got {header!r}")
    # counts may share the header line
    counts = tokens[1:] or next(lines, "").split()
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise MeshParseError("malformed OFF counts line") from None
    rest = list(lines)
    if len(rest) < nv + nf:
        raise MeshParseError(f"OFF file declares {nv} vertices and {nf} faces but has {len(rest)} records")
    try:
        V = [[float(x) for x in rest[i].split()[:3]] for i in range(nv)]
        F = []
        for line in rest[nv:nv + nf]:
            parts = line.split()
            n = int(parts[0])
            if n != 3:
                raise MeshParseError(f"only triangular faces are supported, got a {n}-gon")
            F.append([int(p) for p in parts[1:4]])
    except ValueError as exc:
        raise MeshParseError(f"malformed OFF record: {exc}") from None
    if any(len(v) != 3 for v in V):
        raise MeshParseError("OFF vertex records need three coordinates")
    return V, F


def _parse_obj(text):
    V, F = [], []
    for line in _content_lines(text):
        parts = line.split()
        try:
            if parts[0] == "v":
                V.append([float(x) for x in parts[1:4]])
                if len(V[-1]) != 3:
                    raise MeshParseError("OBJ vertex record needs three coordinates")
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshParseError(f"only triangular faces are supported, got a {len(idx)}-gon")
                # 1-based; negative indices count back from the latest vertex
                F.append([i - 1 if i > 0 else len(V) + i for i in idx])
        except ValueError as exc:
            raise MeshParseError(f"malformed OBJ record {line!r}: {exc}") from None
    return V, F


def load_mesh(path, format=None) -> SurfaceMesh:
    """Read an OFF or OBJ triangle mesh (format defaults to the file suffix)."""
    path = Path(path)
    fmt = _guess_format(path, format)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshParseError(f"cannot read {path}: {exc}") from None
    V, F = _parse_off(text) if fmt == "OFF" else _parse_obj(text)
    if not F:
        raise MeshParseError(f"{path} contains no faces")
    logger.debug("loaded %s: %d vertices, %d faces", path, len(V), len(F))
    return build_mesh(np.array(V, dtype=np.float64).reshape(-1, 3), F)


def write_mesh(mesh: SurfaceMesh, path, format=None) -> None:
    """Write geometry only; coordinates use ``repr`` so reloading is exact."""
    path = Path(path)
    fmt = _guess_format(path, format)
    out = []
    if fmt == "OFF":
        out.append("OFF")
        out.append(f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}")
        out += [" ".join(repr(float(x)) for x in p) for p in mesh.vertices]
        out += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    else:
        out += ["v " + " ".join(repr(float(x)) for x in p) for p in mesh.vertices]
        out += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.triangles]
    path.write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def generate_tetrahedron(edge_length: float = 1.0) -> SurfaceMesh:
    """Regular tetrahedron surface, centred at the origin, outward normals."""
    if edge_length <= 0:
        raise ValueError("edge_length must be positive")
    # alternate cube corners have pairwise distance 2*sqrt(2)
    V = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    V *= edge_length / (2.0 * math.sqrt(2.0))
    T = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return build_mesh(V, _orient_outward(V, T))


def _orient_outward(V, T):
    T = np.array(T, dtype=np.int64)
    centroid = V.mean(axis=0)
    normals = _triangle_cross(V, T)
    inward = np.einsum("ij,ij->i", normals, V[T].mean(axis=1) - centroid) < 0
    T[inward] = T[inward][:, [0, 2, 1]]
    return T


def _icosahedron():
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    V = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    T = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return V, _orient_outward(V, T)


def _subdivide(V, T):
    verts = [v for v in V]
    cache = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            m = 0.5 * (V[a] + V[b])
            cache[key] = len(verts)
            verts.append(m / np.linalg.norm(m))
        return cache[key]

    out = []
    for a, b, c in T.tolist():
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.array(verts), np.array(out, dtype=np.int64)


def generate_icosphere(radius: float = 1.0, subdivisions: int = 0) -> SurfaceMesh:
    """Icosahedron refined by midpoint subdivision, vertices on the sphere."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 0 <= subdivisions <= MAX_ICOSPHERE_SUBDIVISIONS:
        raise ValueError(f"subdivisions must lie in [0, {MAX_ICOSPHERE_SUBDIVISIONS}]")
    V, T = _icosahedron()
    for _ in range(subdivisions):
        V, T = _subdivide(V, T)
    # renormalise once more so every vertex sits on the sphere to rounding
    V = radius * (V / np.linalg.norm(V, axis=1, keepdims=True))
    return build_mesh(V, T)


def generate_flat_grid(nx: int, ny: int, spacing: float = 1.0, diagonal: str = "right_isoceles") -> SurfaceMesh:
    """Planar ``nx`` x ``ny`` vertex grid in the z = 0 plane.

    Every cell is cut along the same diagonal into two right-isoceles
    triangles (no union-jack alternation), so interior vertices have
    valence 6. Vertex ``(i, j)`` has index ``i + nx * j`` and position
    ``(i * spacing, j * spacing, 0)``.
    """
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be at least 2")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if diagonal != "right_isoceles":
        raise ValueError(f"unsupported diagonal pattern {diagonal!r}")
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    V = np.stack([i.ravel() * spacing, j.ravel() * spacing, np.zeros(nx * ny)], axis=1)
    ci, cj = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="xy")
    v00 = (ci + nx * cj).ravel()
    v10, v01, v11 = v00 + 1, v00 + nx, v00 + nx + 1
    T = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    return build_mesh(V, T)


# ---------------------------------------------------------------------------
# quality
# ---------------------------------------------------------------------------

def triangle_angles(mesh: SurfaceMesh) -> np.ndarray:
    """Interior angles, shape (n_triangles, 3); column k is the angle at local vertex k."""
    P = mesh.vertices[mesh.triangles]
    angles = np.empty((mesh.n_triangles, 3))
    for k in range(3):
        u = P[:, (k + 1) % 3] - P[:, k]
        w = P[:, (k + 2) % 3] - P[:, k]
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        angles[:, k] = np.arctan2(cross, np.einsum("ij,ij->i", u, w))
    return angles


def validate(mesh: SurfaceMesh, angle_tolerance: float = ANGLE_TOLERANCE) -> MeshQualityReport:
    """Summarise topology and well-centeredness.

    A triangle counts as obtuse when its largest angle exceeds
    ``pi/2 + angle_tolerance``; exact right angles are accepted.
    """
    angles = triangle_angles(mesh)
    obtuse = np.nonzero(angles.max(axis=1) > math.pi / 2 + angle_tolerance)[0]
    warnings = []
    if not mesh.is_closed:
        warnings.append(f"mesh has {len(mesh.boundary_edges)} boundary edge(s)")
    if not mesh.is_consistently_oriented:
        warnings.append("triangle orientations are inconsistent (non-orientable or flipped faces)")
    if len(obtuse):
        warnings.append(f"{len(obtuse)} obtuse triangle(s): circumcentric dual lengths may be negative")
    return MeshQualityReport(
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        n_triangles=mesh.n_triangles,
        is_closed=mesh.is_closed,
        is_well_centered=len(obtuse) == 0,
        obtuse_triangle_indices=obtuse.tolist(),
        min_angle=float(angles.min()),
        euler_characteristic=mesh.euler_characteristic,
        is_consistently_oriented=mesh.is_consistently_oriented,
        warnings=warnings,
    )
