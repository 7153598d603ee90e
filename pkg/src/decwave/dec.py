"""Circumcentric dual complex and the discrete operators built on it.

The vertex Laplacian assembled here is

    (L u)_v = (1 / P_v) * sum_{edges (v, n)} w_e (u_n - u_v),
    w_e = |dual edge| / |primal edge|,

with ``P_v`` the area of the circumcentric dual cell of ``v``. It is stored
factored: the symmetric weight matrix ``M`` (off-diagonal ``w_e``, diagonal
``-sum w``) and the per-vertex areas, so ``L = diag(1/P) M``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateTriangleError, IllShapedMeshError, NonWellCenteredWarning
from .mesh import SurfaceMesh, triangle_angles

# relative to the edge length; right triangles put the circumcenter on an edge
NEGATIVE_DUAL_TOLERANCE = 1e-10


def circumcenter(a, b, c) -> np.ndarray:
    """Circumcenter of the triangle ``abc`` in 3D.

    Raises DegenerateTriangleError for (near-)collinear points.
    """
    return circumcenters(np.array([[a, b, c]], dtype=np.float64))[0]


def circumcenters(points) -> np.ndarray:
    """Vectorised :func:`circumcenter` over an ``(m, 3, 3)`` array of triangles."""
    points = np.asarray(points, dtype=np.float64)
    a = points[:, 0]
    u = points[:, 1] - a
    v = points[:, 2] - a
    w = np.cross(u, v)
    ww = np.einsum("ij,ij->i", w, w)
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    bad = ww <= 1e-24 * uu * vv
    if np.any(bad):
        raise DegenerateTriangleError(f"collinear triangle at index {int(np.argmax(bad))}")
    num = uu[:, None] * np.cross(v, w) + vv[:, None] * np.cross(w, u)
    return a + num / (2.0 * ww[:, None])


@dataclass(frozen=True, eq=False)
class DualMetrics:
    """Primal and circumcentric-dual measures of a mesh.

    ``circumcenter_offsets[t, k]`` is the signed distance from the
    circumcenter of triangle ``t`` to the edge opposite its local vertex
    ``k``; positive when the circumcenter is on the same side as that
    vertex. Dual edge lengths are sums of these offsets over the incident
    triangles (one term on boundary edges).
    """

    circumcenters: np.ndarray
    edge_midpoints: np.ndarray
    dual_edge_lengths: np.ndarray
    dual_cell_areas: np.ndarray
    primal_edge_lengths: np.ndarray
    circumcenter_offsets: np.ndarray


def build_dual_metrics(mesh: SurfaceMesh) -> DualMetrics:
    V = mesh.vertices
    T = mesh.triangles
    P = V[T]  # (m, 3, 3)
    cc = circumcenters(P)
    normal = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)

    primal = mesh.edge_lengths()
    midpoints = 0.5 * (V[mesh.edges[:, 0]] + V[mesh.edges[:, 1]])

    offsets = np.empty((len(T), 3))
    for k in range(3):
        opp = P[:, k]
        p1, p2 = P[:, (k + 1) % 3], P[:, (k + 2) % 3]
        mid = 0.5 * (p1 + p2)
        along = p2 - p1
        along /= np.linalg.norm(along, axis=1, keepdims=True)
        # in-plane unit vector perpendicular to the edge, toward the opposite vertex
        inward = np.cross(normal, along)
        flip = np.einsum("ij,ij->i", inward, opp - mid) < 0
        inward[flip] *= -1
        offsets[:, k] = np.einsum("ij,ij->i", cc - mid, inward)

    dual_lengths = np.zeros(mesh.n_edges)
    np.add.at(dual_lengths, mesh.triangle_edges.ravel(), offsets.ravel())

    # quadrilateral (vertex, midpoint, circumcenter, other midpoint) split into
    # two signed triangles measured against the face normal
    areas = np.zeros(mesh.n_vertices)
    for k in range(3):
        vk = P[:, k]
        m_next = 0.5 * (vk + P[:, (k + 1) % 3])
        m_prev = 0.5 * (vk + P[:, (k + 2) % 3])
        a1 = 0.5 * np.einsum("ij,ij->i", np.cross(m_next - vk, cc - vk), normal)
        a2 = 0.5 * np.einsum("ij,ij->i", np.cross(cc - vk, m_prev - vk), normal)
        np.add.at(areas, T[:, k], a1 + a2)

    scale = np.take(primal, mesh.triangle_edges)
    n_negative = int(np.count_nonzero(offsets < -NEGATIVE_DUAL_TOLERANCE * scale))
    if n_negative:
        warnings.warn(
            f"mesh is not well-centered: {n_negative} circumcenter(s) lie outside their triangle; "
            "using signed dual lengths",
            NonWellCenteredWarning,
            stacklevel=2,
        )

    return DualMetrics(
        circumcenters=cc,
        edge_midpoints=midpoints,
        dual_edge_lengths=dual_lengths,
        dual_cell_areas=areas,
        primal_edge_lengths=primal,
        circumcenter_offsets=offsets,
    )


@dataclass(frozen=True, eq=False)
class HodgeStar:
    """Diagonal Hodge stars on primal 0- and 1-forms."""

    star0: np.ndarray
    star1: np.ndarray


def build_hodge_star(metrics: DualMetrics) -> HodgeStar:
    # dual of a vertex is a 2-cell, primal vertex has unit measure
    return HodgeStar(
        star0=metrics.dual_cell_areas / 1.0,
        star1=metrics.dual_edge_lengths / metrics.primal_edge_lengths,
    )


def build_incidence(mesh: SurfaceMesh, k: int) -> sp.csr_matrix:
    """Exterior derivative on primal k-forms as a signed incidence matrix.

    ``k = 0``: shape (n_edges, n_vertices), ``(d0 u)_e = u[max] - u[min]``.
    ``k = 1``: shape (n_triangles, n_edges), entries are the orientation
    signs with which each triangle traverses its edges.
    """
    if k == 0:
        E = mesh.n_edges
        rows = np.repeat(np.arange(E), 2)
        cols = mesh.edges.ravel()
        data = np.tile([-1.0, 1.0], E)
        return sp.csr_matrix((data, (rows, cols)), shape=(E, mesh.n_vertices))
    if k == 1:
        rows = np.repeat(np.arange(mesh.n_triangles), 3)
        cols = mesh.triangle_edges.ravel()
        data = mesh.triangle_edge_signs.ravel().astype(np.float64)
        return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_triangles, mesh.n_edges))
    raise ValueError(f"incidence is defined for k in {{0, 1}}, got {k}")


@dataclass(frozen=True, eq=False)
class LaplaceOperator:
    """Vertex Laplacian ``L = diag(1/P) M`` with ``M`` symmetric.

    Attributes
    ----------
    edges : ndarray (n_edges, 2)
    weights : ndarray (n_edges,)
        Cotan-type edge weights ``dual length / primal length``.
    dual_areas : ndarray (n_vertices,)
    symmetric : scipy.sparse.csr_matrix
        ``M[v, n] = w_(v,n)``, ``M[v, v] = -sum w``.
    """

    edges: np.ndarray
    weights: np.ndarray
    dual_areas: np.ndarray
    symmetric: sp.csr_matrix

    @property
    def n_vertices(self) -> int:
        return len(self.dual_areas)

    def weight_sums(self) -> np.ndarray:
        """Sum of incident edge weights per vertex (``-diag(M)``)."""
        return -self.symmetric.diagonal()

    def matrix(self) -> sp.csr_matrix:
        return sp.diags(1.0 / self.dual_areas) @ self.symmetric

    def neighbors(self, v: int):
        """``[(neighbor, weight), ...]`` for vertex ``v``."""
        row = self.symmetric.getrow(v)
        return [(int(j), float(x)) for j, x in zip(row.indices, row.data) if j != v]

    def apply(self, u) -> np.ndarray:
        return apply_laplacian(self, u)


def _check_dual_areas(areas):
    bad = np.nonzero(~(areas > 0))[0]
    if len(bad):
        v = int(bad[0])
        raise IllShapedMeshError(
            f"vertex {v} has non-positive dual cell area {areas[v]:.3e}; "
            "mesh is too ill-shaped for the circumcentric scheme",
            vertex=v,
        )


def assemble_laplacian(mesh: SurfaceMesh, metrics: DualMetrics) -> LaplaceOperator:
    """Edge-by-edge assembly of the weighted-difference Laplacian."""
    areas = np.asarray(metrics.dual_cell_areas, dtype=np.float64)
    _check_dual_areas(areas)
    w = metrics.dual_edge_lengths / metrics.primal_edge_lengths
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([b, a, a, b])
    data = np.concatenate([w, w, -w, -w])
    n = mesh.n_vertices
    M = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return LaplaceOperator(edges=mesh.edges, weights=w, dual_areas=areas, symmetric=M)


def laplacian_from_forms(mesh: SurfaceMesh, metrics: DualMetrics) -> LaplaceOperator:
    """Same operator composed as ``-star0^{-1} d0^T star1 d0``.

    On 0-forms the ``d^T * d`` part of the Hodge Laplacian has nothing to
    act on, so only the codifferential-of-derivative term survives.
    """
    star = build_hodge_star(metrics)
    _check_dual_areas(star.star0)
    d0 = build_incidence(mesh, 0)
    M = (-(d0.T @ sp.diags(star.star1) @ d0)).tocsr()
    M.sort_indices()
    return LaplaceOperator(edges=mesh.edges, weights=star.star1, dual_areas=star.star0, symmetric=M)


def apply_laplacian(op: LaplaceOperator, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (op.n_vertices,):
        raise ValueError(f"field has shape {u.shape}, expected ({op.n_vertices},)")
    return (op.symmetric @ u) / op.dual_areas


def cotan_crosscheck(mesh: SurfaceMesh, metrics: DualMetrics) -> float:
    """Max |w_e - (cot a + cot b)/2| over edges, angles measured independently."""
    angles = triangle_angles(mesh)
    cot_weights = np.zeros(mesh.n_edges)
    np.add.at(cot_weights, mesh.triangle_edges.ravel(), (0.5 / np.tan(angles)).ravel())
    w = metrics.dual_edge_lengths / metrics.primal_edge_lengths
    return float(np.max(np.abs(w - cot_weights)))


def dump_operator(op: LaplaceOperator, path) -> None:
    """Write the full operator as ``row col value`` lines, row-major."""
    L = op.matrix().tocoo()
    order = np.lexsort((L.col, L.row))
    with open(path, "w") as fh:
        for i in order:
            fh.write(f"{L.row[i]} {L.col[i]} {float(L.data[i])!r}\n")
