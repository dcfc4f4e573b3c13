"""Curved-boundary triangulations of star-shaped domains.

The reference disk is meshed by concentric rings (ring ``j`` of ``n`` carries
``6 j`` vertices at radius ``j / n``), neighbouring rings are stitched with a
shortest-diagonal sweep, and every vertex is pushed through the polar map

    (rho, phi) -> z + rho r(phi) (cos phi, sin phi).

For order 2 the midside node of each boundary edge is put on the curve at the
mid angle, so boundary elements are isoparametric; interior edges keep
straight midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvertedElement
from .geometry import BoundaryCurve
from .quadrature import triangle_rule, gauss_legendre
from . import shapefunctions as sf

BASE_RINGS = 4


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with P1 (3 nodes) or P2 (6 nodes) connectivity.

    ``boundary_edges`` rows hold the node ids of each boundary edge in
    counter-clockwise order: ``(start, end)`` for order 1 and
    ``(start, end, mid)`` for order 2; ``boundary_theta`` holds the matching
    angle interval ``[theta0, theta1]`` on the curve.  ``boundary_element`` and
    ``boundary_local_edge`` locate the owning triangle and its local edge.
    """

    curve: BoundaryCurve
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_theta: np.ndarray
    boundary_element: np.ndarray
    boundary_local_edge: np.ndarray
    order: int
    level: int
    n_vertices: int
    h: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    @property
    def vertex_triangles(self) -> np.ndarray:
        return self.triangles[:, :3]

    def element_coords(self) -> np.ndarray:
        """(n_elements, n_local, 2) node coordinates per element."""
        return self.nodes[self.triangles]

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)


def _ring_layout(n_rings: int):
    """Reference (rho, phi) of all vertices and per-ring index ranges."""
    rho = [0.0]
    phi = [0.0]
    starts = [0]
    for j in range(1, n_rings + 1):
        m = 6 * j
        starts.append(len(rho))
        rho.extend([j / n_rings] * m)
        phi.extend((2 * np.pi * np.arange(m) / m).tolist())
    return np.array(rho), np.array(phi), starts


def _stitch(inner: np.ndarray, outer: np.ndarray, ref: np.ndarray) -> list:
    """Triangulate the annular strip between two closed vertex loops."""
    tris = []
    ni, no = len(inner), len(outer)
    if ni == 1:
        c = inner[0]
        return [(c, outer[k], outer[(k + 1) % no]) for k in range(no)]
    i = k = 0
    while i < ni or k < no:
        a, a1 = inner[i % ni], inner[(i + 1) % ni]
        b, b1 = outer[k % no], outer[(k + 1) % no]
        if i == ni:
            advance_inner = False
        elif k == no:
            advance_inner = True
        else:
            # pick the shorter new diagonal
            advance_inner = np.linalg.norm(ref[a1] - ref[b]) <= np.linalg.norm(ref[a] - ref[b1])
        if advance_inner:
            tris.append((a, b, a1))
            i += 1
        else:
            tris.append((a, b, b1))
            k += 1
    return tris


def _reference_mesh(n_rings: int):
    rho, phi, starts = _ring_layout(n_rings)
    ref = np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)
    tris = []
    for j in range(1, n_rings + 1):
        inner = np.arange(starts[j - 1], starts[j])
        end = starts[j + 1] if j < n_rings else len(rho)
        outer = np.arange(starts[j], end)
        tris.extend(_stitch(inner, outer, ref))
    tris = np.array(tris, dtype=np.int64)
    p = ref[tris]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = signed < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return rho, phi, tris, starts[n_rings]


def build_mesh(curve: BoundaryCurve, level: int, order: int = 2, base_rings: int = BASE_RINGS) -> Mesh:
    """Mapped ring mesh of the domain bounded by ``curve``."""
    if level < 0:
        raise ValueError("level must be >= 0")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    n_rings = base_rings * 2**level
    rho, phi, tris, outer_start = _reference_mesh(n_rings)
    nv = rho.size
    r = curve.radius(phi)
    nodes = curve.center + (rho * r)[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    # boundary vertices exactly on the curve
    outer = np.arange(outer_start, nv)
    nodes[outer] = curve.point(phi[outer])

    n_out = outer.size
    b_start = outer
    b_end = np.roll(outer, -1)
    theta0 = phi[outer]
    theta1 = np.append(theta0[1:], 2 * np.pi)  # exact partition, no gaps

    # locate owning triangle/local edge of every boundary edge
    local_pairs = ((0, 1), (1, 2), (2, 0))
    edge_owner = {}
    for e, tri in enumerate(tris):
        for le, (p, q) in enumerate(local_pairs):
            edge_owner[(tri[p], tri[q])] = (e, le)
    owner = np.array([edge_owner[(s, t)] for s, t in zip(b_start, b_end)])

    if order == 1:
        triangles = tris
        bedges = np.stack([b_start, b_end], axis=-1)
    else:
        all_edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        key = np.sort(all_edges, axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        mid_ids = nv + np.arange(uniq.shape[0])
        mid_nodes = 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])
        ne = tris.shape[0]
        triangles = np.concatenate([tris, mid_ids[inv].reshape(3, ne).T], axis=1)
        b_mid = triangles[owner[:, 0], 3 + owner[:, 1]]
        mid_nodes[b_mid - nv] = curve.point(0.5 * (theta0 + theta1))
        nodes = np.concatenate([nodes, mid_nodes])
        bedges = np.stack([b_start, b_end, b_mid], axis=-1)

    pv = nodes[tris]
    diam = np.max(np.stack([np.linalg.norm(pv[:, i] - pv[:, (i + 1) % 3], axis=-1) for i in range(3)]), axis=0)
    mesh = Mesh(curve, nodes, triangles, bedges, np.stack([theta0, theta1], axis=-1),
                owner[:, 0], owner[:, 1], order, level, nv, float(diam.max()))
    _check_jacobians(mesh)
    return mesh


def jacobians(mesh: Mesh, points: np.ndarray) -> np.ndarray:
    """(n_elements, n_points, 2, 2) Jacobians d x / d xi at reference ``points``."""
    dphi = sf.grad(mesh.order, points)  # (nq, nloc, 2)
    return np.einsum("eic,qid->eqcd", mesh.element_coords(), dphi)


def _check_jacobians(mesh: Mesh):
    pts, _ = triangle_rule(mesh.order * 4 - 1)
    pts = np.concatenate([pts, sf.nodes(mesh.order)])
    det = np.linalg.det(jacobians(mesh, pts))
    if np.any(det <= 0):
        bad = int(np.argmin(det.min(axis=1)))
        raise InvertedElement(f"element {bad} has Jacobian {det.min():.3e} <= 0; curve too distorted for the radial mesher")


def mesh_area(mesh: Mesh) -> float:
    """Sum of element areas by quadrature on the (possibly curved) elements."""
    pts, w = triangle_rule(5)
    det = np.linalg.det(jacobians(mesh, pts))
    return float(np.sum(det * w))


def boundary_length(mesh: Mesh) -> float:
    """Length of the discrete boundary (polygonal or piecewise quadratic)."""
    t, w = gauss_legendre(6)
    dpsi = sf.edge_grad(mesh.order, t)
    xe = mesh.nodes[mesh.boundary_edges]
    dx = np.einsum("eic,qi->eqc", xe, dpsi)
    return float(np.sum(np.linalg.norm(dx, axis=-1) * w))


def export_mesh(mesh: Mesh, path) -> None:
    """Write NODES / TRIANGLES / BOUNDARY sections as plain text."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# order {mesh.order} level {mesh.level} h {mesh.h:.17g}\n")
        fh.write(f"NODES {mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i} {x:.17g} {y:.17g}\n")
        fh.write(f"TRIANGLES {mesh.n_elements}\n")
        for i, tri in enumerate(mesh.triangles):
            fh.write(f"{i} " + " ".join(str(int(v)) for v in tri) + "\n")
        fh.write(f"BOUNDARY {mesh.boundary_edges.shape[0]}\n")
        for i, (t0, t1) in enumerate(mesh.boundary_theta):
            fh.write(f"{i} {t0:.17g} {t1:.17g}\n")
