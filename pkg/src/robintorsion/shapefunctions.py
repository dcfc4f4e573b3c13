"""Lagrange P1/P2 shape functions on the reference triangle and its edges.

P2 local numbering: vertices 0, 1, 2 at (0,0), (1,0), (0,1), then midsides
3 = (0,1), 4 = (1,2), 5 = (2,0).
"""
import numpy as np

_P2_HESS = np.array([
    [[4, 4], [4, 4]],
    [[4, 0], [0, 0]],
    [[0, 0], [0, 4]],
    [[-8, -4], [-4, 0]],
    [[0, 4], [4, 0]],
    [[0, -4], [-4, -8]],
], dtype=float)


def nodes(order: int) -> np.ndarray:
    v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    if order == 2:
        v += [[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]
    return np.array(v)


def values(order: int, pts) -> np.ndarray:
    """(nq, nloc) basis values."""
    pts = np.atleast_2d(pts)
    xi, eta = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1 - xi - eta, xi, eta
    if order == 1:
        return np.stack([l0, l1, l2], axis=-1)
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)


def grad(order: int, pts) -> np.ndarray:
    """(nq, nloc, 2) reference gradients."""
    pts = np.atleast_2d(pts)
    nq = pts.shape[0]
    if order == 1:
        g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.broadcast_to(g, (nq, 3, 2)).copy()
    xi, eta = pts[:, 0], pts[:, 1]
    l0 = 1 - xi - eta
    z = np.zeros_like(xi)
    gx = [-(4 * l0 - 1), 4 * xi - 1, z, 4 * (l0 - xi), 4 * eta, -4 * eta]
    gy = [-(4 * l0 - 1), z, 4 * eta - 1, -4 * xi, 4 * xi, 4 * (l0 - eta)]
    return np.stack([np.stack(gx, axis=-1), np.stack(gy, axis=-1)], axis=-1)


def hess(order: int) -> np.ndarray:
    """(nloc, 2, 2) constant reference Hessians."""
    if order == 1:
        return np.zeros((3, 2, 2))
    return _P2_HESS.copy()


def edge_values(order: int, t) -> np.ndarray:
    """(nq, n_edge_nodes) 1-D basis ordered (start, end[, mid])."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if order == 1:
        return np.stack([1 - t, t], axis=-1)
    return np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)], axis=-1)


def edge_grad(order: int, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if order == 1:
        return np.stack([-np.ones_like(t), np.ones_like(t)], axis=-1)
    return np.stack([4 * t - 3, 4 * t - 1, 4 - 8 * t], axis=-1)


def edge_to_reference(local_edge, t) -> np.ndarray:
    """Reference coordinates of parameter ``t`` along local edge(s) (start -> end).

    ``local_edge`` has shape (m,) and ``t`` shape (m, nq) or (nq,); returns (m, nq, 2).
    """
    local_edge = np.asarray(local_edge)
    t = np.broadcast_to(np.asarray(t, dtype=float), (local_edge.size,) + np.shape(t)[-1:])
    le = local_edge[:, None]
    xi = np.where(le == 0, t, np.where(le == 1, 1 - t, 0.0))
    eta = np.where(le == 0, 0.0, np.where(le == 1, t, 1 - t))
    return np.stack([xi, eta], axis=-1)
