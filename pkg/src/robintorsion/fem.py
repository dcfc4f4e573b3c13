"""Finite element solution of the Robin torsion problem.

Weak form: find u with

    int grad u . grad phi + beta oint u phi = -N int phi     for all phi,

i.e. ``(K + beta B) x = -N m`` with stiffness ``K``, boundary mass ``B`` and
load ``m``.  Robin data enter weakly through ``B``; the source uses N = 2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from . import shapefunctions as sf
from .errors import NonConvergence, OrderTooLow, SingularSystem
from .geometry import N_DIM, eval_boundary, arclength
from .mesh import Mesh, jacobians
from .quadrature import gauss_legendre, triangle_rule

log = logging.getLogger(__name__)

RCOND_MIN = 1e-12
CG_RTOL = 1e-12
RESONANCE_RTOL = 1e-3
_VOLUME_DEGREE = 5
_EDGE_POINTS = 6


class Admissibility(Enum):
    YES = "yes"
    NO = "no"
    UNCHECKED = "unchecked"


@dataclass(frozen=True)
class RobinParameter:
    beta: float
    admissible: Admissibility = Admissibility.UNCHECKED

    def __post_init__(self):
        if self.beta == 0:
            raise ValueError("beta must be nonzero (Neumann case excluded)")
        object.__setattr__(self, "beta", float(self.beta))


def as_parameter(beta: Union[float, RobinParameter]) -> RobinParameter:
    if isinstance(beta, RobinParameter):
        return beta
    b = float(beta)
    return RobinParameter(b, Admissibility.YES if b > 0 else Admissibility.UNCHECKED)


# -- assembly ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VolumeData:
    """Geometric factors at the volume quadrature points of every element."""

    points: np.ndarray      # reference (nq, 2)
    weights: np.ndarray     # (nq,)
    x: np.ndarray           # physical (ne, nq, 2)
    detJ: np.ndarray        # (ne, nq)
    invJ: np.ndarray        # (ne, nq, 2, 2)
    phi: np.ndarray         # (nq, nloc)
    grad: np.ndarray        # physical gradients (ne, nq, nloc, 2)

    @property
    def dx(self) -> np.ndarray:
        """Quadrature measure (ne, nq)."""
        return self.detJ * self.weights


def volume_data(mesh: Mesh, degree: int = _VOLUME_DEGREE) -> VolumeData:
    pts, w = triangle_rule(degree)
    J = jacobians(mesh, pts)
    det = np.linalg.det(J)
    inv = np.linalg.inv(J)
    phi = sf.values(mesh.order, pts)
    dphi = sf.grad(mesh.order, pts)
    grad = np.einsum("eqdc,qid->eqic", inv, dphi)
    x = np.einsum("eic,qi->eqc", mesh.element_coords(), phi)
    return VolumeData(pts, w, x, det, inv, phi, grad)


def _scatter(mesh_dofs: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    nloc = mesh_dofs.shape[1]
    rows = np.repeat(mesh_dofs, nloc, axis=1).ravel()
    cols = np.tile(mesh_dofs, (1, nloc)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class RobinSystem:
    """Assembled forms of a mesh, reusable across beta values."""

    mesh: Mesh
    K: sp.csr_matrix
    B: sp.csr_matrix
    load: np.ndarray

    def matrix(self, beta: float) -> sp.csr_matrix:
        return (self.K + beta * self.B).tocsr()

    def rhs(self) -> np.ndarray:
        return -N_DIM * self.load

    @cached_property
    def volume(self) -> VolumeData:
        return volume_data(self.mesh)


def assemble(mesh: Mesh) -> RobinSystem:
    vd = volume_data(mesh)
    n = mesh.n_nodes
    dx = vd.dx
    Ke = np.einsum("eq,eqic,eqjc->eij", dx, vd.grad, vd.grad)
    K = _scatter(mesh.triangles, Ke, n)
    load = np.zeros(n)
    np.add.at(load, mesh.triangles, np.einsum("eq,qi->ei", dx, vd.phi))

    t, w = gauss_legendre(_EDGE_POINTS)
    psi = sf.edge_values(mesh.order, t)
    dpsi = sf.edge_grad(mesh.order, t)
    xe = mesh.nodes[mesh.boundary_edges]
    ds = np.linalg.norm(np.einsum("eic,qi->eqc", xe, dpsi), axis=-1) * w
    Be = np.einsum("eq,qi,qj->eij", ds, psi, psi)
    B = _scatter(mesh.boundary_edges, Be, n)
    system = RobinSystem(mesh, K, B, load)
    object.__setattr__(system, "volume", vd)  # seed the cache
    return system


# -- solution ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RobinSolution:
    mesh: Mesh
    beta: RobinParameter
    dof_values: np.ndarray
    system: RobinSystem
    rcond: Optional[float] = None
    N_dim: int = N_DIM

    @property
    def b(self) -> float:
        return self.beta.beta

    def residual(self) -> float:
        """Relative weak-form residual ||(K + beta B) x + N m|| / ||N m||."""
        A = self.system.matrix(self.b)
        r = A @ self.dof_values - self.system.rhs()
        return float(np.linalg.norm(r) / np.linalg.norm(self.system.rhs()))

    def evaluate(self, elements: np.ndarray, ref_points: np.ndarray):
        """u and grad u at reference points; ``ref_points`` is (m, nq, 2) per element."""
        mesh = self.mesh
        X = mesh.element_coords()[elements]                        # (m, nloc, 2)
        U = self.dof_values[mesh.triangles[elements]]              # (m, nloc)
        flat = ref_points.reshape(-1, 2)
        m, nq = ref_points.shape[:2]
        phi = sf.values(mesh.order, flat).reshape(m, nq, -1)
        dphi = sf.grad(mesh.order, flat).reshape(m, nq, -1, 2)
        J = np.einsum("mic,mqid->mqcd", X, dphi)
        inv = np.linalg.inv(J)
        gref = np.einsum("mi,mqid->mqd", U, dphi)
        grad = np.einsum("mqdc,mqd->mqc", inv, gref)
        u = np.einsum("mi,mqi->mq", U, phi)
        return u, grad

    def element_hessian(self, elements: np.ndarray, ref_points: np.ndarray) -> np.ndarray:
        """Exact Hessian of the (isoparametric) discrete solution, (m, nq, 2, 2).

        H_x = J^{-T} (H_xi u - sum_c d_c u H_xi x_c) J^{-1}.
        """
        mesh = self.mesh
        if mesh.order < 2:
            raise OrderTooLow("second derivatives need an order-2 mesh")
        X = mesh.element_coords()[elements]
        U = self.dof_values[mesh.triangles[elements]]
        m, nq = ref_points.shape[:2]
        dphi = sf.grad(mesh.order, ref_points.reshape(-1, 2)).reshape(m, nq, -1, 2)
        hphi = sf.hess(mesh.order)
        J = np.einsum("mic,mqid->mqcd", X, dphi)
        inv = np.linalg.inv(J)
        gref = np.einsum("mi,mqid->mqd", U, dphi)
        grad = np.einsum("mqdc,mqd->mqc", inv, gref)
        Hu = np.einsum("mi,ide->mde", U, hphi)
        Hx = np.einsum("mic,ide->mcde", X, hphi)
        Hr = Hu[:, None] - np.einsum("mqc,mcde->mqde", grad, Hx)
        return np.einsum("mqdc,mqde,mqef->mqcf", inv, Hr, inv)

    def values_at_quadrature(self):
        vd = self.system.volume
        U = self.dof_values[self.mesh.triangles]
        return np.einsum("ei,qi->eq", U, vd.phi), np.einsum("ei,eqic->eqc", U, vd.grad)

    def integrate(self, f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]) -> float:
        """int_Omega f(x, u, grad u) by element quadrature."""
        vd = self.system.volume
        u, g = self.values_at_quadrature()
        return float(np.sum(f(vd.x, u, g) * vd.dx))

    def l2_error(self, exact: Callable[[np.ndarray], np.ndarray], relative: bool = True) -> float:
        vd = self.system.volume
        u, _ = self.values_at_quadrature()
        ex = exact(vd.x)
        err = np.sqrt(np.sum((u - ex) ** 2 * vd.dx))
        if relative:
            err /= np.sqrt(np.sum(ex**2 * vd.dx))
        return float(err)


def _condition_estimate(A: sp.csc_matrix, lu) -> float:
    n = A.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"),
                              dtype=float)
    norm_a = spla.onenormest(A)
    norm_inv = spla.onenormest(inv)
    return float(1.0 / (norm_a * norm_inv))


def _resonance_message(system: RobinSystem, b: float, detail: str) -> str:
    from .steklov import boundary_eigenvalues
    try:
        mu = boundary_eigenvalues(system)
        k = int(np.argmin(np.abs(mu + b)))
        head = f"singular system (\u03b2 \u2248 \u2212\u03bc_{k})"
    except Exception:  # the message must not mask the original failure
        head = "singular system"
    return f"{head}: beta={b:g}, {detail}"


def solve_robin(mesh: Mesh, beta: Union[float, RobinParameter], system: Optional[RobinSystem] = None,
                check_resonance: bool = True, resonance_rtol: float = RESONANCE_RTOL) -> RobinSolution:
    """Solve the Robin torsion problem on ``mesh``.

    beta > 0: Jacobi-preconditioned CG (the system is SPD).
    beta < 0: sparse LU with a 1-norm reciprocal condition estimate.  When
    ``check_resonance`` is on, the discrete Steklov eigenvalues nearest to
    -beta are also computed and a relative gap below ``resonance_rtol`` is
    treated as singular.
    """
    param = as_parameter(beta)
    b = param.beta
    system = system or assemble(mesh)
    A = system.matrix(b)
    rhs = system.rhs()
    rcond = None
    if b > 0:
        d = A.diagonal()
        M = spla.LinearOperator(A.shape, matvec=lambda v: v / d, dtype=float)
        x, info = spla.cg(A, rhs, rtol=CG_RTOL, atol=0.0, maxiter=20 * A.shape[0], M=M)
        if info != 0:
            raise NonConvergence(f"CG stalled (info={info})")
    else:
        Ac = A.tocsc()
        try:
            lu = spla.splu(Ac)
        except RuntimeError as exc:
            raise SingularSystem(_resonance_message(system, b, str(exc))) from exc
        rcond = _condition_estimate(Ac, lu)
        if not np.isfinite(rcond) or rcond < RCOND_MIN:
            raise SingularSystem(_resonance_message(system, b, f"rcond={rcond:.2e}"))
        if check_resonance:
            from .steklov import nearest_eigenvalue
            mu = nearest_eigenvalue(system, -b)
            if abs(mu + b) <= resonance_rtol * abs(b):
                raise SingularSystem(_resonance_message(system, b, f"discrete eigenvalue {mu:.8g}"))
        x = lu.solve(rhs)
    log.debug("solved beta=%g on %d dofs", b, x.size)
    return RobinSolution(mesh, param, x, system, rcond)


def torsional_rigidity(sol: RobinSolution) -> float:
    """(1/N) int (-u)."""
    return float(-(sol.system.load @ sol.dof_values) / sol.N_dim)


# -- boundary traces --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Solution and exact-geometry data at boundary quadrature points.

    Arrays are flat over (edge, point).  ``weight`` is the exact arclength
    weight |gamma'(theta)| dtheta, so ``sum(weight * f)`` is oint f dH.
    """

    theta: np.ndarray
    weight: np.ndarray
    point: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    kappa: np.ndarray
    u: np.ndarray
    grad: np.ndarray
    du_dn: np.ndarray
    du_ds: np.ndarray
    elements: np.ndarray
    ref_points: np.ndarray
    beta: float = float("nan")

    @property
    def flux(self) -> np.ndarray:
        """Normal derivative from the Robin condition, -beta u.

        The boundary values converge one order faster than the gradient, so
        this is the accurate d_nu u for boundary integrals.
        """
        return -self.beta * self.u

    @property
    def dtang_u(self) -> np.ndarray:
        """|grad_tau u|."""
        return np.abs(self.du_ds)

    def integral(self, f) -> float:
        return float(np.sum(self.weight * f))

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.weight))


def boundary_trace(sol: RobinSolution, quadrature_order: int = _EDGE_POINTS) -> BoundaryTrace:
    """Evaluate u and grad u on boundary elements at Gauss points in theta.

    The FE side is sampled at the same edge parameter on the isoparametric
    edge; normals, tangents and curvature come from the exact curve.
    """
    mesh = sol.mesh
    t, w = gauss_legendre(quadrature_order)
    th0, th1 = mesh.boundary_theta[:, 0], mesh.boundary_theta[:, 1]
    dth = th1 - th0
    theta = th0[:, None] + dth[:, None] * t[None, :]
    ref = sf.edge_to_reference(mesh.boundary_local_edge, t)
    u, grad = sol.evaluate(mesh.boundary_element, ref)
    geo = eval_boundary(mesh.curve, theta)
    weight = (dth[:, None] * w[None, :]) * geo.density
    du_dn = np.sum(grad * geo.normal, axis=-1)
    du_ds = np.sum(grad * geo.tangent, axis=-1)
    ne, nq = theta.shape
    elements = np.repeat(mesh.boundary_element, nq)
    return BoundaryTrace(theta.ravel(), weight.ravel(), geo.point.reshape(-1, 2), geo.normal.reshape(-1, 2),
                         geo.tangent.reshape(-1, 2), geo.kappa.ravel(), u.ravel(), grad.reshape(-1, 2),
                         du_dn.ravel(), du_ds.ravel(), elements, ref.reshape(-1, 2), float(sol.b))


# -- Hessian recovery ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RecoveredHessian:
    """Patch-averaged Hessian: vertex values interpolated linearly per element."""

    mesh: Mesh
    vertex_values: np.ndarray    # (n_vertices, 2, 2)
    quadrature_values: np.ndarray  # (ne, nq, 2, 2) at the volume rule points

    def at(self, elements: np.ndarray, ref_points: np.ndarray) -> np.ndarray:
        """Recovered Hessian at reference points, ``ref_points`` (m, 2) paired with ``elements``."""
        lam = sf.values(1, ref_points)
        V = self.vertex_values[self.mesh.vertex_triangles[elements]]  # (m, 3, 2, 2)
        return np.einsum("mi,micd->mcd", lam, V)


def recovered_hessian(sol: RobinSolution, n_fit: int = 12, layers: int = 1) -> RecoveredHessian:
    """Recovered P1 Hessian field.

    Interior vertices take the area-weighted patch average of element
    Hessians at centroids.  Elements touching the boundary carry an O(h)
    layer error, so vertices of those elements are instead fitted by linear
    least squares to the ``n_fit`` nearest centroids of elements clear of the
    boundary.
    """
    mesh = sol.mesh
    if mesh.order < 2:
        raise OrderTooLow("Hessian recovery needs an order-2 mesh")
    ne = mesh.n_elements
    centroid = np.full((ne, 1, 2), 1.0 / 3.0)
    He = sol.element_hessian(np.arange(ne), centroid)[:, 0]
    vd = sol.system.volume
    area = vd.dx.sum(axis=1)
    tri = mesh.vertex_triangles
    on_bnd = np.zeros(mesh.n_vertices, dtype=bool)
    on_bnd[mesh.boundary_edges[:, :2].ravel()] = True
    layer = on_bnd[tri].any(axis=1)
    for _ in range(layers - 1):
        on_bnd[tri[layer].ravel()] = True
        layer = on_bnd[tri].any(axis=1)
    clean = ~layer
    acc = np.zeros((mesh.n_vertices, 2, 2))
    wsum = np.zeros(mesh.n_vertices)
    for i in range(3):
        np.add.at(acc, tri[clean, i], He[clean] * area[clean, None, None])
        np.add.at(wsum, tri[clean, i], area[clean])
    vertex = acc / np.maximum(wsum, 1e-300)[:, None, None]

    fit = np.unique(tri[layer])
    clean_idx = np.nonzero(clean)[0]
    if clean_idx.size >= n_fit:
        xc = np.einsum("eic->ec", mesh.nodes[tri]) / 3.0
        tree = cKDTree(xc[clean_idx])
        _, nb = tree.query(mesh.nodes[fit], k=n_fit)
        nb = clean_idx[nb]
        for v, ids in zip(fit, nb):
            d = xc[ids] - mesh.nodes[v]
            A = np.column_stack([np.ones(n_fit), d])
            coef, *_ = np.linalg.lstsq(A, He[ids].reshape(n_fit, 4), rcond=None)
            vertex[v] = coef[0].reshape(2, 2)
    else:
        # too coarse for a clean interior: plain patch average
        acc[:] = 0.0
        wsum[:] = 0.0
        for i in range(3):
            np.add.at(acc, tri[:, i], He * area[:, None, None])
            np.add.at(wsum, tri[:, i], area)
        vertex = acc / wsum[:, None, None]
    lam = sf.values(1, vd.points)
    qv = np.einsum("qi,eicd->eqcd", lam, vertex[tri])
    return RecoveredHessian(mesh, vertex, qv)


# -- export -----------------------------------------------------------------


def export_solution_csv(sol: RobinSolution, path) -> None:
    x = sol.mesh.nodes
    data = np.column_stack([np.arange(sol.mesh.n_nodes), x[:, 0], x[:, 1], sol.dof_values])
    np.savetxt(Path(path), data, delimiter=",", header="node_index,x,y,u", comments="",
               fmt=["%d", "%.17g", "%.17g", "%.17g"])


def export_trace_csv(trace: BoundaryTrace, curve, path) -> None:
    s = arclength(curve, trace.theta)
    data = np.column_stack([trace.theta, s, trace.u, trace.du_dn, trace.dtang_u, trace.kappa])
    np.savetxt(Path(path), data, delimiter=",", header="theta,s,u,du_dn,dtang_u,kappa", comments="",
               fmt="%.17g")
