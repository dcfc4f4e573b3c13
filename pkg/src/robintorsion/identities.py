"""P-function integral identities and deficit functionals for Robin torsion.

Every identity is evaluated twice, by routes that share nothing but the
discrete solution:

* the left side by volume quadrature of the recovered Hessian
  (``P = |grad u|^2 / 2 - u`` has ``Lap P = |D^2 u|^2 - (Lap u)^2 / N``),
  plus any boundary deficit term it carries;
* the right side from the boundary trace and the exact curve geometry.

In the plane the shape operator has the single eigenvalue ``kappa`` along the
tangent, so ``<(grad nu) g, g> = kappa |g|^2`` for tangential ``g``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import OrderTooLow
from .fem import BoundaryTrace, RecoveredHessian, RobinSolution, boundary_trace, recovered_hessian
from .geometry import (DEFAULT_NODES, N_DIM, BoundaryCurve, GeometrySummary, d_ds, eval_boundary,
                       summarize, uniform_grid)

REL_GAP_FLOOR = 1e-3


# -- containers -------------------------------------------------------------


@dataclass
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    abs_gap: float
    rel_gap: float
    h: float
    terms: dict = field(default_factory=dict)
    lhs_terms: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class DeficitReport:
    serrin_deficit: float
    tangential_energy: float
    curvature_weighted: float
    overdet_residual: float
    sbt_deficit: float
    kappa_min: float
    kappa_max: float
    beta: float
    flags: dict = field(default_factory=dict)
    h: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


class AnalyticField(NamedTuple):
    """Scalar field with exact gradient and Hessian, all taking (..., 2) points."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]


class _Context:
    """Shared evaluation state of one solution (trace, Hessian, geometry)."""

    def __init__(self, sol: RobinSolution, trace: Optional[BoundaryTrace] = None,
                 hessian: Optional[RecoveredHessian] = None, geometry: Optional[GeometrySummary] = None):
        if sol.mesh.order < 2:
            raise OrderTooLow("identities need an order-2 solution")
        self.sol = sol
        self.beta = sol.b
        self.N = sol.N_dim
        self.trace = trace or boundary_trace(sol)
        self.hess = hessian or recovered_hessian(sol)
        self.geom = geometry or summarize(sol.mesh.curve)

    @property
    def grad_sq(self) -> float:
        t = self.trace
        return t.integral(t.flux**2 + t.du_ds**2)

    def floor(self) -> float:
        return REL_GAP_FLOOR * self.grad_sq


def _report(name, lhs_terms, terms, ctx: _Context, diagnostics=None) -> IdentityReport:
    lhs = 0.0
    for v in lhs_terms.values():
        lhs += v
    rhs = 0.0
    for v in terms.values():
        rhs += v
    gap = abs(lhs - rhs)
    scale = max(abs(lhs), abs(rhs), ctx.floor())
    return IdentityReport(name, float(lhs), float(rhs), float(gap), float(gap / scale), float(ctx.sol.mesh.h),
                          {k: float(v) for k, v in terms.items()}, {k: float(v) for k, v in lhs_terms.items()},
                          {k: float(v) for k, v in (diagnostics or {}).items()})


# -- P-function -------------------------------------------------------------


class PField:
    """P = |grad u|^2 / 2 - u with the recovered-Hessian Laplacian."""

    def __init__(self, sol: RobinSolution, hessian: Optional[RecoveredHessian] = None):
        self.sol = sol
        self.hess = hessian or recovered_hessian(sol)

    def values(self) -> np.ndarray:
        u, g = self.sol.values_at_quadrature()
        return 0.5 * np.sum(g**2, axis=-1) - u

    def laplacian(self) -> np.ndarray:
        """|D^2 u|^2 - (tr D^2 u)^2 / N at the volume quadrature points."""
        H = self.hess.quadrature_values
        tr = np.einsum("eqcc->eq", H)
        return np.einsum("eqcd,eqcd->eq", H, H) - tr**2 / self.sol.N_dim

    def cauchy_schwarz_margin(self) -> np.ndarray:
        """|D^2 u|^2 - (Lap u)^2 / N with the exact Lap u = N, pointwise."""
        H = self.hess.quadrature_values
        return np.einsum("eqcd,eqcd->eq", H, H) - self.sol.N_dim

    def integral(self) -> float:
        return float(np.sum(self.laplacian() * self.sol.system.volume.dx))


# -- identities -------------------------------------------------------------


def _boundary_terms(ctx: _Context):
    t = ctx.trace
    un, ut, k = t.flux, t.du_ds, t.kappa
    return {
        "curvature": -t.integral(k * ut * ut),
        "tangential": -ctx.beta * t.integral(ut * ut),
        "un": un,
        "ut": ut,
        "kappa": k,
    }


def _hess_nn(ctx: _Context) -> np.ndarray:
    t = ctx.trace
    H = ctx.hess.at(t.elements, t.ref_points)
    return np.einsum("mc,mcd,md->m", t.normal, H, t.normal)


def normal_hessian_gap(sol: RobinSolution, ctx: Optional[_Context] = None) -> float:
    """oint | <D^2u grad u, nu> - <grad u, nu><D^2u nu, nu> + (beta + kappa)|grad_tau u|^2 |."""
    ctx = ctx or _Context(sol)
    t = ctx.trace
    H = ctx.hess.at(t.elements, t.ref_points)
    lhs = np.einsum("mc,mcd,md->m", t.normal, H, t.grad)
    hnn = np.einsum("mc,mcd,md->m", t.normal, H, t.normal)
    # pointwise identity in grad u: use the same gradient on both sides
    rhs = t.du_dn * hnn - (ctx.beta + t.kappa) * t.du_ds**2
    return t.integral(np.abs(lhs - rhs))


def fundamental_identity(sol: RobinSolution, ctx: Optional[_Context] = None) -> IdentityReport:
    ctx = ctx or _Context(sol)
    bt = _boundary_terms(ctx)
    t, N = ctx.trace, ctx.N
    un, k = bt["un"], bt["kappa"]
    pf = PField(sol, ctx.hess)
    terms = {
        "curvature": bt["curvature"],
        "tangential": 2 * bt["tangential"],
        "mean_curvature": -(N - 1) * t.integral(un * (un * k - 1)),
    }
    diagnostics = {
        "residual_un_M_minus_1": t.integral(un * (un * k - 1)),
        "residual_1_minus_hnn": t.integral(un * (1 - _hess_nn(ctx))),
    }
    return _report("fundamental", {"volume": pf.integral()}, terms, ctx, diagnostics)


def sbt_identity(sol: RobinSolution, ctx: Optional[_Context] = None) -> IdentityReport:
    ctx = ctx or _Context(sol)
    bt = _boundary_terms(ctx)
    t, N, R, M0 = ctx.trace, ctx.N, ctx.geom.R, ctx.geom.M0
    un, k = bt["un"], bt["kappa"]
    pf = PField(sol, ctx.hess)
    lhs_terms = {"volume": pf.integral(), "flux_deficit": (N - 1) * M0 * t.integral((un - R) ** 2)}
    terms = {
        "curvature": bt["curvature"],
        "tangential": 2 * bt["tangential"],
        "mean_curvature_excess": -(N - 1) * t.integral(un * un * (k - M0)),
    }
    return _report("soap_bubble", lhs_terms, terms, ctx, {"R": R, "M0": M0})


def overdetermined_density(trace: BoundaryTrace, beta: float, N: int = N_DIM) -> np.ndarray:
    """G = |grad u|^2 + 2Nu - 2 beta^2 u^2 + (N-1) beta u^2 M at boundary points."""
    u = trace.u
    grad_sq = trace.flux**2 + trace.du_ds**2
    return grad_sq + 2 * N * u - 2 * beta**2 * u**2 + (N - 1) * beta * u**2 * trace.kappa


def overdetermined_residual(trace: BoundaryTrace, beta: float, N: int = N_DIM):
    """(L2 norm of G - mean G, mean G)."""
    G = overdetermined_density(trace, beta, N)
    mean = trace.integral(G) / trace.perimeter
    return float(np.sqrt(trace.integral((G - mean) ** 2))), float(mean)


def serrin_identity(sol: RobinSolution, ctx: Optional[_Context] = None) -> IdentityReport:
    ctx = ctx or _Context(sol)
    bt = _boundary_terms(ctx)
    t, R = ctx.trace, ctx.geom.R
    un = bt["un"]
    pf = PField(sol, ctx.hess)
    lhs_terms = {"volume": pf.integral(), "flux_deficit": ctx.beta * t.integral((un - R) ** 2)}
    terms = {"curvature": bt["curvature"], "tangential": bt["tangential"]}
    resid, mean = overdetermined_residual(t, ctx.beta, ctx.N)
    C = -R**2 - R * (ctx.N + 1) / ctx.beta
    return _report("serrin_robin", lhs_terms, terms, ctx,
                   {"overdet_residual": resid, "G_mean": mean, "C": C})


def deficits(sol: RobinSolution, trace: Optional[BoundaryTrace] = None,
             geometry: Optional[GeometrySummary] = None) -> DeficitReport:
    """Boundary deficit functionals and the hypothesis flags of the rigidity theorems."""
    t = trace or boundary_trace(sol)
    g = geometry or summarize(sol.mesh.curve)
    beta = sol.b
    un, ut = t.flux, t.du_ds
    resid, _ = overdetermined_residual(t, beta, sol.N_dim)
    flags = {
        "beta_plus_kappa_min": beta + g.kappa_min,
        "kappa_min_plus_2beta": g.kappa_min + 2 * beta,
        "kappa_min_plus_beta": g.kappa_min + beta,
    }
    return DeficitReport(
        serrin_deficit=t.integral((un - g.R) ** 2),
        tangential_energy=t.integral(ut * ut),
        curvature_weighted=t.integral(t.kappa * ut * ut),
        overdet_residual=resid,
        sbt_deficit=t.integral(un * un * (t.kappa - g.M0)),
        kappa_min=g.kappa_min,
        kappa_max=g.kappa_max,
        beta=beta,
        flags={k: float(v) for k, v in flags.items()},
        h=float(sol.mesh.h),
    )


def evaluate_all(sol: RobinSolution) -> dict:
    """All identity reports and deficits of one solution sharing one trace/Hessian."""
    ctx = _Context(sol)
    return {
        "fundamental": fundamental_identity(sol, ctx),
        "soap_bubble": sbt_identity(sol, ctx),
        "serrin_robin": serrin_identity(sol, ctx),
        "hessian_gap": normal_hessian_gap(sol, ctx),
        "deficits": deficits(sol, ctx.trace, ctx.geom),
    }


# -- boundary decomposition of the Laplacian ------------------------------------


def reilly_residual(curve: BoundaryCurve, test_field: AnalyticField, n: int = DEFAULT_NODES) -> float:
    """max | Lap v - (Lap_tau v + kappa d_nu v + <D^2 v nu, nu>) | on the curve.

    Lap_tau v is d^2 (v o gamma) / ds^2 by spectral differentiation.
    """
    g = eval_boundary(curve, uniform_grid(n))
    v = test_field.value(g.point)
    grad = test_field.gradient(g.point)
    H = test_field.hessian(g.point)
    lap = np.einsum("mcc->m", H)
    lap_tau = d_ds(d_ds(v, g.density), g.density)
    dn = np.sum(grad * g.normal, axis=-1)
    hnn = np.einsum("mc,mcd,md->m", g.normal, H, g.normal)
    return float(np.max(np.abs(lap - (lap_tau + (N_DIM - 1) * g.kappa * dn + hnn))))
