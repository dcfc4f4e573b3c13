"""Area-constrained gradient flow of the Robin torsional rigidity.

The boundary density

    G = |grad u|^2 + 2N u - 2 beta^2 u^2 + (N-1) beta u^2 kappa

is constant exactly on critical domains.  Differentiating the energy
characterisation of T_beta under a normal boundary velocity V_n gives
dT = c* oint G V_n with c* = -1/N^2, and ``directional_derivative_check``
confirms this against central finite differences of the discrete T_beta.

Curves move in the radial Fourier representation: a normal velocity V_n
becomes the radial increment V_n sqrt(r^2 + r'^2) / r, which is projected
onto modes 0..K, smoothed by the H^1 weight 1 / (1 + k^2) (G acts on r
like a second-order operator, so the raw gradient step is stiff), and
followed by an exact area rescaling.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import AdmissibilityLost, InvertedElement, PositivityViolation, StepFailure, WindowTooSmall
from .fem import (Admissibility, BoundaryTrace, RobinSolution, assemble, boundary_trace, solve_robin,
                  torsional_rigidity)
from .geometry import N_DIM, BoundaryCurve, eval_boundary
from .mesh import build_mesh
from .steklov import check_admissibility, steklov_spectrum

log = logging.getLogger(__name__)

C_STAR = -1.0 / N_DIM**2
MODE_CAP = 16
FLOW_LEVEL = 2
DEGENERATE_TOL = 1e-6


# -- densities --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GradientField:
    """Boundary samples of G with their arclength weights."""

    theta: np.ndarray
    weight: np.ndarray
    values: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.sum(self.weight * self.values) / np.sum(self.weight))

    @property
    def deviation(self) -> np.ndarray:
        return self.values - self.mean

    def l2_deviation(self) -> float:
        return float(np.sqrt(np.sum(self.weight * self.deviation**2)))


def shape_gradient_density(sol: RobinSolution, trace: Optional[BoundaryTrace] = None) -> GradientField:
    """G at the boundary quadrature points (normal derivative from the Robin condition)."""
    from .identities import overdetermined_density

    t = trace or boundary_trace(sol)
    return GradientField(t.theta, t.weight, overdetermined_density(t, sol.b, sol.N_dim))


def curve_area(curve: BoundaryCurve) -> float:
    """Exact area pi (r0^2 + sum (a_k^2 + b_k^2) / 2)."""
    return float(np.pi * (curve.r0**2 + 0.5 * curve.fourier_energy()))


def project_modes(theta: np.ndarray, dtheta_weight: np.ndarray, values: np.ndarray, K: int):
    """Fourier coefficients (c0, a_1..a_K, b_1..b_K) of samples with theta-quadrature weights."""
    k = np.arange(1, K + 1)
    cos = np.cos(np.multiply.outer(theta, k))
    sin = np.sin(np.multiply.outer(theta, k))
    c0 = np.sum(dtheta_weight * values) / (2 * np.pi)
    a = (dtheta_weight * values) @ cos / np.pi
    b = (dtheta_weight * values) @ sin / np.pi
    return float(c0), a, b


def _theta_weights(curve: BoundaryCurve, theta: np.ndarray, weight: np.ndarray) -> np.ndarray:
    return weight / eval_boundary(curve, theta).density


def _modes_to_curve(curve: BoundaryCurve, c0: float, a: np.ndarray, b: np.ndarray) -> BoundaryCurve:
    K = max(curve.n_modes, a.size)
    na = np.zeros(K)
    nb = np.zeros(K)
    na[: curve.n_modes] = curve.a
    nb[: curve.n_modes] = curve.b
    na[: a.size] += a
    nb[: b.size] += b
    return curve.with_coefficients(curve.r0 + c0, na, nb)


# -- finite-difference validation -----------------------------------------


@dataclass
class DirectionalCheck:
    """One finite-difference probe; ``ratio`` is None for degenerate directions."""

    ratio: Optional[float]
    fd_derivative: float
    predicted: float
    status: str


def _as_perturbation(V) -> tuple:
    """Normalise a direction given as [[k, a, b], ...] (k = 0 is the constant mode)."""
    c0 = 0.0
    K = max((int(m[0]) for m in V), default=0)
    a = np.zeros(K)
    b = np.zeros(K)
    for k, ak, bk in V:
        k = int(k)
        if k == 0:
            c0 += ak
        else:
            a[k - 1] += ak
            b[k - 1] += bk
    return c0, a, b


def _rigidity(curve: BoundaryCurve, beta: float, level: int, check_window: bool) -> float:
    mesh = build_mesh(curve, level)
    system = assemble(mesh)
    if beta < 0 and check_window:
        _certify(mesh, beta, system)
    return torsional_rigidity(solve_robin(mesh, beta, system))


def _certify(mesh, beta: float, system=None, m: int = 6) -> float:
    """mu_1 of the mesh, raising AdmissibilityLost when beta < 0 is not admissible."""
    while True:
        spec = steklov_spectrum(mesh, m, system)
        try:
            param = check_admissibility(spec, beta)
            break
        except WindowTooSmall:
            m *= 2
    if param.admissible is not Admissibility.YES:
        raise AdmissibilityLost(f"beta={beta:g} is within the margin of the Steklov spectrum")
    return spec.mu1


def directional_derivative_check(curve: BoundaryCurve, beta: float, V: Sequence, step: Optional[float] = None,
                                 level: int = FLOW_LEVEL) -> List[DirectionalCheck]:
    """Compare central differences of T_beta with oint G V_n along radial perturbations.

    ``V`` is a list of directions, each a list of ``[k, a_k, b_k]`` so that
    delta r(theta) = sum a_k cos k theta + b_k sin k theta (k = 0 is the
    constant).  A direction whose predicted derivative vanishes relative to
    ``|G| |V_n|`` (e.g. any volume-preserving direction on the disk) is
    reported as degenerate instead of producing a ratio.
    """
    step = 1e-4 * curve.r0 if step is None else step
    mesh = build_mesh(curve, level)
    system = assemble(mesh)
    if beta < 0:
        _certify(mesh, beta, system)
    sol = solve_robin(mesh, beta, system)
    trace = boundary_trace(sol)
    G = shape_gradient_density(sol, trace)
    r = curve.radius(trace.theta)
    out = []
    for direction in V:
        c0, a, b = _as_perturbation(direction)
        dr = c0 + _series(trace.theta, a, b)
        vn = dr * r / np.sqrt(r**2 + curve.radius(trace.theta, 1) ** 2)
        denom = float(np.sum(trace.weight * G.values * vn))
        scale = float(np.sqrt(np.sum(trace.weight * G.values**2) * np.sum(trace.weight * vn**2)))
        plus = _modes_to_curve(curve, step * c0, step * a, step * b)
        minus = _modes_to_curve(curve, -step * c0, -step * a, -step * b)
        fd = (_rigidity(plus, beta, level, True) - _rigidity(minus, beta, level, True)) / (2 * step)
        if abs(denom) <= DEGENERATE_TOL * scale:
            out.append(DirectionalCheck(None, fd, denom, "degenerate direction"))
        else:
            out.append(DirectionalCheck(fd / denom, fd, denom, "ok"))
    return out


def _series(theta, a, b):
    k = np.arange(1, a.size + 1)
    kt = np.multiply.outer(theta, k)
    return np.cos(kt) @ a + np.sin(kt) @ b


def calibrate(checks: Iterable[DirectionalCheck]) -> float:
    """Mean of the non-degenerate ratios (the shape-gradient constant)."""
    r = [c.ratio for c in checks if c.ratio is not None]
    if not r:
        raise ValueError("every probe direction was degenerate")
    return float(np.mean(r))


def ratios_agree(checks: Iterable[DirectionalCheck], rtol: float = 0.01) -> bool:
    r = np.array([c.ratio for c in checks if c.ratio is not None])
    if r.size == 0:
        return False
    return bool(np.max(np.abs(r[:, None] - r[None, :])) <= rtol * np.min(np.abs(r)))


# -- flow -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShapeState:
    curve: BoundaryCurve
    T_beta: float
    G_field: GradientField
    projected_gradient_norm: float
    overdet_residual: float
    iteration: int
    area: float
    mu1: Optional[float] = None
    step: float = 0.0

    def fourier_energy(self) -> float:
        return self.curve.fourier_energy()


@dataclass
class FlowResult:
    states: List[ShapeState] = field(default_factory=list)
    converged: bool = False
    c_star: float = C_STAR

    @property
    def final(self) -> ShapeState:
        return self.states[-1]


def _evaluate(curve: BoundaryCurve, beta: float, level: int, iteration: int, step: float = 0.0) -> tuple:
    mesh = build_mesh(curve, level)
    system = assemble(mesh)
    mu1 = _certify(mesh, beta, system) if beta < 0 else None
    sol = solve_robin(mesh, beta, system)
    trace = boundary_trace(sol)
    G = shape_gradient_density(sol, trace)
    # the volume constraint removes the mean: projected norm = L2 norm of G - mean(G)
    pnorm = G.l2_deviation()
    state = ShapeState(curve, torsional_rigidity(sol), G, pnorm, pnorm, iteration,
                       curve_area(curve), mu1, step)
    return state, trace


def _advance(curve: BoundaryCurve, trace: BoundaryTrace, G: GradientField, coef: float, tau: float,
             K: int, area0: float) -> BoundaryCurve:
    theta = trace.theta
    r = curve.radius(theta)
    rp = curve.radius(theta, 1)
    dr = tau * coef * G.deviation * np.sqrt(r**2 + rp**2) / r
    wth = _theta_weights(curve, theta, trace.weight)
    c0, a, b = project_modes(theta, wth, dr, K)
    # H^1 (Sobolev) gradient: G acts like a second-order operator on r
    smooth = 1.0 / (1.0 + np.arange(1, K + 1) ** 2)
    new = _modes_to_curve(curve, c0, a * smooth, b * smooth)
    Kk = min(new.n_modes, K)
    new = new.with_coefficients(new.r0, new.a[:Kk], new.b[:Kk])
    return new.scaled(np.sqrt(area0 / curve_area(new)))


def flow(initial: BoundaryCurve, beta: float, max_iters: int = 200, tol: float = 1e-4, tau0: float = 1.0,
         level: int = FLOW_LEVEL, mode_cap: int = MODE_CAP, c_star: Optional[float] = None,
         max_backtracks: int = 30, grow: float = 1.5, energy_tol: Optional[float] = None) -> FlowResult:
    """Gradient ascent (beta > 0) or descent (beta < 0) of T_beta at fixed area.

    Each accepted step must change T_beta in the intended direction;
    rejected steps halve ``tau``.  Iteration stops once the projected
    gradient norm drops below ``tol`` (and, when given, the non-circular
    Fourier energy below ``energy_tol``).
    """
    if beta == 0:
        raise ValueError("beta must be nonzero")
    c = C_STAR if c_star is None else c_star
    sign = 1.0 if beta > 0 else -1.0
    coef = sign * c
    area0 = curve_area(initial)
    K = mode_cap
    if initial.n_modes > K:
        initial = initial.with_coefficients(initial.r0, initial.a[:K], initial.b[:K])
        initial = initial.scaled(np.sqrt(area0 / curve_area(initial)))
    state, trace = _evaluate(initial, beta, level, 0)
    result = FlowResult([state], c_star=c)
    tau = tau0

    def done(s: ShapeState) -> bool:
        ok = s.projected_gradient_norm < tol
        if energy_tol is not None:
            ok = ok and s.fourier_energy() < energy_tol
        return ok

    for it in range(1, max_iters + 1):
        if done(state):
            result.converged = True
            break
        for _ in range(max_backtracks):
            try:
                cand = _advance(state.curve, trace, state.G_field, coef, tau, K, area0)
                new, new_trace = _evaluate(cand, beta, level, it, tau)
            except (InvertedElement, PositivityViolation):
                # overshoot produced an unmeshable curve
                tau *= 0.5
                continue
            if sign * (new.T_beta - state.T_beta) >= 0:
                break
            tau *= 0.5
        else:
            raise StepFailure(f"no admissible step at iteration {it} (tau={tau:.3e})")
        log.info("iter %d T=%.12g grad=%.3e energy=%.3e tau=%.3g", it, new.T_beta,
                 new.projected_gradient_norm, new.fourier_energy(), tau)
        state, trace = new, new_trace
        result.states.append(state)
        tau *= grow
    else:
        result.converged = done(state)
    return result


def write_trajectory_csv(result: FlowResult, path, K: int = MODE_CAP) -> None:
    header = ["iter", "T_beta", "grad_norm", "overdet_residual", "area", "r0"]
    header += [f"a_{k}" for k in range(1, K + 1)] + [f"b_{k}" for k in range(1, K + 1)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in result.states:
            a = np.zeros(K)
            b = np.zeros(K)
            n = min(K, s.curve.n_modes)
            a[:n] = s.curve.a[:n]
            b[:n] = s.curve.b[:n]
            w.writerow([s.iteration] + [repr(float(x)) for x in
                                        [s.T_beta, s.projected_gradient_norm, s.overdet_residual, s.area,
                                         s.curve.r0, *a, *b]])
