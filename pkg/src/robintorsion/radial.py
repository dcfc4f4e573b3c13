"""Closed-form Robin torsion data on balls B_R(z) in any dimension N >= 2.

    q(x) = |x - z|^2 / 2 - R^2 / 2 - R / beta,
    grad q = x - z,  Lap q = N,  q = -R/beta and d_nu q = R on the sphere,
    Steklov eigenvalues mu_k = k / R.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import OutsideBall

RESONANCE_CUTOFF = 10_000
_RESONANCE_TOL = 1e-12


def ball_volume(N: int, R: float = 1.0) -> float:
    """|B_R| in R^N; even N uses pi^k / k! directly."""
    if N % 2 == 0:
        k = N // 2
        return math.pi**k / math.factorial(k) * R**N
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1) * R**N


def _resonant(beta: float, R: float) -> bool:
    x = Fraction(beta) * Fraction(R)
    if x.denominator == 1 and -RESONANCE_CUTOFF <= x <= -1:
        return True
    xf = -beta * R
    k = round(xf)
    return 1 <= k <= RESONANCE_CUTOFF and abs(xf - k) <= _RESONANCE_TOL * k


@dataclass(frozen=True)
class RadialCase:
    N: int
    R: float
    beta: float
    z: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.beta == 0:
            raise ValueError("beta must be nonzero")
        z = np.zeros(self.N) if self.z is None else np.asarray(self.z, dtype=float).reshape(self.N)
        object.__setattr__(self, "z", z)
        if _resonant(self.beta, self.R):
            raise ValueError(f"beta*R = {self.beta * self.R:g} is -k: -beta is a Steklov eigenvalue of the ball")

    @property
    def M0(self) -> float:
        return 1.0 / self.R

    @property
    def boundary_value(self) -> float:
        return -self.R / self.beta


def q_value(case: RadialCase, x, tol: float = 1e-12):
    """q at point(s) ``x`` (last axis of length N)."""
    x = np.asarray(x, dtype=float)
    d2 = np.sum((x - case.z) ** 2, axis=-1)
    if np.any(d2 > (case.R * (1 + tol)) ** 2):
        raise OutsideBall(f"|x - z| exceeds R = {case.R}")
    return 0.5 * d2 - 0.5 * case.R**2 - case.R / case.beta


def q_formula(case: RadialCase, x):
    """The same polynomial without the domain check (for error norms on approximate domains)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * np.sum((x - case.z) ** 2, axis=-1) - 0.5 * case.R**2 - case.R / case.beta


def q_gradient(case: RadialCase, x):
    return np.asarray(x, dtype=float) - case.z


def q_laplacian(case: RadialCase) -> float:
    return float(case.N)


def serrin_constant(case: RadialCase) -> float:
    """C = -R^2 - R (N + 1) / beta."""
    return -case.R**2 - case.R * (case.N + 1) / case.beta


def serrin_constant_from_boundary(case: RadialCase) -> float:
    """|grad q|^2 + 2Nq - 2 beta^2 q^2 + (N-1) beta q^2 M0 on the sphere."""
    q = case.boundary_value
    N, b = case.N, case.beta
    return case.R**2 + 2 * N * q - 2 * b * b * q * q + (N - 1) * b * q * q * case.M0


def torsional_rigidity_ball(case: RadialCase) -> float:
    """T_beta(B_R) = |B_R| / N (R^2 / (N + 2) + R / beta)."""
    N, R = case.N, case.R
    return ball_volume(N, R) / N * (R**2 / (N + 2) + R / case.beta)


def dirichlet_rigidity_ball(N: int, R: float) -> float:
    """beta -> +infinity limit of T_beta(B_R)."""
    return ball_volume(N, R) / N * R**2 / (N + 2)


def steklov_eigenvalues_ball(R: float, m: int, N: int = 2) -> np.ndarray:
    """mu_0..mu_m of B_R in the plane (mu_k = k/R, each k >= 1 twice)."""
    if N != 2:
        raise NotImplementedError("multiplicities listed for N = 2 only")
    ks = [0] + [k for k in range(1, m + 1) for _ in range(2)]
    return np.array(ks[: m + 1], dtype=float) / R


def radius_for_area(area: float) -> float:
    return math.sqrt(area / math.pi)
