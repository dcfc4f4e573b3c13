"""Steklov eigenvalues  K x = mu B x  via reduction to the boundary.

B vanishes on interior unknowns, so the interior block is eliminated by a
Schur complement (the discrete Dirichlet-to-Neumann map)

    S = K_bb - K_bi K_ii^{-1} K_ib,

leaving the small dense symmetric-definite pencil  S y = mu B_bb y.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import EigenNonConvergence, WindowTooSmall
from .fem import Admissibility, RobinParameter, RobinSystem, assemble
from .mesh import Mesh

MU0_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SteklovSpectrum:
    eigenvalues: np.ndarray
    mesh: Mesh
    m: int

    @property
    def mu1(self) -> float:
        return float(self.eigenvalues[1])


def _boundary_pencil(system: RobinSystem):
    cached = getattr(system, "_steklov_pencil", None)
    if cached is not None:
        return cached
    mesh = system.mesh
    bnd = mesh.boundary_nodes()
    mask = np.ones(mesh.n_nodes, dtype=bool)
    mask[bnd] = False
    inner = np.nonzero(mask)[0]
    K = system.K.tocsr()
    Kbb = K[bnd][:, bnd].toarray()
    Kbi = K[bnd][:, inner]
    Kii = K[inner][:, inner].tocsc()
    lu = spla.splu(Kii)
    X = lu.solve(Kbi.T.toarray())
    S = Kbb - Kbi @ X
    S = 0.5 * (S + S.T)
    Bbb = system.B.tocsr()[bnd][:, bnd].toarray()
    object.__setattr__(system, "_steklov_pencil", (S, Bbb))
    return S, Bbb


def boundary_eigenvalues(system: RobinSystem) -> np.ndarray:
    """All discrete Steklov eigenvalues (ascending)."""
    cached = getattr(system, "_steklov_all", None)
    if cached is not None:
        return cached
    S, Bbb = _boundary_pencil(system)
    try:
        mu = sla.eigh(S, Bbb, eigvals_only=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise EigenNonConvergence(str(exc)) from exc
    object.__setattr__(system, "_steklov_all", mu)
    return mu


def steklov_spectrum(mesh: Mesh, m: int, system: Optional[RobinSystem] = None) -> SteklovSpectrum:
    """The ``m + 1`` smallest Steklov eigenvalues mu_0 = 0 <= mu_1 <= ..."""
    if m < 1:
        raise ValueError("m must be >= 1")
    system = system or assemble(mesh)
    mu = boundary_eigenvalues(system)
    if mu.size < m + 1:
        raise EigenNonConvergence(f"only {mu.size} boundary unknowns for m={m}")
    mu = mu[: m + 1].copy()
    if abs(mu[0]) > MU0_TOL * max(1.0, mu[-1]):
        raise EigenNonConvergence(f"mu_0 = {mu[0]:.3e} is not zero")
    mu[0] = 0.0
    return SteklovSpectrum(mu, mesh, m)


def nearest_eigenvalue(system: RobinSystem, target: float) -> float:
    mu = boundary_eigenvalues(system)
    return float(mu[np.argmin(np.abs(mu - target))])


def default_margin(spectrum: SteklovSpectrum) -> float:
    return 0.05 * spectrum.mu1


def check_admissibility(spectrum: SteklovSpectrum, beta: float, margin: Optional[float] = None) -> RobinParameter:
    """Classify ``beta`` against the computed window mu_0 .. mu_m."""
    if beta == 0:
        raise ValueError("beta must be nonzero")
    if beta > 0:
        return RobinParameter(beta, Admissibility.YES)
    margin = default_margin(spectrum) if margin is None else margin
    mu = spectrum.eigenvalues
    if abs(beta) >= mu[-1]:
        raise WindowTooSmall(f"|beta|={abs(beta):g} >= mu_m={mu[-1]:g}; request more eigenvalues")
    gap = np.min(np.abs(beta + mu))
    return RobinParameter(beta, Admissibility.YES if gap > margin else Admissibility.NO)


def export_spectrum_csv(spectrum: SteklovSpectrum, path) -> None:
    data = np.column_stack([np.arange(spectrum.eigenvalues.size), spectrum.eigenvalues])
    np.savetxt(Path(path), data, delimiter=",", header="index,mu", comments="", fmt=["%d", "%.17g"])
