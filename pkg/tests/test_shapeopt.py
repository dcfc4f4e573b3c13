import math

import numpy as np
import pytest

import reference_values as ref
from robintorsion.errors import AdmissibilityLost
from robintorsion.fem import boundary_trace
from robintorsion.geometry import BoundaryCurve, ellipse, summarize
from robintorsion.identities import deficits
from robintorsion.shapeopt import (C_STAR, calibrate, curve_area, directional_derivative_check, flow,
                                   project_modes, ratios_agree, shape_gradient_density, write_trajectory_csv)

from conftest import solution


@pytest.mark.parametrize("name,beta,C", [("disk", 1.0, -4.0), ("disk2", 0.5, -16.0)])
def test_density_constant_on_disks(name, beta, C):
    G = shape_gradient_density(solution(name, 3, beta))
    assert G.mean == pytest.approx(C, rel=1e-7)
    assert np.max(np.abs(G.values - C)) < 1e-4 * abs(C)


def test_density_deviation_perturbed():
    dev = [shape_gradient_density(solution("pert", L, 1.0)).l2_deviation() for L in (1, 2, 3)]
    assert dev[-1] == pytest.approx(ref.PERT_FAMILY[0.2][1], rel=1e-6)
    assert abs(dev[2] - dev[1]) < abs(dev[1] - dev[0])


def test_density_matches_deficit_functional():
    sol = solution("pert", 2, 1.0)
    assert shape_gradient_density(sol).l2_deviation() == pytest.approx(deficits(sol).overdet_residual, rel=1e-14)


def test_curve_area_closed_form(pert):
    assert curve_area(pert) == pytest.approx(summarize(pert).area, rel=1e-13)


def test_project_modes_exact_on_trig_polynomials():
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    w = np.full(64, 2 * np.pi / 64)
    c0, a, b = project_modes(th, w, 0.3 + np.cos(2 * th) - 0.5 * np.sin(5 * th), 8)
    assert c0 == pytest.approx(0.3)
    assert a[1] == pytest.approx(1.0) and b[4] == pytest.approx(-0.5)
    assert np.sum(np.abs(a)) + np.sum(np.abs(b)) == pytest.approx(1.5)


def test_directional_check_on_disk():
    checks = directional_derivative_check(BoundaryCurve.circle(), 1.0,
                                          [[[2, 1.0, 0.0]], [[3, 1.0, 0.0]], [[2, 0.0, 0.5]], [[0, 1.0, 0.0]]])
    assert [c.status for c in checks[:3]] == ["degenerate direction"] * 3
    assert all(c.ratio is None for c in checks[:3])
    # dilation: dT/dR = 2 pi and oint G V_n = -8 pi
    assert checks[3].fd_derivative == pytest.approx(2 * math.pi, rel=1e-6)
    assert checks[3].ratio == pytest.approx(C_STAR, rel=1e-6)


def test_directional_check_perturbed_pairwise():
    checks = directional_derivative_check(BoundaryCurve.from_modes(1.0, [[2, 0.2, 0.0]]), 1.0,
                                          [[[0, 1.0, 0.0]], [[2, 1.0, 0.0]], [[4, 1.0, 0.0]], [[3, 0.0, 1.0]]])
    ratios = [c.ratio for c in checks[:3]]
    assert ratios_agree(checks[:3], 0.01)
    assert calibrate(checks[:3]) == pytest.approx(C_STAR, rel=1e-3)
    assert all(r == pytest.approx(C_STAR, rel=1e-3) for r in ratios)
    # an odd mode is orthogonal to G by symmetry
    assert checks[3].status == "degenerate direction"


def test_directional_check_negative_beta():
    checks = directional_derivative_check(ellipse(1.3, 1 / 1.3), -0.3, [[[0, 1.0, 0.0]], [[2, 1.0, 0.0]]],
                                          level=1)
    assert ratios_agree(checks, 0.01)


def test_admissibility_lost():
    with pytest.raises(AdmissibilityLost):
        directional_derivative_check(BoundaryCurve.circle(), -0.99, [[[2, 1.0, 0.0]]], level=1)


def test_flow_from_disk_stops_immediately():
    res = flow(BoundaryCurve.circle(), 1.0, level=2)
    assert res.converged
    assert len(res.states) == 1
    assert res.final.projected_gradient_norm < 1e-4


def test_flow_rounds_perturbed_curve(tmp_path):
    c = BoundaryCurve.from_modes(1.0, [[2, 0.2, 0.0]])
    res = flow(c, 1.0, energy_tol=1e-4)
    assert res.converged
    T = [s.T_beta for s in res.states]
    assert np.all(np.diff(T) >= 0)
    A0 = curve_area(c)
    assert max(abs(s.area - A0) / A0 for s in res.states) < 1e-10
    R = math.sqrt(A0 / math.pi)
    disk_T = math.pi * R**2 / 2 * (R**2 / 4 + R)
    assert res.final.fourier_energy() < 1e-4
    assert res.final.T_beta == pytest.approx(disk_T, rel=1e-4)
    # the projected gradient is the residual functional at every iterate
    assert all(s.projected_gradient_norm == s.overdet_residual for s in res.states)
    assert res.final.overdet_residual < 1e-2 * res.states[0].overdet_residual
    write_trajectory_csv(res, tmp_path / "traj.csv")
    rows = (tmp_path / "traj.csv").read_text().splitlines()
    assert rows[0].startswith("iter,T_beta,grad_norm,overdet_residual,area")
    assert len(rows) == len(res.states) + 1


def test_flow_negative_beta_descends_to_disk():
    res = flow(ellipse(1.3, 1 / 1.3), -0.3, level=1, max_iters=60)
    T = np.array([s.T_beta for s in res.states])
    assert np.all(np.diff(T) <= 0)
    assert all(s.mu1 is not None and s.mu1 > 0.3 for s in res.states)
    assert T[-1] == pytest.approx(ref.DISK_T_BETA_M03, rel=1e-5)
    assert T[0] > T[-1]
