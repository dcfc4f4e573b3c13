import json
import math

import numpy as np
import pytest

import reference_values as ref
from oracles import quadratic_field, sin_field, xy_field
from robintorsion.convergence import fitted_order, monotone_decreasing, richardson
from robintorsion.errors import OrderTooLow
from robintorsion.geometry import BoundaryCurve, ellipse, eval_boundary, summarize, uniform_grid
from robintorsion.identities import (AnalyticField, PField, deficits, evaluate_all, fundamental_identity,
                                     normal_hessian_gap, overdetermined_residual, reilly_residual, sbt_identity,
                                     serrin_identity)
from robintorsion.fem import boundary_trace

from conftest import curve_by_name, reports, solution


def test_disk_fundamental_identity_vanishes():
    rep = reports("disk", 3, 1.0)["fundamental"]
    assert abs(rep.lhs) < 1e-5 and abs(rep.rhs) < 1e-5
    assert rep.abs_gap < 1e-5


def test_disk_sbt_identity_vanishes():
    rep = reports("disk", 3, 1.0)["soap_bubble"]
    assert abs(rep.lhs) < 1e-5 and abs(rep.rhs) < 1e-5


@pytest.mark.parametrize("name,beta,tol", [("pert", 1.0, 1e-2), ("ellipse", 1.0, 2e-2)])
def test_fundamental_identity_cross_check(name, beta, tol):
    gaps = [reports(name, L, beta)["fundamental"].rel_gap for L in (1, 2, 3)]
    assert gaps[-1] < tol
    assert monotone_decreasing(gaps)


@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_sbt_identity_cross_check(beta):
    assert reports("pert", 3, beta)["soap_bubble"].rel_gap < 1e-2


def test_report_bookkeeping():
    rep = reports("pert", 2, 1.0)["soap_bubble"]
    assert sum(rep.terms.values()) == pytest.approx(rep.rhs, rel=1e-14)
    assert sum(rep.lhs_terms.values()) == pytest.approx(rep.lhs, rel=1e-14)
    assert rep.abs_gap == pytest.approx(abs(rep.lhs - rep.rhs))
    d = json.loads(rep.to_json())
    assert {"name", "lhs", "rhs", "abs_gap", "rel_gap", "h", "terms"} <= set(d)


def test_cross_identity_algebra():
    """sbt.rhs - fund.rhs equals the (N-1)-weighted rearrangement, to roundoff."""
    sol = solution("pert", 2, 1.0)
    r = reports("pert", 2, 1.0)
    t = boundary_trace(sol)
    g = summarize(sol.mesh.curve)
    un, k = t.flux, t.kappa
    expected = (t.integral(un * (un * k - 1)) - t.integral(un * un * (k - g.M0)))
    diff = r["soap_bubble"].rhs - r["fundamental"].rhs
    assert diff == pytest.approx(expected, rel=1e-12, abs=1e-14)
    # and the flux-deficit term closes the algebra on the left:
    # (un - R)^2 M0 = un^2 M0 - 2 un + R  integrates to  oint un^2 M0 - 2 oint un + R |dOmega|
    lhs_diff = r["soap_bubble"].lhs - r["fundamental"].lhs
    assert lhs_diff == pytest.approx(g.M0 * t.integral((un - g.R) ** 2), rel=1e-12)


def test_serrin_identity_on_balls():
    for name, beta, C in (("disk", 1.0, -4.0), ("disk2", 0.5, -16.0)):
        rep = reports(name, 3, beta)["serrin_robin"]
        floor = reports(name, 3, beta)["fundamental"]  # same trace
        grad_sq = 2 * math.pi * (1.0 if name == "disk" else 2.0) * (1.0 if name == "disk" else 4.0)
        assert abs(rep.lhs) < 1e-3 * grad_sq and abs(rep.rhs) < 1e-3 * grad_sq
        assert rep.diagnostics["C"] == C
        assert rep.diagnostics["G_mean"] == pytest.approx(C, rel=1e-6)
        assert floor.h == rep.h


def test_serrin_identity_gap_persists_off_ball():
    gaps = [reports("pert", L, 1.0)["serrin_robin"].abs_gap for L in (1, 2, 3)]
    assert min(gaps) > 0.3
    assert abs(gaps[2] - gaps[1]) < 0.1 * abs(gaps[1] - gaps[0]) + 1e-3
    # gap_serrin - gap_fundamental = -beta oint u_T^2 - oint u_n(u_n kappa - 1) + beta oint (u_n - R)^2
    f = reports("pert", 3, 1.0)["fundamental"]
    s = reports("pert", 3, 1.0)["serrin_robin"]
    sol = solution("pert", 3, 1.0)
    t = boundary_trace(sol)
    R = summarize(sol.mesh.curve).R
    predicted = f.terms["tangential"] / 2 + f.terms["mean_curvature"] + 1.0 * t.integral((t.flux - R) ** 2)
    assert (s.lhs - s.rhs) - (f.lhs - f.rhs) == pytest.approx(predicted, rel=1e-12)
    assert s.lhs - s.rhs == pytest.approx(predicted, rel=1e-2)


def test_hessian_gap_disk():
    assert reports("disk", 3, 1.0)["hessian_gap"] < 1e-4


@pytest.mark.parametrize("beta", [1.0, -0.4])
def test_hessian_gap_converges(beta):
    sols = [solution("pert", L, beta) for L in (1, 2, 3)]
    gaps = [normal_hessian_gap(s) for s in sols]
    assert monotone_decreasing(gaps)
    assert fitted_order([s.mesh.h for s in sols], gaps) >= 1.0


def test_cauchy_schwarz_margin_perturbed():
    m = PField(solution("pert", 3, 1.0)).cauchy_schwarz_margin()
    assert m.min() > 0


def test_deficits_disk():
    d = reports("disk", 3, 1.0)["deficits"]
    assert d.serrin_deficit < 1e-8
    assert d.overdet_residual < 1e-5
    assert d.flags["beta_plus_kappa_min"] == pytest.approx(2.0)
    assert all(v > 0 for v in d.flags.values())


def test_deficits_ellipse_against_reference():
    vals = [reports("ellipse", L, 1.0)["deficits"].serrin_deficit for L in (1, 2, 3)]
    assert richardson(vals) == pytest.approx(ref.ELLIPSE_SERRIN_DEFICIT, rel=1e-6)
    assert vals[-1] > 1e-3


def test_overdet_residual_against_reference():
    vals = [reports("pert", L, 1.0)["deficits"].overdet_residual for L in (1, 2, 3)]
    assert vals[-1] == pytest.approx(ref.PERT_FAMILY[0.2][1], rel=1e-6)
    t = reports("pert", 3, 1.0)["deficits"].tangential_energy
    assert t == pytest.approx(ref.PERT_TANGENTIAL_ENERGY, rel=1e-3)


def test_negative_flag_reported_without_error():
    c = BoundaryCurve.from_modes(1.0, [[2, 0.3, 0.0]])
    from robintorsion.fem import solve_robin
    from robintorsion.mesh import build_mesh
    d = deficits(solve_robin(build_mesh(c, 1), 0.1))
    assert d.kappa_min < 0
    assert d.flags["beta_plus_kappa_min"] == pytest.approx(0.1 + d.kappa_min)
    assert d.flags["beta_plus_kappa_min"] < 0


@pytest.mark.parametrize("name,beta", [("disk", 1.0), ("pert", 1.0), ("ellipse", 2.0), ("pert", -0.4)])
def test_curvature_sandwich(name, beta):
    d = reports(name, 2, beta)["deficits"]
    assert d.kappa_min * d.tangential_energy <= d.curvature_weighted <= d.kappa_max * d.tangential_energy
    assert d.serrin_deficit >= 0 and d.tangential_energy >= 0 and d.overdet_residual >= 0


@pytest.mark.parametrize("name", ["pert", "ellipse", "pert0.05"])
def test_sbt_hypothesis_fails_off_ball(name):
    g = summarize(curve_by_name(name))
    s = eval_boundary(curve_by_name(name), uniform_grid(512))
    assert np.min(s.kappa - g.M0) < 0


def test_rigidity_direction_family():
    t_values = [0.0, 0.05, 0.1, 0.2]
    sd, od = [], []
    for t in t_values:
        name = "disk" if t == 0 else f"pert{t}"
        d = reports(name, 3, 1.0)["deficits"]
        sd.append(d.serrin_deficit)
        od.append(d.overdet_residual)
    assert np.all(np.diff(sd) > 0) and np.all(np.diff(od) > 0)
    assert sd[0] < 1e-8 and od[0] < 1e-5
    for t, s, o in zip(t_values[1:], sd[1:], od[1:]):
        assert s == pytest.approx(ref.PERT_FAMILY[t][0], rel=1e-4)
        assert o == pytest.approx(ref.PERT_FAMILY[t][1], rel=1e-5)


def test_order_too_low():
    with pytest.raises(OrderTooLow):
        fundamental_identity(solution("disk", 1, 1.0, 1))


def test_overdetermined_residual_matches_g_constant():
    t = boundary_trace(solution("disk2", 3, 0.5))
    res, mean = overdetermined_residual(t, 0.5)
    assert mean == pytest.approx(-16.0, rel=1e-7)
    assert res < 1e-4


# -- boundary decomposition of the Laplacian --------------------------------


@pytest.mark.parametrize("curve,field,tol", [
    (BoundaryCurve.circle(), quadratic_field(), 1e-10),
    (BoundaryCurve.from_modes(1.0, [[2, 0.2, 0.0]]), xy_field(), 1e-8),
    (ellipse(2.0, 1.0), sin_field(), 1e-7),
    (ellipse(1.3, 1 / 1.3), xy_field(), 1e-7),
])
def test_reilly_decomposition(curve, field, tol):
    assert reilly_residual(curve, field, 512 if curve.n_modes < 60 else 1024) < tol
