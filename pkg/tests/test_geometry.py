import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robintorsion.errors import ConfigError, PositivityViolation
from robintorsion.geometry import (BoundaryCurve, arclength, curvature, ellipse, ellipse_radius, eval_boundary,
                                   minkowski_residual, normal_divergence, summarize, surface_ibp_residual,
                                   uniform_grid)

from conftest import curve_by_name

small_modes = st.lists(
    st.tuples(st.integers(1, 6), st.floats(-0.06, 0.06), st.floats(-0.06, 0.06)), min_size=0, max_size=3)


def test_circle_summary(disk):
    g = summarize(disk)
    assert g.area == pytest.approx(math.pi, rel=1e-14)
    assert g.perimeter == pytest.approx(2 * math.pi, rel=1e-14)
    assert g.R == pytest.approx(1.0)
    assert g.kappa_min == pytest.approx(1.0) and g.kappa_max == pytest.approx(1.0)


def test_perturbed_area_closed_form(pert):
    # area = pi (r0^2 + a^2 / 2)
    assert summarize(pert).area == pytest.approx(1.02 * math.pi, rel=1e-13)


def test_curvature_extrema_are_polished(pert):
    g = summarize(pert, n=64)
    th = np.linspace(0, 2 * np.pi, 200001)
    k = curvature(pert, th)
    assert g.kappa_min == pytest.approx(k.min(), abs=1e-9)
    assert g.kappa_max == pytest.approx(k.max(), abs=1e-9)


def test_unit_normal_tangent_frame(pert):
    s = eval_boundary(pert, uniform_grid(64))
    assert np.allclose(np.linalg.norm(s.normal, axis=1), 1.0)
    assert np.allclose(np.sum(s.normal * s.tangent, axis=1), 0.0, atol=1e-15)
    # outward: normal points away from the center on a star-shaped curve
    assert np.all(np.sum(s.normal * (s.point - pert.center), axis=1) > 0)


def test_positivity_violation():
    with pytest.raises(PositivityViolation):
        BoundaryCurve.from_modes(1.0, [[3, 1.2, 0.0]])
    with pytest.raises(PositivityViolation):
        BoundaryCurve(-1.0)


def test_large_but_positive_perturbation_is_accepted():
    c = BoundaryCurve.from_modes(1.0, [[2, 0.6, 0.0], [4, 0.3, 0.0]])
    assert np.min(c.radius(uniform_grid(4096))) > 0


def test_config_roundtrip():
    cfg = {"r0": 1.5, "modes": [[2, 0.1, -0.05], [5, 0.0, 0.02]], "center": [0.3, -0.2]}
    c = BoundaryCurve.from_config(cfg)
    assert BoundaryCurve.from_config(c.to_config()).to_config() == c.to_config()
    assert c.to_config()["modes"] == cfg["modes"]


def test_bad_config():
    with pytest.raises(ConfigError):
        BoundaryCurve.from_config({"modes": []})
    with pytest.raises(ConfigError):
        BoundaryCurve.from_config({"r0": 1.0, "modes": [[0, 1.0, 0.0]]})


def test_coefficients_are_read_only(pert):
    with pytest.raises(ValueError):
        pert.a[0] = 1.0


@pytest.mark.parametrize("a,b", [(1.3, 1 / 1.3), (2.0, 1.0), (3.0, 1.0)])
def test_ellipse_projection_accuracy(a, b):
    c = ellipse(a, b)
    th = np.linspace(0, 2 * np.pi, 3001)
    assert np.max(np.abs(c.radius(th) - ellipse_radius(a, b, th))) < 1e-10
    # exact curvature of the ellipse at parameter angle
    x, y = c.point(th).T
    t = np.arctan2(y / b, x / a)
    exact = a * b / ((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2) ** 1.5
    assert np.max(np.abs(curvature(c, th) - exact)) < 1e-8


def test_ellipse_area_and_curvature_bounds():
    g = summarize(ellipse(1.3, 1 / 1.3))
    assert g.area == pytest.approx(math.pi, rel=1e-10)
    assert g.kappa_min == pytest.approx((1 / 1.3) / 1.3**2, rel=1e-8)
    assert g.kappa_max == pytest.approx(1.3 / (1 / 1.3) ** 2, rel=1e-8)


@pytest.mark.parametrize("name,n", [("disk", 512), ("pert", 512), ("ellipse", 512), ("ellipse21", 1024)])
def test_minkowski_identity(name, n):
    assert minkowski_residual(curve_by_name(name), n) < 1e-10


def test_minkowski_spectral_decay(pert):
    res = [minkowski_residual(pert, n) for n in (8, 16, 32, 48)]
    assert res[-1] < 1e-10 < res[0]
    assert all(r1 < r0 for r0, r1 in zip(res, res[1:]))
    # super-algebraic: the log-decay per doubling keeps growing
    drops = -np.diff(np.log(res[:3]))
    assert drops[1] > drops[0]


@pytest.mark.parametrize("name", ["disk", "pert", "ellipse"])
def test_tangential_divergence_of_normal_is_curvature(name):
    div, kappa = normal_divergence(curve_by_name(name))
    assert np.max(np.abs(div - kappa)) < 1e-8


@pytest.mark.parametrize("name", ["pert", "ellipse"])
def test_surface_integration_by_parts(name):
    f = lambda p: np.sin(p[:, 0]) + p[:, 1] ** 2
    v = lambda p: np.cos(2 * p[:, 1]) * p[:, 0]
    assert surface_ibp_residual(curve_by_name(name), f, v) < 1e-8


def test_arclength(disk, pert):
    th = np.array([0.0, 1.0, np.pi, 2 * np.pi])
    assert np.allclose(arclength(disk, th), th, atol=1e-13)
    assert arclength(pert, 2 * np.pi) == pytest.approx(summarize(pert).perimeter, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(modes=small_modes, lam=st.floats(0.2, 5.0))
def test_scaling_law(modes, lam):
    c = BoundaryCurve.from_modes(1.0, modes)
    g, gs = summarize(c), summarize(c.scaled(lam))
    assert gs.area == pytest.approx(lam**2 * g.area, rel=1e-12)
    assert gs.perimeter == pytest.approx(lam * g.perimeter, rel=1e-12)
    assert gs.R == pytest.approx(lam * g.R, rel=1e-12)
    assert gs.kappa_min == pytest.approx(g.kappa_min / lam, rel=1e-9, abs=1e-12)
    assert gs.kappa_max == pytest.approx(g.kappa_max / lam, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(modes=small_modes)
def test_minkowski_holds_for_random_smooth_curves(modes):
    assert minkowski_residual(BoundaryCurve.from_modes(1.0, modes)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(modes=small_modes)
def test_total_curvature_is_two_pi(modes):
    c = BoundaryCurve.from_modes(1.0, modes)
    s = eval_boundary(c, uniform_grid(512))
    assert np.sum(s.kappa * s.density) * 2 * np.pi / 512 == pytest.approx(2 * np.pi, rel=1e-12)
