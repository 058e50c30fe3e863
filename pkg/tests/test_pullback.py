import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plkit.errors import ConfigError
from plkit.geometry import (JordanCurve, Nesting, circle, hausdorff_distance, nesting_relation,
                            rasterize_curves, topological_hull)
from plkit.invariants import analysis_grid
from plkit.pullback import iterate_pullback, max_pushforward_error, pullback_curve, push_forward


def test_z2_circle_4(pm_z2):
    gamma = circle(0j, 4.0, 256)
    r = pullback_curve(pm_z2, gamma)
    assert r.local_degrees == [2]
    # targets run along the polygon, so vertices sit on |z|=2 up to the chord sagitta
    assert np.allclose(np.abs(r.components[0].vertices), 2.0, atol=2e-4)
    assert r.residual < pm_z2.pb_tol
    assert max_pushforward_error(pm_z2, r.components, gamma) < pm_z2.pb_tol


def test_small_circle_two_branches(pm_z2):
    r = pullback_curve(pm_z2, circle(1 + 0j, 0.01, 64))
    assert r.local_degrees == [1, 1]
    centres = sorted(c.centroid().real for c in r.components)
    assert centres == pytest.approx([-1, 1], abs=1e-4)


def test_cheb_circle_6(pm_cheb):
    gamma = circle(0j, 6.0, 256)
    r = pullback_curve(pm_cheb, gamma)
    assert r.local_degrees == [2]
    v = r.components[0].vertices
    assert gamma.distance_to(v ** 2 - 2).max() < pm_cheb.pb_tol
    assert np.max(np.abs(np.abs(v ** 2 - 2) - 6)) < 1e-3


def test_iterated_radii(pm_z2):
    levels = iterate_pullback(pm_z2, circle(0j, 2.5, 256), 3)
    for n, lv in enumerate(levels, start=1):
        (c,) = lv.components
        assert np.allclose(np.abs(c.vertices), 2.5 ** (2.0 ** -n), atol=1e-9)
        assert lv.degree_sum == 2


def test_peanut_for_attracting_map(pm_attract):
    (lv,) = iterate_pullback(pm_attract, circle(0j, 0.1, 128), 1)
    assert lv.local_degrees == [2]
    c = lv.components[0]
    assert c.contains(np.array([0j, -0.5 + 0j])).all()
    assert nesting_relation(c, circle(0j, 0.1, 128)) == Nesting.C_OUTSIDE


def test_cheb_lens_nesting(pm_cheb):
    g0 = circle(0j, 2.2, 256)
    l1, l2 = iterate_pullback(pm_cheb, g0, 2)
    assert nesting_relation(l2.components[0], l1.components[0]) == Nesting.B_INSIDE
    assert l1.components[0].contains(np.linspace(-2, 2, 41) + 0j).all()


def test_enclosure_precondition(pm_cheb):
    with pytest.raises(ConfigError):
        iterate_pullback(pm_cheb, circle(0j, 1.0, 128), 1)


def test_perturbation_near_critical_value(pm_z2):
    # the circle passes through the critical value 0
    r = pullback_curve(pm_z2, circle(0.5 + 0j, 0.5, 128))
    assert r.perturbed
    assert r.degree_sum == 2


@settings(max_examples=25, deadline=None)
@given(r=st.floats(0.3, 3.5), c=st.complex_numbers(max_magnitude=0.5, allow_nan=False, allow_infinity=False))
def test_pushforward_and_degree(pm_basilica, r, c):
    if abs(c) + r > 3.9:
        return
    gamma = circle(c, r, 128)
    res = pullback_curve(pm_basilica, gamma)
    assert res.degree_sum == 2
    assert max_pushforward_error(pm_basilica, res.components, gamma) < pm_basilica.pb_tol
    assert res.residual < pm_basilica.pb_tol


def test_monotone_nesting(pm_basilica):
    grid = analysis_grid(pm_basilica, 512)
    levels = iterate_pullback(pm_basilica, circle(0j, 3.0, 256), 6)
    hulls = [topological_hull(rasterize_curves(grid, lv.components)) for lv in levels]
    for a, b in zip(hulls[1:], hulls[:-1]):
        assert a.issubset(b.dilate(1))


def test_reversibility(pm_basilica):
    step = 1e-3
    g0 = circle(0j, 3.0, 512)
    (g1,) = pullback_curve(pm_basilica, g0, refine_step=step).components
    img = push_forward(pm_basilica, g1)
    # the image traverses g0 twice; order its points by angle to get a Jordan curve again
    ang = np.angle(img)
    _, keep = np.unique(np.round(ang, 12), return_index=True)
    img = img[keep]
    gamma = JordanCurve(img[np.argsort(np.angle(img))])
    (again,) = pullback_curve(pm_basilica, gamma, refine_step=step).components
    assert hausdorff_distance(again, g1) < 10 * pm_basilica.pb_tol
