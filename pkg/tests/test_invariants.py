import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plkit.errors import NotForwardInvariant, ResolutionTooCoarse
from plkit.geometry import circle, ellipse, rasterize_points, topological_hull
from plkit.invariants import (ESCAPES, IN_KSTAR, analysis_grid, classify_outside_point, compute_kstar,
                              escape_times, invariance_flags, invariance_rates, julia_samples,
                              maximal_invariant_subset, nonescaping_set, postcritical_invariant_subset)
from plkit.periodic import find_periodic
from plkit.trichotomy import classify


def test_escape_times_counts(pm_z2):
    t = escape_times(pm_z2, np.array([0.5, 1.5, 3.0 + 0j]), horizon=200)
    assert list(t) == [200, 2, 1]


def test_z2_unit_disk(k_z2):
    K = k_z2.K
    assert K.area == pytest.approx(math.pi, rel=0.02)
    assert k_z2.full and k_z2.forward_ok and k_z2.backward_ok and k_z2.contains_critical
    assert K.mirror_conj() == K
    assert K.mirror_neg() == K


def test_z2_complete_invariance_500(pm_z2, k_z2):
    f, b = invariance_rates(pm_z2, k_z2.K, n_samples=500, representatives=k_z2.representatives)
    assert f >= 0.99 and b >= 0.99


def test_basilica(pm_basilica, k_basilica):
    K = k_basilica.K
    assert k_basilica.contains_critical
    assert K.contains(np.array([0j, -1 + 0j])).all()
    assert K.mirror_conj() == K and K.mirror_neg() == K
    f, b = invariance_rates(pm_basilica, K, n_samples=500, representatives=k_basilica.representatives)
    assert f >= 0.99 and b >= 0.99


def test_cantor(pm_cantor):
    rep = nonescaping_set(pm_cantor, resolution=1024)
    assert not rep.contains_critical
    assert rep.K.mirror_conj() == rep.K
    assert not rep.K.contains(np.array([0j]))[0]
    # first-level pieces sit in |x| >= sqrt(3 - beta) ~ 0.835, beta = (1 + sqrt 13) / 2
    xs, _ = rep.K.axes()
    assert not rep.K.cells[:, np.abs(xs) < 0.8].any()


def test_fullness_flag_consistent(k_z2, k_basilica):
    for rep in (k_z2, k_basilica):
        assert rep.full == (topological_hull(rep.K) == rep.K)


def test_resolution_too_coarse(pm_z2):
    g = analysis_grid(pm_z2, 64)
    few = rasterize_points(g, np.array([0.1, 0.2, 0.3 + 0j]))
    with pytest.raises(ResolutionTooCoarse):
        invariance_flags(pm_z2, few)


def test_julia_samples_on_unit_circle(pm_z2):
    g = analysis_grid(pm_z2, 256)
    js = julia_samples(pm_z2, g, max_points=20000)
    assert len(js) > 1000
    assert np.max(np.abs(np.abs(js) - 1)) < 1e-9


def test_x_star_of_circle_is_disk(pm_z2, k_z2):
    g = k_z2.K
    ring = rasterize_points(g.like(np.zeros_like(g.cells)), np.exp(2j * np.pi * np.arange(40000) / 40000))
    xs = maximal_invariant_subset(pm_z2, ring)
    assert xs == topological_hull(ring)
    assert xs.hausdorff_cells(k_z2.K) <= 2


def test_x_star_rejects_non_invariant(pm_z2):
    g = analysis_grid(pm_z2, 256)
    disk = topological_hull(rasterize_points(g, 1.5 * np.exp(2j * np.pi * np.arange(4000) / 4000)))
    with pytest.raises(NotForwardInvariant):
        maximal_invariant_subset(pm_z2, disk)


def test_x_star_cantor_cross_oracle(pm_cantor):
    rep = nonescaping_set(pm_cantor, resolution=1024)
    g = rep.K
    js = julia_samples(pm_cantor, g)
    X = rasterize_points(g.like(np.zeros_like(g.cells)), js)
    xs = maximal_invariant_subset(pm_cantor, X)
    assert xs.count > 0
    assert xs.hausdorff_cells(rep.K) <= 2


def test_postcritical_subset_is_inside_hull(pm_basilica):
    s = postcritical_invariant_subset(pm_basilica)
    assert s.issubset(topological_hull(pm_basilica.postcritical))


@pytest.fixture(scope="module")
def kstar_z2(pm_z2, k_z2):
    v = classify(pm_z2, circle(0j, 2.5, 512), 2)
    return compute_kstar(pm_z2, v.evidence, grid=k_z2.K.like(np.zeros_like(k_z2.K.cells)), return_info=True)


def test_kstar_z2(kstar_z2, k_z2):
    assert kstar_z2.converged
    assert kstar_z2.grid.hausdorff_cells(k_z2.K) <= 2
    assert kstar_z2.grid.area == pytest.approx(math.pi, rel=0.03)


def test_kstar_contains_repelling_cycles(pm_z2, kstar_z2):
    fat = kstar_z2.grid.dilate(1)
    for p in range(1, 5):
        for o in find_periodic(pm_z2, p):
            if o.repelling:
                assert fat.contains(np.array(o.points)).all()


def test_kstar_cheb_collapses_to_interval(pm_cheb):
    v = classify(pm_cheb, circle(0j, 4.0, 512), 2)
    g = analysis_grid(pm_cheb, 512)
    ks = compute_kstar(pm_cheb, v.evidence, grid=g.like(np.zeros_like(g.cells)), return_info=True)
    pts = ks.grid.occupied_centers()
    h = g.cell_size
    # distance from each occupied centre to the segment [-2, 2]
    d = np.abs(pts - np.clip(pts.real, -2, 2))
    assert d.max() <= 1.5 * h
    # once thinner than a cell the neighbourhood fragments; the interval stays within one cell
    assert ks.grid.dilate(1).contains(np.linspace(-1.999, 1.999, 4000) + 0j).all()


def test_outside_point_examples(pm_z2, kstar_z2):
    K = kstar_z2.grid
    v = classify_outside_point(pm_z2, K, 1.5)
    assert v.kind == ESCAPES and v.n == 1
    assert classify_outside_point(pm_z2, K, 0.5).kind == IN_KSTAR
    v = classify_outside_point(pm_z2, K, 1 + 1e-12)
    expect = math.ceil(math.log2(math.log(2) / math.log1p(1e-12)))
    assert v.kind == ESCAPES and abs(v.n - expect) <= 2


@settings(max_examples=30, deadline=None)
@given(r=st.floats(1.001, 3.9), t=st.floats(0, 2 * math.pi))
def test_outside_points_escape_with_doubling_time(pm_z2, kstar_z2, r, t):
    v = classify_outside_point(pm_z2, kstar_z2.grid, r * complex(math.cos(t), math.sin(t)))
    assert v.kind == ESCAPES
    # first n with r^(2^n) >= 2 (outside U' = disk 2)
    expect = 0 if r >= 2 else math.ceil(math.log2(math.log(2) / math.log(r)))
    assert abs(v.n - expect) <= 2
