import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plkit.errors import (AssumptionViolated, ConfigError, NotProper, PoleHit, SingletonDegenerate)
from plkit.geometry import rasterize_points
from plkit.maps import (CONVERGED_TO_CYCLE, ESCAPED_AT, HORIZON_REACHED, Disk, MapSpec,
                        build_proper_map, critical_points, forward_orbit, parse_map,
                        verify_basin_critical)


def test_eval_and_deriv_examples():
    assert parse_map("z^2").eval(1 + 1j) == 2j
    assert parse_map("z^2-2").deriv(3) == 6
    r = parse_map("(z^2+1)/z")
    assert abs(r.eval(1j)) < 1e-15
    with pytest.raises(PoleHit):
        r.eval(0)


@pytest.mark.parametrize("text,num", [
    ("z^2+0.5z", [0, 0.5, 1]),
    ("z^2-0.123+0.745i", [-0.123 + 0.745j, 0, 1]),
    ("(z+1)(z-1)", [-1, 0, 1]),
    ("2*z^3 - 3*z", [0, -3, 0, 2]),
    ("0.5iz^2", [0, 0, 0.5j]),
])
def test_formula_grammar(text, num):
    assert np.allclose(parse_map(text).num, num)


@pytest.mark.parametrize("bad", ["", "z^^2", "sin(z)", "w^2", "z+1"])
def test_formula_rejects(bad):
    with pytest.raises(ConfigError):
        parse_map(bad)


def test_json_coefficients_roundtrip():
    m = parse_map('{"numerator": [[1, 0], [0, 0], [1, 0]]}')
    assert np.allclose(m.num, [1, 0, 1])
    assert np.allclose(MapSpec.from_json(m.to_json()).num, m.num)


def test_critical_points_examples():
    assert np.allclose(critical_points(parse_map("z^2+0.3")), [0])
    assert np.allclose(critical_points(parse_map("z^3-3z")), [-1, 1])
    assert np.allclose(critical_points(parse_map("z^3-z^2")), [0, 2 / 3])


coef = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(c=coef, w=coef)
def test_preimages_solve_the_equation(c, w):
    m = MapSpec(np.array([c, 0.3, 1.0]))
    pre = m.preimages(w)
    assert len(pre) == 2
    assert np.all(np.abs(m.eval(pre) - w) < 1e-9 * (1 + abs(w)))


@settings(max_examples=30, deadline=None)
@given(c=coef, z=coef)
def test_critical_points_zero_derivative(c, z):
    m = MapSpec(np.array([c, z, 0.0, 1.0]))
    cp = critical_points(m)
    assert len(cp) == 2
    assert np.all(np.abs(m.deriv(cp)) < 1e-8)


def test_build_z2(pm_z2):
    assert pm_z2.degree == 2
    assert np.allclose(pm_z2.critical_points, [0])
    (comp,) = pm_z2.preimage_components
    assert np.allclose(np.abs(comp.vertices), 2.0, atol=1e-8)
    assert pm_z2.flags["singleton_degenerate"]
    with pytest.raises(SingletonDegenerate):
        build_proper_map("z^2", Disk(4.0), strict=True)


def test_build_cheb(pm_cheb):
    assert pm_cheb.degree == 2
    (comp,) = pm_cheb.preimage_components
    assert np.all(np.abs(np.abs(comp.vertices ** 2 - 2) - 6) < 1e-6)
    assert pm_cheb.postcritical.contains(np.array([-2.0, 2.0])).all()
    assert not pm_cheb.flags["assumption_violated"]


def test_build_attracting(pm_attract):
    assert np.allclose(pm_attract.critical_points, [-0.25])
    pc = pm_attract.postcritical_points
    assert pc[0] == pytest.approx(-0.0625)
    assert np.all((pc.real >= -0.0625 - 1e-12) & (pc.real <= 1e-12))


def test_assumption_violation_flag_and_strict(pm_cantor):
    assert pm_cantor.flags["assumption_violated"]
    assert pm_cantor.flags["witness"][:3] == [[0, 0], [-3, 0], [6, 0]]
    with pytest.raises(AssumptionViolated):
        build_proper_map("z^2-3", Disk(6.0), strict=True)


def test_pole_inside_range_rejected():
    with pytest.raises(PoleHit):
        build_proper_map("(z^3+1)/z", Disk(4.0))


# z^2-3 on |z| < 2.6: U' = {|z^2-3| < 2.6} is two disks around +-sqrt(3), both inside U
def test_multi_component_rejected_in_single_mode():
    with pytest.raises(NotProper):
        build_proper_map("z^2-3", Disk(2.6), mode="SINGLE")


def test_multi_mode_two_components():
    pm = build_proper_map("z^2-3", Disk(2.6), mode="MULTI")
    assert pm.degree == 2
    assert len(pm.preimage_components) == 2
    assert pm.local_degrees == (1, 1)


def test_degree_consistency(pm_basilica):
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = complex(*rng.uniform(-2.5, 2.5, 2))
        pre = pm_basilica.preimages(w)
        assert int(np.sum(pm_basilica.in_domain(pre))) == pm_basilica.degree


def test_riemann_hurwitz_count(pm_basilica, pm_cheb, pm_attract):
    for pm in (pm_basilica, pm_cheb, pm_attract):
        assert len(pm.critical_points) == pm.degree - 1


def test_postcritical_forward_invariant(pm_basilica, pm_attract):
    # centres of the cells holding the critical orbit (before the pc_pad inflation)
    for pm in (pm_basilica, pm_attract):
        pc = pm.postcritical
        core = rasterize_points(pc.like(np.zeros_like(pc.cells)), pm.postcritical_points)
        pts = core.occupied_centers()
        assert np.all(pc.contains(pm.map.eval(pts), tol_cells=1))


def test_forward_orbit_examples(pm_z2, pm_basilica):
    r = forward_orbit(pm_z2, 0.5, 50)
    assert r.outcome == CONVERGED_TO_CYCLE and r.period == 1 and abs(r.multiplier) < 1e-12
    r = forward_orbit(pm_z2, 1.5)
    assert r.outcome == ESCAPED_AT and r.n == 2
    assert list(r.points[:3]) == [1.5, 2.25, 5.0625]
    assert not pm_z2.in_domain(r.points[r.n])
    r = forward_orbit(pm_basilica, 0.1)
    assert r.outcome == CONVERGED_TO_CYCLE and r.period == 2 and abs(r.multiplier) < 1e-9
    assert np.allclose(sorted(r.cycle.real), [-1, 0], atol=1e-9)


def test_forward_orbit_horizon(pm_z2):
    r = forward_orbit(pm_z2, np.exp(2j * np.pi * 0.1234567), 30)
    assert r.outcome == HORIZON_REACHED


@settings(max_examples=30, deadline=None)
@given(z=st.complex_numbers(max_magnitude=1.9, allow_nan=False, allow_infinity=False))
def test_orbit_record_exact(pm_basilica, z):
    r = forward_orbit(pm_basilica, z, 200)
    pts = np.asarray(r.points)
    for a, b in zip(pts[:-1], pts[1:]):
        assert complex(pm_basilica.map.eval(a)) == b


def test_verify_basin_critical(pm_half, pm_basilica, pm_attract):
    a = (1 - math.sqrt(3)) / 2
    assert verify_basin_critical(pm_half, [a]) == 0
    assert verify_basin_critical(pm_basilica, [0, -1]) == 0
    assert verify_basin_critical(pm_attract, [0]) == -0.25
    with pytest.raises(ValueError):
        verify_basin_critical(pm_half, [(1 + math.sqrt(3)) / 2])
