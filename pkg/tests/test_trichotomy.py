import math

import numpy as np
import pytest

from plkit.geometry import Nesting, circle, ellipse, nesting_relation, rasterize_curves
from plkit.maps import Disk, build_proper_map
from plkit.trichotomy import (A, B, C, UNRESOLVED, AttractingEvidence, PLCertificate, certify_pl_restriction,
                              classify, locate_attracting_fixed_point, recheck_certificate,
                              scan_repelling_near_curve)


@pytest.fixture(scope="module")
def verdict_z2(pm_z2):
    return classify(pm_z2, circle(0j, 2.5, 512), 3)


def test_z2_is_b_at_one(verdict_z2):
    v = verdict_z2
    assert v.verdict == B and v.witness_n == 1
    cert = v.evidence
    assert isinstance(cert, PLCertificate)
    assert cert.degree == 2 and cert.n_used == 1
    assert cert.margin == pytest.approx(2.5 - math.sqrt(2.5), rel=1e-3)
    (inner,) = cert.inner_components
    assert nesting_relation(inner, cert.outer) == Nesting.B_INSIDE


def test_certificate_recheck(pm_z2, verdict_z2):
    chk = recheck_certificate(pm_z2, verdict_z2.evidence)
    assert chk["hausdorff"] < 10 * pm_z2.pb_tol
    assert chk["margin_rel_change"] < 1e-6


def test_classify_deterministic(pm_z2, verdict_z2):
    again = classify(pm_z2, circle(0j, 2.5, 512), 3)
    assert again.to_json() == verdict_z2.to_json()


def test_attracting_case(pm_attract):
    v = classify(pm_attract, circle(0j, 0.1, 256), 2)
    assert v.verdict == C and v.witness_n == 1
    assert isinstance(v.evidence, AttractingEvidence)
    a, lam = locate_attracting_fixed_point(pm_attract, v)
    assert abs(a) < 1e-9 and abs(lam - 0.5) < 1e-9


def test_attracting_case_small_multiplier():
    pm = build_proper_map("0.3z+0.1z^2", Disk(20.0))
    v = classify(pm, circle(0j, 0.3, 128), 3)
    assert v.verdict == C
    a, lam = locate_attracting_fixed_point(pm, v)
    assert abs(a) < 1e-12 and abs(lam - 0.3) < 1e-12


def test_attracting_case_real_fixed_point(pm_half):
    v = classify(pm_half, circle(-0.3 + 0j, 0.45, 256), 3)
    assert v.verdict == C
    a, lam = locate_attracting_fixed_point(pm_half, v)
    assert abs(a - (1 - math.sqrt(3)) / 2) < 1e-12
    assert abs(lam) == pytest.approx(math.sqrt(3) - 1, abs=1e-12)


def test_locate_rejects_other_verdicts(pm_z2, verdict_z2):
    with pytest.raises(ValueError):
        locate_attracting_fixed_point(pm_z2, verdict_z2)


def _crossing_provider(pm, gamma0, n_max):
    # an off-centre circle crossing gamma0 at every level
    for n in range(1, n_max + 1):
        yield [circle(1.0 + 0.01 * n, 1.0, 128)]


def _side_by_side_provider(pm, gamma0, n_max):
    for n in range(1, n_max + 1):
        yield [circle(10.0 + 0j, 0.5, 64)]


def test_case_a_via_mock(pm_z2):
    v = classify(pm_z2, circle(0j, 1.0, 256), 12, provider=_crossing_provider)
    assert v.verdict == A and v.witness_n == 0
    assert [n for n, _ in v.evidence] == list(range(1, 13))
    assert all(len(pts) == 2 for _, pts in v.evidence)
    assert len(v.to_json()["evidence"]) == 12


def test_unresolved_via_mock(pm_z2):
    v = classify(pm_z2, circle(0j, 1.0, 256), 5, provider=_side_by_side_provider)
    assert v.verdict == UNRESOLVED


def test_cheb_circle_4(pm_cheb):
    v = classify(pm_cheb, circle(0j, 4.0, 512), 3)
    assert v.verdict == B and v.witness_n == 1
    cert = v.evidence
    (inner,) = cert.inner_components
    assert inner.contains(np.array([0j]))[0]
    assert cert.margin > 0


def test_cheb_ellipse_needs_second_level(pm_cheb):
    g0 = ellipse(0j, 2.1, 0.3, 512)
    v = classify(pm_cheb, g0, 4, certify=False)
    assert v.verdict == B and v.witness_n == 2
    cert = certify_pl_restriction(pm_cheb, v)
    assert cert.margin > 0 and cert.n_used == 2
    for c in cert.inner_components:
        assert nesting_relation(c, cert.outer) == Nesting.B_INSIDE
    inside = np.zeros(1, bool)
    for c in cert.inner_components:
        inside |= c.contains(pm_cheb.critical_points)
    assert inside.all()
    chk = recheck_certificate(pm_cheb, cert)
    assert chk["margin_rel_change"] < 1e-6


def test_k_inside_certificate(pm_z2, verdict_z2, k_z2):
    inner = rasterize_curves(k_z2.K, verdict_z2.evidence.inner_components)
    assert k_z2.K.issubset(inner)


def test_no_c_near_boundary(pm_attract, pm_basilica, pm_half):
    for pm in (pm_attract, pm_basilica, pm_half):
        v = classify(pm, circle(0j, 3.7, 512), 3, certify=False)
        assert v.verdict != C


def test_scan_unit_circle(pm_z2):
    found = scan_repelling_near_curve(pm_z2, circle(0j, 1.0, 512), 0.1, range(1, 5))
    for n in range(1, 5):
        pts = np.array([z for m, z, lam in found if m == n])
        lams = [lam for m, z, lam in found if m == n]
        expect = np.exp(2j * np.pi * np.arange(2 ** n - 1) / (2 ** n - 1))
        assert len(pts) == len(expect)
        assert all(np.min(np.abs(pts - e)) < 1e-9 for e in expect)
        assert np.allclose(np.abs(lams), 2 ** n)


def test_scan_empty_cases(pm_z2, pm_half):
    assert scan_repelling_near_curve(pm_z2, circle(0j, 0.5, 256), 0.1, range(1, 5)) == []
    assert scan_repelling_near_curve(pm_half, circle(0j, 1.9, 512), 0.1, range(1, 5)) == []
