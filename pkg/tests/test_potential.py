import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from annulus_bnf.errors import GeometryViolation
from annulus_bnf.potential import (
    CORPUS_VERSION,
    HoleDomain,
    annulus_harmonic_measure,
    function_corpus,
    harmonic_measure_mc,
    jensen_bound,
    load_domain,
    verify_bound_on_function,
    verify_corpus,
)

FREE = HoleDomain(1.0)
HOLED = HoleDomain(1.0, ((0.6, 0.05),))
TWO_HOLES = HoleDomain(1.0, ((0.6, 0.05), (-0.3 + 0.5j, 0.04)))


def test_hole_free_example():
    b = jensen_bound(FREE, 0.1, 1e-6, 0.5)
    assert b == pytest.approx(math.log(0.5) / math.log(0.1) * math.log(1e-6), rel=1e-14)
    assert b == pytest.approx(-4.1589, abs=1e-4)


def test_m_one_gives_zero():
    assert jensen_bound(FREE, 0.1, 1.0, 0.5) == 0.0
    assert jensen_bound(TWO_HOLES, 0.2, 1.0, -0.5j) == 0.0


def test_tight_clearance_contributes_minus_log_m():
    m = 1e-3
    z = 0.6 + 0.05j
    base = math.log(abs(z)) / math.log(0.2) * math.log(m)
    assert jensen_bound(HOLED, 0.2, m, z, clearances=[0.05]) == pytest.approx(base - math.log(m), rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_monomial_is_extremal(k):
    # three circles: z^k with m = sigma^k attains the bound
    sigma = 0.1
    for z in (0.15, 0.5j, -0.9):
        assert math.log(abs(z) ** k) == pytest.approx(jensen_bound(FREE, sigma, sigma**k, z), abs=1e-12)


@given(st.floats(0.05, 0.3), st.floats(0.0, 1.0))
def test_three_circles_exponent(sigma, frac):
    r = sigma + frac * (0.99 - sigma)
    b = jensen_bound(FREE, sigma, 0.5, r)
    assert b == pytest.approx(math.log(r) / math.log(sigma) * math.log(0.5), rel=1e-12)


@given(st.floats(0.06, 0.3), st.floats(0.06, 0.3))
def test_monotone_in_clearance(d1, d2):
    # a larger guaranteed distance to the hole can only sharpen the bound
    lo, hi = sorted((d1, d2))
    z = 0.6 + 0.35j
    a = jensen_bound(HOLED, 0.2, 1e-3, z, clearances=[lo])
    b = jensen_bound(HOLED, 0.2, 1e-3, z, clearances=[hi])
    assert b <= a


def test_smaller_hole_strengthens():
    z, d = 0.6 + 0.3j, 0.2
    big = jensen_bound(HoleDomain(1.0, ((0.6, 0.05),)), 0.2, 1e-3, z, clearances=[d])
    small = jensen_bound(HoleDomain(1.0, ((0.6, 0.01),)), 0.2, 1e-3, z, clearances=[d])
    assert small < big


def test_geometry_violations():
    bad = [
        dict(sigma=0.1, m=0.0, z=0.5),
        dict(sigma=0.1, m=1.5, z=0.5),
        dict(sigma=0.1, m=0.5, z=0.05),
        dict(sigma=0.1, m=0.5, z=1.0),
        dict(sigma=1.2, m=0.5, z=0.5),
    ]
    for kw in bad:
        with pytest.raises(GeometryViolation):
            jensen_bound(FREE, **kw)
    with pytest.raises(GeometryViolation):
        jensen_bound(HOLED, 0.58, 0.5, 0.8j)
    with pytest.raises(GeometryViolation):
        jensen_bound(HOLED, 0.2, 0.5, 0.6 + 0.1j, clearances=[0.2])
    with pytest.raises(GeometryViolation):
        HoleDomain(1.0, ((0.98, 0.05),))
    with pytest.raises(GeometryViolation):
        HoleDomain(1.0, ((0.5, 0.05),), (0.01,))
    with pytest.raises(GeometryViolation):
        HoleDomain(-1.0)


def test_domain_file_round_trip(tmp_path):
    p = tmp_path / "dom.json"
    p.write_text(json.dumps(TWO_HOLES.to_dict()))
    assert load_domain(p) == TWO_HOLES


# -- corpus ------------------------------------------------------------------


def test_corpus_is_fixed():
    assert CORPUS_VERSION == 1
    assert len(function_corpus(FREE)) == 10


@pytest.mark.parametrize("dom", [FREE, HOLED, TWO_HOLES])
def test_corpus_never_violates(dom):
    for rep in verify_corpus(dom, 0.2, grid=32):
        assert rep.violations == 0, rep.name
        assert rep.points > 0


def test_monomial_report_has_zero_slack():
    rep = verify_bound_on_function(FREE, 0.1, "z^3", grid=16)
    assert rep.violations == 0 and abs(rep.worst_slack) <= 1e-12


def test_pole_in_hole_has_positive_slack():
    rep = verify_bound_on_function(HOLED, 0.2, "1/(z-a)", grid=32)
    assert rep.violations == 0 and rep.worst_slack > 0


def test_constant_on_hole_free_domain():
    rep = verify_bound_on_function(FREE, 0.2, "const", grid=16)
    assert rep.violations == 0 and rep.m == 1.0


def test_unit_reference_radius_fails_with_holes():
    # with the hole terms referenced to rho itself the inequality breaks
    for dom in (HOLED, HoleDomain(1.0, ((-0.3 + 0.5j, 0.04),))):
        bad = [r.name for r in verify_corpus(dom, 0.2, grid=32, hole_scale=1.0) if r.violations]
        assert "z" in bad
    assert all(r.violations == 0 for r in verify_corpus(FREE, 0.2, grid=32, hole_scale=1.0))


# -- harmonic measure --------------------------------------------------------


def test_mc_matches_annulus_formula():
    p, se = harmonic_measure_mc(FREE, 0.5, "inner", walks=100_000, sigma=0.1, seed=1)
    exact = annulus_harmonic_measure(0.5, 0.1)
    assert exact == pytest.approx(0.30103, abs=1e-5)
    assert abs(p - exact) <= 0.02 * exact
    assert abs(p - exact) <= 4 * se


def test_mc_on_target_boundary():
    assert harmonic_measure_mc(FREE, 0.1, "inner", walks=10, sigma=0.1) == (1.0, 0.0)
    assert harmonic_measure_mc(FREE, 0.1, "outer", walks=10, sigma=0.1) == (0.0, 0.0)


def test_complementary_targets_sum_to_one():
    z = -0.2 + 0.4j
    names = ["outer", "inner", "hole0", "hole1"]
    est = [harmonic_measure_mc(TWO_HOLES, z, t, walks=20_000, sigma=0.15, seed=3) for t in names]
    # same seed, same walks: the hits partition exactly
    assert sum(p for p, _ in est) == pytest.approx(1.0, abs=1e-12)
    p_in, se_in = harmonic_measure_mc(TWO_HOLES, z, "inner", walks=20_000, sigma=0.15, seed=4)
    p_rest = sum(harmonic_measure_mc(TWO_HOLES, z, t, walks=20_000, sigma=0.15, seed=5)[0] for t in names if t != "inner")
    assert abs(p_in + p_rest - 1) <= 3 * math.sqrt(2) * max(se_in, 1e-3)


def test_stderr_scales_with_walks():
    _, a = harmonic_measure_mc(FREE, 0.5, "inner", walks=10_000, sigma=0.1, seed=2)
    _, b = harmonic_measure_mc(FREE, 0.5, "inner", walks=40_000, sigma=0.1, seed=2)
    assert a / b == pytest.approx(2.0, rel=0.05)


def test_mc_is_thread_independent():
    a = harmonic_measure_mc(HOLED, 0.3j, "hole0", walks=10_000, sigma=0.1, seed=9, threads=1)
    b = harmonic_measure_mc(HOLED, 0.3j, "hole0", walks=10_000, sigma=0.1, seed=9, threads=3)
    assert a == b


def test_unknown_target():
    with pytest.raises(ValueError):
        harmonic_measure_mc(FREE, 0.5, "hole0", sigma=0.1)


def test_mc_supports_bound_weights():
    # a hole can only take harmonic measure away from the inner circle
    z = 0.5j
    p_free = annulus_harmonic_measure(z, 0.2)
    p, se = harmonic_measure_mc(HOLED, z, "inner", walks=20_000, sigma=0.2, seed=6)
    assert p <= p_free + 4 * se
    assert np.isfinite(p)
