import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from annulus_bnf.errors import NewtonDiverged
from annulus_bnf.maps import GeneratingMap, standard_map, twist_map
from annulus_bnf.measure import (
    NON_REGULAR,
    REGULAR,
    UNDECIDED,
    band_grid,
    build_counterexample,
    bump_weights,
    classify_orbit,
    classify_points,
    counterexample_base,
    eigen_scaling,
    find_periodic_orbit,
    find_resonant_orbit,
    measure_scan,
    orbit_statistics,
    pendulum_monodromy,
    rational_distance,
    sample_box,
    scaling_exponent,
    schedule_level,
    separatrix_box,
    weighted_average,
)
from annulus_bnf.series import FourierTaylorSeries, StripParams, weighted_norm
from annulus_bnf.small_divisors import GOLDEN

TWIST = twist_map([0.0, GOLDEN, 0.5])


# -- weighted averages -------------------------------------------------------


def test_bump_weights():
    w = bump_weights(1000)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert w[0] == 0.0 and np.all(w >= 0)
    assert np.allclose(w[1:], w[1:][::-1], atol=1e-18)


def test_weighted_average_superconverges():
    # the bump-weighted mean of a quasi-periodic sequence converges faster
    # than any power of 1/M
    n = np.arange(2000)
    x = np.cos(2 * np.pi * (0.1 + n * GOLDEN))
    assert abs(weighted_average(x)) <= 1e-13
    assert abs(np.mean(x)) > 1e-5


@given(st.floats(-1e3, 1e3))
def test_weighted_average_of_constant(c):
    assert weighted_average(np.full(100, c)) == pytest.approx(c, rel=1e-14, abs=1e-300)


def test_rational_distance():
    d, q = rational_distance(np.array([0.5, 1 / 3 + 1e-3, GOLDEN]), 20)
    assert d[0] == 0 and q[0] == 2
    assert d[1] == pytest.approx(1e-3, rel=1e-9) and q[1] == 3
    assert q[2] == 13 and d[2] == pytest.approx(abs(GOLDEN - 8 / 13), rel=1e-12)


# -- orbit classification ----------------------------------------------------


def test_rotation_of_integrable_twist():
    st_ = orbit_statistics(TWIST, [0.1, 0.2], [0.0, 0.1], 1000)
    assert np.allclose(st_["rotation"], [GOLDEN, GOLDEN + 0.1], atol=1e-14)
    assert np.all(st_["r_max"] == st_["r_min"])


def test_hyperbolic_fixed_point_is_non_regular():
    d = classify_orbit(standard_map(0.5), (0.0, 0.0), 1000)
    assert d.classification == NON_REGULAR and d.rotation_number == 0.0


def test_golden_circle_is_regular():
    d = classify_orbit(standard_map(0.5), (0.0, 0.618034), 20_000)
    assert d.classification == REGULAR
    assert d.convergence_error <= 1e-11


def test_fixed_circle_of_twist_is_regular_but_fixed_point_is_not():
    assert classify_orbit(twist_map([0.0, 0.0, 0.5]), (0.2, 0.5), 100).classification == REGULAR
    assert classify_orbit(standard_map(0.5), (0.5, 0.0), 100).classification == NON_REGULAR


def test_integrable_twist_is_regular_everywhere():
    th, r = band_grid(0.1, (4, 11))
    v = classify_points(TWIST, th, r, 500)
    assert np.all(v == REGULAR)


def test_chaotic_orbit():
    d = classify_orbit(standard_map(2.0), (0.0, 0.01), 5000)
    assert d.classification == NON_REGULAR
    assert d.convergence_error > 1e-5


def test_escaping_orbit():
    m = GeneratingMap(TWIST.omega, FourierTaylorSeries.cos_mode(0, 1, 0.2, 2, 1), StripParams(0.1, 0.5),
                      check=False, r_bound=0.5)
    d = classify_orbit(m, (0.25, 0.45), 200)
    assert d.classification == NON_REGULAR and d.flags == ["out_of_domain"]
    assert math.isinf(d.convergence_error)


def test_short_orbit_undecided_or_decided():
    d = classify_orbit(standard_map(0.9), (0.1, 0.3), 8)
    assert d.classification in (REGULAR, NON_REGULAR, UNDECIDED)
    with pytest.raises(ValueError):
        classify_orbit(standard_map(0.9), (0.1, 0.3), 2)


def test_classification_is_thread_independent():
    th, r = band_grid(0.2, (8, 8))
    a = classify_points(standard_map(0.3), th, r, 300, threads=1)
    b = classify_points(standard_map(0.3), th, r, 300, threads=3)
    assert list(a) == list(b)


def test_diagnostics_serialize():
    d = classify_orbit(TWIST, (0.1, 0.0), 100).to_dict()
    assert d["classification"] == REGULAR and d["iterations"] == 100


# -- measure scans -----------------------------------------------------------


def test_integrable_measure_is_zero():
    rep = measure_scan(TWIST, [0.05, 0.1], (8, 20), 200)
    assert rep.m_estimates == [0.0, 0.0]
    assert rep.undecided_fraction == [0.0, 0.0]


def test_measure_bounds_and_csv():
    rep = measure_scan(standard_map(0.04), [0.05, 0.1], (8, 40), 1000)
    for t, m, u in zip(rep.t_values, rep.m_estimates, rep.undecided_fraction):
        assert 0.0 <= m <= 2 * t and 0.0 <= u <= 1.0
    lines = rep.to_csv().splitlines()
    assert lines[0] == "t,m_estimate,undecided_fraction" and len(lines) == 3
    with pytest.raises(ValueError):
        measure_scan(TWIST, [0.0], (2, 2), 10)


def test_measure_grows_with_amplitude():
    a = measure_scan(standard_map(0.0025), [0.1], (16, 100), 2000).m_estimates[0]
    b = measure_scan(standard_map(0.04), [0.1], (16, 100), 2000).m_estimates[0]
    assert 0 < a < b


def test_band_grid():
    th, r = band_grid(0.1, (4, 5))
    assert th.size == 20 and np.all(np.abs(r) < 0.1) and np.all((th > 0) & (th < 1))


def test_scaling_exponent_of_power_law():
    a = np.array([1e-3, 1e-2, 1e-1])
    assert scaling_exponent(a, 3.0 * a**0.5) == pytest.approx(0.5, abs=1e-12)


# -- periodic orbits ---------------------------------------------------------


def test_standard_map_fixed_point():
    orb = find_periodic_orbit(standard_map(0.5), 0, 1, (0.01, 0.01))
    assert orb.kind == "hyperbolic"
    assert max(abs(orb.points[0].theta), abs(orb.points[0].r)) <= 1e-12
    assert sorted(orb.eigenvalues) == pytest.approx([0.5, 2.0], abs=1e-12)
    assert orb.determinant == pytest.approx(1.0, abs=1e-13)
    assert orb.trace == pytest.approx(2.5, abs=1e-12)


def test_standard_map_elliptic_point():
    orb = find_periodic_orbit(standard_map(0.5), 0, 1, (0.45, 0.02))
    assert orb.kind == "elliptic"
    assert (orb.points[0].theta, orb.points[0].r) == pytest.approx((0.5, 0.0), abs=1e-12)
    assert orb.trace == pytest.approx(1.5, abs=1e-12)


def test_period_two_orbit():
    m = standard_map(0.3)
    orb = find_periodic_orbit(m, 1, 2, (0.0, 0.5))
    assert orb.period == 2 and len(orb.points) == 2
    th, r = np.array([orb.points[0].theta]), np.array([orb.points[0].r])
    for _ in range(2):
        th, r = m.apply(th, r)
    assert th[0] - orb.points[0].theta == pytest.approx(1.0, abs=1e-11)
    assert r[0] == pytest.approx(orb.points[0].r, abs=1e-11)
    assert orb.determinant == pytest.approx(1.0, abs=1e-12)


def test_newton_fails_on_integrable_twist():
    with pytest.raises(NewtonDiverged):
        find_periodic_orbit(twist_map([0.0, 0.0, 0.5]), 1, 2, (0.0, 0.45))


def test_separatrix_box():
    orb = find_periodic_orbit(standard_map(0.5), 0, 1, (0.01, 0.01))
    area, box = separatrix_box(orb)
    assert area == pytest.approx(box["slope"] * box["delta"] ** 2) and area > 0
    assert box["delta"] == 0.25
    th, r = sample_box(box, 10)
    dth = th - box["theta"]
    assert np.all(np.abs(r - box["r"]) < 0.5 * box["slope"] * np.abs(dth))
    assert np.all((np.abs(dth) > 0) & (np.abs(dth) < box["delta"]))
    # the box stays off both separatrix directions
    for slope in (box["m_plus"], box["m_minus"]):
        assert np.all(np.abs(r - box["r"] - slope * dth) > 0)
    elliptic = find_periodic_orbit(standard_map(0.5), 0, 1, (0.45, 0.02))
    with pytest.raises(ValueError):
        separatrix_box(elliptic)


def test_pendulum_eigenvalue_scaling():
    lam, J = pendulum_monodromy(1e-4)
    assert math.log(lam) == pytest.approx(2 * math.pi * 1e-2, rel=1e-6)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-8)
    assert eigen_scaling([1e-4, 1e-5, 1e-6]) == pytest.approx(2 * math.pi, rel=1e-6)


# -- counterexample ----------------------------------------------------------


def test_empty_level_list_returns_base():
    base = counterexample_base(GOLDEN)
    assert build_counterexample(GOLDEN, base, [], 0.5) is base


def test_counterexample_terms():
    base = counterexample_base(GOLDEN)
    m = build_counterexample(GOLDEN, base, [2, 4], 0.5)
    terms = m.meta["terms"]
    assert [(t["p"], t["q"]) for t in terms] == [(3, 5), (8, 13)]
    for t in terms:
        _, N = schedule_level(t["q"])
        assert N >= t["q"]
        assert t["amplitude"] == pytest.approx(t["eps_bar"] * math.exp(-2 * math.pi * t["q"] * 0.05))
        assert t["predicted_center"] == pytest.approx(t["p"] / t["q"] - GOLDEN)
        G = FourierTaylorSeries.cos_mode(2, t["q"], t["amplitude"], 2, t["q"])
        assert weighted_norm(G, m.strip) <= t["eps_bar"] / 4 * (1 + 1e-12)
    assert m.strip == StripParams(0.05, 0.5)


def test_schedule_level():
    assert schedule_level(2) == (0, 8)
    assert schedule_level(13) == (1, 14)
    assert schedule_level(15)[1] >= 15


def test_resonant_orbit_of_counterexample():
    m = build_counterexample(GOLDEN, counterexample_base(GOLDEN), [4], 0.5)
    t = m.meta["terms"][0]
    orb = find_resonant_orbit(m, t["p"], t["q"], t["predicted_center"])
    assert orb.kind == "hyperbolic" and orb.period == 13
    assert abs(orb.points[0].r - t["predicted_center"]) <= 0.5 * abs(t["predicted_center"])
    area, box = separatrix_box(orb)
    th, r = sample_box(box, 6)
    assert area > 0
    assert np.all(classify_points(m, th, r, 10_000) == NON_REGULAR)
