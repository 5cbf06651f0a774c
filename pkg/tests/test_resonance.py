import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from annulus_bnf.errors import BranchViolation, NoTwist
from annulus_bnf.maps import GeneratingMap
from annulus_bnf.resonance import (
    GammaMap,
    contour_integral,
    eliminate_nonresonant,
    flatness_bound,
    from_coefficients,
    g_derivative,
    gamma_and_h,
    laurent_coefficients,
    pendulum_reduce,
    recenter_series,
    residue_check,
    residue_formula,
    resonant_split,
    solve_g,
    sqrt_branch,
    theta_grid,
    trig_interpolate,
    unfold,
)
from annulus_bnf.series import FourierTaylorSeries, RadialSeries, StripParams, weighted_norm
from annulus_bnf.small_divisors import ResonanceZone

from conftest import series_strategy

COS = lambda e: (lambda th: -e * np.cos(2 * np.pi * th))


# -- splitting ---------------------------------------------------------------


@given(series_strategy(3, 6), st.integers(1, 4))
def test_split_is_exact(F, q):
    res, non = resonant_split(F, q)
    assert np.array_equal((res + non).coeffs, F.coeffs)
    K = F.n_theta_max
    for k in range(-K, K + 1):
        col = res.coeffs[:, K + k] if k % q == 0 else non.coeffs[:, K + k]
        other = non.coeffs[:, K + k] if k % q == 0 else res.coeffs[:, K + k]
        assert np.array_equal(col, F.coeffs[:, K + k]) and not np.any(other)


def test_split_rejects_q_zero():
    with pytest.raises(ValueError):
        resonant_split(FourierTaylorSeries(1, 1), 0)


def test_recenter_matches_pointwise():
    F = FourierTaylorSeries(4, 2, {(1, 1): 0.3, (3, 0): 1.0, (4, 2): 0.5})
    G = recenter_series(F, 0.2)
    th, r = np.array([0.1, 0.7]), np.array([0.05, -0.1])
    assert np.allclose(G.evaluate(th, r), F.evaluate(th, r + 0.2), atol=1e-14)


def test_unfold_scaling():
    Pi = FourierTaylorSeries(2, 6, {(0, 3): 1.0, (2, 0): 0.5, (1, 6): 0.25})
    U = unfold(Pi, 3)
    t, r = np.array([0.13, 0.6]), np.array([0.2, -0.4])
    assert np.allclose(U.evaluate(t, r), 9 * Pi.evaluate(t / 3, r / 3), atol=1e-14)


def test_eliminate_nonresonant_modes():
    om = RadialSeries([0.0, 0.3, 0.5])
    eps = 1e-6
    F = (FourierTaylorSeries.cos_mode(0, 2, eps, 6, 6) + FourierTaylorSeries.cos_mode(0, 1, eps, 6, 6)
         + FourierTaylorSeries.cos_mode(1, 3, eps, 6, 6))
    m = GeneratingMap(om, F, StripParams(0.1, 0.05), check=False)
    zone = ResonanceZone(1, 2, 0.2, 0.05)
    res, non, log = eliminate_nonresonant(m, zone, 6, 3)
    start = weighted_norm(resonant_split(F, 2)[1], StripParams(0.1, 0.05))
    norms = [n for _, n in log]
    assert norms[0] < 1e-3 * start and norms[-1] < 1e-15
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert res.coeff(0, 2) == pytest.approx(eps / 2, rel=1e-3)


# -- pendulum reduction ------------------------------------------------------


def reduce_example(eps):
    om = RadialSeries([0.0, 0.3, 0.5])
    F = FourierTaylorSeries.cos_mode(0, 2, eps, 6, 6)
    m = GeneratingMap(om, F, StripParams(0.1, 0.05), check=False)
    return pendulum_reduce(m, ResonanceZone(1, 2, 0.2, 0.05))


def test_reduction_leading_order():
    # omega = 0.3 + r crosses 1/2 at 0.2; unfolding by q = 2 and dividing
    # by the curvature 1/2 turns eps cos(4 pi theta) into 8 eps cos(2 pi t)
    eps = 1e-6
    red = reduce_example(eps)
    t = theta_grid(red.n)
    assert (red.p, red.q, red.curvature, red.rho_q) == (1, 2, 0.5, 0.1)
    assert np.abs(red.f0 - 8 * eps * np.cos(2 * np.pi * t)).max() <= 1e-9
    assert red.meta["interpolation_residual"] <= 1e-12


def test_reduction_corrections_are_linear():
    a, b = reduce_example(1e-6), reduce_example(2e-6)
    for name in ("f1", "f2"):
        x, y = getattr(a, name), getattr(b, name)
        assert np.abs(y - 2 * x).max() <= 1e-3 * np.abs(x).max()


def test_reduction_is_normalized():
    red = from_coefficients(f0=lambda th: 0.1 + 1e-3 * np.cos(2 * np.pi * th), f2=0.2)
    assert abs(red.normalization()) <= 1e-15


def test_reduction_needs_twist():
    m = GeneratingMap(RadialSeries([0.0, 0.3]), FourierTaylorSeries.cos_mode(0, 2, 1e-6, 4, 4),
                      StripParams(0.1, 0.05), check=False)
    with pytest.raises(NoTwist):
        pendulum_reduce(m, ResonanceZone(1, 2, 0.2, 0.05))
    with pytest.raises(NoTwist):
        from_coefficients(f2=-1.5)


# -- branches and g ----------------------------------------------------------


def test_sqrt_branch():
    z = np.array([2.0, -3.0 + 1j, 0.5j + 1.0])
    a = np.array([0.3, -1.0, 0.2j])
    m = sqrt_branch(z, a)
    assert np.allclose(m**2, z**2 + a, atol=1e-14)
    assert abs(sqrt_branch(1e6, 1.0) / 1e6 - 1) < 1e-12
    assert sqrt_branch(-2.0, 0.0) == -2.0
    with pytest.raises(BranchViolation):
        sqrt_branch(0.5, 1.0)


def test_g_without_perturbation_is_identity():
    red = from_coefficients()
    z = np.array([0.3, 1 + 1j])
    assert np.allclose(solve_g(red, z), z[:, None], atol=1e-15)


def test_g_for_constant_twist():
    red = from_coefficients(f2=0.44)
    z = 0.7 - 0.2j
    assert np.allclose(solve_g(red, z), z / 1.2, atol=1e-15)
    assert red.gamma == pytest.approx(1 / 1.2)


def test_g_solves_level_equation():
    red = from_coefficients(f0=COS(1e-3), f1=lambda th: 1e-3 * np.sin(2 * np.pi * th), f2=0.1,
                            cubic=[0.05, lambda th: 0.02 * np.cos(2 * np.pi * th)])
    z = 0.3 * np.exp(2j * np.pi * np.linspace(0, 1, 7))
    g = solve_g(red, z)
    assert np.abs(red.hamiltonian(g) - (z**2)[:, None]).max() <= 1e-13
    dz = 1e-6
    fd = (solve_g(red, z + dz) - solve_g(red, z - dz)) / (2 * dz)
    assert np.abs(g_derivative(red, g, z) - fd).max() <= 1e-8


def test_inner_cutoff():
    red = from_coefficients(f0=COS(1e-2))
    with pytest.raises(BranchViolation):
        solve_g(red, red.lam / 10)


def test_gamma_and_inverse():
    red = from_coefficients(f0=COS(1e-3), f2=lambda th: 0.1 * np.cos(2 * np.pi * th), cubic=[0.01])
    grid = 0.5 * np.exp(2j * np.pi * np.arange(16) / 16)
    G, h = gamma_and_h(red, grid=grid)
    assert np.abs(G(h(grid)) - grid).max() <= 1e-12
    u = 0.4 + 0.1j
    fd = (G(u + 1e-6) - G(u - 1e-6)) / 2e-6
    assert G.derivative(u) == pytest.approx(fd, abs=1e-8)


def test_gamma_linear_for_constant_twist():
    red = from_coefficients(f2=0.21)
    G = GammaMap(red)
    assert G(0.5) == pytest.approx(0.5 / 1.1, abs=1e-15)
    assert G.inverse(0.5) == pytest.approx(0.55, abs=1e-15)


# -- residue -----------------------------------------------------------------


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_residue_matches_closed_form(eps):
    red = from_coefficients(f0=COS(eps))
    assert residue_formula(red) == pytest.approx(eps**2 / 16, rel=1e-12)
    for t in (2 * red.lam, 4 * red.lam):
        c, formula = residue_check(red, t, 256)
        assert abs(c.real - formula) <= 1e-8 * formula and abs(c.imag) <= 1e-8 * formula


def test_residue_with_variable_twist():
    f2 = lambda th: 0.3 * np.sin(2 * np.pi * th)
    red = from_coefficients(f0=COS(1e-3), f2=f2)
    c, formula = residue_check(red, 3 * red.lam, 256)
    assert c.real == pytest.approx(formula, rel=1e-8)


def test_squared_inverse_has_no_residue():
    red = from_coefficients(f0=COS(1e-2))
    assert np.allclose(red.e0, 0)
    c, _ = residue_check(red, 2 * red.lam, 256, kind="z2h2")
    assert abs(c) <= 1e-12


def test_residue_argument_checks():
    red = from_coefficients(f0=COS(1e-2))
    with pytest.raises(ValueError):
        residue_check(red, red.lam / 2)
    with pytest.raises(ValueError):
        residue_check(red, red.lam, 32)
    with pytest.raises(ValueError):
        residue_check(red, red.lam, kind="bad")


def test_laurent_expansion_of_inverse():
    red = from_coefficients(f0=COS(1e-2))
    _, h = gamma_and_h(red, truncated=True)
    a = laurent_coefficients(h, 2 * red.lam, [1, 0, -1, -3])
    assert a[1] == pytest.approx(1 / red.gamma, abs=1e-12)
    assert abs(a[0]) <= 1e-14 and abs(a[-1]) <= 1e-12
    assert a[-3].real == pytest.approx(residue_formula(red), rel=1e-8)


def test_contour_integral_of_monomials():
    for d in range(-3, 4):
        val = contour_integral(lambda z, d=d: z**d, 0.7, 64)
        assert val == pytest.approx(1.0 if d == -1 else 0.0, abs=1e-14)


def test_trig_interpolation_is_exact_for_low_modes():
    t = theta_grid(32)
    f = lambda th: 1 + np.cos(2 * np.pi * 3 * th) - 0.5 * np.sin(2 * np.pi * 5 * th)
    x = np.array([0.013, 0.5, 0.77])
    assert np.allclose(trig_interpolate(f(t), x), f(x), atol=1e-13)


# -- flatness ----------------------------------------------------------------


def test_flatness_bound_closed_form():
    val = flatness_bound(1e-6, L=10.0, eps_bar=1e-5, h=0.5)
    assert val == pytest.approx(0.1 * 1e-1 + math.exp(-0.5 / (2 * 1e4 * 1e-5)) / 0.5, rel=1e-14)


def test_flatness_bound_vanishes_in_the_limit():
    vals = [flatness_bound(e**3, L=e ** (-1 / 8), eps_bar=e) for e in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.05


def test_flatness_bound_uses_reduction_defaults():
    red = from_coefficients(f0=COS(1e-4), L=5.0)
    assert flatness_bound(1e-9, red) == flatness_bound(1e-9, L=5.0, eps_bar=red.eps_bar)
    with pytest.raises(ValueError):
        flatness_bound(1e-9)
    with pytest.raises(ValueError):
        flatness_bound(-1.0, L=1.0, eps_bar=1.0)


# -- closed-form examples ----------------------------------------------------


def test_split_examples():
    F = FourierTaylorSeries.cos_mode(0, 1, 1.0, 1, 2) + FourierTaylorSeries.cos_mode(0, 2, 1.0, 1, 2)
    res, non = resonant_split(F, 1)
    assert res.allclose(F, atol=0) and non.is_zero()
    res, non = resonant_split(F, 2)
    assert res.allclose(FourierTaylorSeries.cos_mode(0, 2, 1.0, 1, 2), atol=0)
    assert non.allclose(FourierTaylorSeries.cos_mode(0, 1, 1.0, 1, 2), atol=0)
    th = np.linspace(0, 1, 9)
    assert np.allclose(res.evaluate(th + 0.5, 0 * th), res.evaluate(th, 0 * th), atol=1e-14)
    again, rest = resonant_split(res, 2)
    assert again.allclose(res, atol=0) and rest.is_zero()


def test_eliminate_on_resonant_input_is_identity():
    om = RadialSeries([0.0, 0.3, 0.5])
    F = FourierTaylorSeries.cos_mode(0, 2, 1e-5, 6, 6)
    m = GeneratingMap(om, F, StripParams(0.1, 0.05), check=False)
    res, non, log = eliminate_nonresonant(m, ResonanceZone(1, 2, 0.2, 0.05), 6, 3)
    assert non.is_zero() and log == []
    assert res.allclose(recenter_series(F, 0.2), atol=0)


def test_eliminate_single_mode_example():
    om = RadialSeries([0.0, 0.3, 0.5])
    F = FourierTaylorSeries.cos_mode(0, 1, 1e-5, 6, 6)
    m = GeneratingMap(om, F, StripParams(0.1, 0.05), check=False)
    _, non, log = eliminate_nonresonant(m, ResonanceZone(1, 2, 0.2, 0.05), 6, 3)
    assert weighted_norm(non, StripParams(0.1, 0.05)) <= 1e-12


def test_eliminate_leading_order_is_quadratic():
    om = RadialSeries([0.0, 0.3, 0.5])
    zone = ResonanceZone(1, 2, 0.2, 0.05)
    gaps = []
    for eps in (1e-5, 5e-6):
        F = FourierTaylorSeries.cos_mode(0, 1, eps, 6, 6) + FourierTaylorSeries.cos_mode(1, 2, eps, 6, 6)
        m = GeneratingMap(om, F, StripParams(0.1, 0.05), check=False)
        res, _, _ = eliminate_nonresonant(m, zone, 6, 3)
        base = resonant_split(recenter_series(F, zone.center), 2)[0]
        gaps.append(weighted_norm(res - base, StripParams(0.1, 0.05)))
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.05)


def test_reduction_of_integrable_model():
    m = GeneratingMap(RadialSeries([0.0, 0.3, 0.5]), FourierTaylorSeries(4, 4), StripParams(0.1, 0.05), check=False)
    red = pendulum_reduce(m, ResonanceZone(1, 2, 0.2, 0.05))
    assert red.eps0 <= 1e-14 and red.eps1 <= 1e-14


def test_e_functions_closed_form():
    eps = 1e-3
    red = from_coefficients(f0=COS(eps))
    t = theta_grid(red.n)
    assert np.allclose(red.e1, eps * np.cos(2 * np.pi * t), atol=1e-15)
    assert np.all(red.e0 == 0)
    f0 = lambda th: 1e-3 * np.sin(2 * np.pi * th)
    f1 = lambda th: 2e-3 * np.cos(4 * np.pi * th)
    f2 = lambda th: 0.1 * np.cos(2 * np.pi * th)
    red = from_coefficients(f0=f0, f1=f1, f2=f2)
    assert np.allclose(red.e0, -0.5 * red.f1 / (1 + red.f2), atol=1e-15)
    assert np.allclose(red.e1, -red.f0 + 0.25 * red.f1**2 / (1 + red.f2), atol=1e-15)
    assert abs(red.normalization()) <= 1e-12


def test_sqrt_branch_asymptotics():
    a = 0.3 - 0.1j
    z = 1e3 * abs(a) ** 0.5 * np.exp(0.7j)
    assert abs(sqrt_branch(z, a) - (z + a / (2 * z))) <= 1e-9
    assert sqrt_branch(0.4 + 0.2j, 0.0) == 0.4 + 0.2j


def test_g_with_constant_e1():
    eps = 1e-2
    red = from_coefficients(f0=-eps, normalize=False)
    z = np.array([0.5, 0.3j + 0.2])
    assert np.allclose(solve_g(red, z), np.sqrt(z**2 + eps)[:, None], atol=1e-15)
    G, h = gamma_and_h(red)
    assert np.allclose(G(z), np.sqrt(z**2 + eps), atol=1e-15)
    assert np.allclose(h(z), np.sqrt(z**2 - eps), atol=1e-14)


def test_g_annulus_bounds():
    red = from_coefficients(f0=COS(1e-3), f2=lambda th: 0.05 * np.cos(2 * np.pi * th), cubic=[0.02])
    z = np.linspace(2 * red.lam, 0.5, 9) * np.exp(1.1j)
    g = np.abs(solve_g(red, z))
    az = np.abs(z)[:, None]
    assert np.all(g >= 0.9 * az) and np.all(g <= 1.1 * az)


def test_inverse_round_trip_on_64_nodes():
    red = from_coefficients(f0=COS(1e-3), cubic=[0.01])
    grid = 0.3 * np.exp(2j * np.pi * np.arange(64) / 64)
    G, h = gamma_and_h(red, grid=grid)
    assert np.abs(G(h(grid)) - grid).max() <= 1e-12


def test_laurent_structure_of_model_gamma():
    red = from_coefficients(f0=COS(1e-2), f2=lambda th: 0.2 * np.sin(2 * np.pi * th))
    G = GammaMap(red, truncated=True)
    a = laurent_coefficients(G, 2 * red.lam, [-4, -2, -1])
    b = laurent_coefficients(G, 4 * red.lam, [-4, -2, -1])
    for d in (-4, -2, -1):
        assert abs(a[d]) <= 1e-12 and abs(b[d]) <= 1e-12


def test_no_obstruction_without_e1():
    red = from_coefficients()
    c, formula = residue_check(red, 0.5, 256)
    assert formula == 0.0 and abs(c) <= 1e-15
    c2, _ = residue_check(red, 0.5, 256, kind="z2h2")
    assert abs(c2) <= 1e-10


def test_flatness_examples():
    h, eps_bar = 0.5, 1e-4
    assert flatness_bound(0.0, L=10.0, eps_bar=eps_bar, h=h) == pytest.approx(
        math.exp(-h / (2 * 1e4 * eps_bar)) / h, rel=1e-14)
    # the quoted numerical example corresponds to a linear power of L
    val = flatness_bound(1e-12, L=10.0, eps_bar=eps_bar, h=h, L_power=1)
    assert val == pytest.approx(1e-3, rel=1e-9)
