import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scattrace import jost
from scattrace.potential import Potential


def soliton_m(x, lam, kappa):
    # e_+(x) = e^{i lam x} (lam + i kappa tanh(kappa x)) / (lam + i kappa)
    return (lam + 1j * kappa * np.tanh(kappa * x)) / (lam + 1j * kappa)


def well_m(x, lam, v0, width):
    """Right m for a square well, piecewise closed form."""
    c = width / 2
    K = np.sqrt(lam * lam + v0 + 0j)
    out = np.ones_like(x, dtype=complex)
    inside = np.abs(x) <= c
    A = 0.5 * (1 + lam / K) * np.exp(1j * (lam - K) * c)
    B = 0.5 * (1 - lam / K) * np.exp(1j * (lam + K) * c)
    xi = x[inside]
    out[inside] = (A * np.exp(1j * K * xi) + B * np.exp(-1j * K * xi)) * np.exp(-1j * lam * xi)
    left = x < -c
    e_c = A * np.exp(-1j * K * c) + B * np.exp(1j * K * c)
    de_c = 1j * K * (A * np.exp(-1j * K * c) - B * np.exp(1j * K * c))
    a = 0.5 * (e_c + de_c / (1j * lam)) * np.exp(1j * lam * c)
    b = 0.5 * (e_c - de_c / (1j * lam)) * np.exp(-1j * lam * c)
    xl = x[left]
    out[left] = a + b * np.exp(-2j * lam * xl)
    return out


def test_kernel_values_and_series_switch():
    lam = 0.7 + 0.2j
    y = np.array([-1.0, 0.0, 0.5, 2.0])
    expected = np.where(y > 0, (np.exp(2j * lam * y) - 1) / (2j * lam), 0)
    assert np.allclose(jost.kernel_D(y, lam), expected, rtol=1e-14, atol=0)
    # both sides of the series switch agree
    for yy in (0.999e-6 / (2 * abs(lam)), 1.001e-6 / (2 * abs(lam))):
        with mpmath.workdps(40):
            ml = mpmath.mpc(lam)
            ref = complex((mpmath.exp(2j * ml * yy) - 1) / (2j * ml))
        assert abs(jost.kernel_D(yy, lam) - ref) <= 1e-14 * abs(ref)


def test_kernel_bound():
    lam = np.array([0.3, 1 + 1j, 5j])
    y = np.linspace(0, 20, 401)
    for l in lam:
        assert np.all(np.abs(jost.kernel_D(y, l)) <= np.minimum(y, 1 / abs(l)) + 1e-15)


def test_zero_potential_gives_one():
    f = jost.solve_m(Potential.preset("zero"), 1.3)
    assert np.all(f.m_values == 1) and np.all(f.m_deriv == 0)


@pytest.mark.parametrize("lam", [0.5, 2.0, 1 + 1j, 0.3j, -1.5])
def test_soliton_closed_form(lam):
    p = Potential.preset("soliton", 1.0)
    f = jost.solve_m(p, lam)
    assert np.max(np.abs(f.m_values - soliton_m(f.grid, lam, 1.0))) <= 1e-9


@pytest.mark.parametrize("lam", [0.5, 1.3, 0.8 + 0.4j])
def test_square_well_closed_form(lam):
    p = Potential.preset("square_well", 4.0, 1.0)
    f = jost.solve_m(p, lam)
    assert np.max(np.abs(f.m_values - well_m(f.grid, lam, 4.0, 1.0))) <= 1e-9


def test_left_field_of_even_potential_is_mirror():
    p = Potential.preset("gaussian", 1.0, 1.0)
    g = np.linspace(-6, 6, 121)
    fr = jost.solve_m(p, 1.1, grid=g)
    fl = jost.solve_m(p, 1.1, grid=g, direction="left")
    assert np.allclose(fl.m_values, fr.m_values[::-1], atol=1e-10)


def test_vectorised_matches_scalar():
    p = Potential.preset("gaussian", 1.0, 1.0)
    lams = [0.4, 1 + 0.5j, 3j]
    many = jost.solve_m(p, lams)
    for lam, f in zip(lams, many):
        one = jost.solve_m(p, lam)
        assert np.allclose(one.m_values, f.m_values, atol=1e-13)


def test_spectral_parameter_domain():
    with pytest.raises(ValueError, match="lower half-plane"):
        jost.SpectralParam(1 - 0.1j)
    with pytest.raises(ValueError, match="floor"):
        jost.SpectralParam(1e-5)
    with pytest.raises(ValueError):
        jost.solve_m(Potential.preset("soliton", 1), 0.0)
    assert jost.SpectralParam(2j).modulus == 2


def test_nonconvergence_raises():
    p = Potential.preset("square_well", 4.0, 1.0)
    with pytest.raises(jost.JostConvergenceError) as info:
        jost.boundary_state(p, [400.0], tol=1e-16)
    assert info.value.achieved > 1e-16


def test_neumann_oracle_agrees():
    p = Potential.preset("square_well", 1.0, 2.0)
    lam = 2 + 1j
    x, norms, partial = jost.neumann_series(p, lam, 30)
    f = jost.solve_m(p, lam, grid=x)
    assert np.max(np.abs(partial - f.m_values)) <= 1e-6
    # factorial decay of the iterates: ||D^n m0|| <= (||q||/|lam|)^n / n!
    r = p.l1_norm / abs(lam)
    bounds = np.array([r**n / math.factorial(n) for n in range(1, 31)])
    assert np.all(norms <= bounds * (1 + 1e-6) + 1e-14)


def test_volterra_residual_small():
    p = Potential.preset("square_well", 1.0, 2.0)
    lo, hi = p.truncation_window()
    grid = np.union1d(jost.default_grid((lo, hi), 8192), [lo, hi])
    f = jost.solve_m(p, 1.3, grid=grid)
    assert np.max(jost.volterra_residual(p, f, np.linspace(lo, hi, 7))) <= 1e-9


def test_cauchy_mean_value():
    p = Potential.preset("gaussian", 1.0, 1.0)
    g = np.array([-1.0, 0.0, 1.0])
    lam0 = 1 + 1j
    pts = lam0 + 0.25 * np.exp(2j * np.pi * np.arange(32) / 32)
    ring = np.mean([f.m_values for f in jost.solve_m(p, list(pts), grid=g)], axis=0)
    assert np.max(np.abs(ring - jost.solve_m(p, lam0, grid=g).m_values)) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["soliton:1", "square_well:4,1", "gaussian:1,1", "multisoliton:2,1"]),
       st.floats(0.1, 10), st.floats(0, math.pi))
def test_growth_bounds(spec, r, theta):
    p = Potential.from_spec(spec)
    f = jost.solve_m(p, r * cmath.exp(1j * theta), n_out=512)
    sup, bound, sup1, bound1 = jost.growth_bounds(p, f)
    assert sup <= bound * (1 + 1e-8)
    assert sup1 <= bound1 * (1 + 1e-8) + 1e-8
