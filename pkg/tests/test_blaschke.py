import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scattrace import blaschke
from scattrace.blaschke import BlaschkeSeq, blaschke_eval

upper = st.tuples(st.floats(-3, 3), st.floats(1e-3, 3)).map(lambda t: complex(*t))
seqs = st.lists(upper, min_size=1, max_size=12)


def test_zeros_and_unimodular_boundary():
    lam = np.array([1j, 0.5 + 2j, -1 + 0.1j])
    assert np.allclose(blaschke_eval(lam, lam), 0, atol=1e-15)
    z = np.linspace(-5, 5, 11) + 1e-14j
    assert np.allclose(np.abs(blaschke_eval(lam, z)), 1, atol=1e-12)


def test_single_factor_value():
    assert blaschke_eval([2j], 1j) == pytest.approx((1j - 2j) / (1j + 2j))


def test_padding_is_ignored():
    assert blaschke_eval([1j, 0, 0], 2 + 1j) == blaschke_eval([1j], 2 + 1j)
    assert blaschke_eval([], 1j) == 1


def test_log_space_path_matches_product():
    rng = np.random.default_rng(3)
    lam = rng.uniform(-2, 2, 100) + 1j * rng.uniform(0.01, 1, 100)
    z = 0.3 + 0.7j
    direct = np.prod((z - lam) / (z - lam.conj()))
    assert blaschke_eval(lam, z) == pytest.approx(direct, rel=1e-11, abs=1e-300)


def test_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        BlaschkeSeq([1 - 1j])
    with pytest.raises(ValueError):
        blaschke_eval([1j], 1.0)


@settings(max_examples=200, deadline=None)
@given(seqs, seqs, upper)
def test_lipschitz_inequality(s1, s2, z):
    lhs, rhs = blaschke.blaschke_lipschitz_check(s1, s2, z)
    assert lhs <= rhs * (1 + 1e-12) + 1e-15


@settings(max_examples=100, deadline=None)
@given(seqs, upper)
def test_modulus_at_most_one(s, z):
    assert abs(blaschke_eval(s, z)) <= 1 + 1e-12


def test_arc_integral_against_mpmath():
    lam = 0.3 + 0.8j
    f = lambda t: mpmath.log(abs((mpmath.expj(t) - mpmath.conj(lam)) / (mpmath.expj(t) - lam)))
    ref = float(mpmath.quad(f, [0, mpmath.atan2(0.8, 0.3), mpmath.pi]))
    assert blaschke.blaschke_arc_integral([lam], 1.0) == pytest.approx(ref, rel=1e-10)
    assert blaschke.single_factor_arc(lam) == pytest.approx(ref, rel=1e-10)


def test_arc_integral_with_entry_on_the_arc():
    val = blaschke.blaschke_arc_integral([1j], 1.0)
    assert math.isfinite(val) and val > 0


def test_beta_and_arc_bound():
    beta = blaschke.estimate_beta(n_radius=30, n_angle=21)
    assert 3.6 < beta < 3.7
    rng = np.random.default_rng(7)
    lam = rng.uniform(-1, 1, 20) + 1j * rng.uniform(0, 1, 20)
    for xi in (0.5, 0.05, 0.005):
        assert blaschke.blaschke_arc_integral(lam, xi) <= blaschke.arc_bound(lam, xi, beta)


def test_arc_integrals_decrease_with_radius():
    rng = np.random.default_rng(11)
    for _ in range(5):
        lam = rng.uniform(-1, 1, 20) + 1j * rng.uniform(0, 1, 20)
        vals = [blaschke.blaschke_arc_integral(lam, xi) for xi in (0.5, 0.05, 0.005)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 0.05 * vals[0]
