import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scattrace import spectrum
from scattrace.potential import Potential
from scattrace.spectrum import BoundStateSeq, find_bound_states, lieb_thirring_check

# ground states of square wells from K tan(K L/2) = kappa, K = sqrt(V0 - kappa^2)
WELL_KAPPA = {(1.0, 2.0): 0.673612029183214815, (4.0, 1.0): 1.34722405836642963}
# gaussian(1, 1) from the Richardson-extrapolated finite-difference oracle
GAUSSIAN_KAPPA = 0.69093413424273


@pytest.mark.parametrize("k0", [0.5, 1.0, 2.0])
def test_soliton(k0):
    seq = find_bound_states(Potential.preset("soliton", k0))
    assert len(seq) == 1
    assert seq.kappas[0] == pytest.approx(k0, abs=1e-9)


def test_two_soliton():
    seq = find_bound_states(Potential.preset("multisoliton", 2.0, 1.0))
    assert np.allclose(seq.kappas, [2.0, 1.0], atol=1e-9)
    assert all(c["certified"] for c in seq.certificates)


@pytest.mark.parametrize("params,kappa", WELL_KAPPA.items())
def test_square_wells(params, kappa):
    seq = find_bound_states(Potential.preset("square_well", *params))
    assert len(seq) == 1
    assert seq.kappas[0] == pytest.approx(kappa, abs=1e-9)


def test_gaussian():
    seq = find_bound_states(Potential.preset("gaussian", 1.0, 1.0))
    assert len(seq) == 1
    assert seq.kappas[0] == pytest.approx(GAUSSIAN_KAPPA, abs=1e-8)


def test_zero_has_no_states():
    seq = find_bound_states(Potential.preset("zero"))
    assert seq.kappas == () and seq.total == 0


def test_deep_well_counts_states():
    # V0 = 25, L = 2: N = ceil(sqrt(V0) L / pi) = 4 bound states
    seq = find_bound_states(Potential.preset("square_well", 25.0, 2.0))
    assert len(seq) == 4
    assert list(seq.kappas) == sorted(seq.kappas, reverse=True)
    lieb_thirring_check(Potential.preset("square_well", 25.0, 2.0), seq)


def test_lieb_thirring_violation_detected():
    p = Potential.preset("soliton", 1.0)
    fake = BoundStateSeq((2.5,))
    with pytest.raises(spectrum.LiebThirringViolation):
        lieb_thirring_check(p, fake)
    ok = lieb_thirring_check(p, BoundStateSeq((1.0,)))
    assert ok["margin"] == pytest.approx(1.0, abs=1e-9)


def test_budget_exhaustion_reports_brackets():
    with pytest.raises(spectrum.BoundStateError) as info:
        find_bound_states(Potential.preset("soliton", 1.0), budget=405)
    assert info.value.brackets


def test_sequence_validation_and_padding():
    with pytest.raises(ValueError):
        BoundStateSeq((1.0, 2.0))
    with pytest.raises(ValueError):
        BoundStateSeq((1.0, 0.0))
    s = BoundStateSeq((2.0, 1.0))
    assert list(s.padded(4)) == [2.0, 1.0, 0.0, 0.0]
    assert spectrum.kappa_distance(s, BoundStateSeq((1.5,))) == pytest.approx(1.5)
    assert set(s.to_dict()) == {"kappas", "sum", "half_l1_norm", "resolution_floor", "warnings"}


def test_resolution_floor_is_clamped():
    seq = find_bound_states(Potential.preset("soliton", 1.0), floor=1e-8)
    assert seq.resolution_floor == pytest.approx(1e-4)


def test_shallow_state_below_floor_is_flagged():
    # kappa of a weak square well is about V0 L / 2 = 5e-5, below the 1e-4 floor
    p = Potential.preset("square_well", 1e-4, 1.0)
    seq = find_bound_states(p)
    assert seq.kappas == ()
    assert any("unresolved" in w for w in seq.warnings)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.3, 6.0), st.floats(0.3, 3.0))
def test_square_well_transcendental(v0, width):
    p = Potential.preset("square_well", v0, width)
    seq = find_bound_states(p)
    for k in seq.kappas:
        K = math.sqrt(v0 - k * k)
        even = K * math.tan(K * width / 2) - k
        odd = -K / math.tan(K * width / 2) - k
        assert min(abs(even), abs(odd)) <= 1e-7 * max(1.0, v0)
    assert seq.total <= 0.5 * p.l1_norm + 1e-8
    deeper = find_bound_states(p.scaled(1.2))
    assert len(deeper) >= len(seq)
    assert np.all(deeper.padded(len(seq))[: len(seq)] >= np.array(seq.kappas) - 1e-9)


def test_continuity_under_scaling():
    p = Potential.preset("square_well", 1.0, 2.0)
    d = spectrum.continuity_probe(p, [p.scaled(1.01), p.scaled(1.001)])
    assert d[1] < d[0] < 0.02
