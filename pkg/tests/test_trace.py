import csv
import json
import math

import mpmath
import numpy as np
import pytest

from scattrace import trace
from scattrace.potential import Potential
from scattrace.scattering import GridSpec
from scattrace.spectrum import BoundStateSeq

COARSE = GridSpec(per_decade=40, n_linear=201)


def test_cauchy_piecewise_exact():
    k = np.array([-1.0, 0.0, 2.0, 3.0])
    f = np.array([0.0, 1.0, -0.5, 0.0])
    z = 0.5 + 0.7j
    g = lambda t: np.interp(t, k, f)
    with mpmath.workdps(30):
        ref = sum(mpmath.quad(lambda t: g(float(t)) / (t - z), [a, b]) for a, b in zip(k[:-1], k[1:]))
    assert trace.cauchy_piecewise(k, f, z) == pytest.approx(complex(ref), abs=1e-13)


def test_tail_cauchy_closed_form():
    C, K, z = 0.7, 20.0, 1 + 2j
    for sign in (1, -1):
        lo, hi = (K, mpmath.inf) if sign > 0 else (-mpmath.inf, -K)
        ref = complex(mpmath.quad(lambda t: C / t**2 / (t - z), [lo, hi]))
        assert trace._tail_cauchy(C, K, z, sign) == pytest.approx(ref, abs=1e-14)


def test_zero_potential_is_exact():
    rep = trace.trace_formula(Potential.preset("zero"), COARSE)
    assert rep.residual == 0 and rep.h_integral == 0 and rep.kappas == []
    assert rep.poisson_schwarz_defect == 0


def test_soliton_trace_and_reconstruction():
    p = Potential.preset("soliton", 1.0)
    rep = trace.trace_formula(p, COARSE, bound_states=BoundStateSeq((1.0,)))
    assert rep.eigen_term == -4.0
    assert rep.q_integral == pytest.approx(-4.0, abs=1e-9)
    assert abs(rep.residual) <= 1e-3 * (1 + p.l1_norm)
    assert rep.poisson_schwarz_defect <= 1e-6
    d = rep.to_dict()
    assert "scattering" not in d
    json.loads(rep.to_json())


def test_square_well_report(tmp_path):
    p = Potential.preset("square_well", 1.0, 2.0)
    rep = trace.trace_formula(p, COARSE)
    assert rep.q_integral == pytest.approx(-2.0, abs=1e-14)
    assert rep.kappas == pytest.approx([0.673612029183214815], abs=1e-9)
    assert abs(rep.residual) <= 1e-3 * 3
    assert rep.h_integral > 0
    assert math.pi * rep.h_integral <= rep.h_l1_bound
    assert rep.h_integral == pytest.approx(rep.h_integral_via_r, rel=1e-6)
    assert rep.poisson_schwarz_defect <= 1e-3
    path = tmp_path / "h.csv"
    trace.write_h_csv(rep, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["k", "h"]
    ks = [float(r[0]) for r in rows[1:]]
    assert ks == sorted(ks)


def test_poisson_schwarz_refinement():
    p = Potential.preset("square_well", 1.0, 2.0)
    g = GridSpec(per_decade=10, n_linear=41)
    coarse = trace.poisson_schwarz_check(p, grid_spec=g)
    fine = trace.poisson_schwarz_check(p, grid_spec=g.refined())
    assert np.all(fine * 1.5 <= coarse)


def test_h_continuity_in_amplitude():
    p = Potential.preset("square_well", 1.0, 2.0)
    d = trace.h_continuity_probe(p, [p.scaled(1.1), p.scaled(1.01), p.scaled(1.001)], COARSE)
    assert d[0] > d[1] > d[2] and d[2] < 0.1 * d[0]
