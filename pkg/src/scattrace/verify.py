"""
Invariant battery behind ``scattrace verify``.

Every check returns a record {"pass", "value", "limit", "detail"}; an
exception inside a check counts as a failure.  `mutation` installs one of
the deliberate faults used to show the battery is not vacuous.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from . import blaschke, jost, oracles, scattering, spectrum, trace
from .potential import Potential

DEFAULT_BATTERY = ("zero", "soliton:1", "multisoliton:2,1", "square_well:1,2", "gaussian:1,1",
                   "sampled:gaussian")
MUTATIONS = ("kernel-sign", "drop-prefactor")
COARSE = scattering.GridSpec(per_decade=20, n_linear=81)


@contextlib.contextmanager
def mutation(name):
    """Temporarily break the solver (test hook)."""
    if name is None:
        yield
        return
    if name == "kernel-sign":
        target, attr = jost, "kernel_D"
        orig = jost.kernel_D
        fake = lambda y, lam: -orig(y, lam)  # noqa: E731
    elif name == "drop-prefactor":
        target, attr = scattering, "a_from_integral"
        orig = scattering.a_from_integral
        fake = lambda qm, lams: 1 - qm  # noqa: E731
    else:
        raise ValueError(f"unknown mutation {name!r}; choose from {', '.join(MUTATIONS)}")
    setattr(target, attr, fake)
    try:
        yield
    finally:
        setattr(target, attr, orig)


def battery_potential(spec):
    """Preset spec, or ``sampled:gaussian`` for a sampled reference potential."""
    if spec == "sampled:gaussian":
        xs = np.linspace(-7.0, 7.0, 561)
        return Potential.sampled(xs, -1.5 * np.exp(-0.5 * xs ** 2), name="gaussian")
    return Potential.from_spec(spec)


def _rec(ok, value=None, limit=None, detail=""):
    f = lambda v: None if v is None else float(v)  # noqa: E731
    return {"pass": bool(ok), "value": f(value), "limit": f(limit), "detail": detail}


# ---------------------------------------------------------------------------
# per-potential checks


def _potential_checks(p):
    out = {}
    r = p.reflect()
    d = abs(r.l1_norm - p.l1_norm)
    out["potential.reflect_l1"] = _rec(d <= 1e-12 * max(1.0, p.l1_norm), d, 1e-12 * max(1.0, p.l1_norm))
    xs = np.linspace(-20, 20, 4001)
    d = float(np.max(np.abs(r(xs) - p(-xs))))
    lim = 1e-14 * max(1.0, float(np.max(np.abs(p(xs)))))
    out["potential.reflect_eval"] = _rec(d <= lim, d, lim)
    lo, hi = p.truncation_window()
    tl, tr = p.tail_masses(lo, hi) if hi > lo else (0.0, 0.0)
    capped = hi - lo >= 2 * 400.0 - 1e-9
    ok = capped or max(tl, tr) < 1e-10 + 1e-15
    out["potential.window_tail"] = _rec(ok, max(tl, tr), 1e-10, "window capped" if capped else "")
    return out


def _jost_checks(p):
    out = {}
    tol = jost.default_tol(p)
    lams = [0.5, 1 + 1j, 3j, -2.0]
    fields = jost.solve_m(p, lams)
    worst_a = worst_b = 0.0
    for f in fields:
        sup, bnd, sup1, bnd1 = jost.growth_bounds(p, f)
        worst_a = max(worst_a, sup / (bnd * (1 + 1e-8)))
        worst_b = max(worst_b, (sup1 - 1e-8) / bnd1 if bnd1 > 0 else sup1 - 1e-8)
    out["jost.sup_bound"] = _rec(worst_a <= 1.0, worst_a, 1.0)
    out["jost.deviation_bound"] = _rec(worst_b <= 1.0, worst_b, 1.0)

    q2 = p.scaled(1.05)
    lam = 2.0
    f1 = jost.solve_m(p, lam)
    f2 = jost.solve_m(q2, lam, grid=f1.grid)
    diff = float(np.max(np.abs(f1.m_values - f2.m_values)))
    alpha = max(p.l1_norm, q2.l1_norm)
    bound = math.exp(2 * alpha / lam) * 0.05 * p.l1_norm / lam + 10 * tol
    out["jost.stability"] = _rec(diff <= bound, diff, bound)

    lam = max(1.0, p.l1_norm) * (1 + 0.5j) / abs(1 + 0.5j)
    x, _, partial = jost.neumann_series(p, lam, 40)
    f = jost.solve_m(p, lam, grid=x)
    d = float(np.max(np.abs(partial - f.m_values)))
    out["jost.neumann_agreement"] = _rec(d <= 1e-6, d, 1e-6)

    lam0, rad, n = 1 + 1j, 0.25, 32
    pts = lam0 + rad * np.exp(2j * np.pi * np.arange(n) / n)
    g = np.array([-1.0, 0.0, 1.0])
    centre = jost.solve_m(p, lam0, grid=g).m_values
    ring = np.mean([fl.m_values for fl in jost.solve_m(p, list(pts), grid=g)], axis=0)
    d = float(np.max(np.abs(ring - centre)))
    out["jost.cauchy_mean_value"] = _rec(d <= 1e-7, d, 1e-7)

    lo, hi = p.truncation_window()
    grid = np.union1d(jost.default_grid((lo, hi), 8192), np.r_[lo, hi, p.breakpoints(lo, hi)])
    f = jost.solve_m(p, 1.3, grid=grid)
    xs = np.linspace(f.window[0], f.window[1], 7) if f.window[1] > f.window[0] else np.array([0.0])
    res = float(np.max(jost.volterra_residual(p, f, xs)))
    out["jost.volterra_residual"] = _rec(res <= 10 * tol + 1e-12, res, 10 * tol + 1e-12)
    return out


def _scattering_checks(p):
    out = {}
    sd = scattering.scattering_on_grid(p, COARSE)
    lim = 1e-6 if p.kind == "sampled" else 1e-8
    ok = bool(np.all(sd.valid)) and sd.max_defect <= lim
    out["scattering.unitarity"] = _rec(ok, sd.max_defect, lim)

    n = sd.k_grid.size // 2
    neg, pos = slice(n - 1, None, -1), slice(n, None)
    sc = np.maximum(1.0, np.abs(sd.a_values[pos]))
    d = float(np.max(np.maximum(np.abs(sd.a_values[neg] - np.conj(sd.a_values[pos])),
                                np.abs(sd.b_values[neg] - np.conj(sd.b_values[pos]))) / sc))
    out["scattering.conjugate_symmetry"] = _rec(d <= 1e-7, d, 1e-7)

    d = float(np.max(np.abs(sd.h_values - sd.h_from_r) / np.maximum(1.0, np.abs(sd.h_values))))
    out["scattering.h_two_ways"] = _rec(d <= 1e-6, d, 1e-6)
    out["scattering.h_nonnegative"] = _rec(float(np.min(sd.h_values)) >= -1e-9,
                                           float(np.min(sd.h_values)), -1e-9)
    rmax = float(np.max(np.abs(sd.r_values)))
    out["scattering.reflection_below_one"] = _rec(rmax < 1.0, rmax, 1.0)

    k = 0.7
    win = p.truncation_window()
    x = np.array([win[0], 0.5 * (win[0] + win[1]), win[1]]) if win[1] > win[0] else np.array([-1.0, 0.0, 1.0])
    ep, dep = jost.jost_solution(jost.solve_m(p, k, grid=x, direction="right"))
    em, dem = jost.jost_solution(jost.solve_m(p, k, grid=x, direction="left"))
    W = em * dep - dem * ep
    a = scattering.coeff_a(p, k)
    d = float(np.max(np.abs(W - 2j * k * a)))
    out["scattering.wronskian"] = _rec(d <= 1e-7 * max(1.0, abs(a)), d, 1e-7 * max(1.0, abs(a)))

    ks = np.array([0.3, 1.0, 2.5])
    a_r, b_r = scattering.coeff_a(p, ks), scattering.coeff_b(p, ks)
    q = p.reflect()
    a_l, b_l = scattering.coeff_a(q, ks), scattering.coeff_b(q, ks)
    d = float(max(np.max(np.abs(a_l - a_r)), np.max(np.abs(np.abs(b_l / a_l) - np.abs(b_r / a_r)))))
    out["scattering.left_right"] = _rec(d <= 1e-8, d, 1e-8)

    lo, hi = win
    if hi > lo:
        ks = np.array([0.2, 0.8, 2.0])
        base = scattering.coeff_a(p, ks)
        dists = []
        for frac in (0.25, 0.5, 0.75):
            c = 0.5 * (lo + hi)
            w = 0.5 * (hi - lo) * frac
            dists.append(float(np.max(np.abs(scattering.coeff_a(p.truncated(c - w, c + w), ks) - base))))
        ok = all(b <= a + 1e-9 for a, b in zip(dists, dists[1:]))
        out["scattering.continuity"] = _rec(ok, dists[-1], dists[0] + 1e-9)
    return out


def _spectrum_checks(p, seq):
    out = {}
    try:
        rep = spectrum.lieb_thirring_check(p, seq)
        out["spectrum.lieb_thirring"] = _rec(True, rep["sum_kappa"], rep["half_l1"])
    except spectrum.LiebThirringViolation as exc:
        out["spectrum.lieb_thirring"] = _rec(False, seq.total, 0.5 * p.l1_norm, str(exc))
    ok = all(c["certified"] for c in seq.certificates)
    out["spectrum.zero_certificate"] = _rec(ok, detail=f"{len(seq.certificates)} zero(s)")
    if seq.kappas:
        lo, hi = p.truncation_window()
        reach = 30.0 / min(seq.kappas)
        dom = (min(lo, -15.0) - reach, max(hi, 15.0) + reach)
        n = int(min(4e5, max(4000, (dom[1] - dom[0]) / 0.0075)))
        fd = oracles.fd_eigensolver(p, dom, n, richardson=True)["eigenvalues"]
        ours = -np.array(seq.kappas) ** 2
        if len(fd) != len(ours):
            out["spectrum.fd_agreement"] = _rec(False, len(ours), len(fd), "eigenvalue count differs")
        else:
            d = float(np.max(np.abs(np.sort(ours) - np.sort(fd)) / np.maximum(1.0, np.abs(fd))))
            out["spectrum.fd_agreement"] = _rec(d <= 1e-4, d, 1e-4)
        if np.all(p(np.linspace(lo, hi, 2001)) <= 0):
            shallow = spectrum.find_bound_states(p.scaled(0.9))
            s1 = shallow.padded(len(seq))[: len(seq)]
            ok = bool(np.all(s1 <= np.array(seq.kappas) + 1e-9))
            out["spectrum.monotone_in_depth"] = _rec(ok)
    return out


def _trace_checks(p, seq):
    out = {}
    rep = trace.trace_formula(p, bound_states=seq)
    lim = 1e-3 * (1 + p.l1_norm)
    out["trace.residual"] = _rec(abs(rep.residual) <= lim, abs(rep.residual), lim)
    d = abs(rep.h_integral - rep.h_integral_via_r)
    lim = 1e-6 * max(abs(rep.h_integral), 1e-3)
    out["trace.h_two_ways"] = _rec(d <= lim, d, lim)
    out["trace.h_l1_bound"] = _rec(math.pi * rep.h_integral <= rep.h_l1_bound + 1e-8,
                                   math.pi * rep.h_integral, rep.h_l1_bound)
    out["trace.h_integral_nonnegative"] = _rec(rep.h_integral >= -1e-9, rep.h_integral, -1e-9)
    reflectionless = p.kind == "analytic" and p.name in ("soliton", "multisoliton", "zero")
    lim = 1e-6 if reflectionless else 1e-3
    out["trace.poisson_schwarz"] = _rec(rep.poisson_schwarz_defect <= lim, rep.poisson_schwarz_defect, lim)
    ok = rep.tail_correction <= 0.01 * abs(rep.h_integral) + 1e-9 or "widen_grid" in rep.flags
    out["trace.tail_fraction"] = _rec(ok, rep.tail_correction, 0.01 * abs(rep.h_integral) + 1e-9)
    return out


def _blaschke_checks(seed=0):
    rng = np.random.default_rng(seed)
    out = {}
    worst_mod, worst_lip, worst_mul = 0.0, 0.0, 0.0
    for _ in range(200):
        s1 = rng.uniform(-1, 1, 20) + 1j * rng.uniform(0, 1, 20)
        s2 = rng.uniform(-1, 1, 20) + 1j * rng.uniform(0, 1, 20)
        z = rng.uniform(-3, 3) + 1j * rng.uniform(0.1, 10)
        worst_mod = max(worst_mod, abs(blaschke.blaschke_eval(s1, z)))
        lhs, rhs = blaschke.blaschke_lipschitz_check(s1, s2, z)
        worst_lip = max(worst_lip, lhs - rhs)
        both = blaschke.blaschke_eval(np.concatenate([s1, s2]), z)
        prod = blaschke.blaschke_eval(s1, z) * blaschke.blaschke_eval(s2, z)
        worst_mul = max(worst_mul, abs(both - prod))
    out["blaschke.modulus"] = _rec(worst_mod <= 1 + 1e-12, worst_mod, 1.0)
    out["blaschke.lipschitz"] = _rec(worst_lip <= 0, worst_lip, 0.0)
    out["blaschke.multiplicative"] = _rec(worst_mul <= 1e-12, worst_mul, 1e-12)
    return out


# invariants each group establishes; a crash fails all of them
CHECK_IDS = {
    "potential": ("reflect_l1", "reflect_eval", "window_tail"),
    "jost": ("sup_bound", "deviation_bound", "stability", "neumann_agreement",
             "cauchy_mean_value", "volterra_residual"),
    "scattering": ("unitarity", "conjugate_symmetry", "h_two_ways", "h_nonnegative",
                   "reflection_below_one", "wronskian", "left_right"),
    "spectrum": ("lieb_thirring", "zero_certificate", "fd_agreement"),
    "trace": ("residual", "h_two_ways", "h_l1_bound", "h_integral_nonnegative",
              "poisson_schwarz", "tail_fraction"),
    "blaschke": ("modulus", "lipschitz", "multiplicative"),
}


def _crashed(group, exc):
    detail = f"did not complete: {type(exc).__name__}: {exc}"
    return {f"{group}.{c}": _rec(False, detail=detail) for c in CHECK_IDS[group]}


def _guard(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # noqa: BLE001 - any crash is a failed check
        return _crashed(fn.__name__.strip("_").replace("_checks", ""), exc)


def _bound_states(p):
    return spectrum.find_bound_states(p)


def run_battery(specs=DEFAULT_BATTERY, mutate=None, progress=None):
    """Run every check on every potential; returns the pass/fail matrix."""
    results, warnings = {}, []
    specs = list(specs)
    if not specs:
        warnings.append("empty battery: no checks were run")
    with mutation(mutate):
        for spec in specs:
            p = battery_potential(spec)
            rec = {}
            for fn in (_potential_checks, _jost_checks, _scattering_checks):
                rec.update(_guard(fn, p))
            try:
                seq = _bound_states(p)
            except Exception as exc:  # noqa: BLE001
                rec.update(_crashed("spectrum", exc))
                rec.update(_crashed("trace", exc))
            else:
                rec.update(_guard(_spectrum_checks, p, seq))
                rec.update(_guard(_trace_checks, p, seq))
            results[spec] = rec
            if progress:
                progress(spec, rec)
        if specs:
            results["blaschke"] = _guard(_blaschke_checks)
    failing = [f"{k}::{c}" for k, rec in results.items() for c, r in rec.items() if not r["pass"]]
    n = sum(len(r) for r in results.values())
    return {"battery": specs, "mutation": mutate, "results": results, "failing": failing,
            "n_checks": n, "passed": not failing, "warnings": warnings}
