"""
Bound states as zeros of a(i kappa) on the positive imaginary axis.

For real q the function kappa -> a(i kappa) is real, tends to 1 as kappa grows
and has simple zeros at the bound-state momenta.  A geometric scan brackets
sign changes, Brent's method refines each bracket.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import jost, scattering
from .potential import DEFAULT_EPS_TAIL

DEFAULT_TOL = 1e-10
N_SCAN = 400
NEAR_ZERO = 1e-6


class BoundStateError(RuntimeError):
    """Root search ran out of budget; carries the brackets found so far."""

    def __init__(self, message, brackets):
        super().__init__(f"{message}; brackets so far: {brackets}")
        self.brackets = brackets


class LiebThirringViolation(AssertionError):
    """sum(kappa) exceeded ||q||_1 / 2."""


@dataclass(frozen=True, eq=False)
class BoundStateSeq:
    """kappa_1 > kappa_2 > ... > 0, implicitly padded with zeros."""

    kappas: tuple = ()
    resolution_floor: float = 0.0
    half_l1_norm: float = 0.0
    warnings: tuple = ()
    certificates: tuple = field(default=(), repr=False)

    def __post_init__(self):
        ks = tuple(float(k) for k in self.kappas)
        if any(k <= 0 for k in ks):
            raise ValueError("kappas must be positive")
        if any(a <= b for a, b in zip(ks, ks[1:])):
            raise ValueError("kappas must be strictly decreasing")
        object.__setattr__(self, "kappas", ks)

    def __len__(self):
        return len(self.kappas)

    @property
    def total(self):
        return math.fsum(self.kappas)

    def padded(self, n):
        out = np.zeros(max(n, len(self.kappas)))
        out[: len(self.kappas)] = self.kappas
        return out

    def to_dict(self):
        return {"kappas": list(self.kappas), "sum": self.total, "half_l1_norm": self.half_l1_norm,
                "resolution_floor": self.resolution_floor, "warnings": list(self.warnings)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _a_on_axis(p, kappas, tol, eps_tail):
    lams = 1j * np.asarray(kappas, float)
    m, mp, _, _ = jost.boundary_state(p, lams, tol, eps_tail)
    return scattering.a_from_state(m, mp, lams).real


class _Counter:
    def __init__(self, p, tol, eps_tail, budget):
        self.p, self.tol, self.eps_tail, self.budget, self.used = p, tol, eps_tail, budget, 0
        self.brackets = []

    def __call__(self, kappas):
        kappas = np.atleast_1d(kappas)
        self.used += kappas.size
        if self.used > self.budget:
            raise BoundStateError(f"evaluation budget of {self.budget} exceeded", list(self.brackets))
        return _a_on_axis(self.p, kappas, self.tol, self.eps_tail)

    def scalar(self, kappa):
        return float(self(np.array([kappa]))[0])


def default_floor(p):
    return 1e-6 * max(1.0, p.l1_norm)


def find_bound_states(p, tol=DEFAULT_TOL, *, n_scan=N_SCAN, floor=None, jost_tol=None,
                      eps_tail=DEFAULT_EPS_TAIL, budget=20000, near_zero=NEAR_ZERO):
    """All kappa in (floor, ||q||_1/2 + 0.1] with a(i kappa) = 0.

    Each zero is refined to |error| <= tol and certified by
    |a(i kappa)| <= 10 tol |a'(i kappa)|.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    l1 = p.l1_norm
    floor = default_floor(p) if floor is None else float(floor)
    floor = max(floor, jost.LAMBDA_FLOOR)
    if l1 == 0:
        return BoundStateSeq((), floor, 0.0)
    jtol = min(jost.default_tol(p), 1e-11) if jost_tol is None else jost_tol
    f = _Counter(p, jtol, eps_tail, budget)
    top = 0.5 * l1 + 0.1
    if top <= floor:
        return BoundStateSeq((), floor, 0.5 * l1, ("scan interval is empty",))
    ks = np.geomspace(floor, top, n_scan)
    vals = f(ks)
    warnings = []
    brackets = [(ks[i], ks[i + 1]) for i in range(n_scan - 1) if vals[i] == 0 or vals[i] * vals[i + 1] < 0]
    f.brackets = list(brackets)

    absv = np.abs(vals)
    for i in range(1, n_scan - 1):
        if not (absv[i] < absv[i - 1] and absv[i] < absv[i + 1] and absv[i] < near_zero):
            continue
        if vals[i - 1] * vals[i] <= 0 or vals[i] * vals[i + 1] <= 0:
            continue
        sgn = math.copysign(1.0, vals[i])
        res = optimize.minimize_scalar(lambda k: sgn * f.scalar(k), bounds=(ks[i - 1], ks[i + 1]),
                                       method="bounded", options={"xatol": tol})
        if sgn * res.fun < 0:
            brackets += [(ks[i - 1], res.x), (res.x, ks[i + 1])]
        else:
            warnings.append(f"near-zero minimum of |a(i kappa)| = {abs(res.fun):.3e} "
                            f"at kappa = {res.x:.6g} without a sign change")
    f.brackets = list(brackets)

    roots, certs = [], []
    for lo, hi in brackets:
        k = optimize.brentq(f.scalar, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
        d = max(1e-6 * k, 10 * tol)
        av = f(np.array([k, k - d, k + d]))
        slope = abs(av[2] - av[1]) / (2 * d)
        ok = abs(av[0]) <= 10 * tol * slope
        certs.append({"kappa": k, "a": float(av[0]), "slope": slope, "certified": bool(ok)})
        if not ok:
            warnings.append(f"zero at kappa = {k:.12g} fails the residual certificate "
                            f"(|a| = {abs(av[0]):.3e}, |a'| = {slope:.3e})")
        roots.append(k)
    roots = sorted(set(roots), reverse=True)

    # a(i kappa) ~ alpha / kappa + beta near the floor; a root of the model
    # below the floor hints at a state the scan cannot resolve
    kk, vv = ks[:5], vals[:5]
    A = np.column_stack([1 / kk, np.ones_like(kk)])
    (alpha, beta), *_ = np.linalg.lstsq(A, vv, rcond=None)
    if beta != 0 and 0 < -alpha / beta < floor:
        warnings.append(f"unresolved possible state below the resolution floor "
                        f"(model zero near kappa = {-alpha / beta:.3g})")
    return BoundStateSeq(tuple(roots), floor, 0.5 * l1, tuple(warnings), tuple(certs))


def lieb_thirring_check(p, seq, tol=1e-8):
    """Assert sum(kappa) <= ||q||_1 / 2 + tol and return both sides."""
    s = seq.total
    half = 0.5 * p.l1_norm
    if s > half + tol:
        raise LiebThirringViolation(f"sum of kappas {s!r} exceeds half the L1 norm {half!r}")
    return {"sum_kappa": s, "half_l1": half, "margin": half - s}


def kappa_distance(s1, s2):
    """l1 distance between two zero-padded bound-state sequences."""
    n = max(len(s1), len(s2))
    return float(np.sum(np.abs(s1.padded(n) - s2.padded(n))))


def continuity_probe(p, perturbations, tol=DEFAULT_TOL, **kw):
    """l1 distances between kappa(p) and kappa of each perturbation."""
    base = find_bound_states(p, tol, **kw)
    return np.array([kappa_distance(base, find_bound_states(q, tol, **kw)) for q in perturbations])
