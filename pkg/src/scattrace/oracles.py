"""
Reference values computed without the Jost solver.

Closed forms for reflectionless potentials, 2x2 transfer matrices for
piecewise-constant potentials and a finite-difference eigensolver.  Nothing
here imports the production solver modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .potential import Potential, PotentialError

SOURCES = ("closed_form", "transfer_matrix", "finite_difference", "neumann_series")


@dataclass(frozen=True)
class OracleResult:
    """Values from one oracle together with a statement of their accuracy."""

    source: str
    values: dict = field(default_factory=dict)
    accuracy: str = ""

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown oracle source {self.source!r}")

    def __getitem__(self, key):
        return self.values[key]


def soliton_scattering(kappas, lam):
    """a(lam) = prod (lam - i kappa_j) / (lam + i kappa_j), b = 0."""
    ks = np.asarray(kappas, float).ravel()
    if ks.size and (np.any(ks <= 0) or len(set(ks.tolist())) != ks.size):
        raise ValueError("kappas must be distinct and positive")
    lam_arr = np.asarray(lam, complex)
    a = np.ones_like(lam_arr)
    for k in ks:
        a = a * (lam_arr - 1j * k) / (lam_arr + 1j * k)
    if a.ndim == 0:
        a, b = complex(a), 0j
    else:
        b = np.zeros_like(a)
    return OracleResult("closed_form", {"a": a, "b": b, "bound_states": np.sort(ks)[::-1]},
                        "exact up to rounding")


def steps_of(p):
    """Piecewise-constant description [(x0, x1, value), ...] of a square well."""
    if isinstance(p, Potential):
        if p.kind != "analytic" or p.name not in ("square_well", "zero"):
            raise PotentialError("transfer matrices need a piecewise-constant potential")
        if p.name == "zero":
            return []
        lo, hi = p.support
        if hi <= lo:
            return []
        return [(lo, hi, -p.params[0] * p.scale)]
    return [(float(a), float(b), float(v)) for a, b, v in p]


def transfer_matrix_scattering(steps, k):
    """a(k), b(k) for a piecewise-constant potential.

    `steps` is a list of (x0, x1, value) with disjoint intervals, or a
    square-well Potential.  The right Jost solution e^{ikx} is carried
    leftwards through each layer with the exact (cos, sin/K) propagator and
    decomposed on the left as a e^{ikx} + b e^{-ikx}.
    """
    layers = sorted(steps_of(steps))
    ks = np.asarray(k, float)
    if np.any(ks == 0):
        raise ValueError("k must be nonzero")
    kc = ks.astype(complex)
    if not layers:
        one = np.ones_like(kc)
        return OracleResult("transfer_matrix", {"a": one if one.ndim else 1 + 0j,
                                                "b": 0 * one if one.ndim else 0j}, "exact")
    for (_, b0, _), (a1, _, _) in zip(layers[:-1], layers[1:]):
        if a1 < b0:
            raise ValueError("steps overlap")
    # insert zero layers in the gaps
    full = []
    for i, (x0, x1, v) in enumerate(layers):
        if i and x0 > layers[i - 1][1]:
            full.append((layers[i - 1][1], x0, 0.0))
        full.append((x0, x1, v))
    x_right = full[-1][1]
    psi = np.exp(1j * kc * x_right)
    dpsi = 1j * kc * psi
    for x0, x1, v in reversed(full):
        w = x1 - x0
        K2 = kc * kc - v
        K = np.sqrt(K2)
        c = np.cos(K * w)
        s = w * np.sinc(K * w / math.pi)  # sin(Kw)/K, regular at K = 0
        psi, dpsi = psi * c - dpsi * s, K2 * s * psi + dpsi * c
    x_left = full[0][0]
    a = 0.5 * (psi + dpsi / (1j * kc)) * np.exp(-1j * kc * x_left)
    b = 0.5 * (psi - dpsi / (1j * kc)) * np.exp(1j * kc * x_left)
    if a.ndim == 0:
        a, b = complex(a), complex(b)
    return OracleResult("transfer_matrix", {"a": a, "b": b}, "exact up to rounding")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def _cell_average(p, a, b):
    """Average of q over each [a_i, b_i] by 4-point Gauss-Legendre."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    vals = np.asarray(p(mid[:, None] + half[:, None] * _GL_X[None, :]), float)
    return 0.5 * vals @ _GL_W


def _cell_values(p, x, h):
    """q averaged over the cells [x - h/2, x + h/2], split at jump points."""
    a, b = x - 0.5 * h, x + 0.5 * h
    q = _cell_average(p, a, b)
    for c in p.breakpoints(a[0], b[-1]):
        i = int(np.clip(np.searchsorted(b, c), 0, len(x) - 1))
        if a[i] < c < b[i]:
            left = _cell_average(p, np.array([a[i]]), np.array([c]))[0]
            right = _cell_average(p, np.array([c]), np.array([b[i]]))[0]
            q[i] = ((c - a[i]) * left + (b[i] - c) * right) / h
    return q


def _fd_negative(p, lo, hi, n):
    x = np.linspace(lo, hi, n + 2)[1:-1]
    h = (hi - lo) / (n + 1)
    q = _cell_values(p, x, h)
    d = 2.0 / h ** 2 + q
    e = np.full(n - 1, -1.0 / h ** 2)
    lower = min(float(q.min()), 0.0) - 1.0
    if lower >= 0:
        return np.empty(0)
    w = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(lower, 0.0))
    return np.sort(w[w < 0])


def fd_eigensolver(p, domain=(-15.0, 15.0), n_points=4000, richardson=False):
    """Negative eigenvalues of -d^2/dx^2 + q with Dirichlet ends.

    Second-order central differences on `n_points` interior nodes, with q
    replaced by its cell averages so jumps do not spoil the order.  With
    ``richardson=True`` the step is also halved and eigenvalues present on
    both grids are extrapolated as (4 E_fine - E_coarse) / 3.
    """
    if n_points < 200:
        raise ValueError("n_points must be at least 200")
    lo, hi = map(float, domain)
    if not hi > lo:
        raise ValueError("empty domain")
    ev = _fd_negative(p, lo, hi, n_points)
    h = (hi - lo) / (n_points + 1)
    values = {"eigenvalues": ev, "step": h}
    accuracy = f"O(h^2) with h = {h:.3g}, plus exponentially small domain error"
    if richardson:
        fine = _fd_negative(p, lo, hi, 2 * n_points + 1)
        m = min(len(ev), len(fine))
        values["coarse"] = ev
        values["fine"] = fine
        values["eigenvalues"] = (4 * fine[:m] - ev[:m]) / 3
        accuracy = f"O(h^4) after extrapolation from h = {h:.3g}, h/2"
    values["kappas"] = np.sqrt(-values["eigenvalues"])
    return OracleResult("finite_difference", values, accuracy)
