"""
Scattering coefficients a, b, the reflection coefficient r and the density h.

Both coefficients are read off the reduced Jost function at the left end x_-
of the truncation window, where q vanishes:

    int q m dt            = -2 i lam (m(x_-) - 1) - m'(x_-)
    int e^{2 i k t} q m dt = -m'(x_-) e^{2 i k x_-}

so a = 1 - (1 / 2 i lam) int q m and b = (1 / 2 i k) int e^{2ikt} q m.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import jost
from .potential import DEFAULT_EPS_TAIL


class ScatteringError(RuntimeError):
    """Too many grid points failed to converge."""


@dataclass(frozen=True)
class GridSpec:
    """Symmetric wavenumber grid: log spaced on [k_min, k_split], linear above.

    ``k_max=None`` picks max(20, 10 sqrt(||q||_1)).
    """

    k_min: float = 1e-3
    k_max: float | None = None
    per_decade: int = 200
    n_linear: int = 800
    k_split: float = 1.0

    def __post_init__(self):
        if not self.k_min >= jost.LAMBDA_FLOOR:
            raise ValueError(f"k_min must be at least {jost.LAMBDA_FLOOR}")
        if self.k_max is not None and not self.k_max > self.k_min:
            raise ValueError("k_max must exceed k_min")
        if self.per_decade < 2 or self.n_linear < 2:
            raise ValueError("grid densities must be at least 2")

    def resolve_kmax(self, p):
        if self.k_max is not None:
            return float(self.k_max)
        return max(20.0, 10.0 * math.sqrt(p.l1_norm))

    def positive(self, p):
        """Increasing positive wavenumbers as (log segment, linear segment)."""
        kmax = self.resolve_kmax(p)
        split = min(max(self.k_split, self.k_min), kmax)
        if split > self.k_min:
            n_log = max(2, int(round(self.per_decade * math.log10(split / self.k_min))) + 1)
            logk = np.geomspace(self.k_min, split, n_log)
        else:
            logk = np.array([self.k_min])
        if kmax > split:
            link = np.linspace(split, kmax, self.n_linear)
        else:
            link = np.array([split])
        return logk, link

    def refined(self, factor=2):
        """Same extent with `factor` times the point density."""
        return GridSpec(self.k_min, self.k_max, self.per_decade * factor,
                        (self.n_linear - 1) * factor + 1, self.k_split)

    def metadata(self, p):
        return {"k_min": self.k_min, "k_max": self.resolve_kmax(p), "per_decade": self.per_decade,
                "n_linear": self.n_linear, "k_split": self.k_split}


@dataclass(frozen=True, eq=False)
class ScatteringData:
    """Per-wavenumber scattering records on a symmetric grid (k != 0)."""

    k_grid: np.ndarray
    a_values: np.ndarray
    b_values: np.ndarray
    r_values: np.ndarray
    h_values: np.ndarray
    h_from_r: np.ndarray
    unitarity_defect: np.ndarray
    valid: np.ndarray
    error_estimate: np.ndarray
    window: tuple
    grid: dict = field(default_factory=dict)

    @property
    def max_defect(self):
        d = self.unitarity_defect[self.valid]
        return float(np.max(np.abs(d))) if d.size else 0.0

    def positive_half(self):
        """Indices of k > 0 in increasing order."""
        return np.nonzero(self.k_grid > 0)[0]

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "Re(a)", "Im(a)", "Re(b)", "Im(b)", "|r|", "h", "unitarity_defect"])
            for k, a, b, r, h, d in zip(self.k_grid, self.a_values, self.b_values,
                                        self.r_values, self.h_values, self.unitarity_defect):
                w.writerow([repr(float(k)), repr(float(a.real)), repr(float(a.imag)),
                            repr(float(b.real)), repr(float(b.imag)), repr(float(abs(r))),
                            repr(float(h)), repr(float(d))])

    def summary(self):
        return {
            "n_points": int(self.k_grid.size),
            "n_invalid": int(np.count_nonzero(~self.valid)),
            "max_unitarity_defect": self.max_defect,
            "max_abs_r": float(np.max(np.abs(self.r_values[self.valid]))) if self.valid.any() else 0.0,
            "max_h": float(np.max(self.h_values[self.valid])) if self.valid.any() else 0.0,
            "window": [float(self.window[0]), float(self.window[1])],
            "grid": dict(self.grid),
        }


def _qm_integral(m, mp, lams):
    return -2j * lams * (m - 1) - mp


def a_from_integral(qm, lams):
    """a = 1 - (1 / 2 i lam) int q m."""
    return 1 - qm / (2j * lams)


def a_from_state(m, mp, lams):
    return a_from_integral(_qm_integral(m, mp, lams), lams)


def _eqm_integral(mp, x_minus, ks):
    return -mp * np.exp(2j * ks * x_minus)


def coeff_a(p, lam, tol=None, eps_tail=DEFAULT_EPS_TAIL):
    """a(lam) = 1 - (1 / 2 i lam) int q m for lam in the closed upper half-plane.

    Scalar in, scalar out; arrays are handled in one vectorised solve.
    """
    scalar = np.ndim(lam) == 0
    lams = jost.as_lambdas(lam)
    m, mp, x0, _ = jost.boundary_state(p, lams, tol, eps_tail)
    a = a_from_state(m, mp, lams)
    return complex(a[0]) if scalar else a


def coeff_b(p, k, tol=None, eps_tail=DEFAULT_EPS_TAIL):
    """b(k) = (1 / 2 i k) int e^{2ikt} q m for real nonzero k."""
    scalar = np.ndim(k) == 0
    ks = np.atleast_1d(np.asarray(k))
    if np.iscomplexobj(ks):
        if np.any(ks.imag != 0):
            raise ValueError("b is defined for real wavenumbers only")
        ks = ks.real
    ks = ks.astype(float)
    if np.any(ks == 0):
        raise ValueError("b is undefined at k = 0")
    lams = jost.as_lambdas(ks)
    m, mp, x0, _ = jost.boundary_state(p, lams, tol, eps_tail)
    b = _eqm_integral(mp, x0, lams) / (2j * lams)
    return complex(b[0]) if scalar else b


def h_from_a(a):
    return 2.0 * np.log(np.abs(a))


def h_from_r(r):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.log1p(-np.abs(r) ** 2)


def scattering_on_grid(p, grid_spec=None, tol=None, eps_tail=DEFAULT_EPS_TAIL, max_invalid=0.01):
    """a, b, r, h and the unitarity defect on a symmetric real grid.

    Points whose solve fails to converge are kept but flagged invalid; more
    than `max_invalid` (a fraction) of them raises ScatteringError.
    """
    gs = grid_spec or GridSpec()
    logk, link = gs.positive(p)
    kpos = np.concatenate([logk, link[1:]]) if link.size > 1 else logk
    ks = np.concatenate([-kpos[::-1], kpos])
    return scattering_at(p, ks, tol, eps_tail, max_invalid, gs.metadata(p))


def scattering_at(p, ks, tol=None, eps_tail=DEFAULT_EPS_TAIL, max_invalid=0.01, grid=None):
    """Scattering records at arbitrary real nonzero wavenumbers."""
    ks = np.asarray(ks, float)
    if np.any(ks == 0):
        raise ValueError("k = 0 is excluded from scattering grids")
    tol = jost.default_tol(p) if tol is None else tol
    lams = jost.as_lambdas(ks)
    m, mp, x0, err = jost.boundary_state(p, lams, tol, eps_tail, strict=False)
    a = a_from_state(m, mp, lams)
    b = _eqm_integral(mp, x0, lams) / (2j * lams)
    valid = np.isfinite(a) & np.isfinite(b) & (err <= tol)
    if np.count_nonzero(~valid) > max_invalid * ks.size:
        raise ScatteringError(
            f"{np.count_nonzero(~valid)} of {ks.size} wavenumbers failed "
            f"(worst error estimate {float(np.max(err)):.3e})")
    r = b / a
    h = h_from_a(a)
    hr = h_from_r(r)
    defect = np.abs(a) ** 2 - np.abs(b) ** 2 - 1.0
    window = p.truncation_window(eps_tail)
    return ScatteringData(ks, a, b, r, h, hr, defect, valid, err, window, dict(grid or {}))


def small_lambda_diagnostic(p, xi_sequence, tol=None, eps_tail=DEFAULT_EPS_TAIL):
    """xi * log+|a(i xi)| for each xi."""
    xis = np.asarray(xi_sequence, float)
    if np.any(xis < jost.LAMBDA_FLOOR):
        raise ValueError(f"xi values must be at least {jost.LAMBDA_FLOOR}")
    a = coeff_a(p, 1j * xis, tol, eps_tail)
    return xis * np.maximum(np.log(np.abs(a)), 0.0)
