"""
Finite Blaschke products B(z) = prod (z - l_n) / (z - conj(l_n)) in the upper half-plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

LOG_SPACE_ABOVE = 64


class ArcQuadratureError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(f"{message}: achieved error estimate {achieved:.3e}")
        self.achieved = achieved


@dataclass(frozen=True, eq=False)
class BlaschkeSeq:
    """Zeros in the closed upper half-plane; zero entries are padding."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lambdas, complex)).ravel()
        if not np.all(np.isfinite(lam)):
            raise ValueError("entries must be finite")
        if np.any(lam.imag < 0):
            raise ValueError("entries must lie in the closed upper half-plane")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_kappas(cls, kappas):
        return cls(1j * np.asarray(kappas, float))

    @property
    def nonzero(self):
        return self.lambdas[self.lambdas != 0]

    @property
    def l1_norm(self):
        return float(np.sum(np.abs(self.lambdas)))

    def __len__(self):
        return self.lambdas.size

    def padded(self, n):
        out = np.zeros(max(n, len(self)), complex)
        out[: len(self)] = self.lambdas
        return out


def _as_seq(seq):
    return seq if isinstance(seq, BlaschkeSeq) else BlaschkeSeq(seq)


def blaschke_eval(seq, z):
    """B(z) for Im z > 0 (scalar or array z)."""
    lam = _as_seq(seq).nonzero
    zz = np.asarray(z, complex)
    if np.any(zz.imag <= 0):
        raise ValueError("z must lie in the open upper half-plane")
    zf = zz.reshape(-1, 1)
    if lam.size > LOG_SPACE_ABOVE:
        with np.errstate(divide="ignore"):
            logs = np.log(zf - lam) - np.log(zf - lam.conj())
        out = np.exp(np.sum(logs, axis=1))
    else:
        out = np.prod((zf - lam) / (zf - lam.conj()), axis=1)
    out = out.reshape(zz.shape)
    return complex(out) if out.ndim == 0 else out


def _neg_log_modulus(lam, z):
    """-log|B(z)| summed factor by factor (no underflow)."""
    return np.sum(np.log(np.abs(z - lam.conj())) - np.log(np.abs(z - lam)))


def blaschke_arc_integral(seq, xi, epsabs=1e-13, epsrel=1e-10, limit=400):
    """xi * int_0^pi log|B(xi e^{it})|^{-1} dt.

    The interval is split at the angles of entries near the arc, where the
    integrand has logarithmic spikes; an entry exactly on the arc moves xi by
    one part in 10^12.
    """
    if not xi > 0:
        raise ValueError("xi must be positive")
    lam = _as_seq(seq).nonzero
    if lam.size == 0:
        return 0.0
    if np.any(np.abs(np.abs(lam) - xi) <= 1e-14 * xi):
        xi = xi * (1 + 1e-12)
    angles = np.angle(lam)
    near = np.abs(np.abs(lam) - xi) < 0.5 * xi
    cuts = sorted({0.0, math.pi} | {float(a) for a in angles[near] if 0 < a < math.pi})
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, e = integrate.quad(lambda t: _neg_log_modulus(lam, xi * np.exp(1j * t)), a, b,
                                epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)[:2]
        total += val
        err += e
    if err > max(1e3 * epsabs, 1e-6 * abs(total)):
        raise ArcQuadratureError("arc integral did not converge", xi * err)
    return xi * total


def blaschke_lipschitz_check(seq1, seq2, z):
    """(|B(z, s1) - B(z, s2)|, 2 ||s1 - s2||_1 / Im z) with index alignment."""
    s1, s2 = _as_seq(seq1), _as_seq(seq2)
    n = max(len(s1), len(s2))
    d = float(np.sum(np.abs(s1.padded(n) - s2.padded(n))))
    z = complex(z)
    lhs = abs(blaschke_eval(s1, z) - blaschke_eval(s2, z))
    return lhs, 2.0 * d / z.imag


def single_factor_arc(lam):
    """int_0^pi log|(e^{it} - conj(lam)) / (e^{it} - lam)| dt for one zero."""
    lam = complex(lam)
    if lam == 0:
        return 0.0
    pts = [math.atan2(lam.imag, lam.real)] if 0 < abs(lam) < 2 else None
    val = integrate.quad(lambda t: _neg_log_modulus(np.array([lam]), np.exp(1j * t)),
                         0.0, math.pi, points=pts, limit=400)[0]
    return val


def estimate_beta(n_radius=60, n_angle=45):
    """Numerical sup over lam in C_+ of the single-factor unit-arc integral.

    Grid search in (log|lam|, arg lam) followed by a bounded polish.  The
    value is a diagnostic constant for the proof bound, not an exact result.
    """
    rs = np.geomspace(1e-3, 1e3, n_radius)
    ths = np.linspace(0.0, math.pi, n_angle + 2)[1:-1]
    best, arg = -math.inf, None
    for r in rs:
        for th in ths:
            v = single_factor_arc(r * np.exp(1j * th))
            if v > best:
                best, arg = v, (math.log(r), th)
    res = optimize.minimize(lambda u: -single_factor_arc(math.exp(u[0]) * np.exp(1j * u[1])),
                            np.array(arg), method="Nelder-Mead",
                            bounds=[(math.log(1e-3), math.log(1e3)), (1e-6, math.pi - 1e-6)],
                            options={"xatol": 1e-6, "fatol": 1e-10})
    return max(best, -float(res.fun))


def arc_bound(seq, xi, beta):
    """(beta + 2 pi) * sum min(xi, 2 |lam_j|)."""
    lam = _as_seq(seq).nonzero
    return (beta + 2 * math.pi) * float(np.sum(np.minimum(xi, 2 * np.abs(lam))))
