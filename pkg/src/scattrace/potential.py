"""
Real integrable potentials on the line.

Two representations are supported: analytic presets (all of them even
functions) and sampled data interpolated piecewise-linearly with zero
extension outside the sample window.  A `Potential` is immutable; the
derived variants (`reflect`, `scaled`, `truncated`) return new objects that
keep the preset metadata so closed-form oracles stay usable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate, optimize, special

PRESETS = ("zero", "soliton", "multisoliton", "square_well", "gaussian", "slow_decay")

_NPARAMS = {"zero": 0, "soliton": 1, "square_well": 2, "gaussian": 2, "slow_decay": 1}

DEFAULT_EPS_TAIL = 1e-10
DEFAULT_MAX_HALF_WIDTH = 400.0


class PotentialError(ValueError):
    pass


class PotentialFileError(PotentialError):
    """Malformed potential CSV; `row` is the 1-based line number of the offending row."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class QuadratureError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved abs. error {achieved:.3e})")
        self.achieved = achieved


def _multisoliton_weights(kappas):
    """Log-weights and exponents of the tau function of an even reflectionless potential."""
    kappas = np.asarray(kappas, float)
    n = len(kappas)
    # norming constants making the potential even
    log_c2 = np.empty(n)
    for j in range(n):
        others = np.delete(kappas, j)
        log_c2[j] = math.log(2 * kappas[j]) + np.sum(
            np.log(np.abs((kappas[j] + others) / (kappas[j] - others))))
    logw, expo = [], []
    for mask in range(1 << n):
        idx = [j for j in range(n) if mask >> j & 1]
        lw = sum(log_c2[j] - math.log(2 * kappas[j]) for j in idx)
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                kj, kl = kappas[idx[a]], kappas[idx[b]]
                lw += 2 * math.log(abs(kj - kl) / (kj + kl))
        logw.append(lw)
        expo.append(sum(kappas[j] for j in idx))
    return np.array(logw), np.array(expo)


@dataclass(frozen=True, eq=False)
class Potential:
    """Real-valued potential q(x).

    Analytic presets are evaluated as ``scale * base(orientation * x)``
    restricted to ``cut``; sampled potentials store abscissas `xs` and
    values `qs` and are zero outside ``[xs[0], xs[-1]]``.
    """

    kind: str
    name: str
    params: tuple = ()
    xs: np.ndarray | None = None
    qs: np.ndarray | None = None
    scale: float = 1.0
    orientation: int = 1
    cut: tuple = (-math.inf, math.inf)
    _ms: tuple | None = field(default=None, repr=False)

    # ---------------------------------------------------------------- builders
    @classmethod
    def preset(cls, name, *params):
        if name not in PRESETS:
            raise PotentialError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        params = tuple(float(p) for p in params)
        if not all(math.isfinite(p) for p in params):
            raise PotentialError("preset parameters must be finite")
        if name == "multisoliton":
            if not params or min(params) <= 0 or len(set(params)) != len(params):
                raise PotentialError("multisoliton needs distinct positive kappas")
            if len(params) > 12:
                raise PotentialError("multisoliton supports at most 12 kappas")
            params = tuple(sorted(params, reverse=True))
            return cls("analytic", name, params, _ms=_multisoliton_weights(params))
        if len(params) != _NPARAMS[name]:
            raise PotentialError(f"preset {name} takes {_NPARAMS[name]} parameter(s), got {len(params)}")
        if name in ("soliton", "slow_decay") and params[0] <= 0:
            raise PotentialError(f"{name} parameter must be positive")
        if name == "square_well" and params[1] <= 0:
            raise PotentialError("square_well width must be positive")
        if name == "gaussian" and params[1] <= 0:
            raise PotentialError("gaussian width must be positive")
        return cls("analytic", name, params)

    @classmethod
    def from_spec(cls, spec):
        """Parse ``NAME`` or ``NAME:p1,p2,...`` (the CLI ``--preset`` syntax)."""
        name, _, rest = spec.partition(":")
        params = [s for s in rest.split(",") if s.strip()] if rest else []
        try:
            values = [float(s) for s in params]
        except ValueError:
            raise PotentialError(f"bad preset parameters in {spec!r}") from None
        return cls.preset(name.strip(), *values)

    @classmethod
    def sampled(cls, xs, qs, name="sampled"):
        xs = np.asarray(xs)
        qs = np.asarray(qs)
        if np.iscomplexobj(qs):
            if np.any(np.imag(qs) != 0):
                raise PotentialError("potential values must be real")
            qs = np.real(qs)
        xs = np.asarray(xs, float)
        qs = np.asarray(qs, float)
        if xs.ndim != 1 or xs.shape != qs.shape or len(xs) < 2:
            raise PotentialError("need matching 1-D arrays with at least two samples")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(qs))):
            raise PotentialError("samples must be finite")
        if np.any(np.diff(xs) <= 0):
            raise PotentialError("abscissas must be strictly increasing")
        xs.setflags(write=False)
        qs.setflags(write=False)
        return cls("sampled", name, (), xs, qs)

    @classmethod
    def from_csv(cls, path):
        """Read a ``x,q`` CSV; raises PotentialFileError naming the bad row."""
        path = Path(path)
        try:
            fh = path.open(newline="")
        except OSError as exc:
            raise PotentialFileError(f"cannot open {path}: {exc.strerror}") from None
        xs, qs = [], []
        with fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["x", "q"]:
                raise PotentialFileError("header must be 'x,q'", row=1)
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 2:
                    raise PotentialFileError(f"expected 2 columns, got {len(row)}", row=lineno)
                try:
                    x, q = float(row[0]), float(row[1])
                except ValueError:
                    raise PotentialFileError(f"non-numeric value {row!r}", row=lineno) from None
                if not (math.isfinite(x) and math.isfinite(q)):
                    raise PotentialFileError("non-finite value", row=lineno)
                if xs and x <= xs[-1]:
                    raise PotentialFileError("x is not strictly increasing", row=lineno)
                xs.append(x)
                qs.append(q)
        if len(xs) < 2:
            raise PotentialFileError("need at least two samples")
        return cls.sampled(xs, qs, name=path.stem)

    def to_csv(self, path):
        if self.kind != "sampled":
            raise PotentialError("only sampled potentials can be written as CSV")
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "q"])
            for x, q in zip(self.xs, self.qs):
                w.writerow([repr(float(x)), repr(float(q))])

    # --------------------------------------------------------------- variants
    def reflect(self):
        """The mirrored potential x -> q(-x)."""
        if self.kind == "sampled":
            return Potential.sampled(-self.xs[::-1], self.qs[::-1], name=self.name)
        lo, hi = self.cut
        return replace(self, orientation=-self.orientation, cut=(-hi, -lo))

    def scaled(self, factor):
        factor = float(factor)
        if self.kind == "sampled":
            return Potential.sampled(self.xs, factor * self.qs, name=self.name)
        return replace(self, scale=self.scale * factor)

    def truncated(self, lo, hi):
        """q restricted to [lo, hi] (zero outside)."""
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise PotentialError("truncation needs lo < hi")
        if self.kind == "sampled":
            keep = (self.xs > lo) & (self.xs < hi)
            xs = np.concatenate([[lo], self.xs[keep], [hi]])
            qs = np.interp(xs, self.xs, self.qs, left=0.0, right=0.0)
            return Potential.sampled(xs, qs, name=self.name)
        clo, chi = self.cut
        return replace(self, cut=(max(lo, clo), min(hi, chi)))

    @property
    def label(self):
        if self.kind == "sampled":
            return f"sampled:{self.name}"
        s = self.name + (":" + ",".join(repr(p) for p in self.params) if self.params else "")
        if self.scale != 1.0:
            s = f"{self.scale!r}*{s}"
        if self.cut != (-math.inf, math.inf):
            s += f"[{self.cut[0]!r},{self.cut[1]!r}]"
        return s

    # ------------------------------------------------------------- evaluation
    def _base(self, u):
        u = np.asarray(u, float)
        name, p = self.name, self.params
        if name == "zero":
            return np.zeros_like(u)
        if name == "soliton":
            k = p[0]
            t = np.exp(-2 * k * np.abs(u))
            return -8 * k * k * t / (1 + t) ** 2
        if name == "square_well":
            v0, width = p
            return np.where(np.abs(u) <= width / 2, -v0, 0.0)
        if name == "gaussian":
            amp, sig = p
            return -amp * np.exp(-0.5 * (u / sig) ** 2)
        if name == "slow_decay":
            s = 2.0 + np.abs(u)
            return -p[0] / (s * np.log(s) ** 2)
        if name == "multisoliton":
            logw, expo = self._ms
            t = logw[:, None] - 2 * expo[:, None] * np.ravel(u)[None, :]
            t -= t.max(axis=0)
            w = np.exp(t)
            w /= w.sum(axis=0)
            mean = (w * expo[:, None]).sum(axis=0)
            var = (w * (expo[:, None] - mean) ** 2).sum(axis=0)
            return (-8.0 * var).reshape(u.shape)
        raise AssertionError(name)

    def __call__(self, x):
        x = np.asarray(x, float)
        if self.kind == "sampled":
            return np.interp(x, self.xs, self.qs, left=0.0, right=0.0)
        lo, hi = self.cut
        val = self.scale * self._base(self.orientation * x)
        if lo > -math.inf or hi < math.inf:
            val = np.where((x >= lo) & (x <= hi), val, 0.0)
        return val

    evaluate = __call__

    # ---------------------------------------------------------------- support
    @property
    def support(self):
        """Closed interval outside which q vanishes identically."""
        if self.kind == "sampled":
            return float(self.xs[0]), float(self.xs[-1])
        if self.name == "zero" or self.scale == 0:
            return 0.0, 0.0
        if self.name == "square_well":
            h = self.params[1] / 2
            return max(-h, self.cut[0]), min(h, self.cut[1])
        return self.cut

    def breakpoints(self, lo, hi):
        """Points in (lo, hi) where q or q' may jump."""
        if self.kind == "sampled":
            pts = list(self.xs)
        else:
            pts = [c for c in self.cut if math.isfinite(c)]
            if self.name == "square_well":
                pts += [-self.params[1] / 2, self.params[1] / 2]
            elif self.name == "slow_decay":
                pts.append(0.0)
        return sorted({float(x) for x in pts if lo < x < hi})

    def step_scale(self, x):
        """Relative local length scale used to grade solver steps."""
        if self.kind == "analytic" and self.name == "slow_decay":
            return (1.0 + 0.5 * abs(x)) ** 0.75
        return 1.0

    # ----------------------------------------------------------------- masses
    def _base_tail(self, X):
        """Integral of |base| over (X, inf) for X >= 0 (bases are even)."""
        name, p = self.name, self.params
        if name == "zero":
            return 0.0
        if name == "soliton":
            k = p[0]
            return 4 * k / (math.exp(min(2 * k * X, 700.0)) + 1.0)
        if name == "square_well":
            return p[0] * max(0.0, p[1] / 2 - X)
        if name == "gaussian":
            amp, sig = p
            return amp * sig * math.sqrt(math.pi / 2) * special.erfc(X / (sig * math.sqrt(2)))
        if name == "slow_decay":
            return p[0] / math.log(2.0 + X)
        if name == "multisoliton":
            f = lambda t: -float(self._base(np.array([t]))[0])
            kmin = self.params[-1]
            total, err = 0.0, 0.0
            a = X
            while True:
                b = a + 4.0 / kmin
                val, e = integrate.quad(f, a, b, limit=200, epsabs=1e-15, epsrel=1e-12)
                total += val
                err += e
                if val < 1e-14 * max(total, 1e-300) or b - X > 200.0 / kmin:
                    break
                a = b
            return total
        raise AssertionError(name)

    def _base_mass(self, a, b):
        """Integral of |base| over (a, b), a <= b, using evenness."""
        if a >= b:
            return 0.0
        T = self._base_tail
        if a >= 0:
            return T(a) - (T(b) if math.isfinite(b) else 0.0)
        if b <= 0:
            return self._base_mass(-b, -a)
        return self._base_mass(0.0, -a) + self._base_mass(0.0, b)

    def mass(self, a, b):
        """Integral of |q| over (a, b)."""
        if a >= b:
            return 0.0
        if self.kind == "sampled":
            return _pl_integral(self.xs, self.qs, a, b, absolute=True)
        lo, hi = self.cut
        a, b = max(a, lo), min(b, hi)
        if a >= b:
            return 0.0
        # orientation is irrelevant because every preset base is even
        return abs(self.scale) * self._base_mass(a, b)

    def tail_masses(self, x_minus, x_plus):
        """(mass left of x_minus, mass right of x_plus)."""
        return self.mass(-math.inf, x_minus), self.mass(x_plus, math.inf)

    @cached_property
    def l1_norm(self):
        """||q||_1 by adaptive quadrature (exact for sampled data)."""
        if self.kind == "sampled":
            return _pl_integral(self.xs, self.qs, -math.inf, math.inf, absolute=True)
        if self.name == "zero" or self.scale == 0:
            return 0.0
        lo, hi = self.cut
        return abs(self.scale) * (self._quad_abs(max(lo, 0.0), hi) + self._quad_abs(max(-hi, 0.0), -lo))

    def _quad_abs(self, a, b):
        if a >= b:
            return 0.0
        f = lambda t: abs(float(self._base(np.array([t]))[0]))
        if self.name == "slow_decay":
            # u = log(2 + x) turns the slowly decaying tail into c/u^2
            c = self.params[0]
            g = lambda u: c / (u * u)
            ua = math.log(2 + a)
            ub = math.log(2 + b) if math.isfinite(b) else math.inf
            val, err = integrate.quad(g, ua, ub, limit=200, epsabs=1e-14, epsrel=1e-12)
        else:
            pts = [x for x in self.breakpoints(a, b if math.isfinite(b) else 1e300)]
            if math.isfinite(b):
                val, err = integrate.quad(f, a, b, points=pts or None, limit=500,
                                          epsabs=1e-14, epsrel=1e-12)
            else:
                edges = [a] + pts
                val, err = 0.0, 0.0
                for u, v in zip(edges[:-1], edges[1:]):
                    r, e = integrate.quad(f, u, v, limit=500, epsabs=1e-14, epsrel=1e-12)
                    val, err = val + r, err + e
                r, e = integrate.quad(f, edges[-1], math.inf, limit=500, epsabs=1e-14, epsrel=1e-12)
                val, err = val + r, err + e
        if not err <= 1e-8 * max(1.0, abs(val)):
            raise QuadratureError("L1 norm quadrature did not converge", err)
        return val

    def integral(self, a=-math.inf, b=math.inf):
        """Integral of q over (a, b)."""
        if self.kind == "sampled":
            return _pl_integral(self.xs, self.qs, a, b, absolute=False)
        lo, hi = self.cut
        a, b = max(a, lo), min(b, hi)
        if a >= b:
            return 0.0
        if self.name == "zero":
            return 0.0
        # all preset bases are non-positive
        return -self.scale * self._base_mass(a, b)

    # ----------------------------------------------------------------- window
    def truncation_window(self, eps_tail=DEFAULT_EPS_TAIL, max_half_width=DEFAULT_MAX_HALF_WIDTH):
        """(x_minus, x_plus) with less than `eps_tail` of |q| beyond each end.

        Sampled potentials return their sample window.  For tails too heavy
        to cut at `eps_tail` within `max_half_width` the window is capped;
        callers can read the excluded mass from `tail_masses`.
        """
        if not eps_tail > 0:
            raise PotentialError("eps_tail must be positive")
        lo, hi = self.support
        if self.kind == "sampled" or self.name in ("zero", "square_well") or self.scale == 0:
            return lo, hi
        x_plus = self._edge(eps_tail, max_half_width, lo, hi)
        x_minus = -self.reflect()._edge(eps_tail, max_half_width, -hi, -lo)
        if x_minus > x_plus:
            x_minus = x_plus = 0.5 * (x_minus + x_plus)
        return x_minus, x_plus

    def _edge(self, eps, cap, lo, hi):
        right = lambda X: self.mass(X, math.inf)
        start = max(lo, -cap)
        if right(start) < eps:
            return start
        top = min(hi, cap)
        if right(top) >= eps:
            return top
        # aim slightly below eps so the root lands on the safe side
        return optimize.brentq(lambda X: right(X) - 0.999 * eps, start, top, xtol=1e-10, rtol=1e-12)

    def windowed(self, eps_tail=DEFAULT_EPS_TAIL, max_half_width=DEFAULT_MAX_HALF_WIDTH):
        """The potential actually seen by the solvers: q cut to its truncation window."""
        x0, x1 = self.truncation_window(eps_tail, max_half_width)
        if x0 >= x1:
            return Potential.preset("zero")
        if (x0, x1) == self.support:
            return self
        return self.truncated(x0, x1)


def _pl_integral(xs, qs, a, b, absolute):
    """Exact integral of a piecewise-linear interpolant (or its modulus) over (a, b)."""
    a = max(a, xs[0])
    b = min(b, xs[-1])
    if a >= b:
        return 0.0
    inner = (xs > a) & (xs < b)
    x = np.concatenate([[a], xs[inner], [b]])
    y = np.interp(x, xs, qs)
    y0, y1, dx = y[:-1], y[1:], np.diff(x)
    if not absolute:
        return float(np.sum(0.5 * (y0 + y1) * dx))
    same = y0 * y1 >= 0
    out = np.where(same, 0.5 * np.abs(y0 + y1) * dx, 0.0)
    # segments crossing zero split into two triangles
    denom = np.where(same, 1.0, np.abs(y0) + np.abs(y1))
    out = out + np.where(same, 0.0, 0.5 * (y0 * y0 + y1 * y1) / denom * dx)
    return float(np.sum(out))
