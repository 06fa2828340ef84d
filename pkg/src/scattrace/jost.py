"""
Right and left Jost solutions via the reduced function m(x, lam) = exp(-i lam x) e(x, lam).

m solves m'' + 2 i lam m' = q m with m -> 1, m' -> 0 at +infinity, equivalently
the Volterra equation  m(x) = 1 + int_x^inf D(t - x, lam) q(t) m(t) dt.

The production path integrates the ODE backwards from the right end of the
truncation window with a fourth-order Magnus (commutator-free exponential)
step whose propagator is written in terms of `kernel_D` at a shifted
wavenumber, so the kernel is the one primitive all solves rest on.  Step
size is controlled by step doubling; boundary values are Richardson
extrapolated.  `neumann_series` is an independent oracle built on iterated
trapezoid quadrature of the Volterra operator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, signal

from .potential import DEFAULT_EPS_TAIL, Potential

LAMBDA_FLOOR = 1e-4
SERIES_SWITCH = 1e-6
DEFAULT_TOL_ANALYTIC = 1e-10
DEFAULT_TOL_SAMPLED = 1e-8
DEFAULT_N_OUT = 2048

_BASE_STEP = 0.025
_MAX_LEVELS = 9
_GAUSS = math.sqrt(3.0) / 6.0
_COMM = math.sqrt(3.0) / 12.0


class JostConvergenceError(RuntimeError):
    """Step doubling did not reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message}: achieved error estimate {achieved:.3e}")
        self.achieved = achieved


@dataclass(frozen=True)
class SpectralParam:
    """A point of the closed upper half-plane away from the origin."""

    value: complex

    def __post_init__(self):
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError("spectral parameter must be finite")
        if v.imag < 0:
            raise ValueError(f"spectral parameter {v} lies in the lower half-plane")
        if abs(v) < LAMBDA_FLOOR:
            raise ValueError(f"|lambda| = {abs(v):.3g} is below the floor {LAMBDA_FLOOR}")
        object.__setattr__(self, "value", v)

    @property
    def modulus(self):
        return abs(self.value)

    def __complex__(self):
        return self.value


def as_lambdas(lams):
    """Validate one or many spectral parameters; returns a complex 1-D array."""
    arr = np.atleast_1d(np.asarray(
        [complex(l) for l in np.ravel(np.asarray(lams, dtype=object))], dtype=complex))
    bad = (arr.imag < 0) | (np.abs(arr) < LAMBDA_FLOOR) | ~np.isfinite(arr)
    if np.any(bad):
        SpectralParam(arr[bad][0])  # raises with a precise message
    return arr


def default_tol(p):
    return DEFAULT_TOL_SAMPLED if p.kind == "sampled" else DEFAULT_TOL_ANALYTIC


def kernel_D(y, lam):
    """D(y, lam) = (exp(2 i lam y) - 1) / (2 i lam) for y > 0, zero otherwise.

    A short series replaces the quotient when |2 lam y| < 1e-6.
    """
    y = np.asarray(y, float)
    lam = np.asarray(lam, complex)
    z = 2j * lam * y
    small = np.abs(z) < SERIES_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.expm1(z) / (2j * lam)
    if np.any(small):
        ly = lam * y
        out = np.where(small, y * (1 + 1j * ly - (2.0 / 3.0) * ly * ly), out)
    return np.where(y > 0, out, 0.0)


# ---------------------------------------------------------------------------
# step grid and propagation


def _panel_counts(p, lo, hi, h):
    inner = set(p.breakpoints(lo, hi))
    if p.step_scale(1e3) != p.step_scale(0.0):
        # graded potentials: geometric sub-panels so the step can grow with |x|
        r = 1.0
        while r < max(-lo, hi):
            inner.update(x for x in (-r, r) if lo < x < hi)
            r *= 2
    edges = [lo] + sorted(inner) + [hi]
    counts = []
    for a, b in zip(edges[:-1], edges[1:]):
        s = min(p.step_scale(a), p.step_scale(b))
        counts.append(max(1, math.ceil((b - a) / (h * s))))
    return np.array(edges), np.array(counts)


def _nodes(edges, counts, level):
    """Descending step nodes, every panel split into counts * 2**level steps."""
    parts = []
    for a, b, n in zip(edges[:-1], edges[1:], counts):
        parts.append(np.linspace(a, b, n * 2 ** level + 1)[:-1])
    xs = np.concatenate(parts + [[edges[-1]]])
    return xs[::-1].copy()


def _step_data(p, nodes):
    x0 = nodes[:-1]
    ys = nodes[:-1] - nodes[1:]
    q1 = p(x0 - (0.5 - _GAUSS) * ys)
    q2 = p(x0 - (0.5 + _GAUSS) * ys)
    return ys, 0.5 * (q1 + q2), _COMM * ys * ys * (q1 - q2)


def _step(m, mp, y, qb, d, lams):
    """One Magnus step of length y leftwards; all arguments broadcast."""
    mu = np.sqrt(lams * lams - (qb + (d / y) ** 2))
    mu = np.where(mu.imag < 0, -mu, mu)
    D = kernel_D(y, mu)
    c = 1 + 1j * mu * D
    sd = D * (d / y)
    ild = 1j * lams * D
    phi = np.exp(1j * (lams - mu) * y)
    return (phi * ((c + sd - ild) * m - D * mp),
            phi * ((-qb * D - 2j * lams * sd) * m + (c - sd + ild) * mp))


def _propagate(ys, qbar, dco, lams, record=False):
    """Carry (m, m') from the right end leftwards through all steps."""
    m = np.ones_like(lams)
    mp = np.zeros_like(lams)
    if record:
        M = np.empty((len(ys) + 1, len(lams)), complex)
        MP = np.empty_like(M)
        M[0], MP[0] = m, mp
    for j in range(len(ys)):
        m, mp = _step(m, mp, ys[j], qbar[j], dco[j], lams)
        if record:
            M[j + 1], MP[j + 1] = m, mp
    if record:
        return M, MP
    return m, mp


def _dense(p, xn, M, MP, x, lams):
    """State at points x (inside the node range) by one partial step from the
    nearest node to the right; xn ascending, M and MP shaped (len(xn), n_lam)."""
    j = np.clip(np.searchsorted(xn, x, side="left"), 0, len(xn) - 1)
    x0 = xn[j]
    y = x0 - x
    q1 = p(x0 - (0.5 - _GAUSS) * y)
    q2 = p(x0 - (0.5 + _GAUSS) * y)
    qb = 0.5 * (q1 + q2)
    dc = _COMM * y * y * (q1 - q2)
    m, mp = M[j], MP[j]
    safe = np.where(y > 0, y, 1.0)[:, None]
    sm, smp = _step(m, mp, safe, qb[:, None], dc[:, None], lams[None, :])
    take = (y > 0)[:, None]
    return np.where(take, sm, m), np.where(take, smp, mp)


def _prepare(p, eps_tail):
    window = p.truncation_window(eps_tail)
    pw = p.windowed(eps_tail)
    return pw, window


def boundary_state(p, lams, tol=None, eps_tail=DEFAULT_EPS_TAIL, base_step=_BASE_STEP, strict=True):
    """(m, m') at the left end of the truncation window for every lam.

    Returns ``(m, mp, x_minus, err)``; values are Richardson extrapolated from
    the last two step-doubling levels and `err` is the per-lam estimate of the
    unextrapolated error in (m, m'/max(1, |lam|)) relative to max(1, |m|).
    Quantities like a = m + m'/(2 i lam) inherit a 1/|lam| conditioning.
    With ``strict=False`` unconverged values are returned with their error
    estimate instead of raising.
    """
    lams = as_lambdas(lams)
    tol = default_tol(p) if tol is None else tol
    if not tol > 0:
        raise ValueError("tol must be positive")
    pw, (lo, hi) = _prepare(p, eps_tail)
    n = len(lams)
    if hi <= lo:
        return np.ones(n, complex), np.zeros(n, complex), lo, np.zeros(n)
    edges, counts = _panel_counts(pw, lo, hi, base_step)
    m_out = np.empty(n, complex)
    mp_out = np.empty(n, complex)
    err = np.full(n, np.inf)
    active = np.arange(n)
    prev = None
    for level in range(_MAX_LEVELS):
        ys, qb, dc = _step_data(pw, _nodes(edges, counts, level))
        m, mp = _propagate(ys, qb, dc, lams[active])
        if prev is not None:
            pm, pmp = prev
            lam_scale = np.maximum(1.0, np.abs(lams[active]))
            scale = np.maximum(1.0, np.abs(m))
            e = np.maximum(np.abs(m - pm), np.abs(mp - pmp) / lam_scale) / 15.0 / scale
            err[active] = e
            m_out[active] = m + (m - pm) / 15.0
            mp_out[active] = mp + (mp - pmp) / 15.0
            done = e <= tol
            keep = ~done
            active = active[keep]
            m, mp = m[keep], mp[keep]
            if len(active) == 0:
                return m_out, mp_out, lo, err
        prev = (m, mp)
    if not strict:
        return m_out, mp_out, lo, err
    raise JostConvergenceError(
        f"Jost solve did not converge for {len(active)} spectral value(s)", float(np.max(err[active])))


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class JostField:
    """m(x, lam) and m'(x, lam) sampled on `grid`.

    For ``direction == "right"`` m = exp(-i lam x) e_+(x), tending to 1 at
    +infinity; for ``"left"`` m = exp(i lam x) e_-(x), tending to 1 at
    -infinity.
    """

    direction: str
    lam: complex
    grid: np.ndarray
    m_values: np.ndarray
    m_deriv: np.ndarray
    window: tuple
    error_estimate: float
    sup_norm: float

    @property
    def spectral_param(self):
        return SpectralParam(self.lam)

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "Re(m)", "Im(m)", "Re(m')", "Im(m')"])
            for x, m, d in zip(self.grid, self.m_values, self.m_deriv):
                w.writerow([repr(float(x)), repr(m.real), repr(m.imag), repr(d.real), repr(d.imag)])


def _hermite(xn, mn, dn, x):
    """Cubic Hermite interpolation on ascending nodes (complex values)."""
    i = np.clip(np.searchsorted(xn, x) - 1, 0, len(xn) - 2)
    h = xn[i + 1] - xn[i]
    t = (x - xn[i]) / h
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    val = h00 * mn[i] + h10 * h * dn[i] + h01 * mn[i + 1] + h11 * h * dn[i + 1]
    dh00 = (6 * t2 - 6 * t) / h
    dh10 = 3 * t2 - 4 * t + 1
    dh01 = (-6 * t2 + 6 * t) / h
    dh11 = 3 * t2 - 2 * t
    der = dh00 * mn[i] + dh10 * dn[i] + dh01 * mn[i + 1] + dh11 * dn[i + 1]
    return val, der


def default_grid(window, n_out=DEFAULT_N_OUT):
    lo, hi = window
    margin = max(1.0, 0.1 * (hi - lo))
    return np.linspace(lo - margin, hi + margin, n_out)


def _right_fields(p, lams, tol, eps_tail, grid, n_out, base_step):
    pw, (lo, hi) = _prepare(p, eps_tail)
    n = len(lams)
    if grid is None:
        grid = default_grid((lo, hi), n_out)
    grid = np.asarray(grid, float)
    if hi <= lo:
        ones = np.ones((n, len(grid)), complex)
        return grid, ones, np.zeros_like(ones), (lo, hi), np.zeros(n), np.ones(n)
    edges, counts = _panel_counts(pw, lo, hi, base_step)
    prev = None
    for level in range(_MAX_LEVELS):
        nodes = _nodes(edges, counts, level)
        ys, qb, dc = _step_data(pw, nodes)
        M, MP = _propagate(ys, qb, dc, lams, record=True)
        if prev is not None:
            scale = np.maximum(1.0, np.max(np.abs(M), axis=0))
            dm = np.max(np.abs(M[::2] - prev[0]), axis=0)
            dmp = np.max(np.abs(MP[::2] - prev[1]) / np.maximum(1.0, np.abs(lams)), axis=0)
            err = np.maximum(dm, dmp) / 15.0 / scale
            if np.all(err <= tol):
                break
        prev = (M, MP)
    else:
        raise JostConvergenceError("Jost field solve did not converge", float(np.max(err)))
    xn = nodes[::-1]
    M, MP = M[::-1], MP[::-1]
    inside = (grid >= lo) & (grid <= hi)
    right = grid > hi
    left = grid < lo
    dv, dd = _dense(pw, xn, M, MP, grid[inside], lams)
    M, MP = M.T, MP.T
    sup = np.max(np.abs(M), axis=1)
    mv = np.empty((n, len(grid)), complex)
    md = np.empty_like(mv)
    mv[:, inside], md[:, inside] = dv.T, dd.T
    for k in range(n):
        mv[k, right], md[k, right] = 1.0, 0.0
        if np.any(left):
            # q vanishes left of the window: free propagation
            Dl = kernel_D(lo - grid[left], lams[k])
            mv[k, left] = M[k, 0] - Dl * MP[k, 0]
            md[k, left] = (1 + 2j * lams[k] * Dl) * MP[k, 0]
    sup = np.maximum(sup, np.max(np.abs(mv), axis=1))
    return grid, mv, md, (lo, hi), err, sup


def solve_m(p, lam, tol=None, *, direction="right", grid=None, n_out=DEFAULT_N_OUT,
            eps_tail=DEFAULT_EPS_TAIL, base_step=_BASE_STEP):
    """Solve for m(., lam) on a uniform output grid.

    `lam` may be a single value (returns a JostField) or a sequence (returns a
    list, solved in one vectorised sweep).  The field error estimate is the
    sup-norm step-doubling difference on the solver nodes.
    """
    single = np.ndim(lam) == 0 and not isinstance(lam, (list, tuple))
    lams = as_lambdas(lam)
    tol = default_tol(p) if tol is None else tol
    if not tol > 0:
        raise ValueError("tol must be positive")
    if direction not in ("right", "left"):
        raise ValueError("direction must be 'right' or 'left'")
    if direction == "right":
        g, mv, md, win, err, sup = _right_fields(p, lams, tol, eps_tail, grid, n_out, base_step)
    else:
        rg = None if grid is None else -np.asarray(grid, float)[::-1]
        g, mv, md, win, err, sup = _right_fields(p.reflect(), lams, tol, eps_tail, rg, n_out, base_step)
        g, mv, md = -g[::-1], mv[:, ::-1], -md[:, ::-1]
        win = (-win[1], -win[0])
    fields = [JostField(direction, complex(lams[k]), g, mv[k], md[k], win, float(err[k]), float(sup[k]))
              for k in range(len(lams))]
    return fields[0] if single else fields


def jost_solution(field):
    """Sampled Jost solution and its derivative from a JostField."""
    lam, x = field.lam, field.grid
    if field.direction == "right":
        ph = np.exp(1j * lam * x)
        return ph * field.m_values, ph * (field.m_deriv + 1j * lam * field.m_values)
    ph = np.exp(-1j * lam * x)
    return ph * field.m_values, ph * (field.m_deriv - 1j * lam * field.m_values)


def growth_bounds(p, field):
    """(sup|m|, exp(||q||/|lam|), sup|m - 1|, (||q||/|lam|) exp(||q||/|lam|))."""
    r = p.l1_norm / abs(field.lam)
    with np.errstate(over="ignore"):
        e = math.exp(r) if r < 700 else math.inf
    return (float(np.max(np.abs(field.m_values))), e,
            float(np.max(np.abs(field.m_values - 1))), r * e)


def volterra_residual(p, field, xs, eps_tail=DEFAULT_EPS_TAIL):
    """|m(x) - 1 - int_x^inf D(t-x) q(t) m(t) dt| at the points `xs`.

    Independent check: m is Hermite-interpolated from the field and the
    integral is done cell by cell with 6-point Gauss-Legendre, cells being
    the field grid intervals split at the jump points of q.  The field grid
    should contain those jump points.
    """
    if field.direction != "right":
        raise ValueError("residual is defined for right fields")
    pw = p.windowed(eps_tail)
    lo, hi = field.window
    lam = field.lam
    xn, mn, dn = field.grid, field.m_values, field.m_deriv
    gx, gw = np.polynomial.legendre.leggauss(6)

    out = []
    for x in np.atleast_1d(xs):
        x = float(x)
        mx = _hermite(xn, mn, dn, np.array([x]))[0][0]
        a = max(x, lo)
        if a >= hi:
            out.append(abs(mx - 1))
            continue
        edges = np.union1d(xn[(xn > a) & (xn < hi)], pw.breakpoints(a, hi))
        edges = np.concatenate([[a], edges, [hi]])
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        t = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        mt = _hermite(xn, mn, dn, t)[0]
        kern = np.expm1(2j * lam * (t - x)) / (2j * lam)
        vals = (kern * pw(t) * mt).reshape(len(mid), len(gx))
        integral = np.sum(half * (vals @ gw))
        out.append(abs(mx - 1 - integral))
    return np.array(out)


# ---------------------------------------------------------------------------
# Neumann-series oracle


def _oracle_grid(pw, lo, hi, h, refine):
    edges = [lo] + pw.breakpoints(lo, hi) + [hi]
    return [np.linspace(a, b, refine * max(2, math.ceil((b - a) / h)) + 1)
            for a, b in zip(edges[:-1], edges[1:])]


def _apply_volterra(panels, qs, f, lam):
    """(D_{q,lam} f) at all panel nodes by trapezoid recurrences from the right."""
    out = []
    F = G = 0.0
    for xs, qv, fv in zip(reversed(panels), reversed(qs), reversed(f)):
        g = qv * fv
        dx = xs[1] - xs[0]
        r = np.exp(2j * lam * dx)
        # F_j = r F_{j+1} + dx/2 (g_j + r g_{j+1}),  G_j = G_{j+1} + dx/2 (g_j + g_{j+1})
        uF = 0.5 * dx * (g[:-1] + r * g[1:])
        uG = 0.5 * dx * (g[:-1] + g[1:])
        yF, _ = signal.lfilter([1.0], [1.0, -r], uF[::-1], zi=[r * F])
        yG = np.cumsum(uG[::-1]) + G
        Fp = np.concatenate([yF[::-1], [F]])
        Gp = np.concatenate([yG[::-1], [G]])
        F, G = Fp[0], Gp[0]
        out.append((Fp - Gp) / (2j * lam))
    return out[::-1]


def _neumann_on(pw, lo, hi, lam, n_max, h, refine):
    panels = _oracle_grid(pw, lo, hi, h, refine)
    qs = [pw(xs) for xs in panels]
    f = [np.ones(len(xs), complex) for xs in panels]
    total = [np.ones(len(xs), complex) for xs in panels]
    iterates = []
    for _ in range(n_max):
        f = _apply_volterra(panels, qs, f, lam)
        iterates.append(f)
        total = [t + v for t, v in zip(total, f)]
    return panels, iterates, total


def neumann_series(p, lam, n_max, h=0.01, eps_tail=DEFAULT_EPS_TAIL):
    """Iterated-quadrature oracle for the Neumann series of the Volterra operator.

    Returns ``(x, norms, partial_sum)`` where ``norms[n-1]`` approximates the
    sup norm of D^n m0 and `partial_sum` is sum_{n<=n_max} D^n m0 on `x`;
    both are Richardson extrapolated from step h and h/2.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    lam = complex(SpectralParam(lam).value)
    pw = p.windowed(eps_tail)
    lo, hi = p.truncation_window(eps_tail)
    if hi <= lo:
        return np.array([lo]), np.zeros(n_max), np.ones(1, complex)
    pc, ic, tc = _neumann_on(pw, lo, hi, lam, n_max, h, 1)
    pf, itf, tf = _neumann_on(pw, lo, hi, lam, n_max, h, 2)
    x = np.concatenate([xs[:-1] for xs in pc] + [[hi]])

    def merge(coarse, fine):
        c = np.concatenate([v[:-1] for v in coarse] + [[coarse[-1][-1]]])
        fv = np.concatenate([v[:-1][::2] for v in fine] + [[fine[-1][-1]]])
        return (4 * fv - c) / 3

    norms = np.array([np.max(np.abs(merge(a, b))) for a, b in zip(ic, itf)])
    return x, norms, merge(tc, tf)


def neumann_iterates(p, lam, n_max, h=0.01, eps_tail=DEFAULT_EPS_TAIL):
    """Sup norms of D^n m0, n = 1..n_max (test oracle)."""
    return neumann_series(p, lam, n_max, h, eps_tail)[1]
