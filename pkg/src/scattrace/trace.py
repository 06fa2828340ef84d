"""
First trace formula  -4 sum kappa_j + (1/pi) int h dk = int q dx,
Poisson-Schwarz reconstruction of a(z) and continuity probes for h.

The k-integral is split into three parts on each half-line:

* (0, k_lo): h is fitted as c0 + c1 log k + c2 k, the small-k form of
  2 log|a|, and integrated exactly.  Fits over [k_lo, 10 k_lo] and
  [k_lo, 3 k_lo] must agree; otherwise the grid is extended one decade
  down (not below the lambda floor) and the check repeats.
* [k_lo, k_max]: Simpson's rule in log k on the log segment and in k on
  the linear segment.
* (k_max, inf): h ~ C / k^2 with C the least-squares fit of k^2 h over the
  last decade of the grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate

from . import blaschke, jost, scattering, spectrum
from .potential import DEFAULT_EPS_TAIL
from .scattering import GridSpec

DEFAULT_SAMPLE_Z = (1j, 1 + 1j, 3j)
ORIGIN_RTOL = 0.02
MIN_BS_DISTANCE = 1e-3


class TraceError(RuntimeError):
    """The small-k panel could not be resolved; `partial` holds what was computed."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass
class TraceReport:
    eigen_term: float
    h_integral: float
    q_integral: float
    residual: float
    tail_correction: float
    poisson_schwarz_defect: float
    h_integral_via_r: float = math.nan
    origin_correction: float = 0.0
    tail_uncertainty: float = 0.0
    kappas: list = field(default_factory=list)
    l1_norm: float = 0.0
    h_l1_bound: float = 0.0
    full_line_q_integral: float = math.nan
    excluded_tail_mass: float = 0.0
    max_unitarity_defect: float = 0.0
    poisson_schwarz: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    grid: dict = field(default_factory=dict)
    window: list = field(default_factory=list)
    scattering: object = field(default=None, repr=False, compare=False)

    @property
    def relative_residual(self):
        return abs(self.residual) / (1.0 + self.l1_norm)

    def to_dict(self):
        keep = replace(self, scattering=None)
        d = asdict(keep)
        d.pop("scattering")
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


# ---------------------------------------------------------------------------
# one half-line of samples


@dataclass
class _Side:
    sign: float
    k: np.ndarray        # increasing |k|
    h: np.ndarray        # 2 log|a|
    hr: np.ndarray       # -log(1 - |r|^2)
    k_split: float
    kmax: float
    coef: np.ndarray = None
    coef_r: np.ndarray = None
    origin: float = 0.0
    origin_r: float = 0.0
    origin_spread: float = 0.0
    C: float = 0.0
    C_r: float = 0.0
    C_spread: float = 0.0

    @property
    def k_lo(self):
        return float(self.k[0])

    def _parts(self):
        nlog = int(np.count_nonzero(self.k <= self.k_split * (1 + 1e-12)))
        return slice(0, nlog), slice(max(nlog - 1, 0), None)

    def segment_integral(self, values):
        lg, ln = self._parts()
        total = 0.0
        if lg.stop > 1:
            kl = self.k[lg]
            total += integrate.simpson(values[lg] * kl, x=np.log(kl))
        kn = self.k[ln]
        if kn.size > 1:
            total += integrate.simpson(values[ln], x=kn)
        return float(total)

    @property
    def tail(self):
        return self.C / self.kmax


def _origin_fit(k, h, upto):
    sel = k <= upto * (1 + 1e-12)
    A = np.column_stack([np.ones(np.count_nonzero(sel)), np.log(k[sel]), k[sel]])
    coef, *_ = np.linalg.lstsq(A, h[sel], rcond=None)
    return coef


def _origin_integral(coef, k0):
    c0, c1, c2 = coef
    return k0 * (c0 + c1 * (math.log(k0) - 1.0)) + 0.5 * c2 * k0 * k0


def _tail_fit(k, h, kmax):
    sel = k >= kmax / 10.0 * (1 - 1e-12)
    C = float(np.mean(k[sel] ** 2 * h[sel]))
    half = k >= kmax / math.sqrt(10.0)
    C_half = float(np.mean(k[half] ** 2 * h[half]))
    return C, abs(C - C_half)


def _fit_origin(side):
    lo = side.k_lo
    wide = _origin_fit(side.k, side.h, 10 * lo)
    narrow = _origin_fit(side.k, side.h, 3 * lo)
    Iw, In = _origin_integral(wide, lo), _origin_integral(narrow, lo)
    side.coef, side.origin, side.origin_spread = wide, Iw, abs(Iw - In)
    side.coef_r = _origin_fit(side.k, side.hr, 10 * lo)
    side.origin_r = _origin_integral(side.coef_r, lo)
    return side.origin_spread <= ORIGIN_RTOL * abs(Iw) + 1e-9


def _resolve_origin(p, side, tol, eps_tail, refine=True):
    """Fit the small-k model, extending the grid downwards while fits disagree."""
    while not _fit_origin(side):
        new_lo = side.k_lo / 10.0
        if not refine or new_lo < jost.LAMBDA_FLOOR * (1 - 1e-12):
            return False
        kk = np.geomspace(new_lo, side.k_lo, 51)[:-1]
        sd = scattering.scattering_at(p, side.sign * kk, tol, eps_tail)
        side.k = np.concatenate([kk, side.k])
        side.h = np.concatenate([sd.h_values, side.h])
        side.hr = np.concatenate([sd.h_from_r, side.hr])
    return True


def _sides(sd, kmax):
    split = sd.grid.get("k_split", 1.0)
    out = []
    for sgn in (1.0, -1.0):
        sel = np.sign(sd.k_grid) == sgn
        kk = np.abs(sd.k_grid[sel])
        order = np.argsort(kk)
        s = _Side(sgn, kk[order], sd.h_values[sel][order], sd.h_from_r[sel][order], split, kmax)
        s.C, s.C_spread = _tail_fit(s.k, s.h, kmax)
        s.C_r, _ = _tail_fit(s.k, s.hr, kmax)
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# Cauchy integral of log|a| along the real axis


def _panel_cauchy(k, f, z):
    """int of the piecewise-linear interpolant of f times 1/(k - z), exactly."""
    k0, k1 = k[:-1], k[1:]
    f0 = f[:-1]
    s = np.diff(f) / np.diff(k)
    L = np.log(k1 - z) - np.log(k0 - z)
    return complex(np.sum((f0 + s * (z - k0)) * L + s * (k1 - k0)))


def _origin_cauchy(coef, lo, z, sign, n_max=400):
    """int_0^lo g(u) / (sign u - z) du with g = c0 + c1 log u + c2 u (series in u/z)."""
    c0, c1, c2 = coef
    ratio = lo / abs(z)
    if ratio >= 0.5:
        raise ValueError(f"sample point {z} is too close to the origin panel")
    total = 0j
    w = -1.0 / z
    x = sign / z
    for n in range(n_max):
        mom = (c0 * lo ** (n + 1) / (n + 1)
               + c1 * lo ** (n + 1) * (math.log(lo) / (n + 1) - 1.0 / (n + 1) ** 2)
               + c2 * lo ** (n + 2) / (n + 2))
        term = w * x ** n * mom
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)) and n > 2:
            break
    return total


def _tail_cauchy(C, K, z, sign):
    """int over |k| > K on one side of C / k^2 / (k - z)."""
    if sign > 0:
        v = -np.log1p(-z / K) / z ** 2 - 1.0 / (z * K)
    else:
        v = np.log1p(z / K) / z ** 2 - 1.0 / (z * K)
    return C * complex(v)


def cauchy_log_modulus(sides, z):
    """int log|a(k)| / (k - z) dk assembled from both half-lines."""
    total = 0j
    for s in sides:
        f = 0.5 * s.h
        if s.sign > 0:
            total += _panel_cauchy(s.k, f, z)
        else:
            total += _panel_cauchy(-s.k[::-1], f[::-1], z)
        total += _origin_cauchy(0.5 * s.coef, s.k_lo, z, s.sign)
        total += _tail_cauchy(0.5 * s.C, s.kmax, z, s.sign)
    return total


def cauchy_piecewise(k, f, z):
    """Exact Cauchy integral of the piecewise-linear interpolant of (k, f)."""
    return _panel_cauchy(np.asarray(k, float), np.asarray(f, float), complex(z))


# ---------------------------------------------------------------------------
# drivers


def _prepare(p, grid_spec, tol, eps_tail, refine_origin=True):
    gs = grid_spec or GridSpec()
    kmax = gs.resolve_kmax(p)
    gs = GridSpec(gs.k_min, kmax, gs.per_decade, gs.n_linear, gs.k_split)
    sd = scattering.scattering_on_grid(p, gs, tol, eps_tail)
    sides = _sides(sd, kmax)
    ok = [_resolve_origin(p, s, tol, eps_tail, refine_origin) for s in sides]
    return gs, sd, sides, all(ok)


def _ps_entries(p, sides, kappas, sample_z, tol, eps_tail):
    out = []
    seq = blaschke.BlaschkeSeq.from_kappas(kappas)
    for z in sample_z:
        z = complex(z)
        if z.imag <= 0:
            raise ValueError("sample points must lie in the upper half-plane")
        if any(abs(z - 1j * k) < MIN_BS_DISTANCE for k in kappas):
            out.append({"z": [z.real, z.imag], "skipped": True})
            continue
        direct = scattering.coeff_a(p, z, tol, eps_tail)
        ci = cauchy_log_modulus(sides, z)
        recon = blaschke.blaschke_eval(seq, z) * np.exp(ci / (math.pi * 1j))
        recon = complex(recon)
        out.append({"z": [z.real, z.imag], "direct": [direct.real, direct.imag],
                    "reconstructed": [recon.real, recon.imag], "defect": float(abs(direct - recon)),
                    "skipped": False})
    return out


def poisson_schwarz_check(p, sample_z=DEFAULT_SAMPLE_Z, grid_spec=None, tol=None,
                          eps_tail=DEFAULT_EPS_TAIL, bound_states=None):
    """Per-z |a(z) - B(z) exp((1/pi i) int log|a(k)| / (k - z) dk)|."""
    _, _, sides, _ = _prepare(p, grid_spec, tol, eps_tail)
    if bound_states is None:
        bound_states = spectrum.find_bound_states(p, eps_tail=eps_tail)
    entries = _ps_entries(p, sides, list(bound_states.kappas), sample_z, tol, eps_tail)
    return np.array([e["defect"] if not e["skipped"] else math.nan for e in entries])


def trace_formula(p, grid_spec=None, tol=None, *, sample_z=DEFAULT_SAMPLE_Z, kappa_tol=1e-10,
                  eps_tail=DEFAULT_EPS_TAIL, bound_states=None):
    """Both sides of the first trace formula with diagnostics."""
    gs, sd, sides, origin_ok = _prepare(p, grid_spec, tol, eps_tail)
    if bound_states is None:
        bound_states = spectrum.find_bound_states(p, kappa_tol, eps_tail=eps_tail)
    kappas = list(bound_states.kappas)
    eigen_term = -4.0 * math.fsum(kappas)

    seg = sum(s.segment_integral(s.h) for s in sides)
    seg_r = sum(s.segment_integral(s.hr) for s in sides)
    origin = sum(s.origin for s in sides)
    origin_r = sum(s.origin_r for s in sides)
    tail = sum(s.tail for s in sides)
    tail_r = sum(s.C_r / s.kmax for s in sides)
    h_int = (seg + origin + tail) / math.pi
    h_int_r = (seg_r + origin_r + tail_r) / math.pi
    tail_corr = tail / math.pi
    tail_unc = sum(s.C_spread / s.kmax for s in sides) / math.pi

    window = p.truncation_window(eps_tail)
    pw = p.windowed(eps_tail)
    q_int = pw.integral()
    l1 = p.l1_norm
    excluded = float(sum(p.tail_masses(*window))) if window[1] > window[0] else 0.0
    full = p.integral()

    flags = []
    if tail_corr > max(0.01 * abs(h_int), 1e-9):
        flags.append("widen_grid")
    if tail_unc > max(0.1 * abs(tail_corr), 1e-9):
        flags.append("tail_correction_uncertain")
    if excluded > 10 * eps_tail:
        flags.append("x_window_capped")
    if math.pi * h_int > 3 * math.pi * l1 + 1e-8:
        flags.append("h_l1_bound_exceeded")
    if bound_states.warnings:
        flags.append("bound_state_warnings")

    report = TraceReport(
        eigen_term=eigen_term, h_integral=float(h_int), q_integral=float(q_int),
        residual=float(eigen_term + h_int - q_int), tail_correction=float(tail_corr),
        poisson_schwarz_defect=math.nan, h_integral_via_r=float(h_int_r),
        origin_correction=float(origin / math.pi), tail_uncertainty=float(tail_unc), kappas=kappas,
        l1_norm=l1, h_l1_bound=3 * math.pi * l1, full_line_q_integral=full,
        excluded_tail_mass=excluded, max_unitarity_defect=sd.max_defect,
        flags=flags, grid=dict(gs.metadata(p), k_lo=[s.k_lo for s in sides]),
        window=[float(window[0]), float(window[1])])
    if not origin_ok:
        report.flags.append("origin_unresolved")
        raise TraceError("small-k panel did not converge down to the lambda floor "
                         f"(fit spread {max(s.origin_spread for s in sides):.3e})", report)

    entries = _ps_entries(p, sides, kappas, sample_z, tol, eps_tail)
    report.poisson_schwarz = entries
    defects = [e["defect"] for e in entries if not e["skipped"]]
    report.poisson_schwarz_defect = float(max(defects)) if defects else 0.0
    if any(e["skipped"] for e in entries):
        report.flags.append("poisson_schwarz_point_skipped")
    report.scattering = sd
    return report


def write_h_csv(report_or_data, path):
    """(k, h) rows in increasing k, for plotting."""
    sd = getattr(report_or_data, "scattering", None) or report_or_data
    order = np.argsort(sd.k_grid)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "h"])
        for k, h in zip(sd.k_grid[order], sd.h_values[order]):
            w.writerow([repr(float(k)), repr(float(h))])


def _model_gap_l1(c1, c2, lo):
    f = lambda k: abs((c1[0] - c2[0]) + (c1[1] - c2[1]) * math.log(k) + (c1[2] - c2[2]) * k)
    return integrate.quad(f, 0.0, lo, limit=200)[0]


def h_continuity_probe(p, perturbations, grid_spec=None, tol=None, eps_tail=DEFAULT_EPS_TAIL):
    """L1 distances between h(p) and h of each perturbation on a shared grid."""
    gs = grid_spec or GridSpec()
    gs = GridSpec(gs.k_min, gs.resolve_kmax(p), gs.per_decade, gs.n_linear, gs.k_split)
    _, _, base, _ = _prepare(p, gs, tol, eps_tail, refine_origin=False)
    out = []
    for q in perturbations:
        _, _, other, _ = _prepare(q, gs, tol, eps_tail, refine_origin=False)
        d = 0.0
        for s0, s1 in zip(base, other):
            d += s0.segment_integral(np.abs(s0.h - s1.h))
            d += _model_gap_l1(s0.coef, s1.coef, s0.k_lo)
            d += abs(s0.C - s1.C) / s0.kmax
        out.append(d)
    return np.array(out)
