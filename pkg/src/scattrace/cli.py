"""
Command-line front end.

    scattrace scatter  --preset soliton:1 --out run/
    scattrace spectrum --potential well.csv --out run/
    scattrace trace    --preset square_well:4,1 --kmax 200 --out run/
    scattrace verify   --out run/

Exit codes: 0 success, 1 failed verification, residual over threshold or a
computation error, 2 unreadable potential file, 64 usage error.  Data files
are byte-stable for a given configuration; timestamps and versions go to
metadata.json.  A failing run leaves error.json in the output directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, jost, spectrum, trace, verify
from .potential import Potential, PotentialError, PotentialFileError
from .scattering import GridSpec, ScatteringError, scattering_on_grid

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_BAD_INPUT = 2
EXIT_USAGE = 64

COMMANDS = ("scatter", "spectrum", "trace", "verify")


class UsageError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on; serialized into metadata.json."""

    command: str
    preset: str | None = None
    potential: str | None = None
    kmin: float = 1e-3
    kmax: float | None = None
    per_decade: int = 200
    n_linear: int = 800
    tol: float | None = None
    kappa_tol: float = 1e-10
    max_residual: float = 1e-3
    out: str = "."
    format: str | None = None
    battery: tuple | None = None
    mutate: str | None = None

    def __post_init__(self):
        for name in ("tol", "kappa_tol", "max_residual"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise UsageError(f"{name} must be positive")
        if not self.kmin >= jost.LAMBDA_FLOOR:
            raise UsageError(f"kmin must be at least {jost.LAMBDA_FLOOR}")
        if self.kmax is not None and not self.kmax > self.kmin:
            raise UsageError("kmax must exceed kmin")
        if self.per_decade < 2 or self.n_linear < 2:
            raise UsageError("grid densities must be at least 2")
        if self.format not in (None, "json", "csv"):
            raise UsageError("format must be json or csv")
        if self.command != "verify":
            if (self.preset is None) == (self.potential is None):
                raise UsageError("give exactly one of --preset or --potential")

    @property
    def grid(self):
        return GridSpec(self.kmin, self.kmax, self.per_decade, self.n_linear)

    def load_potential(self):
        if self.potential is not None:
            return Potential.from_csv(self.potential)
        return Potential.from_spec(self.preset)

    def to_dict(self):
        d = dataclasses.asdict(self)
        if d["battery"] is not None:
            d["battery"] = list(d["battery"])
        return d


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """Plain JSON types; NaN and inf become null, complex becomes [re, im]."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def write_json(path, obj):
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


class _Run:
    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def error(self, kind, message, **extra):
        write_json(self.path("error.json"), {"error": kind, "message": message, **extra})

    def finish(self, code):
        meta = {
            "command": self.cfg.command,
            "config": self.cfg.to_dict(),
            "exit_code": code,
            "files": sorted(self.files),
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "versions": {"scattrace": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
        }
        write_json(self.out / "metadata.json", meta)
        return code


# ---------------------------------------------------------------------------
# commands


def cmd_scatter(cfg, run):
    p = cfg.load_potential()
    sd = scattering_on_grid(p, cfg.grid, cfg.tol)
    if (cfg.format or "csv") == "csv":
        sd.to_csv(run.path("scattering.csv"))
    else:
        recs = [{"k": k, "a": a, "b": b, "abs_r": abs(r), "h": h, "unitarity_defect": d, "valid": v}
                for k, a, b, r, h, d, v in zip(sd.k_grid, sd.a_values, sd.b_values, sd.r_values,
                                               sd.h_values, sd.unitarity_defect, sd.valid)]
        write_json(run.path("scattering.json"), recs)
    summary = dict(sd.summary(), potential=p.label)
    write_json(run.path("summary.json"), summary)
    print(f"{p.label}: {summary['n_points']} points, "
          f"max unitarity defect {summary['max_unitarity_defect']:.3e}")
    return EXIT_OK


def cmd_spectrum(cfg, run):
    p = cfg.load_potential()
    seq = spectrum.find_bound_states(p, cfg.kappa_tol, jost_tol=cfg.tol)
    d = seq.to_dict()
    try:
        d["lieb_thirring"] = spectrum.lieb_thirring_check(p, seq)
    except spectrum.LiebThirringViolation as exc:
        d["lieb_thirring"] = {"violation": str(exc)}
        write_json(run.path("spectrum.json"), d)
        raise
    write_json(run.path("spectrum.json"), d)
    if cfg.format == "csv":
        _write_rows(run.path("kappas.csv"), ["index", "kappa", "energy"],
                    [(i + 1, k, -k * k) for i, k in enumerate(seq.kappas)])
    print(f"{p.label}: {len(seq)} bound state(s) {list(seq.kappas)}")
    for w in seq.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_trace(cfg, run):
    p = cfg.load_potential()
    try:
        rep = trace.trace_formula(p, cfg.grid, cfg.tol, kappa_tol=cfg.kappa_tol)
    except trace.TraceError as exc:
        run.error("TraceError", str(exc), partial=exc.partial.to_dict())
        return EXIT_FAIL
    write_json(run.path("trace.json"), rep.to_dict())
    trace.write_h_csv(rep, run.path("h.csv"))
    rel = rep.relative_residual
    print(f"{p.label}: residual {rep.residual:.3e} (relative {rel:.3e}), "
          f"tail correction {rep.tail_correction:.3e}")
    if rep.flags:
        print(f"flags: {', '.join(rep.flags)}", file=sys.stderr)
    if rel > cfg.max_residual:
        run.error("ResidualExceeded", f"relative residual {rel!r} exceeds {cfg.max_residual!r}",
                  residual=rep.residual, relative_residual=rel)
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(cfg, run):
    specs = verify.DEFAULT_BATTERY if cfg.battery is None else cfg.battery

    def progress(spec, rec):
        bad = sum(not r["pass"] for r in rec.values())
        print(f"  {spec}: {len(rec) - bad}/{len(rec)} passed", file=sys.stderr)

    res = verify.run_battery(specs, mutate=cfg.mutate, progress=progress)
    write_json(run.path("verify.json"), res)
    if cfg.format == "csv":
        rows = [(spec, name, int(r["pass"]), r.get("value"), r.get("limit"))
                for spec, rec in res["results"].items() for name, r in rec.items()]
        _write_rows(run.path("verify.csv"), ["potential", "check", "pass", "value", "limit"], rows)
    for w in res["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{res['n_checks']} checks, {len(res['failing'])} failing")
    for f in res["failing"]:
        print(f"  FAIL {f}")
    if not res["passed"]:
        run.error("VerifyFailed", f"{len(res['failing'])} check(s) failed", failing=res["failing"])
        return EXIT_FAIL
    return EXIT_OK


HANDLERS = {"scatter": cmd_scatter, "spectrum": cmd_spectrum, "trace": cmd_trace, "verify": cmd_verify}


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser():
    common = _Parser(add_help=False)
    g = common.add_argument_group("potential and grid")
    g.add_argument("--preset", metavar="NAME:p1,p2", help="built-in potential, e.g. soliton:1")
    g.add_argument("--potential", metavar="FILE.csv", help="sampled potential with header x,q")
    g.add_argument("--kmin", type=float, help="smallest |k| on the grid (default 1e-3)")
    g.add_argument("--kmax", type=float, help="largest |k| (default max(20, 10 sqrt(||q||_1)))")
    g.add_argument("--per-decade", type=int, dest="per_decade", help="log-grid points per decade")
    g.add_argument("--n-linear", type=int, dest="n_linear", help="points on the linear segment")
    g.add_argument("--tol", type=float, help="Jost solver tolerance")
    g.add_argument("--kappa-tol", type=float, dest="kappa_tol", help="bound-state root tolerance")
    g.add_argument("--max-residual", type=float, dest="max_residual",
                   help="trace: fail when |residual|/(1+||q||_1) exceeds this (default 1e-3)")
    o = common.add_argument_group("output")
    o.add_argument("--out", metavar="DIR", help="output directory (default .)")
    o.add_argument("--format", choices=("json", "csv"))
    o.add_argument("--config", metavar="FILE", help="key = value file; flags override it")

    parser = _Parser(prog="scattrace", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    sub.add_parser("scatter", parents=[common], help="a(k), b(k), r(k), h(k) on a grid")
    sub.add_parser("spectrum", parents=[common], help="bound-state momenta kappa_j")
    sub.add_parser("trace", parents=[common], help="both sides of the first trace formula")
    v = sub.add_parser("verify", parents=[common], help="invariant suite on a battery of potentials")
    v.add_argument("--battery", nargs="*", metavar="SPEC",
                   help="potentials to check (default: built-in battery; empty list runs nothing)")
    v.add_argument("--mutate", choices=verify.MUTATIONS, help=argparse.SUPPRESS)
    return parser


_TYPES = {"kmin": float, "kmax": float, "per_decade": int, "n_linear": int, "tol": float,
          "kappa_tol": float, "max_residual": float, "preset": str, "potential": str,
          "out": str, "format": str}


def read_config_file(path):
    """Flat key = value pairs (TOML-like; '#' comments, optional quotes)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"bad config file {path}: {exc}") from None
    out = {}
    for key, raw in cp["run"].items():
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise UsageError(f"unknown config key {key!r}")
        val = raw.strip().strip("'\"")
        try:
            out[key] = _TYPES[key](val)
        except ValueError:
            raise UsageError(f"bad value for {key}: {raw!r}") from None
    return out


def make_config(args):
    merged = read_config_file(args.config) if args.config else {}
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    battery = getattr(args, "battery", None)
    if battery is not None:
        battery = tuple(battery)
    return RunConfig(command=args.command, battery=battery, mutate=getattr(args, "mutate", None),
                     **merged)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"scattrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    run = _Run(cfg)
    try:
        code = HANDLERS[cfg.command](cfg, run)
    except PotentialFileError as exc:
        run.error("PotentialFileError", str(exc), row=exc.row)
        print(f"scattrace: {exc}", file=sys.stderr)
        code = EXIT_BAD_INPUT
    except PotentialError as exc:
        run.error("PotentialError", str(exc))
        print(f"scattrace: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (ScatteringError, spectrum.BoundStateError, spectrum.LiebThirringViolation,
            ArithmeticError, RuntimeError, ValueError) as exc:
        run.error(type(exc).__name__, str(exc))
        print(f"scattrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_FAIL
    return run.finish(code)


if __name__ == "__main__":
    sys.exit(main())
