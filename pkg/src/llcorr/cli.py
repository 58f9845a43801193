"""Command-line front end.

Every subcommand reads its parameters from flags and, optionally, from a
JSON file given with --config (flags win). The resolved parameters are
hashed; the hash names the cache entry and is written to the output header
together with library versions, so every output file is self-describing.

Exit codes: 0 success, 2 bad configuration, 1 failure during the run. On
failure a JSON error record is printed to stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from . import __version__

FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved invocation."""
    command: str
    params: dict
    output: str | None = None
    fmt: str = "csv"
    cache: bool = True

    def digest(self) -> str:
        blob = json.dumps({"command": self.command, "params": self.params, "format": self.fmt,
                           "version": __version__}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class Result:
    """Tabular result: column names, rows, plus extra metadata."""
    columns: list[str]
    rows: list[list]
    meta: dict = field(default_factory=dict)
    pairs: tuple = ()          # (name, re column, im column) joined in JSON output


# --------------------------------------------------------------------------
# value parsing
# --------------------------------------------------------------------------

def parse_floats(text: str | float | list) -> list[float]:
    """Comma list "0,0.5,1", linspace "a:b:n", or a single number."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    text = str(text).strip()
    if not text:
        raise ConfigError("empty grid")
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"grid {text!r} is not a:b:n")
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ConfigError(f"grid {text!r} has no points")
            return [float(v) for v in np.linspace(a, b, n)]
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed grid {text!r}") from exc


def _positive(name: str, v):
    if v is None or not v > 0:
        raise ConfigError(f"--{name.replace('_', '-')} must be positive")
    return v


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _density(params: dict):
    from .rootdensity import parse_density
    if not params.get("density"):
        raise ConfigError("missing required option --density")
    try:
        return parse_density(params["density"])
    except (ValueError, FileNotFoundError) as exc:
        raise ConfigError(f"--density: {exc}") from exc


def cmd_bethe_solve(p: dict) -> Result:
    from .bethe import BetheNumbers, ModelParams, gaudin_det, energy_momentum, solve_bethe
    if p.get("numbers") is not None:
        nums = BetheNumbers.from_values(parse_floats(p["numbers"]))
    elif p.get("N") is not None:
        nums = BetheNumbers.ground_state(int(p["N"]))
    else:
        raise ConfigError("give --numbers or --N")
    st = solve_bethe(ModelParams(p["L"], p["c"], len(nums)), nums)
    E, P = energy_momentum(st)
    meta = {"residual": st.residual, "energy": E, "momentum": P, "gaudin_det": gaudin_det(st),
            "record": st.to_record()}
    rows = [[j, v / 2, r] for j, (v, r) in enumerate(zip(nums.doubled, st.roots))]
    return Result(["j", "number", "root"], rows, meta)


def cmd_ff(p: dict) -> Result:
    from .bethe import BetheNumbers, ModelParams, solve_bethe
    from .formfactor import density_ff, field_ff
    ket_n = BetheNumbers.from_values(parse_floats(p["ket"]))
    bra_n = BetheNumbers.from_values(parse_floats(p["bra"])) if p.get("bra") not in (None, "") \
        else BetheNumbers(())
    model = ModelParams(p["L"], p["c"], len(ket_n))
    ket = solve_bethe(model, ket_n)
    bra = solve_bethe(model.with_n(len(bra_n)), bra_n) if len(bra_n) else None
    if p["kind"] == "field":
        if bra is None:
            from .bethe import BetheState
            bra = BetheState(model.with_n(0), bra_n, np.zeros(0))
        v = field_ff(bra, ket)
    else:
        v = density_ff(bra, ket)
    return Result(["log_magnitude", "phase", "modulus_sq"],
                  [[v.log_magnitude, v.phase, v.modulus_sq]])


def cmd_pfd_verify(p: dict) -> Result:
    from .pfd import verify_table
    nums = parse_floats(p["numbers"]) if p.get("numbers") else None
    rows = verify_table(N=int(p["N"]), c=p["c"], L=p["L"], numbers=nums, tol=p["tol"])
    cols = ["check", "value", "reference", "error", "tol", "pass"]
    return Result(cols, [[r[k] for k in cols] for r in rows],
                  {"all_pass": all(r["pass"] for r in rows)})


def cmd_chi(p: dict) -> Result:
    from .special import chi
    sign = int(p["sign"])
    if sign not in (1, -1):
        raise ConfigError("--sign must be 1 or -1")
    xs = parse_floats(p["x"])
    vals = chi(sign, np.asarray(xs))
    return Result(["x", "re", "im"], [[x, v.real, v.imag] for x, v in zip(xs, np.atleast_1d(vals))],
                  pairs=(("value", "re", "im"),))


def cmd_lattice_sum(p: dict) -> Result:
    from .special import (LatticeSumParams, lattice_sum1_closed, lattice_sum1_direct,
                          lattice_sum2_closed, lattice_sum2_direct)
    order = int(p["order"])
    if order == 1:
        closed = lattice_sum1_closed(p["alpha"], p["W"])
        direct = lattice_sum1_direct(p["alpha"], p["W"])
    elif order == 2:
        if p.get("L") is None:
            raise ConfigError("missing required option --L")
        lp = LatticeSumParams(p["alpha"], p["w"], p["tau"], p["L"])
        closed, direct = lattice_sum2_closed(lp), lattice_sum2_direct(lp)
    else:
        raise ConfigError("--order must be 1 or 2")
    return Result(["closed_re", "closed_im", "direct_re", "direct_im", "gap"],
                  [[closed.real, closed.imag, direct.real, direct.imag, abs(closed - direct)]],
                  pairs=(("closed", "closed_re", "closed_im"), ("direct", "direct_re", "direct_im")))


def cmd_density(p: dict) -> Result:
    from .rootdensity import hole_density, particle_density
    rho = _density(p)
    hd = hole_density(rho, p["c"], p["tol"])
    lam = parse_floats(p["grid"]) if p.get("grid") else \
        list(np.linspace(-rho.cutoff, rho.cutoff, 41))
    lam_a = np.asarray(lam)
    return Result(["lambda", "rho", "rho_h"],
                  [[l, r, h] for l, r, h in zip(lam, rho(lam_a), hd(lam_a))],
                  {"D": particle_density(rho), "support": list(rho.support),
                   "fingerprint": rho.fingerprint()})


def cmd_correlator(p: dict) -> Result:
    from .correlator import correlator_grid
    rho = _density(p)
    xs, ts = parse_floats(p["x"]), parse_floats(p["t"])
    samples = correlator_grid(rho, p["c"], xs, ts, p["kind"], p["tol"], int(p["workers"]))
    return Result(["x", "t", "re", "im", "err"],
                  [[s.x, s.t, s.value.real, s.value.imag, s.quad_error] for s in samples],
                  {"density_fingerprint": rho.fingerprint()}, (("value", "re", "im"),))


def cmd_spectral(p: dict) -> Result:
    from .correlator import spectral_grid
    rho = _density(p)
    g = spectral_grid(rho, p["c"], parse_floats(p["x"]), parse_floats(p["t"]), p["kind"],
                      p["tol"], p["window"], int(p["workers"]))
    rows = [[float(k), float(w), complex(g.values[i, j]).real, complex(g.values[i, j]).imag]
            for i, w in enumerate(g.omega) for j, k in enumerate(g.k)]
    return Result(["k", "omega", "re", "im"], rows, g.meta, (("value", "re", "im"),))


def cmd_oracle_compare(p: dict) -> Result:
    from .oracle import LehmannConfig, fit_exponent, lowdensity_convergence_study
    from .rootdensity import parse_density
    if not p.get("density"):
        raise ConfigError("missing required option --density")
    shape = parse_density(p["density"])
    if p.get("N") is None and p.get("L") is None:
        raise ConfigError("give --N or --L")
    cfg = LehmannConfig(number_window=p["window"], mu_window=p["mu_window"],
                        taper=p["mu_window"] / 3, workers=int(p["workers"]))
    rows = lowdensity_convergence_study(
        shape, parse_floats(p["D"]), p["c"], p["x"], p["t"],
        N=None if p.get("N") is None else int(p["N"]), L=p.get("L"), kind=p["kind"],
        cfg=cfg, tol=p["tol"])
    cols = ["D", "N", "L", "x", "t", "formula_abs", "oracle_abs", "rel_err", "saturation"]
    recs = [r.to_record() for r in rows]
    if p["kind"] == "density":
        cols += ["rel_err_incl_vs_incl"]
    meta = {}
    if len(rows) > 1:
        meta["fitted_exponent"] = fit_exponent([r.D for r in rows], [r.rel_err for r in rows])
    return Result(cols, [[rec[k] for k in cols] for rec in recs], meta)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

# name -> (handler, {dest: (type, default, required, help)})
_F = float
SPECS: dict[str, tuple[Callable[[dict], Result], dict[str, tuple]]] = {
    "bethe-solve": (cmd_bethe_solve, {
        "L": (_F, None, True, "system length"),
        "c": (_F, None, True, "coupling"),
        "N": (int, None, False, "ground state with N particles"),
        "numbers": (str, None, False, "comma-separated Bethe numbers"),
    }),
    "ff": (cmd_ff, {
        "kind": (str, "field", False, "field or density"),
        "L": (_F, None, True, "system length"),
        "c": (_F, None, True, "coupling"),
        "ket": (str, None, True, "ket Bethe numbers"),
        "bra": (str, None, False, "bra Bethe numbers (empty for the vacuum)"),
    }),
    "pfd-verify": (cmd_pfd_verify, {
        "N": (int, 3, False, "particle number (<= 4)"),
        "L": (_F, 50.0, False, "system length of the test state"),
        "c": (_F, 1.0, False, "coupling"),
        "numbers": (str, None, False, "Bethe numbers of the test state"),
        "tol": (_F, 1e-6, False, "relative tolerance for residues"),
    }),
    "chi": (cmd_chi, {
        "sign": (int, 1, False, "+1 or -1"),
        "x": (str, None, True, "points: list or a:b:n"),
    }),
    "lattice-sum": (cmd_lattice_sum, {
        "order": (int, 2, False, "1 (cotangent sum) or 2 (Gaussian chirp sum)"),
        "alpha": (_F, None, True, "shift alpha"),
        "w": (_F, 0.0, False, "linear phase (order 2)"),
        "tau": (_F, 0.0, False, "quadratic phase (order 2)"),
        "L": (_F, None, False, "system length (order 2)"),
        "W": (_F, math.pi, False, "linear phase in (-pi, pi] (order 1)"),
    }),
    "density": (cmd_density, {
        "density": (str, None, True, "family:<name>,k=v,... or CSV file"),
        "c": (_F, None, True, "coupling"),
        "grid": (str, None, False, "lambda grid"),
        "tol": (_F, 1e-10, False, "quadrature tolerance"),
    }),
    "correlator": (cmd_correlator, {
        "kind": (str, "field", False, "field or density"),
        "density": (str, None, True, "family:<name>,k=v,... or CSV file"),
        "c": (_F, None, True, "coupling"),
        "x": (str, None, True, "x grid"),
        "t": (str, None, True, "t grid"),
        "tol": (_F, 1e-8, False, "quadrature tolerance"),
        "workers": (int, 1, False, "threads"),
    }),
    "spectral": (cmd_spectral, {
        "kind": (str, "field", False, "field or density"),
        "density": (str, None, True, "family:<name>,k=v,... or CSV file"),
        "c": (_F, None, True, "coupling"),
        "x": (str, None, True, "uniform x grid a:b:n"),
        "t": (str, None, True, "uniform t grid a:b:n"),
        "tol": (_F, 1e-8, False, "quadrature tolerance"),
        "window": (str, "hann", False, "hann or none"),
        "workers": (int, 1, False, "threads"),
    }),
    "oracle-compare": (cmd_oracle_compare, {
        "kind": (str, "field", False, "field or density"),
        "density": (str, "family:gaussian,A=1,sigma=2", False, "shape of the root density"),
        "c": (_F, 1.0, False, "coupling"),
        "D": (str, "0.1,0.05,0.025,0.0125", False, "decreasing densities"),
        "N": (int, None, False, "fixed particle number (L = N/D)"),
        "L": (_F, None, False, "fixed length (N = round(D L))"),
        "x": (_F, 0.5, False, "separation"),
        "t": (_F, 0.2, False, "time"),
        "window": (_F, 40.0, False, "Bethe-number window"),
        "mu_window": (_F, 30.0, False, "rapidity window (density)"),
        "tol": (_F, 1e-10, False, "quadrature tolerance"),
        "workers": (int, 1, False, "threads"),
    }),
}

JSON_DEFAULT = {"bethe-solve", "ff", "pfd-verify", "chi", "lattice-sum"}

_CHOICES = {"kind": ("field", "density"), "window": ("hann", "none")}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llcorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"llcorr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, opts) in SPECS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with parameters")
        sp.add_argument("--output", "-o", help="output path (stdout if absent)")
        sp.add_argument("--format", choices=FORMATS, default=None)
        sp.add_argument("--no-cache", action="store_true")
        for dest, (typ, _default, _req, hlp) in opts.items():
            flag = "--" + dest.replace("_", "-")
            kw = {"dest": dest, "type": typ, "default": argparse.SUPPRESS, "help": hlp}
            if dest in _CHOICES and not (name == "oracle-compare" and dest == "window"):
                kw["choices"] = _CHOICES[dest]
            sp.add_argument(flag, **kw)
    return parser


def parse_config(argv: list[str] | None = None) -> RunConfig:
    """Flags override values from --config; unknown file keys are rejected."""
    ns = build_parser().parse_args(argv)
    handler, opts = SPECS[ns.command]
    params: dict[str, Any] = {}
    fmt, output, cache = None, None, True
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data = dict(data)
        if data.pop("command", ns.command) != ns.command:
            raise ConfigError("config file is for a different subcommand")
        fmt, output = data.pop("format", None), data.pop("output", None)
        cache = bool(data.pop("cache", True))
        unknown = sorted(set(data) - set(opts))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in data.items():
            typ = opts[k][0]
            params[k] = v if (v is None or typ is str and isinstance(v, (list, float, int))) \
                else typ(v)
    for dest in opts:
        if dest in vars(ns):
            params[dest] = getattr(ns, dest)
    for dest, (typ, default, required, _) in opts.items():
        if dest not in params:
            if required:
                raise ConfigError(f"missing required option --{dest.replace('_', '-')}")
            params[dest] = default
    for key in ("c", "L", "tol"):
        if key in params and params[key] is not None and key in opts:
            if key != "L" or ns.command != "oracle-compare" or params[key] is not None:
                _positive(key, params[key])
    if "kind" in params and params["kind"] not in _CHOICES["kind"]:
        raise ConfigError("--kind must be field or density")
    fmt = ns.format or fmt or ("json" if ns.command in JSON_DEFAULT else "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"unknown format {fmt!r}")
    return RunConfig(ns.command, params, ns.output or output, fmt, cache and not ns.no_cache)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def header(cfg: RunConfig, res_meta: dict) -> dict:
    """Metadata that makes an output file reproducible."""
    return {"llcorr": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": sys.version.split()[0], "command": cfg.command,
            "params": cfg.params, "config_hash": cfg.digest(), "result": res_meta}


def render(cfg: RunConfig, res: Result) -> str:
    """Deterministic text for a result (no timing information)."""
    meta = _jsonable(header(cfg, res.meta))
    if cfg.fmt == "json":
        data = []
        for row in res.rows:
            rec = dict(zip(res.columns, [_jsonable(v) for v in row]))
            for name, re_col, im_col in res.pairs:
                rec[name] = [rec.pop(re_col), rec.pop(im_col)]
            data.append(rec)
        return json.dumps({"meta": meta, "data": data}, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(res.columns)
    for row in res.rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def cache_dir() -> Path:
    return Path(os.environ.get("LLCORR_CACHE_DIR", Path.home() / ".cache" / "llcorr"))


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute, write the output, and return (exit code, run info)."""
    t0 = time.perf_counter()
    path = cache_dir() / f"{cfg.digest()}.{cfg.fmt}"
    hit = cfg.cache and path.is_file()
    if hit:
        text = path.read_text()
    else:
        handler = SPECS[cfg.command][0]
        text = render(cfg, handler(cfg.params))
        if cfg.cache:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(text)
            tmp.replace(path)
    info = {"cache_hit": hit, "elapsed": time.perf_counter() - t0, "config_hash": cfg.digest()}
    if cfg.output:
        Path(cfg.output).write_text(text)
        Path(cfg.output + ".run.json").write_text(json.dumps(info, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    return 0, info


def _error_record(exc: BaseException, command: str | None) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "command": command})


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(_error_record(exc, None), file=sys.stderr)
        return 2
    try:
        code, info = run(cfg)
        print(json.dumps(info, sort_keys=True), file=sys.stderr)
        return code
    except ConfigError as exc:
        print(_error_record(exc, cfg.command), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  report every failure as a record
        print(_error_record(exc, cfg.command), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
