"""Command-line front end.

    bichoquard COMMAND [--config FILE] [--key value ...]

Commands: solve, sweep-c, sweep-beta, fiber, adams, verify, riesz-selftest,
refine.  A config file holds flat ``key = value`` lines with the same keys as
the long flags (dashes or underscores); flags override the file and every
override is recorded in the report provenance.

Exit status: 0 ok, 1 convergence failure, 2 invariant violation, 3 config error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np
from scipy.special import gamma

from . import __version__
from .adams import CSV_COLUMNS, CutoffSpec, adams_norms, mountain_scan
from .errors import BichoquardError, ConfigError, OverflowGuardError
from .functional import FiberMap, ProblemConfig, psi_scan
from .grid import Grid, rescale_mass
from .nonlin import parse_nonlinearity
from .reports import report_envelope, write_csv, write_json, write_snapshot
from .riesz import RieszKernel, convolve, direct_convolve
from .solver import SolveSettings, _sweep_row, initial_guess, refine_check, solve_ground_state, sweep_beta, sweep_mass
from .verify import run_verify

__all__ = ["RunConfig", "parse_config", "main", "run"]

log = logging.getLogger("bichoquard")

COMMANDS = ("solve", "sweep-c", "sweep-beta", "fiber", "adams", "verify", "riesz-selftest", "refine")
VERIFY_GRIDS = ((16, 12.0), (24, 12.0))
EXIT_OK, EXIT_NOT_CONVERGED, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2, 3

@dataclass(frozen=True)
class RunConfig:
    command: str
    mu: float = 2.0
    beta: float = 0.0
    c: float = 1.0
    nl: str = "power:p=4"
    grid: int = 32
    box: float = 16.0
    workers: int = 1
    seed: int = 0
    out: str = "out"
    c_list: tuple = ()
    beta_list: tuple = ()
    n_list: tuple = ()
    s_range: tuple = (-2.0, 1.0, 31)
    t_range: tuple = ()
    tol_grad: float = 1e-8
    tol_p: float = 1e-6
    max_iter: int = 2000
    init: str = "gaussian"
    fields: int = 200

    def settings(self) -> SolveSettings:
        return SolveSettings(max_iterations=self.max_iter, tol_grad=self.tol_grad, tol_p=self.tol_p,
                             init=self.init)

    def problem(self, **changes) -> ProblemConfig:
        vals = {"mu": self.mu, "beta": self.beta, "c": self.c}
        vals.update(changes)
        return ProblemConfig.create(Grid(self.grid, self.box), nl=parse_nonlinearity(self.nl), **vals)

    def as_dict(self) -> dict:
        d = asdict(self)
        for key in ("c_list", "beta_list", "n_list", "s_range", "t_range"):
            d[key] = list(d[key])
        return d


KEYS = {f.name for f in fields(RunConfig)} - {"command"}


def _number(key, text, kind=float):
    try:
        dec = Decimal(text.strip())
    except InvalidOperation:
        raise ConfigError(f"malformed number for {key}: {text!r}", token=text) from None
    if not dec.is_finite():
        raise ConfigError(f"non-finite value for {key}: {text!r}", token=text)
    if kind is int:
        if dec != dec.to_integral_value():
            raise ConfigError(f"{key} must be an integer, got {text!r}", token=text)
        return int(dec)
    return float(dec)


def _list(key, text, kind=float):
    items = [t for t in text.replace(" ", "").split(",") if t]
    if not items:
        raise ConfigError(f"empty list for {key}", token=text)
    return tuple(_number(key, t, kind) for t in items)


def _convert(key, text):
    if key in ("mu", "beta", "c", "box", "tol_grad", "tol_p"):
        return _number(key, text)
    if key in ("grid", "workers", "seed", "max_iter", "fields"):
        return _number(key, text, int)
    if key in ("c_list", "beta_list", "n_list"):
        return _list(key, text)
    if key in ("s_range", "t_range"):
        vals = _list(key, text)
        if len(vals) != 3 or vals[2] != int(vals[2]) or vals[2] < 2 or not vals[0] < vals[1]:
            raise ConfigError(f"{key} must be 'lo,hi,count' with lo < hi and count >= 2, got {text!r}",
                              token=text)
        return (vals[0], vals[1], int(vals[2]))
    return text.strip()


def _validate(cfg: RunConfig) -> None:
    def bad(key, message):
        raise ConfigError(f"{key}: {message}, got {getattr(cfg, key)!r}", token=key)

    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {', '.join(COMMANDS)}",
                          token=cfg.command)
    if not 0 < cfg.mu < 4:
        bad("mu", "mu must lie in (0, 4)")
    if not cfg.beta >= 0:
        bad("beta", "beta must be >= 0")
    if not cfg.c > 0:
        bad("c", "c must be > 0")
    if cfg.grid < 4 or cfg.grid % 2:
        bad("grid", "grid must be an even integer >= 4")
    if not cfg.box > 0:
        bad("box", "box must be > 0")
    if cfg.workers < 1:
        bad("workers", "workers must be >= 1")
    if not (cfg.tol_grad > 0 and cfg.tol_p > 0):
        bad("tol_grad" if not cfg.tol_grad > 0 else "tol_p", "tolerances must be > 0")
    if cfg.max_iter < 0:
        bad("max_iter", "max_iter must be >= 0")
    if cfg.fields < 1:
        bad("fields", "fields must be >= 1")
    if any(x <= 0 for x in cfg.c_list):
        bad("c_list", "masses must be > 0")
    if any(b <= a for a, b in zip(cfg.c_list, cfg.c_list[1:])):
        bad("c_list", "c_list must be strictly increasing")
    if any(x < 0 for x in cfg.beta_list):
        bad("beta_list", "beta values must be >= 0")
    if any(x < 2 for x in cfg.n_list):
        bad("n_list", "entries must be >= 2")
    kind, _, arg = cfg.init.partition(":")
    if kind not in ("gaussian", "adams", "snapshot"):
        bad("init", "init must be gaussian[:width], adams:n or snapshot:path")
    if kind == "gaussian" and arg:
        if not _number("init", arg) > 0:
            bad("init", "the Gaussian width must be > 0")
    if kind == "adams":
        if not _number("init", arg) >= 2:
            bad("init", "adams:n needs n >= 2")
    if kind == "snapshot" and not arg:
        bad("init", "snapshot:path needs a path")
    parse_nonlinearity(cfg.nl)


def _read_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}", token=str(path)) from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}",
                              token=raw.strip())
        key = key.strip().replace("-", "_")
        if key != "command" and key not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}", token=key)
        out[key] = value.strip()
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, token=message)


def _parser(cls=argparse.ArgumentParser) -> argparse.ArgumentParser:
    p = cls(prog="bichoquard", description=__doc__.split("\n\n")[0],
                                allow_abbrev=False)
    p.add_argument("command", nargs="?", help=" | ".join(COMMANDS))
    p.add_argument("--config", help="flat key = value file")
    for key in sorted(KEYS):
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="VALUE")
    p.add_argument("--version", action="version", version=f"bichoquard {__version__}")
    return p


def parse_config(argv, config_file=None):
    """Return (RunConfig, provenance).  Flags override the file; bad input raises ConfigError."""
    ns = _parser(_Parser).parse_args(list(argv))
    config_file = ns.config or config_file
    file_vals = _read_config_file(config_file) if config_file else {}
    flags = {k: v for k, v in vars(ns).items() if k in KEYS and v is not None}
    merged = {k: v for k, v in file_vals.items() if k != "command"}
    merged.update(flags)
    command = ns.command or file_vals.get("command")
    if not command:
        raise ConfigError("no command given", token="command")
    values = {k: _convert(k, v) for k, v in merged.items()}
    cfg = RunConfig(command=command, **values)
    _validate(cfg)
    provenance = {
        "config_file": str(config_file) if config_file else None,
        "from_file": sorted(k for k in file_vals if k != "command"),
        "overridden_by_flags": sorted(k for k in flags if k in file_vals),
        "explicit_keys": sorted(set(merged)),
        "argv": list(argv),
    }
    return cfg, provenance


# command implementations -------------------------------------------------------------

def _solve_report(report) -> dict:
    d = report.to_dict()
    d.pop("seconds", None)
    return d


def cmd_solve(cfg: RunConfig, prov: dict):
    u, rep = solve_ground_state(cfg.problem(), cfg.settings())
    files = [write_snapshot(u, cfg.out, "state.bch4").name]
    status = "ok" if rep.converged else "not_converged"
    return _solve_report(rep), status, files


def _solve_one(args):
    cfg, key, value = args
    problem = cfg.problem(**{key: value})
    _, rep = solve_ground_state(problem, cfg.settings())
    return rep


def _rows_from_reports(key, values, reports):
    return [_sweep_row(key, v, rep) for v, rep in zip(values, reports)]


def _parallel(cfg, key, values):
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_solve_one, [(cfg, key, v) for v in values]))


def cmd_sweep_c(cfg: RunConfig, prov: dict):
    c_list = cfg.c_list or (cfg.c,)
    if cfg.workers > 1 and len(c_list) > 1:
        # independent cold starts; the flags are computed as in the sequential sweep
        rows = _rows_from_reports("c", c_list, _parallel(cfg, "c", c_list))
        for i, row in enumerate(rows):
            row["nonincreasing"] = row["strict_decrease"] = ""
            if i:
                e0, e1 = rows[i - 1]["E"], row["E"]
                row["nonincreasing"] = bool(e1 <= e0 + 1e-6 * abs(e0))
                if rows[i - 1]["lambda_direct"] < 0:
                    row["strict_decrease"] = bool(e1 < e0)
    else:
        rows, _ = sweep_mass(cfg.problem(c=c_list[0]), c_list, cfg.settings())
    path = write_csv(rows, cfg.out, "sweep.csv", header=_csv_header(cfg))
    status = "ok" if all(r["converged"] for r in rows) else "not_converged"
    return {"rows": rows}, status, [path.name]


def cmd_sweep_beta(cfg: RunConfig, prov: dict):
    beta_list = cfg.beta_list or (cfg.beta,)
    if cfg.workers > 1 and len(beta_list) > 1:
        rows = _rows_from_reports("beta", beta_list, _parallel(cfg, "beta", beta_list))
    else:
        rows, _ = sweep_beta(cfg.problem(beta=beta_list[0]), beta_list, cfg.settings())
    path = write_csv(rows, cfg.out, "sweep_beta.csv", header=_csv_header(cfg))
    status = "ok" if all(r["converged"] for r in rows) else "not_converged"
    return {"rows": rows}, status, [path.name]


def cmd_fiber(cfg: RunConfig, prov: dict):
    problem = cfg.problem()
    grid = problem.grid
    if cfg.init == "gaussian":
        u = rescale_mass(grid.random(np.random.default_rng(cfg.seed)), cfg.c)
    else:
        u = initial_guess(problem, cfg.settings())
    lo, hi, count = cfg.s_range
    fm = FiberMap(problem, u)
    s_list = np.linspace(lo, hi, count)
    rows = []
    for s in s_list:
        try:
            rows.append({"s": float(s), "g": fm.value(s), "gprime": fm.derivative(s)})
        except OverflowGuardError as exc:
            log.warning("fiber sample s=%g skipped: %s", s, exc)
    diag = fm.maximize()
    result = diag.to_dict()
    result["psi"] = psi_scan(problem, u, [r["s"] for r in rows])
    path = write_csv(rows, cfg.out, "fiber.csv", ["s", "g", "gprime"], header=_csv_header(cfg))
    return result, "ok", [path.name]


def cmd_adams(cfg: RunConfig, prov: dict):
    n_list = cfg.n_list or (100.0, 1000.0, 10000.0)
    problem = cfg.problem()
    t_grid = None
    if cfg.t_range:
        lo, hi, count = cfg.t_range
        t_grid = np.linspace(lo, hi, count)
    rows, scans = [], []
    for n in n_list:
        prof = adams_norms(n, CutoffSpec())
        scan = mountain_scan(problem, n, t_grid)
        rows.append(scan.row(prof))
        scans.append({"n": n, "t_n": scan.t_n, "gmax": scan.gmax, "bound": scan.bound,
                      "bound_ok": scan.bound_ok, "t_admissible": scan.t_admissible,
                      "sign_changes": scan.sign_changes, "relative_gaps": prof.relative_gaps()})
    path = write_csv(rows, cfg.out, "adams.csv", list(CSV_COLUMNS), header=_csv_header(cfg))
    return {"rows": scans}, "ok", [path.name]


def cmd_verify(cfg: RunConfig, prov: dict):
    nl = parse_nonlinearity(cfg.nl)
    explicit = prov.get("explicit_keys", ())
    if "grid" in explicit or "box" in explicit:
        fine = cfg.grid + cfg.grid // 2 + (cfg.grid // 2) % 2
        grids = ((cfg.grid, cfg.box), (fine, cfg.box))
    else:
        # the random fields are O(1) wide: two modest lattices suffice
        grids = VERIFY_GRIDS
    res = run_verify(cfg.mu, nl.p, count=cfg.fields, seed=cfg.seed, grids=grids)
    files = []
    for k, wit in enumerate(res.pop("witnesses")):
        u = wit.pop("field_data")
        files.append(write_snapshot(u, cfg.out, f"witness_{k}.bch4").name)
        wit["snapshot"] = files[-1]
        res.setdefault("witness_list", []).append(wit)
    status = "violation" if res["violations"] else "ok"
    return res, status, files


def riesz_selftest(mu_list=(1.0, 2.0, 3.0), n_direct=8, n_list=(32, 48), length=16.0, seed=0) -> dict:
    """Fast vs direct convolution on a small grid and the Gaussian origin value."""
    rng = np.random.default_rng(seed)
    direct = []
    for mu in mu_list:
        grid = Grid(n_direct, 8.0)
        kern = RieszKernel(grid, mu)
        g = grid.random(rng, width=1.2)
        fast = convolve(kern, g).data
        ref = direct_convolve(kern, g).data
        direct.append({"mu": mu, "max_rel_error": float(np.max(np.abs(fast - ref)) / np.max(np.abs(ref)))})
    gauss = []
    for mu in mu_list:
        exact = math.pi**2 * gamma((4 - mu) / 2)
        for n in n_list:
            grid = Grid(n, length)
            u = grid.radial(lambda r: np.exp(-r * r))
            val = float(convolve(RieszKernel(grid, mu), u).data[(n // 2,) * 4])
            gauss.append({"mu": mu, "n": n, "value": val, "exact": exact,
                          "rel_error": abs(val - exact) / exact})
    return {"direct": direct, "gaussian_origin": gauss}


def cmd_riesz_selftest(cfg: RunConfig, prov: dict):
    n_list = tuple(int(n) for n in cfg.n_list) or (32, 48)
    res = riesz_selftest(seed=cfg.seed, length=cfg.box, n_list=n_list)
    ok = all(d["max_rel_error"] <= 1e-10 for d in res["direct"])
    ok &= all(g["rel_error"] <= 1e-3 for g in res["gaussian_origin"] if g["n"] == n_list[0])
    return res, "ok" if ok else "violation", []


def cmd_refine(cfg: RunConfig, prov: dict):
    n_list = tuple(int(n) for n in (cfg.n_list or (16, 24, 32)))
    rows = refine_check(cfg.problem(), cfg.settings(), n_list)
    path = write_csv(rows, cfg.out, "refine.csv", header=_csv_header(cfg))
    status = "ok" if all(r["converged"] for r in rows) else "not_converged"
    return {"rows": rows}, status, [path.name]


HANDLERS = {
    "solve": cmd_solve,
    "sweep-c": cmd_sweep_c,
    "sweep-beta": cmd_sweep_beta,
    "fiber": cmd_fiber,
    "adams": cmd_adams,
    "verify": cmd_verify,
    "riesz-selftest": cmd_riesz_selftest,
    "refine": cmd_refine,
}

def _csv_header(cfg: RunConfig) -> dict:
    head = {"bichoquard": __version__}
    for key, value in cfg.as_dict().items():
        head[key] = ",".join(str(v) for v in value) if isinstance(value, list) else value
    return head


def run(cfg: RunConfig, provenance: dict) -> int:
    """Execute one command, write report.json into cfg.out, return the exit status."""
    handler = HANDLERS[cfg.command]
    try:
        results, status, files = handler(cfg, provenance)
    except (OverflowGuardError, BichoquardError) as exc:
        hint = " (try a smaller c or a subcritical alpha0)" if isinstance(exc, OverflowGuardError) else ""
        log.error("%s failed: %s%s", cfg.command, exc, hint)
        results, status, files = {"error": f"{exc}{hint}"}, "error", []
    prov = dict(provenance, files=sorted(files))
    write_json(report_envelope(cfg.command, cfg.as_dict(), results, provenance=prov, status=status),
               cfg.out)
    return {"ok": EXIT_OK, "not_converged": EXIT_NOT_CONVERGED, "violation": EXIT_VIOLATION,
            "error": EXIT_NOT_CONVERGED}[status]


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] in ("-h", "--help"):
        _parser().print_help()
        return EXIT_OK if argv else EXIT_CONFIG
    if argv[0] == "--version":
        print(f"bichoquard {__version__}")
        return EXIT_OK
    try:
        cfg, prov = parse_config(argv)
    except ConfigError as exc:
        print(f"bichoquard: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, prov)
    except OSError as exc:
        print(f"bichoquard: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    raise SystemExit(main())
