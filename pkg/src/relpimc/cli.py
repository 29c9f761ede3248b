"""Command-line driver: single points, mass and frequency sweeps, oracle solves.

Settings come from built-in defaults, then an optional ``key = value``
config file (``--config``), then command-line flags, each overriding the
previous layer. The effective settings are echoed into every metadata file.

Exit codes: 0 success, 2 usage or config error, 3 oracle not converged,
4 sampler fault.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__, _backend
from .estimators import energies, richardson
from .oracle import (
    GridSpec,
    OracleNotConverged,
    default_grid,
    free_thermal_kinetic,
    nonrel_reference,
    solve_ground_state,
    ultra_rel_reference,
)
from .sampler import Samples, SamplerFault, SimulationConfig, TrotterWarning, run_chains

CSV_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ORACLE = 3
EXIT_SAMPLER = 4

DEFAULTS = {
    "m": 1.0,
    "omega": 1.0,
    "d": 1,
    "beta": None,
    "slices": 50,
    "sweeps": 100000,
    "burn_in": 20000,
    "stride": 10,
    "chains": 2,
    "seed": 0,
    "proposal_width": None,
    "out": None,
    "no_richardson": False,
    "local_only": False,
    "workers": 1,
    "masses": [float(x) for x in np.logspace(-3, 3, 13)],
    "omegas": [float(x) for x in np.logspace(-1, 3, 9)],
    "p_max": None,
    "n_points": 4097,
    "kinetic": "relativistic",
}

_INT_KEYS = {"d", "slices", "sweeps", "burn_in", "stride", "chains", "seed", "workers", "n_points"}
_FLOAT_KEYS = {"m", "omega", "beta", "proposal_width", "p_max"}
_LIST_KEYS = {"masses", "omegas"}
_BOOL_KEYS = {"no_richardson", "local_only"}


class UsageError(ValueError):
    pass


@dataclass
class SweepRow:
    m: float
    omega: float
    d: int
    tau: float
    beta: float
    n_samples: int
    richardson: bool
    t_mean: float
    t_err: float
    t_minus_m: float
    t_minus_m_err: float
    v_mean: float
    v_err: float
    e_total: float
    e_err: float
    e_minus_m: float
    e_minus_m_err: float
    t_minus_2v: float
    t_minus_2v_err: float
    oracle_e0: float
    oracle_t: float
    oracle_v: float
    ultra_rel_ref: float
    nonrel_ref: float
    acceptance_rate: float
    blocking_converged: bool
    kinetic_method: str

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)


def _parse_value(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return None if str(raw).lower() in ("none", "auto", "") else float(raw)
        if key in _LIST_KEYS:
            return [float(x) for x in str(raw).replace(",", " ").split()]
        if key in _BOOL_KEYS:
            val = str(raw).strip().lower()
            if val not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return val in ("1", "true", "yes")
    except ValueError as exc:
        raise UsageError(f"bad value for {key!r}: {raw!r}") from exc
    return raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys may use dashes."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS or key == "config":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def effective_settings(args) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is None or (key in _BOOL_KEYS and value is False):
            continue
        settings[key] = _parse_value(key, value) if key in _LIST_KEYS else value
    return settings


def simulation_config(settings, m, omega) -> SimulationConfig:
    if not m > 0:
        raise UsageError(f"energy estimates need m > 0, got m={m}")
    try:
        return SimulationConfig(
            m=m, omega=omega, d=settings["d"], beta=settings["beta"],
            n_slices=settings["slices"], n_sweeps=settings["sweeps"],
            burn_in_sweeps=settings["burn_in"], measure_stride=settings["stride"],
            seed=settings["seed"], proposal_width=settings["proposal_width"],
            n_chains=settings["chains"], collective_moves=not settings["local_only"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def references(m, omega, d, beta):
    """``(oracle_e0, oracle_t, oracle_v, ultra_rel_ref, nonrel_ref)`` for one point.

    With ``omega = 0`` there is no bound state; the thermal free-particle
    kinetic energy at ``beta`` stands in for the oracle. Only ``d = 1`` has
    an eigensolver reference; other dimensions report NaN there.
    """
    nonrel = m + 0.5 * d * omega
    if omega == 0:
        t_free = free_thermal_kinetic(m, beta) if d == 1 else math.nan
        return t_free, t_free, 0.0, 0.0, nonrel
    ultra = ultra_rel_reference(m, omega).e0 if d == 1 else math.nan
    if d != 1:
        return math.nan, math.nan, math.nan, ultra, nonrel
    result = solve_ground_state(m, omega)
    if not result.converged:
        raise OracleNotConverged(
            f"oracle not converged for m={m}, omega={omega}", result.to_dict())
    return result.e0, result.t_mean, result.v_mean, ultra, nonrel


@dataclass
class PointRun:
    """A finished point: the output row plus the raw samples behind it."""

    row: SweepRow
    estimates: dict
    coarse: Samples
    fine: Samples | None


def simulate_point(m: float, omega: float, settings: dict) -> PointRun:
    """PIMC at one (m, omega), optionally Richardson-combined over tau and tau/2.

    The tau/2 run uses chain indices after those of the tau run, so the two
    are statistically independent.
    """
    cfg = simulation_config(settings, m, omega)
    workers = settings["workers"]
    coarse = run_chains(cfg, workers=workers)
    est = energies(coarse, cfg)
    acceptance = [coarse.mean_acceptance]
    n_samples = len(coarse)
    fine = None
    use_richardson = not settings["no_richardson"]
    if use_richardson:
        fine_cfg = cfg.with_slices(2 * cfg.n_slices)
        fine = run_chains(fine_cfg, workers=workers, first_chain=cfg.n_chains)
        fine_est = energies(fine, fine_cfg)
        est = {k: richardson(est[k], fine_est[k]) for k in est}
        acceptance.append(fine.mean_acceptance)
        n_samples += len(fine)
    oracle_e0, oracle_t, oracle_v, ultra, nonrel = references(m, omega, cfg.d, cfg.beta)
    row = SweepRow(
        m=m, omega=omega, d=cfg.d, tau=cfg.tau, beta=cfg.beta, n_samples=n_samples,
        richardson=use_richardson,
        t_mean=est["t"].mean, t_err=est["t"].stderr,
        t_minus_m=est["t_minus_m"].mean, t_minus_m_err=est["t_minus_m"].stderr,
        v_mean=est["v"].mean, v_err=est["v"].stderr,
        e_total=est["e"].mean, e_err=est["e"].stderr,
        e_minus_m=est["e_minus_m"].mean, e_minus_m_err=est["e_minus_m"].stderr,
        t_minus_2v=est["t_minus_2v"].mean, t_minus_2v_err=est["t_minus_2v"].stderr,
        oracle_e0=oracle_e0, oracle_t=oracle_t, oracle_v=oracle_v,
        ultra_rel_ref=ultra, nonrel_ref=nonrel,
        acceptance_rate=float(np.mean(acceptance)),
        blocking_converged=all(e.blocking_converged for e in est.values()),
        kinetic_method=est["t"].method,
    )
    return PointRun(row, est, coarse, fine)


def run_point(m: float, omega: float, settings: dict) -> SweepRow:
    return simulate_point(m, omega, settings).row


def point_settings(**overrides) -> dict:
    """Built-in defaults with ``overrides`` applied, for library use."""
    settings = dict(DEFAULTS)
    for key, value in overrides.items():
        if key not in DEFAULTS:
            raise UsageError(f"unknown setting {key!r}")
        settings[key] = value
    return settings


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def row_json(row: SweepRow) -> str:
    return json.dumps({k: _json_value(v) for k, v in row.to_dict().items()}, indent=2) + "\n"


def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _csv_line(cells) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(cells)
    return buf.getvalue()


def rows_csv(rows) -> str:
    lines = [_csv_line(SweepRow.header())]
    lines += [_csv_line([_csv_cell(v) for v in row.to_dict().values()]) for row in rows]
    return "".join(lines)


def metadata_path(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + ".meta.json"


def _write_atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _sweep(settings, command, values, make_point):
    """Run the points in order, streaming rows to ``<out>.tmp``.

    The temporary file is renamed to ``out`` once every row succeeded and is
    deleted if any row fails, so a finished CSV is always complete.
    """
    out = settings["out"] or f"{command.replace('-', '_')}.csv"
    tmp = out + ".tmp"
    started = time.time()
    rows = []
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_line(SweepRow.header()))
            for value in values:
                m, omega = make_point(value)
                row = run_point(m, omega, settings)
                fh.write(_csv_line([_csv_cell(v) for v in row.to_dict().values()]))
                fh.flush()
                rows.append(row)
                print(f"{command}: m={m:g} omega={omega:g} done", file=sys.stderr)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    os.replace(tmp, out)
    meta = {
        "command": command,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "code_version": __version__,
        "backend": _backend.BACKEND,
        "settings": settings,
        "seed": settings["seed"],
        "wall_clock_seconds": round(time.time() - started, 3),
        "rows": len(rows),
    }
    _write_atomic(metadata_path(out), json.dumps(meta, indent=2) + "\n")
    return rows


def cmd_run(settings) -> int:
    row = run_point(settings["m"], settings["omega"], settings)
    text = row_json(row)
    sys.stdout.write(text)
    if settings["out"]:
        _write_atomic(settings["out"], text)
    return EXIT_OK


def cmd_sweep_mass(settings) -> int:
    omega = settings["omega"]
    _sweep(settings, "sweep-mass", settings["masses"], lambda m: (m, omega))
    return EXIT_OK


def cmd_sweep_omega(settings) -> int:
    m = settings["m"]
    _sweep(settings, "sweep-omega", settings["omegas"], lambda w: (m, w))
    return EXIT_OK


def cmd_oracle(settings) -> int:
    m, omega = settings["m"], settings["omega"]
    if not (m > 0 and omega > 0):
        raise UsageError("the oracle needs m > 0 and omega > 0")
    try:
        grid = default_grid(m, omega, settings["n_points"])
        if settings["p_max"] is not None:
            grid = GridSpec(settings["p_max"], settings["n_points"])
        result = solve_ground_state(m, omega, grid, kinetic=settings["kinetic"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    payload = result.to_dict()
    payload["ultra_rel_ref"] = ultra_rel_reference(m, omega).e0
    payload["nonrel_ref"] = nonrel_reference(m, omega)[0]
    text = json.dumps(payload, indent=2) + "\n"
    sys.stdout.write(text)
    if settings["out"]:
        _write_atomic(settings["out"], text)
    if not result.converged:
        print("oracle: grid refinement shifted e0 by more than 1e-6", file=sys.stderr)
        return EXIT_ORACLE
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep-mass": cmd_sweep_mass,
    "sweep-omega": cmd_sweep_omega,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=float, help="rest mass")
    common.add_argument("--omega", type=float, help="oscillator frequency")
    common.add_argument("--d", type=int, choices=(1, 2, 3), help="space dimension (default 1)")
    common.add_argument("--beta", type=float, help="inverse temperature (default 10/gap)")
    common.add_argument("--slices", type=int, help="time slices of the coarse run (default 50)")
    common.add_argument("--sweeps", type=int, help="measurement sweeps per chain")
    common.add_argument("--burn-in", dest="burn_in", type=int, help="burn-in sweeps per chain")
    common.add_argument("--stride", type=int, help="sweeps between stored samples")
    common.add_argument("--chains", type=int, help="independent chains per run")
    common.add_argument("--seed", type=int, help="64-bit seed")
    common.add_argument("--proposal-width", dest="proposal_width", type=float,
                        help="initial proposal half-width (default from tau and m)")
    common.add_argument("--out", help="output path")
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--no-richardson", dest="no_richardson", action="store_true",
                        help="skip the tau/2 run and report raw estimates")
    common.add_argument("--local-only", dest="local_only", action="store_true",
                        help="single-slice moves only, no block or whole-path translations")
    common.add_argument("--workers", type=int, help="threads for running chains")

    parser = argparse.ArgumentParser(
        prog="relpimc",
        description="Relativistic path-integral Monte Carlo for the harmonic oscillator.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one (m, omega) point, JSON to stdout")
    p = sub.add_parser("sweep-mass", parents=[common], help="vary m at fixed omega, CSV output")
    p.add_argument("--masses", help="comma-separated masses (default 13 points 1e-3..1e3)")
    p = sub.add_parser("sweep-omega", parents=[common], help="vary omega at fixed m, CSV output")
    p.add_argument("--omegas", help="comma-separated frequencies (default 9 points 0.1..1e3)")
    p = sub.add_parser("oracle", parents=[common], help="momentum-space ground state, JSON")
    p.add_argument("--p-max", dest="p_max", type=float, help="momentum cutoff")
    p.add_argument("--n-points", dest="n_points", type=int, help="odd grid size (default 4097)")
    p.add_argument("--kinetic", choices=("relativistic", "nonrel", "ultra"),
                   help="kinetic energy used by the solver")
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"relpimc: warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = effective_settings(args)
        with warnings.catch_warnings():
            warnings.simplefilter("once", TrotterWarning)
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](settings)
    except UsageError as exc:
        print(f"relpimc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleNotConverged as exc:
        print(f"relpimc: oracle not converged: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, indent=2, default=str), file=sys.stderr)
        return EXIT_ORACLE
    except SamplerFault as exc:
        print(f"relpimc: sampler fault: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


if __name__ == "__main__":
    sys.exit(main())
