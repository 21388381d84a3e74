"""Command-line front end: ``nshops run | scan | noise-check | print-schema``.

Exit codes: 0 success, 2 configuration error, 3 model-domain error,
4 numerical failure, 5 statistical-validation failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bcf import bcf_matrix
from .config import SCHEMA, RunConfig, build_truncation, canonical_text, load_config
from .error_analysis import richardson_order, rms, step_error, stochastic_error, total_and_rms
from .exceptions import ConfigError, NSHopsError, StatisticalValidationError
from .fock import Rectangular, Triangular
from .noise import (
    CovarianceStats,
    bcf_factor,
    complex_normal,
    ou_autocorrelation_check,
    ou_sample,
    substream,
)
from .solvers import STOCHASTIC, Solution, solve

log = logging.getLogger("nshops")

SIGMA_LIMIT = 5.0


def version_string() -> str:
    """Package version with the short commit hash when run from a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent, capture_output=True,
            text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    rev = out.stdout.strip()
    return f"{__version__}+g{rev}" if out.returncode == 0 and rev else __version__


def fmt(x) -> str:
    """Shortest round-trip decimal text of a float."""
    return repr(float(x))


# --------------------------------------------------------------------------
# result tables
# --------------------------------------------------------------------------


def solution_table(sol: Solution) -> tuple[list[str], np.ndarray]:
    """Column names and values for a solution, one row per stored time."""
    d = sol.rho.shape[-1]
    names, cols = ["t"], [sol.times]
    for i in range(d):
        for j in range(d):
            names += [f"rho_{i}{j}_re", f"rho_{i}{j}_im"]
            cols += [sol.rho[:, i, j].real, sol.rho[:, i, j].imag]
    obs = list(sol.observables)
    for n in obs:
        names.append(n)
        cols.append(sol.observables[n])
    if sol.stochastic:
        for i in range(d):
            for j in range(d):
                names += [f"se_rho_{i}{j}_re", f"se_rho_{i}{j}_im"]
                cols += [sol.se_re[:, i, j], sol.se_im[:, i, j]]
        for n in obs:
            names.append(f"se_{n}")
            cols.append(sol.observable_se[n])
    return names, np.column_stack(cols)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return fmt(v)


def write_sidecar(path: Path, cfg: RunConfig, extra: dict) -> None:
    meta = {"config": cfg.data, "seed": cfg["seed"], "version": version_string(), **extra}
    path.write_text(canonical_text(meta), encoding="utf-8")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _solve(cfg: RunConfig, threads: int, truncation=None, h=None, method=None, n_traj=None) -> Solution:
    method = method or cfg.method
    problem = cfg.problem(truncation, h)
    kw = {}
    if method.startswith("hops"):
        kw["noise"] = cfg["noise"]
    n = cfg["trajectories"] if n_traj is None else n_traj
    return solve(problem, method, n_traj=n, seed=cfg["seed"], threads=threads, **kw)


def cmd_run(cfg: RunConfig, out: Path, threads: int) -> int:
    sol = _solve(cfg, threads)
    header, table = solution_table(sol)
    write_csv(out / "run.csv", header, table)
    extra = {"method": sol.method, "columns": header}
    if sol.stochastic:
        extra.update(trajectories_used=sol.count, trajectories_discarded=sol.discarded)
    write_sidecar(out / "run.meta.json", cfg, extra)
    log.info("wrote %s", out / "run.csv")
    return 0


def _reference_method(method: str) -> str:
    if method.startswith("hops"):
        return "hme"
    if method.startswith("psse"):
        return "pme"
    return method


def _scan_truncation(cfg: RunConfig, axis: str, value: int, mode: int):
    base = cfg.truncation()
    if axis == "nmax":
        nmax = list(base.nmax)
        nmax[mode] = value
        return Rectangular(tuple(nmax))
    if axis == "nsum":
        return Triangular(value, base.n_modes)
    return base


def _reference(cfg: RunConfig, threads: int) -> Solution:
    scan = cfg["scan"]
    ref = scan.get("reference", {})
    method = ref.get("method", _reference_method(cfg.method))
    n_modes = cfg.bath().n_modes
    if "truncation" in ref:
        trunc = build_truncation(ref["truncation"], n_modes)
    elif cfg["truncation"]["kind"] == "rectangular":
        trunc = Rectangular((60,))
    else:
        trunc = Triangular(60, n_modes)
    return _solve(cfg, threads, trunc, ref.get("h"), method, ref.get("trajectories"))


def _richardson(cfg: RunConfig, threads: int, trunc, h: float, rho_h) -> tuple:
    n_steps = round(cfg["T"] / h)
    if n_steps % (4 * cfg["stored_points"]):
        raise ConfigError(
            f"per-source errors need 4 x stored_points ({cfg['stored_points']}) to divide the step count ({n_steps})",
            "scan.per_source",
        )
    rho_2h = _solve(cfg, threads, trunc, 2 * h).rho
    rho_4h = _solve(cfg, threads, trunc, 4 * h).rho
    p = richardson_order(rho_h, rho_2h, rho_4h)
    return step_error(rho_h, rho_2h, p), p


def cmd_scan(cfg: RunConfig, out: Path, threads: int) -> int:
    scan = cfg.data.get("scan")
    if not scan:
        raise ConfigError("scan subcommand needs a 'scan' section", "scan")
    axis, mode = scan["axis"], scan.get("mode", 0)
    stochastic = cfg.method in STOCHASTIC
    per_source = scan.get("per_source", not stochastic) and not stochastic
    ref = _reference(cfg, threads)
    header = [axis, "r"]
    if per_source:
        header += ["r_step", "r_truncation", "r_total", "p_median"]
    if stochastic:
        header += ["trajectories_used", "trajectories_discarded"]
    rows = []
    for value in scan["values"]:
        trunc, h, n_traj = cfg.truncation(), cfg["h"], None
        if axis in ("nmax", "nsum"):
            trunc = _scan_truncation(cfg, axis, int(value), mode)
        elif axis == "step":
            h = float(value)
        else:
            n_traj = int(value)
        sol = _solve(cfg, threads, trunc, h, n_traj=n_traj)
        if sol.rho.shape != ref.rho.shape:
            raise ConfigError("scan run and reference store different time grids", "scan.reference")
        _, r = stochastic_error(sol.rho, ref.rho)
        row = [int(value) if axis != "step" else float(value), r]
        if per_source:
            step, p = _richardson(cfg, threads, trunc, h, sol.rho)
            trunc_err = np.abs(sol.rho - ref.rho)
            report = total_and_rms(step, trunc_err, sol.times, p)
            p_med = float(np.ma.median(p)) if p.count() else float("nan")
            row += [rms(report.step), rms(report.truncation), report.rms, p_med]
        if stochastic:
            row += [sol.count, sol.discarded]
        rows.append(row)
        log.info("%s=%s r=%.3e", axis, value, r)
    write_csv(out / "scan.csv", header, rows)
    write_sidecar(out / "scan.meta.json", cfg, {"axis": axis, "columns": header})
    return 0


def noise_check(cfg: RunConfig, points: int, draws: int, negative_control: bool = False,
                batch: int = 2000, dump_paths: int = 0):
    """Validate the noise samplers of ``cfg``'s bath against the analytic BCF.

    Returns ``(rows, passed, dumped)`` where each row is
    ``(check, sampler, max_z, passed)`` and ``dumped`` holds sampled paths.
    """
    bath = cfg.bath()
    grid = np.linspace(0.0, cfg["T"], points)
    analytic = bcf_matrix(bath, grid)
    if negative_control:
        analytic = analytic.conj()
    samplers = ["eigen"] + (["ou"] if bath.pseudomode_ok else [])
    stats, dumped = {}, {}
    for k, name in enumerate(samplers):
        acc = CovarianceStats(points)
        fac = bcf_factor(bath, grid) if name == "eigen" else None
        done = 0
        while done < draws:
            m = min(batch, draws - done)
            rng = substream(cfg["seed"], k * (1 << 32) + done // batch)
            if name == "eigen":
                Z = (fac.factor @ complex_normal(rng, (fac.rank, m))).T
            else:
                Z = ou_sample(bath, grid, rng, m, cfg["h"])
            if done == 0 and dump_paths:
                dumped[name] = Z[:dump_paths]
            acc.add(Z)
            done += m
        stats[name] = acc
    rows = []
    for name, acc in stats.items():
        z = acc.zscores(analytic)
        rows.append(("covariance", name, z["covariance"]))
        rows.append(("pseudo_covariance", name, z["pseudo_covariance"]))
    if len(stats) == 2:
        rows.append(("cross_agreement", "eigen|ou", stats["eigen"].cross_zscore(stats["ou"])))
    if bath.pseudomode_ok:
        for j, rate in enumerate(bath.rates):
            rng = substream(cfg["seed"], (1 << 40) + j)
            lags = np.array([0.0, 1.0, 2.0]) / rate
            dt = 1.0 / rate / max(1, int(np.ceil(1.0 / (rate * cfg["h"]))))
            for lag, _, _, z in ou_autocorrelation_check(rate, lags, rng, draws, dt, batch):
                rows.append((f"ou_autocorrelation_mode{j}_lag{lag * rate:g}", "ou", z))
    rows = [(c, s, z, z <= SIGMA_LIMIT) for c, s, z in rows]
    return rows, all(r[3] for r in rows), dumped


def cmd_noise_check(cfg: RunConfig, out: Path, points: int, draws: int, negative_control: bool,
                    dump_paths: int) -> int:
    rows, passed, dumped = noise_check(cfg, points, draws, negative_control, dump_paths=dump_paths)
    write_csv(out / "noise_check.csv", ["check", "sampler", "max_z", "pass"],
              [(c, s, z, "true" if ok else "false") for c, s, z, ok in rows])
    grid = np.linspace(0.0, cfg["T"], points)
    for name, Z in dumped.items():
        for i, path in enumerate(Z):
            write_csv(out / f"noise_path_{name}_{i}.csv", ["t", "re_Z", "im_Z"],
                      zip(grid, path.real, path.imag))
    write_sidecar(out / "noise_check.meta.json", cfg,
                  {"points": points, "draws": draws, "negative_control": negative_control, "passed": passed})
    for c, s, z, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {c} [{s}] max |emp - analytic| = {z:.2f} SE")
    if not passed:
        raise StatisticalValidationError(f"noise check failed at {SIGMA_LIMIT:g} sigma")
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _default_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nshops", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", type=Path, required=needs_config, help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--threads", type=int, default=_default_threads(), help="worker threads")
        p.add_argument("--out", type=Path, help="output directory (default: config 'output' or '.')")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="integrate one configuration and write run.csv"))
    common(sub.add_parser("scan", help="error summary over a truncation, step or ensemble-size axis"))
    nc = sub.add_parser("noise-check", help="validate noise samplers against the analytic BCF")
    common(nc)
    nc.add_argument("--points", type=int, default=50, help="grid points on [0, T]")
    nc.add_argument("--draws", type=int, default=100_000, help="sampled paths per sampler")
    nc.add_argument("--negative-control", action="store_true",
                    help="compare against the conjugated BCF; the check is expected to fail")
    nc.add_argument("--dump-paths", type=int, default=0, help="write this many sampled paths to CSV")
    sub.add_parser("print-schema", help="print the configuration JSON schema")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "print-schema":
        sys.stdout.write(canonical_text(SCHEMA))
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", "--threads")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        out = args.out or Path(cfg.data.get("output", "."))
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return cmd_run(cfg, out, args.threads)
        if args.command == "scan":
            return cmd_scan(cfg, out, args.threads)
        if args.points < 1 or args.draws < 2:
            raise ConfigError("noise-check needs --points >= 1 and --draws >= 2", "--draws")
        return cmd_noise_check(cfg, out, args.points, args.draws, args.negative_control, args.dump_paths)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except NSHopsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
