"""Command line entry point: named experiments and a CQ weight dump.

Usage::

    fracwest run --scenario test1-convergence [--config FILE] [--out DIR]
                 [--dt V] [--corrected] [--set key=value ...]
    fracwest weights --kernel A --mu 0.5 --dt 0.1 --n 64

``FRACWEST_THREADS`` caps how many runs of a sweep execute concurrently.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import SCENARIOS, Scenario, parse_config
from .cq import CqScheme, write_weights_csv
from .errors import ErrorReport, energy_error, max_l2_error
from .exceptions import BreakdownError, ConfigError, FracWestError
from .fem import write_coordinate_list, write_mesh
from .kernels import KernelSpec
from .stepper import run

logger = logging.getLogger("fracwest")

__all__ = ["main", "run_scenario", "write_snapshots", "write_energy_log"]


def _fmt(v):
    return f"{v:.17g}"


def write_snapshots(traj, times, fh):
    """CSV rows ``t, index, value`` over all mesh nodes at the requested times."""
    writer = csv.writer(fh)
    writer.writerow(["t", "index", "value"])
    last = traj.u.shape[0] - 1
    for t in times:
        n = int(round(t / traj.dt))
        if n > last:
            continue
        full = traj.space.extend(traj.u[n])
        tn = traj.times[n]
        for i, v in enumerate(full):
            writer.writerow([_fmt(tn), i, _fmt(v)])


def write_energy_log(traj, fh):
    """CSV rows ``n, t_n, E_n, newton_iters``; iterations are those spent on ``u_{n+1}``."""
    writer = csv.writer(fh)
    writer.writerow(["n", "t_n", "E_n", "newton_iters"])
    for n, e in enumerate(traj.energies):
        writer.writerow([n, _fmt(traj.times[n]), _fmt(e), int(traj.newton_iters[n + 1])])


def write_nodes(space, fh):
    writer = csv.writer(fh)
    writer.writerow(["index"] + ["x", "y"][: space.dim])
    for i, x in enumerate(space.mesh.nodes):
        writer.writerow([i] + [_fmt(v) for v in x])


class _Outputs:
    def __init__(self, out_dir):
        self.root = Path(out_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def open(self, name):
        return open(self.root / name, "w", newline="")


def _single_run(sc, out, label, settings, space):
    cfg = sc.run_config(space=space, settings=settings)
    try:
        traj = run(cfg)
        status, message = "ok", ""
    except BreakdownError as exc:
        traj = getattr(exc, "trajectory", None)
        status, message = "breakdown", str(exc)
    if traj is not None:
        times = sc.snapshot_times(replace(settings, T=cfg.T))
        with out.open(f"{label}_snapshots.csv") as fh:
            write_snapshots(traj, times, fh)
        with out.open(f"{label}_energy.csv") as fh:
            write_energy_log(traj, fh)
    return [(label, status, message)]


def _convergence(sc, out, label, settings, space):
    s = settings
    rows = []
    errors = []
    if sc.name == "conv2d":
        exact = sc.initial_data(s)[4]
        ref, ref_desc = None, "exact manufactured solution (nodal interpolant)"
        measure = "max L2 error"
    else:
        ref_dt = min(s.dts) / s.ref_factor
        ref_cfg = sc.run_config(space=space, settings=s, dt=ref_dt, corrected=True)
        ref = run(ref_cfg)
        ref_desc = f"corrected-CQ run with dt = {ref_dt:.6g} on the same mesh"
        measure = "max energy error"
    for dt in s.dts:
        cfg = sc.run_config(space=space, settings=s, dt=dt)
        tag = f"{label}_dt{dt:.6g}"
        try:
            traj = run(cfg)
        except BreakdownError as exc:
            rows.append((tag, "breakdown", str(exc)))
            continue
        with out.open(f"{tag}_energy.csv") as fh:
            write_energy_log(traj, fh)
        err = max_l2_error(traj, exact) if ref is None else energy_error(traj, ref)
        errors.append((dt, err))
        rows.append((tag, "ok", f"error={err:.6e}"))
    if len(errors) >= 3:
        report = ErrorReport.from_errors(
            [d for d, _ in errors], [e for _, e in errors], measure=measure,
            scenario=sc.name, run=label, corrected=s.corrected, mu=s.mu, a=s.a,
            k=s.k, r=s.r, kernel=s.kernel, M=s.M, T=s.T, reference=ref_desc,
        )
        with out.open(f"{label}_convergence.csv") as fh:
            report.write_csv(fh)
        with out.open(f"{label}_summary.txt") as fh:
            fh.write(report.summary())
        rows.append((f"{label}_fit", "ok", f"slope={report.slope:.4f}"))
    else:
        rows.append((f"{label}_fit", "error", "fewer than three successful runs"))
    return rows


def run_scenario(sc: Scenario, out_dir, threads=None, dump_matrices=False, dump_weights=False):
    """Run every job of a scenario and write its CSV files.

    Returns the process exit status: 0 when every run succeeded.
    """
    out = _Outputs(out_dir)
    if threads is None:
        threads = int(os.environ.get("FRACWEST_THREADS", "1") or 1)
    runs = sc.runs()
    space = sc.space()
    with out.open("nodes.csv") as fh:
        write_nodes(space, fh)
    if dump_matrices:
        with out.open("mesh.txt") as fh:
            write_mesh(space.mesh, fh)
        with out.open("mass.txt") as fh:
            write_coordinate_list(space.mass, fh)
        with out.open("stiffness.txt") as fh:
            write_coordinate_list(space.stiffness, fh)
    if dump_weights:
        for label, s in runs:
            cfg = sc.run_config(space=space, settings=s)
            scheme = CqScheme.build(cfg.kernel, cfg.dt, cfg.n_steps, cfg.corrected)
            with out.open(f"{label}_weights.csv") as fh:
                write_weights_csv(scheme, fh)

    job = _convergence if sc.is_convergence else _single_run

    def guarded(item):
        label, s = item
        logger.info("starting %s", label)
        try:
            return job(sc, out, label, s, space)
        except FracWestError as exc:
            return [(label, "error", f"{type(exc).__name__}: {exc}")]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(guarded, runs))
    rows = [row for rs in results for row in rs]
    with out.open("status.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "status", "message"])
        writer.writerows(rows)
    failed = [r for r in rows if r[1] != "ok"]
    for label, status, message in rows:
        logger.info("%-40s %-9s %s", label, status, message)
    return 1 if failed else 0


def _build_parser():
    parser = argparse.ArgumentParser(prog="fracwest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a named experiment")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument(
        "--dt", help="time step; for convergence studies the coarsest of a halving sequence"
    )
    p.add_argument("--corrected", action="store_true", help="use the corrected CQ")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--dump-matrices", action="store_true", help="write mesh and matrices")
    p.add_argument("--dump-weights", action="store_true", help="write CQ weights per run")

    w = sub.add_parser("weights", help="print BDF2 convolution weights as CSV")
    w.add_argument("--kernel", default="A", choices=["A", "B", "a", "b"])
    w.add_argument("--mu", type=float, default=0.5)
    w.add_argument("--r", type=float, default=0.0)
    w.add_argument("--dt", type=float, default=0.1)
    w.add_argument("--n", type=int, default=64)
    w.add_argument("--out", type=Path)
    return parser


def _overrides(args):
    over = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        over[key.strip()] = value.strip()
    if args.corrected:
        over["corrected"] = "true"
    if args.dt is not None:
        over["dt"] = args.dt
    return over


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose or args.command == "run" else logging.WARNING,
        format="%(message)s",
    )
    try:
        if args.command == "weights":
            spec = KernelSpec(args.kernel, args.mu, args.r)
            scheme = CqScheme.build(spec, args.dt, args.n)
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    write_weights_csv(scheme, fh)
            else:
                write_weights_csv(scheme, sys.stdout)
            return 0
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        over = _overrides(args)
        _, sc = parse_config(text, args.scenario, over)
        if sc.is_convergence and "dt" in over:
            n = 4 if sc.name == "test1-convergence" else 3
            dt0 = sc.settings.dt
            sc = replace(sc, settings=replace(sc.settings, dts=tuple(dt0 / 2**i for i in range(n))))
        return run_scenario(sc, args.out, dump_matrices=args.dump_matrices, dump_weights=args.dump_weights)
    except (FracWestError, OSError) as exc:
        print(f"fracwest: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
