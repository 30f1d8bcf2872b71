"""Command line entry point: ``stochbgk {run,sweep,mc,flow-test,picard,residual}``.

Exit status is 1 when any assertion of the invoked suite fails, 2 for usage
or configuration errors, 0 otherwise.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from .harness import experiments as ex
from .harness.config import ConfigError, ExperimentSpec, load_spec
from .harness.report import Table, emit_report, field_table, read_table, snapshot_table
from .solver import BGKSolver, SolverConfig

log = logging.getLogger("stochbgk")


def default_spec(command: str) -> ExperimentSpec:
    """Built-in settings per subcommand (overridden by --config)."""
    if command in ("run", "sweep"):
        dt = 0.5 / 512
        base = SolverConfig(nx=512, nxi=128, xi_min=-0.5, xi_max=1.5, flux="burgers", noise="zero",
                            initial="square", eps=dt, dt=dt, t_end=0.25)
        return ExperimentSpec(base, axis="eps", ladder=["8dt", "4dt", "2dt", "1dt"], target="exact_riemann")
    if command == "mc":
        base = SolverConfig(nx=64, nxi=128, xi_min=-0.25, xi_max=1.75, flux="burgers", noise="nula",
                            noise_params={"sigma": 0.2}, initial="kinetic_bump", eps=math.inf,
                            dt=0.025, t_end=0.5, seed=11)
        return ExperimentSpec(base, replicas=200)
    if command == "flow-test":
        base = SolverConfig(nx=16, nxi=16, xi_min=-1.0, xi_max=1.0, flux="burgers", noise="nula",
                            noise_params={"sigma": 0.2}, dt=0.125, t_end=1.0, seed=3)
        return ExperimentSpec(base, replicas=20, levels=3, samples=1000)
    if command == "picard":
        base = SolverConfig(nx=32, nxi=32, xi_min=-0.5, xi_max=1.5, flux="burgers", noise="nula",
                            noise_params={"sigma": 0.1}, initial="sine",
                            initial_params={"mean": 0.5, "amplitude": 0.3},
                            eps=0.1, dt=0.25 / 16, t_end=0.25, seed=3)
        return ExperimentSpec(base, target="picard_oracle", tol=1e-8, max_iter=500)
    if command == "residual":
        base = SolverConfig(nx=64, nxi=32, xi_min=-0.5, xi_max=1.5, flux="burgers", noise="zero",
                            initial="square", eps=0.5 / 64, dt=0.5 / 64, t_end=0.25)
        return ExperimentSpec(base, levels=3, test_function="shock")
    raise ValueError(command)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochbgk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "single solver run; writes diagnostics, snapshots and the measure"),
        ("sweep", "epsilon (or dt/grid) ladder against a reference"),
        ("mc", "Monte Carlo ensemble statistics"),
        ("flow-test", "characteristic flow properties"),
        ("picard", "Duhamel/Picard oracle against the splitting solver"),
        ("residual", "weak-form residual under refinement"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--out", type=Path, help="output directory (default: experiment.out)")
        p.add_argument("--replicas", type=int, help="override experiment.replicas")
        p.add_argument("--seed", type=int, help="override solver.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for replicas")
    return parser


def _run_single(spec: ExperimentSpec) -> ex.Outcome:
    res = BGKSolver(spec.base).run(ex.base_path(spec.base))
    cols, rows = res.diagnostics.table()
    grid = res.final.grid
    tables = [Table("diagnostics", cols, rows),
              snapshot_table("snapshots", res.times, res.snapshots),
              field_table("measure", res.measure.cumulative, grid, "cumulative_mass")]
    bv = max(res.diagnostics.column("bound_violation"))
    assertions = Table("assertions", list(ex.ASSERTION_COLUMNS), [["bounds", bv, 1e-12, bv <= 1e-12]])
    return ex.Outcome(tables, assertions)


def execute(command: str, spec: ExperimentSpec, threads: int = 1) -> ex.Outcome:
    if command == "run":
        return _run_single(spec)
    if command == "sweep":
        return ex.run_epsilon_sweep(spec) if spec.axis == "eps" else ex.run_refinement_sweep(spec)
    if command == "mc":
        return ex.run_monte_carlo(spec, threads)
    if command == "flow-test":
        return ex.run_flow_tests(spec)
    if command == "picard":
        return ex.run_picard_check(spec)
    if command == "residual":
        return ex.run_residual_study(spec)
    raise ValueError(f"unknown command {command!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = default_spec(args.command)
        if args.config is not None:
            spec = load_spec(args.config, spec)
        if args.seed is not None:
            spec = replace(spec, base=replace(spec.base, seed=args.seed))
        if args.replicas is not None:
            spec = replace(spec, replicas=args.replicas)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"stochbgk: {exc}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else Path(spec.out_dir) / args.command
    start = time.perf_counter()
    outcome = execute(args.command, spec, args.threads)
    runtime = time.perf_counter() - start
    meta = {"command": args.command, "seed": spec.base.seed, "config": spec.echo()}
    written = emit_report(outcome.tables + [outcome.assertions], out, meta, {args.command: runtime})
    # the verdict is read back from the emitted table
    verdict = read_table(written["assertions"])
    failed = [r for r in verdict.records() if not r["passed"]]
    for r in verdict.records():
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status} {r['assertion']}: value={r['value']:.6g} threshold={r['threshold']:.6g}")
    print(f"wrote {len(written)} files to {out}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
