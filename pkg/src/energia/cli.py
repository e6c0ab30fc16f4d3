"""Command-line harness: single runs, benchmark tables, verification suites.

Subcommands
-----------
``run``
    One optimizer run on one problem; writes the per-iteration trace as CSV
    (canonical header ``k,L,r,v_norm,grad_norm,dtheta_norm,eta_eff,t_us``)
    and prints a one-row summary.  Exit code 0 when converged, 2 on an
    exhausted budget, 3 on an infeasible step or numerical failure; a bad
    configuration exits 1 before anything runs.  All numerical trace columns
    are deterministic for a fixed configuration; the ``t_us`` timing column
    is wall-clock and informational only.
``bench``
    One of the four summary tables (``quad``, ``rosen``, ``doptimal``,
    ``mixture``), written to ``--out`` (default ``bench_<table>.<fmt>``).
``verify``
    The invariant suites; nonzero exit iff any check fails.
``gen-data``
    Writes the versioned design matrix of a ``doptimal:MxN`` problem as a
    round-trip-exact CSV.

Configurations may come from flags or from a JSON file (``--config``) with a
required ``"version": 1`` entry; unknown keys are rejected.  The environment
variable ``ENERGIA_THREADS`` caps the bench worker pool.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import bench as _bench
from .errors import ConfigError, EnergiaError
from .preconditioners import IdentityPreconditioner
from .problems import (
    DoptimalData,
    problem_from_id,
    run_fixed_step,
    run_fw,
)
from .stepper import AepgConfig, Status, TRACE_COLUMNS, run_aepg
from .verify import SUITES, render_report, run_suites

__all__ = ["ExperimentConfig", "cmd_run", "cmd_bench", "cmd_verify", "cmd_gen_data", "main"]

METHODS = ("aepg", "aegd", "gd", "hrgd", "wngd", "fw", "fw_away")

_EXIT_BY_STATUS = {
    Status.CONVERGED: 0,
    Status.BUDGET_EXHAUSTED: 2,
    Status.INFEASIBLE_STEP: 3,
    Status.NUMERICAL_FAILURE: 3,
}


@dataclass
class ExperimentConfig:
    """One run: problem id, method id, stepper settings, output plumbing."""

    problem: str
    method: str = "aepg"
    eta: float = None
    eta_grid: tuple = None
    c: float = None
    r0: float = None
    max_iter: int = 10_000
    tol: float = 1e-8
    seed: int = 42
    grid_n: int = None
    out: str = None
    format: str = "csv"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; choose from {', '.join(METHODS)}"
            )
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.eta_grid is not None:
            grid = tuple(float(e) for e in self.eta_grid)
            if not grid or min(grid) <= 0:
                raise ConfigError("eta_grid values must be positive")
            self.eta_grid = grid
        if self.eta is not None and not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 0):
            raise ConfigError(f"max_iter must be a nonnegative integer, got {self.max_iter}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        needs_eta = self.method not in ("fw", "fw_away")
        if needs_eta and self.eta is None and self.eta_grid is None:
            raise ConfigError(f"method {self.method!r} needs --eta or --eta-grid")
        if not needs_eta and self.eta_grid is not None:
            raise ConfigError("Frank-Wolfe methods take no step-size grid")

    @classmethod
    def from_json(cls, path):
        """Load a config file; requires ``version: 1``, rejects unknown keys."""
        with open(path) as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: top level must be an object")
        version = payload.pop("version", None)
        if version != 1:
            raise ConfigError(f"{path}: config version must be 1, got {version!r}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {unknown}")
        if "problem" not in payload:
            raise ConfigError(f"{path}: config needs a problem id")
        return cls(**payload)


def _build_problem(config):
    problem = problem_from_id(config.problem, seed=config.seed, grid_n=config.grid_n)
    if config.c is not None:
        if not np.isfinite(config.c):
            raise ConfigError(f"c must be finite, got {config.c}")
        problem.objective.c = float(config.c)
    problem.objective.l(problem.theta0)  # fails fast when L(theta0) + c <= 0
    return problem


def _runner_for(config, problem):
    """``runner(eta, max_iter) -> (status, iters, gap)`` for grid tuning."""
    if config.method == "aepg":
        return _bench._aepg_runner(problem, config.tol)
    if config.method == "aegd":
        L_star = problem.objective.optimum
        L_star = None if L_star is None else float(L_star[1])

        def run(eta, max_iter):
            tr = _run_energy(config, problem, eta, max_iter)
            gap = np.nan if L_star is None else abs(float(tr.L[-1]) - L_star)
            return tr.status, int(tr.k[-1]), gap

        return run
    return _bench._fixed_runner(config.method, problem, config.tol)


def _run_energy(config, problem, eta, max_iter):
    pre = (
        problem.default_preconditioner()
        if config.method == "aepg"
        else IdentityPreconditioner()
    )
    cfg = AepgConfig(
        eta=float(eta), r0=config.r0, max_iter=int(max_iter), tol=config.tol
    )
    return run_aepg(
        problem.objective, pre, cfg, problem.theta0, feasibility=problem.constraints
    )


def _fw_trace_csv(path, result):
    """FW runs have no energy state; emit the canonical header with NaN columns."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for k in range(result.L.size):
            row = [str(k), format(float(result.L[k]), ".17g")]
            row += ["nan"] * (len(TRACE_COLUMNS) - 3)
            row.append("0")
            fh.write(",".join(row) + "\n")


def _print_summary(row, stream):
    d = _bench._row_dict(row)
    writer = csv.DictWriter(stream, fieldnames=list(d))
    writer.writeheader()
    writer.writerow({k: _bench._fmt_cell(v) for k, v in d.items()})


def cmd_run(config, stream=None):
    """Execute one configured run; returns the process exit code."""
    stream = stream if stream is not None else sys.stdout
    problem = _build_problem(config)
    L_star = problem.objective.optimum
    L_star = None if L_star is None else float(L_star[1])

    eta = config.eta
    note = ""
    if config.eta_grid is not None:
        res = _bench.tune_eta(
            _runner_for(config, problem), grid=config.eta_grid, cap=config.max_iter
        )
        if res.converged:
            eta = res.eta
            note = f"tuned over {len(config.eta_grid)} step sizes"
        else:
            best = min(res.candidates, key=lambda cand: (cand.gap, cand.eta))
            eta = best.eta
            note = "no step size converged; using the best-gap candidate"

    if config.method in ("fw", "fw_away"):
        result = run_fw(
            problem,
            gap_tol=config.tol,
            max_iter=config.max_iter,
            away=(config.method == "fw_away"),
        )
        if config.out:
            _fw_trace_csv(config.out, result)
        gap = abs(result.L_final - L_star) if L_star is not None else np.nan
        row = _bench.SummaryRow(
            problem=problem.name,
            method=config.method,
            scale=float(problem.alpha_cond or 0.0),
            eps_target=np.nan,
            iterations=result.n_iter,
            wall_ms=result.wall_ms,
            gap=gap,
            tuned_eta=np.nan,
            status=result.status.value,
            note=f"duality gap {result.gap_final:.3e}",
        )
        _print_summary(row, stream)
        return _EXIT_BY_STATUS[result.status]

    if config.method in ("aepg", "aegd"):
        tr = _run_energy(config, problem, eta, config.max_iter)
    else:
        tr = run_fixed_step(
            config.method, problem, float(eta), max_iter=config.max_iter, tol=config.tol
        )
    if config.out:
        tr.to_csv(config.out)
    gap = np.nan if L_star is None or tr.n_records == 0 else abs(float(tr.L[-1]) - L_star)
    row = _bench.SummaryRow(
        problem=problem.name,
        method=config.method,
        scale=float(problem.alpha_cond or 0.0),
        eps_target=config.tol,
        iterations=int(tr.k[-1]) if tr.n_records else 0,
        wall_ms=tr.wall_ms(),
        gap=gap,
        tuned_eta=float(eta),
        status=tr.status.value,
        note=note,
    )
    _print_summary(row, stream)
    return _EXIT_BY_STATUS[tr.status]


_TABLES = {
    "quad": lambda args: _bench.bench_quadratic(cap=args.max_iter or 100_000, grid=args.eta_grid),
    "rosen": lambda args: _bench.bench_rosenbrock(cap=args.max_iter or 100_000, grid=args.eta_grid),
    "doptimal": lambda args: _bench.bench_doptimal(seed=args.seed, grid=args.eta_grid),
    "mixture": lambda args: _bench.bench_mixture(
        grid_n=args.grid_n or 64, max_iter=args.max_iter or 800
    ),
}


def cmd_bench(args, stream=None):
    stream = stream if stream is not None else sys.stdout
    rows = _TABLES[args.table](args)
    out = args.out or f"bench_{args.table}.{args.format}"
    _bench.write_report(rows, out, fmt=args.format)
    for row in sorted(rows, key=lambda r: r.row_key):
        print(
            f"{row.problem:<12s} {row.method:<8s} scale={row.scale:<8g} "
            f"iters={row.iterations:<8d} gap={row.gap:<12.3e} status={row.status}",
            file=stream,
        )
    print(f"report written to {out}", file=stream)
    return 0


def cmd_verify(args, stream=None):
    stream = stream if stream is not None else sys.stdout
    names = args.suite or list(SUITES)
    results = run_suites(names)
    print(render_report(results), file=stream)
    failed = any(not c.passed for checks in results.values() for c in checks)
    return 1 if failed else 0


def cmd_gen_data(args, stream=None):
    stream = stream if stream is not None else sys.stdout
    head, _, arg = args.problem.partition(":")
    if head != "doptimal" or not arg:
        raise ConfigError("gen-data expects --problem doptimal:MxN")
    m_s, _, n_s = arg.partition("x")
    try:
        m, n = int(m_s), int(n_s)
    except ValueError:
        raise ConfigError(f"malformed design size {arg!r}; expected MxN") from None
    data = DoptimalData.generate(m, n, args.seed)
    data.dump(args.out)
    print(f"design {n}x{m} (seed {args.seed}) written to {args.out}", file=stream)
    return 0


def _add_run_parser(sub):
    p = sub.add_parser("run", help="single optimizer run with a trace file")
    p.add_argument("--config", help="JSON config file (version 1); replaces the flags below")
    p.add_argument("--problem", help="quad[:A], rosen[:A], doptimal[:MxN], mixture")
    p.add_argument("--method", default="aepg", choices=METHODS)
    p.add_argument("--eta", type=float, help="base step size")
    p.add_argument("--eta-grid", help="comma-separated step sizes to tune over")
    p.add_argument("--c", type=float, help="override the objective shift")
    p.add_argument("--r0", type=float, help="override the initial energy")
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--grid-n", type=int, help="mixture grid resolution")
    p.add_argument("--out", help="trace CSV path")


def _parse_eta_grid(text):
    if text is None:
        return None
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"malformed eta grid {text!r}") from None


def _config_from_args(args):
    if args.config:
        flags = [
            name
            for name, val in (
                ("--problem", args.problem),
                ("--eta", args.eta),
                ("--eta-grid", args.eta_grid),
                ("--c", args.c),
                ("--r0", args.r0),
                ("--grid-n", args.grid_n),
                ("--out", args.out),
            )
            if val is not None
        ]
        if flags:
            raise ConfigError(f"--config replaces the run flags; drop {', '.join(flags)}")
        return ExperimentConfig.from_json(args.config)
    if not args.problem:
        raise ConfigError("run needs --problem (or --config)")
    return ExperimentConfig(
        problem=args.problem,
        method=args.method,
        eta=args.eta,
        eta_grid=_parse_eta_grid(args.eta_grid),
        c=args.c,
        r0=args.r0,
        max_iter=args.max_iter,
        tol=args.tol,
        seed=args.seed,
        grid_n=args.grid_n,
        out=args.out,
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="energia",
        description="Energy-adaptive preconditioned gradient descent: runs, benches, checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_parser(sub)

    p = sub.add_parser("bench", help="one of the four summary tables")
    p.add_argument("--table", required=True, choices=sorted(_TABLES))
    p.add_argument("--eta-grid", help="comma-separated step sizes (default: 13-point log grid)")
    p.add_argument("--max-iter", type=int, help="per-run iteration cap")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--grid-n", type=int, help="mixture grid resolution")
    p.add_argument("--out", help="report path (default bench_<table>.<format>)")
    p.add_argument("--format", default="csv", choices=("csv", "json"))

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument(
        "--suite",
        action="append",
        choices=sorted(SUITES),
        help="suite to run (repeatable; default: all)",
    )

    p = sub.add_parser("gen-data", help="write a design matrix CSV")
    p.add_argument("--problem", required=True, help="doptimal:MxN")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _config_from_args(args)
            return cmd_run(config)
        if args.command == "bench":
            args.eta_grid = _parse_eta_grid(args.eta_grid)
            return cmd_bench(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "gen-data":
            return cmd_gen_data(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EnergiaError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
