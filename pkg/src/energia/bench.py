"""Benchmark harness: step-size tuning and summary tables.

The public entry points are :func:`tune_eta` (grid search over the base step
size with staged budgets), the four table builders
(:func:`bench_quadratic`, :func:`bench_rosenbrock`, :func:`bench_doptimal`,
:func:`bench_mixture`) and :func:`write_report`.  Rows are independent and run
in a worker pool capped by the ``ENERGIA_THREADS`` environment variable; the
assembled report is ordered by row key, never by completion time.  Wall-clock
columns are informational only.
"""

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EnergiaError
from .preconditioners import IdentityPreconditioner
from .stepper import AepgConfig, Status, run_aepg
from .problems import (
    doptimal_problem,
    mixture_problem,
    quadratic_problem,
    rosenbrock_problem,
    run_fixed_step,
    run_fw,
    with_reference,
)

__all__ = [
    "DEFAULT_ETA_GRID",
    "TuneCandidate",
    "TuneResult",
    "tune_eta",
    "SummaryRow",
    "bench_quadratic",
    "bench_rosenbrock",
    "bench_doptimal",
    "bench_mixture",
    "write_report",
    "thread_cap",
]

# Thirteen log-spaced points spanning 1e-3 .. 10; the coarse pass of every
# grid search.  A second pass refines around the incumbent at ratio 10^(1/12),
# covering the gap between adjacent coarse points (ratio 10^(1/3)).
DEFAULT_ETA_GRID = tuple(float(x) for x in np.logspace(-3.0, 1.0, 13))

_PILOT_CAPS = (2_000, 16_000)
_REFINE_STEPS = np.power(10.0, np.arange(-4, 5) / 12.0)

QUAD_ROWS = ((1.0, 1e-7), (10.0, 1e-6), (100.0, 1e-5), (1000.0, 1e-4), (10000.0, 1e-3))


def thread_cap():
    """Worker-pool size: ``ENERGIA_THREADS`` if set, else the CPU count."""
    raw = os.environ.get("ENERGIA_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"ENERGIA_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"ENERGIA_THREADS must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class TuneCandidate:
    """One (eta, budget) attempt inside a grid search."""

    eta: float
    status: str
    iters: int
    gap: float
    cap: int
    stage: str  # "coarse" or "refined"


@dataclass(frozen=True)
class TuneResult:
    """Outcome of a step-size grid search.

    ``eta``/``iters`` describe the best converged candidate; when nothing
    converged within the budget, ``eta`` is NaN and ``iters`` equals ``cap``.
    ``candidates`` preserves every attempt for reporting.
    """

    eta: float
    iters: int
    gap: float
    converged: bool
    cap: int
    candidates: tuple

    @property
    def label(self):
        return "converged" if self.converged else "no_converged_eta"


def tune_eta(runner, grid=None, cap=100_000, pilot_caps=_PILOT_CAPS, refine=True, keep_top=3):
    """Grid-search the base step size, cheapest budgets first.

    ``runner(eta, max_iter)`` must return ``(status, iters, gap)`` where
    ``status`` is a :class:`~energia.stepper.Status`, ``iters`` the number of
    steps taken and ``gap`` the terminal objective gap.  The search runs the
    grid at staged iteration caps: once any candidate has converged within a
    stage cap, candidates still unfinished at that cap cannot do better, so
    escalation stops and the remaining runs are cut off at the incumbent's
    count.  Without an incumbent only the ``keep_top`` candidates with the
    smallest terminal gaps are promoted to the next cap.

    When an incumbent exists and ``refine`` is set, a second pass scans nine
    points around it at ratio ``10^(1/12)`` (both passes are applied
    identically to every method, mirroring fine-tuning of the base step).
    Larger steps are tried first so the incumbent appears early.
    """
    if grid is None:
        grid = DEFAULT_ETA_GRID
    etas = sorted({float(e) for e in grid}, reverse=True)
    if not etas or min(etas) <= 0:
        raise ConfigError("eta grid must contain positive step sizes")
    caps = [c for c in sorted(set(pilot_caps)) if c < cap] + [cap]

    best = None  # (iters, eta, gap)
    log = []

    def attempt(eta, bar, stage):
        nonlocal best
        status, iters, gap = runner(float(eta), int(bar))
        if not isinstance(status, Status):
            raise ConfigError(f"runner returned {status!r} instead of a Status")
        log.append(TuneCandidate(float(eta), status.value, int(iters), float(gap), int(bar), stage))
        if status == Status.CONVERGED and (best is None or iters < best[0]):
            best = (int(iters), float(eta), float(gap))

    alive = list(etas)
    for stage_cap in caps:
        survivors = []
        for eta in alive:
            bar = stage_cap if best is None else min(stage_cap, best[0])
            attempt(eta, bar, "coarse")
            last = log[-1]
            if last.status == Status.BUDGET_EXHAUSTED.value and last.iters >= stage_cap:
                survivors.append((last.gap, eta))
        if best is not None or not survivors:
            break
        survivors.sort()
        alive = [eta for _, eta in survivors[:keep_top]]
    if best is not None and refine:
        seen = {c.eta for c in log}
        for eta in sorted(best[1] * _REFINE_STEPS, reverse=True):
            if any(abs(eta - s) <= 1e-12 * s for s in seen):
                continue
            attempt(eta, min(cap, best[0]), "refined")
    if best is None:
        return TuneResult(float("nan"), cap, float("nan"), False, cap, tuple(log))
    return TuneResult(best[1], best[0], best[2], True, cap, tuple(log))


# ---------------------------------------------------------------------------
# Summary rows


@dataclass(frozen=True)
class SummaryRow:
    """One line of a benchmark report.

    ``scale`` carries the row parameter (condition number alpha, design
    dimension m, or grid resolution N depending on the table) and
    ``eps_target`` the accuracy the iteration count refers to.
    """

    problem: str
    method: str
    scale: float
    eps_target: float
    iterations: int
    wall_ms: float
    gap: float
    tuned_eta: float
    status: str
    note: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if self.status == "converged" and np.isfinite(self.eps_target):
            if not self.gap < self.eps_target:
                raise ConfigError(
                    f"converged row with gap {self.gap:.3e} >= target {self.eps_target:.3e}"
                )

    @property
    def row_key(self):
        return (self.problem, float(self.scale), self.method)


def _pool_map(jobs):
    """Run ``(key, callable)`` jobs in the worker pool; results by key order.

    A failed job is converted into an error row by the caller-supplied
    fallback inside the callable; anything escaping is re-raised.
    """
    workers = min(thread_cap(), max(1, len(jobs)))
    out = {}
    if workers == 1:
        for key, fn in jobs:
            out[key] = fn()
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futs = {ex.submit(fn): key for key, fn in jobs}
            for fut, key in futs.items():
                out[key] = fut.result()
    rows = []
    for key in sorted(out):
        rows.extend(out[key])
    return rows


def _error_row(problem, method, scale, eps, exc):
    return SummaryRow(
        problem=problem,
        method=method,
        scale=scale,
        eps_target=eps,
        iterations=0,
        wall_ms=0.0,
        gap=float("nan"),
        tuned_eta=float("nan"),
        status="error",
        note=f"{type(exc).__name__}: {exc}",
    )


# ---------------------------------------------------------------------------
# Table 1/2 style: tuned AEPG vs tuned HRGD across condition numbers


def _gap_of(trace, L_star):
    return abs(float(trace.L[-1]) - L_star)


def _aepg_runner(problem, tol):
    L_star = float(problem.objective.optimum[1])

    def run(eta, max_iter):
        cfg = AepgConfig(eta=eta, max_iter=max_iter, tol=tol)
        tr = run_aepg(
            problem.objective,
            problem.default_preconditioner(),
            cfg,
            problem.theta0,
            feasibility=problem.constraints,
        )
        return tr.status, int(tr.k[-1]), _gap_of(tr, L_star)

    return run


def _fixed_runner(kind, problem, tol):
    L_star = float(problem.objective.optimum[1])

    def run(eta, max_iter):
        tr = run_fixed_step(kind, problem, eta, max_iter=max_iter, tol=tol)
        return tr.status, int(tr.k[-1]), _gap_of(tr, L_star)

    return run


def _conditioned_pair(problem_name, factory, alpha, eps, cap, grid):
    try:
        problem = factory(alpha)
        rows = []
        tuned = {}
        for method in ("hrgd", "aepg"):
            t0 = time.perf_counter()
            runner = (
                _aepg_runner(problem, eps)
                if method == "aepg"
                else _fixed_runner(method, problem, eps)
            )
            res = tune_eta(runner, grid=grid, cap=cap)
            wall = (time.perf_counter() - t0) * 1e3
            tuned[method] = res
            rows.append(
                SummaryRow(
                    problem=problem_name,
                    method=method,
                    scale=alpha,
                    eps_target=eps,
                    iterations=res.iters,
                    wall_ms=wall,
                    gap=res.gap,
                    tuned_eta=res.eta,
                    status=res.label,
                    extra={"n_candidates": len(res.candidates)},
                )
            )
        ratio = tuned["hrgd"].iters / max(tuned["aepg"].iters, 1)
        rows[-1].extra["ratio_vs_hrgd"] = round(ratio, 3)
        return rows
    except EnergiaError as exc:
        return [_error_row(problem_name, "hrgd/aepg", alpha, eps, exc)]


def bench_quadratic(rows=QUAD_ROWS, cap=100_000, grid=None):
    """Tuned HRGD vs tuned AEPG on the ball-constrained quadratic."""
    jobs = [
        (alpha, (lambda a=alpha, e=eps: _conditioned_pair(
            "quadratic", quadratic_problem, a, e, cap, grid)))
        for alpha, eps in rows
    ]
    return _pool_map(jobs)


def bench_rosenbrock(rows=QUAD_ROWS, cap=100_000, grid=None):
    """Tuned HRGD vs tuned AEPG on the sign-constrained Rosenbrock function."""
    jobs = [
        (alpha, (lambda a=alpha, e=eps: _conditioned_pair(
            "rosenbrock", rosenbrock_problem, a, e, cap, grid)))
        for alpha, eps in rows
    ]
    return _pool_map(jobs)


# ---------------------------------------------------------------------------
# D-optimal design: AEPG vs Frank-Wolfe with and without away steps


def _doptimal_rows(m, n, seed, eps, cap, grid):
    try:
        problem = doptimal_problem(m=m, n=n, seed=seed)
        t0 = time.perf_counter()
        ref = run_fw(problem, gap_tol=1e-10, max_iter=cap, away=True)
        ref_ms = (time.perf_counter() - t0) * 1e3
        if ref.status != Status.CONVERGED:
            raise EnergiaError(
                f"away-step reference did not certify (gap {ref.gap_final:.3e})"
            )
        L_ref = float(ref.L_final)
        problem = with_reference(problem, L_ref)
        rows = [
            SummaryRow(
                problem="doptimal",
                method="fw_away",
                scale=float(m),
                eps_target=1e-10,
                iterations=ref.n_iter,
                wall_ms=ref_ms,
                gap=ref.gap_final,
                tuned_eta=float("nan"),
                status="converged",
                note="duality-gap reference",
                extra={"L_ref": L_ref, "n_away": ref.n_away},
            )
        ]

        t0 = time.perf_counter()
        res = tune_eta(
            _aepg_runner(problem, eps), grid=grid, cap=cap, pilot_caps=(500, 4_000)
        )
        wall = (time.perf_counter() - t0) * 1e3
        rows.append(
            SummaryRow(
                problem="doptimal",
                method="aepg",
                scale=float(m),
                eps_target=eps,
                iterations=res.iters,
                wall_ms=wall,
                gap=res.gap,
                tuned_eta=res.eta,
                status=res.label,
            )
        )

        budget = ref.n_iter  # same budget as the certified away-step run
        t0 = time.perf_counter()
        plain = run_fw(problem, gap_tol=1e-10, max_iter=budget, away=False)
        wall = (time.perf_counter() - t0) * 1e3
        plain_gap = abs(plain.L_final - L_ref)
        rows.append(
            SummaryRow(
                problem="doptimal",
                method="fw",
                scale=float(m),
                eps_target=eps,
                iterations=plain.n_iter,
                wall_ms=wall,
                gap=plain_gap,
                tuned_eta=float("nan"),
                status="converged" if plain_gap < eps else "target_missed",
                note=f"budget {budget} (matched to fw_away)",
            )
        )
        return rows
    except EnergiaError as exc:
        return [_error_row("doptimal", "all", float(m), eps, exc)]


def bench_doptimal(specs=((10, 100), (30, 300)), seed=42, eps=1e-7, cap=500_000, grid=None):
    """AEPG vs Frank-Wolfe variants on random design instances.

    Each ``(m, n)`` spec is solved to the away-step duality-gap certificate
    first; that value is the reference for the AEPG target and the plain FW
    run gets the same iteration budget as the certified away-step run.
    """
    jobs = [
        (float(m), (lambda mm=m, nn=n: _doptimal_rows(mm, nn, seed, eps, cap, grid)))
        for m, n in specs
    ]
    return _pool_map(jobs)


# ---------------------------------------------------------------------------
# Gaussian-mixture fitting: basin separation of Euclidean vs Wasserstein


# Fixed per-method steps for the mixture table.  The Euclidean pair stalls on
# the plateau at any step; the Wasserstein pair converges, with the energy
# variant preferring a larger base step since the energy factor shrinks the
# effective one.
MIXTURE_ETAS = {"gd": 0.5, "aegd": 0.5, "wngd": 0.5, "aepg": 1.0}


def _mixture_rows(grid_n, max_iter, tol):
    try:
        problem = mixture_problem(grid_n=grid_n)
        target = np.asarray(problem.objective.optimum[0], dtype=float)
        rows = []
        for method in ("gd", "aegd", "wngd", "aepg"):
            eta = MIXTURE_ETAS[method]
            t0 = time.perf_counter()
            if method in ("aepg", "aegd"):
                # aegd is the energy scheme without the metric: same driver,
                # identity preconditioner.
                pre = (
                    problem.default_preconditioner()
                    if method == "aepg"
                    else IdentityPreconditioner()
                )
                cfg = AepgConfig(eta=eta, max_iter=max_iter, tol=tol)
                tr = run_aepg(problem.objective, pre, cfg, problem.theta0)
            else:
                tr = run_fixed_step(method, problem, eta, max_iter=max_iter, tol=tol)
            wall = (time.perf_counter() - t0) * 1e3
            theta_end = np.asarray(tr.theta_last, dtype=float)
            dist = float(np.linalg.norm(theta_end - target))
            rows.append(
                SummaryRow(
                    problem="mixture",
                    method=method,
                    scale=float(grid_n),
                    eps_target=tol,
                    iterations=int(tr.k[-1]),
                    wall_ms=wall,
                    gap=abs(float(tr.L[-1])),
                    tuned_eta=eta,
                    status=tr.status.value,
                    extra={
                        "theta_1": float(theta_end[0]),
                        "theta_2": float(theta_end[1]),
                        "dist_to_target": dist,
                    },
                )
            )
        return rows
    except EnergiaError as exc:
        return [_error_row("mixture", "all", float(grid_n), tol, exc)]


def bench_mixture(grid_n=64, max_iter=800, tol=1e-8):
    """Terminal parameters of Euclidean vs Wasserstein-preconditioned runs.

    All four methods start from the two-basin initial point (4, 4.2); the
    report records where each terminates and its distance to the global
    fit (1, 3).
    """
    jobs = [(float(grid_n), lambda: _mixture_rows(grid_n, max_iter, tol))]
    return _pool_map(jobs)


# ---------------------------------------------------------------------------
# Report emission


_REPORT_COLUMNS = (
    "problem",
    "method",
    "scale",
    "eps_target",
    "iterations",
    "wall_ms",
    "gap",
    "tuned_eta",
    "status",
    "note",
)


def _row_dict(row):
    d = {c: getattr(row, c) for c in _REPORT_COLUMNS}
    for key in sorted(row.extra):
        d[key] = row.extra[key]
    return d


def write_report(rows, path, fmt="csv"):
    """Write summary rows ordered by row key; returns the path."""
    rows = sorted(rows, key=lambda r: r.row_key)
    dicts = [_row_dict(r) for r in rows]
    if fmt == "json":
        payload = {"version": 1, "rows": dicts}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
        return path
    if fmt != "csv":
        raise ConfigError(f"unknown report format {fmt!r}")
    columns = list(_REPORT_COLUMNS)
    for d in dicts:
        for k in d:
            if k not in columns:
                columns.append(k)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, restval="")
        writer.writeheader()
        for d in dicts:
            writer.writerow({k: _fmt_cell(v) for k, v in d.items()})
    return path


def _fmt_cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v
