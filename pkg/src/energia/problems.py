"""Benchmark problems with analytic gradients, baseline optimizers, and the
projected-PL line example.

Problems
--------
``quadratic_problem``   ill-conditioned quadratic over a disc
``rosenbrock_problem``  Rosenbrock valley restricted to a sign-constrained quadrant
``doptimal_problem``    D-optimal design (min log-det) over the probability simplex
``mixture_problem``     Gaussian-mixture density fit driving the Wasserstein metric

Baselines: fixed-step gradient descent, fixed-step Hessian-Riemannian descent,
fixed-step Wasserstein natural gradient, the energy-adaptive identity scheme,
and Frank-Wolfe with and without away steps (simplex problems only).
"""

import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from .barriers import BallInequality, ConstraintSet, LegendreBarrier
from .errors import ConfigError, SpdFactorizationError
from .linalg import SpdFactor
from .preconditioners import (
    AffineConstraint,
    HrPreconditioner,
    IdentityPreconditioner,
    SimplexPreconditioner,
)
from .stepper import (
    EnergyState,
    ObjectiveSpec,
    Status,
    StopMode,
    _TraceBuilder,
    aepg_step,
)
from .wngd import GaussianMixtureModel, Grid2D, WassersteinPreconditioner, mixture_loss

__all__ = [
    "ProblemInstance",
    "quadratic_problem",
    "rosenbrock_problem",
    "DoptimalData",
    "doptimal_problem",
    "mixture_problem",
    "problem_from_id",
    "with_reference",
    "first_order_residual",
    "BASELINE_KINDS",
    "baseline_step",
    "run_fixed_step",
    "FwResult",
    "run_fw",
    "doptimal_reference",
    "projected_pl_example",
]


@dataclass
class ProblemInstance:
    """A benchmark problem: objective, domain description, start point.

    ``constraints`` (strict inequalities), ``affine`` (equalities) and
    ``barrier`` are None when absent.  ``extras`` carries problem-specific
    structure (design data, density model/grid) used by specialised solvers.
    """

    objective: ObjectiveSpec
    theta0: np.ndarray
    constraints: ConstraintSet = None
    affine: AffineConstraint = None
    barrier: LegendreBarrier = None
    alpha_cond: float = None
    name: str = ""
    extras: dict = None

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float)
        if self.extras is None:
            self.extras = {}
        if self.constraints is not None and not self.constraints.is_strictly_feasible(
            self.theta0
        ):
            raise ConfigError(f"{self.name}: theta0 is not strictly feasible")

    @property
    def dim(self):
        return self.theta0.size

    def default_preconditioner(self):
        """The metric this problem is normally run with.

        Simplex problems get the closed-form simplex metric, barrier problems
        the Hessian-Riemannian metric, density problems the Wasserstein
        information matrix, anything else the identity.
        """
        if "data" in self.extras:
            return SimplexPreconditioner()
        if "model" in self.extras:
            return WassersteinPreconditioner(
                self.extras["model"], self.extras["grid"], self.extras.get("lift_tol", 1e-8)
            )
        if self.barrier is not None:
            return HrPreconditioner(self.barrier, self.affine)
        return IdentityPreconditioner()


class _JointEval:
    """Cache the latest ``(L, grad)`` pair keyed by the iterate bytes.

    Optimizers evaluate value and gradient at the same point back to back;
    problems whose two quantities share expensive assembly wrap it once here.
    """

    def __init__(self, fn):
        self.fn = fn
        self._key = None
        self._out = None

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key != self._key:
            self._out = self.fn(theta)
            self._key = key
        return self._out


def quadratic_problem(alpha_cond=1.0):
    """Quadratic ``(x1-1)^2 + a (x2-1)^2`` over the disc ``(x1+0.5)^2 + (x2-1)^2 < 1``.

    The unconstrained minimizer (1, 1) lies outside the disc; the constrained
    optimum sits on the boundary at (0.5, 1) with value 0.25.  Start point
    (-1, 1.8).  ``alpha_cond`` sets the axis conditioning.

    The energy shift ``c`` is tied to the starting height, ``c = L(theta0)/16``.
    Scaling the shift with the objective keeps the initial energy budget
    proportional to the descent ahead of it: the total energy drained along a
    path grows like ``sqrt(alpha_cond)``, and a conditioning-independent shift
    starves the scheme on badly conditioned instances (the energy hits zero
    before the iterates reach the optimum).  The 1/16 fraction keeps the shift
    small enough that early steps near the start remain aggressive.
    """
    a = float(alpha_cond)
    if not a > 0:
        raise ConfigError(f"alpha_cond must be positive, got {alpha_cond}")
    theta0 = np.array([-1.0, 1.8])

    def value(t):
        return (t[0] - 1.0) ** 2 + a * (t[1] - 1.0) ** 2

    def grad(t):
        return np.array([2.0 * (t[0] - 1.0), 2.0 * a * (t[1] - 1.0)])

    ball = BallInequality.euclidean(np.array([-0.5, 1.0]), 1.0)
    cs = ConstraintSet((ball,), witness=theta0)
    objective = ObjectiveSpec(
        value,
        grad,
        c=value(theta0) / 16.0,
        optimum=(np.array([0.5, 1.0]), 0.25),
        rate_optimum=(np.array([1.0, 1.0]), 0.0),
        alpha=2.0 * max(1.0, a),
        mu=2.0 * min(1.0, a),
        name=f"quadratic(a={a:g})",
    )
    return ProblemInstance(
        objective,
        theta0,
        constraints=cs,
        barrier=LegendreBarrier("entropy", cs),
        alpha_cond=a,
        name="quadratic",
    )


def rosenbrock_problem(alpha_cond=100.0):
    """Rosenbrock ``(x1-1)^2 + a (x2-x1^2)^2`` on the quadrant ``x1 < 0 < x2``.

    The unconstrained minimizer (1, 1) is infeasible; the constrained minimum
    value is 1, attained at the corner (0, 0).  Start point (-0.5, 2).

    The energy shift is set to the full starting height, ``c = L(theta0)``.
    The descent path hugs the parabola ``x2 = x1^2`` where the gradient stays
    large, so the cumulative energy drain is far bigger than on a quadratic of
    comparable conditioning; a generous shift both raises the initial budget
    and damps the per-step drain (which scales like ``1/sqrt(L + c)``).  With
    a small shift the scheme stalls with exhausted energy partway down the
    valley for ``alpha_cond >= 100`` at every step size.
    """
    a = float(alpha_cond)
    if not a > 0:
        raise ConfigError(f"alpha_cond must be positive, got {alpha_cond}")
    theta0 = np.array([-0.5, 2.0])

    def value(t):
        return (t[0] - 1.0) ** 2 + a * (t[1] - t[0] ** 2) ** 2

    def grad(t):
        gap = t[1] - t[0] ** 2
        return np.array(
            [2.0 * (t[0] - 1.0) - 4.0 * a * t[0] * gap, 2.0 * a * gap]
        )

    cs = ConstraintSet.signs((-1.0, 1.0), witness=theta0)
    objective = ObjectiveSpec(
        value,
        grad,
        c=value(theta0),
        optimum=(np.array([0.0, 0.0]), 1.0),
        name=f"rosenbrock(a={a:g})",
    )
    return ProblemInstance(
        objective,
        theta0,
        constraints=cs,
        barrier=LegendreBarrier("entropy", cs),
        alpha_cond=a,
        name="rosenbrock",
    )


# ---------------------------------------------------------------------------
# D-optimal design


@dataclass(frozen=True)
class DoptimalData:
    """Design matrix for the D-optimal problem: rows are the test vectors ``u_i``."""

    U: np.ndarray
    seed: int

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] <= U.shape[1]:
            raise ConfigError(f"need n > m design rows, got shape {U.shape}")
        object.__setattr__(self, "U", U)

    @property
    def n(self):
        return self.U.shape[0]

    @property
    def m(self):
        return self.U.shape[1]

    @classmethod
    def generate(cls, m, n, seed):
        """Draw ``n`` standard-normal vectors in R^m, retrying (new seed offset)
        until the uniform-weight information matrix is comfortably SPD."""
        if not 0 < m < n:
            raise ConfigError(f"need 0 < m < n, got m={m}, n={n}")
        for attempt in range(8):
            s = int(seed) + attempt * 1_000_003
            U = np.random.default_rng(s).standard_normal((n, m))
            S0 = U.T @ U / n
            w = np.linalg.eigvalsh(S0)
            if w[0] > 1e-10 * max(w[-1], 1.0):
                return cls(U, int(seed))
        raise ConfigError(f"could not draw a full-rank {n}x{m} design from seed {seed}")

    def dump(self, path):
        """Round-trip-exact CSV: one metadata comment, then n rows of m values."""
        with open(path, "w", newline="") as fh:
            fh.write(f"# doptimal m={self.m} n={self.n} seed={self.seed}\n")
            for row in self.U:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            header = fh.readline()
            if not header.startswith("# doptimal "):
                raise ConfigError(f"{path} is not a design-data dump")
            meta = dict(tok.split("=") for tok in header.split()[2:])
            U = np.loadtxt(fh, delimiter=",", ndmin=2)
        if U.shape != (int(meta["n"]), int(meta["m"])):
            raise ConfigError(
                f"{path}: header says {meta['n']}x{meta['m']}, file holds {U.shape}"
            )
        return cls(U, int(meta["seed"]))


def _doptimal_eval(U):
    """Shared assembly for the log-det objective: returns ``theta -> (L, leverages)``."""
    n, m = U.shape

    def both(theta):
        if theta.size != n:
            raise ConfigError(f"design weight vector must have length {n}")
        S = (U * theta[:, None]).T @ U
        S = 0.5 * (S + S.T)
        try:
            f = SpdFactor(S, "weighted information matrix")
        except SpdFactorizationError as exc:
            support = np.flatnonzero(theta > 1e-12)
            raise SpdFactorizationError(
                f"information matrix singular on support of size {support.size} "
                f"(first indices {support[:8].tolist()}): {exc}"
            ) from exc
        lev = np.einsum("ij,ji->i", U, f.solve(U.T))
        return -f.logdet(), lev

    return both


def doptimal_problem(m=10, n=100, seed=42, data=None):
    """Minimum log-determinant design weighting over the probability simplex.

    ``L(theta) = -log det sum_i theta_i u_i u_i^T`` with gradient
    ``-u_i^T S^-1 u_i`` (negative leverage scores).  Start at uniform weights.
    The shift ``c`` uses the arithmetic-geometric-mean determinant bound so
    ``L + c >= 1`` on the whole simplex.
    """
    if data is None:
        data = DoptimalData.generate(m, n, seed)
    U = data.U
    n, m = data.n, data.m
    both = _JointEval(_doptimal_eval(U))
    norms = np.einsum("ij,ij->i", U, U)
    c = 1.0 + m * np.log(float(norms.max()) / m)

    theta0 = np.full(n, 1.0 / n)
    cs = ConstraintSet.positive_orthant(theta0)
    objective = ObjectiveSpec(
        lambda t: both(t)[0],
        lambda t: -both(t)[1],
        c=float(c),
        name=f"doptimal(m={m},n={n},seed={data.seed})",
    )
    return ProblemInstance(
        objective,
        theta0,
        constraints=cs,
        affine=AffineConstraint.simplex(n),
        barrier=LegendreBarrier("entropy", cs),
        name="doptimal",
        extras={"data": data, "leverages": lambda t: both(np.asarray(t, float))[1]},
    )


def mixture_problem(grid_n=64, lift_tol=1e-8):
    """Two-location Gaussian-mixture density fit on the square ``[0, 5]^2``.

    ``L(theta) = 0.5 * integral (rho(theta) - rho(theta*))^2`` with target
    ``theta* = (1, 3)``; the start point (4, 4.2) sits across a plateau that
    traps plain gradient descent.  The Wasserstein preconditioner is the
    intended metric; the problem is otherwise unconstrained.
    """
    model = GaussianMixtureModel()
    grid = Grid2D.square(0.0, 5.0, grid_n)
    both = _JointEval(lambda t: mixture_loss(model, grid, t))
    objective = ObjectiveSpec(
        lambda t: both(t)[0],
        lambda t: both(t)[1],
        c=1.0,
        optimum=(np.asarray(model.target_theta, dtype=float), 0.0),
        name=f"mixture(N={grid_n})",
    )
    return ProblemInstance(
        objective,
        np.array([4.0, 4.2]),
        name="mixture",
        extras={"model": model, "grid": grid, "lift_tol": lift_tol},
    )


def problem_from_id(pid, seed=42, grid_n=None):
    """Build a problem from a compact id: ``quad[:ALPHA]``, ``rosen[:ALPHA]``,
    ``doptimal[:MxN]``, ``mixture``.  ``seed`` feeds the design generator,
    ``grid_n`` overrides the mixture grid resolution."""
    head, _, arg = str(pid).partition(":")
    try:
        if head == "quad":
            return quadratic_problem(float(arg) if arg else 1.0)
        if head == "rosen":
            return rosenbrock_problem(float(arg) if arg else 100.0)
        if head == "doptimal":
            if arg:
                m_s, _, n_s = arg.partition("x")
                return doptimal_problem(int(m_s), int(n_s), seed)
            return doptimal_problem(seed=seed)
        if head == "mixture":
            if arg and grid_n is None:
                grid_n = int(arg)
            return mixture_problem(grid_n if grid_n else 64)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"malformed problem id {pid!r}: {exc}") from None
    raise ConfigError(
        f"unknown problem id {pid!r}; expected quad[:A], rosen[:A], doptimal[:MxN], mixture"
    )


def with_reference(problem, L_star, theta_star=None):
    """Copy of ``problem`` whose objective carries ``(theta_star, L_star)`` as
    the optimum, enabling gap-based stopping against an external reference."""
    objective = replace(problem.objective, optimum=(theta_star, float(L_star)))
    return replace(problem, objective=objective)


def first_order_residual(problem, active_tol=1e-8):
    """KKT stationarity residual at the recorded optimum (None when unknown).

    Decomposes ``grad L(theta*)`` over the active inequality gradients (with
    nonnegative multipliers) and the equality rows (free multipliers) and
    returns the least-squares residual norm; 0 means the first-order
    conditions hold.
    """
    if problem.objective.optimum is None or problem.objective.optimum[0] is None:
        return None
    theta_star = np.asarray(problem.objective.optimum[0], dtype=float)
    g = np.asarray(problem.objective.grad(theta_star), dtype=float)
    cols = []
    if problem.constraints is not None:
        for con in problem.constraints.constraints:
            if abs(con.value(theta_star)) <= active_tol:
                cols.append(con.grad(theta_star))
    if problem.affine is not None:
        for row in problem.affine.B:
            cols.append(row)
            cols.append(-row)  # free-sign multiplier as a nonnegative pair
    if not cols:
        return float(np.linalg.norm(g))
    A = np.column_stack(cols)
    _, resid = scipy.optimize.nnls(A, g)
    return float(resid)


# ---------------------------------------------------------------------------
# Fixed-step baselines


BASELINE_KINDS = ("gd", "hrgd", "wngd", "aegd", "fw", "fw_away")


def _direction_engine(kind, problem):
    """Map ``(theta, grad L) -> descent direction`` for the fixed-step baselines."""
    if kind == "gd":
        return lambda theta, g: g
    if kind == "hrgd":
        if problem.barrier is None and "data" not in problem.extras:
            raise ConfigError(f"{problem.name!r} has no barrier metric for hrgd")
        precond = problem.default_preconditioner()
        if isinstance(precond, WassersteinPreconditioner):
            raise ConfigError("use kind='wngd' for the Wasserstein metric")
        return precond.apply
    if kind == "wngd":
        if "model" not in problem.extras:
            raise ConfigError(f"{problem.name!r} has no density model for wngd")
        return problem.default_preconditioner().apply
    raise ConfigError(f"unknown fixed-step baseline {kind!r}")


def baseline_step(kind, problem, state, eta=None, engine=None):
    """One update of a baseline optimizer; returns the next :class:`EnergyState`.

    ``gd``/``hrgd``/``wngd`` take ``theta - eta * T(theta) grad L`` with the
    respective metric and carry ``r`` unchanged; ``aegd`` is the
    energy-adaptive identity scheme (same code path as the preconditioned
    stepper); ``fw``/``fw_away`` take one Frank-Wolfe step with exact line
    search (``eta`` ignored) and require a simplex design problem.
    """
    if kind not in BASELINE_KINDS:
        raise ConfigError(f"unknown baseline kind {kind!r}; choose from {BASELINE_KINDS}")
    if kind == "aegd":
        v = problem.objective.grad_l(state.theta)
        return aepg_step(state, v, eta)
    if kind in ("fw", "fw_away"):
        if "data" not in problem.extras:
            raise ConfigError("Frank-Wolfe baselines require a simplex design problem")
        theta, _, _ = _fw_step(
            problem.extras["data"].U,
            problem.extras["leverages"],
            state.theta,
            state.k,
            away=(kind == "fw_away"),
        )
        return EnergyState(theta=theta, r=state.r, k=state.k + 1)
    if eta is None or not eta > 0:
        raise ConfigError(f"{kind} needs a positive step size, got {eta}")
    if engine is None:
        engine = _direction_engine(kind, problem)
    g = np.asarray(problem.objective.grad(state.theta), dtype=float)
    d = np.asarray(engine(state.theta, g), dtype=float)
    return EnergyState(theta=state.theta - eta * d, r=state.r, k=state.k + 1)


def run_fixed_step(kind, problem, eta, max_iter=10_000, tol=1e-8, theta0=None,
                   keep_iterates=False):
    """Run a fixed-step baseline to tolerance or budget; returns a RunTrace.

    Stopping mirrors the adaptive driver: objective gap when the optimum is
    known, gradient norm otherwise.  A step leaving the closed feasible
    region (or breaking the metric solve) ends the run with status
    ``infeasible_step``/``numerical_failure`` at the last good iterate; a
    coordinate parked exactly on its bound stays frozen there by the
    degenerate metric.  The energy column is NaN since these baselines
    carry no energy.
    """
    if kind not in ("gd", "hrgd", "wngd"):
        raise ConfigError(
            f"run_fixed_step drives gd/hrgd/wngd; use run_aepg or run_fw for {kind!r}"
        )
    engine = _direction_engine(kind, problem)
    objective = problem.objective
    theta = np.array(problem.theta0 if theta0 is None else theta0, dtype=float)
    L_star = None if objective.optimum is None else float(objective.optimum[1])
    builder = _TraceBuilder(max_iter, theta.size, keep_iterates)
    if max_iter == 0:
        return builder.finalize(Status.BUDGET_EXHAUSTED, theta, np.nan, objective.c, eta)
    status = Status.BUDGET_EXHAUSTED
    try:
        for k in range(max_iter + 1):
            L = float(objective.value(theta))
            g = np.asarray(objective.grad(theta), dtype=float)
            if not (np.isfinite(L) and np.all(np.isfinite(g))):
                status = Status.NUMERICAL_FAILURE
                break
            d = np.asarray(engine(theta, g), dtype=float)
            builder.add_record(k, L, np.nan, float(np.linalg.norm(d)), float(np.linalg.norm(g)), theta)
            if L_star is not None:
                done = abs(L - L_star) < tol
            else:
                done = float(np.linalg.norm(g)) < tol
            if done:
                status = Status.CONVERGED
                break
            if k == max_iter:
                break
            theta_new = theta - eta * d
            if not np.all(np.isfinite(theta_new)):
                status = Status.NUMERICAL_FAILURE
                break
            if problem.constraints is not None and (
                problem.constraints.min_margin(theta_new) < 0.0
            ):
                status = Status.INFEASIBLE_STEP
                break
            builder.add_step(k, float(np.linalg.norm(theta_new - theta)), eta, eta)
            theta = theta_new
    except SpdFactorizationError:
        status = Status.NUMERICAL_FAILURE
    return builder.finalize(status, problem.theta0 if theta0 is None else theta0,
                            np.nan, objective.c, eta)


# ---------------------------------------------------------------------------
# Frank-Wolfe on the simplex


def _fw_toward_gamma(m, lam_j, k):
    """Exact line-search step toward vertex j: Newton-polished closed form.

    Along ``theta(g) = (1-g) theta + g e_j`` the objective change is
    ``phi(g) = -(m-1) log(1-g) - log(1 + g (lam_j - 1))`` whose minimizer is
    ``(lam_j - m) / (m (lam_j - 1))``; the 2/(k+2) schedule is the fallback
    when the model step is unusable.
    """
    q = lam_j - 1.0
    hi = 1.0 if m == 1 else 1.0 - 1e-12
    if q <= 0.0 or lam_j <= m:
        return min(2.0 / (k + 2.0), hi)
    g = (lam_j - m) / (m * q) if m > 1 else 1.0
    for _ in range(20):
        d1 = (m - 1.0) / (1.0 - g) - q / (1.0 + q * g)
        d2 = (m - 1.0) / (1.0 - g) ** 2 + q * q / (1.0 + q * g) ** 2
        if d2 <= 0.0 or not np.isfinite(d1):
            break
        step = d1 / d2
        if abs(step) < 1e-17:
            break
        g = min(max(g - step, 0.0), hi)
    if not (0.0 < g <= hi):
        g = min(2.0 / (k + 2.0), hi)
    return g


def _fw_away_gamma(m, lam_a, cap, k):
    """Exact line-search step away from vertex a, capped at the feasible max.

    Along ``theta(g) = (1+g) theta - g e_a`` the change is
    ``phi(g) = -(m-1) log(1+g) - log(1 + g (1 - lam_a))``; for ``lam_a <= 1``
    the objective decreases all the way to the cap (drop step), otherwise the
    interior minimizer ``(m - lam_a)/(m (lam_a - 1))`` applies.
    """
    q = 1.0 - lam_a
    if lam_a <= 1.0:
        return cap
    g = min((m - lam_a) / (m * (lam_a - 1.0)), cap)
    for _ in range(20):
        d1 = -(m - 1.0) / (1.0 + g) - q / (1.0 + q * g)
        d2 = (m - 1.0) / (1.0 + g) ** 2 + q * q / (1.0 + q * g) ** 2
        if d2 <= 0.0 or not np.isfinite(d1):
            break
        step = d1 / d2
        if abs(step) < 1e-17:
            break
        g = min(max(g - step, 0.0), cap)
    if not (0.0 < g <= cap) or not np.isfinite(g):
        g = min(2.0 / (k + 2.0), cap)
    return g


def _fw_step(U, leverages, theta, k, away):
    """One Frank-Wolfe update; returns ``(theta_next, gap, used_away)``.

    The toward vertex maximizes the leverage score (ties break to the smallest
    index); with ``away`` the support vertex of minimal leverage is left
    instead whenever its dual gap exceeds the toward gap.
    """
    n, m = U.shape
    lam = np.asarray(leverages(theta), dtype=float)
    j = int(np.argmax(lam))
    toward_gap = float(lam[j]) - m
    if toward_gap <= 0.0:
        return theta, toward_gap, False
    if away:
        support = np.flatnonzero(theta > 0.0)
        if support.size > 1:
            a = int(support[np.argmin(lam[support])])
            away_gap = m - float(lam[a])
            if away_gap > toward_gap and theta[a] < 1.0:
                cap = theta[a] / (1.0 - theta[a])
                gamma = _fw_away_gamma(m, float(lam[a]), cap, k)
                theta_next = (1.0 + gamma) * theta - gamma * _unit(n, a)
                if gamma >= cap * (1.0 - 1e-12):
                    theta_next[a] = 0.0  # drop: leave the support exactly
                theta_next = np.maximum(theta_next, 0.0)
                return theta_next / theta_next.sum(), toward_gap, True
    gamma = _fw_toward_gamma(m, float(lam[j]), k)
    theta_next = (1.0 - gamma) * theta + gamma * _unit(n, j)
    return theta_next / theta_next.sum(), toward_gap, False


def _unit(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


@dataclass
class FwResult:
    """Frank-Wolfe run record: per-iteration objective and duality gap."""

    status: Status
    theta: np.ndarray
    L: np.ndarray
    gap: np.ndarray
    n_iter: int
    n_away: int
    wall_ms: float

    @property
    def L_final(self):
        return float(self.L[-1])

    @property
    def gap_final(self):
        return float(self.gap[-1])

    @property
    def support(self):
        return np.flatnonzero(self.theta > 0.0)


def run_fw(problem, gap_tol=1e-10, max_iter=200_000, away=True, theta0=None):
    """Frank-Wolfe on a simplex design problem until the duality gap certifies
    ``L - L* <= gap_tol`` (convexity) or the budget runs out.

    With ``away=True`` the classic away-step variant is used (linear
    convergence on polytopes); without it the toward-only method stalls at a
    sublinear rate and serves as the contrast baseline.
    """
    if "data" not in problem.extras:
        raise ConfigError("run_fw requires a simplex design problem")
    if not gap_tol > 0:
        raise ConfigError(f"gap_tol must be positive, got {gap_tol}")
    U = problem.extras["data"].U
    leverages = problem.extras["leverages"]
    n, m = U.shape
    theta = np.full(n, 1.0 / n) if theta0 is None else np.array(theta0, dtype=float)
    L_hist = np.empty(max_iter + 1)
    gap_hist = np.empty(max_iter + 1)
    n_away = 0
    status = Status.BUDGET_EXHAUSTED
    t0 = time.perf_counter()
    k_final = 0
    for k in range(max_iter + 1):
        L_hist[k] = float(problem.objective.value(theta))
        lam = np.asarray(leverages(theta), dtype=float)
        gap_hist[k] = float(lam.max()) - m
        k_final = k
        if gap_hist[k] <= gap_tol:
            status = Status.CONVERGED
            break
        if k == max_iter:
            break
        theta, _, used_away = _fw_step(U, leverages, theta, k, away)
        n_away += int(used_away)
    wall_ms = (time.perf_counter() - t0) * 1e3
    return FwResult(
        status=status,
        theta=theta,
        L=L_hist[: k_final + 1].copy(),
        gap=gap_hist[: k_final + 1].copy(),
        n_iter=k_final,
        n_away=n_away,
        wall_ms=wall_ms,
    )


def doptimal_reference(problem, gap_tol=1e-10, max_iter=500_000):
    """Certified reference value for a design problem via away-step Frank-Wolfe.

    Returns the :class:`FwResult`; on convergence ``L_final`` upper-bounds the
    optimum and exceeds it by at most ``gap_tol``.
    """
    result = run_fw(problem, gap_tol=gap_tol, max_iter=max_iter, away=True)
    if result.status != Status.CONVERGED:
        raise ConfigError(
            f"reference run did not certify: gap {result.gap_final:.3e} after "
            f"{result.n_iter} iterations"
        )
    return result


# ---------------------------------------------------------------------------
# Projected-PL line example


def projected_pl_example(a, b, alpha, beta, theta):
    """Both sides of the projected Polyak-Lojasiewicz identity on a line.

    For ``L = 0.5 (beta theta1^2 + alpha theta2^2)`` restricted to
    ``a theta1 + b theta2 = 1``, the tangential projection ``P`` of the
    gradient satisfies ``||P^T grad L||^2 = 2 mu (L - L*)`` exactly with
    ``mu = (a^2 alpha + b^2 beta) / (a^2 + b^2)``.

    Returns ``(||P^T grad L||^2, L - L*, mu)``.
    """
    a, b, alpha, beta = map(float, (a, b, alpha, beta))
    if a == 0.0 or b == 0.0:
        raise ConfigError("need a nondegenerate line: a b != 0")
    if not alpha >= beta > 0.0:
        raise ConfigError(f"need alpha >= beta > 0, got alpha={alpha}, beta={beta}")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2,):
        raise ConfigError("theta must be a 2-vector")
    residual = abs(a * theta[0] + b * theta[1] - 1.0)
    if residual > 1e-9 * max(1.0, abs(a) + abs(b)):
        raise ConfigError(f"theta violates the line constraint by {residual:.3e}")
    normal = np.array([a, b])
    g = np.array([beta * theta[0], alpha * theta[1]])
    pg = g - normal * (float(normal @ g) / float(normal @ normal))
    denom = a * a * alpha + b * b * beta
    L = 0.5 * (beta * theta[0] ** 2 + alpha * theta[1] ** 2)
    L_star = alpha * beta / (2.0 * denom)
    mu = denom / (a * a + b * b)
    return float(pg @ pg), L - L_star, mu
