"""Energy-adaptive preconditioned gradient descent.

The scheme tracks an auxiliary energy ``r_k`` alongside the iterate:

    v_k       = T(theta_k) grad l(theta_k),      l = sqrt(L + c)
    r_{k+1}   = r_k / (1 + 2 eta ||v_k||^2)
    theta_{k+1} = theta_k - 2 eta r_{k+1} v_k

The energy obeys the exact identity
``r_{k+1}^2 = r_k^2 - (r_{k+1} - r_k)^2 - ||theta_{k+1} - theta_k||^2 / eta``,
which bounds the squared path length by ``eta r_0^2`` unconditionally.  This
module implements the step, a run driver with feasibility safeguarding, the
step-size thresholds, and check routines that certify the identity and the
convergence-rate envelopes on recorded traces.
"""

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .barriers import feasible_line_search
from .errors import (
    BoundaryError,
    ConfigError,
    EnergiaError,
    InfeasibleStepError,
    NumericsError,
)

__all__ = [
    "Status",
    "StopMode",
    "ObjectiveSpec",
    "SmoothnessProfile",
    "EnergyState",
    "AepgConfig",
    "RunTrace",
    "TRACE_COLUMNS",
    "aepg_step",
    "run_aepg",
    "StepBounds",
    "compute_step_bounds",
    "EnergyCheck",
    "check_energy_identity",
    "RateCheck",
    "check_rate_bounds",
    "estimate_metric_range",
]


class Status(str, Enum):
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget_exhausted"
    INFEASIBLE_STEP = "infeasible_step"
    NUMERICAL_FAILURE = "numerical_failure"


class StopMode(str, Enum):
    OBJECTIVE_GAP = "objective_gap"
    GRADIENT_NORM = "gradient_norm"
    PROJECTED_GRADIENT_NORM = "projected_gradient_norm"
    ITERATION_BUDGET = "iteration_budget"


@dataclass
class ObjectiveSpec:
    """Objective ``L`` with gradient and the shift ``c`` defining ``l = sqrt(L + c)``.

    Parameters
    ----------
    value, grad : callable
        ``L(theta)`` and ``grad L(theta)``.
    c : float
        Shift making ``L + c`` strictly positive on the domain of interest.
    optimum : tuple or None
        ``(theta_star, L_star)`` used by gap stopping and rate checks;
        ``theta_star`` may be None when only the optimal value is known.
    rate_optimum : tuple or None
        ``(theta_star, L_star)`` with ``grad L(theta_star) = 0``; supplied
        separately when the stopping optimum is a constrained point whose
        gradient does not vanish.
    alpha : float or None
        Smoothness constant of ``L`` when known.
    mu : float or None
        Strong-convexity / Polyak-Lojasiewicz constant when known.
    """

    value: callable
    grad: callable
    c: float = 1.0
    optimum: tuple = None
    rate_optimum: tuple = None
    alpha: float = None
    mu: float = None
    name: str = ""

    def __post_init__(self):
        if not np.isfinite(self.c):
            raise ConfigError(f"c must be finite, got {self.c}")
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError(f"alpha must be nonnegative, got {self.alpha}")

    @property
    def l_star(self):
        if self.optimum is None:
            return None
        return float(np.sqrt(self.optimum[1] + self.c))

    def l_of(self, L):
        """``sqrt(L + c)``, guarding against a shift that is too small."""
        s = L + self.c
        if not s > 0.0:
            raise ConfigError(
                f"L + c = {s:.6g} is not positive; increase the shift c (L={L:.6g}, c={self.c:.6g})"
            )
        return float(np.sqrt(s))

    def l(self, theta):
        return self.l_of(float(self.value(theta)))

    def grad_l(self, theta):
        """``grad l = grad L / (2 l)``."""
        l = self.l(theta)
        return np.asarray(self.grad(theta), dtype=float) / (2.0 * l)


@dataclass(frozen=True)
class SmoothnessProfile:
    """Constants entering the step-size and rate guarantees.

    ``alpha`` is the (Euclidean) smoothness of ``L``; ``lam1 <= lamn`` bound the
    spectrum of the metric ``G = T^-1`` along the run (identity preconditioner:
    both 1); ``l_star = inf sqrt(L + c)``; ``r0`` is the initial energy the
    thresholds refer to (defaults at use sites to ``l(theta0)``).
    """

    alpha: float
    lam1: float
    lamn: float
    l_star: float
    r0: float = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if not (0 < self.lam1 <= self.lamn):
            raise ConfigError(f"need 0 < lam1 <= lamn, got {self.lam1}, {self.lamn}")
        if self.l_star <= 0:
            raise ConfigError("l_star must be positive")
        if self.r0 is not None and not self.r0 > 0:
            raise ConfigError("r0 must be positive when given")


@dataclass
class EnergyState:
    """Iterate, energy and iteration counter."""

    theta: np.ndarray
    r: float
    k: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if not (np.isfinite(self.r) and self.r > 0):
            raise ConfigError(f"energy r must be finite and positive, got {self.r}")


@dataclass
class AepgConfig:
    """Run configuration.

    ``eta_star`` caps the feasibility line search and defaults to ``eta`` (so
    interior steps reduce to the constant-step scheme); ``eps_feas`` is the
    per-constraint margin fraction the line search must retain.  ``stop_mode``
    ``None`` resolves to objective-gap stopping when the objective carries an
    optimum and gradient-norm stopping otherwise.
    """

    eta: float
    r0: float = None
    max_iter: int = 10_000
    tol: float = 1e-8
    stop_mode: StopMode = None
    eps_feas: float = 0.5
    eta_star: float = None

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ConfigError(f"eta must be finite and positive, got {self.eta}")
        if self.r0 is not None and not (np.isfinite(self.r0) and self.r0 > 0):
            raise ConfigError(f"r0 must be finite and positive, got {self.r0}")
        if not (isinstance(self.max_iter, (int, np.integer)) and self.max_iter >= 0):
            raise ConfigError(f"max_iter must be a nonnegative integer, got {self.max_iter}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.stop_mode is not None:
            self.stop_mode = StopMode(self.stop_mode)
        if not 0.0 <= self.eps_feas <= 0.5:
            raise ConfigError(f"eps_feas must lie in [0, 0.5], got {self.eps_feas}")
        if self.eta_star is not None and self.eta_star < self.eta:
            raise ConfigError(
                f"eta_star={self.eta_star} must be at least eta={self.eta}"
            )


TRACE_COLUMNS = ("k", "L", "r", "v_norm", "grad_norm", "dtheta_norm", "eta_eff", "t_us")


@dataclass
class RunTrace:
    """Per-iteration record of a run; arrays are frozen after construction.

    Record ``k`` holds the state at iterate ``theta_k``; the step columns
    (``dtheta_norm``, ``eta_eff`` and the internal ``eta_base``) describe the
    step leaving ``theta_k`` and are NaN on the terminal record.  ``eta_eff``
    is the effective gradient-descent step ``eta_k r_{k+1} / l(theta_k)``.
    """

    status: Status
    k: np.ndarray
    L: np.ndarray
    r: np.ndarray
    v_norm: np.ndarray
    grad_norm: np.ndarray
    dtheta_norm: np.ndarray
    eta_eff: np.ndarray
    t_us: np.ndarray
    eta_base: np.ndarray
    theta_first: np.ndarray
    theta_last: np.ndarray
    r0: float
    c: float
    eta_nominal: float
    thetas: np.ndarray = None

    def __post_init__(self):
        for name in (*TRACE_COLUMNS, "eta_base"):
            arr = getattr(self, name)
            arr.flags.writeable = False
        if self.thetas is not None:
            self.thetas.flags.writeable = False

    @property
    def n_records(self):
        return self.k.size

    @property
    def n_steps(self):
        return max(self.k.size - 1, 0)

    def final_L(self):
        return float(self.L[-1]) if self.n_records else np.nan

    def wall_ms(self):
        return float(self.t_us[-1]) / 1000.0 if self.n_records else 0.0

    def to_csv(self, path):
        """Write the trace table with the canonical header."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(self.n_records):
                row = [
                    str(int(self.k[i])),
                    *(
                        format(float(getattr(self, c)[i]), ".17g")
                        for c in TRACE_COLUMNS[1:-1]
                    ),
                    str(int(self.t_us[i])),
                ]
                fh.write(",".join(row) + "\n")

    def validate(self):
        """Check structural and energy invariants; raise EnergiaError on violation."""
        R = self.n_records
        if R == 0:
            return
        if not np.array_equal(self.k, np.arange(R)):
            raise EnergiaError("trace records are not contiguous")
        if not np.all(self.r > 0):
            raise EnergiaError("trace contains a nonpositive energy value")
        dr = np.diff(self.r)
        if np.any(dr > 0):
            raise EnergiaError("energy r increased along the trace")
        # Strict decrease is required whenever the update denominator exceeds 1
        # in floating point; elsewhere r may plateau exactly.
        for i in range(R - 1):
            eta = self.eta_base[i]
            if not np.isfinite(eta):
                continue
            denom = 1.0 + 2.0 * eta * self.v_norm[i] ** 2
            if denom > 1.0 and not self.r[i + 1] < self.r[i]:
                raise EnergiaError(f"energy failed to decrease strictly at step {i}")
        if np.any(~np.isfinite(self.L)) or np.any(~np.isfinite(self.grad_norm)):
            raise EnergiaError("trace contains non-finite objective records")


class _TraceBuilder:
    def __init__(self, max_iter, dim, keep_iterates):
        cap = max_iter + 1
        self.k = np.zeros(cap, dtype=np.int64)
        self.L = np.full(cap, np.nan)
        self.r = np.full(cap, np.nan)
        self.v_norm = np.full(cap, np.nan)
        self.grad_norm = np.full(cap, np.nan)
        self.dtheta_norm = np.full(cap, np.nan)
        self.eta_eff = np.full(cap, np.nan)
        self.eta_base = np.full(cap, np.nan)
        self.t_us = np.zeros(cap, dtype=np.int64)
        self.thetas = np.zeros((cap, dim)) if keep_iterates else None
        self.count = 0
        self.last_theta = None
        self.t0 = time.perf_counter_ns()

    def add_record(self, k, L, r, v_norm, grad_norm, theta):
        i = self.count
        self.k[i] = k
        self.L[i] = L
        self.r[i] = r
        self.v_norm[i] = v_norm
        self.grad_norm[i] = grad_norm
        self.t_us[i] = (time.perf_counter_ns() - self.t0) // 1000
        if self.thetas is not None:
            self.thetas[i] = theta
        self.last_theta = np.array(theta)
        self.count += 1

    def add_step(self, k, dtheta_norm, eta_base, eta_eff):
        self.dtheta_norm[k] = dtheta_norm
        self.eta_base[k] = eta_base
        self.eta_eff[k] = eta_eff

    def finalize(self, status, theta_first, r0, c, eta_nominal):
        R = self.count
        if R > 0:
            # No step leaves the final record.
            self.dtheta_norm[R - 1] = np.nan
            self.eta_base[R - 1] = np.nan
            self.eta_eff[R - 1] = np.nan
        return RunTrace(
            status=status,
            k=self.k[:R].copy(),
            L=self.L[:R].copy(),
            r=self.r[:R].copy(),
            v_norm=self.v_norm[:R].copy(),
            grad_norm=self.grad_norm[:R].copy(),
            dtheta_norm=self.dtheta_norm[:R].copy(),
            eta_eff=self.eta_eff[:R].copy(),
            t_us=self.t_us[:R].copy(),
            eta_base=self.eta_base[:R].copy(),
            theta_first=np.array(theta_first),
            theta_last=(
                np.array(theta_first) if self.last_theta is None else self.last_theta
            ),
            r0=r0,
            c=c,
            eta_nominal=eta_nominal,
            thetas=None if self.thetas is None else self.thetas[:R].copy(),
        )


def aepg_step(state, v, eta):
    """One energy-adaptive update from ``state`` along the direction ``v``.

    Returns a new :class:`EnergyState`; the energy update is applied first so
    the parameter moves with ``r_{k+1}``:
    ``r' = r / (1 + 2 eta ||v||^2)``, ``theta' = theta - 2 eta r' v``.
    """
    if not (np.isfinite(eta) and eta > 0):
        raise ConfigError(f"eta must be finite and positive, got {eta}")
    v = np.asarray(v, dtype=float)
    w = float(v @ v)
    if not np.isfinite(w):
        raise NumericsError("non-finite direction in aepg_step")
    r_new = state.r / (1.0 + 2.0 * eta * w)
    theta_new = state.theta - (2.0 * eta * r_new) * v
    if not np.all(np.isfinite(theta_new)):
        raise NumericsError("non-finite iterate produced by aepg_step")
    return EnergyState(theta=theta_new, r=r_new, k=state.k + 1)


def run_aepg(objective, preconditioner, config, theta0, feasibility=None, keep_iterates=False):
    """Drive the energy-adaptive scheme from ``theta0`` until stopping.

    Parameters
    ----------
    objective : ObjectiveSpec
    preconditioner : Preconditioner
        Supplies ``v = T(theta) grad l``; its ``affine_constraint`` (if any) is
        re-verified on every iterate.
    config : AepgConfig
    theta0 : ndarray
        Starting point; must be strictly feasible when ``feasibility`` is given.
    feasibility : ConstraintSet or None
        When present, each step size comes from the margin-retaining line
        search capped at ``config.eta_star``.
    keep_iterates : bool
        Store the full iterate matrix on the trace (small problems only).

    Returns
    -------
    RunTrace
        Status ``converged``, ``budget_exhausted``, ``infeasible_step`` or
        ``numerical_failure``.  ``max_iter = 0`` yields an empty trace with
        status ``budget_exhausted``.
    """
    theta = np.array(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ConfigError("theta0 contains non-finite entries")
    if feasibility is not None and not feasibility.is_strictly_feasible(theta):
        raise ConfigError(
            f"theta0 is not strictly feasible (min margin {feasibility.min_margin(theta):.3e})"
        )
    mode = config.stop_mode
    if mode is None:
        mode = (
            StopMode.OBJECTIVE_GAP if objective.optimum is not None else StopMode.GRADIENT_NORM
        )
    if mode == StopMode.OBJECTIVE_GAP and objective.optimum is None:
        raise ConfigError("objective_gap stopping requires objective.optimum")
    eta_star = config.eta_star if config.eta_star is not None else config.eta
    builder = _TraceBuilder(config.max_iter, theta.size, keep_iterates)
    r = np.nan  # set on the first record
    r0 = np.nan
    if config.max_iter == 0:
        return builder.finalize(
            Status.BUDGET_EXHAUSTED, theta, config.r0 or np.nan, objective.c, config.eta
        )

    L_star = None if objective.optimum is None else float(objective.optimum[1])
    status = Status.BUDGET_EXHAUSTED
    try:
        for k in range(config.max_iter + 1):
            L = float(objective.value(theta))
            if not np.isfinite(L):
                raise NumericsError(f"objective non-finite at iteration {k}")
            if L_star is not None and L < L_star - 1e-10:
                raise EnergiaError(
                    f"objective {L!r} fell below the stated optimum {L_star!r}; "
                    "the optimum metadata is inconsistent"
                )
            l = objective.l_of(L)
            g = np.asarray(objective.grad(theta), dtype=float)
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"gradient non-finite at iteration {k}")
            if k == 0:
                r = float(config.r0) if config.r0 is not None else l
                r0 = r
            v = np.asarray(preconditioner.apply(theta, g / (2.0 * l)), dtype=float)
            if not np.all(np.isfinite(v)):
                raise NumericsError(f"preconditioned direction non-finite at iteration {k}")
            v_norm = float(np.linalg.norm(v))
            g_norm = float(np.linalg.norm(g))
            builder.add_record(k, L, r, v_norm, g_norm, theta)

            if mode == StopMode.OBJECTIVE_GAP:
                done = abs(L - L_star) < config.tol
            elif mode == StopMode.GRADIENT_NORM:
                done = 2.0 * l * v_norm < config.tol
            elif mode == StopMode.PROJECTED_GRADIENT_NORM:
                pg = preconditioner.metric_apply(theta, v)
                done = 2.0 * l * float(np.linalg.norm(pg)) < config.tol
            else:
                done = False
            if done:
                status = Status.CONVERGED
                break
            if k == config.max_iter:
                status = Status.BUDGET_EXHAUSTED
                break

            if feasibility is not None:
                eta_k = feasible_line_search(
                    theta, v, r, feasibility, eps_feas=config.eps_feas, eta_star=eta_star
                )
            else:
                eta_k = config.eta
            w = v_norm * v_norm
            denom = 1.0 + 2.0 * eta_k * w
            if not np.isfinite(denom):
                raise NumericsError(f"overflow in ||v||^2 at iteration {k}")
            r_new = r / denom
            theta_new = theta - (2.0 * eta_k * r_new) * v
            if not np.all(np.isfinite(theta_new)):
                raise NumericsError(f"non-finite iterate at iteration {k}")
            affine = preconditioner.affine_constraint
            if affine is not None:
                drift = affine.max_residual(theta_new)
                if drift > 1e-10 * max(1.0, float(np.abs(affine.b).max())):
                    raise EnergiaError(
                        f"equality constraint drift {drift:.3e} at iteration {k}"
                    )
            builder.add_step(
                k,
                float(np.linalg.norm(theta_new - theta)),
                eta_k,
                eta_k * r_new / l,
            )
            theta = theta_new
            r = r_new
    except (BoundaryError, InfeasibleStepError):
        status = Status.INFEASIBLE_STEP
    except NumericsError:
        status = Status.NUMERICAL_FAILURE

    return builder.finalize(status, theta0, r0, objective.c, config.eta)


# ---------------------------------------------------------------------------
# Step-size thresholds


@dataclass(frozen=True)
class StepBounds:
    """Step-size thresholds derived from a smoothness profile.

    ``eta_s`` guarantees the energy stays bounded away from zero,
    ``eta_0`` guarantees unimpeded first-order descent; ``recommended`` is
    their minimum.  ``guaranteed`` is False when ``eta_s <= 0``, in which case
    the thresholds exist but certify nothing (the bound is vacuous, not an
    error).
    """

    eta_s: float
    eta_0: float
    recommended: float
    guaranteed: bool
    profile: SmoothnessProfile
    r0: float

    def r_floor(self, eta):
        """Energy lower bound ``alpha r0^2 (eta_s - eta) / (4 l* lam1)`` for ``eta < eta_s``."""
        p = self.profile
        if p.alpha == 0.0:
            return np.inf if eta < self.eta_s else 0.0
        return (p.alpha * self.r0**2 / (4.0 * p.l_star * p.lam1)) * (self.eta_s - eta)


def compute_step_bounds(profile, l_theta0, r0=None):
    """Thresholds ``eta_s`` and ``eta_0`` for the energy-adaptive scheme.

    Parameters
    ----------
    profile : SmoothnessProfile
    l_theta0 : float
        ``sqrt(L(theta0) + c)``.
    r0 : float, optional
        Initial energy; defaults to ``profile.r0`` and then to ``l_theta0``.

    Notes
    -----
    ``eta_s = (4 l* lam1 / (alpha r0^2)) (r0 - (l(theta0) - l*) / lam1)`` and
    ``eta_0 = lam1 l* / (alpha r0)``.  A zero-curvature profile (``alpha = 0``)
    makes both thresholds infinite.  ``eta_s <= 0`` (possible when ``r0``
    undershoots the initial objective gap) is reported via ``guaranteed=False``.
    """
    if l_theta0 <= 0:
        raise ConfigError("l(theta0) must be positive")
    if r0 is None:
        r0 = profile.r0 if profile.r0 is not None else l_theta0
    if r0 <= 0:
        raise ConfigError("r0 must be positive")
    p = profile
    if p.alpha == 0.0:
        return StepBounds(np.inf, np.inf, np.inf, True, p, r0)
    eta_s = (4.0 * p.l_star * p.lam1 / (p.alpha * r0**2)) * (
        r0 - (l_theta0 - p.l_star) / p.lam1
    )
    eta_0 = p.lam1 * p.l_star / (p.alpha * r0)
    guaranteed = eta_s > 0.0
    recommended = min(eta_s, eta_0) if guaranteed else np.nan
    return StepBounds(eta_s, eta_0, recommended, guaranteed, p, r0)


# ---------------------------------------------------------------------------
# Trace certification


@dataclass(frozen=True)
class EnergyCheck:
    """Result of the exact energy-identity audit of a trace."""

    max_residual: float
    n_steps: int
    path_length_sq: float
    path_bound: float
    path_ok: bool
    monotone_ok: bool

    @property
    def ok(self):
        return self.path_ok and self.monotone_ok


def check_energy_identity(trace, eta=None, identity_tol=1e-12):
    """Audit ``r_{k+1}^2 = r_k^2 - (r_{k+1}-r_k)^2 - ||dtheta_k||^2/eta_k`` on a trace.

    Parameters
    ----------
    trace : RunTrace
    eta : float or ndarray, optional
        Per-step base step sizes; defaults to the trace's recorded values.

    Returns
    -------
    EnergyCheck
        ``max_residual`` is the largest relative residual
        ``|r_{k+1}^2 - r_k^2 + (r_{k+1}-r_k)^2 + ||dtheta_k||^2/eta_k| / max(r_k^2, 1)``;
        the squared path length is compared against ``max(eta_k) r0^2``.
    """
    R = trace.n_records
    if R <= 1:
        return EnergyCheck(0.0, 0, 0.0, 0.0, True, True)
    if eta is None:
        etas = trace.eta_base[: R - 1]
    else:
        etas = np.broadcast_to(np.asarray(eta, dtype=float), (R - 1,))
    if np.any(~np.isfinite(etas)):
        raise ConfigError("trace has steps with unknown eta; pass eta explicitly")
    r = trace.r
    d = trace.dtheta_norm[: R - 1]
    resid = np.abs(
        r[1:] ** 2 - r[:-1] ** 2 + (r[1:] - r[:-1]) ** 2 + d**2 / etas
    ) / np.maximum(r[:-1] ** 2, 1.0)
    path = float(np.sum(d**2))
    bound = float(np.max(etas)) * trace.r0**2
    monotone = bool(np.all(np.diff(r) <= 0.0))
    return EnergyCheck(
        max_residual=float(resid.max()),
        n_steps=R - 1,
        path_length_sq=path,
        path_bound=bound,
        path_ok=path <= bound * (1.0 + 1e-12),
        monotone_ok=monotone,
    )


@dataclass(frozen=True)
class RateCheck:
    """Per-iteration audit of a convergence-rate envelope on a trace."""

    regime: str
    n_checked: int
    violations: np.ndarray
    worst_margin: float
    bounds: np.ndarray
    values: np.ndarray
    envelope_ok: bool
    envelope_margin: float

    @property
    def ok(self):
        return self.violations.size == 0 and self.envelope_ok


_REGIMES = ("general", "pl", "convex", "projected_pl")


def check_rate_bounds(trace, profile, objective, regime, slack=1e-9):
    """Certify a convergence-rate envelope on every recorded iteration.

    Regimes
    -------
    ``general``
        ``min_{j<k} ||grad L_j||^2 <= 2 r0 lamn^2 (max_{j<k} L_j + c) / (eta r_k k)``.
    ``pl`` / ``projected_pl``
        ``L_k - L* <= exp(-c0 k r_k / lamn) (L_0 - L*)`` with
        ``c0 = mu eta / l(theta_0)``; ``mu`` is the (projected) PL constant
        from ``objective.mu``.
    ``convex``
        ``L_k - L* <= c1 lamn ||theta_0 - theta*||^2 / (k r_k)`` with
        ``c1 = 2 l(theta_0) / eta``; requires a stationary optimum
        (``grad L(theta*) = 0`` validated to 1e-6).

    For line-search traces the constant ``eta`` is replaced by ``min_k eta_k``
    in the rate constants and ``max_k eta_k`` in the smoothness envelope
    ``L_k <= L_0 + alpha eta r0^2 / 2``, which preserves every inequality.

    Returns a :class:`RateCheck`; a violation is a ``value`` exceeding its
    ``bound`` by more than ``slack * max(1, bound)``.
    """
    if regime not in _REGIMES:
        raise ConfigError(f"unknown regime {regime!r}; choose from {_REGIMES}")
    R = trace.n_records
    if R <= 1:
        empty = np.array([])
        return RateCheck(regime, 0, empty.astype(int), np.inf, empty, empty, True, np.inf)
    etas = trace.eta_base[: R - 1]
    if np.any(~np.isfinite(etas)):
        raise ConfigError("trace has steps with unknown eta")
    eta_lo = float(etas.min())
    eta_hi = float(etas.max())
    r = trace.r
    L = trace.L
    k = np.arange(1, R)
    c = trace.c
    l0 = float(np.sqrt(L[0] + c))

    if regime == "general":
        running_max_L = np.maximum.accumulate(L)[:-1]
        running_min_g2 = np.minimum.accumulate(trace.grad_norm**2)[:-1]
        bounds = 2.0 * trace.r0 * profile.lamn**2 * (running_max_L + c) / (
            eta_lo * r[1:] * k
        )
        values = running_min_g2
    elif regime in ("pl", "projected_pl"):
        if objective.mu is None:
            raise ConfigError(f"regime {regime!r} requires objective.mu")
        opt = objective.rate_optimum if regime == "pl" and objective.rate_optimum else objective.optimum
        if opt is None:
            raise ConfigError(f"regime {regime!r} requires an optimum value")
        L_star = float(opt[1])
        c0 = objective.mu * eta_lo / l0
        bounds = np.exp(-c0 * k * r[1:] / profile.lamn) * (L[0] - L_star)
        values = L[1:] - L_star
    else:  # convex
        opt = objective.rate_optimum or objective.optimum
        if opt is None or opt[0] is None:
            raise ConfigError("convex regime requires a stationary optimum point")
        theta_star = np.asarray(opt[0], dtype=float)
        L_star = float(opt[1])
        gstar = float(np.linalg.norm(np.asarray(objective.grad(theta_star), dtype=float)))
        g0 = float(np.linalg.norm(np.asarray(objective.grad(trace.theta_first), dtype=float)))
        if gstar > 1e-6 * max(1.0, g0):
            raise ConfigError(
                f"convex regime needs grad L(theta*) = 0; got norm {gstar:.3e}"
            )
        c1 = 2.0 * l0 / eta_lo
        dist2 = float(np.sum((trace.theta_first - theta_star) ** 2))
        bounds = c1 * profile.lamn * dist2 / (k * r[1:])
        values = L[1:] - L_star

    margins = bounds - values
    bad = np.flatnonzero(values > bounds + slack * np.maximum(1.0, np.abs(bounds)))
    env_bound = L[0] + 0.5 * profile.alpha * eta_hi * trace.r0**2
    env_margin = float(env_bound - L.max())
    env_ok = bool(L.max() <= env_bound + slack * max(1.0, abs(env_bound)))
    return RateCheck(
        regime=regime,
        n_checked=int(k.size),
        violations=bad + 1,
        worst_margin=float(margins.min()),
        bounds=bounds,
        values=values,
        envelope_ok=env_ok,
        envelope_margin=env_margin,
    )


def estimate_metric_range(preconditioner, thetas):
    """Empirical spectral range of the metric ``G = T^-1`` along recorded iterates.

    Builds ``G`` column-by-column through ``metric_apply`` at each iterate
    (restricted to the tangent space of the preconditioner's affine constraint
    when present) and returns ``(lam1, lamn)`` as min/max eigenvalues over the
    sample.  These are labeled estimates for use in rate-check profiles, exact
    only when the metric is constant.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    n = thetas.shape[1]
    eye = np.eye(n)
    lam_lo, lam_hi = np.inf, -np.inf
    affine = preconditioner.affine_constraint
    J = None
    if affine is not None:
        Q, _ = np.linalg.qr(affine.B.T, mode="complete")
        J = Q[:, affine.m:]
    for theta in thetas:
        G = np.column_stack([preconditioner.metric_apply(theta, eye[:, i]) for i in range(n)])
        G = 0.5 * (G + G.T)
        if J is not None:
            G = J.T @ G @ J
        w = np.linalg.eigvalsh(G)
        lam_lo = min(lam_lo, float(w[0]))
        lam_hi = max(lam_hi, float(w[-1]))
    return lam_lo, lam_hi
