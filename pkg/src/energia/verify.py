"""Self-contained verification suites for the library's mathematical claims.

Each suite builds fresh problems, runs short audits and returns a list of
:class:`CheckResult` records (invariant name, tolerance, observed extreme,
pass flag).  Suites hold no module state and can be invoked repeatedly in any
order; randomized suites draw from generators seeded per call, so repeated
invocations see identical samples.

Suites
------
``energy``
    Step-wise energy identity and monotone energy decay of the adaptive
    scheme across problems and base steps spanning ``1e-3 .. 100``.
``bounds``
    Cumulative squared path length against the a-priori energy budget, and
    the energy floor guaranteed below the ``eta_s`` threshold.
``projections``
    Algebra of the metric-orthogonal projection: idempotency, range inside
    the constraint kernel, self-adjointness in the metric inner product.
``wngd``
    Wasserstein machinery: lift residuals, information-matrix symmetry and
    positivity, and agreement of the least-squares parameter direction with
    the metric solve of the compatible (mean-projected) gradient.
``pl_example``
    Exactness of the projected Polyak-Lojasiewicz identity on the linear
    slice of an anisotropic quadratic.
``ngd_equiv``
    Agreement of the restricted-metric direction with the chart-parametrized
    natural-gradient direction on random barrier instances.
"""

from dataclasses import dataclass

import numpy as np

from .barriers import ConstraintSet, LegendreBarrier
from .errors import ConfigError
from .linalg import SpdFactor
from .preconditioners import (
    AffineConstraint,
    IdentityPreconditioner,
    ngd_equivalence_check,
    projection_matrix,
)
from .problems import (
    doptimal_problem,
    mixture_problem,
    projected_pl_example,
    quadratic_problem,
    rosenbrock_problem,
)
from .stepper import (
    AepgConfig,
    ObjectiveSpec,
    SmoothnessProfile,
    check_energy_identity,
    compute_step_bounds,
    run_aepg,
)
from .wngd import (
    GaussianMixtureModel,
    Grid2D,
    WassersteinWorkspace,
    natural_direction,
    weighted_gradient,
)

__all__ = [
    "CheckResult",
    "SUITES",
    "run_suite",
    "run_suites",
    "render_report",
    "suite_energy",
    "suite_bounds",
    "suite_projections",
    "suite_wngd",
    "suite_pl_example",
    "suite_ngd_equiv",
]


@dataclass(frozen=True)
class CheckResult:
    """One audited invariant: its tolerance and the observed extreme value."""

    invariant: str
    tolerance: float
    observed: float
    passed: bool
    detail: str = ""

    @property
    def margin(self):
        """Distance to the tolerance; positive iff the check passed with room."""
        return self.tolerance - self.observed


def _upper(invariant, tol, observed, detail=""):
    """Check of the form ``observed <= tol``."""
    observed = float(observed)
    return CheckResult(invariant, float(tol), observed, bool(observed <= tol), detail)


def _lower(invariant, floor, observed, detail=""):
    """Check of the form ``observed >= floor`` (reported margin is signed)."""
    observed = float(observed)
    return CheckResult(invariant, float(floor), observed, bool(observed >= floor), detail)


# ---------------------------------------------------------------------------
# energy / bounds


_ENERGY_ETAS = (1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0)


def _energy_problems():
    """Representative instance per problem family, with a short step cap."""
    return (
        (quadratic_problem(1.0), 400),
        (quadratic_problem(100.0), 400),
        (rosenbrock_problem(100.0), 400),
        (doptimal_problem(m=10, n=100, seed=42), 300),
        (mixture_problem(grid_n=32), 100),
    )


def _energy_traces(problem, cap):
    for eta in _ENERGY_ETAS:
        cfg = AepgConfig(eta=eta, max_iter=cap, tol=1e-14)
        yield eta, run_aepg(
            problem.objective,
            problem.default_preconditioner(),
            cfg,
            problem.theta0,
            feasibility=problem.constraints,
        )


def suite_energy():
    """Energy identity residuals and monotone decay across problems and steps."""
    out = []
    for problem, cap in _energy_problems():
        worst_resid = 0.0
        worst_jump = 0.0
        n_steps = 0
        for _, tr in _energy_traces(problem, cap):
            if tr.n_steps == 0:
                continue
            chk = check_energy_identity(tr)
            worst_resid = max(worst_resid, chk.max_residual)
            dr = np.diff(tr.r)
            if dr.size:
                worst_jump = max(worst_jump, float(dr.max()))
            n_steps += chk.n_steps
        name = problem.objective.name
        detail = f"{len(_ENERGY_ETAS)} steps x {n_steps} iterations"
        out.append(_upper(f"energy identity residual [{name}]", 1e-12, worst_resid, detail))
        out.append(
            _upper(f"energy monotone nonincreasing [{name}]", 0.0, max(worst_jump, 0.0), detail)
        )
    return out


def suite_bounds():
    """Path-length budget and the guaranteed energy floor below ``eta_s``."""
    out = []
    for problem, cap in _energy_problems():
        worst_ratio = 0.0
        for _, tr in _energy_traces(problem, cap):
            if tr.n_steps == 0:
                continue
            chk = check_energy_identity(tr)
            if chk.path_bound > 0:
                worst_ratio = max(worst_ratio, chk.path_length_sq / chk.path_bound)
        name = problem.objective.name
        out.append(
            _upper(
                f"squared path length within eta r0^2 [{name}]",
                1.0 + 1e-12,
                worst_ratio,
                "ratio of sum ||dtheta||^2 to max(eta_k) r0^2",
            )
        )

    # Energy floor on a plain quadratic with identity metric, where every
    # constant in the threshold is exact: L = ||theta - 1||^2, c = 1.
    target = np.array([1.0, 1.0])
    obj = ObjectiveSpec(
        lambda t: float(np.sum((t - target) ** 2)),
        lambda t: 2.0 * (t - target),
        c=1.0,
        optimum=(target, 0.0),
        alpha=2.0,
        mu=2.0,
        name="plain quadratic",
    )
    theta0 = np.array([3.0, 2.0])
    l0 = obj.l(theta0)
    profile = SmoothnessProfile(alpha=2.0, lam1=1.0, lamn=1.0, l_star=obj.l_star)
    bounds = compute_step_bounds(profile, l0)
    if not bounds.guaranteed:
        raise ConfigError("energy-floor case lost its guarantee; revisit the constants")
    for eta in (0.25 * bounds.eta_s, 0.5 * bounds.eta_s, 0.9 * bounds.eta_s):
        cfg = AepgConfig(eta=float(eta), max_iter=4000, tol=1e-14)
        tr = run_aepg(obj, IdentityPreconditioner(), cfg, theta0)
        floor = bounds.r_floor(eta)
        out.append(
            _lower(
                f"energy floor r >= r_floor at eta={eta:.3g}",
                0.0,
                float(tr.r[-1]) - floor,
                f"r_end={tr.r[-1]:.6g}, floor={floor:.6g}, eta_s={bounds.eta_s:.6g}",
            )
        )
    return out


# ---------------------------------------------------------------------------
# projections


def _random_constraint(rng, n):
    """Full-rank constraint matrix with 1..min(n-1, 3) rows."""
    m = int(rng.integers(1, min(n - 1, 3) + 1))
    while True:
        B = rng.standard_normal((m, n))
        if np.linalg.matrix_rank(B) == m:
            return B


def suite_projections(n_trials=100, seed=11):
    """Projection algebra ``P^2 = P``, ``B P = 0``, ``G P = P^T G``."""
    rng = np.random.default_rng(seed)
    worst = {"idempotent": 0.0, "kernel": 0.0, "self_adjoint": 0.0}
    for n in (2, 5, 20):
        for _ in range(n_trials):
            A = rng.standard_normal((n, n))
            G = A.T @ A + 0.1 * np.eye(n)
            B = _random_constraint(rng, n)
            P = projection_matrix(G, B)
            scale = max(1.0, float(np.abs(P).max()))
            worst["idempotent"] = max(
                worst["idempotent"], float(np.abs(P @ P - P).max()) / scale
            )
            worst["kernel"] = max(
                worst["kernel"],
                float(np.abs(B @ P).max()) / max(1.0, float(np.abs(B).max())),
            )
            gp = G @ P
            worst["self_adjoint"] = max(
                worst["self_adjoint"],
                float(np.abs(gp - gp.T).max()) / max(1.0, float(np.abs(gp).max())),
            )
    detail = f"{3 * n_trials} random (G, B) draws, n in (2, 5, 20)"
    return [
        _upper("projection idempotent P^2 = P", 1e-10, worst["idempotent"], detail),
        _upper("projection range in ker B (B P = 0)", 1e-10, worst["kernel"], detail),
        _upper("projection G-self-adjoint (G P = P^T G)", 1e-10, worst["self_adjoint"], detail),
    ]


# ---------------------------------------------------------------------------
# wngd


def suite_wngd(n_points=20, grid_n=32, seed=7):
    """Lift residuals, information-matrix structure, direction consistency.

    The metric-solve reference uses the compatible parameter gradient
    ``g_i = <drho_i - mean, dL/drho> dx^2``: the continuity equation only
    transports mean-zero perturbations, so the mean-projected chain rule is
    the gradient the lifted frame can represent.
    """
    model = GaussianMixtureModel()
    grid = Grid2D.square(0.0, 5.0, grid_n)
    rng = np.random.default_rng(seed)
    worst_resid = 0.0
    worst_asym = 0.0
    min_eig = np.inf
    worst_dir = 0.0
    for _ in range(n_points):
        theta = rng.uniform(0.8, 4.3, size=2)
        ws = WassersteinWorkspace.build(model, grid, theta)
        worst_resid = max(worst_resid, float(ws.lift_residuals.max()))
        worst_asym = max(worst_asym, float(np.abs(ws.G - ws.G.T).max()))
        eigs = np.linalg.eigvalsh(ws.G)
        min_eig = min(min_eig, float(eigs.min() / max(eigs.max(), 1e-300)))
        diff = model.rho_cells(grid, theta) - model.target_cells(grid)
        p_lsq = natural_direction(ws, weighted_gradient(ws, diff)).p
        g_proj = grid.cell_weight * (ws.drho_projected.T @ diff)
        p_metric = -SpdFactor(ws.G, "information matrix").solve(g_proj)
        denom = max(float(np.abs(p_lsq).max()), 1e-300)
        worst_dir = max(worst_dir, float(np.abs(p_lsq - p_metric).max()) / denom)
    detail = f"{n_points} parameter draws on a {grid_n}x{grid_n} grid"
    return [
        _upper("tangent lift relative residual", 1e-8, worst_resid, detail),
        _upper("information matrix symmetric", 0.0, worst_asym, detail),
        _lower("information matrix positive definite (rel eig)", 1e-12, min_eig, detail),
        _upper("direction match: least squares vs metric solve", 1e-8, worst_dir, detail),
    ]


# ---------------------------------------------------------------------------
# pl_example


def suite_pl_example(n_samples=100, seed=3):
    """Exact projected Polyak-Lojasiewicz ratio on the constrained quadratic."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        a, b = (float(s * (0.2 + 1.8 * u)) for s, u in zip(rng.choice([-1.0, 1.0], 2), rng.random(2)))
        beta = 0.2 + 1.3 * rng.random()
        alpha = beta + 3.0 * rng.random()
        t = rng.uniform(-3.0, 3.0)
        theta = np.array([(1.0 - b * t) / a, t])
        num, gap, mu = projected_pl_example(a, b, alpha, beta, theta)
        dev = abs(num - 2.0 * mu * gap) / max(2.0 * mu * gap, 1e-2 * (1.0 + mu))
        worst = max(worst, dev)
    return [
        _upper(
            "projected PL identity ||P grad L||^2 = 2 mu (L - L*)",
            1e-10,
            worst,
            f"{n_samples} random lines and points",
        )
    ]


# ---------------------------------------------------------------------------
# ngd_equiv


def suite_ngd_equiv(n_trials=25, seed=5):
    """Restricted metric vs chart-parametrized natural gradient directions."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    count = 0
    for n in (3, 6, 10):
        for _ in range(n_trials):
            theta = rng.uniform(0.3, 2.0, size=n)
            m = int(rng.integers(1, 3))
            B = rng.standard_normal((m, n))
            if np.linalg.matrix_rank(B) < m:
                continue
            constraint = AffineConstraint(B, B @ theta)
            cs = ConstraintSet.signs((1.0,) * n, witness=theta)
            barrier = LegendreBarrier("entropy", cs)
            A = rng.standard_normal((n, n))
            Q = A.T @ A + 0.5 * np.eye(n)
            t_ref = rng.standard_normal(n)
            res = ngd_equivalence_check(
                barrier, constraint, lambda th: Q @ (th - t_ref), theta
            )
            worst = max(worst, res.relative)
            count += 1
    return [
        _upper(
            "restricted metric direction == chart natural gradient",
            1e-9,
            worst,
            f"{count} random barrier instances, n in (3, 6, 10)",
        )
    ]


# ---------------------------------------------------------------------------
# driver


SUITES = {
    "energy": suite_energy,
    "bounds": suite_bounds,
    "projections": suite_projections,
    "wngd": suite_wngd,
    "pl_example": suite_pl_example,
    "ngd_equiv": suite_ngd_equiv,
}


def run_suite(name):
    """Run one suite by name; returns its list of :class:`CheckResult`."""
    try:
        fn = SUITES[name]
    except KeyError:
        raise ConfigError(
            f"unknown suite {name!r}; choose from {', '.join(SUITES)}"
        ) from None
    return fn()


def run_suites(names=None):
    """Run several suites (all by default); returns ``{name: [CheckResult]}``."""
    if names is None:
        names = list(SUITES)
    return {name: run_suite(name) for name in names}


def render_report(results):
    """Plain-text report: one line per invariant with tolerance and extreme."""
    lines = []
    for name, checks in results.items():
        lines.append(f"suite {name}")
        for c in checks:
            flag = "PASS" if c.passed else "FAIL"
            line = (
                f"  [{flag}] {c.invariant}: observed {c.observed:.3e}"
                f" (tolerance {c.tolerance:.3e})"
            )
            if c.detail:
                line += f" -- {c.detail}"
            lines.append(line)
    n_fail = sum(1 for checks in results.values() for c in checks if not c.passed)
    total = sum(len(checks) for checks in results.values())
    lines.append(f"{total - n_fail}/{total} checks passed")
    return "\n".join(lines)
