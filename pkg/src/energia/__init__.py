"""Energy-adaptive preconditioned gradient descent on constrained domains.

The package splits into the adaptive stepper (:mod:`energia.stepper`),
Legendre barrier metrics (:mod:`energia.barriers`), metric preconditioners
and projections (:mod:`energia.preconditioners`), the Wasserstein
natural-gradient machinery (:mod:`energia.wngd`), the benchmark problems and
baselines (:mod:`energia.problems`), and the benchmark/verification harness
(:mod:`energia.bench`, :mod:`energia.verify`, :mod:`energia.cli`).
"""

from .errors import (
    BoundaryError,
    ConfigError,
    EnergiaError,
    InfeasibleStepError,
    NumericsError,
    SpdFactorizationError,
)
from .stepper import (
    AepgConfig,
    EnergyState,
    ObjectiveSpec,
    RunTrace,
    SmoothnessProfile,
    Status,
    StepBounds,
    StopMode,
    aepg_step,
    check_energy_identity,
    check_rate_bounds,
    compute_step_bounds,
    estimate_metric_range,
    run_aepg,
)
from .barriers import (
    ConstraintSet,
    LegendreBarrier,
    bregman_divergence,
    feasible_line_search,
)
from .preconditioners import (
    AffineConstraint,
    HrPreconditioner,
    IdentityPreconditioner,
    SimplexPreconditioner,
    kernel_basis,
    ngd_equivalence_check,
    projection_matrix,
)
from .wngd import (
    GaussianMixtureModel,
    Grid2D,
    WassersteinPreconditioner,
    WassersteinWorkspace,
    natural_direction,
    tangent_lift,
)
from .problems import (
    DoptimalData,
    ProblemInstance,
    baseline_step,
    doptimal_problem,
    doptimal_reference,
    first_order_residual,
    mixture_problem,
    problem_from_id,
    projected_pl_example,
    quadratic_problem,
    rosenbrock_problem,
    run_fixed_step,
    run_fw,
    with_reference,
)
from .bench import (
    SummaryRow,
    bench_doptimal,
    bench_mixture,
    bench_quadratic,
    bench_rosenbrock,
    tune_eta,
    write_report,
)
from .verify import CheckResult, run_suite, run_suites

__version__ = "0.1.0"

__all__ = [
    "AepgConfig",
    "AffineConstraint",
    "BoundaryError",
    "CheckResult",
    "ConfigError",
    "ConstraintSet",
    "DoptimalData",
    "EnergiaError",
    "EnergyState",
    "GaussianMixtureModel",
    "Grid2D",
    "HrPreconditioner",
    "IdentityPreconditioner",
    "InfeasibleStepError",
    "LegendreBarrier",
    "NumericsError",
    "ObjectiveSpec",
    "ProblemInstance",
    "RunTrace",
    "SimplexPreconditioner",
    "SmoothnessProfile",
    "SpdFactorizationError",
    "Status",
    "StepBounds",
    "StopMode",
    "SummaryRow",
    "WassersteinPreconditioner",
    "WassersteinWorkspace",
    "aepg_step",
    "baseline_step",
    "bench_doptimal",
    "bench_mixture",
    "bench_quadratic",
    "bench_rosenbrock",
    "bregman_divergence",
    "check_energy_identity",
    "check_rate_bounds",
    "compute_step_bounds",
    "estimate_metric_range",
    "doptimal_problem",
    "doptimal_reference",
    "feasible_line_search",
    "first_order_residual",
    "kernel_basis",
    "mixture_problem",
    "natural_direction",
    "ngd_equivalence_check",
    "problem_from_id",
    "projected_pl_example",
    "projection_matrix",
    "quadratic_problem",
    "rosenbrock_problem",
    "run_aepg",
    "run_fixed_step",
    "run_fw",
    "run_suite",
    "run_suites",
    "tangent_lift",
    "tune_eta",
    "with_reference",
    "write_report",
    "__version__",
]
