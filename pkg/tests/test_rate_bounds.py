"""Convergence-rate envelopes audited per iteration on recorded runs."""

import numpy as np
import pytest

from energia import (
    AepgConfig,
    ConfigError,
    IdentityPreconditioner,
    ObjectiveSpec,
    SmoothnessProfile,
    check_rate_bounds,
    estimate_metric_range,
    quadratic_problem,
    run_aepg,
)


def _scalar_quadratic():
    # L = t^2, c = 1: alpha = 2, PL constant mu = 2, stationary optimum at 0.
    return ObjectiveSpec(
        value=lambda t: float(t[0] ** 2),
        grad=lambda t: 2.0 * t,
        c=1.0,
        optimum=(np.zeros(1), 0.0),
        alpha=2.0,
        mu=2.0,
        name="scalar quadratic",
    )


def _scalar_profile():
    return SmoothnessProfile(alpha=2.0, lam1=1.0, lamn=1.0, l_star=1.0)


def _scalar_trace(eta, max_iter=2000):
    cfg = AepgConfig(eta=eta, max_iter=max_iter, tol=1e-14)
    return run_aepg(_scalar_quadratic(), IdentityPreconditioner(), cfg, np.array([1.0]))


@pytest.mark.parametrize("regime", ["pl", "general", "convex"])
@pytest.mark.parametrize("eta", [0.01, 0.05, 0.1])
def test_scalar_quadratic_all_regimes_hold(regime, eta):
    tr = _scalar_trace(eta)
    chk = check_rate_bounds(tr, _scalar_profile(), _scalar_quadratic(), regime)
    assert chk.ok, (regime, eta, chk.violations[:5], chk.worst_margin)
    assert chk.worst_margin > 0
    assert chk.n_checked == tr.n_steps
    assert chk.envelope_ok


def test_constrained_run_with_estimated_metric():
    # Barrier-metric run: lam1/lamn come from sampling the metric along the
    # path; the general and projected-PL envelopes must hold with them.
    p = quadratic_problem(100.0)
    cfg = AepgConfig(eta=0.01, max_iter=800, tol=1e-14)
    tr = run_aepg(p.objective, p.default_preconditioner(), cfg, p.theta0,
                  feasibility=p.constraints, keep_iterates=True)
    lam1, lamn = estimate_metric_range(p.default_preconditioner(), tr.thetas[::40])
    assert 0 < lam1 <= lamn
    prof = SmoothnessProfile(alpha=float(p.objective.alpha), lam1=lam1, lamn=lamn,
                             l_star=p.objective.l_star)
    for regime in ("general", "projected_pl"):
        chk = check_rate_bounds(tr, prof, p.objective, regime)
        assert chk.ok, (regime, chk.violations[:5], chk.worst_margin)


def test_doctored_objective_violates_pl():
    import dataclasses

    tr = _scalar_trace(0.05)
    L_bad = tr.L.copy()
    L_bad[50:] += 0.5  # pretend the run stalled at a positive gap
    doctored = dataclasses.replace(tr, L=L_bad)
    chk = check_rate_bounds(doctored, _scalar_profile(), _scalar_quadratic(), "pl")
    assert not chk.ok
    assert chk.violations.size > 0
    assert chk.violations.min() >= 50  # 1-based step indices past the doctoring


def test_violation_indices_are_one_based():
    import dataclasses

    tr = _scalar_trace(0.05, max_iter=50)
    L_bad = tr.L.copy()
    L_bad[1:] = L_bad[0]  # no descent at all
    doctored = dataclasses.replace(tr, L=L_bad)
    chk = check_rate_bounds(doctored, _scalar_profile(), _scalar_quadratic(), "pl")
    assert chk.violations.size > 0
    assert chk.violations.min() >= 1


def test_unknown_regime_rejected():
    tr = _scalar_trace(0.05, max_iter=10)
    with pytest.raises(ConfigError, match="unknown regime"):
        check_rate_bounds(tr, _scalar_profile(), _scalar_quadratic(), "superlinear")


def test_pl_requires_mu_and_optimum():
    tr = _scalar_trace(0.05, max_iter=10)
    no_mu = ObjectiveSpec(value=lambda t: float(t[0] ** 2), grad=lambda t: 2.0 * t,
                          c=1.0, optimum=(np.zeros(1), 0.0))
    with pytest.raises(ConfigError, match="mu"):
        check_rate_bounds(tr, _scalar_profile(), no_mu, "pl")
    no_opt = ObjectiveSpec(value=lambda t: float(t[0] ** 2), grad=lambda t: 2.0 * t,
                           c=1.0, mu=2.0)
    with pytest.raises(ConfigError, match="optimum"):
        check_rate_bounds(tr, _scalar_profile(), no_opt, "pl")


def test_convex_requires_stationary_optimum():
    # When the recorded optimum is a boundary point with grad L != 0 (and no
    # unconstrained stationary point is supplied), the 1/k certificate does
    # not apply and the check must refuse rather than report spuriously.
    obj = ObjectiveSpec(value=lambda t: float(t[0] ** 2), grad=lambda t: 2.0 * t,
                        c=1.0, optimum=(np.ones(1), 0.0))
    cfg = AepgConfig(eta=0.05, max_iter=20, tol=1e-12,
                     stop_mode="iteration_budget")
    tr = run_aepg(obj, IdentityPreconditioner(), cfg, np.array([2.0]))
    with pytest.raises(ConfigError, match="grad L"):
        check_rate_bounds(tr, _scalar_profile(), obj, "convex")


def test_convex_prefers_rate_optimum():
    # The constrained quadratic's optimum sits on the boundary (grad != 0),
    # but the factory also records the unconstrained stationary point, which
    # the convex certificate picks up.
    p = quadratic_problem(1.0)
    cfg = AepgConfig(eta=0.05, max_iter=200, tol=1e-12)
    tr = run_aepg(p.objective, p.default_preconditioner(), cfg, p.theta0,
                  feasibility=p.constraints, keep_iterates=True)
    lam1, lamn = estimate_metric_range(p.default_preconditioner(), tr.thetas[::20])
    prof = SmoothnessProfile(alpha=float(p.objective.alpha), lam1=lam1, lamn=lamn,
                             l_star=p.objective.l_star)
    chk = check_rate_bounds(tr, prof, p.objective, "convex")
    assert chk.ok, (chk.violations[:5], chk.worst_margin)


def test_empty_trace_passes_vacuously():
    p = _scalar_quadratic()
    cfg = AepgConfig(eta=0.1, max_iter=0)
    tr = run_aepg(p, IdentityPreconditioner(), cfg, np.array([1.0]))
    chk = check_rate_bounds(tr, _scalar_profile(), p, "pl")
    assert chk.ok
    assert chk.n_checked == 0
