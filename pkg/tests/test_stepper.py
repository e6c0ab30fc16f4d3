"""Tests for the energy-adaptive stepper: single steps, traces, stopping."""

import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from energia import (
    AepgConfig,
    ConfigError,
    EnergiaError,
    EnergyState,
    IdentityPreconditioner,
    ObjectiveSpec,
    Status,
    StopMode,
    aepg_step,
    quadratic_problem,
    run_aepg,
)


def _quad_1d(c=1.0):
    # L(t) = t^2 with known minimum at the origin.
    return ObjectiveSpec(
        value=lambda t: float(t[0] ** 2),
        grad=lambda t: 2.0 * t,
        c=c,
        optimum=(np.zeros(1), 0.0),
        alpha=2.0,
        mu=2.0,
        name="scalar quadratic",
    )


def test_one_step_hand_values():
    # L = t^2, c = 1, theta0 = 1, eta = 0.1.  By hand: l0 = sqrt(2),
    # v0 = theta0/l0 = 1/sqrt(2), so ||v||^2 = 1/2 and
    #   r1 = sqrt(2) / (1 + 2*0.1*0.5) = sqrt(2)/1.1
    #   theta1 = 1 - 2*0.1*r1/sqrt(2) = 1 - 0.2/1.1 = 9/11.
    cfg = AepgConfig(eta=0.1, max_iter=1)
    tr = run_aepg(_quad_1d(), IdentityPreconditioner(), cfg, np.array([1.0]))
    assert tr.status is Status.BUDGET_EXHAUSTED
    assert tr.n_steps == 1
    assert_allclose(tr.r[0], np.sqrt(2.0), rtol=1e-15)
    assert_allclose(tr.r[1], np.sqrt(2.0) / 1.1, rtol=1e-15)
    assert_allclose(tr.theta_last[0], 9.0 / 11.0, rtol=1e-14)
    assert_allclose(tr.v_norm[0], 1.0 / np.sqrt(2.0), rtol=1e-15)
    # eta_eff = eta * r_{k+1} / l(theta_k)
    assert_allclose(tr.eta_eff[0], 0.1 * tr.r[1] / np.sqrt(2.0), rtol=1e-15)


def test_single_step_helper_matches_driver():
    # aepg_step and run_aepg share the update; iterating the helper by hand
    # must reproduce the trace bit for bit.
    obj = _quad_1d()
    cfg = AepgConfig(eta=0.3, max_iter=6, tol=1e-16)
    tr = run_aepg(obj, IdentityPreconditioner(), cfg, np.array([1.5]), keep_iterates=True)

    state = EnergyState(theta=np.array([1.5]), r=obj.l(np.array([1.5])))
    for k in range(6):
        assert state.r == tr.r[k]
        assert state.theta[0] == tr.thetas[k, 0]
        state = aepg_step(state, obj.grad_l(state.theta), 0.3)
    assert state.r == tr.r[6]


def test_objective_scaling_invariance():
    # Scaling (L, c) -> (s L, s c) and eta -> eta / s leaves the iterates
    # unchanged: the energy picks up a factor sqrt(s) that cancels in the
    # parameter update.
    s = 7.3
    base = _quad_1d(c=1.0)
    scaled = ObjectiveSpec(
        value=lambda t: s * float(t[0] ** 2),
        grad=lambda t: s * 2.0 * t,
        c=s * 1.0,
        optimum=(np.zeros(1), 0.0),
        name="scaled",
    )
    t0 = np.array([1.2])
    tr_a = run_aepg(base, IdentityPreconditioner(), AepgConfig(eta=0.2, max_iter=40, tol=1e-16), t0, keep_iterates=True)
    tr_b = run_aepg(scaled, IdentityPreconditioner(), AepgConfig(eta=0.2 / s, max_iter=40, tol=1e-16), t0, keep_iterates=True)
    assert_allclose(tr_b.thetas, tr_a.thetas, rtol=1e-14)
    assert_allclose(tr_b.r, np.sqrt(s) * tr_a.r, rtol=1e-14)


def test_energy_monotone_and_positive():
    p = quadratic_problem(10.0)
    cfg = AepgConfig(eta=0.5, max_iter=300, tol=1e-12)
    tr = run_aepg(p.objective, p.default_preconditioner(), cfg, p.theta0,
                  feasibility=p.constraints)
    assert np.all(tr.r > 0)
    assert np.all(np.diff(tr.r) <= 0)
    tr.validate()


def test_validate_rejects_corrupted_energy():
    p = quadratic_problem(1.0)
    cfg = AepgConfig(eta=0.1, max_iter=50, tol=1e-12)
    tr = run_aepg(p.objective, p.default_preconditioner(), cfg, p.theta0,
                  feasibility=p.constraints)
    tr.validate()

    r_bad = tr.r.copy()
    r_bad[3] = r_bad[2] * 1.001
    doctored = dataclasses.replace(tr, r=r_bad)
    with pytest.raises(EnergiaError, match="increased"):
        doctored.validate()

    r_bad = tr.r.copy()
    r_bad[5] = 0.0
    with pytest.raises(EnergiaError, match="nonpositive"):
        dataclasses.replace(tr, r=r_bad).validate()

    k_bad = tr.k.copy()
    k_bad[4] = 17
    with pytest.raises(EnergiaError, match="contiguous"):
        dataclasses.replace(tr, k=k_bad).validate()


def test_validate_requires_strict_decrease():
    p = quadratic_problem(1.0)
    cfg = AepgConfig(eta=0.1, max_iter=30, tol=1e-12)
    tr = run_aepg(p.objective, p.default_preconditioner(), cfg, p.theta0,
                  feasibility=p.constraints)
    r_bad = tr.r.copy()
    r_bad[8] = r_bad[7]  # plateau where the denominator demands a drop
    with pytest.raises(EnergiaError, match="strictly"):
        dataclasses.replace(tr, r=r_bad).validate()


def test_trace_arrays_frozen():
    p = quadratic_problem(1.0)
    tr = run_aepg(p.objective, p.default_preconditioner(),
                  AepgConfig(eta=0.1, max_iter=10), p.theta0, feasibility=p.constraints)
    with pytest.raises(ValueError):
        tr.r[0] = 99.0
    with pytest.raises(ValueError):
        tr.L[0] = -1.0


@pytest.mark.parametrize("kwargs", [
    dict(eta=0.0),
    dict(eta=-1.0),
    dict(eta=np.nan),
    dict(eta=0.1, r0=0.0),
    dict(eta=0.1, r0=-2.0),
    dict(eta=0.1, max_iter=-1),
    dict(eta=0.1, max_iter=2.5),
    dict(eta=0.1, tol=0.0),
    dict(eta=0.1, eps_feas=0.6),
    dict(eta=0.1, eps_feas=-0.1),
    dict(eta=0.1, eta_star=0.05),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        AepgConfig(**kwargs)


def test_config_unknown_stop_mode():
    with pytest.raises(ValueError):
        AepgConfig(eta=0.1, stop_mode="nope")


def test_r0_override():
    cfg = AepgConfig(eta=0.1, max_iter=5, r0=2.0)
    tr = run_aepg(_quad_1d(), IdentityPreconditioner(), cfg, np.array([1.0]))
    assert tr.r[0] == 2.0
    assert tr.r0 == 2.0


def test_zero_budget_gives_empty_trace():
    cfg = AepgConfig(eta=0.1, max_iter=0)
    tr = run_aepg(_quad_1d(), IdentityPreconditioner(), cfg, np.array([1.0]))
    assert tr.status is Status.BUDGET_EXHAUSTED
    assert tr.n_records == 0
    assert tr.n_steps == 0
    assert np.isnan(tr.final_L())
    tr.validate()  # empty trace is structurally valid


def test_stop_mode_objective_gap_default():
    cfg = AepgConfig(eta=0.2, max_iter=5000, tol=1e-9)
    tr = run_aepg(_quad_1d(), IdentityPreconditioner(), cfg, np.array([1.0]))
    assert tr.status is Status.CONVERGED
    assert abs(tr.final_L() - 0.0) < 1e-9


def test_stop_mode_gradient_norm():
    obj = ObjectiveSpec(value=lambda t: float(t[0] ** 2), grad=lambda t: 2.0 * t,
                        c=1.0, name="no optimum recorded")
    cfg = AepgConfig(eta=0.2, max_iter=5000, tol=1e-6)
    tr = run_aepg(obj, IdentityPreconditioner(), cfg, np.array([1.0]))
    assert tr.status is Status.CONVERGED
    assert 2.0 * abs(tr.theta_last[0]) < 1e-6


def test_stop_mode_iteration_budget_ignores_tol():
    cfg = AepgConfig(eta=0.2, max_iter=25, tol=1e30,
                     stop_mode=StopMode.ITERATION_BUDGET)
    tr = run_aepg(_quad_1d(), IdentityPreconditioner(), cfg, np.array([1.0]))
    assert tr.status is Status.BUDGET_EXHAUSTED
    assert tr.n_steps == 25


def test_stop_mode_projected_gradient_norm():
    # Interior optimum under a barrier metric: the metric-weighted gradient
    # must vanish at the solution, so this stop mode fires.
    from energia import ConstraintSet, HrPreconditioner, LegendreBarrier

    theta0 = np.array([1.5, 0.7])
    obj = ObjectiveSpec(value=lambda t: float(np.sum((t - 1.0) ** 2)),
                        grad=lambda t: 2.0 * (t - 1.0),
                        c=float(np.sum((theta0 - 1.0) ** 2)),
                        optimum=(np.ones(2), 0.0))
    pre = HrPreconditioner(LegendreBarrier("entropy", ConstraintSet.positive_orthant(theta0)))
    cfg = AepgConfig(eta=0.1, max_iter=20_000, tol=1e-5,
                     stop_mode=StopMode.PROJECTED_GRADIENT_NORM)
    tr = run_aepg(obj, pre, cfg, theta0)
    assert tr.status is Status.CONVERGED
    theta = tr.theta_last
    l = obj.l(theta)
    v = pre.apply(theta, obj.grad(theta) / (2.0 * l))
    pg = 2.0 * l * np.linalg.norm(pre.metric_apply(theta, v))
    assert pg < 1e-5


def test_objective_gap_needs_optimum():
    obj = ObjectiveSpec(value=lambda t: float(t[0] ** 2), grad=lambda t: 2.0 * t, c=1.0)
    cfg = AepgConfig(eta=0.1, stop_mode=StopMode.OBJECTIVE_GAP)
    with pytest.raises(ConfigError, match="optimum"):
        run_aepg(obj, IdentityPreconditioner(), cfg, np.array([1.0]))


def test_theta0_validation():
    cfg = AepgConfig(eta=0.1)
    with pytest.raises(ConfigError, match="non-finite"):
        run_aepg(_quad_1d(), IdentityPreconditioner(), cfg, np.array([np.nan]))
    p = quadratic_problem(1.0)
    with pytest.raises(ConfigError, match="strictly feasible"):
        run_aepg(p.objective, p.default_preconditioner(), cfg,
                 np.array([50.0, 50.0]), feasibility=p.constraints)


def test_inconsistent_optimum_detected():
    # Claiming a minimum value above what the run actually sees must abort
    # rather than corrupt downstream gap computations.
    obj = ObjectiveSpec(value=lambda t: float(t[0] ** 2), grad=lambda t: 2.0 * t,
                        c=1.0, optimum=(np.zeros(1), 5.0))
    cfg = AepgConfig(eta=0.1, max_iter=10)
    with pytest.raises(EnergiaError, match="below the stated optimum"):
        run_aepg(obj, IdentityPreconditioner(), cfg, np.array([1.0]))


def test_nonfinite_gradient_is_numerical_failure():
    # Gradient breaks in a region the run must cross on its way to the
    # minimum; the driver records the failure instead of raising.
    def grad(t):
        return np.array([np.nan]) if t[0] < 2.0 else 2.0 * (t - 1.0)

    obj = ObjectiveSpec(value=lambda t: float((t[0] - 1.0) ** 2), grad=grad, c=1.0)
    cfg = AepgConfig(eta=0.5, max_iter=500, tol=1e-12)
    tr = run_aepg(obj, IdentityPreconditioner(), cfg, np.array([3.0]))
    assert tr.status is Status.NUMERICAL_FAILURE
    assert tr.theta_last[0] >= 2.0 - 1.0  # last good iterate kept


def test_keep_iterates_records_path():
    p = quadratic_problem(1.0)
    cfg = AepgConfig(eta=0.1, max_iter=30, tol=1e-12)
    tr = run_aepg(p.objective, p.default_preconditioner(), cfg, p.theta0,
                  feasibility=p.constraints, keep_iterates=True)
    assert tr.thetas.shape == (tr.n_records, 2)
    assert_array_equal(tr.thetas[0], tr.theta_first)
    assert_array_equal(tr.thetas[-1], tr.theta_last)
    # default path keeps no iterate matrix
    tr2 = run_aepg(p.objective, p.default_preconditioner(), cfg, p.theta0,
                   feasibility=p.constraints)
    assert tr2.thetas is None


def test_trace_csv_round_trip(tmp_path):
    p = quadratic_problem(1.0)
    tr = run_aepg(p.objective, p.default_preconditioner(),
                  AepgConfig(eta=0.1, max_iter=20), p.theta0, feasibility=p.constraints)
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    with open(path) as fh:
        header = fh.readline().strip()
    assert header == "k,L,r,v_norm,grad_norm,dtheta_norm,eta_eff,t_us"
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert data.shape[0] == tr.n_records
    assert_allclose(data["L"], tr.L, rtol=0, atol=0)
    assert_allclose(data["r"], tr.r, rtol=0, atol=0)


def test_energy_state_validation():
    with pytest.raises(ConfigError):
        EnergyState(theta=np.array([1.0]), r=0.0)
    with pytest.raises(ConfigError):
        EnergyState(theta=np.array([1.0]), r=np.inf)


def test_aepg_step_rejects_bad_eta():
    state = EnergyState(theta=np.array([1.0]), r=1.0)
    with pytest.raises(ConfigError):
        aepg_step(state, np.array([1.0]), 0.0)
    with pytest.raises(ConfigError):
        aepg_step(state, np.array([1.0]), -0.5)
