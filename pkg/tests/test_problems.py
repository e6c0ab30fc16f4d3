"""Problem factories: frozen constants, gradients, data round-trips, ids."""

import os

import numpy as np
import pytest

from energia import (
    ConfigError,
    DoptimalData,
    doptimal_problem,
    first_order_residual,
    mixture_problem,
    problem_from_id,
    projected_pl_example,
    quadratic_problem,
    rosenbrock_problem,
    with_reference,
)


def central_diff(fn, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (fn(theta + e) - fn(theta - e)) / (2.0 * h)
    return out


# ---------------------------------------------------------------------------
# quadratic factory


def test_quadratic_frozen_constants():
    p = quadratic_problem(1.0)
    assert np.array_equal(p.theta0, [-1.0, 1.8])
    L0 = p.objective.value(p.theta0)
    assert L0 == pytest.approx(4.64, abs=1e-12)
    # shift is tied to the starting height
    assert p.objective.c == pytest.approx(L0 / 16.0, rel=1e-15)
    theta_star, L_star = p.objective.optimum
    assert np.array_equal(theta_star, [0.5, 1.0])
    assert L_star == 0.25
    assert p.objective.value(theta_star) == pytest.approx(0.25, abs=1e-15)
    rate_star, rate_val = p.objective.rate_optimum
    assert np.array_equal(rate_star, [1.0, 1.0])
    assert rate_val == 0.0


@pytest.mark.parametrize("a", [1.0, 10.0, 100.0, 1e4])
def test_quadratic_curvature_bounds(a):
    p = quadratic_problem(a)
    assert p.objective.alpha == 2.0 * max(1.0, a)
    assert p.objective.mu == 2.0 * min(1.0, a)
    assert p.alpha_cond == a


def test_quadratic_optimum_on_boundary():
    p = quadratic_problem(1.0)
    theta_star = p.objective.optimum[0]
    con = p.constraints.constraints[0]
    # boundary point of the disc, start strictly inside
    assert con.value(theta_star) == pytest.approx(0.0, abs=1e-12)
    assert con.value(p.theta0) > 0.0
    assert p.constraints.is_strictly_feasible(p.theta0)


def test_quadratic_rejects_bad_conditioning():
    with pytest.raises(ConfigError):
        quadratic_problem(0.0)
    with pytest.raises(ConfigError):
        quadratic_problem(-3.0)


# ---------------------------------------------------------------------------
# rosenbrock factory


def test_rosenbrock_frozen_constants():
    p = rosenbrock_problem(100.0)
    assert np.array_equal(p.theta0, [-0.5, 2.0])
    assert p.objective.c == pytest.approx(p.objective.value(p.theta0), rel=1e-15)
    assert p.objective.c == pytest.approx(308.5, abs=1e-12)
    theta_star, L_star = p.objective.optimum
    assert np.array_equal(theta_star, [0.0, 0.0])
    assert L_star == 1.0
    assert p.objective.value(theta_star) == pytest.approx(1.0, abs=1e-15)
    # curvature constants are deliberately not advertised here
    assert p.objective.alpha is None
    assert p.objective.mu is None


def test_rosenbrock_quadrant():
    p = rosenbrock_problem(100.0)
    # start point and corner optimum live in the x1 < 0 < x2 orthant closure
    signs = [c.value(np.array([-0.5, 2.0])) for c in p.constraints.constraints]
    assert all(s > 0 for s in signs)
    assert p.constraints.is_strictly_feasible(p.theta0)
    assert not p.constraints.is_strictly_feasible(np.array([0.5, 2.0]))


@pytest.mark.parametrize(
    "factory, a",
    [
        (quadratic_problem, 1.0),
        (quadratic_problem, 1e4),
        (rosenbrock_problem, 100.0),
        (rosenbrock_problem, 1e4),
    ],
)
def test_factory_gradients_match_finite_differences(factory, a):
    p = factory(a)
    rng = np.random.default_rng(7)
    for _ in range(25):
        theta = p.theta0 + 0.2 * rng.standard_normal(2)
        if p.constraints is not None and not p.constraints.is_strictly_feasible(theta):
            continue
        g = p.objective.grad(theta)
        fd = central_diff(p.objective.value, theta)
        scale = max(1.0, np.linalg.norm(g))
        assert np.linalg.norm(g - fd) <= 1e-6 * scale


# ---------------------------------------------------------------------------
# D-optimal data handling


def test_doptimal_generate_is_reproducible():
    d1 = DoptimalData.generate(5, 40, seed=123)
    d2 = DoptimalData.generate(5, 40, seed=123)
    assert np.array_equal(d1.U, d2.U)
    assert d1.m == 5 and d1.n == 40 and d1.seed == 123
    d3 = DoptimalData.generate(5, 40, seed=124)
    assert not np.array_equal(d1.U, d3.U)


def test_doptimal_generate_validates_shape():
    with pytest.raises(ConfigError):
        DoptimalData.generate(10, 10, seed=1)
    with pytest.raises(ConfigError):
        DoptimalData.generate(0, 10, seed=1)


def test_doptimal_dump_load_round_trip(tmp_path):
    data = DoptimalData.generate(6, 50, seed=9)
    path = os.path.join(tmp_path, "design.csv")
    data.dump(path)
    back = DoptimalData.load(path)
    assert np.array_equal(back.U, data.U)  # 17 significant digits: exact
    assert back.seed == 9
    with open(path) as fh:
        assert fh.readline() == "# doptimal m=6 n=50 seed=9\n"


def test_doptimal_load_rejects_foreign_file(tmp_path):
    path = os.path.join(tmp_path, "other.csv")
    with open(path, "w") as fh:
        fh.write("x,y\n1,2\n")
    with pytest.raises(ConfigError, match="not a design-data dump"):
        DoptimalData.load(path)


def test_doptimal_load_rejects_shape_mismatch(tmp_path):
    data = DoptimalData.generate(4, 12, seed=3)
    path = os.path.join(tmp_path, "design.csv")
    data.dump(path)
    with open(path) as fh:
        lines = fh.readlines()
    with open(path, "w") as fh:
        fh.writelines(lines[:-2])  # drop two data rows, keep the header
    with pytest.raises(ConfigError, match="header says"):
        DoptimalData.load(path)


def test_doptimal_objective_frozen_value():
    p = doptimal_problem(10, 100, seed=42)
    assert p.objective.value(p.theta0) == pytest.approx(
        1.0322834127025367, rel=1e-14
    )
    assert p.objective.c == pytest.approx(10.783232960713828, rel=1e-14)
    # start point: uniform weights on the simplex
    assert np.array_equal(p.theta0, np.full(100, 0.01))
    assert p.affine is not None and p.affine.B.shape == (1, 100)


def test_doptimal_leverage_trace_identity():
    """theta . leverages == m: trace of S^-1 S, independent of the solver."""
    p = doptimal_problem(8, 60, seed=5)
    lev = p.extras["leverages"]
    rng = np.random.default_rng(11)
    for _ in range(5):
        w = rng.uniform(0.2, 1.0, size=60)
        theta = w / w.sum()
        assert float(theta @ lev(theta)) == pytest.approx(8.0, rel=1e-10)
        # gradient is minus the leverage scores
        assert np.allclose(p.objective.grad(theta), -lev(theta), atol=1e-12)


def test_doptimal_gradient_matches_finite_differences():
    p = doptimal_problem(6, 30, seed=2)
    rng = np.random.default_rng(4)
    for _ in range(5):
        w = rng.uniform(0.3, 1.0, size=30)
        theta = w / w.sum()
        g = p.objective.grad(theta)
        fd = central_diff(p.objective.value, theta, h=1e-7)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_doptimal_accepts_preloaded_data():
    data = DoptimalData.generate(5, 20, seed=77)
    p = doptimal_problem(data=data)
    assert p.extras["data"] is data
    assert p.theta0.size == 20


# ---------------------------------------------------------------------------
# problem ids


def test_problem_from_id_parses_known_ids():
    assert problem_from_id("quad:100").objective.alpha == 200.0
    assert problem_from_id("quad").alpha_cond == 1.0
    assert problem_from_id("rosen").objective.c == pytest.approx(308.5)
    p = problem_from_id("doptimal:10x100", seed=42)
    q = doptimal_problem(10, 100, seed=42)
    assert p.objective.value(p.theta0) == q.objective.value(q.theta0)
    m = problem_from_id("mixture:32")
    assert m.extras["grid"].nx == 32


def test_problem_from_id_grid_override():
    m = problem_from_id("mixture", grid_n=24)
    assert m.extras["grid"].nx == 24


@pytest.mark.parametrize("pid", ["quad:abc", "doptimal:10y100", "rosen:x"])
def test_problem_from_id_malformed(pid):
    with pytest.raises(ConfigError, match="malformed problem id"):
        problem_from_id(pid)


def test_problem_from_id_unknown():
    with pytest.raises(ConfigError, match="unknown problem id"):
        problem_from_id("banana")


# ---------------------------------------------------------------------------
# references and optimality certificates


def test_with_reference_attaches_optimum():
    p = doptimal_problem(5, 20, seed=8)
    assert p.objective.optimum is None
    q = with_reference(p, -1.25)
    assert q.objective.optimum == (None, -1.25)
    assert p.objective.optimum is None  # original untouched
    r = with_reference(p, -1.25, theta_star=p.theta0)
    assert np.array_equal(r.objective.optimum[0], p.theta0)


def test_first_order_residual_at_certified_optima():
    # boundary optimum with an active disc constraint: exact stationarity
    assert first_order_residual(quadratic_problem(1.0)) == pytest.approx(0.0, abs=1e-10)
    assert first_order_residual(quadratic_problem(100.0)) == pytest.approx(0.0, abs=1e-10)
    assert first_order_residual(rosenbrock_problem(100.0)) == pytest.approx(0.0, abs=1e-10)
    assert first_order_residual(mixture_problem(16)) == pytest.approx(0.0, abs=1e-8)


def test_first_order_residual_none_without_optimum():
    assert first_order_residual(doptimal_problem(5, 20, seed=8)) is None


def test_first_order_residual_nonzero_off_optimum():
    p = quadratic_problem(1.0)
    q = with_reference(p, 1.0, theta_star=np.array([-0.9, 1.2]))
    assert first_order_residual(q) > 0.1


# ---------------------------------------------------------------------------
# projected PL closed-form example


def test_projected_pl_identity_exact():
    """|P grad L|^2 == 2 mu (L - L*) pointwise on the constraint line."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = rng.uniform(0.5, 3.0, size=2) * rng.choice([-1.0, 1.0], size=2)
        beta = rng.uniform(0.5, 2.0)
        alpha = beta + rng.uniform(0.0, 3.0)
        t = rng.uniform(-4.0, 4.0)
        theta = np.array([t, (1.0 - a * t) / b])
        pg2, gap, mu = projected_pl_example(a, b, alpha, beta, theta)
        assert mu == pytest.approx((a * a * alpha + b * b * beta) / (a * a + b * b))
        assert abs(pg2 - 2.0 * mu * gap) <= 1e-10 * max(1.0, abs(pg2))
        assert gap >= -1e-12


def test_projected_pl_minimizer_closed_form():
    a, b, alpha, beta = 2.0, -1.5, 3.0, 1.0
    denom = a * a * alpha + b * b * beta
    theta_star = np.array([a * alpha, b * beta]) / denom
    pg2, gap, _ = projected_pl_example(a, b, alpha, beta, theta_star)
    assert pg2 == pytest.approx(0.0, abs=1e-14)
    assert gap == pytest.approx(0.0, abs=1e-14)


def test_projected_pl_validation():
    theta = np.array([0.0, 1.0])
    with pytest.raises(ConfigError):
        projected_pl_example(0.0, 1.0, 2.0, 1.0, theta)
    with pytest.raises(ConfigError):
        projected_pl_example(1.0, 1.0, 1.0, 2.0, theta)  # alpha < beta
    with pytest.raises(ConfigError):
        projected_pl_example(1.0, 1.0, 2.0, 1.0, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ConfigError, match="line"):
        projected_pl_example(1.0, 1.0, 2.0, 1.0, np.array([5.0, 5.0]))
