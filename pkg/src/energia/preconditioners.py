"""Preconditioners mapping the energy-adjusted gradient to a descent direction.

Every preconditioner realizes ``v = T(theta) g`` with ``T(theta)`` symmetric
positive semidefinite, so ``g^T v >= 0``.  The Hessian-Riemannian variant uses
the inverse barrier metric restricted to an affine constraint manifold; the
simplex variant is its closed form for the entropy barrier on the probability
simplex.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .barriers import LegendreBarrier
from .errors import BoundaryError, ConfigError, SpdFactorizationError
from .linalg import SpdFactor, check_symmetric, near_null_rows

__all__ = [
    "AffineConstraint",
    "Preconditioner",
    "IdentityPreconditioner",
    "FixedSpdPreconditioner",
    "HrPreconditioner",
    "SimplexPreconditioner",
    "fixed_spd_apply",
    "hr_apply",
    "simplex_apply",
    "projection_matrix",
    "kernel_basis",
    "ngd_equivalence_check",
    "NgdEquivalence",
]


@dataclass(frozen=True)
class AffineConstraint:
    """Equality constraints ``B theta = b`` with full row rank ``B`` (m x n, m < n)."""

    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if B.shape[0] != b.size:
            raise ConfigError(f"B has {B.shape[0]} rows but b has {b.size} entries")
        if B.shape[0] >= B.shape[1]:
            raise ConfigError(f"need m < n constraint rows, got B shape {B.shape}")
        R = np.linalg.qr(B.T, mode="r")
        diag = np.abs(np.diag(R))
        if diag.size == 0 or diag.min() <= 1e-10 * max(diag.max(), 1.0):
            raise ConfigError("constraint matrix B is rank deficient")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def n(self):
        return self.B.shape[1]

    def residual(self, theta):
        return self.B @ theta - self.b

    def max_residual(self, theta):
        return float(np.abs(self.residual(theta)).max())

    @classmethod
    def simplex(cls, n):
        """The probability-simplex equality ``1^T theta = 1``."""
        return cls(np.ones((1, n)), np.ones(1))


def projection_matrix(G, B):
    """Oblique projector onto ``ker B`` that is self-adjoint in the metric ``G``.

    ``P = I - G^-1 B^T (B G^-1 B^T)^-1 B`` satisfies ``P^2 = P``, ``B P = 0``
    and ``G P = P^T G``.  ``B`` may have zero rows, in which case ``P = I``.

    Raises
    ------
    SpdFactorizationError
        If ``G`` is not SPD or the Schur complement ``B G^-1 B^T`` is singular;
        the message names the implicated constraint rows.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.size == 0:
        return np.eye(n)
    Gf = SpdFactor(G, "metric G")
    X = Gf.solve(B.T)            # G^-1 B^T, n x m
    S = B @ X
    S = 0.5 * (S + S.T)
    try:
        Sf = SpdFactor(S, "Schur complement B G^-1 B^T")
    except SpdFactorizationError as exc:
        raise SpdFactorizationError(
            f"projector is undefined: {exc}; {near_null_rows(S, B)}"
        ) from exc
    return np.eye(n) - X @ Sf.solve(B)


class Preconditioner:
    """Interface: ``apply(theta, g) -> v`` with SPSD ``T``; ``describe()`` for logs.

    ``metric_apply(theta, v)`` maps a tangent direction back through the metric
    (``G v``), enabling projected-gradient stopping; preconditioners without a
    metric raise ``NotImplementedError``.  ``affine_constraint`` exposes the
    equality manifold the preconditioner maintains, if any.
    """

    affine_constraint = None

    def apply(self, theta, g):
        raise NotImplementedError

    def metric_apply(self, theta, v):
        raise NotImplementedError(f"{type(self).__name__} has no metric")

    def describe(self):
        return {"kind": type(self).__name__}


class IdentityPreconditioner(Preconditioner):
    """``T = I``; recovers the unpreconditioned energy-adaptive scheme."""

    def apply(self, theta, g):
        return np.asarray(g, dtype=float)

    def metric_apply(self, theta, v):
        return np.asarray(v, dtype=float)

    def describe(self):
        return {"kind": "identity"}


def fixed_spd_apply(A, g):
    """Solve ``A v = g`` for a fixed SPD matrix ``A``."""
    return SpdFactor(A, "preconditioner matrix").solve(np.asarray(g, dtype=float))


class FixedSpdPreconditioner(Preconditioner):
    """Constant metric ``T = A^-1`` with ``A`` SPD, factored once."""

    def __init__(self, A):
        self.A = check_symmetric(np.asarray(A, dtype=float), "preconditioner matrix")
        self._factor = SpdFactor(self.A, "preconditioner matrix")
        w = np.linalg.eigvalsh(self.A)
        self._eig_range = (float(w[0]), float(w[-1]))

    def apply(self, theta, g):
        return self._factor.solve(np.asarray(g, dtype=float))

    def metric_apply(self, theta, v):
        return self.A @ v

    def describe(self):
        lo, hi = self._eig_range
        return {"kind": "fixed_spd", "eig_min": lo, "eig_max": hi}


def hr_apply(barrier, constraint, theta, g):
    """Hessian-Riemannian direction ``v = H^-1 g - H^-1 B^T (B H^-1 B^T)^-1 B H^-1 g``.

    ``H`` is the barrier Hessian at ``theta``.  With ``constraint=None`` this is
    the plain inverse-metric map.  The Schur system is solved through an m x m
    Cholesky factorization; the n x n inverse is never formed.

    Parameters
    ----------
    barrier : LegendreBarrier
    constraint : AffineConstraint or None
    theta : ndarray
        Strictly feasible point.
    g : ndarray
        Covector to precondition (typically ``grad l``).
    """
    factor = barrier.metric_factor(theta)
    return _hr_from_factor(factor, constraint, theta, g)


def _hr_from_factor(factor, constraint, theta, g):
    y = factor.solve(np.asarray(g, dtype=float))
    if constraint is None:
        return y
    B = constraint.B
    X = factor.solve_matrix(B.T)     # H^-1 B^T
    S = B @ X
    S = 0.5 * (S + S.T)
    try:
        Sf = SpdFactor(S, "Schur complement B H^-1 B^T")
    except SpdFactorizationError as exc:
        raise SpdFactorizationError(
            f"constrained metric solve failed: {exc}; {near_null_rows(S, B)}"
        ) from exc
    return y - X @ Sf.solve(B @ y)


class HrPreconditioner(Preconditioner):
    """Inverse barrier metric, optionally restricted to ``B theta = b``.

    The metric factorization is cached for the most recent ``theta`` so that
    ``apply`` and ``metric_apply`` within one iteration factor only once.
    ``ridge`` (default 0: exact solves) regularizes the metric before
    factoring, for deliberately ill-conditioned studies.
    """

    def __init__(self, barrier, constraint=None, ridge=0.0):
        if not isinstance(barrier, LegendreBarrier):
            raise ConfigError("HrPreconditioner requires a LegendreBarrier")
        if constraint is not None and constraint.n != barrier.constraints.n:
            raise ConfigError(
                f"constraint dimension {constraint.n} != barrier dimension "
                f"{barrier.constraints.n}"
            )
        if ridge < 0:
            raise ConfigError(f"ridge must be nonnegative, got {ridge}")
        self.barrier = barrier
        self.constraint = constraint
        self.ridge = float(ridge)
        self._cache_key = None
        self._cache_factor = None

    @property
    def affine_constraint(self):
        return self.constraint

    def _factor(self, theta):
        key = theta.tobytes()
        if key != self._cache_key:
            self._cache_factor = self.barrier.metric_factor(theta, ridge=self.ridge)
            self._cache_key = key
        return self._cache_factor

    def apply(self, theta, g):
        theta = np.asarray(theta, dtype=float)
        return _hr_from_factor(self._factor(theta), self.constraint, theta, g)

    def metric_apply(self, theta, v):
        theta = np.asarray(theta, dtype=float)
        return self._factor(theta).matvec(np.asarray(v, dtype=float))

    def describe(self):
        return {
            "kind": "hessian_riemannian",
            "kernel": self.barrier.kernel.name,
            "n_inequalities": len(self.barrier.constraints),
            "n_equalities": 0 if self.constraint is None else self.constraint.m,
            "correction": bool(self.barrier.has_correction),
        }


def simplex_apply(theta, g, tol=1e-10):
    """Entropy-metric simplex direction ``v_i = theta_i (g_i - theta . g)``.

    Closed form of :func:`hr_apply` for the entropy barrier on the probability
    simplex with the equality ``1^T theta = 1``; ``1^T v = 0`` by construction.
    The returned direction is re-centred to an exactly zero sum: when the
    iterate carries a small simplex-sum error ``delta``, the raw direction
    picks up ``1^T v = -delta (theta . g)``, which feeds the error back
    through the step and can amplify it geometrically at large step sizes.
    Re-centring caps the sum drift at a roundoff random walk.

    Raises
    ------
    BoundaryError
        If ``theta`` is off the simplex beyond ``tol`` (negative component or
        ``|sum - 1| > tol``).
    """
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(g, dtype=float)
    s = float(theta.sum())
    if abs(s - 1.0) > tol or theta.min() < -1e-12:
        raise BoundaryError(
            f"theta off the simplex: sum-1={s - 1.0:.3e}, min={theta.min():.3e}",
            min_margin=float(theta.min()),
        )
    v = theta * (g - float(theta @ g))
    return v - v.sum() / v.size


class SimplexPreconditioner(Preconditioner):
    """Simplex-restricted entropy metric ``T = diag(theta) - theta theta^T``."""

    def __init__(self, tol=1e-10):
        self.tol = tol
        self._affine = None

    @property
    def affine_constraint(self):
        return self._affine

    def apply(self, theta, g):
        if self._affine is None or self._affine.n != len(theta):
            self._affine = AffineConstraint.simplex(len(theta))
        return simplex_apply(theta, g, self.tol)

    def metric_apply(self, theta, v):
        # Entropy metric diag(1/theta); on the tangent space this returns the
        # reduced gradient g - (theta . g) 1 when v = apply(theta, g).
        return np.asarray(v, dtype=float) / np.asarray(theta, dtype=float)

    def describe(self):
        return {"kind": "simplex_entropy", "tol": self.tol}


# ---------------------------------------------------------------------------
# Natural-gradient equivalence


@dataclass(frozen=True)
class NgdEquivalence:
    """Discrepancy between the restricted-metric and chart-parametrized directions."""

    absolute: float
    relative: float
    d_restricted: np.ndarray
    d_chart: np.ndarray


def kernel_basis(B):
    """Basis of ``ker B`` with one identity block: rows at the pivot columns of
    ``B`` hold ``W = -R1^-1 R2`` from the pivoted QR ``B P = Q [R1 R2]``, the
    remaining rows hold the identity.  Shape ``n x (n - m)``.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    m, n = B.shape
    _, R, piv = scipy.linalg.qr(B, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size < m or diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise ConfigError("constraint matrix B is rank deficient")
    W = scipy.linalg.solve_triangular(R[:, :m], -R[:, m:])
    J = np.zeros((n, n - m))
    J[piv[:m], :] = W
    J[piv[m:], :] = np.eye(n - m)
    return J


def ngd_equivalence_check(barrier, constraint, f, theta):
    """Compare two routes to the natural-gradient direction on ``{B theta = b}``.

    Route 1 applies the constrained inverse metric directly to ``-grad f``
    (:func:`hr_apply`).  Route 2 parametrizes the manifold through the chart
    ``phi(z) = theta + J z``, where the kernel basis ``J`` stacks a solved
    block over an identity block (:func:`kernel_basis`), assembles the
    information matrix ``G = J^T hess h J``, computes the natural-gradient
    step ``p = -G^-1 J^T grad f`` in chart coordinates, and pushes it forward
    as ``J p``.  The two directions coincide in exact arithmetic for any
    strictly convex barrier.

    Parameters
    ----------
    barrier : LegendreBarrier
    constraint : AffineConstraint
    f : ObjectiveSpec or callable
        Objective whose ``grad`` is preconditioned, or the gradient callable
        itself.
    theta : ndarray
        Point on the constraint manifold (validated to 1e-8).

    Returns
    -------
    NgdEquivalence
        With the max-norm ``absolute`` discrepancy and a ``relative`` variant.
    """
    theta = np.asarray(theta, dtype=float)
    res = constraint.max_residual(theta)
    scale = max(1.0, np.abs(constraint.b).max())
    if res > 1e-8 * scale:
        raise ConfigError(f"theta violates B theta = b by {res:.3e}")
    grad_f = f.grad if hasattr(f, "grad") else f
    g = np.asarray(grad_f(theta), dtype=float)

    d1 = -hr_apply(barrier, constraint, theta, g)

    J = kernel_basis(constraint.B)
    H = barrier.hess(theta)
    Gz = J.T @ H @ J
    Gz = 0.5 * (Gz + Gz.T)
    p = SpdFactor(Gz, "information matrix J^T H J").solve(J.T @ g)
    d2 = -J @ p

    absolute = float(np.abs(d1 - d2).max())
    denom = max(float(np.abs(d1).max()), float(np.abs(d2).max()), 1e-300)
    return NgdEquivalence(absolute, absolute / denom, d1, d2)
