"""Legendre-type barrier functions on constrained domains.

The feasible set is the strict interior ``{theta : U_i(theta) > 0 for all i}``
of finitely many smooth concave inequality constraints.  A barrier

    h(theta) = sum_i K(U_i(theta)) + h_tilde(theta)

built from a convex kernel ``K`` blows up (in gradient) toward the boundary;
its Hessian supplies the Riemannian metric used by the Hessian-Riemannian
preconditioner.  The optional strongly convex correction ``h_tilde`` restores
a nondegenerate metric on coordinates the constraints leave uncurved.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryError, ConfigError, SpdFactorizationError
from .linalg import SpdFactor, check_symmetric

__all__ = [
    "Kernel",
    "ENTROPY",
    "LOG",
    "get_kernel",
    "AffineInequality",
    "BallInequality",
    "SignInequality",
    "ConstraintSet",
    "LegendreBarrier",
    "barrier_grad",
    "barrier_hess",
    "barrier_hess_inv_apply",
    "bregman_divergence",
    "feasible_line_search",
]


# ---------------------------------------------------------------------------
# Kernels


@dataclass(frozen=True)
class Kernel:
    """Scalar barrier kernel ``K`` with first and second derivatives."""

    name: str
    K: callable
    Kp: callable
    Kpp: callable


ENTROPY = Kernel(
    "entropy",
    K=lambda s: s * np.log(s) - s,
    Kp=np.log,
    Kpp=lambda s: 1.0 / s,
)

LOG = Kernel(
    "log",
    K=lambda s: -np.log(s),
    Kp=lambda s: -1.0 / s,
    Kpp=lambda s: 1.0 / (s * s),
)

_KERNELS = {"entropy": ENTROPY, "log": LOG}


def get_kernel(kernel):
    """Resolve a kernel by name or pass a :class:`Kernel` through."""
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return _KERNELS[kernel]
    except KeyError:
        raise ConfigError(f"unknown kernel {kernel!r}; choose from {sorted(_KERNELS)}") from None


# ---------------------------------------------------------------------------
# Constraint kinds.  Each exposes value/grad/hess; hess may return None for zero.


@dataclass(frozen=True)
class AffineInequality:
    """Half-space constraint ``U(theta) = a . theta - b > 0``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        if not np.any(self.a):
            raise ConfigError("affine inequality requires a nonzero normal vector")

    def value(self, theta):
        return float(self.a @ theta) - self.b

    def grad(self, theta):
        return self.a

    def hess(self, theta):
        return None


@dataclass(frozen=True)
class BallInequality:
    """Ellipsoid interior ``U(theta) = 1 - (theta - c)^T S (theta - c) > 0`` with S SPD."""

    center: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        S = check_symmetric(np.asarray(self.S, dtype=float), "ball shape matrix")
        if np.linalg.eigvalsh(S)[0] <= 0:
            raise ConfigError("ball shape matrix must be positive definite")
        object.__setattr__(self, "S", S)

    @classmethod
    def euclidean(cls, center, radius):
        center = np.asarray(center, dtype=float)
        return cls(center, np.eye(center.size) / radius**2)

    def value(self, theta):
        d = theta - self.center
        return 1.0 - float(d @ self.S @ d)

    def grad(self, theta):
        return -2.0 * self.S @ (theta - self.center)

    def hess(self, theta):
        return -2.0 * self.S


@dataclass(frozen=True)
class SignInequality:
    """Coordinate sign constraint ``U(theta) = sign * theta[index] > 0``."""

    index: int
    sign: float = 1.0

    def __post_init__(self):
        if self.sign not in (-1.0, 1.0, -1, 1):
            raise ConfigError("sign must be +1 or -1")

    def value(self, theta):
        return self.sign * float(theta[self.index])

    def grad(self, theta):
        g = np.zeros(theta.size)
        g[self.index] = self.sign
        return g

    def hess(self, theta):
        return None


@dataclass(frozen=True)
class ConstraintSet:
    """A finite family of concave inequality constraints with a strictly feasible witness.

    Parameters
    ----------
    constraints : sequence
        Constraint objects (:class:`AffineInequality`, :class:`BallInequality`,
        :class:`SignInequality`).  May be empty, in which case the domain is
        all of R^n and a barrier over the set degenerates to its correction.
    witness : ndarray
        A point with ``U_i(witness) > 0`` for every constraint; fixes the
        ambient dimension.
    """

    constraints: tuple
    witness: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        w = np.asarray(self.witness, dtype=float)
        object.__setattr__(self, "witness", w)
        m = self.margins(w)
        if m.size and m.min() <= 0.0:
            raise ConfigError(
                f"witness is not strictly feasible: min constraint margin {m.min():.3e}"
            )

    @property
    def n(self):
        return self.witness.size

    def __len__(self):
        return len(self.constraints)

    def margins(self, theta):
        """Vector of constraint values ``U_i(theta)``."""
        return np.array([c.value(theta) for c in self.constraints])

    def min_margin(self, theta):
        m = self.margins(theta)
        return float(m.min()) if m.size else np.inf

    def is_strictly_feasible(self, theta):
        return self.min_margin(theta) > 0.0

    @classmethod
    def signs(cls, signs, witness):
        """Axis-sign domain, e.g. ``signs=(-1, +1)`` for ``x1 < 0 < x2``."""
        cons = [SignInequality(i, float(s)) for i, s in enumerate(signs)]
        return cls(cons, witness)

    @classmethod
    def positive_orthant(cls, witness):
        witness = np.asarray(witness, dtype=float)
        return cls.signs(np.ones(witness.size), witness)


# ---------------------------------------------------------------------------
# Barrier


class LegendreBarrier:
    """Barrier ``h = sum_i K(U_i) + h_tilde`` over a :class:`ConstraintSet`.

    Parameters
    ----------
    kernel : str or Kernel
        ``"entropy"`` (``s log s - s``, the default elsewhere in the package)
        or ``"log"`` (``-log s``).
    constraints : ConstraintSet
        Domain description; the witness point is where nondegeneracy is probed.
    correction : bool or None
        ``h_tilde = 0.5 * ||theta_free||^2`` over coordinates the constraints
        leave uncovered.  ``None`` (default) enables it automatically exactly
        when the nondegeneracy probe at the witness fails; ``True`` forces the
        correction on every coordinate; ``False`` disables it.

    Notes
    -----
    The nondegeneracy probe assembles ``Q = sum_i [grad U_i grad U_i^T - hess U_i]``
    at the witness.  ``Q`` positive definite means no direction is simultaneously
    tangent to every constraint and curvature-free, so the bare barrier Hessian
    is already nonsingular on the interior.
    """

    def __init__(self, kernel, constraints, correction=None):
        self.kernel = get_kernel(kernel)
        self.constraints = constraints
        n = constraints.n
        if correction is True:
            mask = np.ones(n)
        elif correction is False:
            mask = np.zeros(n)
        else:
            mask = self._auto_correction_mask()
        self.correction_mask = mask
        # Diagonal fast path: every constraint touches one coordinate and has no
        # curvature, so the Hessian is diagonal for any kernel.
        self._diagonal = all(
            isinstance(c, SignInequality) for c in constraints.constraints
        )

    def _auto_correction_mask(self):
        cs = self.constraints
        n = cs.n
        if len(cs) == 0:
            return np.ones(n)
        Q = np.zeros((n, n))
        for c in cs.constraints:
            g = c.grad(cs.witness)
            Q += np.outer(g, g)
            H = c.hess(cs.witness)
            if H is not None:
                Q -= H
        scale = max(np.trace(Q) / n, 1.0)
        if np.linalg.eigvalsh(Q)[0] > 1e-10 * scale:
            return np.zeros(n)
        mask = (np.diag(Q) <= 1e-10 * scale).astype(float)
        return mask

    @property
    def has_correction(self):
        return bool(self.correction_mask.any())

    def _margins(self, theta, who="barrier", allow_boundary=False):
        m = self.constraints.margins(theta)
        outside = m.min() < 0.0 if allow_boundary else m.min() <= 0.0
        if m.size and outside:
            raise BoundaryError(
                f"{who} evaluated outside the strict interior "
                f"(min constraint margin {m.min():.3e})",
                min_margin=float(m.min()),
            )
        return m

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        m = self._margins(theta)
        v = float(np.sum(self.kernel.K(m))) if m.size else 0.0
        if self.has_correction:
            v += 0.5 * float((self.correction_mask * theta) @ theta)
        return v

    def grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        m = self._margins(theta)
        g = np.zeros(theta.size)
        for u, c in zip(m, self.constraints.constraints):
            g += self.kernel.Kp(u) * c.grad(theta)
        if self.has_correction:
            g += self.correction_mask * theta
        return g

    def hess(self, theta):
        """Dense Hessian ``sum_i [K''(U_i) grad U_i grad U_i^T + K'(U_i) hess U_i] + diag(mask)``."""
        theta = np.asarray(theta, dtype=float)
        m = self._margins(theta)
        n = theta.size
        H = np.diag(self.correction_mask) if self.has_correction else np.zeros((n, n))
        H = H.astype(float).copy()
        for u, c in zip(m, self.constraints.constraints):
            g = c.grad(theta)
            H += self.kernel.Kpp(u) * np.outer(g, g)
            Hc = c.hess(theta)
            if Hc is not None:
                H += self.kernel.Kp(u) * Hc
        return H

    def hess_diagonal(self, theta):
        """Diagonal of the Hessian on the sign-constraint fast path, else None.

        Margins are allowed to reach zero exactly: the kernel then contributes
        ``+inf`` on that coordinate, whose inverse-metric action is zero (the
        coordinate is frozen on the boundary).  A run that drives a coordinate
        onto its bound therefore keeps it there instead of failing.
        """
        if not self._diagonal:
            return None
        theta = np.asarray(theta, dtype=float)
        m = self._margins(theta, allow_boundary=True)
        d = self.correction_mask.copy()
        with np.errstate(divide="ignore", over="ignore"):
            for u, c in zip(m, self.constraints.constraints):
                d[c.index] += self.kernel.Kpp(u)
        return d

    def metric_factor(self, theta, ridge=0.0):
        """Factor the Hessian metric at ``theta`` for repeated solves.

        ``ridge`` adds a multiple of the identity before factoring; the default
        0 keeps the solves exact, the option exists for deliberately
        ill-conditioned studies.
        """
        d = self.hess_diagonal(theta)
        if d is not None:
            d = d + ridge if ridge else d
            if np.any(d <= 0.0) or np.any(np.isnan(d)):
                raise SpdFactorizationError(
                    "diagonal barrier metric is not positive definite; "
                    "consider correction=True"
                )
            return _DiagMetric(d)
        H = self.hess(theta)
        if ridge:
            H = H + ridge * np.eye(H.shape[0])
        try:
            return _Dense2Metric(H) if H.shape[0] == 2 else _DenseMetric(H)
        except SpdFactorizationError as exc:
            raise SpdFactorizationError(
                f"barrier Hessian failed to factor at theta={theta!r}: {exc}; "
                "the domain may be degenerate here, consider correction=True"
            ) from exc


class _DiagMetric:
    """Diagonal metric; entries may be +inf (boundary-frozen coordinates),
    in which case the inverse action on that coordinate is zero."""

    def __init__(self, d):
        self.d = d
        self.t = 1.0 / d  # 1/inf == 0 exactly

    def solve(self, g):
        return g * self.t

    def matvec(self, v):
        out = self.d * v
        frozen = self.t == 0.0
        if np.any(frozen):
            out = np.where(frozen & (v == 0.0), 0.0, out)
        return out

    def solve_matrix(self, Bt):
        return Bt * self.t[:, None]


class _DenseMetric:
    def __init__(self, H):
        self.H = H
        self._f = SpdFactor(H, "barrier Hessian")

    def solve(self, g):
        return self._f.solve(g)

    def matvec(self, v):
        return self.H @ v

    def solve_matrix(self, Bt):
        return self._f.solve(Bt)


class _Dense2Metric:
    """2 x 2 metric solved by the adjugate; avoids factorization overhead in
    the tight loops of the two-dimensional benchmarks."""

    def __init__(self, H):
        a, b, c = H[0, 0], H[0, 1], H[1, 1]
        det = a * c - b * b
        if not (np.isfinite(det) and det > 0.0 and a > 0.0):
            raise SpdFactorizationError("barrier Hessian is not positive definite")
        self.H = H
        self._inv = np.array([[c, -b], [-b, a]]) / det

    def solve(self, g):
        return self._inv @ g

    def matvec(self, v):
        return self.H @ v

    def solve_matrix(self, Bt):
        return self._inv @ Bt


def barrier_grad(barrier, theta):
    """Gradient ``sum_i K'(U_i) grad U_i + grad h_tilde`` of a barrier at ``theta``."""
    return barrier.grad(theta)


def barrier_hess(barrier, theta):
    """Hessian ``sum_i [K''(U_i) grad U_i grad U_i^T + K'(U_i) hess U_i] + hess h_tilde``."""
    return barrier.hess(theta)


def barrier_hess_inv_apply(barrier, theta, g):
    """Solve the barrier metric system ``hess h(theta) x = g``.

    Uses the diagonal closed form when every constraint is a coordinate sign
    bound, a symmetric factorization otherwise.
    """
    return barrier.metric_factor(theta).solve(np.asarray(g, dtype=float))


def bregman_divergence(barrier, xi, theta):
    """Bregman divergence ``D_h(xi, theta) = h(xi) - h(theta) - <grad h(theta), xi - theta>``.

    Both points must lie in the strict interior.  Returns ``(D, h(xi), h(theta))``
    so callers can log the raw barrier values alongside the divergence.  ``D`` is
    nonnegative for any convex barrier and zero iff ``xi == theta`` when the
    barrier is strictly convex; it is recorded as a diagnostic, not asserted to
    be monotone along optimization paths.
    """
    xi = np.asarray(xi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    h_xi = barrier.value(xi)
    h_theta = barrier.value(theta)
    D = h_xi - h_theta - float(barrier.grad(theta) @ (xi - theta))
    return D, h_xi, h_theta


# ---------------------------------------------------------------------------
# Feasibility line search


def feasible_line_search(
    theta,
    v,
    r,
    constraints,
    eps_feas=0.5,
    eta_star=1.0,
    eta_min=1e-12,
):
    """Largest admissible step size for the energy-adaptive update.

    The candidate next iterate as a function of the step size is the folded
    update ``theta(eta) = theta - 2 eta r v / (1 + 2 eta ||v||^2)`` (identical
    to the iterate the caller will form).  A step ``eta`` is admissible when
    every constraint retains at least the fraction ``eps_feas`` of its current
    margin: ``U_i(theta(eta)) >= eps_feas * U_i(theta)``.

    Returns ``eta_star`` when admissible, otherwise the first admissible step
    on the halving ladder ``eta_star / 2**j`` -- within a factor 2 of the
    supremum of admissible steps below the clip.  The ladder is deliberately
    not refined further: accepting a step a constant fraction below the
    retention boundary leaves slack in the binding constraint, so tangential
    oscillations against it are damped instead of being held at the edge of
    stability, which is what lets iterates creep along a curved boundary
    instead of pinning there.  Raises :class:`InfeasibleStepError` when no
    admissible step at or above ``eta_min`` exists.

    Parameters
    ----------
    theta : ndarray
        Current iterate; must not violate any constraint.
    v : ndarray
        Preconditioned direction ``T grad l``.
    r : float
        Current energy value ``r_k``.
    constraints : ConstraintSet
    eps_feas : float
        Margin retention fraction in ``[0, 0.5]``.
    eta_star : float
        Upper clip for the step size.
    """
    from .errors import InfeasibleStepError

    if not 0.0 <= eps_feas <= 0.5:
        raise ConfigError(f"eps_feas must lie in [0, 0.5], got {eps_feas}")
    if not eta_star > 0.0:
        raise ConfigError(f"eta_star must be positive, got {eta_star}")
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    m0 = constraints.margins(theta)
    if m0.size and m0.min() < 0.0:
        raise BoundaryError(
            f"line search started outside the interior (margin {m0.min():.3e})",
            min_margin=float(m0.min()),
        )
    w = float(v @ v)
    if w == 0.0:
        return eta_star
    floor = eps_feas * m0

    def admissible(eta):
        cand = theta - (2.0 * eta * r / (1.0 + 2.0 * eta * w)) * v
        return bool(np.all(constraints.margins(cand) >= floor))

    eta = eta_star
    while not admissible(eta):
        eta *= 0.5
        if eta < eta_min:
            raise InfeasibleStepError(
                f"no admissible step above eta_min={eta_min:g} "
                f"(eps_feas={eps_feas}, min margin {m0.min():.3e})"
            )
    return eta
