"""Wasserstein natural-gradient machinery on a staggered grid.

For a parametric density ``rho(theta)`` on a rectangle, the Wasserstein metric
pulls back to ``G_ij = <v_i, v_j>`` where ``v_i`` is the minimum-norm velocity
field reproducing the density perturbation ``d rho / d theta_i`` through the
weighted continuity equation ``-div(sqrt(rho) v) = d rho / d theta_i``.

Velocities live on interior cell faces of a MAC-staggered mesh with zero
normal flux through the boundary, so the discrete weighted divergence ``M``
conserves mass exactly (columns sum to zero) and its transpose is the exact
negative adjoint: ``<M^T phi, v> = <phi, M v>`` by summation by parts.  That
compatibility is what lets the lifted least-squares direction agree with the
metric solve ``-G^{-1} grad L`` to solver precision.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConfigError, NumericsError, SpdFactorizationError
from .linalg import SpdFactor
from .preconditioners import Preconditioner

__all__ = [
    "Grid2D",
    "assemble_divergence",
    "mean_project",
    "LiftSolver",
    "LiftResult",
    "tangent_lift",
    "information_matrix",
    "WassersteinWorkspace",
    "NaturalDirection",
    "natural_direction",
    "weighted_gradient",
    "GaussianMixtureModel",
    "mixture_loss",
    "WassersteinPreconditioner",
    "dump_field_csv",
]


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centered rectangle ``[lo, hi] x [lo, lo + ny*dx]``.

    ``nx`` cells along x and ``ny`` along y, all square with side
    ``dx = (hi - lo)/nx``.  ``square(lo, hi, n)`` gives the usual n x n box;
    ``strip(lo, hi, n)`` a one-cell-tall strip whose face unknowns reduce to a
    classic 1-D problem.  Cells are indexed ``id = ix*ny + iy`` (C order);
    interior x-faces come first in the face numbering, then y-faces.
    """

    lo: float
    hi: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.hi <= self.lo:
            raise ConfigError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("grid needs at least one cell per axis")

    @classmethod
    def square(cls, lo, hi, n):
        return cls(lo, hi, n, n)

    @classmethod
    def strip(cls, lo, hi, n):
        return cls(lo, hi, n, 1)

    @property
    def dx(self):
        return (self.hi - self.lo) / self.nx

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def n_faces(self):
        return (self.nx - 1) * self.ny + self.nx * (self.ny - 1)

    @property
    def cell_weight(self):
        """Quadrature weight per cell (and per interior face), dx^2."""
        return self.dx * self.dx

    def cell_centers(self):
        """Meshgrids ``(X, Y)`` of shape ``(nx, ny)``; flatten in C order for cell ids."""
        xs = self.lo + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.lo + (np.arange(self.ny) + 0.5) * self.dx
        return np.meshgrid(xs, ys, indexing="ij")

    def face_cells(self):
        """Cell ids on the negative/positive side of each interior face."""
        ny = self.ny
        ix, iy = np.meshgrid(np.arange(self.nx - 1), np.arange(ny), indexing="ij")
        left_x = (ix * ny + iy).ravel()
        right_x = ((ix + 1) * ny + iy).ravel()
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(ny - 1), indexing="ij")
        left_y = (ix * ny + iy).ravel()
        right_y = (ix * ny + iy + 1).ravel()
        return np.concatenate([left_x, left_y]), np.concatenate([right_x, right_y])

    def face_centers(self):
        """Coordinates and axis (0=x, 1=y) of each interior face center."""
        dx = self.dx
        ix, iy = np.meshgrid(np.arange(self.nx - 1), np.arange(self.ny), indexing="ij")
        fx_x = (self.lo + (ix.ravel() + 1.0) * dx)
        fy_x = (self.lo + (iy.ravel() + 0.5) * dx)
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny - 1), indexing="ij")
        fx_y = (self.lo + (ix.ravel() + 0.5) * dx)
        fy_y = (self.lo + (iy.ravel() + 1.0) * dx)
        fx = np.concatenate([fx_x, fx_y])
        fy = np.concatenate([fy_x, fy_y])
        axis = np.concatenate(
            [np.zeros((self.nx - 1) * self.ny, dtype=int), np.ones(self.nx * (self.ny - 1), dtype=int)]
        )
        return fx, fy, axis


def assemble_divergence(grid, rho_cells):
    """Sparse weighted divergence ``M`` with ``(M v)_c = -div(sqrt(rho) v)_c``.

    ``rho_cells`` is the strictly positive cell density (flattened, C order);
    face values of ``sqrt(rho)`` are arithmetic means of the adjacent cell
    values.  Shape ``(n_cells, n_faces)``; every column sums to zero, so
    ``sum_c (M v)_c = 0`` for any face field up to roundoff, and ``ker(M^T)``
    is exactly the constants.
    """
    rho = np.asarray(rho_cells, dtype=float).ravel()
    if rho.size != grid.n_cells:
        raise ConfigError(f"rho has {rho.size} cells, grid expects {grid.n_cells}")
    if not np.all(rho > 0.0):
        raise ConfigError(f"rho must be strictly positive (min {rho.min():.3e})")
    sq = np.sqrt(rho)
    left, right = grid.face_cells()
    s = 0.5 * (sq[left] + sq[right]) / grid.dx
    nf = grid.n_faces
    cols = np.concatenate([np.arange(nf), np.arange(nf)])
    rows = np.concatenate([left, right])
    data = np.concatenate([-s, s])
    return scipy.sparse.csr_matrix((data, (rows, cols)), shape=(grid.n_cells, nf))


def mean_project(grid, g_cells):
    """Remove the cell mean from ``g`` (compatibility with ``range(M)``).

    Returns ``(g_projected, projected_mass)`` where the mass is the integral
    ``|sum_c g_c| dx^2`` removed by the projection.
    """
    g = np.asarray(g_cells, dtype=float).ravel()
    total = float(g.sum())
    return g - total / g.size, abs(total) * grid.cell_weight


@dataclass(frozen=True)
class LiftResult:
    v: np.ndarray
    residual: float
    projected_mass: float
    refinements: int


class LiftSolver:
    """Factorized minimum-norm solver for ``M v = g`` with ``v = M^T lambda``.

    The normal matrix ``A = M M^T`` is singular (constants); a relative ridge
    ``1e-12 tr(A)/n`` regularizes the factorization and iterative refinement
    against the unridged ``A`` removes the bias down to the requested residual.
    """

    def __init__(self, M, ridge_rel=1e-12):
        self.M = M.tocsr()
        A = (M @ M.T).tocsc()
        n = A.shape[0]
        self.A = A
        self.ridge = ridge_rel * A.diagonal().sum() / n
        self._lu = scipy.sparse.linalg.splu(A + self.ridge * scipy.sparse.identity(n, format="csc"))

    def lift(self, grid, g_cells, tol=1e-8, max_refine=30):
        """Minimum-norm face field with ``||M v - g_projected|| <= tol ||g_projected||``."""
        g, mass = mean_project(grid, g_cells)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            return LiftResult(np.zeros(self.M.shape[1]), 0.0, mass, 0)
        lam = self._lu.solve(g)
        used = 0
        for used in range(1, max_refine + 1):
            res = g - self.A @ lam
            if float(np.linalg.norm(res)) <= 0.1 * tol * gn:
                break
            lam = lam + self._lu.solve(res)
        v = self.M.T @ lam
        resid = float(np.linalg.norm(self.M @ v - g)) / gn
        if resid > tol:
            raise NumericsError(
                f"tangent lift stalled at relative residual {resid:.3e} (tol {tol:g})"
            )
        return LiftResult(v, resid, mass, used)


def tangent_lift(grid, M, g_cells, tol=1e-8, solver=None):
    """Minimum-norm solve of the weighted continuity equation ``M v = g``.

    Convenience wrapper building (or reusing) a :class:`LiftSolver`.
    """
    if solver is None:
        solver = LiftSolver(M)
    return solver.lift(grid, g_cells, tol=tol)


def information_matrix(lifts, cell_weight):
    """Gram matrix ``G_ij = <v_i, v_j> dx^2`` of lifted tangent fields; symmetric PSD."""
    V = np.asarray(lifts, dtype=float)
    G = cell_weight * (V.T @ V)
    return 0.5 * (G + G.T)


@dataclass(frozen=True)
class WassersteinWorkspace:
    """Everything assembled at one parameter point ``theta``.

    ``lifts`` has one column per parameter: the minimum-norm velocity for the
    mean-projected density perturbation ``drho_projected[:, i]``.
    """

    grid: Grid2D
    theta: np.ndarray
    rho: np.ndarray
    M: scipy.sparse.csr_matrix
    solver: LiftSolver
    lifts: np.ndarray
    drho_projected: np.ndarray
    G: np.ndarray
    lift_residuals: np.ndarray
    projected_masses: np.ndarray

    @classmethod
    def build(cls, model, grid, theta, lift_tol=1e-8):
        theta = np.asarray(theta, dtype=float)
        rho = model.rho_cells(grid, theta)
        floor = 1e-12 * float(rho.max())
        rho = np.maximum(rho, floor)
        M = assemble_divergence(grid, rho)
        solver = LiftSolver(M)
        drho = model.drho_cells(grid, theta)
        p = drho.shape[1]
        V = np.empty((grid.n_faces, p))
        P = np.empty_like(drho)
        resid = np.empty(p)
        mass = np.empty(p)
        for i in range(p):
            out = solver.lift(grid, drho[:, i], tol=lift_tol)
            V[:, i] = out.v
            P[:, i], _ = mean_project(grid, drho[:, i])
            resid[i] = out.residual
            mass[i] = out.projected_mass
        G = information_matrix(V, grid.cell_weight)
        return cls(grid, theta, rho, M, solver, V, P, G, resid, mass)


@dataclass(frozen=True)
class NaturalDirection:
    p: np.ndarray
    beta: np.ndarray
    ridged: bool


def _metric_solve(G, rhs):
    """Solve ``G x = rhs``; fall back to a ridged least-squares pseudo-solve."""
    try:
        return SpdFactor(G, "information matrix").solve(rhs), False
    except SpdFactorizationError:
        n = G.shape[0]
        ridge = 1e-12 * max(np.trace(G) / n, 1.0)
        warnings.warn(
            f"information matrix not SPD; using ridge {ridge:.3e} pseudo-solve",
            RuntimeWarning,
            stacklevel=3,
        )
        x, *_ = np.linalg.lstsq(G + ridge * np.eye(n), rhs, rcond=None)
        return x, True


def weighted_gradient(workspace, cells):
    """Faces field ``M^T phi``: the staggered ``sqrt(rho) grad phi`` (exact adjoint)."""
    return workspace.M.T @ np.asarray(cells, dtype=float).ravel()


def natural_direction(workspace, df_faces):
    """Least-squares parameter velocity against the lifted tangent frame.

    Solves ``min_p || dF + sum_i p_i v_i ||`` through its normal equations
    ``G p = -beta`` with ``beta_i = <v_i, dF> dx^2``; ``dF`` is the face field
    ``weighted_gradient(workspace, d f / d rho)``.  Equals the metric solve
    ``-G^{-1} grad L`` up to the lift residuals.
    """
    df = np.asarray(df_faces, dtype=float)
    if df.size != workspace.grid.n_faces:
        raise ConfigError(
            f"dF has {df.size} entries, expected one per interior face ({workspace.grid.n_faces})"
        )
    beta = workspace.grid.cell_weight * (workspace.lifts.T @ df)
    p, ridged = _metric_solve(workspace.G, -beta)
    return NaturalDirection(p, beta, ridged)


# ---------------------------------------------------------------------------
# Gaussian-mixture density model


@dataclass(frozen=True)
class GaussianMixtureModel:
    """Two unit-covariance Gaussians with movable first mean coordinates.

    ``rho(x; theta) = w N(x; (theta_1, anchor1), I) + (1-w) N(x; (theta_2, anchor2), I)``.
    The target density is the model at ``target_theta``, so the loss
    ``L = 0.5 integral (rho - rho*)^2`` has global minimum exactly zero.
    """

    weight: float = 0.05
    anchor1: float = 3.0
    anchor2: float = 2.0
    target_theta: tuple = (1.0, 3.0)

    def __post_init__(self):
        if not 0.0 < self.weight < 1.0:
            raise ConfigError(f"mixture weight must lie in (0, 1), got {self.weight}")

    def _components(self, grid, theta):
        X, Y = grid.cell_centers()
        x = X.ravel()
        y = Y.ravel()
        n1 = np.exp(-0.5 * ((x - theta[0]) ** 2 + (y - self.anchor1) ** 2)) / (2.0 * np.pi)
        n2 = np.exp(-0.5 * ((x - theta[1]) ** 2 + (y - self.anchor2) ** 2)) / (2.0 * np.pi)
        return x, n1, n2

    def rho_cells(self, grid, theta):
        _, n1, n2 = self._components(grid, theta)
        return self.weight * n1 + (1.0 - self.weight) * n2

    def drho_cells(self, grid, theta):
        x, n1, n2 = self._components(grid, theta)
        d1 = self.weight * n1 * (x - theta[0])
        d2 = (1.0 - self.weight) * n2 * (x - theta[1])
        return np.column_stack([d1, d2])

    def target_cells(self, grid):
        return self.rho_cells(grid, np.asarray(self.target_theta, dtype=float))


def mixture_loss(model, grid, theta):
    """Quadrature loss ``0.5 sum (rho - rho*)^2 dx^2`` and its exact gradient."""
    theta = np.asarray(theta, dtype=float)
    w = grid.cell_weight
    diff = model.rho_cells(grid, theta) - model.target_cells(grid)
    L = 0.5 * w * float(diff @ diff)
    grad = w * (diff @ model.drho_cells(grid, theta))
    return L, grad


def dump_field_csv(path, grid, cells):
    """Write a cell field as an ``nx x ny`` CSV grid (rows = x index) for plotting."""
    cells = np.asarray(cells, dtype=float).reshape(grid.nx, grid.ny)
    with open(path, "w", newline="") as fh:
        for row in cells:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


class WassersteinPreconditioner(Preconditioner):
    """Inverse Wasserstein information matrix as an energy-scheme preconditioner.

    Workspaces (divergence operator, lifts, ``G``) are rebuilt when ``theta``
    changes and cached for the current iterate, so ``apply`` and
    ``metric_apply`` within one iteration share the assembly.
    """

    def __init__(self, model, grid, lift_tol=1e-8):
        self.model = model
        self.grid = grid
        self.lift_tol = lift_tol
        self._key = None
        self._ws = None
        self.last_ridged = False

    def workspace(self, theta):
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key != self._key:
            self._ws = WassersteinWorkspace.build(self.model, self.grid, theta, self.lift_tol)
            self._key = key
        return self._ws

    def apply(self, theta, g):
        ws = self.workspace(theta)
        x, self.last_ridged = _metric_solve(ws.G, np.asarray(g, dtype=float))
        return x

    def metric_apply(self, theta, v):
        return self.workspace(theta).G @ np.asarray(v, dtype=float)

    def describe(self):
        return {
            "kind": "wasserstein",
            "grid": f"{self.grid.nx}x{self.grid.ny}",
            "lift_tol": self.lift_tol,
        }
