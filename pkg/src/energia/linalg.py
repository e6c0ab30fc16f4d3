"""Small dense linear-algebra helpers used by the preconditioners."""

import numpy as np
import scipy.linalg

from .errors import SpdFactorizationError


def check_symmetric(A, name="matrix", tol=1e-12):
    """Raise unless ``A`` is symmetric to ``tol`` relative."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SpdFactorizationError(f"{name} must be square, got shape {A.shape}")
    scale = max(np.abs(A).max(), 1.0)
    skew = np.abs(A - A.T).max()
    if skew > tol * scale:
        raise SpdFactorizationError(
            f"{name} is not symmetric: max asymmetry {skew:.3e} (scale {scale:.3e})"
        )
    return A


class SpdFactor:
    """Cached Cholesky factorization of a symmetric positive definite matrix."""

    def __init__(self, A, name="matrix"):
        A = check_symmetric(A, name)
        try:
            self._c, self._lower = scipy.linalg.cho_factor(A, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise SpdFactorizationError(f"{name} is not positive definite: {exc}") from exc
        self.shape = A.shape

    def solve(self, b):
        return scipy.linalg.cho_solve((self._c, self._lower), b)

    def logdet(self):
        return 2.0 * np.sum(np.log(np.diag(self._c)))


def spd_solve(A, b, name="matrix"):
    """Solve ``A x = b`` for symmetric positive definite ``A``."""
    return SpdFactor(A, name).solve(b)


def near_null_rows(S, B, name="constraint"):
    """Diagnose which rows of ``B`` make the Schur complement ``S = B G^-1 B^T`` singular.

    Returns a human-readable fragment naming the implicated row indices
    (components of the eigenvector for the smallest eigenvalue of ``S``).
    """
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    vec = np.abs(V[:, 0])
    rows = np.flatnonzero(vec > 0.5 * vec.max())
    return f"{name} rows {rows.tolist()} are linearly dependent (smallest eigenvalue {w[0]:.3e})"
