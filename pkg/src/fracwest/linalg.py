"""Sparse symmetric solvers used by the time stepper.

Matrices are :class:`scipy.sparse.csr_matrix` objects. Narrow-band systems
(1D meshes) go through a banded Cholesky factorisation; wider ones through
Jacobi-preconditioned conjugate gradients.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NotSPDError

__all__ = ["matvec", "bandwidth", "solve_spd", "cg_solve", "BANDED_MAX_BANDWIDTH"]

BANDED_MAX_BANDWIDTH = 4
CG_TOL = 1e-10


def matvec(A, x):
    """``A @ x`` with a dimension check."""
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def bandwidth(A):
    A = sp.coo_matrix(A)
    if A.nnz == 0:
        return 0
    return int(np.max(np.abs(A.row - A.col)))


def _banded_cholesky_solve(A, b):
    n = A.shape[0]
    u = bandwidth(A)
    A = sp.coo_matrix(A)
    upper = A.row <= A.col
    ab = np.zeros((u + 1, n))
    ab[u + A.row[upper] - A.col[upper], A.col[upper]] = A.data[upper]
    try:
        factor = sla.cholesky_banded(ab, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"banded Cholesky hit a nonpositive pivot: {exc}") from exc
    return sla.cho_solve_banded((factor, False), b, check_finite=False)


def cg_solve(A, b, tol=CG_TOL, x0=None, precondition=True, maxiter=None):
    """Conjugate gradients; returns ``(x, iterations)``.

    Raises :class:`NotSPDError` if the relative residual does not drop below
    ``tol`` within ``maxiter`` (default ``10 n``) iterations.
    """
    n = A.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    M = None
    if precondition:
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotSPDError("matrix has a nonpositive diagonal entry")
        M = sp.diags(1.0 / d)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if info != 0 or not np.isfinite(res):
        raise NotSPDError(
            f"CG did not converge in {maxiter} iterations (relative residual {res:.3e})",
            residual=res,
        )
    return x, count[0]


def solve_spd(A, b, tol=None, method=None, x0=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Parameters
    ----------
    method : {None, "banded", "cg"}
        ``None`` selects banded Cholesky when the bandwidth is at most
        ``BANDED_MAX_BANDWIDTH`` and CG otherwise.
    tol : float, optional
        Relative residual target of CG (default ``1e-10``); ignored by the
        direct solver.
    """
    b = np.asarray(b, dtype=float)
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {b.shape}")
    if not np.any(b):
        return np.zeros_like(b)
    if method is None:
        method = "banded" if bandwidth(A) <= BANDED_MAX_BANDWIDTH else "cg"
    if method == "banded":
        x = _banded_cholesky_solve(A, b)
        if not np.all(np.isfinite(x)):
            raise NotSPDError("banded solve produced non-finite values")
        return x
    if method == "cg":
        return cg_solve(A, b, tol=CG_TOL if tol is None else tol, x0=x0)[0]
    raise ValueError(f"unknown method {method!r}")
