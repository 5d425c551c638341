"""Low-memory preconditioning of B + (low rank) systems, plus GMRES.

Given a fast solve with B and a CUR skeleton of the low-rank term, the
inverse of P = B + A[:, J] U A[I, :] is applied through the
Sherman-Morrison-Woodbury identity; only the k-by-k inner matrix
W + R B^{-1} C is ever formed (W = A[I, J]).  The solver is restarted
GMRES with modified Gram-Schmidt Arnoldi and right preconditioning, so
reported residuals belong to the original system.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .accessors import MatrixAccessor, unit_vector

__all__ = ["SmwPreconditioner", "smw_build", "gmres", "GmresResult"]

INNER_CONDITION_LIMIT = 1e15


def _apply_cols(A, cols, w):
    v = np.zeros(A.shape[1], dtype=np.complex128)
    v[cols] = w
    return A.apply(v)


class SmwPreconditioner:
    """Applies (B + A[:, J] U A[I, :])^{-1} with two matvecs and two B-solves.

    Reentrant: apply only reads the cached factors, so concurrent use is
    safe.  Working memory beyond the accessors is the k-by-k inner factor
    plus O(n) vectors.
    """

    def __init__(self, b_inv_apply, A, fact, inner_lu):
        self._b_inv = b_inv_apply
        self._A = A
        self._fact = fact
        self._inner_lu = inner_lu

    @property
    def rank(self):
        return self._fact.rank if self._fact is not None else 0

    def apply(self, v):
        u = self._b_inv(np.asarray(v, dtype=np.complex128))
        if self.rank == 0:
            return u
        I = self._fact.row_indices
        J = self._fact.col_indices
        s = self._A.apply(u)[I]                       # R_k B^{-1} v
        q = scipy.linalg.lu_solve(self._inner_lu, s)
        corr = self._b_inv(_apply_cols(self._A, J, q))
        return u - corr

    def __call__(self, v):
        return self.apply(v)


def smw_build(b_inv_apply, A, fact):
    """Assemble the preconditioner for P = B + A[:, J] U A[I, :].

    ``b_inv_apply`` applies B^{-1}; ``fact`` is a CUR factorization of A.
    The k-by-k inner matrix A[I, J] + A[I, :] B^{-1} A[:, J] is built with
    2k applications of A plus k of B^{-1}, then LU-factorized.  A singular
    inner matrix raises with advice to reduce the rank.
    """
    n, m = A.shape
    if n != m:
        raise ValueError("the preconditioned system must be square")
    k = fact.rank
    if k == 0:
        return SmwPreconditioner(b_inv_apply, A, fact, None)
    I = fact.row_indices
    J = fact.col_indices
    # G = A[I, :] B^{-1} A[:, J], one selected column at a time.
    G = np.empty((k, k), dtype=np.complex128)
    for t, j in enumerate(J):
        col = A.apply(unit_vector(m, j))
        G[:, t] = A.apply(b_inv_apply(col))[I]
    inner = fact.core_matrix() + G          # U^{-1} + R B^{-1} C, as A[I, J] + G
    cond = float(np.linalg.cond(inner))
    if not np.isfinite(cond) or cond > INNER_CONDITION_LIMIT:
        raise np.linalg.LinAlgError(
            f"inner SMW matrix has condition {cond:.2e}; reduce the CUR rank")
    lu = scipy.linalg.lu_factor(inner)
    return SmwPreconditioner(b_inv_apply, A, fact, lu)


@dataclass
class GmresResult:
    x: np.ndarray
    residuals: np.ndarray      # relative residual after each inner step
    iterations: int
    converged: bool
    stagnated: bool = False


def _as_apply(op):
    if isinstance(op, SmwPreconditioner):
        return op.apply
    if isinstance(op, MatrixAccessor):
        return op.apply
    if callable(op):
        return op
    a = np.asarray(op, dtype=np.complex128)
    return lambda v: a @ v


def gmres(K, b, M_inv=None, restart=20, tol=1e-10, max_restarts=200, x0=None):
    """Right-preconditioned restarted GMRES with modified Gram-Schmidt.

    ``K`` is an accessor, callable, or array for the system operator;
    ``M_inv`` (optional) applies the preconditioner inverse.  Right
    preconditioning keeps the tracked residual equal to that of the
    original system.  Returns the iterate, per-iteration relative
    residuals, and convergence/stagnation flags; stagnation within one
    restart cycle returns the best iterate with a flag.
    """
    if restart < 1:
        raise ValueError("restart must be >= 1")
    apply_k = _as_apply(K)
    apply_m = (lambda v: v) if M_inv is None else _as_apply(M_inv)
    b = np.asarray(b, dtype=np.complex128)
    n = b.size
    x = np.zeros(n, dtype=np.complex128) if x0 is None else np.asarray(x0, np.complex128).copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return GmresResult(x * 0.0, np.zeros(0), 0, True)

    history = []
    best_x, best_res = x.copy(), np.inf
    total_iters = 0

    for _ in range(max_restarts):
        r = b - apply_k(x)
        beta = float(np.linalg.norm(r))
        if beta / bnorm <= tol:
            return GmresResult(x, np.array(history), total_iters, True)
        cycle_start = beta / bnorm
        V = np.zeros((n, restart + 1), dtype=np.complex128)
        H = np.zeros((restart + 1, restart), dtype=np.complex128)
        cs = np.zeros(restart, dtype=np.complex128)
        sn = np.zeros(restart, dtype=np.complex128)
        g = np.zeros(restart + 1, dtype=np.complex128)
        V[:, 0] = r / beta
        g[0] = beta
        j_done = 0
        for j in range(restart):
            w = apply_k(apply_m(V[:, j]))
            for t in range(j + 1):
                H[t, j] = np.vdot(V[:, t], w)
                w = w - H[t, j] * V[:, t]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] > 0:
                V[:, j + 1] = w / H[j + 1, j]
            for t in range(j):
                tmp = cs[t] * H[t, j] + sn[t] * H[t + 1, j]
                H[t + 1, j] = -np.conj(sn[t]) * H[t, j] + np.conj(cs[t]) * H[t + 1, j]
                H[t, j] = tmp
            denom = np.sqrt(np.abs(H[j, j]) ** 2 + np.abs(H[j + 1, j]) ** 2)
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j] = np.conj(H[j, j]) / denom
                sn[j] = np.conj(H[j + 1, j]) / denom
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            total_iters += 1
            j_done = j + 1
            rel = float(np.abs(g[j + 1])) / bnorm
            history.append(rel)
            if rel <= tol:
                break
        y = scipy.linalg.solve_triangular(H[:j_done, :j_done], g[:j_done])
        x = x + apply_m(V[:, :j_done] @ y)
        true_rel = float(np.linalg.norm(b - apply_k(x))) / bnorm
        if true_rel < best_res:
            best_res, best_x = true_rel, x.copy()
        if true_rel <= tol:
            return GmresResult(x, np.array(history), total_iters, True)
        if cycle_start - true_rel < 1e-14 * cycle_start:
            warnings.warn("GMRES stagnated within one restart cycle; "
                          "returning the best iterate", stacklevel=2)
            return GmresResult(best_x, np.array(history), total_iters, False,
                               stagnated=True)
    return GmresResult(best_x, np.array(history), total_iters, False)
