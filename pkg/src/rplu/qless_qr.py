"""Q-less truncated pivoted QR and the projective CUR built on it.

Only the small triangular factor, the pivot list, and a vector of downdated
column norms are kept; the orthogonal factor is represented implicitly as
A[:, J] R^{-1} and applied through triangular solves.  Gram-Schmidt runs in
exactly two passes, with the second pass's coefficients added into the same
column of R.  Over the complex field the projections use the adjoint (the
real case coincides with the classical transposed formulas).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import memtrack
from .accessors import AdjointView, MatrixAccessor, unit_vector
from .rng import RngState, sample_index

__all__ = ["QlessQrResult", "qless_qr", "qr_cur", "QrCurResult"]

QR_RULES = ("greedy", "random")

#: Condition estimate above which the projective core solve warns.
CORE_CONDITION_WARN = 1e14


@dataclass
class QlessQrResult:
    """Triangular factor, pivot columns, and final downdated column norms."""

    R: np.ndarray
    col_indices: list
    col_norms: np.ndarray
    rank_deficient: bool = False
    clamped: int = 0
    norm_history: list = field(default_factory=list)


def qless_qr(A, rank, rule="greedy", rng=None):
    """Truncated pivoted QR without storing Q.

    Pivot columns are chosen greedily by largest downdated squared norm
    (ties to the lowest index) or sampled proportional to those norms.
    Stops early with a rank-deficiency flag when the new diagonal entry
    falls below machine precision relative to the matrix norm.
    """
    if rule not in QR_RULES:
        raise ValueError(f"unknown pivot rule {rule!r}")
    if rule == "random" and rng is None:
        raise ValueError("random column pivoting needs an RngState")
    A.require("apply", "adjoint_apply", "column")
    n, m = A.shape
    if not 0 <= rank <= min(n, m):
        raise ValueError(f"rank {rank} out of range [0, {min(n, m)}]")

    c = memtrack.alloc(m, dtype=float)
    c[:] = np.asarray(A.col_norms(), dtype=float)
    fro = float(np.sqrt(np.sum(c)))
    R = memtrack.alloc((rank, rank))
    cols = []
    clamped_total = 0
    rank_deficient = False
    history = [float(np.sum(c))]

    for k in range(rank):
        avail = c.copy()
        if cols:
            avail[cols] = 0.0
        if rule == "greedy":
            j = int(np.argmax(avail))
        else:
            if not np.any(avail > 0):
                rank_deficient = True
                break
            j = sample_index(avail, rng.uniform())
        u = memtrack.alloc(n)
        u[:] = A.column(j)                                      # 1 M(A)
        # Two Gram-Schmidt passes against Q = A[:, J] R^{-1}.
        for p in range(2):
            if k:
                v = A.adjoint_apply(u)[cols]                    # 1 M(A*)
                y = scipy.linalg.solve_triangular(R[:k, :k], v, trans="C")
                w = scipy.linalg.solve_triangular(R[:k, :k], y)
                u -= _apply_cols(A, cols, w)                    # 1 M(A)
                R[:k, k] += y
        rkk = float(np.linalg.norm(u))
        if rkk <= np.finfo(float).eps * max(fro, 1e-300):
            rank_deficient = True
            break
        R[k, k] = rkk
        u /= rkk
        cols.append(int(j))
        prev_total = history[-1]
        g = memtrack.alloc(m)
        g[:] = A.adjoint_apply(u)                               # 1 M(A*)
        c -= np.abs(g) ** 2
        clamped = int(np.count_nonzero(c < -np.finfo(float).eps * prev_total / m))
        clamped_total += clamped
        np.clip(c, 0.0, None, out=c)
        history.append(float(np.sum(c)))

    k = len(cols)
    return QlessQrResult(R=np.array(R[:k, :k]), col_indices=cols,
                         col_norms=np.asarray(c, dtype=float),
                         rank_deficient=rank_deficient,
                         clamped=clamped_total, norm_history=history)


def _apply_cols(A, cols, w):
    v = memtrack.alloc(A.shape[1])
    v[cols] = w
    return A.apply(v)


@dataclass
class QrCurResult:
    """Projective CUR skeleton: indices, core, and the two triangular factors."""

    row_indices: list
    col_indices: list
    core: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    col_result: QlessQrResult
    row_result: QlessQrResult


def qr_cur(A, rank, rule="greedy", rng=None):
    """CUR with a projective core from two Q-less pivoted QR runs.

    Columns come from a pivoted QR of A, rows from one of the adjoint; the
    core solves (R1* R1) U (R2* R2) = A[:, J]* A A[I, :]* with four
    triangular solves per column.  Ill-conditioned triangular factors are
    reported with a warning (the computation proceeds).
    """
    A.require("apply", "adjoint_apply")
    col_res = qless_qr(A, rank, rule=rule, rng=rng)
    row_res = qless_qr(AdjointView(A), rank, rule=rule,
                       rng=None if rng is None else RngState(rng.seed ^ 0x9E3779B97F4A7C15))
    J = col_res.col_indices
    I = row_res.col_indices
    k1, k2 = len(J), len(I)

    n, m = A.shape
    # Z = A[:, J]* A A[I, :]*, assembled with matvecs column by column.
    Z = np.zeros((k1, k2), dtype=np.complex128)
    for t, i in enumerate(I):
        y = A.adjoint_apply(unit_vector(n, i))                  # conj of row i
        My = A.apply(y)
        Z[:, t] = A.adjoint_apply(My)[J]

    for name, R in (("column", col_res.R), ("row", row_res.R)):
        kappa = _condition_estimate(R)
        if kappa ** 2 > CORE_CONDITION_WARN:
            warnings.warn(
                f"{name}-side normal equations have condition estimate "
                f"{kappa**2:.2e}; the projective core may be inaccurate",
                stacklevel=2)

    # (R1* R1) X = Z  and then  U (R2* R2) = X, via triangular solves.
    X = scipy.linalg.solve_triangular(col_res.R, Z, trans="C")
    X = scipy.linalg.solve_triangular(col_res.R, X)
    Xh = scipy.linalg.solve_triangular(row_res.R, X.conj().T, trans="C")
    Xh = scipy.linalg.solve_triangular(row_res.R, Xh)
    U = Xh.conj().T
    return QrCurResult(row_indices=I, col_indices=J, core=U,
                       R1=col_res.R, R2=row_res.R,
                       col_result=col_res, row_result=row_res)


def _condition_estimate(R, iters=5):
    """Power-iteration estimate of cond(R) using solves for the small side."""
    k = R.shape[0]
    if k == 0:
        return 1.0
    v = np.full(k, 1.0 / np.sqrt(k), dtype=np.complex128)
    hi = 1.0
    for _ in range(iters):
        v = R.conj().T @ (R @ v)
        hi = float(np.linalg.norm(v))
        if hi == 0.0:
            return np.inf
        v /= hi
    w = np.full(k, 1.0 / np.sqrt(k), dtype=np.complex128)
    lo = 1.0
    for _ in range(iters):
        w = scipy.linalg.solve_triangular(
            R, scipy.linalg.solve_triangular(R, w, trans="C"))
        lo = float(np.linalg.norm(w))
        if not np.isfinite(lo) or lo == 0.0:
            return np.inf
        w /= lo
    return float(np.sqrt(hi * lo))
