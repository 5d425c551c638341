"""Reference decompositions and shared numeric utilities.

Holds the exact SVD oracle used by tests and sweeps, a single-pass
randomized SVD baseline, and the map ``C -> C - C^2/tr(C)`` that governs
the expected one-step residual of squared-weight pivot sampling.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .accessors import MatrixAccessor, materialize, unit_vector

__all__ = [
    "SvdResult",
    "ZeroTraceWarning",
    "svd_oracle",
    "truncated_svd_error",
    "randomized_svd",
    "phi_map",
    "phi_trace_ratio_limit",
]

#: Largest dense side the exact SVD oracle is validated for.
SVD_ORACLE_MAX_SIDE = 2000


class ZeroTraceWarning(UserWarning):
    """The expected-residual map was handed a zero (or fully drained) matrix."""


@dataclass
class SvdResult:
    """Full or truncated SVD factors with nonincreasing singular values."""

    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray

    def reconstruct(self):
        return (self.U * self.s) @ self.Vh

    @property
    def rank(self):
        return self.s.size


def _as_dense(A):
    if isinstance(A, MatrixAccessor):
        return materialize(A)
    return np.asarray(A, dtype=np.complex128)


def svd_oracle(A):
    """Exact dense SVD (LAPACK bidiagonalization), desk scale only."""
    a = _as_dense(A)
    if max(a.shape) > SVD_ORACLE_MAX_SIDE:
        raise ValueError(f"svd_oracle is limited to {SVD_ORACLE_MAX_SIDE} per side")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix entries must be finite")
    U, s, Vh = np.linalg.svd(a, full_matrices=False)
    return SvdResult(U, s, Vh)


def truncated_svd_error(A, k):
    """Optimal rank-k errors: (sqrt(sum of trailing sigma^2), sigma_{k+1})."""
    a = _as_dense(A)
    r = min(a.shape)
    if not 0 <= k <= r:
        raise ValueError(f"rank {k} out of range [0, {r}]")
    s = svd_oracle(a).s
    tail = s[k:]
    frob = float(np.sqrt(np.sum(tail**2)))
    spec = float(s[k]) if k < r else 0.0
    return frob, spec


def randomized_svd(A, k, oversample=10, rng=None, power_iters=0):
    """Sketch-based rank-k factorization of an implicit operator.

    Uses exactly ``(power_iters + 1) * (k + oversample)`` applications of the
    operator and the same number of its adjoint, plus one small dense SVD.
    The default ``power_iters=0`` is the plain single-pass scheme.
    """
    if rng is None:
        raise ValueError("randomized_svd needs an explicit RngState")
    if isinstance(A, MatrixAccessor):
        A.require("apply", "adjoint_apply")
        n, m = A.shape
        apply_ = A.apply
        adjoint = A.adjoint_apply
    else:
        a = np.asarray(A, dtype=np.complex128)
        n, m = a.shape
        apply_ = lambda v: a @ v
        adjoint = lambda v: a.conj().T @ v
    ell = k + oversample
    if not 0 <= k or ell > min(n, m):
        raise ValueError(f"rank {k} + oversample {oversample} exceeds min(n, m)")
    if k == 0:
        return SvdResult(np.zeros((n, 0)), np.zeros(0), np.zeros((0, m)))

    omega = rng.complex_normal((m, ell))
    Y = np.column_stack([apply_(omega[:, t]) for t in range(ell)])
    Q, _ = np.linalg.qr(Y)
    for _ in range(power_iters):
        Z = np.column_stack([adjoint(Q[:, t]) for t in range(ell)])
        Z, _ = np.linalg.qr(Z)
        Y = np.column_stack([apply_(Z[:, t]) for t in range(ell)])
        Q, _ = np.linalg.qr(Y)
    # B = Q* A, assembled column block by adjoint matvecs: B = (A* Q)*.
    B = np.column_stack([adjoint(Q[:, t]) for t in range(ell)]).conj().T
    Ub, s, Vh = np.linalg.svd(B, full_matrices=False)
    U = Q @ Ub[:, :k]
    return SvdResult(U, s[:k], Vh[:k, :])


def _check_psd_input(C, tol_factor=1e-8):
    c = np.asarray(C, dtype=np.complex128)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("expected a square matrix")
    herm_gap = np.max(np.abs(c - c.conj().T))
    scale = max(np.max(np.abs(c)), 1e-300)
    if herm_gap > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian to working precision")
    c = 0.5 * (c + c.conj().T)
    t = float(np.trace(c).real)
    if t > 0:
        lo = float(np.linalg.eigvalsh(c)[0])
        if lo < -tol_factor * t:
            raise ValueError("matrix is not positive semidefinite to tolerance")
    return c, t


def phi_map(C):
    """Expected one-step residual map for squared-weight sampling on PSD input.

    Returns ``C - C^2/tr(C)``; a zero-trace input is its own fixed point and
    comes back unchanged with a :class:`ZeroTraceWarning`.
    """
    c, t = _check_psd_input(C)
    if t <= 0:
        warnings.warn("phi_map of a zero-trace matrix; returning it unchanged",
                      ZeroTraceWarning, stacklevel=2)
        return c
    out = c - (c @ c) / t
    return 0.5 * (out + out.conj().T)


def phi_trace_ratio_limit(C, iters):
    """Consecutive trace ratios of the iterated expected-residual map.

    For inputs of rank r >= 2 the ratios tend to 1 - 1/r.  The iterate is
    renormalized to unit trace each step (the map is degree-1 homogeneous,
    so the ratios are unaffected and 500-step runs cannot underflow).
    A drained iterate reports the remaining ratios as 0 and warns.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    c, t = _check_psd_input(C)
    if t <= 0:
        raise ValueError("zero matrix has no trace ratios")
    ratios = np.zeros(iters)
    cur = c / t
    for k in range(iters):
        nxt = cur - cur @ cur  # phi on a unit-trace iterate
        nxt = 0.5 * (nxt + nxt.conj().T)
        tn = float(np.trace(nxt).real)
        if tn <= 0:
            ratios[k] = 0.0
            if k + 1 < iters:
                warnings.warn(
                    "trace drained to zero; remaining ratios reported as 0",
                    ZeroTraceWarning, stacklevel=2)
            ratios[k + 1:] = 0.0
            break
        ratios[k] = tn
        cur = nxt / tn
    return ratios
