"""Low-memory CUR-form pivoted elimination driven purely by matvecs.

The rank-k approximation is held as row indices I, column indices J, and
the k-by-k core A[I, J]; rows and columns of the residual are re-derived
on demand from matvecs with the accessor, and a maintained vector of
squared residual row norms drives pivot selection.  Working storage stays
at O(k^2 + n + m) scalars, all routed through :mod:`rplu.memtrack`.

Per iteration the build performs exactly 4 applications of A and 2 of its
transpose (plus the initial row-norm pass); the step-0 projections run on
all-zero index sets so the ledger is uniform from the first step.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import memtrack
from .accessors import MatrixAccessor
from .rng import RngState, sample_index

__all__ = [
    "CurFactorization",
    "CurBuildInfo",
    "cur_build",
    "core_extend",
    "residual_column",
    "residual_row",
]

CUR_RULES = ("rplu-cur", "c2plu-cur")

#: Relative threshold below which the block-inverse pivot complement is
#: considered degenerate and the core falls back to the QR representation.
SIGMA_DEGENERATE = 1e-14

#: Fraction of clamped row norms in one step that triggers a full rebuild.
CLAMP_REBUILD_FRACTION = 0.01


class CurFactorization:
    """Skeleton indices plus a stable solver for the core A[I, J].

    ``mode='qr'`` (default) stores the core and refreshes its QR
    factorization on every extension; ``mode='inverse'`` maintains the
    explicit inverse by block updates and falls back to QR when the pivot
    complement is numerically degenerate.  Instances are immutable;
    :meth:`extended` returns a new factorization.
    """

    def __init__(self, mode="qr"):
        if mode not in ("qr", "inverse"):
            raise ValueError(f"unknown core mode {mode!r}")
        self.row_indices = []
        self.col_indices = []
        self.mode = mode
        self.fell_back = False
        self._W = memtrack.alloc((0, 0))
        self._Q = memtrack.alloc((0, 0))
        self._R = memtrack.alloc((0, 0))
        self._U = memtrack.alloc((0, 0))

    @property
    def rank(self):
        return len(self.row_indices)

    def core_matrix(self):
        return self._W.copy()

    def core_solve(self, v):
        """Solve A[I, J] x = v."""
        if self.rank == 0:
            return np.zeros(0, dtype=np.complex128)
        if self.mode == "inverse":
            return self._U @ v
        y = self._Q.conj().T @ v
        return scipy.linalg.solve_triangular(self._R, y)

    def core_solve_t(self, v):
        """Solve A[I, J]^T x = v (plain transpose)."""
        if self.rank == 0:
            return np.zeros(0, dtype=np.complex128)
        if self.mode == "inverse":
            return self._U.T @ v
        y = scipy.linalg.solve_triangular(self._R, v, trans="T")
        return self._Q.conj() @ y

    def extended(self, i_new, j_new, w, z, omega):
        """Grow by one pivot: w = A[I, j_new], z = A[i_new, J], omega = A[i_new, j_new]."""
        k = self.rank
        out = CurFactorization.__new__(CurFactorization)
        out.row_indices = self.row_indices + [int(i_new)]
        out.col_indices = self.col_indices + [int(j_new)]
        out.fell_back = self.fell_back
        out.mode = self.mode

        W = memtrack.alloc((k + 1, k + 1))
        W[:k, :k] = self._W
        W[:k, k] = w
        W[k, :k] = z
        W[k, k] = omega
        out._W = W

        if out.mode == "inverse":
            Uw = self._U @ w if k else np.zeros(0, dtype=np.complex128)
            zU = self._U.T @ z if k else np.zeros(0, dtype=np.complex128)
            sigma = omega - (z @ Uw if k else 0.0)
            guard = abs(omega) + (np.linalg.norm(z) * np.linalg.norm(Uw) if k else 0.0)
            if abs(sigma) <= SIGMA_DEGENERATE * max(guard, 1e-300):
                out.mode = "qr"
                out.fell_back = True
                warnings.warn("degenerate pivot complement in block-inverse "
                              "update; core fell back to QR", stacklevel=2)
            else:
                U = memtrack.alloc((k + 1, k + 1))
                U[:k, :k] = self._U + np.outer(Uw, zU) / sigma
                U[:k, k] = -Uw / sigma
                U[k, :k] = -zU / sigma
                U[k, k] = 1.0 / sigma
                out._U = U
                out._Q = self._Q
                out._R = self._R
                return out
        # QR representation, recomputed from the stored core each extension.
        q, r = scipy.linalg.qr(W)
        out._Q = memtrack.alloc(q.shape)
        out._Q[:] = q
        out._R = memtrack.alloc(r.shape)
        out._R[:] = r
        out._U = self._U
        return out


def core_extend(fact, w, z, omega, i_new=-1, j_new=-1):
    """Return the factorization grown by one pivot (index bookkeeping optional)."""
    return fact.extended(i_new, j_new, np.asarray(w, dtype=np.complex128),
                         np.asarray(z, dtype=np.complex128), complex(omega))


@dataclass
class CurBuildInfo:
    """History summary of a CUR build: norm totals, clamping, and flags."""

    total_sq_norms: list = field(default_factory=list)
    clamped: list = field(default_factory=list)
    rebuilds: int = 0
    degenerate_stop: bool = False
    tol_stop: bool = False
    row_norms: np.ndarray = None


def _tracked(x):
    """Copy a result into a tracked buffer so the memory audit sees it."""
    out = memtrack.alloc(x.shape, dtype=x.dtype)
    out[:] = x
    return out


def _column_of(A, j):
    e = memtrack.alloc(A.shape[1])
    e[j] = 1.0
    return _tracked(A.apply(e))


def _row_of(A, i):
    # Row i as a length-m vector: conj(A* e_i).
    e = memtrack.alloc(A.shape[0])
    e[i] = 1.0
    return _tracked(np.conj(A.adjoint_apply(e)))


def _apply_columns(A, cols, w):
    """A[:, cols] @ w through one full matvec on a scattered vector."""
    v = memtrack.alloc(A.shape[1])
    if len(cols):
        v[cols] = w
    return _tracked(A.apply(v))


def _tapply_rows(A, rows, w):
    """A[rows, :]^T @ w through one transpose matvec on a scattered vector."""
    v = memtrack.alloc(A.shape[0])
    if len(rows):
        v[rows] = w
    return _tracked(np.conj(A.adjoint_apply(np.conj(v))))


def residual_column(A, fact, j):
    """Column j of the residual A - A[:, J] U A[I, :]; two matvecs."""
    c = _column_of(A, j)
    proj = _apply_columns(A, fact.col_indices, fact.core_solve(c[fact.row_indices]))
    return c - proj


def residual_row(A, fact, i):
    """Row i of the residual, as a length-m vector; two transpose matvecs."""
    r = _row_of(A, i)
    proj = _tapply_rows(A, fact.row_indices, fact.core_solve_t(r[fact.col_indices]))
    return r - proj


def _rebuild_row_norms(A, fact, out):
    """Recompute maintained norms from scratch, one residual column at a time."""
    out[:] = 0.0
    for j in range(A.shape[1]):
        c = residual_column(A, fact, j)
        out += np.abs(c) ** 2


def cur_build(A, rule, rank, stop_tol=0.0, rng=None, core_mode="qr"):
    """Build a rank-``rank`` CUR skeleton from matvecs alone.

    ``rule`` is ``'rplu-cur'`` (squared-norm row draw then squared-entry
    column draw) or ``'c2plu-cur'`` (the greedy max/max variant).  Stops
    early when the maintained total squared norm falls to ``stop_tol**2``
    times its initial value, or when a sampled residual row is numerically
    zero (one resample, then a degenerate-stop flag).

    Returns ``(CurFactorization, CurBuildInfo)``.
    """
    if rule not in CUR_RULES:
        raise ValueError(f"unknown CUR rule {rule!r}")
    if rule == "rplu-cur" and rng is None:
        raise ValueError("rplu-cur needs an RngState")
    A.require("apply", "adjoint_apply", "row_norms")
    n, m = A.shape
    if not 0 <= rank <= min(n, m):
        raise ValueError(f"rank {rank} out of range [0, {min(n, m)}]")

    info = CurBuildInfo()
    fact = CurFactorization(mode=core_mode)

    n_row = memtrack.alloc(n, dtype=float)
    n_row[:] = np.asarray(A.row_norms(), dtype=float)
    total0 = float(np.sum(n_row))
    info.total_sq_norms.append(total0)
    if total0 == 0.0:
        info.degenerate_stop = True
        info.row_norms = n_row
        return fact, info

    eps = np.finfo(float).eps

    for _ in range(rank):
        if np.sum(n_row) <= 0.0:
            info.degenerate_stop = True
            break

        # Step 1: pivot row, then pivot column from the residual row.
        i, rhat, r = _draw_row(A, fact, rule, n_row, rng)
        row_energy = float(np.sum(np.abs(rhat) ** 2))
        if row_energy <= (eps ** 2) * total0:
            i, rhat, r = _draw_row(A, fact, rule, n_row, rng)  # one resample
            row_energy = float(np.sum(np.abs(rhat) ** 2))
            if row_energy <= (eps ** 2) * total0:
                info.degenerate_stop = True
                break
        if rule == "rplu-cur":
            j = sample_index(np.abs(rhat) ** 2, rng.uniform())
        else:
            j = int(np.argmax(np.abs(rhat)))
        a = rhat[j]

        c = _column_of(A, j)                                     # 1 M(A)
        chat = c - _apply_columns(A, fact.col_indices,
                                  fact.core_solve(c[fact.row_indices]))  # 1 M(A)
        chat = _tracked(chat)

        # Step 2: downdate the squared row norms.
        l = _tracked(np.conj(rhat) / np.conj(a))
        g = _tracked(A.apply(l))                                 # 1 M(A)
        v = _apply_columns(A, fact.col_indices,
                           fact.core_solve(g[fact.row_indices]))         # 1 M(A)
        prev_total = info.total_sq_norms[-1]
        n_row -= 2.0 * np.real((g - v) * np.conj(chat))
        n_row += float(np.real(np.vdot(l, l))) * (np.abs(chat) ** 2)

        # Count only material clamps; eliminated rows jitter around zero at
        # machine noise and should not trigger a repair.
        floor = np.finfo(float).eps * prev_total / n
        clamped = int(np.count_nonzero(n_row < -floor))
        np.clip(n_row, 0.0, None, out=n_row)
        info.clamped.append(clamped)

        # Step 3: extend the core and the index sets.
        fact = fact.extended(i, j, c[fact.row_indices], r[fact.col_indices], r[j])

        if clamped > CLAMP_REBUILD_FRACTION * n:
            _rebuild_row_norms(A, fact, n_row)
            info.rebuilds += 1

        info.total_sq_norms.append(float(np.sum(n_row)))
        if stop_tol > 0 and info.total_sq_norms[-1] <= (stop_tol ** 2) * total0:
            info.tol_stop = True
            break

    info.row_norms = n_row
    return fact, info


def _draw_row(A, fact, rule, n_row, rng):
    """Select a pivot row and return (i, residual row, raw row)."""
    if rule == "rplu-cur":
        i = sample_index(n_row, rng.uniform())
    else:
        i = int(np.argmax(n_row))
    r = _row_of(A, i)                                            # 1 M(A^T)
    rhat = _tracked(r - _tapply_rows(A, fact.row_indices,
                                     fact.core_solve_t(r[fact.col_indices])))  # 1 M(A^T)
    return i, rhat, r
