"""Dense pivoted eliminations with materialized residuals.

This is the naive path: the residual matrix is kept explicitly and updated
by rank-1 (or, for the symmetric rank-2 rule, rank-2) eliminations.  Pivots
are chosen by one of six rules:

``rplu``            pivot (i, j) sampled proportional to the squared residual
                    entry, drawn in two stages (row by squared row norm, then
                    column by squared entry within that row);
``cplu``            greedy largest-magnitude entry;
``c2plu``           greedy largest row norm, then largest entry in that row;
``rpcholesky``      PSD only, diagonal index sampled proportional to the
                    residual diagonal;
``greedy-cholesky`` PSD only, largest diagonal entry;
``srplu``           PSD only, squared-entry sampling with a symmetric rank-2
                    downdate that keeps the residual PSD.

Randomized rules consume their RNG stream in a documented order (row draw,
then column draw; the Cholesky rule uses a single diagonal draw), so other
implementations can replay the exact pivot sequence from the same seed.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .accessors import DenseMatrix
from .rng import RngState, sample_index

__all__ = [
    "PivotRule",
    "EliminationTrace",
    "eliminate",
    "srplu_step",
    "expected_onestep_gram",
    "expected_onestep_trace_comparison",
]

RULES = ("rplu", "cplu", "c2plu", "rpcholesky", "greedy-cholesky", "srplu")
_RANDOM_RULES = ("rplu", "rpcholesky", "srplu")
_PSD_RULES = ("rpcholesky", "greedy-cholesky", "srplu")

PSD_VALIDATION_TOL = 1e-8
SRPLU_PINV_TOL = 1e-12


@dataclass
class PivotRule:
    """A pivot selection rule; random rules carry their own RngState."""

    tag: str
    rng: RngState = None

    def __post_init__(self):
        if self.tag not in RULES:
            raise ValueError(f"unknown pivot rule {self.tag!r}")
        if self.tag in _RANDOM_RULES and self.rng is None:
            raise ValueError(f"rule {self.tag!r} needs an RngState")


@dataclass
class EliminationTrace:
    """Pivot sequence plus the factor blocks and residual norm history.

    For the rank-1 rules, column t of L is the residual column scaled so
    L[i_t, t] == 1 and row t of U is the residual row; the symmetric
    rank-2 rule stores two (unnormalized) factor columns per step.
    ``resid_fro[k]`` is the residual Frobenius norm after k steps.
    """

    pivots: list
    L: np.ndarray
    U: np.ndarray
    resid_fro: np.ndarray
    residual: np.ndarray
    steps: int
    resid_trace: np.ndarray = None
    clean_early_stop: bool = False
    tol_stop: bool = False

    def approximation(self):
        return self.L @ self.U


def _as_array(A):
    if isinstance(A, DenseMatrix):
        return A.array.copy()
    return np.array(A, dtype=np.complex128)


def _validate_psd(R, tol=PSD_VALIDATION_TOL):
    scale = max(np.max(np.abs(R)), 1e-300)
    if np.max(np.abs(R - R.conj().T)) > 1e-10 * scale:
        raise ValueError("Cholesky-family rules need a Hermitian matrix")
    t = float(np.trace(R).real)
    lo = float(np.linalg.eigvalsh(0.5 * (R + R.conj().T))[0])
    if lo < -tol * max(t, scale):
        raise ValueError("Cholesky-family rules need a PSD matrix "
                         f"(min eigenvalue {lo:.3e})")


def _draw_rank1_pivot(R, rule):
    """Pick one (i, j) pivot for the rank-1 rules."""
    tag = rule.tag
    if tag == "cplu":
        flat = int(np.argmax(np.abs(R)))
        return np.unravel_index(flat, R.shape)
    if tag == "c2plu":
        norms = np.einsum("ij,ij->i", R, R.conj()).real
        i = int(np.argmax(norms))
        j = int(np.argmax(np.abs(R[i, :])))
        return i, j
    if tag == "rplu":
        norms = np.einsum("ij,ij->i", R, R.conj()).real
        i = sample_index(norms, rule.rng.uniform())
        j = sample_index(np.abs(R[i, :]) ** 2, rule.rng.uniform())
        return i, j
    if tag == "rpcholesky":
        d = np.clip(np.diag(R).real, 0.0, None)
        i = sample_index(d, rule.rng.uniform())
        return i, i
    if tag == "greedy-cholesky":
        i = int(np.argmax(np.diag(R).real))
        return i, i
    raise ValueError(f"rule {tag!r} is not a rank-1 rule")


def eliminate(A, rule, steps, stop_tol=0.0):
    """Run pivoted elimination for up to ``steps`` pivots.

    Stops early, with a flag, when the residual Frobenius norm falls to
    ``stop_tol`` times the input norm, or cleanly when the residual is
    exactly drained first.  Cholesky-family rules validate the input is
    Hermitian PSD.  Chosen pivot values are guarded against exact zeros
    (one resample, then an error).
    """
    if isinstance(rule, str):
        rule = PivotRule(rule)
    R = _as_array(A)
    n, m = R.shape
    if not 0 <= steps <= min(n, m):
        raise ValueError(f"steps {steps} out of range [0, {min(n, m)}]")
    if stop_tol < 0:
        raise ValueError("stop_tol must be nonnegative")
    psd = rule.tag in _PSD_RULES
    if psd:
        _validate_psd(R)

    cols_per_step = 2 if rule.tag == "srplu" else 1
    L = np.zeros((n, cols_per_step * steps), dtype=np.complex128)
    U = np.zeros((cols_per_step * steps, m), dtype=np.complex128)
    pivots = []
    fro0 = float(np.linalg.norm(R))
    resid_fro = [fro0]
    resid_trace = [float(np.trace(R).real)] if psd else None
    clean_stop = False
    tol_stop = False
    filled = 0

    for _ in range(steps):
        if resid_fro[-1] == 0.0:
            clean_stop = True
            break
        if rule.tag == "srplu":
            norms = np.einsum("ij,ij->i", R, R.conj()).real
            i = sample_index(norms, rule.rng.uniform())
            j = sample_index(np.abs(R[i, :]) ** 2, rule.rng.uniform())
            W = _srplu_factor(R, (i, j), SRPLU_PINV_TOL)
            R = R - W @ W.conj().T
            R = 0.5 * (R + R.conj().T)
            L[:, filled:filled + W.shape[1]] = W
            U[filled:filled + W.shape[1], :] = W.conj().T
            filled += W.shape[1]
            pivots.append((i, j))
        else:
            i, j = _draw_rank1_pivot(R, rule)
            a = R[i, j]
            if a == 0:
                i, j = _draw_rank1_pivot(R, rule)
                a = R[i, j]
                if a == 0:
                    raise ZeroDivisionError(
                        f"pivot ({i}, {j}) has exactly zero value after resampling")
            col = R[:, j] / a
            row = R[i, :].copy()
            R = R - np.outer(col, row)
            L[:, filled] = col
            U[filled, :] = row
            filled += 1
            pivots.append((int(i), int(j)))
        resid_fro.append(float(np.linalg.norm(R)))
        if psd:
            resid_trace.append(float(np.trace(R).real))
        if stop_tol > 0 and resid_fro[-1] <= stop_tol * fro0:
            tol_stop = True
            break

    return EliminationTrace(
        pivots=pivots,
        L=L[:, :filled],
        U=U[:filled, :],
        resid_fro=np.array(resid_fro),
        residual=R,
        steps=len(pivots),
        resid_trace=None if resid_trace is None else np.array(resid_trace),
        clean_early_stop=clean_stop,
        tol_stop=tol_stop,
    )


def _srplu_factor(C, pivot, tol):
    """Factor the symmetric rank-2 downdate as W W* with W = L_ij M.

    B is the 2x2 pivot block; its pseudoinverse truncates singular values
    below ``tol`` times the largest.  Returns W with 0, 1, or 2 columns.
    """
    i, j = pivot
    Lij = C[:, [i, j]]
    B = C[np.ix_([i, j], [i, j])]
    B = 0.5 * (B + B.conj().T)
    d, V = np.linalg.eigh(B)
    dmax = float(np.max(np.abs(d)))
    if dmax == 0.0:
        if np.linalg.norm(Lij) > 1e-8 * max(np.linalg.norm(C), 1e-300):
            raise ValueError("zero pivot block with nonzero cross columns; "
                             "input is not PSD")
        return np.zeros((C.shape[0], 0), dtype=np.complex128)
    keep = d > tol * dmax
    if not np.any(keep):
        return np.zeros((C.shape[0], 0), dtype=np.complex128)
    M = V[:, keep] / np.sqrt(d[keep])
    return Lij @ M


def srplu_step(C, pivot, tol=SRPLU_PINV_TOL):
    """One symmetric rank-2 downdate C - L_ij pinv(B_ij) L_ij*.

    The result is Hermitian and PSD up to roundoff; a degenerate pivot with
    i == j reduces to the usual diagonal Cholesky step.
    """
    C = np.asarray(C, dtype=np.complex128)
    _validate_psd(C)
    W = _srplu_factor(C, pivot, tol)
    out = C - W @ W.conj().T
    return 0.5 * (out + out.conj().T)


def expected_onestep_gram(A):
    """Exact expectation of the one-step residual Gram matrix.

    Enumerates every pivot (i, j) with nonzero entry, weighting by the
    squared entry over the squared Frobenius norm, and accumulates the
    Gram matrix of each one-step residual.
    """
    a = np.asarray(A, dtype=np.complex128)
    total = float(np.sum(np.abs(a) ** 2))
    if total == 0.0:
        raise ValueError("expected_onestep_gram of a zero matrix")
    n, m = a.shape
    E = np.zeros((m, m), dtype=np.complex128)
    for i in range(n):
        for j in range(m):
            v = a[i, j]
            if v == 0:
                continue
            A1 = a - np.outer(a[:, j] / v, a[i, :])
            E += (np.abs(v) ** 2 / total) * (A1.conj().T @ A1)
    return 0.5 * (E + E.conj().T)


def expected_onestep_trace_comparison(C):
    """Exact expected one-step traces for the rank-2 and diagonal rules.

    Both expectations are computed by full enumeration; the rank-2 scheme
    never loses to the diagonal scheme in this one-step comparison.
    """
    c = np.asarray(C, dtype=np.complex128)
    _validate_psd(c)
    t = float(np.trace(c).real)
    if t <= 0:
        raise ValueError("expected a PSD matrix with positive trace")
    n = c.shape[0]
    fro2 = float(np.sum(np.abs(c) ** 2))

    srplu_trace = 0.0
    for i in range(n):
        for j in range(n):
            w = np.abs(c[i, j]) ** 2
            if w == 0:
                continue
            srplu_trace += (w / fro2) * float(np.trace(srplu_step(c, (i, j))).real)

    rpchol_trace = 0.0
    for i in range(n):
        d = c[i, i].real
        if d <= 0:
            continue
        col = c[:, i]
        step_trace = t - float(np.real(np.vdot(col, col))) / d
        rpchol_trace += (d / t) * step_trace

    return srplu_trace, rpchol_trace
