"""Barycentric rational approximation from samples.

``aaa`` is the classical greedy scheme: pick the worst sample point as a
new support point, refit weights as the smallest right singular vector of
the divided-difference (Loewner) matrix, repeat until the max error meets
the tolerance.  ``cur_aaa`` replaces the greedy support search with one
structured pivoted elimination of a large split Loewner matrix, then does
a single weight solve on each candidate support set and keeps the better.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cauchy import loewner_build, structured_eliminate
from .rng import RngState
from .treebounds import build_plan

__all__ = ["BarycentricRational", "SampleSet", "bary_eval", "aaa", "cur_aaa"]

SUPPORT_HIT_TOL = 1e-14


class BarycentricRational:
    """r(z) = sum_j w_j f_j/(z - t_j) / sum_j w_j/(z - t_j).

    Support points must be pairwise distinct; weights are normalized to
    unit 2-norm (scaling the weights leaves r unchanged).  Evaluation at a
    support point returns the stored value exactly.
    """

    def __init__(self, support, values, weights):
        t = np.asarray(support, dtype=np.complex128).ravel()
        f = np.asarray(values, dtype=np.complex128).ravel()
        w = np.asarray(weights, dtype=np.complex128).ravel()
        if not (t.size == f.size == w.size) or t.size == 0:
            raise ValueError("support, values, and weights must match and be nonempty")
        if t.size > 1:
            gap = np.min(np.abs(t[:, None] - t[None, :])
                         + np.diag(np.full(t.size, np.inf)))
            if gap == 0.0:
                raise ValueError("support points must be pairwise distinct")
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            raise ValueError("weights must not all be zero")
        self.support = t
        self.values = f
        self.weights = w / nw

    @property
    def degree(self):
        return self.support.size

    def __call__(self, z):
        return bary_eval(self, z)

    def eval_flagged(self, z):
        """Evaluate and also report where the denominator underflowed."""
        return _bary_eval_impl(self, z)


def _bary_eval_impl(r, z):
    zv = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
    scale = max(float(np.max(np.abs(r.support))), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        C = 1.0 / (zv[:, None] - r.support[None, :])
        num = C @ (r.weights * r.values)
        den = C @ r.weights
        out = num / den
    near_pole = (np.abs(den) < 1e3 * np.finfo(float).tiny) | ~np.isfinite(out)
    # Exact-hit branch: return stored values at (numerically) support points.
    for j, t in enumerate(r.support):
        hit = np.abs(zv - t) <= SUPPORT_HIT_TOL * scale
        if np.any(hit):
            out[hit] = r.values[j]
            near_pole[hit] = False
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        return complex(out[0]), bool(near_pole[0])
    return out, near_pole


def bary_eval(r, z):
    """Evaluate a barycentric rational at scalar or array arguments.

    Points landing essentially on a pole are reported with a warning and
    evaluate to the (infinite or ill-defined) quotient as computed.
    """
    out, near_pole = _bary_eval_impl(r, z)
    if np.any(near_pole):
        warnings.warn("evaluation point is numerically on a pole",
                      stacklevel=2)
    return out


@dataclass
class SampleSet:
    """Distinct sample points with finite values."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.complex128).ravel()
        self.values = np.asarray(self.values, dtype=np.complex128).ravel()
        if self.points.size != self.values.size:
            raise ValueError("points and values must have equal length")
        if not np.all(np.isfinite(self.values.real)) or not np.all(np.isfinite(self.values.imag)):
            raise ValueError("sample values must be finite")
        if self.points.size != np.unique(self.points).size:
            raise ValueError("sample points must be pairwise distinct")

    @property
    def size(self):
        return self.points.size


def _loewner_weights(support_pts, support_vals, other_pts, other_vals):
    """Weights as the smallest right singular vector of the Loewner matrix."""
    L = (other_vals[:, None] - support_vals[None, :]) / (
        other_pts[:, None] - support_pts[None, :])
    _, s, Vh = np.linalg.svd(L)
    w = Vh[-1, :].conj()
    smin = s[-1] if s.size == Vh.shape[0] else 0.0
    return w, L, float(smin)


def aaa(samples, tol=1e-13, max_degree=100):
    """Greedy barycentric rational fit to a sample set.

    Starts from the constant mean of the values, adds the worst point as a
    support point each round, and stops when the maximum error over the
    samples drops below ``tol * max|f|`` or the degree cap is reached.
    Returns (rational, error history).
    """
    if samples.size < 2:
        raise ValueError("need at least two samples")
    if tol <= 0:
        raise ValueError("tol must be positive")
    Z, F = samples.points, samples.values
    fscale = float(np.max(np.abs(F)))
    remaining = list(range(Z.size))
    sup = []
    errors = []
    R = np.full(Z.size, np.mean(F), dtype=np.complex128)
    w = np.array([1.0 + 0j])

    for _ in range(min(max_degree, Z.size - 1)):
        rel = np.abs(F[remaining] - R[remaining])
        pick = remaining[int(np.argmax(rel))]
        sup.append(pick)
        remaining.remove(pick)
        idx = np.array(remaining)
        w, L, _ = _loewner_weights(Z[sup], F[sup], Z[idx], F[idx])
        C = 1.0 / (Z[idx, None] - Z[sup][None, :])
        num = C @ (w * F[sup])
        den = C @ w
        R = F.copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = num / den
        vals[~np.isfinite(vals)] = 0.0
        R[idx] = vals
        err = float(np.max(np.abs(F - R)))
        errors.append(err)
        if err <= tol * max(fscale, np.finfo(float).tiny):
            break

    r = BarycentricRational(Z[sup], F[sup], w)
    return r, np.array(errors)


def cur_aaa(samples, tol=1e-11, rule="rplu", nu=5.0, rng=None,
            leaf_size=None, max_degree=None):
    """Barycentric fit with support points chosen by structured pivoting.

    The samples are split randomly in half; the divided differences across
    the split form a large Loewner matrix that is eliminated with the
    structured pivoted scheme until its certified row-norm bound drops by
    ``tol**2``.  Both the selected rows and the selected columns are tried
    as support sets (weights from one Loewner solve each, over all
    non-support samples); the fit with the smaller maximum error wins.

    Returns (rational, side), where side is "rows" or "cols".  Degenerate
    inputs that stop before any pivot fall back to :func:`aaa`.
    """
    if rng is None:
        raise ValueError("cur_aaa needs an RngState")
    if samples.size < 4:
        raise ValueError("need at least four samples")
    if tol <= 0:
        raise ValueError("tol must be positive")
    Z, F = samples.points, samples.values
    m = Z.size
    perm = rng.permutation(m)
    half = (m + 1) // 2
    xi, yi = perm[:half], perm[half:]
    L = loewner_build(Z[xi], F[xi], Z[yi], F[yi])

    cap = min(L.shape) - 1 if max_degree is None else min(max_degree, min(L.shape) - 1)
    if float(np.max(np.abs(F - F[0]))) == 0.0:
        trace = None   # constant samples: the divided differences all vanish
    else:
        kwargs = {}
        if leaf_size is not None:
            kwargs["leaf_size"] = leaf_size
        plan = build_plan(Z[xi], Z[yi], nu=nu, **kwargs)
        elim_seed = rng.seed ^ 0x517CC1B727220A95
        trace = structured_eliminate(L, rule, cap, stop_tol=tol, nu=nu,
                                     plan=plan, rng=RngState(elim_seed))
    if trace is None or trace.rank == 0:
        warnings.warn("structured elimination stopped before any pivot; "
                      "falling back to the greedy fit", stacklevel=2)
        return aaa(samples, tol=tol)[0], "fallback"

    fscale = max(float(np.max(np.abs(F))), np.finfo(float).tiny)
    best_err, best_r, best_side = np.inf, None, "rows"
    # When the eliminated matrix has exact low rank, the pivot count equals
    # that rank, which is one support point short of what the barycentric
    # form needs; retry with one more pivot until the fit is adequate.
    for attempt in range(4):
        for side, pick in (("rows", xi[trace.row_indices]),
                           ("cols", yi[trace.col_indices])):
            mask = np.ones(m, dtype=bool)
            mask[pick] = False
            w, _, _ = _loewner_weights(Z[pick], F[pick], Z[mask], F[mask])
            r = BarycentricRational(Z[pick], F[pick], w)
            err = float(np.max(np.abs(r(Z) - F)))
            if err < best_err:
                best_err, best_r, best_side = err, r, side
        if best_err <= 10.0 * tol * fscale or trace.rank >= cap:
            break
        deeper = structured_eliminate(L, rule, min(trace.rank + 1, cap),
                                      stop_tol=0.0, nu=nu, plan=plan,
                                      rng=RngState(elim_seed))
        if deeper.rank <= trace.rank:
            break
        trace = deeper
    return best_r, best_side
