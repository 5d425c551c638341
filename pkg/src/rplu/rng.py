"""Reproducible randomness for pivot sampling.

Every randomized routine in this package draws from an explicitly seeded
counter-based generator (Philox 4x64, as shipped by NumPy) so that one
64-bit seed yields one pivot sequence, on any platform.  Discrete draws
are made by inverting a running sum of weights with a single uniform, so
two implementations that agree on the weights and consume uniforms in the
same order select identical indices.
"""

import numpy as np

__all__ = ["RngState", "sample_index"]


class RngState:
    """A stream of uniforms owned by a single algorithm run.

    Algorithms document the order in which they consume the stream
    (row draw first, then column draw); nothing else may share the state.
    """

    algorithm = "philox4x64"

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def uniform(self):
        return float(self._gen.random())

    def uniforms(self, k):
        return self._gen.random(k)

    def standard_normal(self, shape):
        return self._gen.standard_normal(shape)

    def complex_normal(self, shape):
        re = self._gen.standard_normal(shape)
        im = self._gen.standard_normal(shape)
        return (re + 1j * im) / np.sqrt(2.0)

    def permutation(self, n):
        return self._gen.permutation(n)

    def __repr__(self):
        return f"RngState(seed={self.seed}, algorithm={self.algorithm!r})"


def sample_index(weights, u):
    """Pick an index with probability proportional to nonnegative weights.

    Consumes exactly one uniform ``u`` in [0, 1).  Indices with zero weight
    are never returned: the inverse-CDF search lands past empty cells, and
    the rare rounding overshoot at the top is walked back to the last
    positive weight.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-D array")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    c = np.cumsum(w)
    total = c[-1]
    if not total > 0:
        raise ValueError("all weights are zero; nothing to sample")
    i = int(np.searchsorted(c, u * total, side="right"))
    if i >= w.size:
        i = w.size - 1
    while i > 0 and w[i] <= 0:
        i -= 1
    if w[i] <= 0:
        i = int(np.flatnonzero(w > 0)[0])
    return i
