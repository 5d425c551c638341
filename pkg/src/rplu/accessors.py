"""Uniform matrix access for dense, sparse, and implicit operators.

An accessor exposes a matrix through a small contract: shape, matvecs with
the matrix and its adjoint, entry/row/column extraction, and squared row
norms.  Backends advertise what they support through ``has_*`` flags;
algorithms call :meth:`MatrixAccessor.require` up front so a missing
capability fails with its name instead of a deep attribute error.

All accessors are immutable after construction and safe for concurrent
reads; ``apply`` may be called from several threads at once.
"""

import numpy as np
import scipy.sparse

__all__ = [
    "CapabilityError",
    "MatrixAccessor",
    "DenseMatrix",
    "SparseMatrixAccessor",
    "CallableOperator",
    "MatvecOnly",
    "AdjointView",
    "materialize",
    "unit_vector",
    "apply_transpose",
]

CAPABILITIES = ("apply", "adjoint_apply", "entry", "row", "column", "row_norms")


class CapabilityError(ValueError):
    """An algorithm asked an accessor for an operation it does not support."""


class MatrixAccessor:
    """Base contract; concrete backends override what they can do.

    Conventions: ``apply(v)`` computes ``A @ v`` for a length-m vector,
    ``adjoint_apply(v)`` computes ``A.conj().T @ v`` for a length-n vector,
    ``row_norms()`` returns the vector of squared row 2-norms.
    """

    has_apply = False
    has_adjoint_apply = False
    has_entry = False
    has_row = False
    has_column = False
    has_row_norms = False

    shape = (0, 0)

    def require(self, *names):
        for name in names:
            if not getattr(self, "has_" + name):
                raise CapabilityError(
                    f"{type(self).__name__} does not support '{name.replace('_', '-')}'"
                )

    def apply(self, v):
        raise CapabilityError(f"{type(self).__name__} does not support 'apply'")

    def adjoint_apply(self, v):
        raise CapabilityError(f"{type(self).__name__} does not support 'adjoint-apply'")

    def entry(self, i, j):
        raise CapabilityError(f"{type(self).__name__} does not support 'entry'")

    def row(self, i):
        raise CapabilityError(f"{type(self).__name__} does not support 'row'")

    def column(self, j):
        raise CapabilityError(f"{type(self).__name__} does not support 'column'")

    def row_norms(self):
        raise CapabilityError(f"{type(self).__name__} does not support 'row-norms'")

    def col_norms(self):
        """Squared column norms; the generic path costs m column extractions."""
        n, m = self.shape
        self.require("column")
        out = np.empty(m)
        for j in range(m):
            c = self.column(j)
            out[j] = float(np.real(np.vdot(c, c)))
        return out

    @property
    def capabilities(self):
        return frozenset(c for c in CAPABILITIES if getattr(self, "has_" + c))


class DenseMatrix(MatrixAccessor):
    """In-memory complex matrix; every capability, exact."""

    has_apply = True
    has_adjoint_apply = True
    has_entry = True
    has_row = True
    has_column = True
    has_row_norms = True

    def __init__(self, array):
        a = np.ascontiguousarray(np.asarray(array, dtype=np.complex128))
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
            raise ValueError("matrix entries must be finite")
        self.array = a
        self.shape = a.shape

    def apply(self, v):
        return self.array @ v

    def adjoint_apply(self, v):
        return self.array.conj().T @ v

    def entry(self, i, j):
        return complex(self.array[i, j])

    def row(self, i):
        return self.array[i, :].copy()

    def column(self, j):
        return self.array[:, j].copy()

    def row_norms(self):
        return np.einsum("ij,ij->i", self.array, self.array.conj()).real

    def col_norms(self):
        return np.einsum("ij,ij->j", self.array, self.array.conj()).real


class SparseMatrixAccessor(MatrixAccessor):
    """CSR-backed accessor with precomputed exact row norms."""

    has_apply = True
    has_adjoint_apply = True
    has_entry = True
    has_row = True
    has_column = True
    has_row_norms = True

    def __init__(self, matrix):
        csr = scipy.sparse.csr_matrix(matrix, dtype=np.complex128)
        self._csr = csr
        self._csc = csr.tocsc()
        self.shape = csr.shape
        sq = csr.copy()
        sq.data = np.abs(sq.data) ** 2
        self._row_norms = np.asarray(sq.sum(axis=1)).ravel().real
        self._col_norms = np.asarray(sq.sum(axis=0)).ravel().real

    @property
    def matrix(self):
        return self._csr

    def apply(self, v):
        return self._csr @ v

    def adjoint_apply(self, v):
        return self._csr.conj().T @ v

    def entry(self, i, j):
        return complex(self._csr[i, j])

    def row(self, i):
        return np.asarray(self._csr.getrow(i).todense()).ravel()

    def column(self, j):
        return np.asarray(self._csc.getcol(j).todense()).ravel()

    def row_norms(self):
        return self._row_norms.copy()

    def col_norms(self):
        return self._col_norms.copy()


class CallableOperator(MatrixAccessor):
    """Implicit operator defined by matvec callables.

    Only the capabilities whose callables are supplied are advertised;
    ``row_norms_fn`` lets structured operators provide exact norms cheaply.
    """

    def __init__(self, shape, apply_fn, adjoint_fn=None, row_norms_fn=None,
                 col_norms_fn=None):
        self.shape = tuple(shape)
        self._apply = apply_fn
        self._adjoint = adjoint_fn
        self._row_norms = row_norms_fn
        self._col_norms = col_norms_fn
        self.has_apply = apply_fn is not None
        self.has_adjoint_apply = adjoint_fn is not None
        self.has_row_norms = row_norms_fn is not None

    def apply(self, v):
        return self._apply(v)

    def adjoint_apply(self, v):
        if self._adjoint is None:
            return super().adjoint_apply(v)
        return self._adjoint(v)

    def row_norms(self):
        if self._row_norms is None:
            return super().row_norms()
        return np.asarray(self._row_norms(), dtype=float)

    def col_norms(self):
        if self._col_norms is not None:
            return np.asarray(self._col_norms(), dtype=float)
        return super().col_norms()


class MatvecOnly(MatrixAccessor):
    """Strip an accessor down to matvecs, hiding its other capabilities."""

    has_apply = True
    has_adjoint_apply = True

    def __init__(self, inner):
        inner.require("apply", "adjoint_apply")
        self._inner = inner
        self.shape = inner.shape

    def apply(self, v):
        return self._inner.apply(v)

    def adjoint_apply(self, v):
        return self._inner.adjoint_apply(v)


class AdjointView(MatrixAccessor):
    """The conjugate transpose of another accessor, capability for capability."""

    def __init__(self, inner):
        self._inner = inner
        self.shape = (inner.shape[1], inner.shape[0])
        self.has_apply = inner.has_adjoint_apply
        self.has_adjoint_apply = inner.has_apply
        self.has_entry = inner.has_entry
        self.has_row = inner.has_column
        self.has_column = inner.has_row
        # Row norms of A* are column norms of A; exposed when derivable.
        self.has_row_norms = inner.has_column or inner.has_row_norms

    def apply(self, v):
        return self._inner.adjoint_apply(v)

    def adjoint_apply(self, v):
        return self._inner.apply(v)

    def entry(self, i, j):
        return np.conj(self._inner.entry(j, i))

    def row(self, i):
        return np.conj(self._inner.column(i))

    def column(self, j):
        return np.conj(self._inner.row(j))

    def row_norms(self):
        return self._inner.col_norms()

    def col_norms(self):
        return self._inner.row_norms()


def unit_vector(n, i, dtype=np.complex128):
    e = np.zeros(n, dtype=dtype)
    e[i] = 1.0
    return e


def apply_transpose(acc, v):
    """Compute ``A.T @ v`` through the adjoint: A^T v = conj(A* conj(v))."""
    return np.conj(acc.adjoint_apply(np.conj(v)))


def materialize(acc):
    """Dense array of an accessor; meant for desk-scale oracles and tests."""
    if isinstance(acc, DenseMatrix):
        return acc.array.copy()
    if isinstance(acc, SparseMatrixAccessor):
        return np.asarray(acc.matrix.todense())
    n, m = acc.shape
    if acc.has_column:
        return np.column_stack([acc.column(j) for j in range(m)])
    acc.require("apply")
    cols = [acc.apply(unit_vector(m, j)) for j in range(m)]
    return np.column_stack(cols)
