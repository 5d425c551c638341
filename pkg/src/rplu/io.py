"""Ingestion, emission, and the synthetic instance families.

Matrix Market coordinate files round-trip through a full-precision writer
and a reader that expands symmetric storage, values pattern entries at 1,
and sums duplicates with a warning.  The generator families reproduce the
test matrices used throughout: planted geometric spectra, Gaussian kernel
matrices on 2-D point clouds, Cauchy matrices on smiley/two-spiral point
sets, a drifted-Gaussian Toeplitz operator with FFT matvecs, and sample
sets for rational fitting.
"""

import csv
import io as _stdio
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse

from .accessors import CallableOperator, DenseMatrix, SparseMatrixAccessor
from .cauchy import CauchyLikeMatrix
from .rational import SampleSet
from .rng import RngState

__all__ = [
    "RunConfig",
    "read_matrix_market",
    "write_matrix_market",
    "generate",
    "write_results",
    "read_results",
    "RESULT_HEADER",
    "ToeplitzOperator",
]

GENERATOR_FAMILIES = (
    "geometric-spectrum",
    "gaussian-kernel-points",
    "smiley-spiral-cauchy",
    "drifted-gaussian-toeplitz-1d",
    "loewner-samples",
)

RESULT_HEADER = ("rank", "method", "seed", "rel_frob_err", "rel_spec_err",
                 "seconds", "applies_A", "applies_At")


@dataclass
class RunConfig:
    """Resolved parameters of one batch run; echoed into every output."""

    algorithm: str
    rank: int = 0
    tol: float = 0.0
    seed: int = 0
    nu: float = 5.0
    leaf_size: int = 32
    input_spec: str = ""
    output_path: str = ""
    methods: list = field(default_factory=list)
    trials: int = 1
    extra: dict = field(default_factory=dict)

    def echo_lines(self, version):
        items = [("algorithm", self.algorithm), ("rank", self.rank),
                 ("tol", self.tol), ("seed", self.seed), ("nu", self.nu),
                 ("leaf_size", self.leaf_size), ("input", self.input_spec),
                 ("methods", ",".join(self.methods)), ("trials", self.trials)]
        items += sorted(self.extra.items())
        lines = [f"# rplu version={version}"]
        lines += [f"# {k}={v}" for k, v in items]
        return lines


def read_matrix_market(path):
    """Read a coordinate Matrix Market file into a sparse accessor.

    Symmetric/Hermitian/skew storage is expanded, pattern entries take the
    value 1, and duplicate coordinates are summed with a warning (the usual
    convention for the format).
    """
    try:
        mat = scipy.io.mmread(path)
    except Exception as exc:
        raise ValueError(f"failed to parse Matrix Market file {path!r}: {exc}") from exc
    if scipy.sparse.issparse(mat):
        coo = mat.tocoo()
        keys = coo.row.astype(np.int64) * coo.shape[1] + coo.col
        if np.unique(keys).size != keys.size:
            warnings.warn(f"{path!r} contains duplicate coordinates; summing them",
                          stacklevel=2)
            coo.sum_duplicates()
        return SparseMatrixAccessor(coo)
    return DenseMatrix(np.asarray(mat))


def write_matrix_market(path, matrix, comment=""):
    """Write a sparse (or dense) matrix as 17-significant-digit coordinates."""
    coo = scipy.sparse.coo_matrix(matrix)
    complex_field = np.iscomplexobj(coo.data) and np.any(coo.data.imag != 0)
    field = "complex" if complex_field else "real"
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field} general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"%{line}\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        if complex_field:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i + 1} {j + 1} {v.real:.17g} {v.imag:.17g}\n")
        else:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i + 1} {j + 1} {np.real(v):.17g}\n")


# ---------------------------------------------------------------------------
# Synthetic instance families


def _random_unitary(rng, n):
    q, r = np.linalg.qr(rng.complex_normal((n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def planted_spectrum(n, m, rho, rng, sigma=None):
    """Dense matrix with prescribed singular values (default rho**j)."""
    r = min(n, m)
    s = np.asarray(sigma, dtype=float) if sigma is not None else rho ** np.arange(1, r + 1)
    U = _random_unitary(rng, n)[:, :r]
    V = _random_unitary(rng, m)[:, :r]
    return DenseMatrix((U * s) @ V.conj().T)


def smiley_points(n, rng, jitter=0.01):
    """Point cloud sketching a face: outline, two eyes, and a mouth arc."""
    n_face = int(0.6 * n)
    n_eye = int(0.1 * n)
    n_mouth = n - n_face - 2 * n_eye
    th = rng.uniforms(n_face) * 2 * np.pi
    pts = [np.exp(1j * th)]
    for cx in (-0.35, 0.35):
        pts.append(cx + 0.35j + 0.08 * (rng.complex_normal(n_eye)))
    phi = np.pi + (rng.uniforms(n_mouth) - 0.5) * 0.8 * np.pi
    pts.append(0.55 * np.exp(-1j * phi) - 0.1j)
    out = np.concatenate(pts)
    return out + jitter * rng.complex_normal(out.size)


def two_spiral_sets(n, m, rng, turns=2.0, r_in=0.05, r_out=1.0,
                    outlier_frac=0.25, outlier_gap=0.02, cluster_gap=0.10):
    """Two interleaved spiral arms whose outermost winding almost touches.

    The second arm tracks the first at a radial gap of about
    ``cluster_gap`` along the inner windings (a broad, smooth block for a
    reciprocal-distance kernel) and collapses to ``outlier_gap`` on the
    outer quarter of the curve, creating many isolated near pairs with
    entries far larger than anything in the smooth block but carrying only
    a modest share of the total energy.  Greedy max-entry pivoting spends
    its whole budget on those pairs.
    """
    k = max(n, m)
    t = np.sort(rng.uniforms(k)) * (1 - 1e-3) + 1e-3
    theta = t * turns * 2 * np.pi
    radius = r_in + (r_out - r_in) * t
    gap = np.where(t < 1.0 - outlier_frac,
                   cluster_gap * (1.0 + t), outlier_gap)
    x = radius * np.exp(1j * theta)
    y = (radius + gap) * np.exp(1j * theta)
    return x[:n], y[:m]


def spiral_points(n, rng, turns=2.0, phase=0.0, r_in=0.02, r_out=1.0,
                  jitter=0.004):
    """One arm of an Archimedean spiral, dense near the center."""
    t = np.sort(rng.uniforms(n))
    theta = t * turns * 2 * np.pi
    r = r_in + (r_out - r_in) * t
    pts = r * np.exp(1j * (theta + phase))
    return pts + jitter * rng.complex_normal(n)


class ToeplitzOperator(CallableOperator):
    """Toeplitz matrix applied through a circulant embedding (FFT matvecs).

    ``kernel[d]`` holds the diagonal value for offset d = i - j over
    d in [-(n-1), n-1]; row norms come from sliding-window sums, exactly.
    """

    has_entry = True
    has_row = True
    has_column = True

    def __init__(self, kernel, n):
        kernel = np.asarray(kernel, dtype=np.complex128)
        if kernel.size != 2 * n - 1:
            raise ValueError("kernel must have length 2n - 1")
        self._t = kernel            # index by d + (n-1)
        self._n = n
        size = 2 * n
        circ = np.zeros(size, dtype=np.complex128)
        # first column of the embedding: t_0, t_1, ..., t_{n-1}, 0, t_{-(n-1)}, ..., t_{-1}
        circ[:n] = kernel[n - 1:]
        circ[n + 1:] = kernel[:n - 1]
        self._chat = np.fft.fft(circ)
        sq = np.abs(kernel) ** 2
        csum = np.concatenate([[0.0], np.cumsum(sq)])
        # row i of A uses offsets d = i - (n-1) ... i, i.e. kernel[i : i + n] reversed
        norms = np.array([csum[i + n] - csum[i] for i in range(n)])
        super().__init__((n, n), self._apply_impl, self._adjoint_impl,
                         row_norms_fn=lambda: norms.copy(),
                         col_norms_fn=lambda: norms[::-1].copy())

    def _apply_impl(self, v):
        z = np.zeros(2 * self._n, dtype=np.complex128)
        z[:self._n] = v
        return np.fft.ifft(self._chat * np.fft.fft(z))[:self._n]

    def _adjoint_impl(self, v):
        z = np.zeros(2 * self._n, dtype=np.complex128)
        z[:self._n] = v
        return np.fft.ifft(np.conj(self._chat) * np.fft.fft(z))[:self._n]

    def entry(self, i, j):
        return complex(self._t[i - j + self._n - 1])

    def row(self, i):
        return self._t[i - np.arange(self._n) + self._n - 1].copy()

    def column(self, j):
        return self._t[np.arange(self._n) - j + self._n - 1].copy()

    def dense(self):
        return np.array([self.row(i) for i in range(self._n)])


def drifted_gaussian_toeplitz(n, span=320.0, delta=50.0, sigma=80.0):
    """1-D discretization of a shifted Gaussian convolution kernel.

    The shift makes the matrix nonsymmetric; entries are
    h * exp(-((i - j) h - delta)^2 / (2 sigma^2)) on an n-point grid over
    [0, span].  Matvecs run in O(n log n) through the FFT embedding.
    """
    h = span / n
    d = np.arange(-(n - 1), n) * h
    kernel = h * np.exp(-0.5 * ((d - delta) / sigma) ** 2)
    return ToeplitzOperator(kernel.astype(np.complex128), n)


def generate(family, params=None, rng=None):
    """Build a named synthetic instance; reproducible for a given seed.

    Families: ``geometric-spectrum`` (dense accessor with planted singular
    values), ``gaussian-kernel-points`` (PSD kernel matrix on a 2-D cloud),
    ``smiley-spiral-cauchy`` (reciprocal-distance Cauchy matrix on smiley
    or two-spiral point sets), ``drifted-gaussian-toeplitz-1d`` (FFT-backed
    Toeplitz operator), and ``loewner-samples`` (a SampleSet of a named
    function).
    """
    params = dict(params or {})
    if rng is None:
        rng = RngState(int(params.pop("seed", 0)))

    if family == "geometric-spectrum":
        n = int(params.pop("n", 50))
        m = int(params.pop("m", n))
        rho = float(params.pop("rho", 0.5))
        _reject_extra(family, params)
        return planted_spectrum(n, m, rho, rng)

    if family == "gaussian-kernel-points":
        pts = params.pop("points", None)
        if pts is None:
            n = int(params.pop("n", 100))
            shape = params.pop("shape", "gauss")
            if shape == "spiral":
                pts = spiral_points(n, rng)
            elif shape == "smiley":
                pts = smiley_points(n, rng)
            else:
                pts = rng.complex_normal(n)
        pts = np.asarray(pts, dtype=np.complex128).ravel()
        _reject_extra(family, params)
        d2 = np.abs(pts[:, None] - pts[None, :]) ** 2
        return DenseMatrix(np.exp(-0.5 * d2))

    if family == "smiley-spiral-cauchy":
        shape = params.pop("shape", "spirals")
        n = int(params.pop("n", 400))
        m = int(params.pop("m", n))
        _reject_extra(family, params)
        if shape == "smiley":
            x = smiley_points(n, rng)
            y = smiley_points(m, rng) * np.exp(0.07j) * 1.04
        elif shape == "spirals":
            x, y = two_spiral_sets(n, m, rng)
        else:
            raise ValueError(f"unknown point shape {shape!r}")
        G = np.ones((x.size, 1), dtype=np.complex128)
        B = np.ones((1, y.size), dtype=np.complex128)
        return CauchyLikeMatrix(x, y, G, B)

    if family == "drifted-gaussian-toeplitz-1d":
        n = int(params.pop("n", 256))
        span = float(params.pop("span", 320.0))
        delta = float(params.pop("delta", 50.0))
        sigma = float(params.pop("sigma", 80.0))
        _reject_extra(family, params)
        return drifted_gaussian_toeplitz(n, span, delta, sigma)

    if family == "loewner-samples":
        fname = params.pop("f", "reciprocal")
        m = int(params.pop("m", 400))
        domain = params.pop("domain", "interval")
        _reject_extra(family, params)
        if domain == "interval":
            pts = np.linspace(-1.0, 1.0, m).astype(np.complex128)
        elif domain == "disk":
            r = np.sqrt(rng.uniforms(m))
            th = rng.uniforms(m) * 2 * np.pi
            pts = r * np.exp(1j * th)
        else:
            raise ValueError(f"unknown sample domain {domain!r}")
        fn = _SAMPLE_FUNCTIONS.get(fname)
        if fn is None:
            raise ValueError(f"unknown sample function {fname!r}")
        return SampleSet(pts, fn(pts))

    raise ValueError(f"unknown generator family {family!r}")


_SAMPLE_FUNCTIONS = {
    "reciprocal": lambda z: 1.0 / (z - 2.0),
    "tan4": lambda z: np.tan(4.0 * z),
    "exp": lambda z: np.exp(z),
    "sin10": lambda z: np.sin(10.0 * z),
}


def _reject_extra(family, params):
    if params:
        raise ValueError(f"unknown parameters for {family!r}: {sorted(params)}")


# ---------------------------------------------------------------------------
# Result tables


def write_results(path, rows, config=None, version="0"):
    """Write sweep rows to CSV with a commented, fully resolved header."""
    with open(path, "w", newline="") as fh:
        _write_results_stream(fh, rows, config, version)


def results_text(rows, config=None, version="0"):
    buf = _stdio.StringIO()
    _write_results_stream(buf, rows, config, version)
    return buf.getvalue()


def _write_results_stream(fh, rows, config, version):
    if config is not None:
        for line in config.echo_lines(version):
            fh.write(line + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESULT_HEADER)
    for row in rows:
        rank, method, seed, ef, es, sec, na, nat = row
        writer.writerow([int(rank), method, int(seed), f"{ef:.17g}",
                         f"{es:.17g}", f"{sec:.6f}", int(na), int(nat)])


def read_results(path):
    """Parse a results CSV back into typed rows (comments skipped)."""
    rows = []
    with open(path) as fh:
        reader = csv.reader(fh)
        for rec in reader:
            if not rec or rec[0].startswith("#"):
                continue
            if rec[0] == "rank":
                continue
            rows.append((int(rec[0]), rec[1], int(rec[2]), float(rec[3]),
                         float(rec[4]), float(rec[5]), int(rec[6]), int(rec[7])))
    return rows
