"""Randomly pivoted LU and related skeleton factorizations.

Low-rank approximation by pivoted elimination with squared-entry sampling,
in three implementations: a dense reference path, a low-memory CUR form
driven by matvecs, and a fast path for Cauchy-like matrices that updates
displacement generators and samples pivot rows from certified Barnes-Hut
style upper bounds.  On top of these sit a projective-CUR pivoted-QR
baseline, a Sherman-Morrison-Woodbury preconditioner, and barycentric
rational fitting (greedy and CUR-accelerated).
"""

__version__ = "0.1.0"

from .accessors import (AdjointView, CallableOperator, CapabilityError,
                        DenseMatrix, MatrixAccessor, MatvecOnly,
                        SparseMatrixAccessor, materialize)
from .bench import AuditReport, CountingAccessor, audit_complexity
from .cauchy import (CauchyLikeMatrix, StructuredPivotTrace, exact_row_norms,
                     generator_schur_update, loewner_build,
                     structured_eliminate, vandermonde_to_cauchy)
from .core import (SvdResult, ZeroTraceWarning, phi_map, phi_trace_ratio_limit,
                   randomized_svd, svd_oracle, truncated_svd_error)
from .dense_pivots import (EliminationTrace, PivotRule, eliminate,
                           expected_onestep_gram,
                           expected_onestep_trace_comparison, srplu_step)
from .io import (RunConfig, SampleSet, ToeplitzOperator, generate,
                 read_matrix_market, read_results, write_matrix_market,
                 write_results)
from .lowmem_cur import (CurBuildInfo, CurFactorization, core_extend,
                         cur_build, residual_column, residual_row)
from .precond import GmresResult, SmwPreconditioner, gmres, smw_build
from .qless_qr import QlessQrResult, QrCurResult, qless_qr, qr_cur
from .rational import BarycentricRational, aaa, bary_eval, cur_aaa
from .rng import RngState, sample_index
from .treebounds import (CoincidentPointsError, InteractionPlan,
                         PointQuadtree, build_plan, certified_upper_bounds)
