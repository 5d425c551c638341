"""Batch command-line front end.

Subcommands: ``approx`` (one method at one rank), ``sweep`` (methods x
ranks x trials, CSV out), ``theory-check`` (the four built-in numerical
suites), ``cauchy`` (structured elimination of point-set instances),
``aaa`` (rational fitting, greedy or CUR-accelerated), and
``precond-demo`` (the preconditioned-solve comparison).  Every run echoes
its fully resolved configuration, defaults included, into the output
header; randomized trials are seeded as ``seed XOR trial index``.  The
``RPLU_SEED`` environment variable supplies the seed when no flag does.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import __version__
from .accessors import CapabilityError, DenseMatrix, MatvecOnly, materialize
from .bench import CountingAccessor
from .cauchy import loewner_build, structured_eliminate
from .core import (phi_trace_ratio_limit, randomized_svd, svd_oracle,
                   truncated_svd_error)
from .dense_pivots import (PivotRule, eliminate, expected_onestep_gram,
                           expected_onestep_trace_comparison)
from .io import (RESULT_HEADER, RunConfig, generate, planted_spectrum,
                 read_matrix_market, results_text, write_results)
from .lowmem_cur import cur_build
from .precond import gmres, smw_build
from .qless_qr import qr_cur
from .rational import SampleSet, aaa, cur_aaa
from .rng import RngState
from .treebounds import build_plan

SWEEP_METHODS = ("rplu", "cplu", "c2plu", "rpcholesky", "srplu", "rplu-cur",
                 "c2plu-cur", "cpqr", "rpqr", "rsvd", "svd-oracle")
_DENSE_METHODS = ("rplu", "cplu", "c2plu", "rpcholesky", "srplu")
_DETERMINISTIC = ("cplu", "c2plu", "cpqr", "svd-oracle")
_PSD_METHODS = ("rpcholesky", "srplu")


def _resolve_seed(value):
    if value is not None:
        return int(value)
    env = os.environ.get("RPLU_SEED")
    return int(env) if env else 0


def _load_input(spec, seed, access="full"):
    """Instance from an input descriptor: 'mm:<path>' or 'family:k=v,...'."""
    if spec.startswith("mm:"):
        acc = read_matrix_market(spec[3:])
    else:
        family, _, rest = spec.partition(":")
        params = {}
        if rest:
            for item in rest.split(","):
                key, _, val = item.partition("=")
                if not _:
                    raise ValueError(f"malformed parameter {item!r} in input spec")
                params[key] = val
        params.setdefault("seed", seed)
        acc = generate(family, params)
    if access == "matvec":
        acc = MatvecOnly(acc)
    return acc


def _parse_ranks(text):
    """Parse 'a..b', 'a..b:step', or a comma list of ranks."""
    if ".." in text:
        span, _, step = text.partition(":")
        a, _, b = span.partition("..")
        step = int(step) if step else 1
        return list(range(int(a), int(b) + 1, step))
    return [int(t) for t in text.split(",")]


# ---------------------------------------------------------------------------
# sweep


def _residual_spectral(dense, approx, seed, iters=20):
    """Power-iteration estimate of the residual 2-norm (deterministic seed)."""
    R = dense - approx
    rng = RngState(seed)
    v = rng.complex_normal(R.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = R.conj().T @ (R @ v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return float(np.sqrt(est))


def _sweep_rows(acc, methods, ranks, trials, seed):
    """One row per (method, rank, trial); deterministic order and seeding."""
    rows = []
    kmax = max(ranks)
    n, m = acc.shape
    if kmax > min(n, m):
        raise ValueError(f"max rank {kmax} exceeds min(n, m) = {min(n, m)}")
    needs_dense = [mth for mth in methods if mth in _DENSE_METHODS + ("rsvd", "cpqr", "rpqr", "svd-oracle")]
    dense = None
    if needs_dense or True:
        # Errors are measured against the materialized matrix at desk scale.
        acc.require("apply")
        dense = materialize(acc)
    fro0 = float(np.linalg.norm(dense))
    spec0 = float(np.linalg.norm(dense, 2))

    for method in methods:
        if method not in SWEEP_METHODS:
            raise ValueError(f"unknown sweep method {method!r}")
        n_trials = 1 if method in _DETERMINISTIC else trials
        for trial in range(n_trials):
            tseed = seed ^ trial
            t0 = time.perf_counter()
            per_rank = _run_method(acc, dense, method, ranks, kmax, tseed)
            elapsed = time.perf_counter() - t0
            for k, (ef, es, na, nat) in zip(ranks, per_rank):
                rows.append((k, method, tseed, ef / fro0, es / spec0,
                             elapsed / len(ranks), na, nat))
        if method in _DETERMINISTIC and trials > 1:
            base = rows[-len(ranks):]
            for trial in range(1, trials):
                for (k, mth, _s, ef, es, sec, na, nat) in base:
                    rows.append((k, mth, seed ^ trial, ef, es, sec, na, nat))
    rows.sort(key=lambda r: (methods.index(r[1]), r[0], r[2]))
    return rows


def _run_method(acc, dense, method, ranks, kmax, tseed):
    """Per-rank (frob_err, spec_err, applies, adjoints), unnormalized."""
    out = []
    if method in _DENSE_METHODS:
        for cap in ("entry", "row", "column"):
            if not getattr(acc, "has_" + cap):
                raise CapabilityError(
                    f"method {method!r} needs dense access; accessor lacks {cap!r}")
        rule_tag = {"rplu": "rplu", "cplu": "cplu", "c2plu": "c2plu",
                    "rpcholesky": "rpcholesky", "srplu": "srplu"}[method]
        rule = PivotRule(rule_tag, RngState(tseed)) if rule_tag in ("rplu", "rpcholesky", "srplu") else PivotRule(rule_tag)
        trace = eliminate(DenseMatrix(dense), rule, kmax)
        cols_per = 2 if method == "srplu" else 1
        for k in ranks:
            steps = min(k, trace.steps)
            ef = float(trace.resid_fro[steps])
            approx = trace.L[:, :cols_per * steps] @ trace.U[:cols_per * steps, :]
            es = _residual_spectral(dense, approx, tseed ^ (k * 1009))
            out.append((ef, es, 0, 0))
        return out
    if method in ("rplu-cur", "c2plu-cur"):
        for k in ranks:
            counting = CountingAccessor(acc)
            rng = RngState(tseed) if method == "rplu-cur" else None
            fact, _ = cur_build(counting, method, k, rng=rng)
            approx = _cur_dense(dense, fact)
            ef = float(np.linalg.norm(dense - approx))
            es = _residual_spectral(dense, approx, tseed ^ (k * 1009))
            out.append((ef, es, counting.counts["apply"],
                        counting.counts["adjoint_apply"]))
        return out
    if method in ("cpqr", "rpqr"):
        for k in ranks:
            counting = CountingAccessor(acc)
            rule = "greedy" if method == "cpqr" else "random"
            rng = RngState(tseed) if method == "rpqr" else None
            res = qr_cur(counting, k, rule=rule, rng=rng)
            approx = dense[:, res.col_indices] @ res.core @ dense[res.row_indices, :]
            ef = float(np.linalg.norm(dense - approx))
            es = _residual_spectral(dense, approx, tseed ^ (k * 1009))
            out.append((ef, es, counting.counts["apply"],
                        counting.counts["adjoint_apply"]))
        return out
    if method == "rsvd":
        for k in ranks:
            counting = CountingAccessor(acc)
            res = randomized_svd(counting, k, rng=RngState(tseed))
            approx = res.reconstruct()
            ef = float(np.linalg.norm(dense - approx))
            es = _residual_spectral(dense, approx, tseed ^ (k * 1009))
            out.append((ef, es, counting.counts["apply"],
                        counting.counts["adjoint_apply"]))
        return out
    if method == "svd-oracle":
        for k in ranks:
            ef, es = truncated_svd_error(dense, k)
            out.append((ef, es, 0, 0))
        return out
    raise ValueError(f"unhandled method {method!r}")


def _cur_dense(dense, fact):
    if fact.rank == 0:
        return np.zeros_like(dense)
    C = dense[:, fact.col_indices]
    R = dense[fact.row_indices, :]
    mid = np.column_stack([fact.core_solve(R[:, j]) for j in range(R.shape[1])])
    return C @ mid


def cmd_sweep(args):
    seed = _resolve_seed(args.seed)
    methods = args.methods.split(",")
    ranks = _parse_ranks(args.ranks)
    config = RunConfig(algorithm="sweep", seed=seed, input_spec=args.input,
                       methods=methods, trials=args.trials,
                       extra={"ranks": args.ranks, "access": args.access,
                              "timing": not args.no_timing})
    acc = _load_input(args.input, seed, args.access)
    rows = _sweep_rows(acc, methods, ranks, args.trials, seed)
    if args.no_timing:
        rows = [(k, mth, s, ef, es, 0.0, na, nat)
                for (k, mth, s, ef, es, sec, na, nat) in rows]
    text = results_text(rows, config, __version__)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_approx(args):
    args.methods = args.method
    args.ranks = str(args.rank)
    args.trials = 1
    return cmd_sweep(args)


# ---------------------------------------------------------------------------
# theory-check


def _suite_gram(seed):
    rng = RngState(seed)
    worst_eq = 0.0
    for _ in range(20):
        A = rng.complex_normal((6, 8))
        A[np.abs(A) < 1e-3] += 0.1  # keep every entry away from zero
        E = expected_onestep_gram(A)
        G = A.conj().T @ A
        two_phi = 2.0 * (G - (G @ G) / np.trace(G).real)
        rel = np.linalg.norm(E - two_phi) / np.linalg.norm(two_phi)
        worst_eq = max(worst_eq, float(rel))
    worst_psd = np.inf
    for _ in range(10):
        A = rng.complex_normal((5, 7))
        A[rng.uniforms((5, 7)) < 0.3] = 0.0
        if not np.any(A):
            continue
        E = expected_onestep_gram(A)
        G = A.conj().T @ A
        two_phi = 2.0 * (G - (G @ G) / np.trace(G).real)
        lo = float(np.linalg.eigvalsh(two_phi - E)[0])
        worst_psd = min(worst_psd, lo)
    ok = worst_eq <= 1e-12 and worst_psd >= -1e-10
    return ok, (f"max relative gap (all-nonzero) {worst_eq:.2e}, "
                f"min eigenvalue of bound slack {worst_psd:.2e}")


def _suite_unitary(seed):
    worst = 0.0
    for n in (3, 4, 8):
        w = np.exp(-2j * np.pi / n)
        F = w ** np.outer(np.arange(n), np.arange(n)) / np.sqrt(n)
        tr = float(np.trace(expected_onestep_gram(F)).real)
        worst = max(worst, abs(tr - 2.0 * (n - 1)))
    return worst <= 1e-10, f"max |trace - 2(n-1)| = {worst:.2e}"


def _suite_doubling(seed, trials=200, ks=range(1, 9)):
    rng = RngState(seed)
    A = planted_spectrum(40, 40, 0.4, rng).array
    s = svd_oracle(A).s
    samples = np.zeros((trials, max(ks) + 1))
    for t in range(trials):
        trace = eliminate(A, PivotRule("rplu", RngState(seed ^ (t + 1))), max(ks))
        samples[t, :] = trace.resid_fro[: max(ks) + 1] ** 2
    margin = np.inf
    for k in ks:
        mean = samples[:, k].mean()
        sigma = samples[:, k].std(ddof=1) / np.sqrt(trials)
        bound = 4.0 ** k * float(np.sum(s[k:] ** 2))
        margin = min(margin, (bound - (mean - 3 * sigma)) / bound)
    ok = margin >= 0.0
    return ok, f"min relative slack to 4^k bound over k=1..8: {margin:.3f}"


def _suite_srplu(seed):
    rng = RngState(seed)
    worst = -np.inf
    for _ in range(100):
        X = rng.complex_normal((8, 8))
        C = X @ X.conj().T
        s, r = expected_onestep_trace_comparison(C)
        worst = max(worst, s - r)
    return worst <= 1e-10, f"max (rank-2 minus diagonal) expected trace: {worst:.2e}"


def _suite_phi_ratio(seed, iters=500):
    rng = RngState(seed)
    worst = 0.0
    for r in (2, 3, 5):
        X = rng.complex_normal((8, r))
        C = X @ X.conj().T
        ratios = phi_trace_ratio_limit(C, iters)
        worst = max(worst, abs(float(ratios[-1]) - (1.0 - 1.0 / r)))
    return worst <= 1e-5, f"max |ratio - (1 - 1/r)| after {iters} iters: {worst:.2e}"


THEORY_SUITES = {
    "doubling": _suite_doubling,
    "gram-onestep": _suite_gram,
    "unitary-trace": _suite_unitary,
    "srplu-rpcholesky": _suite_srplu,
    "phi-ratio": _suite_phi_ratio,
}


def cmd_theory_check(args):
    seed = _resolve_seed(args.seed)
    names = [args.suite] if args.suite else list(THEORY_SUITES)
    failures = 0
    for name in names:
        if name not in THEORY_SUITES:
            print(f"unknown suite {name!r}", file=sys.stderr)
            return 2
        ok, detail = THEORY_SUITES[name](seed)
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# cauchy / aaa / precond-demo


def _read_points_file(path):
    xs, ys, fx, fy = [], [], [], []
    with open(path) as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].startswith("#") or rec[0] == "set":
                continue
            which = rec[0].strip()
            pt = complex(float(rec[1]), float(rec[2]))
            val = complex(float(rec[3]), float(rec[4])) if len(rec) >= 5 else None
            if which == "x":
                xs.append(pt)
                fx.append(val)
            elif which == "y":
                ys.append(pt)
                fy.append(val)
            else:
                raise ValueError(f"point set must be 'x' or 'y', got {which!r}")
    return (np.array(xs), np.array(ys),
            None if any(v is None for v in fx) else np.array(fx),
            None if any(v is None for v in fy) else np.array(fy))


def cmd_cauchy(args):
    import numpy as np

    from .cauchy import CauchyLikeMatrix

    seed = _resolve_seed(args.seed)
    config = RunConfig(algorithm="cauchy", seed=seed, nu=args.nu,
                       tol=args.tol, input_spec=args.points or args.input,
                       extra={"rule": args.rule})
    if args.points:
        x, y, fx, fy = _read_points_file(args.points)
        if fx is not None and fy is not None:
            M = loewner_build(x, fx, y, fy)
        else:
            M = CauchyLikeMatrix(x, y, np.ones((x.size, 1)), np.ones((1, y.size)))
    else:
        M = generate("smiley-spiral-cauchy", {"seed": seed,
                                              "shape": args.input or "spirals"})
    plan = build_plan(M.x, M.y, nu=args.nu)
    rng = RngState(seed)
    trace = structured_eliminate(M, args.rule, min(M.shape),
                                 stop_tol=args.tol, nu=args.nu,
                                 plan=plan, rng=rng)
    lines = config.echo_lines(__version__)
    lines.append("step,row,col,bound_max")
    for t, (i, j) in enumerate(zip(trace.row_indices, trace.col_indices)):
        lines.append(f"{t},{i},{j},{trace.bound_maxes[t]:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _read_samples_file(path):
    pts, vals = [], []
    with open(path) as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].startswith("#") or rec[0] == "re":
                continue
            pts.append(complex(float(rec[0]), float(rec[1])))
            vals.append(complex(float(rec[2]), float(rec[3])))
    return SampleSet(np.array(pts), np.array(vals))


def cmd_aaa(args):
    seed = _resolve_seed(args.seed)
    config = RunConfig(algorithm="aaa", seed=seed, tol=args.tol,
                       input_spec=args.samples or args.input,
                       extra={"method": args.method})
    if args.samples:
        samples = _read_samples_file(args.samples)
    else:
        samples = generate("loewner-samples", _input_params(args.input), RngState(seed))
    t0 = time.perf_counter()
    if args.method == "aaa":
        r, _ = aaa(samples, tol=args.tol)
    else:
        rule = "rplu" if args.method == "cur-rplu" else "c2plu"
        r, _side = cur_aaa(samples, tol=args.tol, rule=rule, rng=RngState(seed))
    elapsed = time.perf_counter() - t0
    train_err = float(np.max(np.abs(r(samples.points) - samples.values)))
    lines = config.echo_lines(__version__)
    lines.append("method,support,train_max_err,seconds")
    lines.append(f"{args.method},{r.degree},{train_err:.17g},{elapsed:.6f}")
    lines.append("t_re,t_im,w_re,w_im,f_re,f_im")
    for t, w, f in zip(r.support, r.weights, r.values):
        lines.append(f"{t.real:.17g},{t.imag:.17g},{w.real:.17g},"
                     f"{w.imag:.17g},{f.real:.17g},{f.imag:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _input_params(spec):
    if not spec:
        return {}
    family, _, rest = spec.partition(":")
    params = {}
    if family and family != "loewner-samples" and not rest:
        rest = family
    for item in rest.split(","):
        if not item:
            continue
        key, _, val = item.partition("=")
        params[key] = val
    return params


def cmd_precond_demo(args):
    from .io import drifted_gaussian_toeplitz

    seed = _resolve_seed(args.seed)
    n = args.n
    config = RunConfig(algorithm="precond-demo", seed=seed, rank=args.rank,
                       extra={"n": n})
    # Kernel width keeps the rank-32 skeleton well conditioned at n=512.
    A = drifted_gaussian_toeplitz(n, span=320.0, delta=6.25, sigma=10.0)
    h = 320.0 / n
    main = np.full(n, 2.0 / h ** 2)
    off = np.full(n - 1, -1.0 / h ** 2)
    import scipy.linalg as sla
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1, :] = main
    ab[2, :-1] = off

    def b_inv(v):
        return sla.solve_banded((1, 1), ab, v)

    def K_apply(v):
        out = A.apply(v)
        out += main * v
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
        return out

    rng = RngState(seed)
    b = rng.complex_normal(n)
    fact, _ = cur_build(A, "rplu-cur", args.rank, rng=RngState(seed ^ 1))
    pre = smw_build(b_inv, A, fact)
    t0 = time.perf_counter()
    res_pre = gmres(K_apply, b, M_inv=pre, restart=20, tol=1e-10,
                    max_restarts=200)
    t_pre = time.perf_counter() - t0
    t0 = time.perf_counter()
    res_plain = gmres(K_apply, b, restart=20, tol=1e-10, max_restarts=5000)
    t_plain = time.perf_counter() - t0
    lines = config.echo_lines(__version__)
    lines.append("solver,iterations,final_rel_residual,converged,seconds")
    for name, res, sec in (("preconditioned", res_pre, t_pre),
                           ("unpreconditioned", res_plain, t_plain)):
        final = res.residuals[-1] if res.residuals.size else 0.0
        lines.append(f"{name},{res.iterations},{final:.3e},"
                     f"{int(res.converged)},{sec:.3f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="rplu",
                                description="pivoted low-rank approximation runs")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="error-vs-rank sweeps over methods")
    sweep.add_argument("--input", required=True,
                       help="instance: 'family:k=v,...' or 'mm:path'")
    sweep.add_argument("--methods", required=True,
                       help=f"comma list from {','.join(SWEEP_METHODS)}")
    sweep.add_argument("--ranks", required=True, help="'a..b[:step]' or comma list")
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--access", choices=("full", "matvec"), default="full")
    sweep.add_argument("--no-timing", action="store_true",
                       help="write seconds as 0 for byte-reproducible output")
    sweep.set_defaults(func=cmd_sweep)

    approx = sub.add_parser("approx", help="one method at one rank")
    approx.add_argument("--input", required=True)
    approx.add_argument("--method", required=True)
    approx.add_argument("--rank", type=int, required=True)
    approx.add_argument("--seed", type=int, default=None)
    approx.add_argument("--out", default=None)
    approx.add_argument("--access", choices=("full", "matvec"), default="full")
    approx.add_argument("--no-timing", action="store_true")
    approx.set_defaults(func=cmd_approx)

    theory = sub.add_parser("theory-check", help="run the built-in numeric suites")
    theory.add_argument("--suite", default=None,
                        help=f"one of {', '.join(THEORY_SUITES)} (default: all)")
    theory.add_argument("--seed", type=int, default=None)
    theory.set_defaults(func=cmd_theory_check)

    cauchy = sub.add_parser("cauchy", help="structured elimination on point sets")
    cauchy.add_argument("--points", default=None,
                        help="CSV of set,re,im[,f_re,f_im] rows")
    cauchy.add_argument("--input", default=None,
                        help="generator shape when no file: smiley|spirals")
    cauchy.add_argument("--rule", choices=("rplu", "c2plu"), default="rplu")
    cauchy.add_argument("--nu", type=float, default=5.0)
    cauchy.add_argument("--tol", type=float, default=1e-10)
    cauchy.add_argument("--seed", type=int, default=None)
    cauchy.add_argument("--out", default=None)
    cauchy.set_defaults(func=cmd_cauchy)

    raa = sub.add_parser("aaa", help="barycentric rational fitting")
    raa.add_argument("--samples", default=None, help="CSV of re,im,f_re,f_im rows")
    raa.add_argument("--input", default=None,
                     help="sample generator params, e.g. 'f=tan4,m=2000'")
    raa.add_argument("--tol", type=float, default=1e-11)
    raa.add_argument("--method", choices=("aaa", "cur-rplu", "cur-c2plu"),
                     default="aaa")
    raa.add_argument("--seed", type=int, default=None)
    raa.add_argument("--out", default=None)
    raa.set_defaults(func=cmd_aaa)

    demo = sub.add_parser("precond-demo", help="preconditioned vs plain GMRES")
    demo.add_argument("--n", type=int, default=512)
    demo.add_argument("--rank", type=int, default=32)
    demo.add_argument("--seed", type=int, default=None)
    demo.add_argument("--out", default=None)
    demo.set_defaults(func=cmd_precond_demo)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
