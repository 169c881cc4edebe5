"""Command-line interface.

Subcommands: ``fit``, ``sample``, ``simulate``, ``pvalue``, ``match``,
``cossim`` and ``bench``.  Tables go to standard output as
whitespace-separated columns with a fixed header line; scalar results
follow as ``key value`` lines.

Exit codes
----------
0  success
2  bad arguments, unreadable or malformed input, dimension mismatch
3  fit failure
4  too few samples for the requested number of states
5  simulation size above the sample cap
"""

import argparse
import statistics
import sys

import numpy as np

from . import io
from .distributions import GammaMixture, mix_sample
from .em import FitConfig, fit
from .errors import FitError, SizeError, TooFewSamplesError
from .hierarchy import HierarchyConfig, QUERY_MODES, simulate
from .significance import best_matches, p_value

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3
EXIT_TOO_FEW = 4
EXIT_SIZE = 5

# two-state model used as benchmark data
BENCH_MODEL = GammaMixture.from_arrays([0.10, 0.90], [67.1, 19.2], [-0.20, -0.25], [109.0, 45.8])


def _g(v):
    return format(float(v), ".10g")


def _print_table(out, header, rows):
    print(" ".join(header), file=out)
    for r in rows:
        print(" ".join(str(v) if isinstance(v, (int, np.integer, str)) else _g(v) for v in r),
              file=out)


def _open_out(path, out):
    return out if path in (None, "-") else open(path, "w", encoding="utf-8")


def _close_out(fh, out):
    if fh is not out:
        fh.close()


# --- subcommands -------------------------------------------------------------

def cmd_fit(args, out):
    values, _ = io.read_scores(args.score_file)
    cfg = FitConfig(
        n_states=args.states,
        max_iters=args.max_iters,
        rel_ll_tol=args.tol,
        warm_start=not args.no_warm_start,
        seed=args.seed,
        accelerate=not args.no_accelerate,
    )
    report = fit(values, cfg)
    m = report.model
    if args.out:
        io.write_model(args.out, m, report)
    if args.density_out:
        io.write_density_csv(args.density_out, m, values, bins=args.bins)
    rows = [(i + 1, w, p.alpha, p.c, p.lam, p.mean)
            for i, (w, p) in enumerate(zip(m.weights, m.components))]
    _print_table(out, ["state", "tau", "alpha", "c", "lambda", "mean"], rows)
    print(f"log_likelihood {_g(report.log_likelihood)}", file=out)
    print(f"n_samples {report.n_samples}", file=out)
    print(f"mass_outside {_g(report.mass_outside)}", file=out)
    print(f"iterations {report.iterations_run}", file=out)
    print(f"converged {str(report.converged).lower()}", file=out)
    return EXIT_OK


def cmd_sample(args, out):
    model, _ = io.read_model(args.model_file)
    if args.n < 0:
        raise ValueError("--n must be >= 0")
    x = mix_sample(model, args.n, args.seed) if args.n else np.empty(0)
    fh = _open_out(args.out, out)
    try:
        fh.write(io.format_scores(x, header=f"n={args.n} seed={args.seed} states={model.n_states}"))
    finally:
        _close_out(fh, out)
    return EXIT_OK


def cmd_simulate(args, out):
    cfg = HierarchyConfig(depth=args.depth, eta=args.eta, degree=args.degree, dim=args.dim,
                          seed=args.seed, query=args.query, sample_cap=args.cap)
    ls = simulate(cfg)
    if args.drop_self:
        ls = ls.drop_first()
    header = (f"depth={cfg.depth} eta={cfg.eta!r} degree={cfg.degree} dim={cfg.dim} "
              f"seed={cfg.seed} query={cfg.query} drop_self={str(args.drop_self).lower()}\n"
              "columns: similarity level")
    fh = _open_out(args.out, out)
    try:
        fh.write(io.format_scores(ls.sims, ls.levels, header=header))
    finally:
        _close_out(fh, out)
    return EXIT_OK


def cmd_pvalue(args, out):
    model, _ = io.read_model(args.model_file)
    if args.x is not None:
        xs = np.array([args.x])
    else:
        xs, _ = io.read_scores(args.scores)
    ps = np.atleast_1d(p_value(model, xs))
    _print_table(out, ["x", "p_value"], zip(xs, ps))
    return EXIT_OK


def cmd_match(args, out):
    sims = io.read_matrix(args.matrix)
    nulls = [io.read_model(p)[0] for p in args.nulls]
    if len(nulls) == 1 and sims.shape[0] > 1:
        nulls = nulls * sims.shape[0]
    res = best_matches(sims, nulls, one_to_one=args.one_to_one)
    _print_table(out, ["query", "candidate", "similarity", "p_value"], res.rows())
    print(f"fisher_stat {_g(res.combined_stat)}", file=out)
    print(f"fisher_p {_g(res.combined_p)}", file=out)
    return EXIT_OK


def cmd_cossim(args, out):
    queries = io.read_embeddings(args.query_file)
    docs = io.read_embeddings(args.docs_file)
    S = np.vstack([io.cosine_similarities(q, docs) for q in queries])
    if args.scores_prefix:
        for qi, row in enumerate(S):
            io.write_scores(f"{args.scores_prefix}{qi}.txt", row, header=f"query {qi}")
    fh = _open_out(args.out, out)
    try:
        for row in S:
            fh.write(",".join(io.format_float(v) for v in row) + "\n")
    finally:
        _close_out(fh, out)
    return EXIT_OK


def bench(n=100_000, states_list=(1, 2, 4), repeats=3, seed=0, max_iters=200, tol=0.0):
    """Time warm-start and cold fits on one synthetic data set.

    Returns rows ``(states, warm_ms, cold_ms, speedup, ll_rel_delta)`` with
    median wall-clock times over ``repeats`` runs.
    """
    x = mix_sample(BENCH_MODEL, n, seed)
    rows = []
    fit(x[:1000], FitConfig(n_states=1, max_iters=5))  # untimed warm-up
    for s in states_list:
        cfgs = {warm: FitConfig(n_states=s, max_iters=max_iters, rel_ll_tol=tol,
                                warm_start=warm, seed=seed) for warm in (True, False)}
        runs = {True: [], False: []}
        # interleave so both variants see the same machine load
        for _ in range(repeats):
            for warm in (True, False):
                runs[warm].append(fit(x, cfgs[warm]))
        times = {w: 1e3 * statistics.median(r.elapsed_s for r in runs[w]) for w in runs}
        ll = {w: runs[w][-1].log_likelihood for w in runs}
        delta = abs(ll[True] - ll[False]) / abs(ll[False])
        rows.append((s, times[True], times[False], times[False] / times[True], delta))
    return rows


def cmd_bench(args, out):
    states = [int(s) for s in args.states_list.split(",") if s.strip()]
    rows = bench(args.n, states, args.repeats, args.seed, args.max_iters, args.tol)
    _print_table(out, ["states", "warm_ms", "cold_ms", "speedup", "ll_rel_delta"], rows)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="cosgamma",
                                description="Shifted gamma mixtures for cosine similarity scores.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a mixture to a score file")
    f.add_argument("score_file")
    f.add_argument("--states", type=int, default=1)
    f.add_argument("--max-iters", type=int, default=200)
    f.add_argument("--tol", type=float, default=1e-8, help="relative log-likelihood tolerance")
    f.add_argument("--no-warm-start", action="store_true")
    f.add_argument("--no-accelerate", action="store_true", help="plain ECM iterations")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--bins", type=int, default=100)
    f.add_argument("--out", help="model file to write")
    f.add_argument("--density-out", help="density CSV to write")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", help="draw scores from a model file")
    s.add_argument("model_file")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_sample)

    h = sub.add_parser("simulate", help="similarities from a random hierarchy")
    h.add_argument("--depth", type=int, default=20)
    h.add_argument("--eta", type=float, default=0.95)
    h.add_argument("--degree", type=int, default=2)
    h.add_argument("--dim", type=int, default=384)
    h.add_argument("--seed", type=int, default=1)
    h.add_argument("--query", choices=QUERY_MODES, default="first-leaf")
    h.add_argument("--drop-self", action="store_true", help="omit the first leaf")
    h.add_argument("--cap", type=int, default=2**21, help="maximum number of leaves")
    h.add_argument("--out", default="-")
    h.set_defaults(func=cmd_simulate)

    v = sub.add_parser("pvalue", help="right-tail p-values under a model")
    v.add_argument("model_file")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--x", type=float)
    g.add_argument("--scores")
    v.set_defaults(func=cmd_pvalue)

    m = sub.add_parser("match", help="significance-ranked matching")
    m.add_argument("matrix", help="similarity matrix CSV, one query per row")
    m.add_argument("--nulls", nargs="+", required=True,
                   help="one model file per query (or one shared by all)")
    m.add_argument("--one-to-one", action="store_true")
    m.set_defaults(func=cmd_match)

    c = sub.add_parser("cossim", help="cosine similarities between embedding files")
    c.add_argument("query_file")
    c.add_argument("docs_file")
    c.add_argument("--out", default="-", help="similarity matrix CSV")
    c.add_argument("--scores-prefix", help="also write one score file per query")
    c.set_defaults(func=cmd_cossim)

    b = sub.add_parser("bench", help="warm-start versus cold fit timing")
    b.add_argument("--n", type=int, default=100_000)
    b.add_argument("--states-list", default="1,2,4")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-iters", type=int, default=200)
    b.add_argument("--tol", type=float, default=0.0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except TooFewSamplesError as exc:
        code, msg = EXIT_TOO_FEW, exc
    except FitError as exc:
        code, msg = EXIT_FIT, exc
    except SizeError as exc:
        code, msg = EXIT_SIZE, exc
    except (ValueError, OSError) as exc:
        code, msg = EXIT_INPUT, exc
    print(f"cosgamma {args.command}: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
