"""Command-line front door.

Exit codes: 0 satisfiable/ok, 1 unsatisfiable, 2 input error, 3 budget cap
violated.  Every command is deterministic under --seed; timing columns stay
zero unless --timings is given so repeated CSV output is byte-identical.
A key=value config file can preload any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
import time
from typing import Optional

from . import pac
from .core import (
    BudgetError,
    ConstraintSet,
    KTuple,
    OrientedSet,
    ParseError,
    ThreeWay,
    default_points,
    parse_constraints,
    parse_newick,
    serialize_constraint,
    serialize_constraints,
    write_newick,
)
from .builder import build_binary, build_nonbinary, reduce_ktuple
from .dimension import construct_shattered_set, is_n_shattered, natarajan_dimension
from .msf import build_ktuple_via_msf, build_via_msf
from .online import (
    ConstantLearner,
    HalvingLearner,
    TreeConsistentLearner,
    adversary_game,
    build_littlestone_tree,
    transcript_csv,
    verify_shattered,
)
from .tree_ops import extract_triplets, orientation_of, random_binary_tree

SEED_ENV_VAR = "HCTREE_SEED"

EXIT_OK = 0
EXIT_UNSAT = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR, "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def _default_jobs() -> int:
    return os.cpu_count() or 1


def _add_common(parser: argparse.ArgumentParser, top: bool) -> None:
    # common flags are accepted before or after the subcommand
    default = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=default(_default_seed()),
                        help=f"random seed (default: ${SEED_ENV_VAR} or 0)")
    parser.add_argument("--config", default=default(None),
                        help="key=value file preloading flags; explicit flags win")
    parser.add_argument("--jobs", type=int, default=default(_default_jobs()),
                        help="worker pool size; 1 forces fully serial runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hctree",
        description="Hierarchical clustering trees from triplet and k-tuple constraints",
    )
    _add_common(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide satisfiability of a constraint file")
    p.add_argument("file")
    p.add_argument("--nonbinary", action="store_true",
                   help="search multiway trees (implied by three-way constraints)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("build", help="construct a tree for split-pair constraints")
    p.add_argument("file")
    p.add_argument("--engine", choices=("baseline", "msf"), default="baseline")
    p.add_argument("--backend", choices=("naive", "fast"), default="naive")
    p.add_argument("--trace", default=None, help="write the msf deletion log here")
    p.add_argument("--ktuple", action="store_true",
                   help="input is k-tuple (tree:) constraints; reduce before building")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("extract", help="emit every triplet constraint of a tree")
    p.add_argument("file", help="Newick tree file")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("ndim", help="exhaustive Natarajan-dimension search")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--nonbinary", action="store_true")
    p.add_argument("--cap", type=int, default=6, help="refuse n above this")
    p.add_argument("--csv", default=None, help="append the result row here")
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_ndim)

    p = sub.add_parser("shatter", help="construct and verify a shatterable tuple set")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("--out", default=None, help="write the tuple set here")
    p.set_defaults(func=cmd_shatter)

    p = sub.add_parser("littlestone", help="build the shattered adversary tree")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--depth-budget", type=int, default=16)
    p.add_argument("--game", choices=("constant", "halving", "tree"), default=None,
                   help="run the adversarial game against this learner")
    p.add_argument("--transcript", default=None, help="write the game CSV here")
    p.set_defaults(func=cmd_littlestone)

    p = sub.add_parser("pac", help="sampling experiments")
    p.add_argument("--mode", choices=pac.MODES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k-ratio", default="2",
                   help="comma-separated samples/n ratios")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--test-size", type=int, default=2000)
    p.add_argument("--vectors", default=None, help="vector CSV for agnostic-file mode")
    p.add_argument("--hierarchical", action="store_true",
                   help="synthetic hierarchical vectors instead of a file")
    p.add_argument("--threshold", action="store_true",
                   help="measure samples until the first contradiction instead")
    p.add_argument("--out", default=None, help="trial CSV (default: stdout)")
    p.add_argument("--aggregate", default=None, help="aggregate CSV path")
    p.add_argument("--svg", default=None, help="line-chart SVG path")
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_pac)

    p = sub.add_parser("bench", help="wall-time smoke benchmark of the engines")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=10000)
    p.add_argument("--engine", choices=("baseline", "msf", "both"), default="both")
    p.set_defaults(func=cmd_bench)

    for sp in sub.choices.values():
        _add_common(sp, top=False)

    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    if not args.config:
        return
    with open(args.config, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"config entry {line!r} is not key=value", line_no)
            key, value = (part.strip() for part in line.split("=", 1))
            attr = key.replace("-", "_")
            if f"--{key}" in argv or f"--{attr}" in argv:
                continue  # explicit flag wins
            if not hasattr(args, attr):
                raise ParseError(f"config key {key!r} matches no flag", line_no)
            current = getattr(args, attr)
            if isinstance(current, bool):
                setattr(args, attr, value.lower() in ("1", "true", "yes", "on"))
            elif isinstance(current, int):
                setattr(args, attr, int(value))
            elif isinstance(current, float):
                setattr(args, attr, float(value))
            else:
                setattr(args, attr, value)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _witness_text(points, witness) -> str:
    names = sorted(points.labels[p] for p in witness.points)
    return "witness: {" + ", ".join(names) + "}"


def cmd_check(args) -> int:
    oset = parse_constraints(_read_text(args.file))
    if isinstance(oset, ConstraintSet):
        print("error: file has unlabeled tuples; satisfiability needs orientations",
              file=sys.stderr)
        return EXIT_INPUT
    flat = []
    for c in oset.constraints:
        flat.extend(reduce_ktuple(c) if isinstance(c, KTuple) else [c])
    flattened = OrientedSet(oset.points, tuple(flat))
    nonbinary = args.nonbinary or any(isinstance(c, ThreeWay) for c in flat)
    outcome = build_nonbinary(flattened) if nonbinary else build_binary(flattened)
    if outcome.ok:
        print("SAT")
        print(write_newick(outcome.tree, oset.points))
        return EXIT_OK
    print("UNSAT")
    print(_witness_text(oset.points, outcome.witness))
    return EXIT_UNSAT


def cmd_build(args) -> int:
    if args.backend == "fast":
        print("error: the fast msf backend is not available in this build; use --backend naive",
              file=sys.stderr)
        return EXIT_INPUT
    oset = parse_constraints(_read_text(args.file))
    if isinstance(oset, ConstraintSet):
        print("error: build needs labeled constraints", file=sys.stderr)
        return EXIT_INPUT
    trace: Optional[list[str]] = [] if args.trace else None
    if args.ktuple:
        if not all(isinstance(c, KTuple) for c in oset.constraints):
            print("error: --ktuple expects only tree: constraints", file=sys.stderr)
            return EXIT_INPUT
        if args.engine == "msf":
            outcome = build_ktuple_via_msf(oset, trace=trace)
        else:
            flat = [r for c in oset.constraints for r in reduce_ktuple(c)]
            outcome = build_binary(OrientedSet(oset.points, tuple(flat)))
    else:
        if not oset.only_split_pairs():
            print("error: build expects split-pair constraints (use check for three-way)",
                  file=sys.stderr)
            return EXIT_INPUT
        if args.engine == "msf":
            outcome = build_via_msf(oset, trace=trace)
        else:
            outcome = build_binary(oset)
    if args.trace is not None and trace is not None:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("\n".join(trace) + ("\n" if trace else ""))
    if outcome.ok:
        print(write_newick(outcome.tree, oset.points))
        return EXIT_OK
    print(_witness_text(oset.points, outcome.witness), file=sys.stderr)
    return EXIT_UNSAT


def cmd_extract(args) -> int:
    tree, points = parse_newick(_read_text(args.file))
    if tree.n_leaves < 3:
        print("error: triplet extraction needs at least 3 leaves", file=sys.stderr)
        return EXIT_INPUT
    oset = extract_triplets(tree, points)
    lines = sorted(serialize_constraint(c, points) for c in oset.constraints)
    print("\n".join(lines))
    return EXIT_OK


def cmd_ndim(args) -> int:
    started = time.perf_counter()
    dim = natarajan_dimension(args.n, args.k, nonbinary=args.nonbinary, cap=args.cap)
    seconds = time.perf_counter() - started if args.timings else 0.0
    print(dim)
    if args.csv:
        mode = "nonbinary" if args.nonbinary else "binary"
        row = f"{args.n},{args.k},{mode},{dim},{seconds:.6f}\n"
        header = "n,k,mode,dimension,seconds\n"
        fresh = not os.path.exists(args.csv) or os.path.getsize(args.csv) == 0
        with open(args.csv, "a", encoding="utf-8") as fh:
            if fresh:
                fh.write(header)
            fh.write(row)
    return EXIT_OK


def cmd_shatter(args) -> int:
    cset, pairs = construct_shattered_set(args.n, args.k)
    verified = "skipped"
    if not args.no_verify:
        verified = "true" if is_n_shattered(cset, pairs) else "false"
    print(f"size={len(cset.tuples)} verified={verified}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(serialize_constraints(cset))
    return EXIT_OK if verified != "false" else EXIT_UNSAT


def cmd_littlestone(args) -> int:
    L = build_littlestone_tree(args.n, args.k, depth_budget=args.depth_budget)
    if args.verify:
        ok = verify_shattered(L)
        print(f"depth={L.depth} shattered={'true' if ok else 'false'}")
        if not ok:
            return EXIT_UNSAT
    else:
        print(f"depth={L.depth}")
    if args.game:
        learner = {
            "constant": ConstantLearner,
            "halving": lambda: HalvingLearner(L.n_prime),
            "tree": lambda: TreeConsistentLearner(L.n_prime),
        }[args.game]()
        mistakes, rows = adversary_game(L, learner)
        print(f"mistakes={mistakes}")
        if args.transcript:
            with open(args.transcript, "w", encoding="utf-8") as fh:
                fh.write(transcript_csv(rows, default_points(L.n)))
    return EXIT_OK


def cmd_pac(args) -> int:
    ratios = tuple(float(r) for r in str(args.k_ratio).split(","))
    config = pac.ExperimentConfig(
        mode=args.mode, n=args.n, k_ratios=ratios, trials=args.trials,
        seed=args.seed, dim=args.dim, test_size=args.test_size,
        timings=args.timings,
    )
    if args.threshold:
        if args.mode != "agnostic-vectors":
            print("error: --threshold runs in agnostic-vectors mode", file=sys.stderr)
            return EXIT_INPUT
        report = pac.contradiction_threshold(config, jobs=args.jobs)
        counts = ",".join("none" if c is None else str(c) for c in report.counts)
        mean = "none" if report.mean is None else f"{report.mean:.2f}"
        per_n = "none" if report.mean is None else f"{report.mean / args.n:.4f}"
        print(f"mean={mean} mean_per_n={per_n} counts={counts}")
        return EXIT_OK

    vectors = None
    if args.mode == "agnostic-file":
        if args.hierarchical:
            vectors = pac.hierarchical_vectors(
                args.n, args.dim, random.Random(f"hier:{args.seed}"))
        elif args.vectors:
            _, vectors = pac.load_vectors_csv(_read_text(args.vectors))
        else:
            print("error: agnostic-file mode needs --vectors or --hierarchical",
                  file=sys.stderr)
            return EXIT_INPUT

    runner = {
        "realizable": pac.run_realizable,
        "nonbinary": pac.run_nonbinary,
    }.get(args.mode)
    if runner is not None:
        report = runner(config, jobs=args.jobs)
    else:
        report = pac.run_agnostic(config, vectors=vectors, jobs=args.jobs)

    trial_text = pac.trials_csv(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(trial_text)
    else:
        print(trial_text, end="")
    if args.aggregate:
        with open(args.aggregate, "w", encoding="utf-8") as fh:
            fh.write(pac.aggregate_csv(report))
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(pac.render_report_svg(report, title=args.mode))
    return EXIT_OK


def cmd_bench(args) -> int:
    rng = random.Random(args.seed)
    tree = random_binary_tree(args.n, rng)
    points = default_points(args.n)
    constraints = []
    for _ in range(args.m):
        a, b, c = sorted(rng.sample(range(args.n), 3))
        constraints.append(orientation_of(tree, a, b, c))
    oset = OrientedSet(points, tuple(constraints))
    engines = ("baseline", "msf") if args.engine == "both" else (args.engine,)
    print("engine,n,m,seconds,ok")
    for engine in engines:
        started = time.perf_counter()
        outcome = build_via_msf(oset) if engine == "msf" else build_binary(oset)
        seconds = time.perf_counter() - started
        print(f"{engine},{args.n},{args.m},{seconds:.3f},{int(outcome.ok)}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args, argv)
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetError as exc:
        print(f"budget exceeded: {exc.cap}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
