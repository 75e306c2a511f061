"""Command-line front end for the analysis pipeline.

Logs go to stderr; data only ever goes to files. Exit codes: 0 success,
1 validation failures, 2 I/O or configuration errors. Per-mutant failures
inside a batch are reported but do not abort the batch.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import pipeline as pl
from .canonical import canonical_bytes
from .errors import CrossfireError
from .reporting import FORMATS
from .selection import STRATEGIES, TIE_LEXICOGRAPHIC, TIE_RANDOM
from .synthgen import ScenarioSpec, demo_corpus, generate_corpus, write_corpus

logger = logging.getLogger("crossfire")

ENV_CORPUS = "CROSSFIRE_CORPUS"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    # Common flags live on a parent parser with SUPPRESS defaults, so they
    # can be given before or after the subcommand; real defaults sit on the
    # main parser and are only used when the flag is absent everywhere.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--corpus",
        type=Path,
        default=argparse.SUPPRESS,
        help=f"corpus root (default: ${ENV_CORPUS} or the working directory)",
    )
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS,
                        help="output directory (default: <corpus>/out)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="per-mutant worker processes (0 = all cores)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="debug logging")

    parser = argparse.ArgumentParser(
        prog="crossfire",
        description=(
            "Analyze end-of-test memory snapshots to find state infections that "
            "surviving mutants propagate but no assertion reveals, derive "
            "mutant-killing assertion candidates, and select a near-minimal set."
        ),
    )
    parser.set_defaults(corpus=None, out=None, jobs=0, verbose=False)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common],
                   help="schema-check every snapshot against the manifest")
    sub.add_parser("baseline", parents=[common],
                   help="build and cache the determinism mask from the N original runs")
    sub.add_parser("diff", parents=[common],
                   help="produce infection records for all surviving mutants")
    sub.add_parser("matrix", parents=[common],
                   help="build assertion candidates, the kill matrix, and killability stats")

    select = sub.add_parser("select", parents=[common], help="run the crossfire selection strategies")
    _add_select_args(select)

    report = sub.add_parser("report", parents=[common], help="render reports from cached artifacts")
    report.add_argument(
        "--format",
        action="append",
        choices=FORMATS,
        default=None,
        help="output format (repeatable; default: all)",
    )

    gen = sub.add_parser("gen", parents=[common],
                         help="generate a synthetic corpus with planted ground truth")
    gen.add_argument("--dest", type=Path, default=None, help="corpus directory to write (default: --corpus)")
    gen.add_argument("--preset", choices=["demo"], default=None, help="write the built-in worked example")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--tests", type=int, default=4)
    gen.add_argument("--mutants", type=int, default=20)
    gen.add_argument("--runs", type=int, default=10, help="number of unmutated runs N")
    gen.add_argument("--vars-per-test", type=int, nargs=2, default=(1, 3), metavar=("MIN", "MAX"))
    gen.add_argument("--depth", type=int, nargs=2, default=(2, 4), metavar=("MIN", "MAX"))
    gen.add_argument("--fanout", type=int, nargs=2, default=(1, 3), metavar=("MIN", "MAX"))
    gen.add_argument("--surviving-fraction", type=float, default=0.6)
    gen.add_argument("--masked-infections", action="store_true",
                     help="also plant infections at nondeterministic locations")

    pipe = sub.add_parser("pipeline", parents=[common],
                          help="run all stages: validate, baseline, diff, matrix, select, report")
    _add_select_args(pipe)
    pipe.add_argument("--format", action="append", choices=FORMATS, default=None)
    pipe.add_argument("--skip-validate", action="store_true", help="skip the validation stage")
    return parser


def _add_select_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--strategy",
        choices=STRATEGIES + ("all",),
        default="all",
        help="selection strategy (default: all three)",
    )
    parser.add_argument("--repeats", type=int, default=20, help="independent seeded runs to average")
    parser.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed+i")
    parser.add_argument("--tie-break", choices=[TIE_RANDOM, TIE_LEXICOGRAPHIC], default=TIE_RANDOM)
    parser.add_argument("--no-depth-filter", action="store_true",
                        help="keep candidates with non-shortest access paths")


def _select_options(args: argparse.Namespace) -> pl.SelectOptions:
    strategies = STRATEGIES if args.strategy == "all" else (args.strategy,)
    return pl.SelectOptions(
        strategies=strategies,
        repeats=args.repeats,
        base_seed=args.seed,
        tie_break=args.tie_break,
        depth_filter=not args.no_depth_filter,
    )


def _run_validate(corpus: Path, outdir: Path) -> int:
    violations, checked = pl.stage_validate(corpus)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "violations.json").write_bytes(
        canonical_bytes([{"message": v.message, "where": v.where} for v in violations])
    )
    if violations:
        for violation in violations:
            logger.error("violation: %s", violation)
        logger.error("%d violation(s) across %d snapshot file(s)", len(violations), checked)
        return EXIT_VALIDATION
    logger.info("validated %d snapshot file(s), no violations", checked)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    corpus = args.corpus or Path(os.environ.get(ENV_CORPUS, "."))
    outdir = args.out or corpus / "out"
    try:
        if args.command == "gen":
            dest = args.dest or corpus
            if args.preset == "demo":
                corpus_data = demo_corpus(n_runs=args.runs)
            else:
                spec = ScenarioSpec(
                    seed=args.seed,
                    n_tests=args.tests,
                    n_runs=args.runs,
                    vars_per_test=tuple(args.vars_per_test),
                    tree_depth=tuple(args.depth),
                    fanout=tuple(args.fanout),
                    n_mutants=args.mutants,
                    surviving_fraction=args.surviving_fraction,
                    masked_infections=args.masked_infections,
                )
                corpus_data = generate_corpus(spec)
            write_corpus(corpus_data, dest)
            logger.info(
                "wrote corpus with %d tests, %d mutants, %d runs to %s",
                len(corpus_data.manifest.tests),
                len(corpus_data.manifest.mutants),
                corpus_data.manifest.n_runs,
                dest,
            )
            return EXIT_OK

        if args.command == "validate":
            return _run_validate(corpus, outdir)

        cache = pl.StageCache.load(outdir)
        if args.command == "baseline":
            mask = pl.stage_baseline(corpus, outdir, cache)
            logger.info("mask covers %d test(s)", len(mask.tests()))
            return EXIT_OK
        if args.command == "diff":
            records = pl.stage_diff(corpus, outdir, jobs=args.jobs, cache=cache)
            logger.info("%d infection record(s)", len(records))
            return EXIT_OK
        if args.command == "matrix":
            matrix, stats = pl.stage_matrix(corpus, outdir, cache)
            logger.info(
                "%d candidate(s), %d of %d surviving mutant(s) killable",
                len(matrix.candidates), stats.n_killable, stats.n_surviving,
            )
            return EXIT_OK
        if args.command == "select":
            aggregates = pl.stage_select(corpus, outdir, _select_options(args), cache)
            for agg in aggregates:
                logger.info(
                    "%s: covered %d mutants, mean primary count %s",
                    agg.strategy, len(agg.covered), float(agg.mean_primary()),
                )
            return EXIT_OK
        if args.command == "report":
            formats = tuple(args.format) if args.format else FORMATS
            written = pl.stage_report(corpus, outdir, formats, cache)
            for path in written:
                logger.info("wrote %s", path)
            return EXIT_OK
        if args.command == "pipeline":
            if not args.skip_validate:
                status = _run_validate(corpus, outdir)
                if status != EXIT_OK:
                    return status
            formats = tuple(args.format) if args.format else FORMATS
            result = pl.run_pipeline(
                corpus, outdir, jobs=args.jobs, select_options=_select_options(args), formats=formats
            )
            logger.info(
                "pipeline done: %d records, %d candidates, killable %d/%d",
                len(result["records"]),
                len(result["matrix"].candidates),
                result["stats"].n_killable,
                result["stats"].n_surviving,
            )
            return EXIT_OK
        raise CrossfireError(f"unhandled command {args.command!r}")
    except CrossfireError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
