"""``fewseval`` command line.

Exit codes: 0 ok, 1 usage/config/input error, 2 catalog error,
3 geometry failure, 4 nothing could be scored.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import ConfigError, load_config
from .errors import DuplicateEntryError, EmptyJoinError, FewsEvalError, GeometryError
from .pipeline import StageError, run_build, run_catalog, run_evaluate, run_report

EXIT_OK, EXIT_ERROR, EXIT_CATALOG, EXIT_GEOMETRY, EXIT_EVALUATE = 0, 1, 2, 3, 4

log = logging.getLogger("fewseval")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--data-root", help="directory holding the classification layers")
    common.add_argument("--output-dir", help="where stage outputs are written")
    common.add_argument("--periods", metavar="FROM..TO", help="e.g. 2016-02..2022-10")
    common.add_argument("--sources", help="comma-separated subset of FEWSNET,PPS,SPLY,Max2PP")
    common.add_argument("--threshold-area", type=float, help="sliver threshold in square degrees")
    common.add_argument("--threshold-coverage", type=float, help="minimum covered fraction of an atom")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fewseval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("catalog", parents=[common], help="index classification layers under the data root")
    sub.add_parser("build", parents=[common], help="build atoms and the classification panel")
    sub.add_parser("evaluate", parents=[common], help="generate predictions and score them")
    sub.add_parser("report", parents=[common], help="re-render report.md from stored reports")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(
            args.config,
            data_root=args.data_root,
            output_dir=args.output_dir,
            periods=args.periods,
            sources=args.sources,
            area_threshold=args.threshold_area,
            coverage_threshold=args.threshold_coverage,
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    try:
        if args.command == "catalog":
            entries, problems = run_catalog(cfg)
            for p in problems:
                print(f"warning: {p}", file=sys.stderr)
            print(f"{len(entries)} layers catalogued, {len(problems)} skipped")
        elif args.command == "build":
            m = run_build(cfg)
            print(f"{m['atoms']['atoms']} atoms, {m['panel_rows']} panel rows")
        elif args.command == "evaluate":
            m = run_evaluate(cfg)
            print(f"{m['reports']} reports written to {cfg.output_dir}")
        else:
            print(run_report(cfg))
    except DuplicateEntryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CATALOG
    except GeometryError as exc:
        print(f"error: geometry failure: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except EmptyJoinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVALUATE
    except (StageError, FewsEvalError, ConfigError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
