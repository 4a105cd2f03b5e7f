"""Command line front-end over the experiment stages.

Exit codes: 0 success, 1 user error (bad config, missing files, usage),
2 internal error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ImprecError
from .harness import (
    emit_report,
    load_config,
    load_results,
    override_seeds,
    run_experiment,
    stage_evaluate,
    stage_impute,
    stage_inject,
    stage_train,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors are user errors
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="imprec", description="Missingness benchmark pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [
        ("inject", "inject missingness and write injected.csv + ledger.json"),
        ("impute", "run every configured imputer over the injected table"),
        ("train", "train the recommender per imputed dataset"),
        ("evaluate", "score checkpoints and write results.json"),
        ("run", "full pipeline: inject, impute, train, evaluate, report"),
        ("report", "render results.json as a table"),
    ]:
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="experiment config (JSON)")
        cmd.add_argument("--out", help="run directory (overrides config out_dir)")
        cmd.add_argument("--seed", type=int, help="override all stage seeds at once")
        if name in ("run", "report"):
            cmd.add_argument(
                "--format", choices=("markdown", "csv"), default="markdown",
                help="report format",
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = override_seeds(cfg, args.seed)
        out_dir = args.out or cfg.out_dir
        if not out_dir:
            print("error: no run directory; pass --out or set out_dir", file=sys.stderr)
            return 1
        if args.command == "inject":
            stage_inject(cfg, out_dir)
        elif args.command == "impute":
            stage_impute(cfg, out_dir)
        elif args.command == "train":
            stage_train(cfg, out_dir)
        elif args.command == "evaluate":
            stage_evaluate(cfg, out_dir)
        elif args.command == "run":
            results = run_experiment(cfg, out_dir)
            path = emit_report(results, args.format, out_dir)
            print(f"wrote {path}")
        elif args.command == "report":
            _, results = load_results(out_dir)
            path = emit_report(results, args.format, out_dir)
            print(f"wrote {path}")
        return 0
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ImprecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - internal failure boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
