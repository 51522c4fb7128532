"""Command line front end: train a two-stage run, or probe an adapter."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import CorpusSchemaError, ModelLoadError, NonFiniteLoss
from .probe import memorization_probe
from .trainer import run_two_stage

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphfit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train", help="run both training stages on a corpus directory")
    train.add_argument("--config", required=True, help="pipeline config with a [finetune] table")
    train.add_argument(
        "--corpus", required=True, help="directory holding stage1.jsonl, stage2.jsonl, manifest.json"
    )
    train.add_argument("--output", help="override the configured output directory")
    train.add_argument("--device", default="cpu")
    probe = sub.add_parser("probe", help="count record suffixes an adapter reproduces")
    probe.add_argument("--adapter", required=True)
    probe.add_argument("--records", required=True, help="stage1 corpus file to probe")
    probe.add_argument("--suffix-words", type=int, default=2)
    probe.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            config = load_config(args.config)
            if args.output:
                config.output_dir = args.output
            result = run_two_stage(args.corpus, config, device=args.device)
            for part in (result.stage1, result.stage2):
                loss = "-" if part.final_loss is None else f"{part.final_loss:.6f}"
                print(f"{part.stage}: {part.epochs_run} epochs, loss {loss}, stop={part.stop_reason}")
            print(f"adapter: {result.adapter_path}")
        else:
            report = memorization_probe(
                args.adapter, Path(args.records), suffix_words=args.suffix_words, device=args.device
            )
            print(
                f"reproduced {report.reproduced}/{report.checked} "
                f"(fraction {report.fraction:.3f}, excluded {report.excluded})"
            )
    except (CorpusSchemaError, ModelLoadError, NonFiniteLoss, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
