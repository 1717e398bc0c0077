"""Command-line entry point: ``otil {gen-experts,train,plot,verify}``.

Exit status is 0 on success, 1 on a validation error (bad config, bad
demonstration file, mismatched dimensions, failed verification) and 2 on any
other failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

from . import harness, plot, verify
from .config import ConfigError, ExperimentConfig, load_config
from .demonstrations import DemoFormatError, ExpertGenerationError

EXIT_OK, EXIT_VALIDATION, EXIT_INTERNAL = 0, 1, 2


def _config(args) -> ExperimentConfig:
    return load_config(args.config) if args.config else ExperimentConfig()


def _out_dir(args, config: ExperimentConfig) -> Path:
    return Path(args.out or config.output_dir)


def cmd_gen_experts(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    path = Path(args.demos) if args.demos else out / "demos.txt"
    harness.gen_experts(config, path, parallelism=args.parallelism)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    demos = Path(args.demos) if args.demos else out / "demos.txt"
    result = harness.train_from_file(config, demos, out, seed_offset=args.seed_offset, parallelism=args.parallelism)
    for mode, (mean, _) in result.summary.items():
        final = f"{mean[-1]:.2f}" if len(mean) else "n/a"
        print(f"{mode.value}: {len(mean)} episodes, final mean moving reward {final}")
    print(f"wrote curves and summaries to {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    results = Path(args.results) if args.results else out
    summaries = sorted(results.glob("summary_*.csv"))
    if not summaries:
        raise harness.ValidationError(f"no summary_*.csv files in {results}")
    title = f"{config.environment.value}, diverse {config.variation_axis.value}s"
    path = plot.plot_summaries(summaries, out / "learning_curves.svg", title=title)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_checks()
    print(verify.format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otil", description="Imitation learning from diverse experts with sliced OT rewards.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gen-experts": (cmd_gen_experts, "train experts on perturbed physics and write the demo file"),
        "train": (cmd_train, "train SCOTIL/SMMOTIL agents for every seed and write CSVs"),
        "plot": (cmd_plot, "render summary CSVs as an SVG chart"),
        "verify": (cmd_verify, "run the fast invariant checks"),
    }
    for name, (fn, help_) in commands.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="experiment config file (defaults apply when omitted)")
        p.add_argument("--out", help="output directory (default: output_dir from the config)")
        p.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
        p.add_argument("--parallelism", type=int, default=None, help="worker processes (default: from the config)")
        if name in ("gen-experts", "train"):
            p.add_argument("--demos", help="demonstration file (default: <out>/demos.txt)")
        if name == "plot":
            p.add_argument("--results", help="directory holding summary_*.csv (default: --out)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DemoFormatError, harness.ValidationError, harness.CsvError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ExpertGenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
