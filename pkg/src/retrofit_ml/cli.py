"""Command-line entry point.

Exit status: 0 on success, 2 for configuration errors, 3 for data errors,
4 for any other failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import PipelineConfig, load_config, parse_config
from .errors import ConfigError, RetrofitError
from .models import ForestModel, TreeModel, load_model
from .pipeline import Pipeline
from .synthetic import write_synthetic_csv

STAGE_COMMANDS = ("prep", "explore", "select", "tune", "train", "compare", "run")


def format_tree(model: TreeModel, max_depth: int | None = None, precision: int = 6) -> str:
    """Indented outline of a fitted tree, one line per node with its count and mean.

    Rows with ``feature < threshold`` follow the ``yes`` branch.
    """
    names = model.feature_names
    if names is None:
        names = ["x"] if model.n_features == 1 else [f"x{j}" for j in range(model.n_features)]

    def num(v: float) -> str:
        return f"{float(v):.{precision}g}"

    def describe(node: int) -> str:
        stats = f"(n={int(model.n_samples[node])}, mean={num(model.value[node])})"
        f = int(model.feature[node])
        return f"leaf {stats}" if f < 0 else f"{names[f]} < {num(model.threshold[node])} {stats}"

    lines = []
    stack = [(0, 0, "")]
    while stack:
        node, depth, tag = stack.pop()
        lines.append("  " * depth + tag + describe(node))
        if model.feature[node] >= 0 and (max_depth is None or depth < max_depth):
            stack.append((int(model.right[node]), depth + 1, "no  -> "))
            stack.append((int(model.left[node]), depth + 1, "yes -> "))
    return "\n".join(lines)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="pipeline config (JSON)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--target", action="append", help="restrict to this target (repeatable)")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")

    p = argparse.ArgumentParser(prog="retrofit-ml", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "prep": "clean, encode and split the input",
        "explore": "write summary, grouped-mean, correlation and scatter CSVs",
        "select": "run the wrapper feature selectors",
        "tune": "tune hyperparameters on the selected features",
        "train": "fit final models and write metrics",
        "compare": "rank models by AIC",
        "run": "prep, select, tune, train and compare in one go",
    }
    for name in STAGE_COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])

    it = sub.add_parser("inspect-tree", help="print a fitted tree as an indented outline")
    it.add_argument("--model", required=True, help="model.json of a tree or forest")
    it.add_argument("--tree", type=int, default=0, help="tree index inside a forest")
    it.add_argument("--max-depth", type=int, help="stop printing below this depth")

    sy = sub.add_parser("synth", help="write the seeded synthetic dataset")
    sy.add_argument("--out", required=True, help="CSV path to write")
    sy.add_argument("--rows", type=int, default=500)
    sy.add_argument("--seed", type=int, default=20240101)
    return p


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = parse_config({**cfg.model_dump(mode="json", by_alias=True), "seed": args.seed})
    return cfg


def _inspect(args) -> int:
    if not Path(args.model).is_file():
        raise ConfigError(f"model file not found: {args.model}")
    model = load_model(args.model)
    if isinstance(model, ForestModel):
        if not 0 <= args.tree < len(model.trees):
            raise ConfigError(f"--tree must be in [0, {len(model.trees) - 1}]")
        model = model.trees[args.tree]
    if not isinstance(model, TreeModel):
        raise ConfigError(f"{args.model} holds a {model.kind} model, not a tree")
    print(format_tree(model, args.max_depth))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "inspect-tree":
            return _inspect(args)
        if args.command == "synth":
            path = write_synthetic_csv(Path(args.out), args.rows, args.seed)
            print(f"wrote {args.rows} rows to {path}")
            return 0
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = _config(args)
        log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
        pipe = Pipeline(cfg, args.out, args.threads, args.target, log)
        getattr(pipe, args.command)()
        if args.command in ("compare", "run"):
            for target in pipe.targets:
                print(pipe.target_dir(target) / "comparison.csv")
        return 0
    except RetrofitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # anything unexpected is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
