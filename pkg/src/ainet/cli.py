"""Command-line interface.

Subcommands: generate, train, evaluate, ablate, selfcheck. Every command
is deterministic given its flags and seed. Exit codes: 0 success,
1 usage error, 2 data/format error, 3 numeric failure.
"""

import argparse
import sys
from pathlib import Path

from .bags import load_bags, read_manifest
from .config import SELECTORS, VARIANTS, RunConfig, override, parse_config
from .errors import ConfigError, FormatError, NumericError, PartitionError
from .metrics import aggregate, fold_split, write_metrics_csv, write_predictions_csv
from .model import load_model, save_model
from .synth import SynthConfig, generate_dataset
from .training import cross_validate, evaluate_fold, train_fold, write_epoch_log

USAGE_EXIT = 1
DATA_EXIT = 2
NUMERIC_EXIT = 3

GRIDS = ("components", "selectors", "k-sweep", "r-sweep")
K_SWEEP = (0, 10, 20, 30, 40, 60, 80, 100)
R_SWEEP = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser():
    parser = _Parser(prog="ainet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset + manifest")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--bags", type=int, default=200)
    g.add_argument("--instances", type=int, default=256)
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--tumor-rate", type=float, default=0.05)
    g.add_argument("--morphologies", type=int, default=4)
    g.add_argument("--noise", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=42)

    t = sub.add_parser("train", help="train one fold and write the model file")
    t.add_argument("--manifest", required=True)
    t.add_argument("--config", help="key=value config file")
    t.add_argument("--fold", type=int, default=0)
    t.add_argument("--folds", type=int)
    t.add_argument("--variant", choices=VARIANTS)
    t.add_argument("--selector", choices=SELECTORS)
    t.add_argument("--out", required=True, help="model file (.aipm)")
    t.add_argument("--log", help="per-epoch CSV log")

    e = sub.add_parser("evaluate", help="evaluate a model on one test fold")
    e.add_argument("--manifest", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--fold", type=int, default=0)
    e.add_argument("--folds", type=int)
    e.add_argument("--out", required=True, help="output directory for CSVs")

    a = sub.add_parser("ablate", help="run an ablation grid of full CV cells")
    a.add_argument("--manifest", required=True)
    a.add_argument("--config", help="key=value config file")
    a.add_argument("--grid", required=True, choices=GRIDS)
    a.add_argument("--out", required=True, help="output directory")

    sub.add_parser("selfcheck", help="run the built-in oracle suite")
    return parser


def _load_config(path):
    return parse_config(path) if path else RunConfig().validate()


def cmd_generate(args):
    cfg = SynthConfig(
        n_bags=args.bags, n_instances=args.instances, dim=args.dim,
        n_classes=args.classes, tumor_rate=args.tumor_rate,
        n_morphologies=args.morphologies, noise_sigma=args.noise, seed=args.seed,
    )
    manifest = generate_dataset(cfg, args.out)
    print(manifest)
    return 0


def cmd_train(args):
    cfg = override(
        _load_config(args.config),
        folds=args.folds, variant=args.variant, selector=args.selector,
    )
    if not 0 <= args.fold < cfg.folds:
        raise ConfigError(f"fold {args.fold} outside [0, {cfg.folds})")
    records = read_manifest(args.manifest, cfg.classes)
    params, logs = train_fold(records, cfg, args.fold)
    save_model(params, cfg, args.out)
    if args.log:
        write_epoch_log(logs, args.log)
    print(args.out)
    return 0


def cmd_evaluate(args):
    params, cfg = load_model(args.model)
    cfg = override(cfg, folds=args.folds)
    if not 0 <= args.fold < cfg.folds:
        raise ConfigError(f"fold {args.fold} outside [0, {cfg.folds})")
    records = read_manifest(args.manifest, cfg.classes)
    labels = [label for _, _, label in records]
    _, test_idx = fold_split(labels, cfg.folds, cfg.seed, args.fold)
    if len(test_idx) == 0:
        raise FormatError(f"fold {args.fold}: empty test split")
    test_bags = load_bags([records[i] for i in test_idx])
    report = evaluate_fold(test_bags, params, cfg, args.fold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv([report], out / f"fold{args.fold}_metrics.csv")
    write_predictions_csv(report, out / f"fold{args.fold}_predictions.csv", cfg.classes)
    print(out / f"fold{args.fold}_metrics.csv")
    return 0


def _grid_cells(grid, cfg):
    if grid == "components":
        return [(v, override(cfg, variant=v)) for v in VARIANTS]
    if grid == "selectors":
        return [(s, override(cfg, selector=s)) for s in SELECTORS]
    if grid == "k-sweep":
        return [(f"k={k}", override(cfg, k_percent=float(k))) for k in K_SWEEP]
    if grid == "r-sweep":
        return [(f"r={r}", override(cfg, mask_ratio=r)) for r in R_SWEEP]
    raise ConfigError(f"unknown grid {grid!r}")


def cmd_ablate(args):
    cfg = _load_config(args.config)
    records = read_manifest(args.manifest, cfg.classes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for cell, cell_cfg in _grid_cells(args.grid, cfg):
        reports = cross_validate(records, cell_cfg)
        safe = cell.replace("=", "_")
        write_metrics_csv(reports, out / f"cell_{safe}_metrics.csv")
        acc = aggregate([r.accuracy for r in reports])
        auc_ms = aggregate([r.auc for r in reports])
        f1_ms = aggregate([r.f1 for r in reports])
        rows.append((cell, acc, auc_ms, f1_ms))
        print(f"{cell}: accuracy {acc[0]:.4f} +/- {acc[1]:.4f}")

    def fmt(v):
        return "nan" if v is None else repr(float(v))

    summary = out / f"{args.grid}_summary.csv"
    with open(summary, "w", encoding="utf-8", newline="") as f:
        f.write("cell,accuracy_mean,accuracy_std,auc_mean,auc_std,f1_mean,f1_std\n")
        for cell, acc, auc_ms, f1_ms in rows:
            f.write(",".join([cell, fmt(acc[0]), fmt(acc[1]), fmt(auc_ms[0]),
                              fmt(auc_ms[1]), fmt(f1_ms[0]), fmt(f1_ms[1])]) + "\n")
    print(summary)
    return 0


def cmd_selfcheck(args):
    from .selfcheck import run_selfcheck

    return 0 if run_selfcheck() else NUMERIC_EXIT


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "ablate": cmd_ablate,
        "selfcheck": cmd_selfcheck,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"ainet: usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (FormatError, PartitionError, OSError) as exc:
        print(f"ainet: data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except NumericError as exc:
        print(f"ainet: numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT


if __name__ == "__main__":
    sys.exit(main())
