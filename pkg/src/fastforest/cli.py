"""Command-line interface: ``fastforest <command> [options] DATASET...``.

Exit status is 0 on success, 2 on a usage error and 1 on a runtime error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .data import DatasetError, load_dataset
from .forest import BAG, BAG_UNIQUE, BuildConfig, ForestModel, build_forest, predict_batch, subbag
from .split import EXHAUSTIVE, LSPS, fixed
from .tree import DYNAMIC, STATIC, drs

DEFAULT_SEED = 1
PRESETS = {"rf": BuildConfig.random_forest, "fastforest": BuildConfig.fastforest}


class UsageError(Exception):
    pass


def _int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return v


def _fraction(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return v


def _threads(text):
    if text == "auto":
        return text
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def _seed(text):
    if text == "random":
        return int(np.random.SeedSequence().entropy) & ((1 << 64) - 1)
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'random', got {text!r}")


def _add_config_flags(p):
    g = p.add_argument_group("forest configuration")
    g.add_argument("--preset", action="append", choices=sorted(PRESETS),
                   help="named configuration; rf = bag-unique/exhaustive/static, "
                        "fastforest = subbag 0.5/lsps/drs(8). Repeat for compare (default: fastforest)")
    g.add_argument("--allow-override", action="store_true",
                   help="let component flags change a preset's sampler, split or subspace settings")
    g.add_argument("--trees", type=_int, default=100, help="trees per forest (default: 100)")
    g.add_argument("--sampler", choices=["bag", "bag-unique", "subbag"],
                   help="record sampler (default: subbag)")
    g.add_argument("--subbag-a", type=_fraction, help="subbag fraction (default: 0.5)")
    g.add_argument("--split", choices=["exhaustive", "fixed", "lsps"], help="split-point candidates (default: lsps)")
    g.add_argument("--fixed-cap", type=_int, help="candidate cap for --split fixed (default: 20)")
    g.add_argument("--subspace", choices=["static", "dynamic", "drs"], help="attribute subspace policy (default: drs)")
    g.add_argument("--drs-divisor", type=_int, help="DRS switch-over divisor (default: 8)")
    g.add_argument("--min-leaf", type=_int, default=1, help="stop at nodes with this many records or fewer (default: 1)")
    g.add_argument("--max-depth", type=_int, default=None, help="maximum tree depth (default: unlimited)")
    g.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                   help=f"master seed, or 'random' (default: {DEFAULT_SEED})")
    g.add_argument("--threads", type=_threads, default=None,
                   help="worker threads, or 'auto'; falls back to $FASTFOREST_THREADS (default: 1)")


def _add_eval_flags(p, fmt=True):
    p.add_argument("--folds", type=_int, default=10, help="cross-validation folds (default: 10)")
    p.add_argument("--fold-seed", type=_seed, default=None, help="seed for the fold assignment (default: --seed)")
    p.add_argument("--repeats", type=_int, default=1, help="timing repetitions per fold (default: 1)")
    if fmt:
        p.add_argument("--format", choices=["csv", "json"], default="csv", help="report format (default: csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastforest", description="Random-forest builder and experiment harness.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("train", help="build a forest and save it as JSON")
    p.add_argument("dataset")
    p.add_argument("--out", help="model file (default: <dataset>.model.json)")
    p.add_argument("--progress", action="store_true", help="per-tree counter on stderr")
    _add_config_flags(p)

    p = sub.add_parser("predict", help="classify the records of a dataset with a saved model")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--out", help="predictions CSV (default: stdout)")

    p = sub.add_parser("cv", help="k-fold cross-validation report")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--out", help="output directory (default: current directory)")
    _add_eval_flags(p)
    _add_config_flags(p)

    p = sub.add_parser("compare", help="head-to-head table over datasets, one column group per preset")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--out", help="output file (default: stdout)")
    _add_eval_flags(p)
    _add_config_flags(p)

    p = sub.add_parser("sweep", help="accuracy and build time across subbag fractions")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--fractions", type=_fraction, nargs="+", default=list(ev.SWEEP_FACTORS),
                   help="subbag fractions (default: 0.05..0.6 step 0.05 and 0.632)")
    p.add_argument("--out", help="output file (default: stdout)")
    _add_eval_flags(p)
    _add_config_flags(p)

    p = sub.add_parser("ablate", help="variants A (full), B (static subspace), C (exhaustive), D (subbag only)")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--fractions", type=_fraction, nargs="+", default=[0.5], help="subbag fractions (default: 0.5)")
    p.add_argument("--out", help="output file (default: stdout)")
    _add_eval_flags(p)
    _add_config_flags(p)
    return parser


def _component_overrides(args) -> dict:
    kw = {}
    if args.sampler is not None or args.subbag_a is not None:
        kind = args.sampler or "subbag"
        if kind == "subbag":
            kw["sampler"] = subbag(args.subbag_a if args.subbag_a is not None else 0.5)
        elif args.subbag_a is not None:
            raise UsageError("--subbag-a only applies to --sampler subbag")
        else:
            kw["sampler"] = BAG if kind == "bag" else BAG_UNIQUE
    if args.split is not None or args.fixed_cap is not None:
        kind = args.split or "fixed"
        if kind != "fixed" and args.fixed_cap is not None:
            raise UsageError("--fixed-cap only applies to --split fixed")
        kw["split_mode"] = {"exhaustive": EXHAUSTIVE, "lsps": LSPS}.get(kind) or fixed(20 if args.fixed_cap is None else args.fixed_cap)
    if args.subspace is not None or args.drs_divisor is not None:
        kind = args.subspace or "drs"
        if kind != "drs" and args.drs_divisor is not None:
            raise UsageError("--drs-divisor only applies to --subspace drs")
        kw["subspace_mode"] = {"static": STATIC, "dynamic": DYNAMIC}.get(kind) or drs(8 if args.drs_divisor is None else args.drs_divisor)
    return kw


def _threads_from(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FASTFOREST_THREADS")
    if env:
        try:
            return _threads(env)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"FASTFOREST_THREADS: {exc}")
    return 1


def resolve_configs(args) -> list:
    """``(name, BuildConfig)`` per requested preset (or one custom config)."""
    if args.trees < 1:
        raise UsageError("trees must be ≥ 1")
    common = dict(num_trees=args.trees, min_leaf=args.min_leaf, max_depth=args.max_depth,
                  seed=args.seed, threads=_threads_from(args))
    try:
        return _resolve(args, common)
    except ValueError as exc:  # invalid field combination from BuildConfig
        raise UsageError(str(exc))


def _resolve(args, common):
    overrides = _component_overrides(args)
    presets = args.preset or []
    if len(set(presets)) != len(presets):
        raise UsageError("each preset may be given once")
    if not presets:
        return [("custom" if overrides else "fastforest", BuildConfig.fastforest(**common, **overrides))]
    out = []
    for name in presets:
        base = PRESETS[name](**common)
        cfg = base.with_(**overrides)
        if cfg != base and not args.allow_override:
            changed = ", ".join(k.replace("_mode", "") for k in overrides if getattr(cfg, k) != getattr(base, k))
            raise UsageError(f"--preset {name} conflicts with {changed} flags (use --allow-override)")
        out.append((name, cfg))
    return out


def _single_config(args):
    configs = resolve_configs(args)
    if len(configs) != 1:
        raise UsageError(f"{args.command} takes a single preset")
    return configs[0]


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_train(args):
    _, cfg = _single_config(args)
    ds = load_dataset(args.dataset)
    progress = None
    if args.progress:
        def progress(j):
            print(f"tree {j + 1}/{cfg.num_trees}", file=sys.stderr)
    model = build_forest(ds, cfg, progress=progress)
    out = args.out or str(Path(args.dataset).with_suffix(".model.json"))
    model.save(out)
    print(f"{out}: {cfg.num_trees} trees, {model.split_evaluations} split evaluations", file=sys.stderr)


def cmd_predict(args):
    model = ForestModel.load(args.model)
    ds = load_dataset(args.dataset)
    pred = predict_batch(model, ds.values, ds)
    rows = [(i, model.classes[p]) for i, p in enumerate(pred)]
    _emit(ev.to_csv(("row", "predicted"), rows), args.out)


def _fold_seed(args):
    return args.seed if args.fold_seed is None else args.fold_seed


def cmd_cv(args):
    name, cfg = _single_config(args)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    for path in args.datasets:
        ds = load_dataset(path)
        rep = ev.cross_validate(ds, cfg, args.folds, _fold_seed(args), args.repeats, name=name)
        fname = ev.report_filename(ds.name, name, args.folds)
        if args.format == "json":
            fname = fname[:-4] + ".json"
            text = ev.to_json(rep.to_dict())
        else:
            text = ev.to_csv(rep.CSV_HEADER, rep.rows())
        (outdir / fname).write_text(text)
        print(f"{outdir / fname}: accuracy {ev.pct(rep.mean_accuracy)}%, build {ev.secs(rep.build_time)} s",
              file=sys.stderr)


def cmd_compare(args):
    configs = resolve_configs(args)
    if len(configs) < 2:
        raise UsageError("compare needs at least two --preset options")
    cmp = ev.run_comparison(args.datasets, configs, args.folds, _fold_seed(args), args.repeats)
    if args.format == "json":
        text = ev.to_json({"rows": [r.__dict__ | {"accuracy_winner": r.accuracy_winner, "time_winner": r.time_winner}
                                    for r in cmp.rows],
                           "totals": cmp.totals(), "speed_gain": cmp.speed_gain()})
    else:
        text = ev.to_csv(cmp.header, cmp.table())
    _emit(text, args.out)


def cmd_sweep(args):
    _, cfg = _single_config(args)
    rows, extra = ev.sweep_subbag(args.datasets, args.fractions, cfg, args.folds, _fold_seed(args), args.repeats)
    _report_skipped(x for x in extra if isinstance(x, tuple))
    if args.format == "json":
        text = ev.to_json([r.__dict__ for r in rows])
    else:
        text = ev.to_csv(ev.SWEEP_HEADER, ev.sweep_rows(rows))
    _emit(text, args.out)


def cmd_ablate(args):
    _, cfg = _single_config(args)
    rows, skipped = ev.ablate(args.datasets, args.folds, _fold_seed(args), args.fractions, cfg, args.repeats)
    _report_skipped(skipped)
    if args.format == "json":
        text = ev.to_json([r.__dict__ for r in rows])
    else:
        text = ev.to_csv(ev.ABLATION_HEADER, ev.ablation_rows(rows))
    _emit(text, args.out)


def _report_skipped(skipped):
    for name, err in skipped:
        print(f"skipped {name}: {err}", file=sys.stderr)


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "cv": cmd_cv, "compare": cmd_compare,
            "sweep": cmd_sweep, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"fastforest {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, ValueError, RuntimeError, OSError) as exc:
        print(f"fastforest {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
