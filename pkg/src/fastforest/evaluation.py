"""Cross-validation, timing and the comparison / sweep / ablation harnesses.

Accuracies are fractions internally and percentages (2 dp) in emitted tables.
Build time is wall clock around ``build_forest`` only; with ``repeats > 1``
every fold is rebuilt that many times and both the mean and the median of
the per-repeat totals are kept (the mean is the headline figure).
"""
from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, DatasetError, load_dataset, stratified_folds
from .forest import BuildConfig, build_forest, predict_batch, subbag
from .split import EXHAUSTIVE
from .tree import STATIC, warmup

# subbag factors swept by default: 0.05 .. 0.60 step 0.05, plus 0.632 (bagging-sized)
SWEEP_FACTORS = tuple(round(0.05 * i, 2) for i in range(1, 13)) + (0.632,)


@dataclass
class EvalReport:
    dataset: str
    config_name: str
    config: BuildConfig
    k: int
    seed: int
    fold_accuracies: list
    fold_sizes: list
    fold_times: list  # mean over repeats, per fold
    fold_evaluations: list
    confusion: list  # one (n_classes, n_classes) array per fold, rows = true class
    repeat_times: list = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def build_time(self) -> float:
        return float(np.mean(self.repeat_times))

    @property
    def build_time_median(self) -> float:
        return float(statistics.median(self.repeat_times))

    @property
    def split_evaluations(self) -> int:
        return int(sum(self.fold_evaluations))

    CSV_HEADER = ("dataset", "config", "fold", "n_test", "accuracy_pct", "build_time_s", "split_evaluations")

    def rows(self):
        for i, (acc, n, t, ev) in enumerate(zip(self.fold_accuracies, self.fold_sizes, self.fold_times, self.fold_evaluations)):
            yield (self.dataset, self.config_name, i + 1, n, pct(acc), secs(t), ev)
        yield (self.dataset, self.config_name, "mean", sum(self.fold_sizes), pct(self.mean_accuracy),
               secs(self.build_time), self.split_evaluations)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "config_name": self.config_name,
            "config": self.config.to_dict(),
            "k": self.k,
            "seed": self.seed,
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "fold_sizes": list(self.fold_sizes),
            "fold_times": list(self.fold_times),
            "fold_evaluations": list(self.fold_evaluations),
            "confusion": [c.tolist() for c in self.confusion],
            "mean_accuracy": self.mean_accuracy,
            "build_time": self.build_time,
            "build_time_median": self.build_time_median,
            "repeat_times": list(self.repeat_times),
            "split_evaluations": self.split_evaluations,
        }


def pct(fraction: float) -> str:
    return f"{100.0 * fraction:.2f}"


def secs(t: float) -> str:
    return f"{t:.3f}"


def cross_validate(ds: Dataset, config: BuildConfig, k: int = 10, seed: int = 1,
                   repeats: int = 1, name: str | None = None) -> EvalReport:
    """Stratified k-fold cross-validation of one configuration.

    ``seed`` fixes the fold assignment only; the forest uses ``config.seed``.
    A build failure is re-raised as ``RuntimeError`` naming the fold.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ds.check_trainable()
    warmup()
    plan = stratified_folds(ds, k, seed)
    accs, sizes, evals, confusion = [], [], [], []
    times = np.zeros((repeats, k))
    for i, (train, test) in enumerate(plan):
        train_ds = ds.subset(train)
        for r in range(repeats):
            try:
                t0 = time.perf_counter()
                model = build_forest(train_ds, config)
                times[r, i] = time.perf_counter() - t0
            except Exception as exc:
                raise RuntimeError(f"fold {i + 1}: {exc}") from exc
        pred = predict_batch(model, ds.values[test])
        truth = ds.y[test]
        cm = np.zeros((ds.n_classes, ds.n_classes), dtype=np.int64)
        np.add.at(cm, (truth, pred), 1)
        accs.append(float(np.mean(pred == truth)))
        sizes.append(int(test.size))
        evals.append(model.split_evaluations)
        confusion.append(cm)
    return EvalReport(
        dataset=ds.name,
        config_name=name or config.describe(),
        config=config,
        k=k,
        seed=seed,
        fold_accuracies=accs,
        fold_sizes=sizes,
        fold_times=times.mean(axis=0).tolist(),
        fold_evaluations=evals,
        confusion=confusion,
        repeat_times=times.sum(axis=1).tolist(),
    )


# ---------------------------------------------------------------------------
# multi-dataset harnesses


def _resolve(item):
    """Dataset or path -> (name, Dataset | None, error message | None)."""
    if isinstance(item, Dataset):
        return item.name, item, None
    try:
        ds = load_dataset(item)
        ds.check_trainable()
        return ds.name, ds, None
    except (DatasetError, OSError) as exc:
        return Path(item).stem, None, str(exc)


def _winner(values: dict, higher_is_better: bool) -> str:
    best = max(values.values()) if higher_is_better else min(values.values())
    top = [name for name, v in values.items() if v == best]
    return top[0] if len(top) == 1 else "tie"


@dataclass
class ComparisonRow:
    dataset: str
    accuracy: dict = field(default_factory=dict)  # config name -> mean accuracy (fraction)
    time: dict = field(default_factory=dict)  # config name -> mean build time (s)
    evaluations: dict = field(default_factory=dict)
    skipped: str | None = None

    @property
    def accuracy_winner(self) -> str:
        # compared as printed: percent to 2 dp
        return _winner({c: round(100 * a, 2) for c, a in self.accuracy.items()}, True)

    @property
    def time_winner(self) -> str:
        return _winner({c: round(t, 3) for c, t in self.time.items()}, False)


@dataclass
class Comparison:
    names: list
    rows: list
    reports: list

    def totals(self) -> dict:
        done = [r for r in self.rows if r.skipped is None]
        out = {"datasets": len(done)}
        for c in self.names:
            out[c] = {
                "avg_accuracy": float(np.mean([r.accuracy[c] for r in done])) if done else float("nan"),
                "total_time": float(sum(r.time[c] for r in done)),
                "accuracy_wins": sum(r.accuracy_winner == c for r in done),
                "time_wins": sum(r.time_winner == c for r in done),
            }
        out["accuracy_ties"] = sum(r.accuracy_winner == "tie" for r in done)
        out["time_ties"] = sum(r.time_winner == "tie" for r in done)
        return out

    def speed_gain(self, baseline: str | None = None, candidate: str | None = None) -> float:
        """Relative total-time saving of ``candidate`` over ``baseline`` (first and last config by default)."""
        baseline = baseline or self.names[0]
        candidate = candidate or self.names[-1]
        tot = self.totals()
        tb = tot[baseline]["total_time"]
        return 1.0 - tot[candidate]["total_time"] / tb if tb > 0 else float("nan")

    @property
    def header(self):
        cols = ["dataset"]
        for c in self.names:
            cols += [f"{c}_accuracy_pct", f"{c}_time_s", f"{c}_split_evaluations"]
        return cols + ["accuracy_winner", "time_winner", "status"]

    def table(self):
        for r in self.rows:
            if r.skipped is not None:
                yield [r.dataset] + [""] * (3 * len(self.names)) + ["", "", f"skipped: {r.skipped}"]
                continue
            line = [r.dataset]
            for c in self.names:
                line += [pct(r.accuracy[c]), secs(r.time[c]), r.evaluations[c]]
            yield line + [r.accuracy_winner, r.time_winner, "ok"]
        tot = self.totals()
        line = ["AVG/Total"]
        for c in self.names:
            line += [pct(tot[c]["avg_accuracy"]), secs(tot[c]["total_time"]), ""]
        wins = lambda key: ";".join(f"{c}={tot[c][key]}" for c in self.names)  # noqa: E731
        yield line + [f"{wins('accuracy_wins')};ties={tot['accuracy_ties']}",
                      f"{wins('time_wins')};ties={tot['time_ties']}",
                      f"speed_gain={100 * self.speed_gain():.1f}%"]


def run_comparison(datasets, configs, k: int = 10, seed: int = 1, repeats: int = 1) -> Comparison:
    """Evaluate every named config on every dataset.

    ``configs`` is a sequence of ``(name, BuildConfig)``. Datasets may be
    given as loaded ``Dataset`` objects or paths; a path that fails to load
    yields a skipped row.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("no datasets")
    configs = list(configs)
    if len(configs) < 2:
        raise ValueError("need at least two configs to compare")
    names = [n for n, _ in configs]
    if len(set(names)) != len(names):
        raise ValueError("config names must be distinct")
    rows, reports = [], []
    for item in datasets:
        label, ds, err = _resolve(item)
        row = ComparisonRow(label)
        if ds is None:
            row.skipped = err
            rows.append(row)
            continue
        for cname, cfg in configs:
            rep = cross_validate(ds, cfg, k, seed, repeats, name=cname)
            reports.append(rep)
            row.accuracy[cname] = rep.mean_accuracy
            row.time[cname] = rep.build_time
            row.evaluations[cname] = rep.split_evaluations
        rows.append(row)
    return Comparison(names, rows, reports)


@dataclass
class SweepRow:
    fraction: float
    mean_accuracy: float  # averaged over datasets
    total_time: float  # summed over datasets
    split_evaluations: int


SWEEP_HEADER = ("subbag_a", "accuracy_pct", "build_time_s", "split_evaluations")


def sweep_subbag(datasets, fractions=SWEEP_FACTORS, base: BuildConfig | None = None,
                 k: int = 10, seed: int = 1, repeats: int = 1):
    """One row per subbag factor, every other config field held fixed.

    Returns ``(rows, reports)``; skipped datasets are reported in
    ``reports`` as ``(name, error)`` pairs.
    """
    fractions = list(fractions)
    if not all(0.0 < a <= 1.0 for a in fractions):
        raise ValueError("subbag factors must lie in (0, 1]")
    loaded = _load_all(datasets)
    base = base or BuildConfig.fastforest()
    rows, reports = [], []
    for a in fractions:
        cfg = base.with_(sampler=subbag(a))
        reps = [cross_validate(ds, cfg, k, seed, repeats, name=f"subbag{a:g}") for ds in loaded["ok"]]
        reports += reps
        rows.append(SweepRow(
            fraction=a,
            mean_accuracy=float(np.mean([r.mean_accuracy for r in reps])) if reps else float("nan"),
            total_time=float(sum(r.build_time for r in reps)),
            split_evaluations=sum(r.split_evaluations for r in reps),
        ))
    return rows, reports + loaded["skipped"]


def _load_all(datasets):
    datasets = list(datasets)
    if not datasets:
        raise ValueError("no datasets")
    ok, skipped = [], []
    for item in datasets:
        label, ds, err = _resolve(item)
        if ds is None:
            skipped.append((label, err))
        else:
            ok.append(ds)
    return {"ok": ok, "skipped": skipped}


def ablation_variants(base: BuildConfig | None = None) -> dict:
    """Configs A-D: full, static subspacing, exhaustive split points, neither."""
    a = base or BuildConfig.fastforest()
    return {
        "A": a,
        "B": a.with_(subspace_mode=STATIC),
        "C": a.with_(split_mode=EXHAUSTIVE),
        "D": a.with_(split_mode=EXHAUSTIVE, subspace_mode=STATIC),
    }


@dataclass
class AblationRow:
    dataset: str
    fraction: float
    variant: str
    accuracy: float
    time: float
    split_evaluations: int


ABLATION_HEADER = ("dataset", "subbag_a", "variant", "accuracy_pct", "build_time_s", "split_evaluations")


def ablate(datasets, k: int = 10, seed: int = 1, fractions=(0.5,), base: BuildConfig | None = None,
           repeats: int = 1):
    """Evaluate variants A-D at each subbag factor. Returns ``(rows, skipped)``."""
    loaded = _load_all(datasets)
    base = base or BuildConfig.fastforest()
    rows = []
    for ds in loaded["ok"]:
        for a in fractions:
            variants = ablation_variants(base.with_(sampler=subbag(a)))
            _check_variants(variants)
            for tag, cfg in variants.items():
                rep = cross_validate(ds, cfg, k, seed, repeats, name=tag)
                rows.append(AblationRow(ds.name, a, tag, rep.mean_accuracy, rep.build_time, rep.split_evaluations))
    return rows, loaded["skipped"]


def _check_variants(variants):
    a, d = variants["A"].to_dict(), variants["D"].to_dict()
    diff = {key for key in a if a[key] != d[key]}
    if not diff <= {"split_mode", "subspace_mode"}:
        raise AssertionError(f"variant D differs from A in {sorted(diff)}")


# ---------------------------------------------------------------------------
# emission


def report_filename(dataset: str, config_name: str, k: int) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in config_name)
    return f"{dataset}_{safe}_{k}fold.csv"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def sweep_rows(rows):
    for r in rows:
        yield (f"{r.fraction:g}", pct(r.mean_accuracy), secs(r.total_time), r.split_evaluations)


def ablation_rows(rows):
    for r in rows:
        yield (r.dataset, f"{r.fraction:g}", r.variant, pct(r.accuracy), secs(r.time), r.split_evaluations)


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
