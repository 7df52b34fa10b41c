"""Ensemble construction: record samplers, the multi-tree builder and voting."""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset
from .split import EXHAUSTIVE, LSPS, CandidateMode, Columns, Counters
from .tree import STATIC, SubspaceMode, Tree, TreeBuildContext, build_tree, drs, predict_rows

MODEL_SCHEMA = "fastforest-model/1"
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SamplerMode:
    kind: str = "subbag"
    fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in ("bag", "bag_unique", "subbag"):
            raise ValueError(f"unknown sampler {self.kind!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("subbag fraction must lie in (0, 1]")

    def __str__(self):
        return f"subbag({self.fraction:g})" if self.kind == "subbag" else self.kind


def subbag(fraction: float = 0.5) -> SamplerMode:
    return SamplerMode("subbag", fraction)


BAG = SamplerMode("bag")
BAG_UNIQUE = SamplerMode("bag_unique")


@dataclass(frozen=True)
class BuildConfig:
    num_trees: int = 100
    sampler: SamplerMode = field(default_factory=subbag)
    split_mode: CandidateMode = LSPS
    subspace_mode: SubspaceMode = field(default_factory=drs)
    min_leaf: int = 1
    max_depth: int | None = None
    seed: int = 1
    threads: int | str = 1
    fixed_k: int | None = None  # overrides subspace_mode when set

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("trees must be ≥ 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.fixed_k is not None and self.fixed_k < 1:
            raise ValueError("fixed_k must be >= 1")
        if self.threads != "auto" and (not isinstance(self.threads, int) or self.threads < 1):
            raise ValueError("threads must be a positive integer or 'auto'")

    @classmethod
    def random_forest(cls, **kw) -> "BuildConfig":
        """Baseline: deduplicated bootstrap, every midpoint, static subspace."""
        kw.setdefault("sampler", BAG_UNIQUE)
        kw.setdefault("split_mode", EXHAUSTIVE)
        kw.setdefault("subspace_mode", STATIC)
        return cls(**kw)

    @classmethod
    def fastforest(cls, **kw) -> "BuildConfig":
        kw.setdefault("sampler", subbag(0.5))
        kw.setdefault("split_mode", LSPS)
        kw.setdefault("subspace_mode", drs(8))
        return cls(**kw)

    def with_(self, **kw) -> "BuildConfig":
        return replace(self, **kw)

    def resolved_threads(self) -> int:
        if self.threads == "auto":
            return os.cpu_count() or 1
        return int(self.threads)

    def describe(self) -> str:
        return f"{self.sampler}/{self.split_mode}/{self.subspace_mode}"

    def to_dict(self) -> dict:
        # thread count does not affect the model, so it is not recorded
        d = asdict(self)
        del d["threads"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BuildConfig":
        return cls(
            num_trees=d["num_trees"],
            sampler=SamplerMode(**d["sampler"]),
            split_mode=CandidateMode(**d["split_mode"]),
            subspace_mode=SubspaceMode(**d["subspace_mode"]),
            min_leaf=d["min_leaf"],
            max_depth=d["max_depth"],
            seed=d["seed"],
            fixed_k=d.get("fixed_k"),
        )


# ---------------------------------------------------------------------------
# samplers


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent stream for tree ``tree_index``.

    The master seed and tree index are hashed by numpy's ``SeedSequence``
    (entropy = seed mod 2**64, spawn_key = (tree_index,)) into a PCG64 state.
    """
    ss = np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=(tree_index,))
    return np.random.Generator(np.random.PCG64(ss))


def make_subbag(n: int, a: float, rng: np.random.Generator) -> np.ndarray:
    """``max(1, floor(a*n))`` distinct indices: shuffle ``[0, n)`` and keep the head."""
    if n < 1:
        raise ValueError("n must be >= 1")
    size = max(1, int(np.floor(a * n)))
    return rng.permutation(n)[:size]


def make_bag(n: int, rng: np.random.Generator, unique: bool = False) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    draws = rng.integers(0, n, size=n)
    return np.unique(draws) if unique else draws


def draw_sample(n: int, sampler: SamplerMode, rng) -> np.ndarray:
    if sampler.kind == "subbag":
        return make_subbag(n, sampler.fraction, rng)
    return make_bag(n, rng, unique=sampler.kind == "bag_unique")


# ---------------------------------------------------------------------------
# model


@dataclass
class ForestModel:
    trees: list
    config: BuildConfig
    fingerprint: str
    classes: tuple
    class_index: int
    n_attributes: int
    tree_evaluations: list  # split evaluations per tree
    tree_times: list = field(default_factory=list, compare=False)
    counters: Counters = field(default_factory=Counters)

    @property
    def split_evaluations(self) -> int:
        return int(sum(self.tree_evaluations))

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "config": self.config.to_dict(),
            "fingerprint": self.fingerprint,
            "classes": list(self.classes),
            "class_index": self.class_index,
            "n_attributes": self.n_attributes,
            "tree_evaluations": [int(e) for e in self.tree_evaluations],
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestModel":
        if doc.get("schema") != MODEL_SCHEMA:
            raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
        return cls(
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            config=BuildConfig.from_dict(doc["config"]),
            fingerprint=doc["fingerprint"],
            classes=tuple(doc["classes"]),
            class_index=doc["class_index"],
            n_attributes=doc["n_attributes"],
            tree_evaluations=list(doc["tree_evaluations"]),
        )

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ForestModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _build_one(ds_cols, features, n, config: BuildConfig, j: int):
    t0 = time.perf_counter()
    rng = tree_rng(config.seed, j)
    sample = draw_sample(n, config.sampler, rng)
    counters = Counters()
    ctx = TreeBuildContext(
        train_size=int(sample.size),
        total_attrs=int(features.size),
        mode=config.subspace_mode,
        min_leaf=config.min_leaf,
        rng=rng,
        max_depth=config.max_depth,
        k_override=config.fixed_k,
    )
    tree = build_tree(ds_cols, sample, ctx, config.split_mode, counters, features)
    return tree, counters, time.perf_counter() - t0


def build_forest(ds: Dataset, config: BuildConfig, progress=None) -> ForestModel:
    """Build ``config.num_trees`` trees, tree ``j`` from its own seeded stream.

    Trees are independent of one another, so any thread count yields the same
    model for a given seed.
    """
    ds.check_trainable()
    cols = Columns.from_dataset(ds)
    features = np.asarray(ds.feature_indices, dtype=np.int64)
    threads = config.resolved_threads()

    def job(j):
        out = _build_one(cols, features, ds.n, config, j)
        if progress is not None:
            progress(j)
        return out

    if threads == 1:
        results = [job(j) for j in range(config.num_trees)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(config.num_trees)))
    total = Counters()
    for _, c, _ in results:
        total = total + c
    return ForestModel(
        trees=[r[0] for r in results],
        config=config,
        fingerprint=ds.fingerprint(),
        classes=ds.classes,
        class_index=ds.class_index,
        n_attributes=len(ds.attributes),
        tree_evaluations=[r[1].split_evaluations for r in results],
        tree_times=[r[2] for r in results],
        counters=total,
    )


# ---------------------------------------------------------------------------
# prediction


def tree_votes(model: ForestModel, X) -> np.ndarray:
    """Per-tree predictions, shape ``(num_trees, n_rows)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.vstack([predict_rows(t, X) for t in model.trees])


def vote(votes: np.ndarray, n_classes: int) -> np.ndarray:
    """Majority of each column of ``votes``; ties go to the smallest class id."""
    counts = np.zeros((votes.shape[1], n_classes), dtype=np.int64)
    for row in votes:
        counts[np.arange(votes.shape[1]), row] += 1
    return np.argmax(counts, axis=1)


def _check_schema(model: ForestModel, ds: Dataset | None, width: int):
    if ds is not None and ds.fingerprint() != model.fingerprint:
        raise ValueError("dataset schema does not match the model")
    if width != model.n_attributes:
        raise ValueError(f"record has {width} cells, model expects {model.n_attributes}")


def predict_batch(model: ForestModel, X, ds: Dataset | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_schema(model, ds, X.shape[1])
    return vote(tree_votes(model, X), len(model.classes))


def predict(model: ForestModel, row, ds: Dataset | None = None) -> int:
    """Class id voted by the forest for one record."""
    return int(predict_batch(model, np.asarray(row, dtype=np.float64)[None, :], ds)[0])
