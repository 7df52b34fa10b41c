"""Entropy / information-gain kernels and split-point search.

Numeric attributes are split in two (``value <= threshold`` goes left).
Candidate thresholds are midpoints between adjacent distinct values, and
the candidate mode decides how many of them are evaluated:

* ``exhaustive``: every midpoint.
* ``fixed``: at most ``cap`` midpoints (20 by default).
* ``lsps``: ``floor(log2(d_i)) + 1`` midpoints, where ``d_i`` is the number
  of records with a non-missing value for the attribute at the node.

Sampled candidates are spread evenly over the *ranks* of the midpoint list:
candidate ``t`` (1-based, out of ``s``) is midpoint ``floor(t * (m-1) / (s+1))``.

Categorical attributes always split multiway, one branch per value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

ZERO_GAIN = 1e-9
TIE_TOL = 1e-12

_EXHAUSTIVE, _FIXED, _LSPS = 0, 1, 2
_MODE_CODES = {"exhaustive": _EXHAUSTIVE, "fixed": _FIXED, "lsps": _LSPS}


@dataclass(frozen=True)
class CandidateMode:
    kind: str = "exhaustive"
    cap: int = 20

    def __post_init__(self):
        if self.kind not in _MODE_CODES:
            raise ValueError(f"unknown candidate mode {self.kind!r}")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")

    @property
    def code(self) -> int:
        return _MODE_CODES[self.kind]

    def __str__(self):
        return f"fixed({self.cap})" if self.kind == "fixed" else self.kind


EXHAUSTIVE = CandidateMode("exhaustive")
LSPS = CandidateMode("lsps")


def fixed(cap: int = 20) -> CandidateMode:
    return CandidateMode("fixed", cap)


@dataclass(frozen=True)
class SplitSpec:
    attribute: int
    threshold: float | None  # None for a categorical multiway split
    n_branches: int
    gain: float

    @property
    def is_numeric(self) -> bool:
        return self.threshold is not None


@dataclass
class Counters:
    split_evaluations: int = 0
    nodes: int = 0
    leaves: int = 0

    def __add__(self, other: "Counters") -> "Counters":
        return Counters(
            self.split_evaluations + other.split_evaluations,
            self.nodes + other.nodes,
            self.leaves + other.leaves,
        )

    def as_dict(self):
        return {"split_evaluations": self.split_evaluations, "nodes": self.nodes, "leaves": self.leaves}


# ---------------------------------------------------------------------------
# reference formulas (plain Python)


def entropy(counts) -> float:
    """Shannon entropy in bits of a class-count vector; 0 for an empty vector."""
    total = sum(counts)
    if total <= 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def weighted_info(partitions) -> float:
    """Record-weighted mean entropy of the partitions."""
    if not partitions:
        raise ValueError("at least one partition is required")
    sizes = [sum(p) for p in partitions]
    total = sum(sizes)
    if total == 0:
        return 0.0
    return sum(s / total * entropy(p) for s, p in zip(sizes, partitions))


def gain(parent, partitions) -> float:
    """Information gain of splitting ``parent`` into ``partitions``."""
    sums = [sum(col) for col in zip(*partitions)]
    if len(sums) != len(parent) or any(a != b for a, b in zip(sums, parent)):
        raise ValueError(f"partition class sums {sums} do not match parent counts {list(parent)}")
    g = entropy(parent) - weighted_info(partitions)
    if -1e-12 < g < 0:
        g = 0.0
    return g


def lsps_count(d_i: int) -> int:
    """floor(log2(d_i)) + 1, computed exactly on integers."""
    if d_i < 1:
        raise ValueError("d_i must be >= 1")
    return int(d_i).bit_length()


def candidate_ranks(n_midpoints: int, d_i: int, mode: CandidateMode) -> list[int]:
    """Positions into the sorted midpoint list that ``mode`` evaluates."""
    if n_midpoints <= 0:
        return []
    if mode.kind == "exhaustive":
        return list(range(n_midpoints))
    target = mode.cap if mode.kind == "fixed" else lsps_count(d_i)
    s = min(target, n_midpoints)
    ranks = []
    for t in range(1, s + 1):
        r = t * n_midpoints // (s + 1)
        if not ranks or ranks[-1] != r:
            ranks.append(r)
    return ranks


def midpoint(lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    # float rounding can land on hi for adjacent doubles
    return mid if lo <= mid < hi else lo


def numeric_candidates(sorted_distinct_values, d_i: int, mode: CandidateMode) -> list[float]:
    v = list(sorted_distinct_values)
    if any(b <= a for a, b in zip(v, v[1:])):
        raise ValueError("values must be strictly ascending")
    mids = [midpoint(a, b) for a, b in zip(v, v[1:])]
    if not mids:
        return []
    if d_i < len(v):
        raise ValueError("d_i must be at least the number of distinct values")
    return [mids[r] for r in candidate_ranks(len(mids), d_i, mode)]


# ---------------------------------------------------------------------------
# compiled scans


@numba.njit(cache=True, nogil=True)
def _entropy(counts, total):
    if total <= 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * np.log2(p)
    return h


@numba.njit(cache=True, nogil=True)
def _ranks(n_mid, d_i, mode, cap):
    if mode == 0:
        return np.arange(n_mid)
    if mode == 1:
        target = cap
    else:
        target = 1
        while (d_i >> target) > 0:
            target += 1
    s = min(target, n_mid)
    out = np.empty(s, dtype=np.int64)
    k = 0
    for t in range(1, s + 1):
        r = t * n_mid // (s + 1)
        if k == 0 or out[k - 1] != r:
            out[k] = r
            k += 1
    return out[:k]


@numba.njit(cache=True, nogil=True)
def scan_numeric(col, y, idx, n_classes, mode, cap):
    """Evaluate sampled thresholds of one numeric attribute at a node.

    Returns ``(thresholds, gains, n_present)``. Gains are scaled by the
    fraction of node records whose value is present.
    """
    n = idx.size
    vals = np.empty(n, dtype=np.float64)
    labs = np.empty(n, dtype=np.int64)
    cnt = 0
    for i in idx:
        v = col[i]
        if not np.isnan(v):
            vals[cnt] = v
            labs[cnt] = y[i]
            cnt += 1
    empty = np.empty(0, dtype=np.float64)
    if cnt < 2:
        return empty, empty, cnt
    order = np.argsort(vals[:cnt], kind="mergesort")
    xs = vals[:cnt][order]
    ys = labs[:cnt][order]
    n_mid = 0
    for j in range(cnt - 1):
        if xs[j] < xs[j + 1]:
            n_mid += 1
    if n_mid == 0:
        return empty, empty, cnt
    ranks = _ranks(n_mid, cnt, mode, cap)
    total = np.zeros(n_classes, dtype=np.float64)
    for j in range(cnt):
        total[ys[j]] += 1.0
    parent_h = _entropy(total, cnt)
    scale = cnt / n
    left = np.zeros(n_classes, dtype=np.float64)
    right = np.empty(n_classes, dtype=np.float64)
    thr = np.empty(ranks.size, dtype=np.float64)
    gains = np.empty(ranks.size, dtype=np.float64)
    r = 0
    p = 0
    for j in range(cnt - 1):
        left[ys[j]] += 1.0
        if xs[j] < xs[j + 1]:
            if ranks[p] == r:
                nl = j + 1
                nr = cnt - nl
                for c in range(n_classes):
                    right[c] = total[c] - left[c]
                info = (nl * _entropy(left, nl) + nr * _entropy(right, nr)) / cnt
                g = parent_h - info
                if g < 0.0 and g > -1e-12:
                    g = 0.0
                gains[p] = g * scale
                mid = (xs[j] + xs[j + 1]) / 2.0
                if not (xs[j] <= mid and mid < xs[j + 1]):
                    mid = xs[j]
                thr[p] = mid
                p += 1
                if p == ranks.size:
                    break
            r += 1
    return thr, gains, cnt


@numba.njit(cache=True, nogil=True)
def scan_categorical(col, y, idx, n_values, n_classes):
    """Multiway gain of one categorical attribute. Returns ``(gain, table)``."""
    table = np.zeros((n_values, n_classes), dtype=np.float64)
    cnt = 0
    for i in idx:
        v = col[i]
        if not np.isnan(v):
            table[int(v), y[i]] += 1.0
            cnt += 1
    if cnt == 0:
        return 0.0, table
    parent = np.zeros(n_classes, dtype=np.float64)
    info = 0.0
    for v in range(n_values):
        nv = 0.0
        for c in range(n_classes):
            nv += table[v, c]
            parent[c] += table[v, c]
        if nv > 0:
            info += nv / cnt * _entropy(table[v], nv)
    g = _entropy(parent, cnt) - info
    if g < 0.0 and g > -1e-12:
        g = 0.0
    return g * cnt / idx.size, table


def warmup():
    """Trigger JIT compilation so that later timings exclude it."""
    col = np.array([0.0, 1.0, np.nan, 1.0])
    y = np.array([0, 1, 0, 1], dtype=np.int64)
    idx = np.arange(4, dtype=np.int64)
    scan_numeric(col, y, idx, 2, _LSPS, 20)
    scan_categorical(col, y, idx, 2, 2)
    cols = np.vstack([col, col])
    node_search(cols, y, idx, np.array([0, 1]), np.array([0, 2]), 2, _LSPS, 20, np.random.default_rng(0), True)


# ---------------------------------------------------------------------------
# node-level search


class Columns:
    """Column-major view of a dataset used by the split search.

    ``n_values[a]`` is 0 for numeric attributes and the value count for
    categorical ones.
    """

    def __init__(self, values, y, n_values, n_classes):
        self.cols = np.ascontiguousarray(np.asarray(values, dtype=np.float64).T)
        self.y = np.ascontiguousarray(y, dtype=np.int64)
        self.n_values = list(n_values)
        self.n_values_arr = np.asarray(self.n_values, dtype=np.int64)
        self.n_classes = int(n_classes)

    @classmethod
    def from_dataset(cls, ds):
        n_values = [0 if a.values is None else len(a.values) for a in ds.attributes]
        return cls(ds.values, ds.y, n_values, ds.n_classes)


@numba.njit(cache=True, nogil=True)
def node_search(cols, y, idx, attrs, n_values, n_classes, mode, cap, rng, use_rng):
    """Best split of ``idx`` over ``attrs``.

    Returns ``(attribute, threshold, gain, evaluations)``; attribute is -1
    when no candidate beats ZERO_GAIN. Threshold is NaN for categorical splits.
    """
    n = idx.size
    size = attrs.size * max(n, 1)
    cand_g = np.empty(size, dtype=np.float64)
    cand_t = np.empty(size, dtype=np.float64)
    cand_a = np.empty(size, dtype=np.int64)
    c = 0
    for a in attrs:
        nv = n_values[a]
        if nv == 0:
            thr, g, _ = scan_numeric(cols[a], y, idx, n_classes, mode, cap)
            for j in range(g.size):
                cand_g[c] = g[j]
                cand_t[c] = thr[j]
                cand_a[c] = a
                c += 1
        else:
            g1, _ = scan_categorical(cols[a], y, idx, nv, n_classes)
            cand_g[c] = g1
            cand_t[c] = np.nan
            cand_a[c] = a
            c += 1
    best = -1.0
    for j in range(c):
        if cand_g[j] > best:
            best = cand_g[j]
    if best <= 1e-9:
        return -1, np.nan, max(best, 0.0), c
    tied = 0
    for j in range(c):
        if cand_g[j] >= best - 1e-12:
            tied += 1
    pick = 0
    if use_rng and tied > 1:
        pick = rng.integers(0, tied)
    for j in range(c):
        if cand_g[j] >= best - 1e-12:
            if pick == 0:
                return cand_a[j], cand_t[j], cand_g[j], c
            pick -= 1
    return -1, np.nan, 0.0, c


def best_split(data: Columns, idx, attrs, mode: CandidateMode, counters: Counters | None = None, rng=None):
    """Highest-gain split of the records ``idx`` over the attributes ``attrs``.

    Ties within ``TIE_TOL`` are broken uniformly with ``rng`` (the first tied
    candidate in attribute order is taken when ``rng`` is None). Returns None
    when no split improves on ``ZERO_GAIN`` bits.
    """
    idx = np.asarray(idx, dtype=np.int64)
    attrs = np.asarray(attrs, dtype=np.int64)
    use_rng = rng is not None
    if rng is None:
        rng = np.random.default_rng(0)
    a, thr, g, evaluations = node_search(
        data.cols, data.y, idx, attrs, data.n_values_arr, data.n_classes, mode.code, mode.cap, rng, use_rng
    )
    if counters is not None:
        counters.split_evaluations += int(evaluations)
    if a < 0:
        return None
    a = int(a)
    if data.n_values[a]:
        return SplitSpec(a, None, data.n_values[a], float(g))
    return SplitSpec(a, float(thr), 2, float(g))
