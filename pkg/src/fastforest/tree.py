"""Decision-tree induction with per-node attribute subspacing.

The subspace size ``k`` at a node follows one of three policies:

``static``   ``floor(log2 m) + 1``
``dynamic``  ``floor(log2(m * d / d_i)) + 1``
``drs``      static while ``d_i > d / divisor``, dynamic once ``d_i <= d / divisor``

where ``m`` is the number of non-class attributes, ``d`` the size of the
tree's training sample and ``d_i`` the number of records at the node.
``k`` is clamped to ``[1, m]``.

Trees are stored as flat arrays indexed by node id (root = 0). The children
of an internal node occupy the consecutive ids ``first_child .. first_child
+ n_branches - 1``; leaves have ``attribute == -1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from numba.typed import List

from .split import CandidateMode, Columns, Counters, SplitSpec, node_search

TREE_SCHEMA = "fastforest-tree/1"
_SUBSPACE_CODES = {"static": 0, "dynamic": 1, "drs": 2}


@dataclass(frozen=True)
class SubspaceMode:
    kind: str = "static"
    divisor: int = 8

    def __post_init__(self):
        if self.kind not in _SUBSPACE_CODES:
            raise ValueError(f"unknown subspace mode {self.kind!r}")
        if self.divisor < 2:
            raise ValueError("divisor must be >= 2")

    @property
    def code(self) -> int:
        return _SUBSPACE_CODES[self.kind]

    def __str__(self):
        return f"drs({self.divisor})" if self.kind == "drs" else self.kind


STATIC = SubspaceMode("static")
DYNAMIC = SubspaceMode("dynamic")


def drs(divisor: int = 8) -> SubspaceMode:
    return SubspaceMode("drs", divisor)


def subspace_size(m: int, d: int, d_i: int, mode: SubspaceMode) -> int:
    """Number of attributes drawn at a node holding ``d_i`` of ``d`` records."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 1 <= d_i <= d:
        raise ValueError(f"need 1 <= d_i <= d, got d_i={d_i}, d={d}")
    if mode.kind == "static" or (mode.kind == "drs" and d_i * mode.divisor > d):
        k = m.bit_length()
    else:
        # floor(log2(q)) == floor(log2(floor(q))) for q >= 1
        k = ((m * d) // d_i).bit_length()
    return max(1, min(k, m))


@numba.njit(cache=True, nogil=True)
def _bit_length(x):
    b = 0
    while x > 0:
        x >>= 1
        b += 1
    return b


@numba.njit(cache=True, nogil=True)
def _subspace_size(m, d, d_i, kind, divisor):
    if kind == 0 or (kind == 2 and d_i * divisor > d):
        k = _bit_length(m)
    else:
        k = _bit_length((m * d) // d_i)
    return max(1, min(k, m))


@dataclass(eq=False)
class Tree:
    attribute: np.ndarray
    threshold: np.ndarray
    n_branches: np.ndarray
    first_child: np.ndarray
    missing_child: np.ndarray
    gain: np.ndarray
    dist: np.ndarray  # (n_nodes, n_classes) training class counts per node

    @property
    def n_nodes(self) -> int:
        return self.attribute.size

    @property
    def majority(self) -> np.ndarray:
        return np.argmax(self.dist, axis=1)

    def is_leaf(self, node: int) -> bool:
        return self.attribute[node] < 0

    def children(self, node: int) -> range:
        if self.attribute[node] < 0:
            return range(0)
        f = int(self.first_child[node])
        return range(f, f + int(self.n_branches[node]))

    def split(self, node: int) -> SplitSpec | None:
        if self.attribute[node] < 0:
            return None
        t = float(self.threshold[node])
        return SplitSpec(int(self.attribute[node]), None if t != t else t, int(self.n_branches[node]), float(self.gain[node]))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):  # children always follow their parent
            for c in self.children(node):
                depth[c] = depth[node] + 1
        return int(depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.attribute < 0)

    def structurally_equal(self, other: "Tree") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=f in ("threshold", "gain"))
            for f in ("attribute", "threshold", "n_branches", "first_child", "missing_child", "gain", "dist")
        )

    # JSON form: one entry per node, children referenced by id
    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            counts = [int(c) for c in self.dist[i]]
            if self.attribute[i] < 0:
                nodes.append({"kind": "leaf", "counts": counts})
                continue
            numeric = not np.isnan(self.threshold[i])
            entry = {
                "kind": "numeric" if numeric else "categorical",
                "attribute": int(self.attribute[i]),
                "gain": float(self.gain[i]),
                "children": list(self.children(i)),
                "missing": int(self.missing_child[i]),
                "counts": counts,
            }
            if numeric:
                entry["threshold"] = float(self.threshold[i])
            nodes.append(entry)
        return {"schema": TREE_SCHEMA, "nodes": nodes}

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        if doc.get("schema") != TREE_SCHEMA:
            raise ValueError(f"unsupported tree schema {doc.get('schema')!r}")
        nodes = doc["nodes"]
        n = len(nodes)
        t = cls(
            attribute=np.full(n, -1, dtype=np.int64),
            threshold=np.full(n, np.nan),
            n_branches=np.zeros(n, dtype=np.int64),
            first_child=np.full(n, -1, dtype=np.int64),
            missing_child=np.full(n, -1, dtype=np.int64),
            gain=np.zeros(n),
            dist=np.array([e["counts"] for e in nodes], dtype=np.int64),
        )
        for i, e in enumerate(nodes):
            if e["kind"] == "leaf":
                continue
            ch = e["children"]
            if ch != list(range(ch[0], ch[0] + len(ch))):
                raise ValueError(f"node {i}: children must be consecutive ids")
            t.attribute[i] = e["attribute"]
            t.threshold[i] = e.get("threshold", np.nan)
            t.n_branches[i] = len(ch)
            t.first_child[i] = ch[0]
            t.missing_child[i] = e["missing"]
            t.gain[i] = e["gain"]
        return t


@dataclass
class TreeBuildContext:
    train_size: int
    total_attrs: int
    mode: SubspaceMode = STATIC
    min_leaf: int = 1
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    max_depth: int | None = None
    k_override: int | None = None

    def __post_init__(self):
        if self.train_size < 1 or self.total_attrs < 1:
            raise ValueError("train_size and total_attrs must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@numba.njit(cache=True, nogil=True)
def _grow(cols, y, sample, features, n_values, n_classes, mode, cap,
          sub_kind, divisor, train_size, min_leaf, max_depth, k_override, rng):
    n = sample.size
    work = sample.copy()
    tmp = np.empty(n, dtype=np.int64)
    m = features.size

    attr = List.empty_list(numba.int64)
    thr = List.empty_list(numba.float64)
    nbr = List.empty_list(numba.int64)
    first = List.empty_list(numba.int64)
    miss = List.empty_list(numba.int64)
    gains = List.empty_list(numba.float64)
    dist = List.empty_list(numba.int64)  # n_classes entries per node

    attr.append(-1)
    thr.append(np.nan)
    nbr.append(0)
    first.append(-1)
    miss.append(-1)
    gains.append(0.0)
    for _ in range(n_classes):
        dist.append(0)

    evaluations = 0
    n_internal = 0
    n_leaves = 0
    stack = [(0, n, 0, 0)]
    counts = np.zeros(n_classes, dtype=np.int64)
    while len(stack) > 0:
        s, e, depth, nid = stack.pop()
        counts[:] = 0
        for j in range(s, e):
            counts[y[work[j]]] += 1
        nonzero = 0
        for c in range(n_classes):
            dist[nid * n_classes + c] = counts[c]
            if counts[c] > 0:
                nonzero += 1
        size = e - s
        if nonzero <= 1 or size <= min_leaf or (max_depth >= 0 and depth >= max_depth):
            n_leaves += 1
            continue
        if k_override > 0:
            k = min(k_override, m)
        else:
            k = _subspace_size(m, train_size, size, sub_kind, divisor)
        attrs = features[rng.permutation(m)[:k]]
        a, t, g, ev = node_search(cols, y, work[s:e], attrs, n_values, n_classes, mode, cap, rng, True)
        evaluations += ev
        if a < 0:
            n_leaves += 1
            continue

        nb = 2 if n_values[a] == 0 else n_values[a]
        col = cols[a]
        branch = np.empty(size, dtype=np.int64)
        sizes = np.zeros(nb, dtype=np.int64)
        for j in range(size):
            v = col[work[s + j]]
            if np.isnan(v):
                branch[j] = -1
            else:
                if n_values[a] == 0:
                    b = 0 if v <= t else 1
                else:
                    b = int(v)
                branch[j] = b
                sizes[b] += 1
        mc = 0
        for b in range(1, nb):
            if sizes[b] > sizes[mc]:
                mc = b
        for j in range(size):
            if branch[j] < 0:
                branch[j] = mc
                sizes[mc] += 1
        offs = np.empty(nb + 1, dtype=np.int64)
        offs[0] = 0
        for b in range(nb):
            offs[b + 1] = offs[b] + sizes[b]
        fill = offs[:nb].copy()
        for j in range(size):
            b = branch[j]
            tmp[s + fill[b]] = work[s + j]
            fill[b] += 1
        for j in range(size):
            work[s + j] = tmp[s + j]

        f = len(attr)
        for b in range(nb):
            attr.append(-1)
            thr.append(np.nan)
            nbr.append(0)
            first.append(-1)
            miss.append(-1)
            gains.append(0.0)
            for c in range(n_classes):
                dist.append(0)
        attr[nid] = a
        thr[nid] = t
        nbr[nid] = nb
        first[nid] = f
        miss[nid] = mc
        gains[nid] = g
        n_internal += 1
        for b in range(nb - 1, -1, -1):
            cs = s + offs[b]
            ce = s + offs[b + 1]
            if ce == cs:
                # empty branch: leaf carrying the parent's distribution
                for c in range(n_classes):
                    dist[(f + b) * n_classes + c] = counts[c]
                n_leaves += 1
            else:
                stack.append((cs, ce, depth + 1, f + b))

    nn = len(attr)
    o_attr = np.empty(nn, dtype=np.int64)
    o_thr = np.empty(nn, dtype=np.float64)
    o_nbr = np.empty(nn, dtype=np.int64)
    o_first = np.empty(nn, dtype=np.int64)
    o_miss = np.empty(nn, dtype=np.int64)
    o_gain = np.empty(nn, dtype=np.float64)
    o_dist = np.empty((nn, n_classes), dtype=np.int64)
    for i in range(nn):
        o_attr[i] = attr[i]
        o_thr[i] = thr[i]
        o_nbr[i] = nbr[i]
        o_first[i] = first[i]
        o_miss[i] = miss[i]
        o_gain[i] = gains[i]
        for c in range(n_classes):
            o_dist[i, c] = dist[i * n_classes + c]
    return o_attr, o_thr, o_nbr, o_first, o_miss, o_gain, o_dist, evaluations, n_internal, n_leaves


def build_tree(
    data: Columns,
    indices,
    ctx: TreeBuildContext,
    split_mode: CandidateMode,
    counters: Counters | None = None,
    features=None,
) -> Tree:
    """Grow one tree over ``indices`` (repeats allowed), depth first.

    At each node: stop if pure, if it holds ``min_leaf`` records or fewer, or
    at ``max_depth``; otherwise draw ``k`` attributes without replacement,
    search them for the best split and recurse into each branch. Branches
    that receive no records become leaves with the parent's distribution.

    ``features`` lists the non-class attribute indices (default: every column
    but the last). All random draws come from ``ctx.rng`` in pre-order.
    """
    idx = np.ascontiguousarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot build a tree from an empty sample")
    if features is None:
        features = np.arange(len(data.n_values) - 1)
    features = np.ascontiguousarray(features, dtype=np.int64)
    out = _grow(
        data.cols, data.y, idx, features, data.n_values_arr, data.n_classes,
        split_mode.code, split_mode.cap, ctx.mode.code, ctx.mode.divisor, ctx.train_size,
        ctx.min_leaf, -1 if ctx.max_depth is None else ctx.max_depth,
        0 if ctx.k_override is None else ctx.k_override, ctx.rng,
    )
    if counters is not None:
        counters.split_evaluations += int(out[7])
        counters.nodes += int(out[8])
        counters.leaves += int(out[9])
    return Tree(*out[:7])


@numba.njit(cache=True, nogil=True)
def _route(attr, thr, nbr, first, miss, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while attr[node] >= 0:
            v = X[r, attr[node]]
            if np.isnan(v):
                b = miss[node]
            elif np.isnan(thr[node]):
                b = int(v)
                if b < 0 or b >= nbr[node] or b != v:
                    b = miss[node]
            else:
                b = 0 if v <= thr[node] else 1
            node = first[node] + b
        out[r] = node
    return out


def leaf_ids(tree: Tree, X) -> np.ndarray:
    """Node id of the leaf reached by every row of ``X``."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    return _route(tree.attribute, tree.threshold, tree.n_branches, tree.first_child, tree.missing_child, X)


def predict_rows(tree: Tree, X) -> np.ndarray:
    return tree.majority[leaf_ids(tree, X)]


def predict_record(tree: Tree, row):
    """Class id and leaf class counts for one record.

    A missing value, or a categorical value with no branch, follows the
    node's stored missing-value branch.
    """
    leaf = int(leaf_ids(tree, np.asarray(row, dtype=np.float64)[None, :])[0])
    return int(tree.majority[leaf]), tree.dist[leaf]


def warmup():
    """Compile the split and growth kernels so later timings exclude JIT."""
    from . import split

    split.warmup()
    vals = np.array([[0.0, 0.0, 0], [1.0, 1.0, 1], [np.nan, 1.0, 0], [2.0, 0.0, 1]])
    cols = Columns(vals, vals[:, 2].astype(np.int64), [0, 2, 2], 2)
    ctx = TreeBuildContext(4, 2, drs(2), rng=np.random.default_rng(0))
    t = build_tree(cols, np.arange(4), ctx, CandidateMode("lsps"))
    leaf_ids(t, vals)
