"""Monte Carlo oracle: many random (bucket) DSTs from seeded bit streams, built in lockstep.

Trial t draws its keys from the counter-based stream of (seed, t), exactly the bits
used by trees.Key.from_stream, so any single trial can be rebuilt with trees.random_tree.
"""
from __future__ import annotations

import json
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .trees import random_tree, trial_stream

PARAMS = ("ipl", "kpl", "npl", "ppl", "leaves", "nodes", "dpl", "wpl")
B1_ONLY = ("ipl", "ppl", "dpl")
DEFAULT_CHUNK = 8192


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("DSTLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SimConfig:
    params: tuple = ("ipl",)
    b: int = 1
    n: int = 16
    trials: int = 1000
    seed: int = 0
    m: int = 1
    hist_width: float = 1.0
    chunk: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n < 0 or self.b < 1:
            raise ValueError("need n >= 0 and b >= 1")
        for p in self.params:
            if p not in PARAMS:
                raise ValueError(f"unknown parameter {p!r}")
            if p in B1_ONLY and self.b != 1:
                raise ValueError(f"{p} is only defined for b = 1")


# ---------------------------------------------------------------------------
# lockstep construction


@dataclass
class Forest:
    """Node arrays of T trees; node ids follow creation order, so parents precede children."""

    b: int
    n: int
    count: np.ndarray    # keys per node
    depth: np.ndarray
    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    nodes: np.ndarray    # nodes per tree

    @property
    def exists(self) -> np.ndarray:
        return np.arange(self.count.shape[1])[None, :] < self.nodes[:, None]


@njit(cache=True, nogil=True)
def _grow(block0, b, count, depth, left, right, parent, nodes, overflow):
    """Insert every key of every tree; trees needing bits past the first block are flagged."""
    T, n = block0.shape
    for r in range(T):
        if n == 0:
            continue
        count[r, 0] = 1
        nodes[r] = 1
        for key in range(1, n):
            v = 0
            d = 0
            word = block0[r, key]
            while True:
                if count[r, v] < b:
                    count[r, v] += 1
                    break
                if d >= 64:
                    overflow[r] = True
                    break
                bit = (word >> np.uint64(63 - d)) & np.uint64(1)
                child = right[r, v] if bit else left[r, v]
                if child < 0:
                    c = nodes[r]
                    if bit:
                        right[r, v] = c
                    else:
                        left[r, v] = c
                    count[r, c] = 1
                    depth[r, c] = d + 1
                    parent[r, c] = v
                    nodes[r] += 1
                    break
                v = child
                d += 1
            if overflow[r]:
                break


def _grow_one(tree, b: int, count, depth, left, right, parent, nodes, r):
    """Copy a tree built key by key (any depth) into row r of the forest arrays."""
    count[r], depth[r], left[r], right[r], parent[r] = 0, 0, -1, -1, -1
    ids = {}
    order = []
    stack = [tree.root]
    while stack:
        v = stack.pop()
        if v is None:
            continue
        order.append(v)
        stack.extend([v.right, v.left])
    order.sort(key=lambda v: v.keys[0].index)   # creation order = index of a node's first key
    for i, v in enumerate(order):
        ids[id(v)] = i
    for v in order:
        i = ids[id(v)]
        count[r, i] = len(v.keys)
        depth[r, i] = v.depth
        if v.left is not None:
            left[r, i] = ids[id(v.left)]
        if v.right is not None:
            right[r, i] = ids[id(v.right)]
        if v.parent is not None:
            parent[r, i] = ids[id(v.parent)]
    nodes[r] = len(order)


def build_forest(n: int, b: int, seed: int, trials: np.ndarray) -> Forest:
    """Build every trial's tree from its own key stream; node ids follow creation order."""
    trials = np.asarray(trials, dtype=np.int64)
    T = len(trials)
    width = max(n, 1)
    block0 = np.empty((T, n), dtype=np.uint64)
    for i, t in enumerate(trials):
        block0[i] = trial_stream(seed, int(t)).random_raw(n)
    count = np.zeros((T, width), dtype=np.int32)
    depth = np.zeros((T, width), dtype=np.int32)
    left = np.full((T, width), -1, dtype=np.int32)
    right = np.full((T, width), -1, dtype=np.int32)
    parent = np.full((T, width), -1, dtype=np.int32)
    nodes = np.zeros(T, dtype=np.int32)
    overflow = np.zeros(T, dtype=np.bool_)
    _grow(block0, b, count, depth, left, right, parent, nodes, overflow)
    for r in np.flatnonzero(overflow):
        # a descent past 64 levels: rebuild from the lazily extended keys
        _grow_one(random_tree(n, b, seed, int(trials[r])), b, count, depth, left, right, parent, nodes, r)
    return Forest(b, n, count, depth, left, right, parent, nodes)


def forest_values(forest: Forest, params, m: int = 1) -> dict[str, np.ndarray]:
    """Per-trial parameter values; sizes are subtree key counts."""
    T, width = forest.count.shape
    exists = forest.exists
    out: dict[str, np.ndarray] = {}
    size = forest.count.astype(np.int64)
    rows_all = np.arange(T)
    for v in range(width - 1, 0, -1):
        rows = rows_all[forest.nodes > v]
        if rows.size:
            size[rows, forest.parent[rows, v]] += size[rows, v]
    dep = np.where(exists, forest.depth, 0).astype(np.int64)
    npl = dep.sum(axis=1)
    leaf = exists & (forest.left < 0) & (forest.right < 0)
    for p in params:
        if p in ("ipl", "npl"):
            out[p] = npl.copy()
        elif p == "kpl":
            out[p] = (dep * forest.count).sum(axis=1)
        elif p == "nodes":
            out[p] = forest.nodes.astype(np.int64)
        elif p == "leaves":
            out[p] = leaf.sum(axis=1).astype(np.int64)
        elif p == "ppl":
            has_parent = leaf & (forest.parent >= 0)
            psize = np.take_along_axis(size, np.maximum(forest.parent, 0), axis=1)
            out[p] = np.where(has_parent, psize, 0).sum(axis=1)
        elif p == "dpl":
            ls = np.where(forest.left >= 0, np.take_along_axis(size, np.maximum(forest.left, 0), axis=1), 0)
            rs = np.where(forest.right >= 0, np.take_along_axis(size, np.maximum(forest.right, 0), axis=1), 0)
            out[p] = np.where(exists, np.abs(ls - rs) ** m, 0).sum(axis=1)
        elif p == "wpl":
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(exists, size * np.log(np.maximum(size, 1)) ** m, 0.0)
            out[p] = w.sum(axis=1)
    return out


def occupancy_counts(forest: Forest) -> np.ndarray:
    """(T, b) array: number of nodes holding j keys, j = 1..b."""
    exists = forest.exists
    return np.stack([((forest.count == j) & exists).sum(axis=1) for j in range(1, forest.b + 1)], axis=1)


# ---------------------------------------------------------------------------
# mergeable summaries


@dataclass
class Moments:
    """Exact power sums, so merging chunks in any grouping gives identical results."""

    count: int = 0
    s1: Fraction = Fraction(0)
    s2: Fraction = Fraction(0)
    s3: Fraction = Fraction(0)
    hist: Counter = field(default_factory=Counter)

    @classmethod
    def of(cls, values: np.ndarray, width: float = 1.0) -> "Moments":
        if values.dtype.kind in "iu":
            xs = [int(x) for x in values]
            s1, s2, s3 = sum(xs), sum(x * x for x in xs), sum(x ** 3 for x in xs)
            hist = Counter(xs) if width == 1.0 else Counter(math.floor(x / width) for x in xs)
        else:
            xs = [Fraction(float(x)) for x in values]
            s1, s2, s3 = sum(xs, Fraction(0)), sum((x * x for x in xs), Fraction(0)), \
                sum((x ** 3 for x in xs), Fraction(0))
            hist = Counter(math.floor(float(x) / width) for x in xs)
        return cls(len(xs), Fraction(s1), Fraction(s2), Fraction(s3), hist)

    def merge(self, other: "Moments") -> "Moments":
        return Moments(self.count + other.count, self.s1 + other.s1, self.s2 + other.s2,
                       self.s3 + other.s3, self.hist + other.hist)

    @property
    def mean(self) -> float:
        return float(self.s1 / self.count)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return float((self.s2 - self.s1 ** 2 / self.count) / (self.count - 1))

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count)

    @property
    def skewness(self) -> float:
        n = self.count
        mu = self.s1 / n
        m2 = self.s2 / n - mu ** 2
        if m2 <= 0:
            return 0.0
        m3 = self.s3 / n - 3 * mu * self.s2 / n + 2 * mu ** 3
        return float(m3) / float(m2) ** 1.5


@dataclass
class SimSummary:
    config: SimConfig
    stats: dict = field(default_factory=dict)
    occupancy: np.ndarray | None = None   # summed over trials, index j-1

    def merge(self, other: "SimSummary") -> "SimSummary":
        stats = {p: self.stats[p].merge(other.stats[p]) for p in self.stats}
        occ = None if self.occupancy is None else self.occupancy + other.occupancy
        return SimSummary(self.config, stats, occ)

    def mean(self, p):
        return self.stats[p].mean

    def variance(self, p):
        return self.stats[p].variance

    def stderr(self, p):
        return self.stats[p].stderr

    def as_dict(self) -> dict:
        c = self.config
        out = {"n": c.n, "b": c.b, "trials": c.trials, "seed": c.seed, "m": c.m, "params": {}}
        for p, s in self.stats.items():
            out["params"][p] = {"mean": s.mean, "variance": s.variance, "stderr": s.stderr,
                                "skewness": s.skewness}
        if self.occupancy is not None and c.n:
            out["occupancy_per_key"] = [float(x) / (c.trials * c.n) for x in self.occupancy]
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)

    def histogram_csv(self, p: str) -> str:
        s = self.stats[p]
        width = self.config.hist_width
        rows = ["value,count"]
        for k in sorted(s.hist):
            rows.append(f"{k * width:.12g},{s.hist[k]}")
        return "\n".join(rows) + "\n"


def _run_chunk(config: SimConfig, trials: np.ndarray) -> SimSummary:
    forest = build_forest(config.n, config.b, config.seed, trials)
    vals = forest_values(forest, config.params, config.m)
    stats = {p: Moments.of(vals[p], config.hist_width) for p in config.params}
    occ = occupancy_counts(forest).sum(axis=0).astype(np.int64)
    return SimSummary(config, stats, occ)


def simulate(config: SimConfig, threads: int | None = None) -> SimSummary:
    """Chunks of trials run independently and merge in trial order."""
    threads = thread_count() if threads is None else threads
    idx = np.arange(config.trials)
    chunks = [idx[i:i + config.chunk] for i in range(0, config.trials, config.chunk)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ch: _run_chunk(config, ch), chunks))
    else:
        parts = [_run_chunk(config, ch) for ch in chunks]
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return total


def occupancy_study(b: int, n: int, trials: int, seed: int = 0) -> dict[int, float]:
    """Average number of nodes holding j keys, divided by n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    summary = simulate(SimConfig(("nodes",), b, n, trials, seed, chunk=min(DEFAULT_CHUNK, 256)))
    return {j + 1: float(c) / (trials * n) for j, c in enumerate(summary.occupancy)}
