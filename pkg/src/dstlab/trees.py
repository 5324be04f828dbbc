"""Digital search trees and bucket DSTs built from bit strings, with shape measurements."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

BLOCK_BITS = 64


class KeyExhaustedError(ValueError):
    """A finite key ran out of bits before reaching a free slot."""


class EmptyTreeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# keys


_BLOCK0_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _block0(seed: int, trial: int, index: int) -> int:
    arr = _BLOCK0_CACHE.get((seed, trial))
    if arr is None or index >= len(arr):
        if len(_BLOCK0_CACHE) > 256:
            _BLOCK0_CACHE.clear()
        size = max(64, index + 1, 2 * (0 if arr is None else len(arr)))
        # the stream is prefix-consistent, so regenerating a longer run keeps old values
        arr = trial_stream(seed, trial).random_raw(size)
        _BLOCK0_CACHE[(seed, trial)] = arr
    return int(arr[index])


def trial_stream(seed: int, trial: int) -> np.random.Philox:
    """Counter-based stream whose i-th output is the first bit block of key i."""
    return np.random.Philox(np.random.SeedSequence([seed, trial]))


def extra_block(seed: int, trial: int, key: int, block: int) -> int:
    """Bit block >= 1 of a key, addressable without touching any other state."""
    return int(np.random.Philox(np.random.SeedSequence([seed, trial, key, block])).random_raw(1)[0])


class Key:
    """Either an explicit finite bit string or a seeded infinite stream."""

    __slots__ = ("_bits", "seed", "trial", "index", "_blocks")

    def __init__(self, bits: str | Sequence[int] | None = None, *, seed: int | None = None,
                 trial: int = 0, index: int = 0):
        if (bits is None) == (seed is None):
            raise ValueError("give either bits or seed")
        if bits is not None:
            bits = [int(c) for c in bits]
            if any(c not in (0, 1) for c in bits):
                raise ValueError("bits must be 0/1")
            self._bits = tuple(bits)
        else:
            self._bits = None
        self.seed, self.trial, self.index = seed, trial, index
        self._blocks: dict[int, int] = {}

    @classmethod
    def from_stream(cls, seed: int, trial: int, index: int) -> "Key":
        return cls(seed=seed, trial=trial, index=index)

    @property
    def finite(self) -> bool:
        return self._bits is not None

    def __len__(self):
        if self._bits is None:
            raise TypeError("stream keys are infinite")
        return len(self._bits)

    def _block(self, j: int) -> int:
        if j not in self._blocks:
            if j == 0:
                self._blocks[0] = _block0(self.seed, self.trial, self.index)
            else:
                self._blocks[j] = extra_block(self.seed, self.trial, self.index, j)
        return self._blocks[j]

    def bit(self, i: int) -> int:
        if self._bits is not None:
            if i >= len(self._bits):
                raise KeyExhaustedError(f"key of length {len(self._bits)} has no bit {i}")
            return self._bits[i]
        word = self._block(i // BLOCK_BITS)
        return (word >> (BLOCK_BITS - 1 - i % BLOCK_BITS)) & 1

    def __repr__(self):
        if self._bits is not None:
            return "Key('" + "".join(map(str, self._bits)) + "')"
        return f"Key(seed={self.seed}, trial={self.trial}, index={self.index})"


def read_key_file(path) -> list[Key]:
    """One binary string per line; blank lines are skipped."""
    keys = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                keys.append(Key(line))
    return keys


# ---------------------------------------------------------------------------
# trees


@dataclass
class Node:
    keys: list = field(default_factory=list)
    depth: int = 0
    left: "Node | None" = None
    right: "Node | None" = None
    parent: "Node | None" = None

    @property
    def children(self):
        return [c for c in (self.left, self.right) if c is not None]


class BucketTree:
    """Each node holds up to b keys; a full node passes keys down by their next bit."""

    def __init__(self, b: int = 1):
        if b < 1:
            raise ValueError("bucket capacity must be >= 1")
        self.b = b
        self.root: Node | None = None
        self.size = 0

    def insert(self, key: Key) -> "BucketTree":
        if self.root is None:
            self.root = Node([key], 0)
            self.size = 1
            return self
        node = self.root
        while len(node.keys) == self.b:
            side = "right" if key.bit(node.depth) else "left"
            child = getattr(node, side)
            if child is None:
                setattr(node, side, Node([key], node.depth + 1, parent=node))
                self.size += 1
                return self
            node = child
        node.keys.append(key)
        self.size += 1
        return self

    def extend(self, keys: Iterable[Key]) -> "BucketTree":
        for k in keys:
            self.insert(k)
        return self

    def nodes(self) -> list[Node]:
        """Level-wise, left to right."""
        if self.root is None:
            return []
        out, queue = [], deque([self.root])
        while queue:
            v = queue.popleft()
            out.append(v)
            queue.extend(v.children)
        return out


def build(keys: Iterable[Key | str], b: int = 1) -> BucketTree:
    tree = BucketTree(b)
    for k in keys:
        tree.insert(k if isinstance(k, Key) else Key(k))
    return tree


def random_tree(n: int, b: int = 1, seed: int = 0, trial: int = 0) -> BucketTree:
    return build((Key.from_stream(seed, trial, i) for i in range(n)), b)


# ---------------------------------------------------------------------------
# measurement


@dataclass
class ShapeReport:
    n: int
    b: int
    node_count: int
    ipl: int | None
    kpl: int
    npl: int
    ppl: int | None
    leaf_count: int
    dpl: dict = field(default_factory=dict)
    wpl: dict = field(default_factory=dict)
    wpl_toll: dict = field(default_factory=dict)
    depth_profile: list = field(default_factory=list)
    occupancy: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("dpl", "wpl", "wpl_toll", "occupancy"):
            d[k] = {str(m): v for m, v in d[k].items()}
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)

    def value(self, param: str, m: int = 1):
        """Scalar lookup used by the simulator: ipl, kpl, npl, ppl, leaves, nodes, dpl, wpl."""
        if param in ("dpl",):
            return self.dpl[m]
        if param == "wpl":
            return self.wpl_toll[m]
        if param == "leaves":
            return self.leaf_count
        if param == "nodes":
            return self.node_count
        return getattr(self, param)


def measure(tree: BucketTree, powers: Iterable[int] = (1,)) -> ShapeReport:
    powers = sorted(set(powers))
    order = tree.nodes()
    b = tree.b
    if not order:
        return ShapeReport(0, b, 0, 0 if b == 1 else None, 0, 0, 0 if b == 1 else None, 0,
                           {m: 0 for m in powers} if b == 1 else {}, {m: 0.0 for m in powers},
                           {m: 0.0 for m in powers}, [], {j: 0 for j in range(1, b + 1)})
    # subtree sizes in keys, children before parents
    size: dict[int, int] = {}
    for v in reversed(order):
        size[id(v)] = len(v.keys) + sum(size[id(c)] for c in v.children)

    def sz(v):
        return size[id(v)] if v is not None else 0

    profile: list[int] = []
    occupancy = {j: 0 for j in range(1, b + 1)}
    kpl = npl = leaves = 0
    ppl = 0
    dpl = {m: 0 for m in powers}
    wpl = {m: 0.0 for m in powers}
    wpl_toll = {m: 0.0 for m in powers}
    for label, v in enumerate(order, start=1):
        if v.depth == len(profile):
            profile.append(0)
        profile[v.depth] += 1
        occupancy[len(v.keys)] += 1
        kpl += len(v.keys) * v.depth
        npl += v.depth
        s = sz(v)
        for m in powers:
            wpl[m] += math.log(label) ** m * v.depth
            wpl_toll[m] += s * math.log(s) ** m
        if not v.children:
            leaves += 1
            if v.parent is not None:
                ppl += sz(v.parent)
        if b == 1:
            d = abs(sz(v.left) - sz(v.right))
            for m in powers:
                dpl[m] += d ** m
    return ShapeReport(
        n=tree.size, b=b, node_count=len(order),
        ipl=npl if b == 1 else None, kpl=kpl, npl=npl,
        ppl=ppl if b == 1 else None, leaf_count=leaves,
        dpl=dpl if b == 1 else {}, wpl=wpl, wpl_toll=wpl_toll,
        depth_profile=profile, occupancy=occupancy,
    )


def occupancy_fractions(report: ShapeReport) -> dict[int, float]:
    if report.node_count == 0:
        raise EmptyTreeError("occupancy of an empty tree is undefined")
    return {j: c / report.node_count for j, c in report.occupancy.items()}


# ---------------------------------------------------------------------------
# plain rooted trees given as nested child lists


FIG_KEYS = ("010111", "101011", "100001", "011011", "111110",
            "110111", "010011", "011110", "000100")

# root -> (a, b); a -> (a1 -> a11, a2 -> a21 -> three leaves); b -> b1
PROFILE_EXAMPLE = [[[[]], [[[], [], []]]], [[]]]


def nested_profile(tree: list) -> list[int]:
    """Node count per level of a tree written as nested lists of children."""
    profile, level = [], [tree]
    while level:
        profile.append(len(level))
        level = [c for v in level for c in v]
    return profile


def perfect_tree_keys(levels: int) -> list[str]:
    """Keys filling a perfectly balanced DST with 2^levels - 1 nodes, level by level."""
    keys = []
    for d in range(levels):
        for i in range(2 ** d):
            prefix = format(i, f"0{d}b") if d else ""
            keys.append(prefix.ljust(levels, "0"))
    return keys
