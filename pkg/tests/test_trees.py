import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dstlab.trees import (
    FIG_KEYS,
    PROFILE_EXAMPLE,
    BucketTree,
    EmptyTreeError,
    Key,
    KeyExhaustedError,
    build,
    measure,
    nested_profile,
    occupancy_fractions,
    perfect_tree_keys,
    random_tree,
    read_key_file,
)


def _bits(key):
    return "".join(str(key.bit(i)) for i in range(len(key)))


def test_nine_key_tree_structure():
    t = build(FIG_KEYS)
    r = t.root
    assert _bits(r.keys[0]) == "010111"
    assert _bits(r.left.keys[0]) == "011011"
    assert _bits(r.right.keys[0]) == "101011"
    assert _bits(r.left.left.keys[0]) == "000100"
    assert _bits(r.left.right.keys[0]) == "010011"
    assert _bits(r.left.right.right.keys[0]) == "011110"
    assert _bits(r.right.left.keys[0]) == "100001"
    assert _bits(r.right.right.keys[0]) == "111110"
    assert _bits(r.right.right.left.keys[0]) == "110111"
    assert r.right.right.left.parent is r.right.right


def test_nine_key_tree_measurements():
    rep = measure(build(FIG_KEYS))
    assert rep.ipl == 16
    assert rep.leaf_count == 4
    assert rep.depth_profile == [1, 2, 4, 2]


def test_nine_keys_in_buckets_of_two():
    rep = measure(build(FIG_KEYS, b=2))
    assert rep.kpl == 10
    assert rep.npl == 8
    assert rep.ipl is None and rep.ppl is None


def test_first_insertion():
    t = BucketTree().insert(Key("0"))
    rep = measure(t)
    assert rep.depth_profile == [1]
    assert (rep.ipl, rep.ppl, rep.dpl[1], rep.leaf_count) == (0, 0, 0, 1)


def test_profile_of_small_example():
    assert nested_profile(PROFILE_EXAMPLE) == [1, 2, 3, 2, 3]


def test_finite_key_exhaustion():
    with pytest.raises(KeyExhaustedError):
        build(["01"] * 4)


def test_duplicates_descend_further():
    rep = measure(build(["0110", "0110", "0110"]))
    assert rep.depth_profile == [1, 1, 1]


def test_perfect_tree_has_zero_imbalance():
    for levels in (1, 2, 3, 4):
        rep = measure(build(perfect_tree_keys(levels)), powers=(1, 2))
        assert rep.node_count == 2 ** levels - 1
        assert rep.dpl == {1: 0, 2: 0}


def test_occupancy():
    rep = measure(build(["00", "11"], b=2))
    assert rep.node_count == 1 and rep.occupancy == {1: 0, 2: 1}
    assert occupancy_fractions(measure(random_tree(30, 1, 4))) == {1: 1.0}
    with pytest.raises(EmptyTreeError):
        occupancy_fractions(measure(BucketTree(2)))


def test_wpl_uses_level_order_labels():
    # labels 1..9 in level order; depth d contributes log(label)^m * d
    rep = measure(build(FIG_KEYS), powers=(1,))
    depths = [0, 1, 1, 2, 2, 2, 2, 3, 3]
    want = sum(math.log(j) * d for j, d in enumerate(depths, start=1))
    assert rep.wpl[1] == pytest.approx(want, rel=1e-14)


def test_key_file_and_json(tmp_path):
    path = tmp_path / "keys.txt"
    path.write_text("\n".join(FIG_KEYS) + "\n\n")
    keys = read_key_file(path)
    assert len(keys) == 9
    rep = measure(build(keys))
    d = json.loads(rep.to_json())
    assert d["ipl"] == 16 and d["depth_profile"] == [1, 2, 4, 2]


def test_stream_keys_are_reproducible():
    a, b = Key.from_stream(7, 3, 11), Key.from_stream(7, 3, 11)
    assert [a.bit(i) for i in range(200)] == [b.bit(i) for i in range(200)]
    c = Key.from_stream(7, 4, 11)
    assert [a.bit(i) for i in range(200)] != [c.bit(i) for i in range(200)]


@given(st.integers(0, 120), st.integers(1, 4), st.integers(0, 10 ** 6))
def test_shape_invariants(n, b, seed):
    rep = measure(random_tree(n, b, seed), powers=(1, 2))
    assert rep.n == n
    assert sum(rep.depth_profile) == rep.node_count
    assert sum(j * c for j, c in rep.occupancy.items()) == n
    assert rep.kpl >= rep.npl
    if b == 1:
        assert rep.ipl == rep.kpl == rep.npl
        assert rep.ipl == sum(d * c for d, c in enumerate(rep.depth_profile))
        # one key per node: leaves plus internal nodes account for every key
        assert rep.node_count == n and rep.occupancy == {1: n}
        assert rep.leaf_count <= n


@given(st.integers(1, 80), st.integers(1, 3), st.integers(0, 10 ** 6))
def test_children_only_below_full_nodes(n, b, seed):
    t = random_tree(n, b, seed)
    for v in t.nodes():
        assert 1 <= len(v.keys) <= b
        if v.children:
            assert len(v.keys) == b
