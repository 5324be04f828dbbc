import json
import math

import numpy as np
import pytest

from dstlab import montecarlo as MC
from dstlab import moments as M
from dstlab.asymptotics import c10
from dstlab.trees import measure, random_tree


def _sim(params, b, n, trials, seed=0, **kw):
    return MC.simulate(MC.SimConfig(tuple(params), b, n, trials, seed, **kw))


def test_identical_configs_give_identical_summaries():
    a = _sim(("ipl", "leaves", "wpl"), 1, 40, 500, seed=9)
    b = _sim(("ipl", "leaves", "wpl"), 1, 40, 500, seed=9)
    assert a.to_json() == b.to_json()
    assert a.histogram_csv("ipl") == b.histogram_csv("ipl")
    c = _sim(("ipl",), 1, 40, 500, seed=10)
    assert c.mean("ipl") != a.mean("ipl")


def test_chunked_and_threaded_runs_merge_exactly():
    params = ("kpl", "npl", "leaves", "wpl")
    one = _sim(params, 2, 30, 700, seed=4, chunk=700)
    many = _sim(params, 2, 30, 700, seed=4, chunk=64)
    threaded = MC.simulate(MC.SimConfig(params, 2, 30, 700, 4, chunk=64), threads=3)
    for p in params:
        assert one.stats[p] == many.stats[p] == threaded.stats[p]
    assert np.array_equal(one.occupancy, many.occupancy)


def test_single_key():
    s = _sim(("ipl", "ppl", "dpl", "leaves", "wpl"), 1, 1, 50)
    for p in ("ipl", "ppl", "dpl", "wpl"):
        assert s.mean(p) == 0 and s.variance(p) == 0
    assert s.mean("leaves") == 1 and s.variance("leaves") == 0


@pytest.mark.parametrize("b", [1, 2, 3])
def test_forest_matches_scalar_trees(b):
    # lockstep arrays and the pointer-based builder read the same key bits
    params = ("kpl", "npl", "leaves", "nodes", "wpl")
    if b == 1:
        params = params + ("ipl", "ppl", "dpl")
    trials = np.arange(25)
    forest = MC.build_forest(60, b, 11, trials)
    vals = MC.forest_values(forest, params, m=1)
    occ = MC.occupancy_counts(forest)
    for t in trials:
        rep = measure(random_tree(60, b, 11, int(t)), powers=(1,))
        assert vals["kpl"][t] == rep.kpl and vals["npl"][t] == rep.npl
        assert vals["leaves"][t] == rep.leaf_count and vals["nodes"][t] == rep.node_count
        assert abs(vals["wpl"][t] - rep.wpl_toll[1]) <= 1e-9 * max(1.0, rep.wpl_toll[1])
        assert [int(x) for x in occ[t]] == [rep.occupancy.get(j, 0) for j in range(1, b + 1)]
        if b == 1:
            assert vals["ipl"][t] == rep.ipl and vals["ppl"][t] == rep.ppl
            assert vals["dpl"][t] == rep.dpl[1]


def test_internal_path_length_mean_at_256():
    s = _sim(("ipl",), 1, 256, 100_000, seed=1)
    mu = M.mean_series("ipl", 1, 256).as_float("mu")[256]
    assert abs(s.mean("ipl") - mu) <= 4 * s.stderr("ipl")
    var = M.variance_series("ipl", 1, 256).as_float("var")[256]
    assert abs(s.variance("ipl") / var - 1) <= 0.03


@pytest.mark.parametrize("param,b", [("kpl", 2), ("npl", 2), ("ppl", 1), ("leaves", 1), ("dpl", 1),
                                     ("wpl", 1)])
def test_means_match_recurrence(param, b):
    n = 100
    s = _sim((param,), b, n, 20_000, seed=3)
    mu = M.mean_series(param, b, n).as_float("mu")[n]
    assert abs(s.mean(param) - mu) <= 4 * s.stderr(param)


def test_skewness_estimator_against_exact_law():
    law = M.pmf_oracle("dpl", 1, 14)
    mu = law.mean()
    m2 = sum(p * (x - mu) ** 2 for x, p in law.as_dict().items())
    m3 = sum(p * (x - mu) ** 3 for x, p in law.as_dict().items())
    exact = float(m3) / float(m2) ** 1.5
    s = _sim(("dpl",), 1, 14, 200_000, seed=5)
    assert abs(s.stats["dpl"].skewness - exact) <= 4 * math.sqrt(6 / 200_000)


@pytest.fixture(scope="module")
def dpl50():
    return _sim(("dpl",), 1, 50, 200_000, seed=2)


@pytest.mark.xfail(strict=True, reason="skewness at n = 50 is about 0.29 and decays slowly")
def test_differential_skewness_literal(dpl50):
    assert abs(dpl50.stats["dpl"].skewness) <= 0.2


def test_differential_skewness_decays(dpl50):
    s50 = dpl50.stats["dpl"].skewness
    s400 = _sim(("dpl",), 1, 400, 40_000, seed=2).stats["dpl"].skewness
    assert 0 < s400 < s50 < 0.35
    hist = dpl50.stats["dpl"].hist
    mode = max(hist, key=hist.get)
    assert abs(mode - dpl50.mean("dpl")) <= 0.5 * math.sqrt(dpl50.variance("dpl"))


def test_bucket_node_count_mean():
    s = _sim(("nodes",), 2, 2 ** 13, 400, seed=3, chunk=100)
    se = s.stderr("nodes")
    assert abs(s.mean("nodes") - c10(2).value * 2 ** 13) <= 3 * se + 2 ** 13 * 7e-5


def test_occupancy():
    assert MC.occupancy_study(1, 50, 20) == {1: 1.0}
    occ = MC.occupancy_study(2, 2 ** 11, 200, seed=1)
    assert abs(occ[2] - 0.425) <= 0.01
    assert abs(occ[1] + 2 * occ[2] - 1) <= 1e-12
    with pytest.raises(ValueError):
        MC.occupancy_study(2, 0, 10)


def test_config_validation_and_output():
    with pytest.raises(ValueError):
        MC.SimConfig(("ipl",), 2, 10, 5)
    with pytest.raises(ValueError):
        MC.SimConfig(("ipl",), 1, 10, 0)
    with pytest.raises(ValueError):
        MC.SimConfig(("height",), 1, 10, 5)
    s = _sim(("ipl",), 1, 8, 100, hist_width=2.0)
    d = json.loads(s.to_json())
    assert d["trials"] == 100 and set(d["params"]) == {"ipl"}
    rows = s.histogram_csv("ipl").splitlines()
    assert rows[0] == "value,count"
    assert sum(int(r.split(",")[1]) for r in rows[1:]) == 100
    assert all(float(r.split(",")[0]) % 2 == 0 for r in rows[1:])
