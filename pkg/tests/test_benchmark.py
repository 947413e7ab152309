import math

import numpy as np
import pytest

from geri.benchmark import erdos_renyi_edges, format_timings, loglog_slope, run_benchmark, synthetic_network
from geri.graph import build_hetero
from geri.sgns import TrainConfig
from geri.walks import WalkConfig


def test_er_edge_count():
    src, dst = erdos_renyi_edges(1000, 10, np.random.default_rng(0))
    assert abs(len(src) - 5000) <= 3 * math.sqrt(5000)
    assert (src < dst).all()
    assert len(set(zip(src.tolist(), dst.tolist()))) == len(src)


def test_er_pair_decoding_covers_all_pairs():
    # with p = 1 every pair must come out exactly once
    src, dst = erdos_renyi_edges(30, 29, np.random.default_rng(1))
    assert sorted(zip(src.tolist(), dst.tolist())) == [(i, j) for i in range(30) for j in range(i + 1, 30)]


def test_synthetic_text():
    net = synthetic_network(500, seed=2)
    assert len(net.vocabulary) == 100
    per_node = np.bincount(net.node_text_node, minlength=500)
    assert (per_node == 5).all() and (net.node_text_value == 1).all()
    h = build_hetero(net)
    assert h.target_count == 500


def test_small_benchmark():
    wcfg = WalkConfig(walk_length=20, walks_per_node=2)
    rows = run_benchmark([100, 1000], repeats=2, wcfg=wcfg, tcfg=TrainConfig(dim=16))
    assert [r[0] for r in rows] == [100, 1000]
    assert all(len(r[2]) == 2 for r in rows)
    assert rows[1][1] > rows[0][1]
    assert format_timings(rows).splitlines()[0] == "n\tseconds\trepeats"


def test_guards():
    with pytest.raises(ValueError):
        run_benchmark([5], repeats=1)
    with pytest.raises(MemoryError, match="cap"):
        run_benchmark([10_000], repeats=1, max_nodes=1000)


def test_loglog_slope():
    ns = [1e3, 1e4, 1e5]
    assert loglog_slope(ns, [2 * n for n in ns]) == pytest.approx(1.0)
    assert loglog_slope(ns, [n**1.5 for n in ns]) == pytest.approx(1.5)
