import numpy as np
import pytest

from geri.graph import InfoNetwork, build_hetero, from_edges


def random_info_network(rng, n_targets=None, n_words=None, edge_prob=0.3, text_prob=0.3, edge_text_prob=0.2):
    """Small random network with node and edge text, integer-valued weights."""
    n = n_targets or int(rng.integers(3, 9))
    nw = n_words or int(rng.integers(1, 6))
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                edges.append((i, j, float(rng.integers(1, 4))))
    node_text = [
        (v, k, float(rng.integers(1, 4))) for v in range(n) for k in range(nw) if rng.random() < text_prob
    ]
    edge_text = [
        (i, j, k, float(rng.integers(1, 3))) for i, j, _ in edges for k in range(nw) if rng.random() < edge_text_prob
    ]
    return InfoNetwork.from_lists(n, edges, node_text, edge_text, vocabulary=[f"t{k}" for k in range(nw)])


def random_hetero(rng, **kw):
    return build_hetero(random_info_network(rng, **kw))


@pytest.fixture
def example_info():
    # two targets joined by an edge, node text (0, w0)=2, edge text (0, 1, w1)=1
    return InfoNetwork.from_lists(2, [(0, 1, 1.0)], [(0, 0, 2.0)], [(0, 1, 1, 1.0)], vocabulary=["w0", "w1"])


@pytest.fixture
def case3_net():
    """Targets v=0, x1=1, x2=2; bridges t=3, x3=4.

    Seen from v after arriving from t: x1 is a target adjacent to t (e=1),
    x2 a target away from t (e=2), x3 a bridge away from t (e=1).
    """
    src = [0, 0, 0, 0, 1]
    dst = [1, 2, 3, 4, 3]
    w = [1.0, 2.0, 1.0, 1.0, 1.0]
    return from_edges(3, 2, src, dst, w, bridge_words=["t", "x3"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
