"""Scalability benchmark on Erdos-Renyi graphs with synthetic word bags."""

from __future__ import annotations

import logging
import time
from dataclasses import replace

import numpy as np

from geri._rng import sub_seed
from geri.graph import InfoNetwork, build_hetero
from geri.sgns import TrainConfig, train
from geri.walks import WalkConfig, preprocess_bias

log = logging.getLogger(__name__)

WORDS_PER_NODE = 5
DEFAULT_MAX_NODES = 2_000_000


def erdos_renyi_edges(n: int, degree: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Undirected G(n, p) with ``p = degree / (n - 1)``.

    Draws the edge count from its binomial law, then that many distinct
    vertex pairs uniformly, which yields exactly the G(n, p) distribution.
    """
    rng = np.random.default_rng(rng)
    if n < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    pairs = n * (n - 1) // 2
    p = min(1.0, degree / (n - 1))
    m = int(rng.binomial(pairs, p))
    k = rng.choice(pairs, size=m, replace=False).astype(np.int64)
    # k enumerates pairs (i, j), i > j, row by row: k = i(i-1)/2 + j
    i = ((1 + np.sqrt(1 + 8 * k.astype(np.float64))) // 2).astype(np.int64)
    i -= (i * (i - 1) // 2 > k).astype(np.int64)
    i += ((i + 1) * i // 2 <= k).astype(np.int64)
    j = k - i * (i - 1) // 2
    return j, i


def synthetic_network(n: int, degree: float = 10, seed: int = 0) -> InfoNetwork:
    """ER topology plus ``WORDS_PER_NODE`` distinct uniform words per node.

    The vocabulary has ``max(100, n // 100)`` words; every occurrence has
    weight 1.
    """
    rng = np.random.default_rng(seed)
    src, dst = erdos_renyi_edges(n, degree, rng)
    vocab = max(100, n // 100)
    words = _distinct_words(n, vocab, rng)
    return InfoNetwork(
        n_targets=n,
        edge_src=src,
        edge_dst=dst,
        edge_weight=np.ones(len(src)),
        node_text_node=np.repeat(np.arange(n, dtype=np.int64), WORDS_PER_NODE),
        node_text_word=words.reshape(-1).astype(np.int64),
        node_text_value=np.ones(n * WORDS_PER_NODE),
        edge_text_i=np.empty(0, np.int64),
        edge_text_j=np.empty(0, np.int64),
        edge_text_word=np.empty(0, np.int64),
        edge_text_value=np.empty(0),
        vocabulary=[f"t{k}" for k in range(vocab)],
    )


def _distinct_words(n, vocab, rng):
    # redraw rows until no node repeats a word
    words = rng.integers(vocab, size=(n, WORDS_PER_NODE))
    while True:
        s = np.sort(words, axis=1)
        dup = (np.diff(s, axis=1) == 0).any(axis=1)
        if not dup.any():
            return words
        words[dup] = rng.integers(vocab, size=(int(dup.sum()), WORDS_PER_NODE))


def time_pipeline(net: InfoNetwork, wcfg: WalkConfig, tcfg: TrainConfig) -> float:
    """Seconds spent building the network, the bias tables and training."""
    t0 = time.perf_counter()
    hetero = build_hetero(net)
    bias = preprocess_bias(hetero, wcfg)
    train(hetero, bias, wcfg, tcfg)
    return time.perf_counter() - t0


def warm_up(wcfg: WalkConfig, tcfg: TrainConfig) -> None:
    """Trigger numba compilation so it does not count toward timings."""
    net = synthetic_network(20, 3, seed=1)
    time_pipeline(net, replace(wcfg, walks_per_node=1, walk_length=4), tcfg)


def run_benchmark(
    counts,
    degree: float = 10,
    repeats: int = 10,
    wcfg: WalkConfig | None = None,
    tcfg: TrainConfig | None = None,
    seed: int = 0,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> list[tuple[int, float, list[float]]]:
    """Mean wall-clock time per node count; returns ``(n, mean, samples)`` rows."""
    wcfg = wcfg or WalkConfig()
    tcfg = tcfg or TrainConfig()
    for n in counts:
        if n < 10:
            raise ValueError(f"node count {n} below the minimum of 10")
        if n > max_nodes:
            raise MemoryError(f"node count {n} exceeds the configured cap of {max_nodes} (raise --max-nodes)")
    warm_up(wcfg, tcfg)
    rows = []
    for n in counts:
        samples = []
        for rep in range(repeats):
            net = synthetic_network(n, degree, seed=sub_seed(seed, f"er-{n}-{rep}"))
            rep_tcfg = replace(tcfg, seed=sub_seed(seed, f"train-{n}-{rep}"))
            samples.append(time_pipeline(net, wcfg, rep_tcfg))
            log.info("n=%d repeat %d: %.2fs", n, rep, samples[-1])
        rows.append((n, float(np.mean(samples)), samples))
    return rows


def loglog_slope(ns, seconds) -> float:
    """Least-squares slope of log(seconds) against log(n)."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(seconds, float)), 1)[0])


def format_timings(rows) -> str:
    lines = ["n\tseconds\trepeats"]
    lines += [f"{n}\t{mean:.6f}\t{len(s)}" for n, mean, s in rows]
    return "\n".join(lines) + "\n"
