"""Biased second-order random walks over a heterogeneous network.

Given the previous node ``t`` and the current node ``v``, the unnormalized
weight of moving on to a neighbor ``x`` of ``v`` is ``e_vx`` times a factor
that depends on the node kinds:

* target -> bridge: factor 0 for going straight back to ``t``, 1 otherwise.
* target -> target and bridge -> target: ``p`` to return to ``t``, 1 if ``x``
  is also a neighbor of ``t``, else ``q`` for a target ``x`` and ``r`` for a
  bridge ``x``.

The first step of a walk has no predecessor and is proportional to ``e_vx``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from geri._rng import make_state, mix_seed, next_float
from geri.alias import AliasTable, alias_draw, build_alias_into
from geri.graph import HeteroNetwork, neighbors

log = logging.getLogger(__name__)

# Packed second-step tables hold sum_v deg(v)^2 entries (12 bytes each).
DEFAULT_MAX_TABLE_ENTRIES = 30_000_000


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    r: float = 1.0
    walk_length: int = 150
    walks_per_node: int = 10
    window: int = 10
    seed: int = 0
    # "precompute" | "rejection" | "auto"
    bias_mode: str = "auto"
    max_table_entries: int = DEFAULT_MAX_TABLE_ENTRIES

    def __post_init__(self):
        for name in ("p", "q", "r"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number, got {v}")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.walks_per_node < 0:
            raise ValueError("walks_per_node must be >= 0")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.bias_mode not in ("precompute", "rejection", "auto"):
            raise ValueError(f"unknown bias_mode {self.bias_mode!r}")


def transition_weight(t, v: int, x: int, net: HeteroNetwork, cfg: WalkConfig) -> float:
    """Unnormalized weight of stepping ``v -> x`` after arriving from ``t``.

    ``t=None`` marks the first step of a walk.
    """
    row = dict(neighbors(net, v))
    if x not in row:
        raise ValueError(f"{x} is not a neighbor of {v}")
    e_vx = row[x]
    if t is None:
        return e_vx
    t_row = dict(neighbors(net, t))
    if v not in t_row:
        raise ValueError(f"({t}, {v}) is not an edge")
    if not net.is_bridge(t) and net.is_bridge(v):
        return 0.0 if x == t else e_vx
    if x == t:
        return cfg.p * e_vx
    if x in t_row:
        return e_vx
    return (cfg.r if net.is_bridge(x) else cfg.q) * e_vx


@njit(cache=True, inline="always")
def _adjacent(indptr, indices, t, x):
    lo = indptr[t]
    hi = indptr[t + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[t + 1] and indices[lo] == x


@njit(cache=True, inline="always")
def _factor(indptr, indices, n_targets, t, v, x, p, q, r):
    if t < n_targets and v >= n_targets:
        return 0.0 if x == t else 1.0
    if x == t:
        return p
    if _adjacent(indptr, indices, t, x):
        return 1.0
    return r if x >= n_targets else q


@njit(cache=True)
def _fill_first(indptr, weights, prob, alias):
    for v in range(indptr.shape[0] - 1):
        a = indptr[v]
        build_alias_into(weights[a : indptr[v + 1]], prob, alias, a)


@njit(cache=True)
def _fill_second(indptr, indices, weights, n_targets, p, q, r, sec_ptr, sec_len, sec_prob, sec_alias):
    n = indptr.shape[0] - 1
    max_deg = 0
    for v in range(n):
        max_deg = max(max_deg, indptr[v + 1] - indptr[v])
    buf = np.empty(max_deg, dtype=np.float64)
    for t in range(n):
        for e in range(indptr[t], indptr[t + 1]):
            v = indices[e]
            a = indptr[v]
            deg = indptr[v + 1] - a
            for j in range(deg):
                x = indices[a + j]
                buf[j] = weights[a + j] * _factor(indptr, indices, n_targets, t, v, x, p, q, r)
            if build_alias_into(buf[:deg], sec_prob, sec_alias, sec_ptr[e]):
                sec_len[e] = deg
            else:
                sec_len[e] = 0


@dataclass(frozen=True)
class BiasTables:
    """Alias tables for the first step (per node) and later steps (per edge).

    First-step tables live at the node's CSR slice.  In ``precompute`` mode
    the table for directed edge ``e = (t -> v)`` starts at ``sec_ptr[e]`` and
    covers the neighbors of ``v``; ``sec_len[e] == 0`` marks a dead end.  In
    ``rejection`` mode the second-step arrays are empty and moves are drawn
    from the first-step table of ``v`` and thinned by the bias factor.
    """

    net: HeteroNetwork
    p: float
    q: float
    r: float
    precomputed: bool
    first_prob: np.ndarray
    first_alias: np.ndarray
    sec_ptr: np.ndarray
    sec_len: np.ndarray
    sec_prob: np.ndarray
    sec_alias: np.ndarray

    def kernel_args(self):
        net = self.net
        return (
            net.indptr,
            net.indices,
            self.first_prob,
            self.first_alias,
            self.sec_ptr,
            self.sec_len,
            self.sec_prob,
            self.sec_alias,
        )

    def first_step(self, v: int) -> AliasTable:
        a, b = self.net.indptr[v], self.net.indptr[v + 1]
        return AliasTable(self.first_prob[a:b], self.first_alias[a:b], self.net.indices[a:b])

    def _edge_id(self, t: int, v: int) -> int:
        a, b = self.net.indptr[t], self.net.indptr[t + 1]
        j = a + np.searchsorted(self.net.indices[a:b], v)
        if j >= b or self.net.indices[j] != v:
            raise ValueError(f"({t}, {v}) is not an edge")
        return int(j)

    def second_step(self, t: int, v: int) -> AliasTable:
        e = self._edge_id(t, v)
        a, b = self.net.indptr[v], self.net.indptr[v + 1]
        outcomes = self.net.indices[a:b]
        if not self.precomputed:
            indptr, indices = self.net.indptr, self.net.indices
            w = np.array(
                [
                    self.net.weights[a + j]
                    * _factor(indptr, indices, self.net.target_count, t, v, x, self.p, self.q, self.r)
                    for j, x in enumerate(outcomes)
                ]
            )
            return AliasTable.from_weights(w, outcomes)
        n = self.sec_len[e]
        if n == 0:
            return AliasTable(np.empty(0), np.empty(0, dtype=np.int64), outcomes[:0])
        off = self.sec_ptr[e]
        return AliasTable(self.sec_prob[off : off + n], self.sec_alias[off : off + n], outcomes)


def second_step_entries(net: HeteroNetwork) -> int:
    deg = net.degree()
    return int(np.dot(deg, deg))


def preprocess_bias(net: HeteroNetwork, cfg: WalkConfig) -> BiasTables:
    nnz = len(net.indices)
    first_prob = np.zeros(nnz)
    first_alias = np.zeros(nnz, dtype=np.int32)
    _fill_first(net.indptr, net.weights, first_prob, first_alias)

    entries = second_step_entries(net)
    if cfg.bias_mode == "auto":
        precompute = entries <= cfg.max_table_entries
        if not precompute:
            log.info("second-step tables need %d entries; sampling by rejection", entries)
    else:
        precompute = cfg.bias_mode == "precompute"

    if precompute:
        deg = net.degree()
        sec_ptr = np.zeros(nnz + 1, dtype=np.int64)
        np.cumsum(deg[net.indices], out=sec_ptr[1:])
        sec_len = np.zeros(nnz, dtype=np.int32)
        sec_prob = np.zeros(entries)
        sec_alias = np.zeros(entries, dtype=np.int32)
        _fill_second(
            net.indptr, net.indices, net.weights, net.target_count,
            float(cfg.p), float(cfg.q), float(cfg.r),
            sec_ptr, sec_len, sec_prob, sec_alias,
        )
    else:
        sec_ptr = np.zeros(1, dtype=np.int64)
        sec_len = np.zeros(0, dtype=np.int32)
        sec_prob = np.zeros(0)
        sec_alias = np.zeros(0, dtype=np.int32)
    return BiasTables(
        net, float(cfg.p), float(cfg.q), float(cfg.r), precompute,
        first_prob, first_alias, sec_ptr, sec_len, sec_prob, sec_alias,
    )


@njit(cache=True, inline="always")
def _next_edge(e, t, tables, n_targets, p, q, r, fmax, precomputed, state):
    """CSR index of the move after arriving over edge ``e`` from ``t``; -1 on a dead end."""
    indptr, indices, first_prob, first_alias, sec_ptr, sec_len, sec_prob, sec_alias = tables
    v = indices[e]
    a = indptr[v]
    deg = indptr[v + 1] - a
    if precomputed:
        k = sec_len[e]
        if k == 0:
            return -1
        return a + alias_draw(sec_prob, sec_alias, sec_ptr[e], k, state)
    case2 = t < n_targets and v >= n_targets
    if case2 and deg == 1:
        return -1
    while True:
        j = alias_draw(first_prob, first_alias, a, deg, state)
        f = _factor(indptr, indices, n_targets, t, v, indices[a + j], p, q, r)
        if case2:
            if f > 0.0:
                return a + j
        elif next_float(state) * fmax < f:
            return a + j


@njit(cache=True)
def walk_into(buf, start, length, tables, n_targets, p, q, r, precomputed, state):
    """Write a walk from ``start`` into ``buf``; return its length (<= length).

    Stops early at dead ends.
    """
    indptr, indices, first_prob, first_alias = tables[0], tables[1], tables[2], tables[3]
    buf[0] = start
    if length < 2:
        return 1
    a = indptr[start]
    deg = indptr[start + 1] - a
    if deg == 0:
        return 1
    e = a + alias_draw(first_prob, first_alias, a, deg, state)
    buf[1] = indices[e]
    n = 2
    t = start
    fmax = max(max(p, 1.0), max(q, r))
    while n < length:
        nxt = _next_edge(e, t, tables, n_targets, p, q, r, fmax, precomputed, state)
        if nxt < 0:
            break
        t = indices[e]
        e = nxt
        buf[n] = indices[e]
        n += 1
    return n


@njit(cache=True)
def _draw_steps(e, t, count, tables, n_targets, p, q, r, precomputed, state, out):
    fmax = max(max(p, 1.0), max(q, r))
    indices = tables[1]
    for i in range(count):
        nxt = _next_edge(e, t, tables, n_targets, p, q, r, fmax, precomputed, state)
        out[i] = -1 if nxt < 0 else indices[nxt]


def sample_next_steps(bias: BiasTables, t: int, v: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` independent draws of the node visited after moving ``t -> v``.

    Uses the walk kernel's own step routine; -1 marks a dead end.
    """
    e = bias._edge_id(t, v)
    out = np.empty(count, dtype=np.int64)
    _draw_steps(
        e, t, count, bias.kernel_args(), bias.net.target_count, bias.p, bias.q, bias.r, bias.precomputed,
        make_state(seed, t, v), out,
    )
    return out


@njit(cache=True)
def _simulate(starts, length, tables, n_targets, p, q, r, precomputed, seed, iteration, out, lengths):
    state = np.zeros(1, dtype=np.uint64)
    for i in range(starts.shape[0]):
        state[0] = mix_seed(seed, iteration, starts[i])
        lengths[i] = walk_into(out[i], starts[i], length, tables, n_targets, p, q, r, precomputed, state)


def random_walk(net: HeteroNetwork, bias: BiasTables, start: int, l: int, rng=None) -> np.ndarray:
    """One walk of at most ``l`` nodes starting at ``start``.

    ``rng`` is an integer seed or a numpy Generator (used to draw a seed).
    """
    if not 0 <= start < net.n_nodes:
        raise IndexError(f"start node {start} out of range")
    if rng is None or isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
        seed = int(rng.integers(2**63))
    else:
        seed = int(rng)
    state = make_state(seed, 0, start)
    buf = np.empty(max(l, 1), dtype=np.int64)
    n = walk_into(
        buf, start, l, bias.kernel_args(), net.target_count, bias.p, bias.q, bias.r, bias.precomputed, state
    )
    return buf[:n].copy()


def simulate_walks(bias: BiasTables, starts, length: int, seed: int, iteration: int = 0) -> list[np.ndarray]:
    """Walks for every start node using the same streams as the trainer."""
    starts = np.asarray(starts, dtype=np.int64)
    out = np.empty((len(starts), length), dtype=np.int64)
    lengths = np.empty(len(starts), dtype=np.int64)
    _simulate(
        starts, length, bias.kernel_args(), bias.net.target_count, bias.p, bias.q, bias.r,
        bias.precomputed, np.uint64(seed % 2**64), iteration, out, lengths,
    )
    return [out[i, : lengths[i]] for i in range(len(starts))]


def generate_training_pairs(walk, window: int) -> list[tuple[int, int]]:
    """All (center, context) pairs within ``window`` positions, in walk order."""
    walk = [int(x) for x in walk]
    pairs = []
    n = len(walk)
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i:
                pairs.append((walk[i], walk[j]))
    return pairs


def pairs_per_walk(length: int, window: int) -> int:
    """Number of training pairs produced by a walk of ``length`` nodes."""
    i = np.arange(length)
    return int(np.sum(np.minimum(i, window) + np.minimum(length - 1 - i, window)))


def write_walks(walks, net: HeteroNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for walk in walks:
            fh.write(" ".join(net.node_name(int(v)) for v in walk) + "\n")
