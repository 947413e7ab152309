"""Skip-gram with negative sampling over biased walks.

A single embedding matrix serves both the center and the context role, and
pairs whose center is a bridge node are trained with the step size scaled by
``lambda1``.  The hot loop (walk, window, update) runs inside one numba
kernel; the numpy functions here (``pair_loss``, ``pair_gradients``,
``exact_objective``) are the slow reference versions used to check it.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange
from scipy.special import logsumexp

from geri._rng import mix_seed, sub_seed
from geri.alias import AliasTable, alias_draw
from geri.graph import HeteroNetwork
from geri.walks import BiasTables, WalkConfig, pairs_per_walk, walk_into

log = logging.getLogger(__name__)

CLAMP = 30.0
MAX_EXACT_NODES = 1000
NEG_RETRIES = 10


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    negatives: int = 5
    lr: float = 0.025
    min_lr_ratio: float = 1e-4
    lambda1: float = 1.0
    seed: int = 0
    workers: int = 1
    # "all" walks from targets and bridges, "targets" from targets only
    walk_starts: str = "all"
    two_matrix: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not self.lambda1 >= 0:
            raise ValueError("lambda1 must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.walk_starts not in ("all", "targets"):
            raise ValueError(f"walk_starts must be 'all' or 'targets', got {self.walk_starts!r}")


@dataclass
class Embeddings:
    """One row per heterogeneous node: targets first, then bridges."""

    vectors: np.ndarray
    target_count: int
    bridge_words: tuple[str, ...] = ()
    context: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def targets(self) -> np.ndarray:
        return self.vectors[: self.target_count]

    @property
    def bridges(self) -> np.ndarray:
        return self.vectors[self.target_count :]

    def context_matrix(self) -> np.ndarray:
        return self.vectors if self.context is None else self.context


def init_embeddings(n: int, d: int, rng=None, dtype=np.float32) -> np.ndarray:
    """i.i.d. standard normal ``n x d`` matrix."""
    rng = np.random.default_rng(rng)
    return rng.standard_normal((n, d)).astype(dtype, copy=False)


def log_sigmoid(x):
    x = np.clip(x, -CLAMP, CLAMP)
    return -np.logaddexp(0.0, -x)


def sigmoid(x):
    x = np.clip(x, -CLAMP, CLAMP)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def pair_loss(center, context, negatives) -> float:
    """``-log s(context.center) - sum_j log s(-neg_j.center)``."""
    center = np.asarray(center, dtype=np.float64)
    negatives = np.asarray(negatives, dtype=np.float64).reshape(-1, center.shape[0])
    pos = log_sigmoid(np.dot(context, center))
    neg = log_sigmoid(-(negatives @ center)).sum()
    return float(-(pos + neg))


def pair_gradients(center, context, negatives):
    """Gradients of :func:`pair_loss` w.r.t. center, context and each negative."""
    center = np.asarray(center, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    negatives = np.asarray(negatives, dtype=np.float64).reshape(-1, center.shape[0])
    gp = sigmoid(np.dot(context, center)) - 1.0
    gn = sigmoid(negatives @ center)
    g_center = gp * context + gn @ negatives
    return g_center, gp * center, gn[:, None] * center[None, :]


def build_noise(net: HeteroNetwork, power: float = 0.75) -> AliasTable:
    """Negative-sampling distribution proportional to ``degree ** power``.

    Degree counts neighbors, so isolated nodes are never drawn.
    """
    deg = net.degree().astype(np.float64)
    return AliasTable.from_weights(deg**power, np.arange(net.n_nodes))


@njit(cache=True, fastmath=True, inline="always")
def _dot(W, a, C, b):
    d = W.shape[1]
    acc = W[a, 0] * C[b, 0]
    for i in range(1, d):
        acc += W[a, i] * C[b, i]
    return acc


@njit(cache=True, inline="always")
def _sig(x):
    if x > 30.0:
        x = 30.0
    elif x < -30.0:
        x = -30.0
    return 1.0 / (1.0 + np.exp(-x))


@njit(cache=True, fastmath=True)
def apply_pair_update(W, C, center, context, negs, n_neg, lr, grad, old, coef):
    """In-place descent step on ``pair_loss`` for one (center, context) pair.

    All gradients are taken at the pre-update values, so a self-pair or a
    repeated negative receives the sum of its gradient contributions.
    Entries of ``negs`` equal to -1 are skipped.  ``coef`` is scratch space
    of length ``n_neg + 1`` in the matrix dtype.
    """
    d = W.shape[1]
    coef[0] = lr * (1.0 - _sig(_dot(W, center, C, context)))
    for k in range(n_neg):
        if negs[k] >= 0:
            coef[k + 1] = -lr * _sig(_dot(W, center, C, negs[k]))
    gp = coef[0]
    for i in range(d):
        old[i] = W[center, i]
        grad[i] = gp * C[context, i]
    for k in range(n_neg):
        n = negs[k]
        if n >= 0:
            g = coef[k + 1]
            for i in range(d):
                grad[i] += g * C[n, i]
    for i in range(d):
        C[context, i] += gp * old[i]
    for k in range(n_neg):
        n = negs[k]
        if n >= 0:
            g = coef[k + 1]
            for i in range(d):
                C[n, i] += g * old[i]
    for i in range(d):
        W[center, i] += grad[i]


def sgd_step(emb: Embeddings, pair, noise: AliasTable, cfg: TrainConfig, current_lr: float, rng) -> np.ndarray:
    """Apply one negative-sampling update for ``pair``; return touched rows."""
    center, context = int(pair[0]), int(pair[1])
    lr = current_lr * (cfg.lambda1 if center >= emb.target_count else 1.0)
    negs = np.full(cfg.negatives, -1, dtype=np.int64)
    for k in range(cfg.negatives):
        for _ in range(NEG_RETRIES):
            cand = int(noise.sample(rng))
            if cand != center and cand != context:
                negs[k] = cand
                break
    touched = np.unique(np.concatenate([[center, context], negs[negs >= 0]]))
    if lr == 0:
        return touched
    W = emb.vectors
    C = emb.context_matrix()
    d = W.shape[1]
    apply_pair_update(
        W, C, center, context, negs, cfg.negatives, lr,
        np.empty(d, W.dtype), np.empty(d, W.dtype), np.empty(cfg.negatives + 1, W.dtype),
    )
    return touched


@njit(cache=True, fastmath=True)
def _train_pass(
    order, iteration, seed, tables, n_targets, p, q, r, precomputed,
    W, C, noise_prob, noise_alias, n_neg, window, length,
    lr0, min_ratio, lam1, done0, scale, total, stats,
):
    d = W.shape[1]
    walk = np.empty(length, dtype=np.int64)
    negs = np.empty(n_neg, dtype=np.int64)
    grad = np.empty(d, dtype=W.dtype)
    old = np.empty(d, dtype=W.dtype)
    coef = np.empty(n_neg + 1, dtype=W.dtype)
    state = np.zeros(1, dtype=np.uint64)
    n_noise = noise_prob.shape[0]
    done = 0
    for s in order:
        state[0] = mix_seed(seed, iteration, s)
        n = walk_into(walk, s, length, tables, n_targets, p, q, r, precomputed, state)
        if n == 1:
            stats[0] += 1
        elif n < length:
            stats[1] += 1
        for i in range(n):
            c = walk[i]
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j == i:
                    continue
                o = walk[j]
                frac = (done0 + done * scale) / total
                lr = lr0 * max(min_ratio, 1.0 - frac)
                done += 1
                if c >= n_targets:
                    lr *= lam1
                if lr == 0.0:
                    continue
                for k in range(n_neg):
                    negs[k] = -1
                    for _ in range(10):
                        cand = alias_draw(noise_prob, noise_alias, 0, n_noise, state)
                        if cand != c and cand != o:
                            negs[k] = cand
                            break
                apply_pair_update(W, C, c, o, negs, n_neg, lr, grad, old, coef)
    stats[2] += done
    return done


@njit(cache=True, parallel=True)
def _train_pass_parallel(
    order, workers, iteration, seed, tables, n_targets, p, q, r, precomputed,
    W, C, noise_prob, noise_alias, n_neg, window, length,
    lr0, min_ratio, lam1, done0, total, stats,
):
    # Hogwild: workers share W and C without locks.
    done = np.zeros(workers, dtype=np.int64)
    for w in prange(workers):
        done[w] = _train_pass(
            order[w::workers], iteration, seed, tables, n_targets, p, q, r, precomputed,
            W, C, noise_prob, noise_alias, n_neg, window, length,
            lr0, min_ratio, lam1, done0, workers, total, stats[w],
        )
    return done.sum()


def walk_start_nodes(net: HeteroNetwork, which: str) -> np.ndarray:
    n = net.target_count if which == "targets" else net.n_nodes
    return np.arange(n, dtype=np.int64)


def train(net: HeteroNetwork, bias: BiasTables, wcfg: WalkConfig, tcfg: TrainConfig, init=None) -> Embeddings:
    """Learn embeddings for every node of ``net``.

    Runs ``wcfg.walks_per_node`` passes; each pass shuffles the start nodes,
    walks once from each and trains on the window pairs as they are produced.
    The learning rate decays linearly to ``lr * min_lr_ratio`` over the
    expected number of pairs.
    """
    seed = tcfg.seed
    if init is None:
        init = init_embeddings(net.n_nodes, tcfg.dim, sub_seed(seed, "init"))
    W = np.ascontiguousarray(init, dtype=np.float32)
    if W.shape != (net.n_nodes, tcfg.dim):
        raise ValueError(f"init has shape {W.shape}, expected {(net.n_nodes, tcfg.dim)}")
    C = np.zeros_like(W) if tcfg.two_matrix else W
    emb = Embeddings(W, net.target_count, net.bridge_words, C if tcfg.two_matrix else None)

    starts = walk_start_nodes(net, tcfg.walk_starts)
    passes = wcfg.walks_per_node
    total = max(1, passes * len(starts) * pairs_per_walk(wcfg.walk_length, wcfg.window))
    noise = build_noise(net)
    if noise.empty or passes == 0 or len(starts) == 0:
        emb.stats = {"pairs": 0, "isolated_walks": 0, "dead_end_walks": 0, "seconds": 0.0}
        return emb

    shuffle_rng = np.random.default_rng(sub_seed(seed, "shuffle"))
    walk_seed = np.uint64(sub_seed(seed, "walks"))
    tables = bias.kernel_args()
    args = (net.target_count, bias.p, bias.q, bias.r, bias.precomputed)
    workers = tcfg.workers
    if workers > 1:
        numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))
    stats = np.zeros((workers, 3), dtype=np.int64)
    done = 0
    t0 = time.perf_counter()
    for it in range(passes):
        order = shuffle_rng.permutation(starts)
        common = (
            W, C, noise.prob, noise.alias, tcfg.negatives, wcfg.window, wcfg.walk_length,
            tcfg.lr, tcfg.min_lr_ratio, tcfg.lambda1, float(done),
        )
        if workers == 1:
            done += _train_pass(order, it, walk_seed, tables, *args, *common, 1, float(total), stats[0])
        else:
            done += _train_pass_parallel(order, workers, it, walk_seed, tables, *args, *common, float(total), stats)
    elapsed = time.perf_counter() - t0
    s = stats.sum(axis=0)
    emb.stats = {
        "pairs": int(s[2]),
        "isolated_walks": int(s[0]),
        "dead_end_walks": int(s[1]),
        "seconds": elapsed,
    }
    log.info(
        "trained on %d pairs in %.2fs (%d walks from isolated nodes, %d cut short by dead ends)",
        s[2], elapsed, s[0], s[1],
    )
    return emb


def exact_objective(emb: Embeddings, pairs, lambda1: float) -> float:
    """Full-softmax log-likelihood of ``pairs``; for tiny networks only.

    Each term is ``log softmax(context | center)`` with the partition
    function summed over every node, bridge-centered terms weighted by
    ``lambda1``.
    """
    X = np.asarray(emb.vectors, dtype=np.float64)
    n = X.shape[0]
    if n > MAX_EXACT_NODES:
        raise ValueError(f"exact objective refused for {n} nodes (limit {MAX_EXACT_NODES})")
    if len(pairs) == 0:
        return 0.0
    Cm = np.asarray(emb.context_matrix(), dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64)
    scores = X @ Cm.T
    logp = scores - logsumexp(scores, axis=1, keepdims=True)
    terms = logp[pairs[:, 0], pairs[:, 1]]
    weight = np.where(pairs[:, 0] >= emb.target_count, lambda1, 1.0)
    return float(np.sum(weight * terms))
