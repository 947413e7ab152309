import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geri._rng import sub_seed
from geri.graph import InfoNetwork, build_hetero, from_edges
from geri.sgns import (
    Embeddings,
    TrainConfig,
    apply_pair_update,
    build_noise,
    exact_objective,
    init_embeddings,
    pair_gradients,
    pair_loss,
    sgd_step,
    train,
)
from geri.walks import WalkConfig, generate_training_pairs, pairs_per_walk, preprocess_bias, simulate_walks

from conftest import random_hetero


def six_node_net():
    info = InfoNetwork.from_lists(4, [(0, 1), (1, 2), (2, 3)], [(0, 0, 1.0), (1, 0, 1.0), (2, 1, 1.0), (3, 1, 1.0)])
    return build_hetero(info)


def test_config_validation():
    for bad in ({"dim": 0}, {"negatives": 0}, {"lr": 0}, {"lambda1": -1}, {"workers": 0}, {"walk_starts": "x"}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_init_moments_and_determinism():
    assert init_embeddings(0, 4, 0).shape == (0, 4)
    X = init_embeddings(10_000, 64, 3)
    assert abs(X.mean()) < 0.01 and abs(X.var() - 1) < 0.02
    assert init_embeddings(50, 8, 1).tobytes() == init_embeddings(50, 8, 1).tobytes()


def test_pair_loss_at_zero():
    z = np.zeros(4)
    assert pair_loss(z, z, np.zeros((5, 4))) == pytest.approx(6 * math.log(2), abs=1e-12)


def test_pair_loss_saturates():
    c = np.array([1.0, 0, 0])
    ctx = np.array([30.0, 0, 0])
    negs = np.array([[-30.0, 0, 0]] * 5)
    assert pair_loss(c, ctx, negs) < 1e-9


def test_pair_loss_scalar_oracle(rng):
    c, ctx, negs = rng.normal(size=3), rng.normal(size=3), rng.normal(size=(4, 3))

    def log_sig(x):
        return -math.log1p(math.exp(-x))

    expect = -log_sig(sum(a * b for a, b in zip(ctx, c)))
    for n in negs:
        expect -= log_sig(-sum(a * b for a, b in zip(n, c)))
    assert pair_loss(c, ctx, negs) == pytest.approx(expect, abs=1e-12)


def test_pair_loss_nonnegative_and_finite(rng):
    for _ in range(200):
        scale = rng.choice([0.1, 1, 10, 100])
        v = rng.normal(size=(7, 5)) * scale
        loss = pair_loss(v[0], v[1], v[2:])
        assert np.isfinite(loss) and loss >= 0


def test_gradients_finite_differences(rng):
    h = 1e-5
    for _ in range(20):
        d, k = int(rng.integers(1, 9)), int(rng.integers(1, 6))
        c, ctx, negs = rng.normal(size=d), rng.normal(size=d), rng.normal(size=(k, d))
        gc, gx, gn = pair_gradients(c, ctx, negs)
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            num = (pair_loss(c + e, ctx, negs) - pair_loss(c - e, ctx, negs)) / (2 * h)
            assert num == pytest.approx(gc[i], rel=1e-5, abs=1e-9)
            num = (pair_loss(c, ctx + e, negs) - pair_loss(c, ctx - e, negs)) / (2 * h)
            assert num == pytest.approx(gx[i], rel=1e-5, abs=1e-9)


def test_kernel_matches_gradient_step(rng):
    for _ in range(50):
        d, k = int(rng.integers(1, 9)), int(rng.integers(1, 6))
        W = rng.normal(size=(k + 2 + 3, d))
        center, context = 0, 1
        negs = np.arange(2, 2 + k)
        gc, gx, gn = pair_gradients(W[center], W[context], W[negs])
        lr = 0.05
        expect = W.copy()
        expect[center] -= lr * gc
        expect[context] -= lr * gx
        expect[negs] -= lr * gn
        apply_pair_update(W, W, center, context, negs, k, lr, np.empty(d), np.empty(d), np.empty(k + 1))
        np.testing.assert_allclose(W, expect, rtol=1e-12, atol=1e-14)


def test_kernel_sums_repeated_rows(rng):
    # a self-pair and a repeated negative take the sum of their gradient terms
    d = 4
    W = rng.normal(size=(4, d))
    negs = np.array([2, 2, -1])
    gc, gx, gn = pair_gradients(W[1], W[1], W[[2, 2]])
    expect = W.copy()
    expect[1] -= 0.1 * (gc + gx)
    expect[2] -= 0.1 * gn.sum(axis=0)
    apply_pair_update(W, W, 1, 1, negs, 3, 0.1, np.empty(d), np.empty(d), np.empty(4))
    np.testing.assert_allclose(W, expect, rtol=1e-12)


def test_zero_fixture_is_stationary():
    net = from_edges(3, 0, [0, 1], [1, 2], [1.0, 1.0])
    emb = Embeddings(np.zeros((3, 4)), 3)
    sgd_step(emb, (0, 1), build_noise(net), TrainConfig(dim=4, negatives=1), 0.1, np.random.default_rng(0))
    assert not emb.vectors.any()


def test_update_locality(rng):
    net = random_hetero(rng, n_targets=20, n_words=6, edge_prob=0.4)
    noise = build_noise(net)
    cfg = TrainConfig(dim=8, negatives=3)
    for _ in range(50):
        W = rng.normal(size=(net.n_nodes, 8))
        before = W.copy()
        emb = Embeddings(W, net.target_count)
        center, context = rng.choice(net.n_nodes, 2, replace=False)
        touched = sgd_step(emb, (center, context), noise, cfg, 0.05, rng)
        changed = np.flatnonzero((W != before).any(axis=1))
        assert set(changed) <= set(touched)
        assert len(touched) <= 2 + cfg.negatives


def test_lambda1_zero_freezes_bridge_centers():
    net = from_edges(2, 1, [0, 1], [2, 2], [1.0, 1.0])
    W = np.random.default_rng(0).normal(size=(3, 4))
    before = W.copy()
    emb = Embeddings(W, 2)
    sgd_step(emb, (2, 0), build_noise(net), TrainConfig(dim=4, negatives=2, lambda1=0.0), 0.5, np.random.default_rng(1))
    np.testing.assert_array_equal(W, before)


def test_lambda1_one_matches_target_centers(rng):
    # same rows, once with the center counted as a bridge and once as a target
    net = random_hetero(rng, n_targets=10, n_words=4, edge_prob=0.5)
    noise = build_noise(net)
    W = rng.normal(size=(net.n_nodes, 6))
    center = net.n_nodes - 1
    as_bridge = Embeddings(W.copy(), net.target_count)
    as_target = Embeddings(W.copy(), net.n_nodes)
    for emb in (as_bridge, as_target):
        sgd_step(emb, (center, 0), noise, TrainConfig(dim=6, lambda1=1.0), 0.05, np.random.default_rng(5))
    np.testing.assert_array_equal(as_bridge.vectors, as_target.vectors)
    half = Embeddings(W.copy(), net.target_count)
    sgd_step(half, (center, 0), noise, TrainConfig(dim=6, lambda1=0.5), 0.05, np.random.default_rng(5))
    assert not np.array_equal(half.vectors, as_target.vectors)


def test_noise_distribution(rng):
    net = random_hetero(rng, n_targets=14, n_words=6, edge_prob=0.4)
    net = from_edges(net.target_count, net.bridge_count, *net.edge_list())
    assert net.n_nodes == 20 and (net.degree() > 0).all()
    noise = build_noise(net)
    w = net.degree() ** 0.75
    np.testing.assert_allclose(noise.probabilities(), w / w.sum(), atol=1e-12)
    # 10**7 draws keep the 1% band beyond 3 sigma for every node of this fixture
    draw_rng = np.random.default_rng(0)
    counts = sum(np.bincount(noise.sample_many(draw_rng, 10**6), minlength=20) for _ in range(10))
    rel = counts / 1e7 / (w / w.sum()) - 1
    assert np.abs(rel).max() < 0.01


def test_noise_skips_isolated_nodes():
    net = from_edges(4, 0, [0], [1], [1.0])
    assert set(build_noise(net).sample_many(np.random.default_rng(0), 1000)) == {0, 1}


def test_zero_passes_return_init():
    net = six_node_net()
    init = init_embeddings(net.n_nodes, 8, 0)
    wcfg = WalkConfig(walks_per_node=0)
    emb = train(net, preprocess_bias(net, wcfg), wcfg, TrainConfig(dim=8), init=init.copy())
    np.testing.assert_array_equal(emb.vectors, init)


def test_single_edge_learns_the_pair():
    # window 1 keeps each node the other's only context
    net = from_edges(2, 0, [0], [1], [1.0])
    wcfg = WalkConfig(walk_length=20, walks_per_node=200, window=1)
    emb = train(net, preprocess_bias(net, wcfg), wcfg, TrainConfig(dim=2, seed=3))
    a, b = emb.vectors.astype(np.float64)
    assert 1 / (1 + math.exp(-a @ b)) > 0.9


def test_training_is_deterministic():
    net = six_node_net()
    wcfg = WalkConfig(walk_length=10, walks_per_node=5, window=3)
    bias = preprocess_bias(net, wcfg)
    a = train(net, bias, wcfg, TrainConfig(dim=16, seed=2))
    b = train(net, bias, wcfg, TrainConfig(dim=16, seed=2))
    c = train(net, bias, wcfg, TrainConfig(dim=16, seed=3))
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert a.vectors.tobytes() != c.vectors.tobytes()
    assert a.stats["pairs"] == b.stats["pairs"] > 0


def test_walk_start_sets():
    net = six_node_net()
    wcfg = WalkConfig(walk_length=10, walks_per_node=2, window=2)
    bias = preprocess_bias(net, wcfg)
    every = train(net, bias, wcfg, TrainConfig(dim=4))
    targets = train(net, bias, wcfg, TrainConfig(dim=4, walk_starts="targets"))
    per_walk = pairs_per_walk(10, 2)
    assert every.stats["pairs"] == 6 * 2 * per_walk
    assert targets.stats["pairs"] == 4 * 2 * per_walk


def test_parallel_and_two_matrix_run(rng):
    net = random_hetero(rng, n_targets=30, n_words=8, edge_prob=0.2)
    wcfg = WalkConfig(walk_length=20, walks_per_node=3, window=3)
    bias = preprocess_bias(net, wcfg)
    par = train(net, bias, wcfg, TrainConfig(dim=8, workers=3))
    assert np.isfinite(par.vectors).all() and par.stats["pairs"] > 0
    two = train(net, bias, wcfg, TrainConfig(dim=8, two_matrix=True))
    assert two.context is not None and two.context.any()
    assert np.isfinite(two.vectors).all()


def test_exact_objective_basics(rng):
    emb = Embeddings(np.ones((2, 3)), 2)
    assert exact_objective(emb, [(0, 1)], 1.0) == pytest.approx(math.log(0.5))
    for _ in range(20):
        emb = Embeddings(rng.normal(size=(5, 3)), 3)
        pairs = rng.integers(5, size=(10, 2))
        assert exact_objective(emb, pairs, 0.7) <= 0
    with pytest.raises(ValueError):
        exact_objective(Embeddings(np.zeros((1001, 2)), 1001), [(0, 1)], 1.0)


def test_exact_objective_lambda_weights_bridge_terms():
    X = np.random.default_rng(0).normal(size=(3, 2))
    t_only = exact_objective(Embeddings(X, 2), [(0, 1)], 0.0)
    both = exact_objective(Embeddings(X, 2), [(0, 1), (2, 0)], 0.0)
    assert t_only == both


def _fixed_order_objectives(lr, epochs=10, dim=128, seed=0):
    net = six_node_net()
    bias = preprocess_bias(net, WalkConfig())
    walks = simulate_walks(bias, range(net.n_nodes), 10, seed=1)
    pairs = [p for w in walks for p in generate_training_pairs(w, 2)]
    emb = Embeddings(init_embeddings(net.n_nodes, dim, seed).astype(np.float64), net.target_count)
    noise, cfg = build_noise(net), TrainConfig(dim=dim)
    out = [exact_objective(emb, pairs, 1.0)]
    for ep in range(epochs):
        rng = np.random.default_rng(ep)
        for pair in pairs:
            sgd_step(emb, pair, noise, cfg, lr, rng)
        out.append(exact_objective(emb, pairs, 1.0))
    return np.array(out)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**16))
def test_objective_trend_default_lr(seed):
    assert (np.diff(_fixed_order_objectives(0.025, seed=seed)) >= 0).all()


@pytest.mark.xfail(
    strict=True,
    reason="the sampled loss never sees the self-score inside the exact partition function; "
    "at small steps norm drift can lower the exact objective",
)
def test_objective_trend_small_lr():
    assert (np.diff(_fixed_order_objectives(0.005)) >= 0).all()


def test_init_seed_is_a_sub_seed():
    net = six_node_net()
    wcfg = WalkConfig(walks_per_node=0)
    emb = train(net, preprocess_bias(net, wcfg), wcfg, TrainConfig(dim=4, seed=7))
    np.testing.assert_array_equal(emb.vectors, init_embeddings(net.n_nodes, 4, sub_seed(7, "init")))
