import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geri.evaluation import (
    MULTI_CLASS,
    MULTI_LABEL,
    LabelSet,
    SplitSpec,
    evaluate,
    fit_logreg_ovr,
    l2_normalize,
    logreg_objective,
    micro_macro_f1,
    parse_labels,
    predict,
    train_test_split,
)


def brute_force_f1(pred, truth, n_labels):
    """Per-label confusion counts by explicit enumeration."""
    tps, fps, fns = [], [], []
    for k in range(n_labels):
        tp = fp = fn = 0
        for p, t in zip(pred, truth):
            if k in p and k in t:
                tp += 1
            elif k in p:
                fp += 1
            elif k in t:
                fn += 1
        tps.append(tp), fps.append(fp), fns.append(fn)

    def f1(tp, fp, fn):
        return 0.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)

    micro = f1(sum(tps), sum(fps), sum(fns))
    macro = sum(f1(*c) for c in zip(tps, fps, fns)) / n_labels
    return micro, macro


def test_l2_normalize():
    X = l2_normalize([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(X, [[0.6, 0.8], [0.0, 0.0]])
    row = np.random.default_rng(0).normal(size=(1, 128))
    assert abs(np.linalg.norm(l2_normalize(row)) - 1) < 1e-12


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=1, max_size=10))
def test_l2_normalize_idempotent(rows):
    once = l2_normalize(rows)
    np.testing.assert_allclose(l2_normalize(once), once, atol=1e-12)


def test_separable_fit():
    X = np.array([[0.0, 1.0], [0.2, 0.9], [1.0, 0.0], [0.9, 0.1]])
    labels = LabelSet.from_classes([0, 0, 1, 1])
    model = fit_logreg_ovr(X, labels)
    pred = predict(model, X, MULTI_CLASS)
    assert [min(s) for s in pred] == [0, 0, 1, 1]


def test_identical_features_predict_prior():
    X = np.ones((20, 3))
    classes = [0] * 5 + [1] * 15
    model = fit_logreg_ovr(X, LabelSet.from_classes(classes))
    np.testing.assert_allclose(model.scores(X[:1])[0], [0.25, 0.75], atol=1e-3)


def test_optimizer_traces_decrease():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n, d, L = int(rng.integers(10, 40)), int(rng.integers(1, 6)), int(rng.integers(2, 4))
        X = rng.normal(size=(n, d))
        classes = rng.integers(L, size=n)
        classes[:L] = np.arange(L)
        model = fit_logreg_ovr(X, LabelSet.from_classes(classes), C=float(rng.choice([0.1, 1, 100])))
        for trace in model.traces:
            assert all(b <= a + 1e-9 * max(1, abs(a)) for a, b in zip(trace, trace[1:]))


def test_final_objective_not_above_zero_vector():
    rng = np.random.default_rng(2)
    for _ in range(20):
        X = rng.normal(size=(30, 4))
        y = rng.random(30) < 0.4
        y[:2] = [True, False]
        model = fit_logreg_ovr(X, y[:, None], C=100.0)
        w = np.concatenate([model.coef[0], model.intercept])
        value, grad = logreg_objective(w, X, y.astype(float), 100.0)
        assert value <= logreg_objective(np.zeros(5), X, y.astype(float), 100.0)[0]
        assert np.abs(grad).max() < 1e-4


def test_logreg_gradient_finite_differences():
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(15, 3)), (rng.random(15) < 0.5).astype(float)
    w = rng.normal(size=4)
    g = logreg_objective(w, X, y, 10.0)[1]
    for i in range(4):
        e = np.zeros(4)
        e[i] = 1e-6
        num = (logreg_objective(w + e, X, y, 10.0)[0] - logreg_objective(w - e, X, y, 10.0)[0]) / 2e-6
        assert num == pytest.approx(g[i], rel=1e-6, abs=1e-8)


def test_missing_positive_label_predicts_prior():
    X = np.random.default_rng(0).normal(size=(6, 2))
    Y = np.zeros((6, 2), dtype=bool)
    Y[:, 0] = True
    with pytest.warns(UserWarning, match="label 1"):
        model = fit_logreg_ovr(X, Y)
    assert model.scores(X)[:, 1].max() < 1e-6


def test_predict_rules():
    assert predict(np.array([[0.2, 0.9, 0.9]]), None, MULTI_CLASS) == [frozenset([1])]
    assert predict(np.array([[0.1, 0.5, 0.4, 0.2]]), None, MULTI_LABEL, [2]) == [frozenset([1, 2])]
    assert predict(np.full((3, 1), 0.5), None, MULTI_CLASS) == [frozenset([0])] * 3
    assert predict(np.array([[0.1, 0.6, 0.7]]), None, MULTI_LABEL, threshold=0.5) == [frozenset([1, 2])]
    with pytest.raises(ValueError, match="threshold"):
        predict(np.array([[0.1, 0.5]]), None, MULTI_LABEL)


def test_f1_examples():
    t = [frozenset([0]), frozenset([1])]
    assert micro_macro_f1(t, t) == (1.0, 1.0)
    assert micro_macro_f1([frozenset([1]), frozenset([0])], t) == (0.0, 0.0)
    micro, macro = micro_macro_f1(
        [frozenset([0]), frozenset([1]), frozenset([1])], [frozenset([0]), frozenset([0]), frozenset([1])]
    )
    assert micro == pytest.approx(2 / 3) and macro == pytest.approx(2 / 3)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_f1_matches_brute_force(seed, multilabel):
    rng = np.random.default_rng(seed)
    n, L = int(rng.integers(1, 30)), int(rng.integers(1, 6))
    if multilabel:
        pred = [frozenset(np.flatnonzero(rng.random(L) < 0.4).tolist()) for _ in range(n)]
        truth = [frozenset(np.flatnonzero(rng.random(L) < 0.4).tolist()) for _ in range(n)]
    else:
        pred = [frozenset([int(rng.integers(L))]) for _ in range(n)]
        truth = [frozenset([int(rng.integers(L))]) for _ in range(n)]
    assert micro_macro_f1(pred, truth, L) == brute_force_f1(pred, truth, L)
    perm = rng.permutation(n)
    relabel = rng.permutation(L)
    pred2 = [frozenset(int(relabel[k]) for k in pred[i]) for i in perm]
    truth2 = [frozenset(int(relabel[k]) for k in truth[i]) for i in perm]
    micro, macro = micro_macro_f1(pred, truth, L)
    micro2, macro2 = micro_macro_f1(pred2, truth2, L)
    assert micro == micro2 and macro == pytest.approx(macro2, abs=1e-15)


def test_stratified_split_halves_each_class():
    classes = np.repeat(np.arange(7), [10, 11, 20, 3, 4, 5, 7])
    labels = LabelSet.from_classes(classes)
    splits = set()
    for seed in range(10):
        tr, te = train_test_split(labels, 0.5, np.random.default_rng(seed))
        assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == len(classes)
        for c in range(7):
            a, b = np.sum(classes[tr] == c), np.sum(classes[te] == c)
            assert abs(a - b) <= 1
        splits.add(tuple(tr))
    assert len(splits) == 10


def test_singleton_class_goes_to_training():
    labels = LabelSet.from_classes([0, 0, 0, 0, 1])
    with pytest.warns(UserWarning, match="single member"):
        tr, te = train_test_split(labels, 0.5, np.random.default_rng(0))
    assert 4 in tr


def test_uniform_split():
    labels = LabelSet.from_classes([0] * 10 + [1] * 10)
    tr, te = train_test_split(labels, 0.3, np.random.default_rng(0), stratified=False)
    assert len(tr) == 6 and len(te) == 14


def test_evaluate_one_hot_is_perfect():
    classes = np.arange(60) % 4
    report = evaluate(np.eye(4)[classes], LabelSet.from_classes(classes), SplitSpec(repeats=3))
    assert report.mean_micro == 1.0 and report.mean_macro == 1.0
    assert len(report.to_tsv().splitlines()) == 5
    assert report.summary() == "micro=1.000000 macro=1.000000"


def test_evaluate_is_deterministic():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 5))
    labels = LabelSet.from_classes(rng.integers(3, size=40))
    a = evaluate(X, labels, SplitSpec(repeats=1, seed=4))
    b = evaluate(X, labels, SplitSpec(repeats=1, seed=4))
    assert a.to_tsv() == b.to_tsv()
    assert all(0 <= v <= 1 for v in a.micro + a.macro)


def test_evaluate_multilabel():
    rng = np.random.default_rng(0)
    Y = rng.random((50, 3)) < 0.4
    Y[Y.sum(axis=1) == 0, 0] = True
    labels = LabelSet(np.arange(50), [frozenset(np.flatnonzero(r).tolist()) for r in Y], 3, MULTI_LABEL)
    report = evaluate(Y.astype(float), labels, SplitSpec(repeats=2))
    assert report.mean_micro > 0.9


def test_parse_labels(tmp_path):
    p = tmp_path / "labels.txt"
    p.write_text("0 cs\n1 bio\n2 cs bio\n# comment\n", encoding="utf-8")
    labels = parse_labels(p)
    assert labels.mode == MULTI_LABEL and labels.names == ["bio", "cs"]
    assert labels.labels == [frozenset([1]), frozenset([0]), frozenset([0, 1])]
    p.write_text("3 10\n1 2\n", encoding="utf-8")
    labels = parse_labels(p)
    assert labels.mode == MULTI_CLASS and list(labels.nodes) == [1, 3] and labels.names == ["2", "10"]
