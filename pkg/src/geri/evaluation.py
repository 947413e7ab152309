"""Node-classification evaluation of embeddings.

Rows are L2-normalized, split (stratified by default) into train and test,
and fed to one binary logistic regression per label.  Scores are Micro- and
Macro-F1 averaged over repeated random splits.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

log = logging.getLogger(__name__)

MULTI_CLASS = "multiclass"
MULTI_LABEL = "multilabel"


@dataclass
class LabelSet:
    """Labels for a subset of target nodes.

    ``nodes[i]`` carries the label ids ``labels[i]``; ids are dense in
    ``0..n_labels-1`` and ``names[k]`` is the original token of label ``k``.
    """

    nodes: np.ndarray
    labels: list[frozenset]
    n_labels: int
    mode: str = MULTI_CLASS
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.nodes) != len(self.labels):
            raise ValueError("nodes and labels differ in length")
        if self.mode not in (MULTI_CLASS, MULTI_LABEL):
            raise ValueError(f"unknown label mode {self.mode!r}")
        if self.mode == MULTI_CLASS and any(len(s) != 1 for s in self.labels):
            raise ValueError("multiclass labels need exactly one label per node")
        for s in self.labels:
            if any(not 0 <= k < self.n_labels for k in s):
                raise ValueError("label id out of range")
        if not self.names:
            self.names = [str(k) for k in range(self.n_labels)]

    @classmethod
    def from_classes(cls, classes, nodes=None) -> "LabelSet":
        classes = np.asarray(classes, dtype=np.int64)
        nodes = np.arange(len(classes)) if nodes is None else np.asarray(nodes)
        n = int(classes.max()) + 1 if len(classes) else 0
        return cls(nodes, [frozenset([int(c)]) for c in classes], n, MULTI_CLASS)

    def __len__(self) -> int:
        return len(self.labels)

    def indicator(self) -> np.ndarray:
        Y = np.zeros((len(self.labels), self.n_labels), dtype=bool)
        for i, s in enumerate(self.labels):
            Y[i, list(s)] = True
        return Y

    def subset(self, idx) -> "LabelSet":
        idx = np.asarray(idx, dtype=np.int64)
        return LabelSet(self.nodes[idx], [self.labels[i] for i in idx], self.n_labels, self.mode, self.names)

    def counts(self) -> np.ndarray:
        return np.array([len(s) for s in self.labels], dtype=np.int64)


def parse_labels(path, mode=None) -> LabelSet:
    """Read ``node label [label ...]`` lines.

    Label tokens are mapped to dense ids in sorted order.  ``mode`` defaults
    to multiclass when every node has exactly one label.
    """
    rows: dict[int, set] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if len(tok) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'node label [label ...]'")
            try:
                node = int(tok[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad node id {tok[0]!r}") from None
            rows.setdefault(node, set()).update(tok[1:])
    names = sorted({lab for labs in rows.values() for lab in labs}, key=_natural_key)
    ids = {name: k for k, name in enumerate(names)}
    nodes = np.array(sorted(rows), dtype=np.int64)
    labels = [frozenset(ids[x] for x in rows[v]) for v in nodes]
    if mode is None:
        mode = MULTI_CLASS if all(len(s) == 1 for s in labels) else MULTI_LABEL
    return LabelSet(nodes, labels, len(names), mode, names)


def _natural_key(s):
    return (0, int(s), "") if s.lstrip("-").isdigit() else (1, 0, s)


def l2_normalize(X) -> np.ndarray:
    """Scale every non-zero row to unit Euclidean norm."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=X.copy(), where=norms > 0)


@dataclass
class OvRModel:
    """One binary logistic model per label: ``scores = sigmoid(X @ coef.T + intercept)``."""

    coef: np.ndarray
    intercept: np.ndarray
    traces: list = field(default_factory=list)

    def scores(self, X) -> np.ndarray:
        return expit(np.asarray(X, dtype=np.float64) @ self.coef.T + self.intercept)


def logreg_objective(w, X, y, C):
    """``(1/C) * ||coef||^2 / 2 + sum log-loss``; the intercept is unpenalized.

    ``w`` packs the coefficients followed by the intercept.  Returns
    (value, gradient).
    """
    coef, b = w[:-1], w[-1]
    z = X @ coef + b
    sign = np.where(y, 1.0, -1.0)
    loss = -np.sum(log_expit(sign * z))
    value = loss + 0.5 * np.dot(coef, coef) / C
    r = expit(z) - y
    grad = np.empty_like(w)
    grad[:-1] = X.T @ r + coef / C
    grad[-1] = r.sum()
    return value, grad


def _fit_binary(X, y, C, max_iter, gtol):
    trace = []
    w0 = np.zeros(X.shape[1] + 1)

    def record(xk):
        trace.append(logreg_objective(xk, X, y, C)[0])

    trace.append(logreg_objective(w0, X, y, C)[0])
    res = minimize(
        logreg_objective, w0, args=(X, y, C), jac=True, method="L-BFGS-B",
        callback=record, options={"maxiter": max_iter, "gtol": gtol, "ftol": 0.0},
    )
    return res.x, trace


def fit_logreg_ovr(X, labels, C: float = 100.0, max_iter: int = 1000, gtol: float = 1e-6) -> OvRModel:
    """Fit one L2-regularized logistic regression per label.

    ``labels`` is a LabelSet aligned with the rows of ``X`` or a boolean
    indicator matrix.  A label without both positive and negative training
    rows gets a constant model predicting its training prior.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = labels.indicator() if isinstance(labels, LabelSet) else np.asarray(labels, dtype=bool)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("features and labels differ in row count")
    if X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    if not C > 0:
        raise ValueError("C must be positive")
    L = Y.shape[1]
    coef = np.zeros((L, X.shape[1]))
    intercept = np.zeros(L)
    traces = []
    for k in range(L):
        y = Y[:, k].astype(np.float64)
        pos = y.sum()
        if pos == 0 or pos == len(y):
            warnings.warn(f"label {k} has {'no' if pos == 0 else 'only'} positive training rows; predicting prior")
            prior = np.clip(pos / len(y), 1e-12, 1 - 1e-12)
            intercept[k] = np.log(prior / (1 - prior))
            traces.append([])
            continue
        w, trace = _fit_binary(X, y, C, max_iter, gtol)
        coef[k], intercept[k] = w[:-1], w[-1]
        traces.append(trace)
    return OvRModel(coef, intercept, traces)


def predict(model: OvRModel, X, mode: str, true_label_counts=None, threshold=None) -> list[frozenset]:
    """Turn per-label scores into label sets.

    Multiclass takes the arg-max (lowest id wins ties).  Multilabel keeps the
    top ``true_label_counts[i]`` labels of row ``i``, or, if ``threshold`` is
    given instead, every label scoring at least that value.
    """
    S = model.scores(X) if isinstance(model, OvRModel) else np.asarray(model, dtype=np.float64)
    if mode == MULTI_CLASS:
        return [frozenset([int(k)]) for k in np.argmax(S, axis=1)]
    if mode != MULTI_LABEL:
        raise ValueError(f"unknown label mode {mode!r}")
    if threshold is not None:
        return [frozenset(int(k) for k in np.flatnonzero(row >= threshold)) for row in S]
    if true_label_counts is None:
        raise ValueError("multilabel prediction needs true_label_counts or an explicit threshold")
    order = np.argsort(-S, axis=1, kind="stable")
    return [frozenset(int(k) for k in order[i, : int(c)]) for i, c in enumerate(true_label_counts)]


def micro_macro_f1(predicted, truth, n_labels: int | None = None) -> tuple[float, float]:
    """Micro-F1 (pooled counts) and Macro-F1 (mean per-label F1).

    A label with no true positives, false positives or false negatives
    contributes an F1 of 0 to the macro average.
    """
    if isinstance(truth, LabelSet):
        n_labels = truth.n_labels if n_labels is None else n_labels
        truth = truth.labels
    if isinstance(predicted, LabelSet):
        predicted = predicted.labels
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth differ in length")
    if n_labels is None:
        n_labels = 1 + max((k for s in list(truth) + list(predicted) for k in s), default=-1)
    P = np.zeros((len(truth), n_labels), dtype=bool)
    T = np.zeros_like(P)
    for i, (p, t) in enumerate(zip(predicted, truth)):
        P[i, list(p)] = True
        T[i, list(t)] = True
    tp = np.sum(P & T, axis=0)
    fp = np.sum(P & ~T, axis=0)
    fn = np.sum(~P & T, axis=0)
    micro = _f1(int(tp.sum()), int(fp.sum()), int(fn.sum()))
    per_label = [_f1(int(a), int(b), int(c)) for a, b, c in zip(tp, fp, fn)]
    macro = sum(per_label) / n_labels if n_labels else 0.0
    return micro, macro


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    repeats: int = 10
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def train_test_split(labels: LabelSet, train_fraction: float, rng, stratified: bool = True):
    """Index arrays (train, test) into ``labels``.

    Stratification uses each node's smallest label id.  Classes with a
    single member go to training.
    """
    rng = np.random.default_rng(rng)
    n = len(labels)
    if not stratified:
        perm = rng.permutation(n)
        k = min(max(int(np.floor(train_fraction * n + 0.5)), 1), n - 1)
        return np.sort(perm[:k]), np.sort(perm[k:])
    strata = np.array([min(s) for s in labels.labels], dtype=np.int64)
    train, test = [], []
    for c in np.unique(strata):
        members = rng.permutation(np.flatnonzero(strata == c))
        if len(members) == 1:
            warnings.warn(f"class {c} has a single member; assigning it to training")
            train.append(members)
            continue
        k = min(max(int(np.floor(train_fraction * len(members) + 0.5)), 1), len(members) - 1)
        train.append(members[:k])
        test.append(members[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test)) if test else np.empty(0, np.int64)


@dataclass
class MetricsReport:
    micro: list[float]
    macro: list[float]
    config: dict = field(default_factory=dict)

    @property
    def mean_micro(self) -> float:
        return float(np.mean(self.micro))

    @property
    def mean_macro(self) -> float:
        return float(np.mean(self.macro))

    def to_tsv(self) -> str:
        lines = ["repeat\tmicro_f1\tmacro_f1"]
        lines += [f"{i}\t{a:.6f}\t{b:.6f}" for i, (a, b) in enumerate(zip(self.micro, self.macro))]
        lines.append(f"mean\t{self.mean_micro:.6f}\t{self.mean_macro:.6f}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        return f"micro={self.mean_micro:.6f} macro={self.mean_macro:.6f}"


def features_for(vectors, labels: LabelSet) -> np.ndarray:
    """Rows of ``vectors`` for the labeled nodes, L2-normalized."""
    vectors = np.asarray(vectors)
    if len(labels) and labels.nodes.max() >= len(vectors):
        raise ValueError(f"label file names node {labels.nodes.max()} but only {len(vectors)} embeddings exist")
    return l2_normalize(vectors[labels.nodes])


def score_split(X, labels: LabelSet, train_idx, test_idx, C: float, threshold=None) -> tuple[float, float]:
    model = fit_logreg_ovr(X[train_idx], labels.subset(train_idx), C)
    truth = labels.subset(test_idx)
    pred = predict(
        model, X[test_idx], labels.mode,
        true_label_counts=None if threshold is not None else truth.counts(), threshold=threshold,
    )
    return micro_macro_f1(pred, truth)


def iter_splits(labels: LabelSet, split: SplitSpec):
    """Yield ``(train_idx, test_idx)`` for every repeat of ``split``."""
    for seq in np.random.SeedSequence([split.seed, 0x5EED]).spawn(split.repeats):
        yield train_test_split(labels, split.train_fraction, np.random.default_rng(seq), split.stratified)


def evaluate(vectors, labels: LabelSet, split: SplitSpec = SplitSpec(), C: float = 100.0, threshold=None) -> MetricsReport:
    """Repeated train/test evaluation of target-node embeddings.

    ``vectors[v]`` is the embedding of target ``v``; only labeled nodes are
    used.
    """
    X = features_for(vectors, labels)
    micro, macro = [], []
    for rep, (tr, te) in enumerate(iter_splits(labels, split)):
        a, b = score_split(X, labels, tr, te, C, threshold)
        log.debug("repeat %d: micro=%.4f macro=%.4f", rep, a, b)
        micro.append(a)
        macro.append(b)
    return MetricsReport(micro, macro, {"C": C, **asdict(split)})
