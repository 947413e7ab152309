"""Information networks and their bipartite heterogeneous expansion.

An :class:`InfoNetwork` is a plain undirected graph whose nodes and edges
carry bags of words.  :func:`build_hetero` turns every word into a *bridge*
node linked to the *target* nodes (or edge endpoints) whose text mentions it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

HETERO_HEADER = "#hetero"


class ParseError(ValueError):
    """Malformed input line."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = str(path)
        self.lineno = lineno


class ValidationError(ValueError):
    """Input parsed fine but violates a network invariant."""


@dataclass
class InfoNetwork:
    """Homogeneous graph with text on nodes and edges.

    Edges are undirected and stored once.  Text matrices are kept in
    coordinate form; ``edge_text_*`` rows refer to the edge ``(i, j)``.
    """

    n_targets: int
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_weight: np.ndarray
    node_text_node: np.ndarray
    node_text_word: np.ndarray
    node_text_value: np.ndarray
    edge_text_i: np.ndarray
    edge_text_j: np.ndarray
    edge_text_word: np.ndarray
    edge_text_value: np.ndarray
    vocabulary: list[str] = field(default_factory=list)

    @classmethod
    def from_lists(cls, n_targets, edges, node_text=(), edge_text=(), vocabulary=None):
        """Build from python lists.

        ``edges`` holds ``(src, dst)`` or ``(src, dst, weight)``;
        ``node_text`` holds ``(node, word_id, value)``; ``edge_text`` holds
        ``(i, j, word_id, value)``.
        """
        edges = [tuple(e) if len(e) == 3 else (e[0], e[1], 1.0) for e in edges]
        node_text = list(node_text)
        edge_text = list(edge_text)
        if vocabulary is None:
            n_words = 1 + max(
                [w for _, w, _ in node_text] + [w for _, _, w, _ in edge_text], default=-1
            )
            vocabulary = [f"w{k}" for k in range(n_words)]

        def col(rows, i, dtype):
            return np.array([r[i] for r in rows], dtype=dtype)

        net = cls(
            n_targets=int(n_targets),
            edge_src=col(edges, 0, np.int64),
            edge_dst=col(edges, 1, np.int64),
            edge_weight=col(edges, 2, np.float64),
            node_text_node=col(node_text, 0, np.int64),
            node_text_word=col(node_text, 1, np.int64),
            node_text_value=col(node_text, 2, np.float64),
            edge_text_i=col(edge_text, 0, np.int64),
            edge_text_j=col(edge_text, 1, np.int64),
            edge_text_word=col(edge_text, 2, np.int64),
            edge_text_value=col(edge_text, 3, np.float64),
            vocabulary=list(vocabulary),
        )
        net.validate()
        return net

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    def validate(self) -> None:
        n, nw = self.n_targets, len(self.vocabulary)
        for name, ids, bound in [
            ("edge source", self.edge_src, n),
            ("edge destination", self.edge_dst, n),
            ("node-text node", self.node_text_node, n),
            ("node-text word", self.node_text_word, nw),
            ("edge-text node", self.edge_text_i, n),
            ("edge-text node", self.edge_text_j, n),
            ("edge-text word", self.edge_text_word, nw),
        ]:
            bad = (ids < 0) | (ids >= bound)
            if bad.any():
                raise ValidationError(f"{name} id {ids[bad][0]} out of range [0, {bound})")
        loops = self.edge_src == self.edge_dst
        if loops.any():
            raise ValidationError(f"self-loop on node {self.edge_src[loops][0]}")
        if np.any(self.edge_weight < 0) or not np.all(np.isfinite(self.edge_weight)):
            raise ValidationError("edge weights must be finite and >= 0")
        keys = _pair_keys(self.edge_src, self.edge_dst, n)
        uniq, counts = np.unique(keys, return_counts=True)
        if (counts > 1).any():
            k = uniq[counts > 1][0]
            raise ValidationError(f"duplicate edge {k // max(n, 1)}-{k % max(n, 1)}")
        for name, vals in [("node-text", self.node_text_value), ("edge-text", self.edge_text_value)]:
            if np.any(~(vals > 0)) or not np.all(np.isfinite(vals)):
                raise ValidationError(f"{name} values must be finite and > 0")
        if len(self.edge_text_i):
            et = _pair_keys(self.edge_text_i, self.edge_text_j, n)
            missing = ~np.isin(et, uniq)
            if missing.any():
                i, j = self.edge_text_i[missing][0], self.edge_text_j[missing][0]
                raise ValidationError(f"edge text refers to non-edge {i}-{j}")


def _pair_keys(a, b, n):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return lo.astype(np.int64) * max(n, 1) + hi


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def _as_int(path, lineno, tok):
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(path, lineno, f"expected integer node id, got {tok!r}") from None
    if v < 0:
        raise ParseError(path, lineno, f"negative node id {v}")
    return v


def _as_float(path, lineno, tok):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(path, lineno, f"expected number, got {tok!r}") from None


def is_hetero_file(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    return first.startswith(HETERO_HEADER)


def parse_info_network(edge_path, node_text_path, edge_text_path=None, n_targets=None) -> InfoNetwork:
    """Read the edge, node-text and (optional) edge-text files.

    Repeated text entries for the same (node, word) or (edge, word) are summed.
    ``n_targets`` may be given to include isolated nodes beyond the largest id
    seen in the files.
    """
    for p in (edge_path, node_text_path, edge_text_path):
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")

    edges = []
    for lineno, tok in _data_lines(edge_path):
        if len(tok) not in (2, 3):
            raise ParseError(edge_path, lineno, "expected 'src dst [weight]'")
        s, d = _as_int(edge_path, lineno, tok[0]), _as_int(edge_path, lineno, tok[1])
        w = _as_float(edge_path, lineno, tok[2]) if len(tok) == 3 else 1.0
        edges.append((s, d, w))

    vocab: dict[str, int] = {}
    node_text: dict[tuple[int, int], float] = {}
    for lineno, tok in _data_lines(node_text_path):
        if len(tok) != 3:
            raise ParseError(node_text_path, lineno, "expected 'node word count'")
        v = _as_int(node_text_path, lineno, tok[0])
        c = _as_float(node_text_path, lineno, tok[2])
        w = vocab.setdefault(tok[1], len(vocab))
        node_text[v, w] = node_text.get((v, w), 0.0) + c

    edge_text: dict[tuple[int, int, int], float] = {}
    if edge_text_path is not None:
        for lineno, tok in _data_lines(edge_text_path):
            if len(tok) != 4:
                raise ParseError(edge_text_path, lineno, "expected 'node_i node_j word count'")
            i = _as_int(edge_text_path, lineno, tok[0])
            j = _as_int(edge_text_path, lineno, tok[1])
            c = _as_float(edge_text_path, lineno, tok[3])
            w = vocab.setdefault(tok[2], len(vocab))
            key = (min(i, j), max(i, j), w)
            edge_text[key] = edge_text.get(key, 0.0) + c

    seen = [e[0] for e in edges] + [e[1] for e in edges]
    seen += [k[0] for k in node_text] + [k[0] for k in edge_text] + [k[1] for k in edge_text]
    n = max(seen, default=-1) + 1
    if n_targets is not None:
        if n_targets < n:
            raise ValidationError(f"n_targets={n_targets} but node id {n - 1} appears in the input")
        n = n_targets
    words = list(vocab)
    return InfoNetwork.from_lists(
        n,
        edges,
        [(v, w, c) for (v, w), c in node_text.items()],
        [(i, j, w, c) for (i, j, w), c in edge_text.items()],
        vocabulary=words,
    )


def write_info_network(net: InfoNetwork, edge_path, node_text_path, edge_text_path=None) -> None:
    with open(edge_path, "w", encoding="utf-8") as fh:
        for s, d, w in zip(net.edge_src, net.edge_dst, net.edge_weight):
            fh.write(f"{s} {d} {float(w)!r}\n")
    with open(node_text_path, "w", encoding="utf-8") as fh:
        for v, k, c in zip(net.node_text_node, net.node_text_word, net.node_text_value):
            fh.write(f"{v} {net.vocabulary[k]} {float(c)!r}\n")
    if edge_text_path is not None:
        with open(edge_text_path, "w", encoding="utf-8") as fh:
            for i, j, k, c in zip(net.edge_text_i, net.edge_text_j, net.edge_text_word, net.edge_text_value):
                fh.write(f"{i} {j} {net.vocabulary[k]} {float(c)!r}\n")


@dataclass(frozen=True)
class HeteroNetwork:
    """Targets ``0..target_count-1`` followed by bridges, in CSR form.

    Each adjacency row is sorted by neighbor id.  Instances are treated as
    immutable once built, so walk workers may share them freely.
    """

    target_count: int
    bridge_count: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    bridge_words: tuple[str, ...] = ()

    @property
    def n_nodes(self) -> int:
        return self.target_count + self.bridge_count

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def is_bridge(self, v: int) -> bool:
        return v >= self.target_count

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> list[tuple[int, float]]:
        return neighbors(self, v)

    def node_name(self, v: int) -> str:
        if v < self.target_count:
            return str(v)
        return "w" + self.bridge_words[v - self.target_count]

    def edge_list(self):
        """Each undirected edge once as ``(u, v, w)`` with ``u < v``."""
        src = np.repeat(np.arange(self.n_nodes), self.degree())
        keep = src < self.indices
        return src[keep], self.indices[keep], self.weights[keep]


def neighbors(net: HeteroNetwork, v: int) -> list[tuple[int, float]]:
    if not 0 <= v < net.n_nodes:
        raise IndexError(f"node {v} out of range [0, {net.n_nodes})")
    a, b = net.indptr[v], net.indptr[v + 1]
    return [(int(x), float(w)) for x, w in zip(net.indices[a:b], net.weights[a:b])]


def from_edges(n_targets, n_bridges, src, dst, weight, bridge_words=None) -> HeteroNetwork:
    """CSR network from undirected edges; parallel edges are merged by summing."""
    n = n_targets + n_bridges
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weight = np.asarray(weight, dtype=np.float64)
    keep = weight > 0
    if not keep.all():
        log.info("dropping %d zero-weight edges", int((~keep).sum()))
        src, dst, weight = src[keep], dst[keep], weight[keep]
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    w = np.concatenate([weight, weight])
    key = rows * n + cols
    uniq, inv = np.unique(key, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv, w)
    rows, cols = uniq // n, uniq % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    if bridge_words is None:
        bridge_words = [str(k) for k in range(n_bridges)]
    return HeteroNetwork(
        target_count=int(n_targets),
        bridge_count=int(n_bridges),
        indptr=indptr,
        indices=cols.astype(np.int64),
        weights=merged,
        bridge_words=tuple(bridge_words),
    )


def build_hetero(net: InfoNetwork) -> HeteroNetwork:
    """Add one bridge node per used word and link it to the text's owners.

    Node text ``T_V(i, k)`` yields edge ``(v_i, w_k)``; edge text
    ``T_E(i, j, k)`` yields ``(v_i, w_k)`` and ``(v_j, w_k)``, both with the
    occurrence value as weight.  Original edges keep their weights.  A
    (target, bridge) pair produced more than once gets the summed weight.
    """
    used = np.union1d(net.node_text_word, net.edge_text_word).astype(np.int64)
    bridge_of = np.full(len(net.vocabulary), -1, dtype=np.int64)
    bridge_of[used] = net.n_targets + np.arange(len(used))
    src = np.concatenate([net.edge_src, net.node_text_node, net.edge_text_i, net.edge_text_j])
    dst = np.concatenate(
        [
            net.edge_dst,
            bridge_of[net.node_text_word],
            bridge_of[net.edge_text_word],
            bridge_of[net.edge_text_word],
        ]
    )
    w = np.concatenate([net.edge_weight, net.node_text_value, net.edge_text_value, net.edge_text_value])
    return from_edges(
        net.n_targets, len(used), src, dst, w, bridge_words=[net.vocabulary[k] for k in used]
    )


def write_hetero(net: HeteroNetwork, path) -> None:
    src, dst, w = net.edge_list()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{HETERO_HEADER} targets={net.target_count} bridges={net.bridge_count}\n")
        for k, word in enumerate(net.bridge_words):
            fh.write(f"#bridge {net.target_count + k} {word}\n")
        for a, b, x in zip(src, dst, w):
            fh.write(f"{a} {b} {float(x)!r}\n")


def read_hetero(path) -> HeteroNetwork:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(HETERO_HEADER):
        raise ParseError(path, 1, f"missing '{HETERO_HEADER}' header")
    try:
        fields = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        n_t, n_b = int(fields["targets"]), int(fields["bridges"])
    except (KeyError, ValueError):
        raise ParseError(path, 1, "header must read '#hetero targets=<n> bridges=<m>'") from None
    words = [str(k) for k in range(n_b)]
    src, dst, w = [], [], []
    for lineno, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if line.startswith("#bridge"):
            tok = line.split()
            if len(tok) != 3:
                raise ParseError(path, lineno, "expected '#bridge <id> <word>'")
            words[_as_int(path, lineno, tok[1]) - n_t] = tok[2]
            continue
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if len(tok) not in (2, 3):
            raise ParseError(path, lineno, "expected 'src dst [weight]'")
        src.append(_as_int(path, lineno, tok[0]))
        dst.append(_as_int(path, lineno, tok[1]))
        w.append(_as_float(path, lineno, tok[2]) if len(tok) == 3 else 1.0)
    src_a, dst_a = np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)
    if len(src_a) and max(src_a.max(), dst_a.max()) >= n_t + n_b:
        raise ValidationError("node id beyond header counts")
    both = (src_a >= n_t) & (dst_a >= n_t)
    if both.any():
        raise ValidationError("bridge-bridge edge in heterogeneous network")
    return from_edges(n_t, n_b, src_a, dst_a, np.array(w, dtype=np.float64), bridge_words=words)
