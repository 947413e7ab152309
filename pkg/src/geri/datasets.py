"""Loaders for citation datasets in the LINQS ``.content`` / ``.cites`` layout.

Each ``.content`` line is ``<pub_id> <f_1> ... <f_W> <label>`` with binary
word indicators; each ``.cites`` line is ``<cited> <citing>``.  Publication ids are
remapped to dense integers in file order.  Citations naming publications without a
content row are dropped, as are self-citations and repeated links.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np

from geri.evaluation import LabelSet
from geri.graph import InfoNetwork, write_info_network

log = logging.getLogger(__name__)

DATA_ENV = "GERI_DATA_DIR"


def load_linqs(directory, name: str) -> tuple[InfoNetwork, LabelSet]:
    directory = Path(directory)
    content = directory / f"{name}.content"
    cites = directory / f"{name}.cites"
    ids: dict[str, int] = {}
    classes: list[str] = []
    nt_node, nt_word = [], []
    n_words = None
    with open(content, encoding="utf-8") as fh:
        for raw in fh:
            tok = raw.split()
            if not tok:
                continue
            if n_words is None:
                n_words = len(tok) - 2
            if tok[0] in ids:
                continue
            v = ids.setdefault(tok[0], len(ids))
            feats = np.array(tok[1:-1], dtype=np.float64)
            for k in np.flatnonzero(feats):
                nt_node.append(v)
                nt_word.append(int(k))
            classes.append(tok[-1])
    edges = set()
    dropped = 0
    with open(cites, encoding="utf-8") as fh:
        for raw in fh:
            tok = raw.split()
            if len(tok) != 2:
                continue
            a, b = ids.get(tok[0]), ids.get(tok[1])
            if a is None or b is None or a == b:
                dropped += 1
                continue
            edges.add((min(a, b), max(a, b)))
    if dropped:
        log.info("%s: dropped %d citations to unknown publications or self-citations", name, dropped)
    edges = sorted(edges)
    n = len(ids)
    net = InfoNetwork(
        n_targets=n,
        edge_src=np.array([e[0] for e in edges], dtype=np.int64),
        edge_dst=np.array([e[1] for e in edges], dtype=np.int64),
        edge_weight=np.ones(len(edges)),
        node_text_node=np.array(nt_node, dtype=np.int64),
        node_text_word=np.array(nt_word, dtype=np.int64),
        node_text_value=np.ones(len(nt_node)),
        edge_text_i=np.empty(0, np.int64),
        edge_text_j=np.empty(0, np.int64),
        edge_text_word=np.empty(0, np.int64),
        edge_text_value=np.empty(0),
        vocabulary=[f"f{k}" for k in range(n_words or 0)],
    )
    net.validate()
    names = sorted(set(classes))
    cls = {c: k for k, c in enumerate(names)}
    labels = LabelSet(np.arange(n), [frozenset([cls[c]]) for c in classes], len(names), names=names)
    return net, labels


def find_dataset(name: str, root=None) -> Path | None:
    """Directory holding ``<name>.content`` and ``<name>.cites``, if any.

    Looks in ``root``, then ``$GERI_DATA_DIR``, then ``./data``, each either
    directly or in a ``<name>/`` subdirectory.
    """
    candidates = [root, os.environ.get(DATA_ENV), "data"]
    for base in candidates:
        if not base:
            continue
        for d in (Path(base), Path(base) / name):
            if (d / f"{name}.content").is_file() and (d / f"{name}.cites").is_file():
                return d.resolve()
    return None


def export(net: InfoNetwork, labels: LabelSet, out_dir) -> dict[str, Path]:
    """Write the network and labels in the plain edge/text/label formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"edges": out / "edges.txt", "node_text": out / "node_text.txt", "labels": out / "labels.txt"}
    write_info_network(net, paths["edges"], paths["node_text"])
    with open(paths["labels"], "w", encoding="utf-8") as fh:
        for v, labs in zip(labels.nodes, labels.labels):
            fh.write(f"{v} " + " ".join(labels.names[k] for k in sorted(labs)) + "\n")
    return paths
