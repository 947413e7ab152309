"""Embedding files in word2vec text/binary layout."""

from __future__ import annotations

import numpy as np

from geri.sgns import Embeddings


def write_embeddings(emb: Embeddings, path, binary: bool = False, emit_bridges: bool = False) -> None:
    """Header ``<count> <d>`` then one ``name v1 .. vd`` row per node.

    Targets are named by id, bridges (only with ``emit_bridges``) as
    ``w<word>``.  The binary layout stores each vector as little-endian
    float32 right after ``name `` and ends the row with a newline.
    """
    rows = emb.vectors if emit_bridges else emb.targets
    names = [str(v) for v in range(emb.target_count)]
    if emit_bridges:
        names += ["w" + w for w in emb.bridge_words]
    d = emb.dim
    if binary:
        data = np.asarray(rows, dtype="<f4")
        with open(path, "wb") as fh:
            fh.write(f"{len(names)} {d}\n".encode())
            for name, vec in zip(names, data):
                fh.write(name.encode() + b" " + vec.tobytes() + b"\n")
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(names)} {d}\n")
        for name, vec in zip(names, rows):
            fh.write(name + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def read_embeddings(path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected '<count> <dim>' header")
        count, d = int(header[0]), int(header[1])
        rest = fh.read()
    names: list[str] = []
    X = np.empty((count, d), dtype=np.float32)
    try:
        lines = rest.decode("utf-8").splitlines()
        text = len(lines) == count and all(len(line.split()) == d + 1 for line in lines)
    except UnicodeDecodeError:
        text = False
    if text:
        for i, line in enumerate(lines):
            tok = line.split()
            names.append(tok[0])
            X[i] = np.array(tok[1:], dtype=np.float64)
        return names, X
    pos = 0
    for i in range(count):
        sp = rest.index(b" ", pos)
        names.append(rest[pos:sp].decode("utf-8"))
        X[i] = np.frombuffer(rest, dtype="<f4", count=d, offset=sp + 1)
        pos = sp + 1 + 4 * d
        if pos < len(rest) and rest[pos : pos + 1] == b"\n":
            pos += 1
    return names, X


def target_matrix(names, X) -> np.ndarray:
    """Rows for integer-named (target) nodes, indexed by node id."""
    ids = [(int(n), i) for i, n in enumerate(names) if n.lstrip("-").isdigit()]
    if not ids:
        return np.empty((0, X.shape[1]), dtype=X.dtype)
    n = max(v for v, _ in ids) + 1
    out = np.zeros((n, X.shape[1]), dtype=X.dtype)
    for v, i in ids:
        out[v] = X[i]
    return out
