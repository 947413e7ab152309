"""Alias-method tables for O(1) sampling from discrete distributions.

Tables are built with Vose's algorithm.  The numba helpers work on slices of
flat arrays so that thousands of tables can be packed into a few buffers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from geri._rng import next_float, next_index


class DeadEnd(Exception):
    """Raised when sampling from an empty table."""


@njit(cache=True)
def build_alias_into(weights, prob, alias, offset):
    """Write the alias table for ``weights`` into ``prob/alias[offset:]``.

    Alias entries are local indices (0..n-1).  Returns False, leaving the
    slots untouched, when the weights are all zero.
    """
    n = weights.shape[0]
    total = 0.0
    for i in range(n):
        total += weights[i]
    if n == 0 or total <= 0.0:
        return False
    scaled = np.empty(n, dtype=np.float64)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        scaled[i] = weights[i] * n / total
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        g = large[nl - 1]
        prob[offset + s] = scaled[s]
        alias[offset + s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            nl -= 1
            small[ns] = g
            ns += 1
    # leftovers are 1 up to rounding
    for i in range(nl):
        prob[offset + large[i]] = 1.0
        alias[offset + large[i]] = large[i]
    for i in range(ns):
        prob[offset + small[i]] = 1.0
        alias[offset + small[i]] = small[i]
    return True


@njit(cache=True, inline="always")
def alias_draw(prob, alias, offset, n, state):
    """Draw a local index from the table stored at ``offset`` of length ``n``."""
    i = next_index(state, n)
    if next_float(state) < prob[offset + i]:
        return i
    return alias[offset + i]


@dataclass(frozen=True)
class AliasTable:
    """A single alias table over ``outcomes``."""

    prob: np.ndarray
    alias: np.ndarray
    outcomes: np.ndarray

    @classmethod
    def from_weights(cls, weights, outcomes=None) -> "AliasTable":
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("alias weights must be finite and non-negative")
        if outcomes is None:
            outcomes = np.arange(len(w))
        outcomes = np.asarray(outcomes)
        if len(outcomes) != len(w):
            raise ValueError("weights and outcomes differ in length")
        prob = np.zeros(len(w))
        alias = np.zeros(len(w), dtype=np.int64)
        if not build_alias_into(w, prob, alias, 0):
            return cls(np.empty(0), np.empty(0, dtype=np.int64), outcomes[:0])
        return cls(prob, alias, outcomes)

    def __len__(self) -> int:
        return len(self.prob)

    @property
    def empty(self) -> bool:
        return len(self.prob) == 0

    def probabilities(self) -> np.ndarray:
        """Exact sampling distribution implied by the table."""
        n = len(self.prob)
        if n == 0:
            return np.empty(0)
        p = self.prob / n
        np.add.at(p, self.alias, (1.0 - self.prob) / n)
        return p

    def sample(self, rng: np.random.Generator):
        if self.empty:
            raise DeadEnd("cannot sample from an empty alias table")
        i = int(rng.integers(len(self.prob)))
        if rng.random() >= self.prob[i]:
            i = int(self.alias[i])
        return self.outcomes[i]

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.empty:
            raise DeadEnd("cannot sample from an empty alias table")
        idx = rng.integers(len(self.prob), size=size)
        flip = rng.random(size) >= self.prob[idx]
        idx[flip] = self.alias[idx[flip]]
        return self.outcomes[idx]


def alias_sample(table: AliasTable, rng: np.random.Generator):
    return table.sample(rng)
