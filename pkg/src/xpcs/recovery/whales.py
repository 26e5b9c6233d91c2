"""Whale isolation: shrink the candidate support before the pMLE."""

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, DomainError

__all__ = ["WhaleIsolationResult", "whale_isolation"]


@dataclass(frozen=True, eq=False)
class WhaleIsolationResult:
    v1: np.ndarray
    b1: np.ndarray
    passed_size_bound: bool
    elapsed: float = field(default=0.0, compare=False)


def whale_isolation(y, graph, k):
    """Left nodes whose every neighbour is among the ``k d`` largest counters.

    ``b1`` holds the ``min(k d, m)`` largest counts (equal counts keep the
    lower index).  Any left node touching a counter outside ``b1`` is
    eliminated; the survivors form ``v1``.  Sorting costs ``O(m log m)`` and the
    elimination pass ``O(n d)``.
    """
    counts = np.asarray(getattr(y, "counts", y))
    if counts.shape != (graph.m,):
        raise DimensionError(f"y has length {counts.size}, expected {graph.m}")
    if k < 0:
        raise DomainError("k must be nonnegative")
    start = time.perf_counter()
    kd = min(int(k) * graph.d, graph.m)
    order = np.argsort(-counts, kind="stable")
    b1 = np.sort(order[:kd])
    outside = np.ones(graph.m, dtype=bool)
    outside[b1] = False
    eliminated = outside[graph.adjacency].any(axis=1)
    v1 = np.flatnonzero(~eliminated)
    elapsed = time.perf_counter() - start
    return WhaleIsolationResult(v1=v1, b1=b1, passed_size_bound=bool(v1.size <= kd), elapsed=elapsed)
