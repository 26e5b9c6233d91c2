"""Penalties, Kraft-inequality checks and the discrete candidate-set pMLE."""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from ..errors import DimensionError, DomainError

__all__ = [
    "PenaltyModel",
    "discrete_pmle",
    "kraft_ok",
    "kraft_sum",
    "quantized_candidates",
    "quantized_penalty",
    "satisfies_floor",
]


@dataclass(frozen=True)
class PenaltyModel:
    """Either ``tau * ||theta||_1`` or the quantized ``||theta||_0 log(1/delta)``.

    ``c_floor`` is only used by :func:`satisfies_floor`; the solvers ignore it.
    """

    kind: str = "l1_weighted"
    tau: float = 0.0
    delta: float | None = None
    l0: float | None = None
    c_floor: float | None = None

    def __post_init__(self):
        if self.kind not in ("l1_weighted", "quantized_l0"):
            raise DomainError(f"unknown penalty kind {self.kind!r}")
        if not self.tau >= 0:
            raise DomainError("tau must be nonnegative")
        if self.c_floor is not None and self.c_floor < 0:
            raise DomainError("c_floor must be nonnegative")
        if self.kind == "quantized_l0":
            if self.delta is None or self.l0 is None:
                raise DomainError("quantized_l0 needs delta and l0")
            if not 0 < self.delta < 1:
                raise DomainError("delta must lie in (0, 1)")
            levels = self.l0 / math.sqrt(self.delta)
            if levels < 1 or abs(levels - round(levels)) > 1e-9 * levels:
                raise DomainError(f"l0/sqrt(delta) = {levels} must be a positive integer")

    @property
    def levels(self):
        """Number of nonzero quantizer levels ``l0 / sqrt(delta)``."""
        return int(round(self.l0 / math.sqrt(self.delta)))

    def __call__(self, theta):
        theta = np.asarray(getattr(theta, "values", theta), dtype=float)
        if self.kind == "l1_weighted":
            return self.tau * float(np.abs(theta).sum())
        return quantized_penalty(int(np.count_nonzero(theta)), self.delta, theta.size)

    def kraft_ok(self, n):
        return self.kind == "quantized_l0" and kraft_ok(self.delta, n, self.l0)


def quantized_penalty(r, delta, n):
    """``r log(1/delta)`` for a candidate with ``r`` nonzeros out of ``n``."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if r < 0 or r > n:
        raise DomainError(f"support size {r} outside [0, {n}]")
    return r * math.log(1.0 / delta)


def kraft_ok(delta, n, l0):
    """Sufficient condition ``delta <= (2 n L0)^-2`` for the quantized penalty."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    return delta <= (2.0 * n * l0) ** -2


def kraft_sum(penalties):
    """``sum exp(-pen)``; a penalty is a valid code length iff this is at most 1."""
    return float(np.exp(-np.asarray(penalties, dtype=float)).sum())


def satisfies_floor(op, theta, c):
    """True if every measurement mean ``(Phi theta)_j`` is at least ``c``."""
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    return bool(np.all(op.matrix @ theta >= c))


def quantized_candidates(n, l0, step, max_support, positions=None):
    """Enumerate ``{lambda : lambda_i in step * Z_+, ||lambda||_1 <= l0, ||lambda||_0 <= max_support}``.

    ``positions`` restricts the support to a subset of coordinates.  Returns a
    ``(K, n)`` array; the zero vector is row 0.  Only meant for small sets.
    """
    positions = np.arange(n) if positions is None else np.asarray(positions)
    top = int(math.floor(l0 / step + 1e-9))
    rows = [np.zeros(n)]
    for r in range(1, max_support + 1):
        for support in itertools.combinations(positions, r):
            for levels in itertools.product(range(1, top + 1), repeat=r):
                if sum(levels) <= top:
                    v = np.zeros(n)
                    v[list(support)] = np.asarray(levels) * step
                    rows.append(v)
    return np.array(rows)


def discrete_pmle(y, op, candidates, penalties):
    """Brute-force ``argmin -log P(y | Phi theta) + 2 pen(theta)`` over a finite set.

    Ties go to the first candidate.  Returns ``(index, objective values)``.
    """
    cand = np.asarray(candidates, dtype=float)
    pen = np.broadcast_to(np.asarray(penalties, dtype=float), (cand.shape[0],))
    if cand.ndim != 2 or cand.shape[1] != op.shape[1]:
        raise DimensionError(f"candidates must be (K, {op.shape[1]})")
    counts = np.asarray(getattr(y, "counts", y), dtype=float)
    means = np.asarray(op.matrix @ cand.T).T
    with np.errstate(divide="ignore"):
        nll = means.sum(axis=1) - xlogy(counts[None, :], means).sum(axis=1)
    nll[np.any((means == 0) & (counts[None, :] > 0), axis=1)] = np.inf
    objective = nll + 2.0 * pen
    return int(np.argmin(objective)), objective
