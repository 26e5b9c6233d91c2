"""Random left-regular bipartite graphs used as sensing matrices.

A graph with ``n`` left (signal) nodes, ``m`` right (measurement) nodes and
left degree ``d`` is stored as an ``(n, d)`` integer array whose row ``i``
lists the sorted right neighbours of left node ``i``.  The adjacency matrix
``A`` (``m x n``, binary) is never formed densely; products go through a
cached CSR matrix.
"""

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DimensionError, DomainError, InvalidDegreeError
from .rng import stream

__all__ = [
    "ExpanderGraph",
    "ExpansionParams",
    "ExpansionReport",
    "SensingOperator",
    "apply",
    "apply_transpose",
    "generate_expander",
    "k_term_error",
    "passes_expansion_check",
    "read_graph",
    "sample_expansion",
    "write_graph",
]


@dataclass(frozen=True, eq=False)
class ExpanderGraph:
    n: int
    m: int
    d: int
    adjacency: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int64)
        if adj.shape != (self.n, self.d):
            raise DimensionError(f"adjacency has shape {adj.shape}, expected {(self.n, self.d)}")
        if adj.size and (adj.min() < 0 or adj.max() >= self.m):
            raise DomainError("neighbour index out of range [0, m)")
        if self.d > 1 and np.any(np.diff(adj, axis=1) <= 0):
            raise DomainError("neighbour lists must be strictly increasing")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def edges(self):
        return self.n * self.d

    @cached_property
    def csr(self):
        """Binary adjacency matrix ``A`` of shape ``(m, n)``."""
        rows = self.adjacency.ravel()
        cols = np.repeat(np.arange(self.n), self.d)
        a = sparse.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(self.m, self.n)
        )
        a.sort_indices()
        return a

    @cached_property
    def csr_t(self):
        return self.csr.T.tocsr()

    @cached_property
    def right_degrees(self):
        return np.bincount(self.adjacency.ravel(), minlength=self.m)

    def neighbors(self, nodes):
        """Sorted union of the right neighbours of ``nodes``."""
        return np.unique(self.adjacency[np.asarray(nodes, dtype=np.int64)])

    def to_dense(self):
        return self.csr.toarray()

    def __eq__(self, other):
        if not isinstance(other, ExpanderGraph):
            return NotImplemented
        return (self.n, self.m, self.d, self.seed) == (other.n, other.m, other.d, other.seed) and (
            np.array_equal(self.adjacency, other.adjacency)
        )

    __hash__ = None


@dataclass(frozen=True)
class ExpansionParams:
    k: int
    eps: float = 1.0 / 16.0

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("sparsity k must be at least 1")
        if not 0.0 < self.eps < 1.0:
            raise DomainError("expansion slack eps must lie in (0, 1)")


@dataclass(frozen=True)
class ExpansionReport:
    trials: int
    min_expansion_ratio: float
    min_rip1_ratio: float
    max_right_degree: int
    rip1_upper_held: bool = True

    def passes(self, eps):
        """True if every sampled subset expanded by more than ``(1 - eps)``."""
        return self.min_expansion_ratio > 1.0 - eps

    def csv_row(self):
        return (
            f"{self.trials},{self.min_expansion_ratio!r},{self.min_rip1_ratio!r},"
            f"{self.max_right_degree}"
        )


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """A graph viewed as the linear map ``A`` or, if ``normalized``, ``A / d``."""

    graph: ExpanderGraph
    normalized: bool = True

    @property
    def shape(self):
        return (self.graph.m, self.graph.n)

    @property
    def scale(self):
        return 1.0 / self.graph.d if self.normalized else 1.0

    @cached_property
    def matrix(self):
        """The operator as a CSR matrix (entries ``1`` or ``1/d``)."""
        return self.graph.csr * self.scale if self.normalized else self.graph.csr

    @cached_property
    def matrix_t(self):
        return self.matrix.T.tocsr()

    def column_sums(self):
        return np.asarray(self.matrix.sum(axis=0)).ravel()


def generate_expander(n, m, d, seed):
    """Draw a random left-``d``-regular bipartite graph.

    Each left node receives ``d`` distinct right neighbours chosen uniformly:
    all ``n * d`` endpoints are drawn i.i.d. and any endpoint repeating an
    earlier one in its row is redrawn until the rows are duplicate free.
    When ``d > m / 2`` rejection gets slow, so rows are taken as the first
    ``d`` entries of a random permutation instead.  Both give the uniform
    distribution over ``d``-subsets.
    """
    n, m, d = int(n), int(m), int(d)
    if n < 1 or m < 1:
        raise DimensionError(f"graph needs n >= 1 and m >= 1, got n={n}, m={m}")
    if d < 1 or d > m:
        raise InvalidDegreeError(f"left degree must satisfy 1 <= d <= m, got d={d}, m={m}")
    rng = stream(seed)
    if 2 * d > m:
        adj = np.argsort(rng.random((n, m)), axis=1)[:, :d]
    else:
        adj = rng.integers(0, m, size=(n, d))
        while True:
            order = np.argsort(adj, axis=1, kind="stable")
            srt = np.take_along_axis(adj, order, axis=1)
            dup_sorted = np.zeros_like(adj, dtype=bool)
            dup_sorted[:, 1:] = srt[:, 1:] == srt[:, :-1]
            if not dup_sorted.any():
                break
            dup = np.zeros_like(dup_sorted)
            np.put_along_axis(dup, order, dup_sorted, axis=1)
            adj[dup] = rng.integers(0, m, size=int(dup.sum()))
    return ExpanderGraph(n, m, d, np.sort(adj, axis=1), int(seed))


def _vector(x, length, name):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != length:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {length}")
    return x


def apply(op, x):
    """``A x`` (or ``A x / d``); ``x`` may also be an ``(n, batch)`` array."""
    x = _vector(x, op.graph.n, "x")
    return op.matrix @ x


def apply_transpose(op, v):
    """``A^T v`` (or ``A^T v / d``)."""
    v = _vector(v, op.graph.m, "v")
    return op.matrix_t @ v


def k_term_error(u, k):
    """l1 mass of ``u`` outside its ``k`` largest-magnitude entries.

    Ties in magnitude keep the lower index.
    """
    u = np.abs(np.asarray(u, dtype=float).ravel())
    k = int(k)
    if k < 0 or k > u.size:
        raise DomainError(f"k must lie in [0, {u.size}], got {k}")
    order = np.argsort(-u, kind="stable")
    return float(u[order[k:]].sum())


def sample_expansion(graph, params, trials, seed):
    """Empirical expansion and RIP-1 ratios over random subsets.

    For each trial a subset size is drawn uniformly from ``1..k`` and a uniform
    subset of that size gives one expansion sample ``|N(S)| / (d |S|)``.  An
    independent stream draws ``trials`` signed ``k``-sparse Gaussian vectors for
    the ratio ``||A x||_1 / (d ||x||_1)``.  The minima are sample minima, not
    certificates.
    """
    k = params.k
    if k > graph.n / 2:
        raise DomainError(f"k={k} exceeds n/2={graph.n / 2}")
    if trials < 1:
        raise DomainError("trials must be at least 1")
    rng_sets = stream(seed, 0)
    rng_vecs = stream(seed, 1)
    adj = graph.adjacency
    d = graph.d

    min_exp = 1.0
    for _ in range(trials):
        s = int(rng_sets.integers(1, k + 1))
        nodes = rng_sets.choice(graph.n, size=s, replace=False)
        min_exp = min(min_exp, np.unique(adj[nodes]).size / (d * s))

    ratios = np.empty(trials)
    for t in range(trials):
        support = rng_vecs.choice(graph.n, size=k, replace=False)
        vals = rng_vecs.standard_normal(k)
        ax = np.zeros(graph.m)
        np.add.at(ax, adj[support].ravel(), np.repeat(vals, d))
        ratios[t] = np.abs(ax).sum() / (d * np.abs(vals).sum())
    return ExpansionReport(
        trials=int(trials),
        min_expansion_ratio=float(min_exp),
        min_rip1_ratio=float(ratios.min()),
        max_right_degree=int(graph.right_degrees.max()),
        rip1_upper_held=bool(np.all(ratios <= 1.0 + 1e-12)),
    )


def passes_expansion_check(graph, params, trials, seed):
    """Sampled ``(k, eps)`` expansion check that stops at the first failing subset.

    Draws subsets exactly as :func:`sample_expansion` does (same stream), so a
    graph passes here iff ``sample_expansion(...).passes(eps)``.
    """
    rng = stream(seed, 0)
    bound = (1.0 - params.eps) * graph.d
    for _ in range(trials):
        s = int(rng.integers(1, params.k + 1))
        nodes = rng.choice(graph.n, size=s, replace=False)
        if np.unique(graph.adjacency[nodes]).size <= bound * s:
            return False
    return True


def write_graph(graph, path):
    """Write the text format: header ``n m d seed`` then one neighbour row per left node."""
    lines = [f"{graph.n} {graph.m} {graph.d} {graph.seed}"]
    lines.extend(" ".join(str(int(j)) for j in row) for row in graph.adjacency)
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path):
    text = Path(path).read_text().split("\n")
    n, m, d, seed = (int(tok) for tok in text[0].split())
    rows = [line.split() for line in text[1 : n + 1]]
    if len(rows) != n or any(len(r) != d for r in rows):
        raise DimensionError(f"{path}: expected {n} rows of {d} neighbours")
    adj = np.array(rows, dtype=np.int64).reshape(n, d)
    return ExpanderGraph(n, m, d, adj, seed)
