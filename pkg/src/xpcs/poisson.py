"""Poisson probability machinery for count observations.

Conventions: ``0 * log 0 = 0`` everywhere, and a Poisson law with mean zero
is the point mass at zero.  Samplers take an explicit ``numpy`` Generator
(see :mod:`xpcs.rng`).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import gammaln, xlogy

from .errors import DimensionError, DomainError, NormalizationError

__all__ = [
    "IntensityVector",
    "L1Estimate",
    "Observation",
    "edge_list",
    "estimate_l1_mass",
    "hellinger_l1_bound_check",
    "hellinger_sq",
    "kl_poisson",
    "neg_log_likelihood",
    "poisson_pmf",
    "sample_model_a",
    "sample_model_b",
    "sample_poisson",
    "total_variation",
]


def _nonneg(x, name="vector"):
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise DomainError(f"{name} must be finite and nonnegative")
    return x


@dataclass(frozen=True, eq=False)
class IntensityVector:
    """Nonnegative intensity (or rate) vector with its cached l1 mass."""

    values: np.ndarray
    l1_mass: float = field(init=False)

    def __post_init__(self):
        v = _nonneg(self.values, "intensity").ravel().copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "l1_mass", float(v.sum()))

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class Observation:
    """Integer count vector plus a record of how it was produced.

    ``exposure_meta`` typically carries ``scheme``, ``exposure`` (``nu * rho``)
    and ``m``.
    """

    counts: np.ndarray
    exposure_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.dtype.kind == "f":
            if np.any(c != np.round(c)):
                raise DomainError("counts must be integers")
            c = c.astype(np.int64)
        c = c.astype(np.int64, copy=True).ravel()
        if np.any(c < 0):
            raise DomainError("counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return self.counts.size

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True)
class L1Estimate:
    lower: float
    upper: float
    t: float
    eps: float
    confidence: float

    def contains(self, value):
        return self.lower <= value <= self.upper


def _counts(y):
    return np.asarray(getattr(y, "counts", y))


def poisson_pmf(lam, z):
    """``lam**z exp(-lam) / z!`` evaluated in log space; broadcasts over arrays."""
    lam = np.asarray(lam, dtype=float)
    z = np.asarray(z)
    if np.any(lam < 0) or np.any(z < 0):
        raise DomainError("poisson_pmf needs lam >= 0 and z >= 0")
    if np.any(z != np.floor(z)):
        raise DomainError("z must be an integer")
    logp = xlogy(z, lam) - lam - gammaln(z + 1.0)
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def sample_poisson(mean, rng, size=None):
    """Independent Poisson draws, one per coordinate of ``mean``.

    With ``size`` given, returns ``size + mean.shape`` draws.
    """
    mean = _nonneg(mean, "mean")
    shape = mean.shape if size is None else tuple(np.atleast_1d(size)) + mean.shape
    return rng.poisson(mean, size=shape).astype(np.int64)


def neg_log_likelihood(y, mean):
    """Poisson negative log-likelihood without the ``log y!`` constant.

    Values are only comparable between calls sharing the same ``y``.
    """
    y = _counts(y).astype(float)
    mean = np.asarray(mean, dtype=float)
    if y.shape != mean.shape:
        raise DimensionError(f"y has shape {y.shape}, mean has shape {mean.shape}")
    if np.any((mean == 0) & (y > 0)):
        return math.inf
    return float(mean.sum() - xlogy(y, mean).sum())


def kl_poisson(g, h):
    """KL divergence between product Poisson laws with means ``g`` and ``h``."""
    g = _nonneg(g, "g")
    h = _nonneg(h, "h")
    if g.shape != h.shape:
        raise DimensionError(f"g has shape {g.shape}, h has shape {h.shape}")
    if np.any((h == 0) & (g > 0)):
        return math.inf
    with np.errstate(divide="ignore"):
        terms = xlogy(g, g) - xlogy(g, h) - g + h
    return float(max(terms.sum(), 0.0))


def hellinger_sq(g, h):
    """``sum (sqrt g - sqrt h)^2``, i.e. ``-2 log`` of the Hellinger affinity."""
    g = _nonneg(g, "g")
    h = _nonneg(h, "h")
    if g.shape != h.shape:
        raise DimensionError(f"g has shape {g.shape}, h has shape {h.shape}")
    return float(np.sum((np.sqrt(g) - np.sqrt(h)) ** 2))


def hellinger_l1_bound_check(op, theta_star, theta, L):
    """Both sides of ``||Phi (theta* - theta)||_1^2 <= 4 L H^2(Phi theta*, Phi theta)``.

    ``op`` must be normalized.  Returns ``(lhs, rhs)``; the caller asserts.
    """
    theta_star = _nonneg(theta_star, "theta_star")
    theta = _nonneg(theta, "theta")
    n = op.shape[1]
    if theta_star.shape != (n,) or theta.shape != (n,):
        raise DimensionError(f"intensities must have length {n}")
    g = op.matrix @ theta_star
    h = op.matrix @ theta
    lhs = float(np.abs(g - h).sum() ** 2)
    rhs = 4.0 * float(L) * hellinger_sq(g, h)
    return lhs, rhs


def edge_list(op):
    """``(rows, cols, weights)`` of the nonzero entries of ``op`` in CSC order.

    ``op`` may be a :class:`~xpcs.expander.SensingOperator`, a sparse matrix or
    a dense array.  The order fixes the column layout of batched samples.
    """
    mat = op.matrix if hasattr(op, "matrix") else op
    csc = sparse.csc_matrix(mat)
    csc.sort_indices()
    csc.eliminate_zeros()
    coo = csc.tocoo()
    return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(float), coo.shape


def _check_stochastic(weights, cols, n):
    sums = np.bincount(cols, weights=weights, minlength=n)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise NormalizationError(f"columns must sum to 1 (max deviation {worst:.3e})")


def _as_matrix(rows, cols, values, shape):
    return sparse.csr_matrix((values, (rows, cols)), shape=shape, dtype=np.int64)


def sample_model_a(theta, op, rng, size=None):
    """Per-edge Poisson routing: ``z[j, i] ~ Poisson(Phi[j, i] theta[i])``.

    Without ``size`` returns one ``(m, n)`` sparse integer matrix ``z``; its
    row sums are the observation ``y``.  With ``size`` returns a
    ``(size, nnz)`` array of edge counts ordered as :func:`edge_list`.
    """
    theta = _nonneg(theta, "theta")
    rows, cols, w, shape = edge_list(op)
    if theta.shape != (shape[1],):
        raise DimensionError(f"theta must have length {shape[1]}")
    _check_stochastic(w, cols, shape[1])
    means = w * theta[cols]
    if size is None:
        return _as_matrix(rows, cols, rng.poisson(means), shape)
    return rng.poisson(means, size=(int(size), means.size)).astype(np.int64)


def sample_model_b(theta, op, rng, size=None):
    """Source-then-route sampling: ``w ~ Poisson(theta)``, then each ``w[i]``
    is split multinomially over column ``i`` of ``Phi``.

    Output layout matches :func:`sample_model_a`.
    """
    theta = _nonneg(theta, "theta")
    rows, cols, w, shape = edge_list(op)
    n = shape[1]
    if theta.shape != (n,):
        raise DimensionError(f"theta must have length {n}")
    _check_stochastic(w, cols, n)
    batch = 1 if size is None else int(size)
    sources = rng.poisson(theta, size=(batch, n))
    out = np.zeros((batch, w.size), dtype=np.int64)
    starts = np.searchsorted(cols, np.arange(n + 1))
    for i in range(n):
        lo, hi = starts[i], starts[i + 1]
        if hi == lo:
            continue
        p = w[lo:hi] / w[lo:hi].sum()
        if hi - lo == 1:
            out[:, lo] = sources[:, i]
        else:
            out[:, lo:hi] = rng.multinomial(sources[:, i], p)
    if size is None:
        return _as_matrix(rows, cols, out[0], shape)
    return out


def total_variation(samples_a, samples_b):
    """TV distance between the empirical laws of two sets of integer vectors (rows)."""
    a = np.asarray(samples_a)
    b = np.asarray(samples_b)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    both = np.concatenate([a, b])
    _, inverse = np.unique(both, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    k = inverse.max() + 1
    pa = np.bincount(inverse[: len(a)], minlength=k) / len(a)
    pb = np.bincount(inverse[len(a) :], minlength=k) / len(b)
    return 0.5 * float(np.abs(pa - pb).sum())


def estimate_l1_mass(y, t, eps):
    """Approximate confidence interval for ``||theta*||_1`` from the total count.

    The square root of a Poisson total is roughly normal with variance 1/4, so
    ``sqrt(sum y) +- t`` brackets ``sqrt(||Phi theta*||_1)``; the lower end
    bounds the mass from below and the upper end, divided by ``1 - 2 eps``,
    from above.  The stated confidence ``1 - exp(-2 t^2)/(sqrt(2 pi) t)`` is
    approximate.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    root = math.sqrt(float(_counts(y).sum()))
    lower = max(0.0, root - t) ** 2
    upper = (root + t) ** 2 / (1.0 - 2.0 * eps)
    confidence = 1.0 - math.exp(-2.0 * t * t) / (math.sqrt(2.0 * math.pi) * t)
    return L1Estimate(lower=lower, upper=upper, t=float(t), eps=float(eps), confidence=confidence)
