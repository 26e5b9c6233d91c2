"""Closed-form right-hand sides of the risk bounds, for empirical comparison."""

import math

import numpy as np

from ..errors import DomainError
from ..expander import k_term_error
from ..poisson import kl_poisson

__all__ = ["bound_theorem1", "bound_theorem2", "bound_theorem3"]


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


def bound_theorem1(op, theta_star, candidates, penalties, k, L=None):
    """KL oracle bound ``4 sigma_k(theta*) + 8 sqrt(L min_theta [KL + 2 pen])``.

    ``L`` defaults to ``||theta*||_1``.  Returns ``inf`` when every candidate
    has infinite divergence.
    """
    theta_star = _values(theta_star)
    cand = np.atleast_2d(np.asarray([_values(c) for c in candidates], dtype=float))
    if cand.shape[0] == 0:
        raise DomainError("need at least one candidate")
    pen = np.broadcast_to(np.asarray(penalties, dtype=float), (cand.shape[0],))
    L = float(theta_star.sum()) if L is None else float(L)
    g = op.matrix @ theta_star
    means = np.asarray(op.matrix @ cand.T).T
    best = min(kl_poisson(g, h) + 2.0 * p for h, p in zip(means, pen))
    if not math.isfinite(best):
        return math.inf
    return 4.0 * k_term_error(theta_star, k) + 8.0 * math.sqrt(L * best)


def bound_theorem2(op, theta_star, candidates, penalties, k, c, L=None):
    """l1 oracle bound ``4 sigma_k + 8 sqrt(L min [||theta* - theta||_1^2 / c + 2 pen])``.

    Valid when every candidate satisfies ``Phi theta >= c > 0``; that is the
    caller's responsibility (see :func:`~xpcs.recovery.penalties.satisfies_floor`).
    """
    if not c > 0:
        raise DomainError("the positivity floor c must be positive")
    theta_star = _values(theta_star)
    cand = np.atleast_2d(np.asarray([_values(x) for x in candidates], dtype=float))
    pen = np.broadcast_to(np.asarray(penalties, dtype=float), (cand.shape[0],))
    L = float(theta_star.sum()) if L is None else float(L)
    dist = np.abs(cand - theta_star[None, :]).sum(axis=1)
    best = float(np.min(dist**2 / c + 2.0 * pen))
    return 4.0 * k_term_error(theta_star, k) + 8.0 * math.sqrt(L * best)


def bound_theorem3(lambda_star, k, nu, rho):
    """Direct-estimator risk bound ``4 sigma_k(lambda*) + ||sqrt(lambda*)||_1 / sqrt(nu rho)``."""
    exposure = float(nu) * float(rho)
    if not exposure > 0:
        raise DomainError("nu * rho must be positive")
    lam = _values(lambda_star)
    return 4.0 * k_term_error(lam, k) + float(np.sqrt(lam).sum()) / math.sqrt(exposure)
