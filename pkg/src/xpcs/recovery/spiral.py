"""l1-penalized Poisson maximum likelihood by separable quadratic surrogates.

Minimises ``F(theta) = sum_j [mu_j - y_j log mu_j] + tau ||theta||_1`` over
``theta >= 0`` (optionally ``||theta||_1 <= L``), where ``mu = Phi theta``.
Each iteration replaces the likelihood by its second-order expansion with the
Hessian approximated by ``alpha * I``; the resulting subproblem is solved in
closed form by a shifted soft-threshold followed by projection onto the
feasible set.  ``alpha`` starts from the spectral (Barzilai-Borwein type)
curvature estimate ``||sqrt(y) (Phi s) / mu||^2 / ||s||^2`` and is increased
until the step gives sufficient decrease, so the objective is monotone.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import xlogy

from ..errors import DimensionError, DomainError, InfeasibleLikelihoodError
from ..poisson import IntensityVector
from .penalties import PenaltyModel

__all__ = [
    "RecoveryResult",
    "SolverConfig",
    "pmle_spiral_l1",
    "project_capped_simplex",
    "restricted_pmle",
]

_LOG_FLOOR = 1e-30
_ACCEPT_SIGMA = 0.1
_ALPHA_GROWTH = 2.0
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    ``step_min`` and ``step_max`` clamp the curvature ``alpha`` (the inverse of
    the gradient step length) chosen by the spectral rule.
    """

    max_iters: int = 500
    rel_obj_tol: float = 1e-9
    step_min: float = 1e-8
    step_max: float = 1e8
    l1_budget: float | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if not self.rel_obj_tol > 0:
            raise DomainError("rel_obj_tol must be positive")
        if not 0 < self.step_min <= self.step_max:
            raise DomainError("need 0 < step_min <= step_max")
        if self.l1_budget is not None and self.l1_budget < 0:
            raise DomainError("l1_budget must be nonnegative")


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    estimate: IntensityVector
    objective_trace: list = field(repr=False)
    iterations: int
    converged: bool
    elapsed: float = 0.0


def project_capped_simplex(v, budget=None):
    """Euclidean projection of ``v`` onto ``{x >= 0}`` or ``{x >= 0, sum x <= budget}``."""
    x = np.maximum(v, 0.0)
    if budget is None or x.sum() <= budget:
        return x
    # sort-based projection onto {x >= 0, sum x = budget}
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - budget
    idx = np.arange(1, u.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    shift = css[rho] / (rho + 1.0)
    return np.maximum(v - shift, 0.0)


def _objective(y, pos, mu, theta, tau):
    if np.any(mu[pos] <= 0):
        return np.inf
    return float(mu.sum() - xlogy(y[pos], mu[pos]).sum() + tau * theta.sum())


def _solve(y, phi, phi_t, tau, cfg, theta0):
    y = np.asarray(y, dtype=float)
    pos = y > 0
    colsum = np.asarray(phi_t @ np.ones(phi.shape[0])).ravel()
    if theta0 is None:
        theta = phi_t @ y
        # shrink rather than project, so every row with data keeps a source
        if cfg.l1_budget is not None and theta.sum() > cfg.l1_budget:
            theta *= cfg.l1_budget / theta.sum()
    else:
        theta = project_capped_simplex(np.asarray(theta0, dtype=float), cfg.l1_budget)
    mu = phi @ theta
    f = _objective(y, pos, mu, theta, tau)
    if not np.isfinite(f):
        raise InfeasibleLikelihoodError(
            "likelihood is zero at the starting point: a positive count has no reachable source"
        )
    trace = [f]
    alpha = 1.0
    converged = False
    it = 0
    ratio = np.zeros_like(y)
    for it in range(1, cfg.max_iters + 1):
        ratio[pos] = y[pos] / np.maximum(mu[pos], _LOG_FLOOR)
        grad = colsum - phi_t @ ratio + tau
        for _ in range(_MAX_BACKTRACKS):
            cand = project_capped_simplex(theta - grad / alpha, cfg.l1_budget)
            step = cand - theta
            step_sq = float(step @ step)
            if step_sq == 0.0:
                break
            mu_c = phi @ cand
            f_c = _objective(y, pos, mu_c, cand, tau)
            if f_c <= f - 0.5 * _ACCEPT_SIGMA * alpha * step_sq:
                break
            if alpha >= cfg.step_max:
                # no acceptable step even at the largest curvature
                step_sq = 0.0
                break
            alpha = min(alpha * _ALPHA_GROWTH, cfg.step_max)
        else:
            step_sq = 0.0
        if step_sq == 0.0:
            converged = True
            break
        dmu = mu_c - mu
        theta, mu, f_prev, f = cand, mu_c, f, f_c
        trace.append(f)
        curv = float(np.sum(y[pos] * (dmu[pos] / mu[pos]) ** 2))
        alpha = min(max(curv / step_sq, cfg.step_min), cfg.step_max)
        if abs(f_prev - f) <= cfg.rel_obj_tol * max(abs(f_prev), 1e-300):
            converged = True
            break
    return theta, trace, it, converged


def _check(y, op):
    counts = np.asarray(getattr(y, "counts", y))
    if counts.shape != (op.shape[0],):
        raise DimensionError(f"y has length {counts.shape[0] if counts.ndim else 0}, expected {op.shape[0]}")
    if np.any(counts < 0):
        raise DomainError("counts must be nonnegative")
    return counts


def _tau(penalty):
    if penalty is None:
        return 0.0
    if isinstance(penalty, PenaltyModel):
        if penalty.kind != "l1_weighted":
            raise DomainError("the continuous solver handles only the l1_weighted penalty")
        return float(penalty.tau)
    return float(penalty)


def pmle_spiral_l1(y, op, penalty=None, cfg=None, *, theta0=None):
    """l1-penalized Poisson MLE over ``theta >= 0`` with the normalized operator ``op``.

    ``penalty`` is a :class:`PenaltyModel` of kind ``l1_weighted`` or a bare
    ``tau``.  The default start is ``Phi^T y``, positive on every row that has
    data; an observation no start can explain raises
    :class:`InfeasibleLikelihoodError`.
    """
    cfg = cfg or SolverConfig()
    counts = _check(y, op)
    tau = _tau(penalty)
    start = time.perf_counter()
    theta, trace, it, conv = _solve(counts, op.matrix, op.matrix_t, tau, cfg, theta0)
    return RecoveryResult(IntensityVector(theta), trace, it, conv, time.perf_counter() - start)


def restricted_pmle(y, op, v1, penalty=None, cfg=None):
    """:func:`pmle_spiral_l1` with every coordinate outside ``v1`` held at zero.

    Counters with no neighbour in ``v1`` cannot be explained by any candidate
    and carry no information about it, so they are dropped from the
    likelihood.  That changes the objective by a constant only.
    """
    cfg = cfg or SolverConfig()
    counts = _check(y, op)
    tau = _tau(penalty)
    n = op.shape[1]
    v1 = np.unique(np.asarray(v1, dtype=np.int64))
    if v1.size and (v1[0] < 0 or v1[-1] >= n):
        raise DomainError("v1 indices out of range")
    start = time.perf_counter()
    theta = np.zeros(n)
    if v1.size == 0:
        return RecoveryResult(IntensityVector(theta), [0.0], 0, True, 0.0)
    sub = sparse.csc_matrix(op.matrix)[:, v1].tocsr()
    rows = np.flatnonzero(np.diff(sub.indptr))
    sub = sub[rows]
    part, trace, it, conv = _solve(counts[rows], sub, sub.T.tocsr(), tau, cfg, None)
    theta[v1] = part
    return RecoveryResult(IntensityVector(theta), trace, it, conv, time.perf_counter() - start)
