"""Equality-constrained l1 minimisation for the direct counter estimator.

Solves ``minimize ||u||_1  subject to  A u = y`` by ADMM on the splitting
``u = z``: the ``u`` step projects onto the affine set (one Cholesky solve
with ``A A^T``), the ``z`` step soft-thresholds.  Once the residuals settle,
the support of ``z`` is polished by least squares.  That gives a basic
feasible solution, i.e. an LP vertex, so sparse inputs come back exact.

ADMM converges linearly and can stall short of the tolerances when the
optimum is a dense vertex (signals with a nonzero tail).  Small problems are
therefore sent straight to the HiGHS simplex solver through
:func:`scipy.optimize.linprog`, and larger ones fall back to it when ADMM
does not certify a solution within its budget.
"""

import numpy as np
from scipy import linalg, sparse
from scipy.optimize import linprog

from ..errors import DimensionError, DomainError, SolverFailure
from ..poisson import IntensityVector

__all__ = ["direct_bp", "direct_rate_estimate"]

_DEFAULT_MAX_ITERS = 20000
# below this many matrix entries (m * n) the simplex solver is the faster route
_SIMPLEX_SIZE = 1_000_000
_RHO_BALANCE = 10.0
_RHO_FACTOR = 2.0


class _AffineProjector:
    """Projection onto ``{u : A u = y}`` via the factored Gram matrix ``A A^T``."""

    def __init__(self, a):
        self.a = a
        self.at = a.T.tocsr()
        gram = (a @ self.at).toarray()
        try:
            self._chol = linalg.cho_factor(gram, lower=True, check_finite=False)
            self._pinv = None
        except linalg.LinAlgError:
            # rank-deficient rows: fall back to a pseudo-inverse on the range
            w, v = linalg.eigh(gram)
            keep = w > w.max() * 1e-10
            self._pinv = (v[:, keep] / w[keep]) @ v[:, keep].T
            self._chol = None

    def gram_solve(self, r):
        if self._chol is not None:
            return linalg.cho_solve(self._chol, r, check_finite=False)
        return self._pinv @ r

    def __call__(self, v, y):
        return v - self.at @ self.gram_solve(self.a @ v - y)


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _polish(a, y, z, reference, feas_tol, opt_tol, ynorm):
    support = np.flatnonzero(np.abs(z) > 1e-9 * max(np.abs(z).max(), 1e-300))
    if support.size == 0 or support.size > a.shape[0]:
        return None
    sub = a[:, support].toarray()
    coef, *_ = linalg.lstsq(sub, y, check_finite=False)
    cand = np.zeros(a.shape[1])
    cand[support] = coef
    if np.abs(a @ cand - y).sum() > feas_tol * (1.0 + ynorm):
        return None
    if np.abs(cand).sum() > np.abs(reference).sum() + opt_tol * (1.0 + ynorm):
        return None
    return cand


def direct_bp(y_counts, graph, cfg=None, *, feas_tol=1e-7, opt_tol=1e-7, method="auto"):
    """Basis pursuit decoder: ``argmin ||u||_1`` subject to ``A u = y`` with ``A`` binary.

    ``method`` is ``'admm'``, ``'simplex'`` or ``'auto'`` (simplex for small
    problems, otherwise ADMM with a simplex fallback).  ``cfg`` (a
    :class:`~xpcs.recovery.spiral.SolverConfig`) only supplies the ADMM
    ``max_iters``; the default budget is 20000 iterations.  Raises
    :class:`~xpcs.errors.SolverFailure` if no solution meets the tolerances
    or ``y`` lies outside the range of ``A``.  The result may have negative
    entries.
    """
    if method not in ("auto", "admm", "simplex"):
        raise DomainError(f"unknown method {method!r}")
    if method == "simplex" or (method == "auto" and graph.m * graph.n <= _SIMPLEX_SIZE):
        return _simplex_bp(y_counts, graph, feas_tol)
    try:
        return _admm_bp(y_counts, graph, cfg, feas_tol, opt_tol)
    except SolverFailure:
        if method == "admm":
            raise
        return _simplex_bp(y_counts, graph, feas_tol)


def _simplex_bp(y_counts, graph, feas_tol):
    """Exact LP ``min 1^T (p + q)`` s.t. ``A (p - q) = y``, ``p, q >= 0``."""
    y = np.asarray(getattr(y_counts, "counts", y_counts), dtype=float)
    if y.shape != (graph.m,):
        raise DimensionError(f"y has length {y.size}, expected {graph.m}")
    n = graph.n
    ynorm = float(np.abs(y).sum())
    if ynorm == 0.0:
        return np.zeros(n)
    a = graph.csr
    res = linprog(
        np.ones(2 * n),
        A_eq=sparse.hstack([a, -a]).tocsc(),
        b_eq=y,
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise SolverFailure(f"simplex solver: {res.message}", residual=ynorm, iterations=int(res.nit))
    u = res.x[:n] - res.x[n:]
    resid = float(np.abs(a @ u - y).sum())
    if resid > feas_tol * (1.0 + ynorm):
        raise SolverFailure("simplex solution misses the constraints", residual=resid, iterations=int(res.nit))
    return u


def _admm_bp(y_counts, graph, cfg, feas_tol, opt_tol):
    y = np.asarray(getattr(y_counts, "counts", y_counts), dtype=float)
    if y.shape != (graph.m,):
        raise DimensionError(f"y has length {y.size}, expected {graph.m}")
    max_iters = _DEFAULT_MAX_ITERS if cfg is None else cfg.max_iters
    n = graph.n
    ynorm = float(np.abs(y).sum())
    if ynorm == 0.0:
        return np.zeros(n)

    deg = graph.right_degrees
    if np.any((deg == 0) & (y != 0)):
        raise SolverFailure("y has mass on a counter with no incident flows", residual=ynorm)
    live = deg > 0
    a = graph.csr[live] if not live.all() else graph.csr
    b = y[live]
    scale = ynorm / b.size
    b = b / scale
    scaled_norm = ynorm / scale

    project = _AffineProjector(a)
    x = project(np.zeros(n), b)
    if np.abs(a @ x - b).sum() > feas_tol * (1.0 + scaled_norm):
        raise SolverFailure("y is not in the range of A", residual=float(np.abs(a @ x - b).sum() * scale))
    z = _soft(x, 0.0)
    w = np.zeros(n)
    rho = 1.0
    tol = min(feas_tol, opt_tol)
    r_norm = np.inf
    for it in range(1, max_iters + 1):
        x = project(z - w, b)
        z_old = z
        z = _soft(x + w, 1.0 / rho)
        w += x - z
        r_norm = float(np.abs(x - z).sum())
        s_norm = rho * float(np.abs(z - z_old).sum())
        scale_ref = 1.0 + float(np.abs(z).sum())
        if r_norm <= tol * scale_ref and s_norm <= tol * scale_ref * rho:
            break
        if it % 10 == 0:
            if r_norm > _RHO_BALANCE * s_norm:
                rho *= _RHO_FACTOR
                w /= _RHO_FACTOR
            elif s_norm > _RHO_BALANCE * r_norm:
                rho /= _RHO_FACTOR
                w *= _RHO_FACTOR
        if it % 25 == 0:
            polished = _polish(a, b, z, x, feas_tol, opt_tol, scaled_norm)
            if polished is not None and _is_optimal(a, project, b, polished, opt_tol):
                return polished * scale
    else:
        raise SolverFailure("basis pursuit did not converge", residual=r_norm * scale, iterations=max_iters)
    polished = _polish(a, b, z, x, feas_tol, opt_tol, scaled_norm)
    return (x if polished is None else polished) * scale


def _is_optimal(a, project, b, u, opt_tol):
    """Dual certificate check: some ``nu`` with ``A^T nu`` in the subdifferential of ``||u||_1``.

    On the support ``A_S^T nu = sign(u_S)`` is solved by least squares; ``u`` is
    optimal if that system is consistent and ``|A^T nu| <= 1`` off the support.
    """
    support = np.flatnonzero(u)
    if support.size == 0:
        return True
    sub = a[:, support].toarray()
    target = np.sign(u[support])
    nu, *_ = linalg.lstsq(sub.T, target, check_finite=False)
    if np.abs(sub.T @ nu - target).max() > 1e-8:
        return False
    corr = a.T @ nu
    corr[support] = 0.0
    return bool(np.abs(corr).max() <= 1.0 + opt_tol)


def direct_rate_estimate(x_hat, nu, rho):
    """Rate estimate ``max(x_hat, 0) / (nu rho)`` from recovered cumulative counts."""
    exposure = float(nu) * float(rho)
    if not exposure > 0:
        raise DomainError("nu * rho must be positive")
    return IntensityVector(np.maximum(np.asarray(x_hat, dtype=float), 0.0) / exposure)
