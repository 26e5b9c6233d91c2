"""Packet-flow rate estimation on top of the recovery solvers.

``n`` flows arrive as independent Poisson processes with rates ``lambda``;
``m`` shared counters are wired to the flows by an expander graph.  Two
counter schemes are simulated:

* direct: every counter adds every packet of each of its flows, so after
  ``nu`` updates of period ``rho`` the counters read ``A x`` with
  ``x ~ Poisson(nu rho lambda)``;
* staggered: each packet is registered by at most one counter, giving the
  independent observation ``y ~ Poisson((nu rho / m) A lambda)``.

Terminal counts are drawn from their Poisson marginals, not from arrival
events; for homogeneous processes the two are identical in law.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .expander import SensingOperator
from .poisson import IntensityVector, Observation
from .recovery.basis_pursuit import direct_bp, direct_rate_estimate
from .recovery.spiral import SolverConfig, pmle_spiral_l1, restricted_pmle
from .recovery.whales import whale_isolation
from .rng import as_generator, stream

__all__ = [
    "CounterSchedule",
    "FlowMetrics",
    "PowerLawConfig",
    "estimate_rates_direct",
    "estimate_rates_pmle",
    "evaluate",
    "gen_power_law_rates",
    "gen_sparse_signal",
    "simulate_direct_counters",
    "simulate_staggered_counters",
    "top_k",
]


@dataclass(frozen=True)
class PowerLawConfig:
    """Whales with power-law magnitudes over a half-normal minnow background.

    ``mode='profile'`` gives whale ``i`` (by rank) a magnitude proportional to
    ``i**-alpha``; ``mode='pareto'`` draws the whale magnitudes i.i.d. from a
    Pareto law with tail index ``alpha`` instead.
    """

    n: int
    k: int
    alpha: float = 1.0
    l0: float = 1.0
    minnow_sigma: float = 1e-3
    seed: int = 0
    mode: str = "profile"

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if not 0 <= self.k <= self.n:
            raise DomainError(f"k must lie in [0, n], got {self.k}")
        if not self.alpha >= 1:
            raise DomainError("alpha must be at least 1")
        if not self.l0 > 0:
            raise DomainError("l0 must be positive")
        if self.minnow_sigma < 0:
            raise DomainError("minnow_sigma must be nonnegative")
        if self.mode not in ("profile", "pareto"):
            raise DomainError(f"unknown mode {self.mode!r}")

    @property
    def expected_minnow_mass(self):
        """``E sum |N(0, sigma^2)|`` over the ``n - k`` minnows."""
        return (self.n - self.k) * self.minnow_sigma * math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class CounterSchedule:
    rho: float
    nu: int
    scheme: str = "staggered"

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if self.nu < 1:
            raise DomainError("nu must be at least 1")
        if self.scheme not in ("direct", "staggered"):
            raise DomainError(f"unknown scheme {self.scheme!r}")

    @property
    def exposure(self):
        return self.nu * self.rho


@dataclass(frozen=True)
class FlowMetrics:
    rel_l1_error: float
    support_success: bool
    wall_time: dict = field(default_factory=dict, compare=False)


def top_k(values, k):
    """Sorted indices of the ``k`` largest entries; equal values keep the lower index."""
    values = np.asarray(getattr(values, "values", values), dtype=float)
    return np.sort(np.argsort(-values, kind="stable")[: int(k)])


def gen_power_law_rates(cfg):
    """Rate vector with ``k`` power-law whales at uniform positions.

    Whale mass is ``l0`` minus the expected minnow mass, so the total is
    ``l0`` on average (exactly, when ``minnow_sigma = 0``).  Because the
    minnows are drawn independently of the whale magnitudes, ``sigma_k`` of
    the result is the realised minnow mass as long as every minnow is smaller
    than the smallest whale.
    """
    rng = stream(cfg.seed)
    whale_mass = cfg.l0 - cfg.expected_minnow_mass
    if cfg.k > 0 and whale_mass <= 0:
        raise DomainError(
            f"l0={cfg.l0} does not exceed the expected minnow mass {cfg.expected_minnow_mass:.4g}"
        )
    positions = rng.permutation(cfg.n)
    whales, minnows = positions[: cfg.k], positions[cfg.k :]
    lam = np.zeros(cfg.n)
    if cfg.k:
        if cfg.mode == "profile":
            mags = np.arange(1, cfg.k + 1, dtype=float) ** -cfg.alpha
        else:
            mags = np.sort(rng.pareto(cfg.alpha, size=cfg.k) + 1.0)[::-1]
        lam[whales] = whale_mass * mags / mags.sum()
    lam[minnows] = np.abs(rng.normal(0.0, cfg.minnow_sigma, size=minnows.size))
    return IntensityVector(lam)


def gen_sparse_signal(n, k, intensity, seed, mode="per_spike"):
    """``k`` uniform spikes, each of height ``intensity`` (``per_spike``) or
    ``intensity / k`` so the total is ``intensity`` (``total``)."""
    if not 0 <= k <= n:
        raise DomainError(f"k must lie in [0, n], got {k}")
    if mode not in ("per_spike", "total"):
        raise DomainError(f"unknown mode {mode!r}")
    theta = np.zeros(int(n))
    if k:
        support = stream(seed).choice(int(n), size=int(k), replace=False)
        theta[support] = intensity if mode == "per_spike" else intensity / k
    return IntensityVector(theta)


def _rates(lam, graph):
    lam = np.asarray(getattr(lam, "values", lam), dtype=float)
    if lam.shape != (graph.n,):
        raise DimensionError(f"rate vector has length {lam.size}, expected {graph.n}")
    return lam


def simulate_direct_counters(lam, graph, sched, rng):
    """Cumulative per-flow counts ``x`` and the counter readings ``y = A x``."""
    lam = _rates(lam, graph)
    rng = as_generator(rng)
    x = rng.poisson(sched.exposure * lam).astype(np.int64)
    y = np.bincount(graph.adjacency.ravel(), weights=np.repeat(x, graph.d), minlength=graph.m)
    return x, np.rint(y).astype(np.int64)


def simulate_staggered_counters(lam, graph, sched, rng):
    """Independent counters ``y_j ~ Poisson((nu rho / m) (A lambda)_j)``."""
    lam = _rates(lam, graph)
    rng = as_generator(rng)
    mean = (sched.exposure / graph.m) * (graph.csr @ lam)
    y = rng.poisson(mean)
    meta = {"scheme": "staggered", "exposure": sched.exposure, "m": graph.m}
    return Observation(y, meta)


def estimate_rates_pmle(y, op, penalty=None, cfg=None, sched=None, *, k=None, l0=None):
    """Staggered-counter rate estimate ``lambda_hat = m theta_hat / (nu rho d)``.

    With a whale-count hint ``k`` the solver is restricted to the flows that
    survive :func:`~xpcs.recovery.whales.whale_isolation`.  A known total
    rate ``l0`` becomes the budget ``||theta||_1 <= nu rho d l0 / m``.
    """
    if sched is None:
        raise DomainError("a CounterSchedule is required")
    graph = op.graph
    scale = graph.m / (sched.exposure * graph.d)
    cfg = cfg or SolverConfig()
    if l0 is not None:
        cfg = SolverConfig(
            max_iters=cfg.max_iters,
            rel_obj_tol=cfg.rel_obj_tol,
            step_min=cfg.step_min,
            step_max=cfg.step_max,
            l1_budget=float(l0) / scale,
        )
    if k is None:
        result = pmle_spiral_l1(y, op, penalty, cfg)
    else:
        v1 = whale_isolation(y, graph, k).v1
        result = restricted_pmle(y, op, v1, penalty, cfg)
    return IntensityVector(result.estimate.values * scale)


def estimate_rates_direct(y_counts, graph, sched, cfg=None):
    """Direct estimate: basis pursuit on ``A x = y``, then clip and divide by ``nu rho``."""
    x_hat = direct_bp(y_counts, graph, cfg)
    return direct_rate_estimate(x_hat, sched.nu, sched.rho)


def evaluate(lambda_true, lambda_hat, k, wall_time=None):
    """Relative l1 error and whether the top-``k`` support of the estimate is the true one.

    The true support is the top-``k`` set of ``lambda_true`` under the same
    tie rule.  A zero ``lambda_true`` gives error 0 if the estimate is also
    zero and ``inf`` otherwise.
    """
    lt = np.asarray(getattr(lambda_true, "values", lambda_true), dtype=float)
    lh = np.asarray(getattr(lambda_hat, "values", lambda_hat), dtype=float)
    if lt.shape != lh.shape:
        raise DimensionError(f"shapes differ: {lt.shape} vs {lh.shape}")
    diff = float(np.abs(lt - lh).sum())
    mass = float(np.abs(lt).sum())
    rel = diff / mass if mass > 0 else (0.0 if diff == 0 else math.inf)
    support = bool(np.array_equal(top_k(lt, k), top_k(lh, k)))
    return FlowMetrics(rel, support, dict(wall_time or {}))


def timed(fn, *args, **kwargs):
    """``(fn(*args, **kwargs), seconds)``."""
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start
