"""Experiment orchestration: sweeps, bound reports and their CSV records.

Every experiment expands its configuration into sweep points, runs ``trials``
independent trials per point and returns a :class:`SweepRecord`.  Trial
``t`` at point ``p`` draws from ``stream(seed, point_key(p), t)``, so a
point's rows do not depend on which other points are in the sweep, nor on
execution order.  Rows are sorted before they are returned.
"""

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar

from .errors import DomainError
from .expander import SensingOperator, generate_expander
from .flows import (
    CounterSchedule,
    PowerLawConfig,
    estimate_rates_direct,
    estimate_rates_pmle,
    evaluate,
    gen_power_law_rates,
    gen_sparse_signal,
    simulate_direct_counters,
    simulate_staggered_counters,
    timed,
)
from .poisson import sample_model_a, sample_model_b, total_variation
from .recovery.bounds import bound_theorem1, bound_theorem2, bound_theorem3
from .recovery.penalties import discrete_pmle
from .recovery.spiral import SolverConfig, pmle_spiral_l1
from .rng import point_key, stream

__all__ = [
    "DEFAULTS",
    "ExperimentConfig",
    "SweepRecord",
    "check_record",
    "rip1_report",
    "run_bounds_report",
    "run_experiment",
    "run_fig2_sweep",
    "run_flows_comparison",
    "run_model_equiv",
    "summarize",
    "tune_tau",
]

DEFAULTS = {
    "fig2_sweep": {
        "trials": 10,
        "params": {
            "n": 10000,
            "d": 8,
            "k_list": [50, 100],
            "intensity_list": [1e4, 1e5],
            "m_list": [100, 250, 500, 1000, 2000, 5000],
            "intensity_mode": "total",
            "log_tau_bounds": [-3.0, 3.0],
            "log_tau_xatol": 0.05,
            "max_iters": 1000,
            "rel_obj_tol": 1e-9,
            "full_scale": False,
        },
    },
    "flows_vs_k": {
        "trials": 10,
        "params": {
            "n": 5000,
            "m": 800,
            "d": 8,
            "alpha": 1.0,
            "l0": 1000.0,
            "rho": 100.0,
            "nu_list": [40],
            "k_list": [10, 30],
            "minnow_sigma": 1e-3,
            "record_timing": True,
        },
    },
    "flows_vs_nu": {
        "trials": 10,
        "params": {
            "n": 5000,
            "m": 800,
            "d": 8,
            "alpha": 1.0,
            "l0": 1000.0,
            "rho": 100.0,
            "nu_list": [10, 20, 40, 80, 200],
            "k_list": [30],
            "minnow_sigma": 1e-3,
            "record_timing": True,
        },
    },
    "rip1_report": {
        "trials": 1,
        "params": {
            "n": 2000,
            "m": 400,
            "d": 8,
            "k": 20,
            "nonneg_vectors": 10000,
            "signed_vectors": 10000,
        },
    },
    "model_equiv": {
        "trials": 1,
        "params": {"samples": 100000, "threshold": 0.02},
    },
    "bounds_report": {
        "trials": 200,
        "params": {
            "n": 64,
            "m": 32,
            "d": 4,
            "step": 0.5,
            "levels": 40,
            "floor": 0.05,
            "direct_trials": 100,
            "direct_k": 4,
            "alpha": 1.0,
            "l0": 32.0,
            "nu": 40,
            "rho": 1.0,
        },
    },
}

# Full-scale figure sweep: n = 100000 with the original sparsity and m grids.
FULL_SCALE_FIG2 = {
    "n": 100000,
    "k_list": [100, 500, 1000],
    "m_list": [100, 500, 1000, 2000, 5000, 10000, 20000],
}

_COMMON = ("experiment", "trials", "seed", "workers", "out", "params")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run.  ``params`` overrides the per-experiment defaults."""

    experiment: str
    trials: int | None = None
    seed: int = 0
    workers: int = 1
    out: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise DomainError(f"unknown experiment {self.experiment!r}; choose from {sorted(DEFAULTS)}")
        base = DEFAULTS[self.experiment]
        unknown = set(self.params) - set(base["params"])
        if unknown:
            raise DomainError(f"unknown parameters for {self.experiment}: {sorted(unknown)}")
        merged = dict(base["params"])
        merged.update(self.params)
        if merged.get("full_scale"):
            merged.update({k: v for k, v in FULL_SCALE_FIG2.items() if k not in self.params})
        object.__setattr__(self, "params", merged)
        if self.trials is None:
            object.__setattr__(self, "trials", base["trials"])
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")
        for key, value in merged.items():
            if key.endswith("_list") and not value:
                raise DomainError(f"{key} must be nonempty")

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(_COMMON)
        if unknown:
            raise DomainError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __getitem__(self, key):
        return self.params[key]


@dataclass(frozen=True)
class SweepRecord:
    """Rows of one experiment under a fixed column schema."""

    columns: tuple
    rows: list

    def __post_init__(self):
        width = len(self.columns)
        for row in self.rows:
            if len(row) != width:
                raise DomainError(f"row {row!r} does not match columns {self.columns}")

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self, path=None):
        """Serialize with ``repr`` floats; returns the text and writes ``path`` if given."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows([_fmt(v) for v in row] for row in self.rows)
        text = buf.getvalue()
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        return text


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def summarize(record, keys, metrics):
    """Per-point means of ``metrics`` grouped by the ``keys`` columns, in sorted key order."""
    groups = {}
    for row in record.rows:
        rec = dict(zip(record.columns, row))
        groups.setdefault(tuple(rec[k] for k in keys), []).append(rec)
    rows = []
    for key in sorted(groups):
        recs = groups[key]
        means = [float(np.mean([float(r[mname]) for r in recs])) for mname in metrics]
        rows.append((*key, len(recs), *means))
    return SweepRecord(tuple(keys) + ("trials",) + tuple(f"mean_{m}" for m in metrics), rows)


def _run_tasks(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def _subseed(rng):
    return int(rng.integers(0, 2**63))


# ---------------------------------------------------------------------------
# Sparse-signal phase transition


def tune_tau(y, op, theta_true, log_bounds=(-3.0, 3.0), xatol=0.05, cfg=None):
    """Oracle-assisted ``tau``: minimize the relative l1 error over ``log10 tau``.

    Uses bounded Brent search (golden-section steps with parabolic
    acceleration).  Returns ``(tau, rel_error)``.
    """
    theta_true = np.asarray(getattr(theta_true, "values", theta_true), dtype=float)
    mass = theta_true.sum()

    def err(log_tau):
        est = pmle_spiral_l1(y, op, 10.0**log_tau, cfg).estimate.values
        return float(np.abs(est - theta_true).sum() / mass)

    res = minimize_scalar(err, bounds=tuple(log_bounds), method="bounded", options={"xatol": xatol})
    return 10.0 ** float(res.x), float(res.fun)


def _fig2_task(task):
    point, trial, seed, p = task
    rng = stream(seed, point_key(point), trial)
    theta = gen_sparse_signal(p["n"], point["k"], point["intensity"], _subseed(rng), p["intensity_mode"])
    graph = generate_expander(p["n"], point["m"], p["d"], _subseed(rng))
    op = SensingOperator(graph)
    y = rng.poisson(op.matrix @ theta.values)
    cfg = SolverConfig(max_iters=p["max_iters"], rel_obj_tol=p["rel_obj_tol"])
    tau, err = tune_tau(y, op, theta, p["log_tau_bounds"], p["log_tau_xatol"], cfg)
    return (point["k"], float(point["intensity"]), p["intensity_mode"], point["m"], trial, tau, err)


def run_fig2_sweep(cfg):
    """Relative l1 error of the tuned pMLE over a (k, intensity, m) grid."""
    p = cfg.params
    tasks = [
        ({"k": k, "intensity": float(i), "m": m}, t, cfg.seed, p)
        for k in p["k_list"]
        for i in p["intensity_list"]
        for m in p["m_list"]
        for t in range(cfg.trials)
    ]
    rows = sorted(_run_tasks(_fig2_task, tasks, cfg.workers))
    return SweepRecord(("k", "intensity", "mode", "m", "trial", "tau", "rel_l1_error"), rows)


# ---------------------------------------------------------------------------
# Flow-rate estimation


def _flows_task(task):
    point, trial, seed, p = task
    rng = stream(seed, point_key(point), trial)
    k, nu = point["k"], point["nu"]
    graph = generate_expander(p["n"], p["m"], p["d"], _subseed(rng))
    op = SensingOperator(graph)
    lam = gen_power_law_rates(
        PowerLawConfig(p["n"], k, p["alpha"], p["l0"], p["minnow_sigma"], _subseed(rng))
    )
    direct = CounterSchedule(p["rho"], nu, "direct")
    staggered = CounterSchedule(p["rho"], nu, "staggered")
    _, y_direct = simulate_direct_counters(lam, graph, direct, rng)
    y_stag = simulate_staggered_counters(lam, graph, staggered, rng)
    lam_d, t_d = timed(estimate_rates_direct, y_direct, graph, direct)
    lam_p, t_p = timed(estimate_rates_pmle, y_stag, op, sched=staggered, k=k, l0=p["l0"])
    m_d = evaluate(lam, lam_d, k)
    m_p = evaluate(lam, lam_p, k)
    keep = p["record_timing"]
    return [
        (trial, "direct", "direct_bp", k, p["alpha"], nu, m_d.rel_l1_error, m_d.support_success, t_d if keep else 0.0),
        (trial, "staggered", "pmle", k, p["alpha"], nu, m_p.rel_l1_error, m_p.support_success, t_p if keep else 0.0),
    ]


FLOW_COLUMNS = ("trial", "scheme", "estimator", "k", "alpha", "nu", "rel_l1_error", "support_success", "seconds")


def run_flows_comparison(cfg):
    """Direct and pMLE estimators on fresh graphs per trial, over a k or nu sweep."""
    if cfg.experiment not in ("flows_vs_k", "flows_vs_nu"):
        raise DomainError("run_flows_comparison needs a flows_vs_k or flows_vs_nu config")
    p = cfg.params
    tasks = [
        ({"k": k, "nu": nu}, t, cfg.seed, p)
        for k in p["k_list"]
        for nu in p["nu_list"]
        for t in range(cfg.trials)
    ]
    rows = [row for chunk in _run_tasks(_flows_task, tasks, cfg.workers) for row in chunk]
    rows.sort(key=lambda r: (r[3], r[5], r[0], r[1]))
    return SweepRecord(FLOW_COLUMNS, rows)


# ---------------------------------------------------------------------------
# Operator checks


def rip1_report(cfg):
    """l1 norm preservation of ``A`` on nonnegative and signed sparse vectors."""
    p = cfg.params
    rows = []
    for trial in range(cfg.trials):
        rng = stream(cfg.seed, point_key({"rip1": p["n"], "m": p["m"], "d": p["d"]}), trial)
        graph = generate_expander(p["n"], p["m"], p["d"], _subseed(rng))
        a = graph.csr
        d = graph.d
        worst_dev = 0.0
        done = 0
        while done < p["nonneg_vectors"]:
            b = min(1000, p["nonneg_vectors"] - done)
            x = rng.random((graph.n, b))
            dev = np.abs(np.abs(a @ x).sum(axis=0) - d * x.sum(axis=0)) / (d * x.sum(axis=0))
            worst_dev = max(worst_dev, float(dev.max()))
            done += b
        k = p["k"]
        ratios = np.empty(p["signed_vectors"])
        for t in range(p["signed_vectors"]):
            support = rng.choice(graph.n, size=k, replace=False)
            vals = rng.standard_normal(k)
            ax = a[:, support] @ vals
            ratios[t] = np.abs(ax).sum() / (d * np.abs(vals).sum())
        # allow only the rounding of the two sums
        violations = int(np.count_nonzero(ratios > 1.0 + 1e-12))
        rows.append(
            (
                trial,
                graph.n,
                graph.m,
                d,
                k,
                p["nonneg_vectors"],
                worst_dev,
                p["signed_vectors"],
                float(ratios.min()),
                float(ratios.max()),
                violations,
                int(graph.right_degrees.max()),
            )
        )
    cols = (
        "trial", "n", "m", "d", "k", "nonneg_vectors", "max_nonneg_rel_dev",
        "signed_vectors", "min_rip1_ratio", "max_rip1_ratio", "upper_violations", "max_right_degree",
    )
    return SweepRecord(cols, rows)


def run_model_equiv(cfg):
    """TV distance between per-edge Poisson routing and source-then-route sampling."""
    p = cfg.params
    cases = [
        ("zero", 2, 2, 2, [0.0, 0.0]),
        ("single_cell", 1, 1, 1, [1.5]),
        ("two_by_two", 2, 2, 2, [0.5, 1.0]),
    ]
    rows = []
    for name, n, m, d, theta in cases:
        rng = stream(cfg.seed, point_key({"model_equiv": name}))
        op = SensingOperator(generate_expander(n, m, d, _subseed(rng)))
        za = sample_model_a(theta, op, rng, size=p["samples"])
        zb = sample_model_b(theta, op, rng, size=p["samples"])
        tv = total_variation(za, zb)
        rows.append((name, n, m, d, p["samples"], tv, p["threshold"], tv < p["threshold"]))
    return SweepRecord(("case", "n", "m", "d", "samples", "tv", "threshold", "passed"), rows)


# ---------------------------------------------------------------------------
# Risk bounds


def spike_candidates(n, floor, step, levels, budget):
    """``floor * 1 + q e_i`` for every position ``i`` and ``q`` in ``step * {0..levels}``,
    keeping those with l1 norm at most ``budget``.  Row 0 is the flat vector."""
    qs = step * np.arange(1, levels + 1)
    qs = qs[n * floor + qs <= budget + 1e-12]
    rows = [np.full(n, floor)]
    eye = np.eye(n)
    for q in qs:
        rows.append(floor + q * eye)
    return np.vstack([rows[0][None, :], *rows[1:]])


def _risk_configs(p):
    n = p["n"]
    floor = p["floor"]
    return [
        ("in_set", lambda rng: _spike(rng, n, floor, 16.0, 0.0), 1),
        ("off_grid", lambda rng: _spike(rng, n, floor, 16.25, 0.0), 1),
        ("two_spikes", lambda rng: _spike(rng, n, floor, 12.0, 6.0), 1),
    ]


def _spike(rng, n, floor, h1, h2):
    theta = np.full(n, floor)
    pos = rng.choice(n, size=2, replace=False)
    theta[pos[0]] += h1
    theta[pos[1]] += h2
    return theta


def run_bounds_report(cfg):
    """Empirical risks against the oracle-inequality and direct-estimator bounds.

    The discrete pMLE runs over spike candidates with the uniform penalty
    ``log |Theta|``, which meets the Kraft inequality with equality.  Every
    candidate has ``Phi theta >= c`` for ``c`` the smallest entry over the set.
    """
    p = cfg.params
    if p["n"] > 128:
        raise DomainError("bounds_report enumerates candidates; keep n <= 128")
    rows = []
    for name, draw, k in _risk_configs(p):
        rng = stream(cfg.seed, point_key({"bounds": name}))
        graph = generate_expander(p["n"], p["m"], p["d"], _subseed(rng))
        op = SensingOperator(graph)
        theta_star = draw(rng)
        L = float(theta_star.sum())
        cands = spike_candidates(p["n"], p["floor"], p["step"], p["levels"], L)
        pen = np.full(cands.shape[0], math.log(cands.shape[0]))
        c = float((op.matrix @ cands.T).min())
        errs = np.empty(cfg.trials)
        g = op.matrix @ theta_star
        for t in range(cfg.trials):
            y = stream(cfg.seed, point_key({"bounds": name}), t).poisson(g)
            idx, _ = discrete_pmle(y, op, cands, pen)
            errs[t] = np.abs(cands[idx] - theta_star).sum()
        risk = float(errs.mean())
        se = float(errs.std(ddof=1) / math.sqrt(cfg.trials))
        b1 = bound_theorem1(op, theta_star, cands, pen, k, L)
        b2 = bound_theorem2(op, theta_star, cands, pen, k, c, L) if c > 0 else math.inf
        rows.append((name, "kl_oracle", "discrete_pmle", cfg.trials, risk, se, b1, risk > b1))
        rows.append((name, "l1_oracle", "discrete_pmle", cfg.trials, risk, se, b2, risk > b2))

    # direct estimator on a power-law rate vector
    rng = stream(cfg.seed, point_key({"bounds": "direct"}))
    graph = generate_expander(p["n"], p["m"], p["d"], _subseed(rng))
    lam = gen_power_law_rates(PowerLawConfig(p["n"], p["direct_k"], p["alpha"], p["l0"], seed=_subseed(rng)))
    sched = CounterSchedule(p["rho"], p["nu"], "direct")
    errs = np.empty(p["direct_trials"])
    for t in range(p["direct_trials"]):
        _, y = simulate_direct_counters(lam, graph, sched, stream(cfg.seed, point_key({"bounds": "direct"}), t))
        est = estimate_rates_direct(y, graph, sched)
        errs[t] = np.abs(est.values - lam.values).sum()
    risk = float(errs.mean())
    se = float(errs.std(ddof=1) / math.sqrt(errs.size))
    b3 = bound_theorem3(lam, p["direct_k"], p["nu"], p["rho"])
    rows.append(("power_law", "direct", "direct_bp", errs.size, risk, se, b3, risk > b3 + 3.0 * se))
    cols = ("config", "bound", "estimator", "trials", "empirical_risk", "std_error", "bound_value", "violated")
    return SweepRecord(cols, rows)


# ---------------------------------------------------------------------------
# Embedded assertions


def _fig2_checks(record):
    means = summarize(record, ("k", "intensity", "m"), ("rel_l1_error",))
    table = {}
    for k, i, m, _, e in means.rows:
        table.setdefault((k, i), []).append((m, e))
    intensities = sorted({i for _, i in table})
    out = []
    for (k, i), curve in sorted(table.items()):
        curve.sort()
        errs = [e for _, e in curve]
        if i == intensities[-1]:
            ok = min(errs) < 0.25 and errs[0] > 0.8
            out.append((f"transition k={k} I={i:g}", ok, f"min={min(errs):.4f} at_smallest_m={errs[0]:.4f}"))
        if i == intensities[0] and len(curve) >= 3:
            j = int(np.argmin(errs))
            ok = 0 < j < len(errs) - 1
            out.append((f"interior_min k={k} I={i:g}", ok, f"argmin m={curve[j][0]} errors={[round(e, 4) for e in errs]}"))
    return out


def _flows_checks(record, experiment):
    means = summarize(record, ("k", "nu", "estimator"), ("rel_l1_error", "support_success"))
    table = {(k, nu, est): (e, s) for k, nu, est, _, e, s in means.rows}
    out = []
    if experiment == "flows_vs_k":
        for k, nu in sorted({(k, nu) for k, nu, _ in table}):
            (ep, sp), (ed, sd) = table[(k, nu, "pmle")], table[(k, nu, "direct_bp")]
            out.append((f"pmle_error<=direct k={k}", ep <= ed, f"pmle={ep:.4f} direct={ed:.4f}"))
            out.append((f"pmle_support>=direct k={k}", sp >= sd, f"pmle={sp:.2f} direct={sd:.2f}"))
    else:
        for est in ("direct_bp", "pmle"):
            nus = record.column("nu")
            errs = record.column("rel_l1_error")
            ests = record.column("estimator")
            x = [nu for nu, e in zip(nus, ests) if e == est]
            y = [err for err, e in zip(errs, ests) if e == est]
            rho, pval = stats.spearmanr(x, y)
            out.append((f"error_decreases_in_nu {est}", bool(rho < 0 and pval < 0.05), f"spearman={rho:.3f} p={pval:.2e}"))
    return out


def check_record(experiment, record):
    """``[(name, passed, detail)]`` for the assertions embedded in ``xpcs bench``."""
    if experiment == "fig2_sweep":
        return _fig2_checks(record)
    if experiment in ("flows_vs_k", "flows_vs_nu"):
        return _flows_checks(record, experiment)
    if experiment == "rip1_report":
        return [
            ("nonneg_isometry", all(v <= 1e-12 for v in record.column("max_nonneg_rel_dev")), ""),
            ("rip1_upper", all(v == 0 for v in record.column("upper_violations")), ""),
        ]
    if experiment == "model_equiv":
        return [(f"tv {c}", bool(ok), f"tv={tv:.4f}") for c, tv, ok in zip(record.column("case"), record.column("tv"), record.column("passed"))]
    if experiment == "bounds_report":
        return [
            (f"{c} {b}", not v, f"risk={r:.4f} bound={bv:.4f}")
            for c, b, r, bv, v in zip(
                record.column("config"), record.column("bound"), record.column("empirical_risk"),
                record.column("bound_value"), record.column("violated"),
            )
        ]
    raise DomainError(f"unknown experiment {experiment!r}")


_RUNNERS = {
    "fig2_sweep": run_fig2_sweep,
    "flows_vs_k": run_flows_comparison,
    "flows_vs_nu": run_flows_comparison,
    "rip1_report": rip1_report,
    "model_equiv": run_model_equiv,
    "bounds_report": run_bounds_report,
}


def run_experiment(cfg):
    return _RUNNERS[cfg.experiment](cfg)
