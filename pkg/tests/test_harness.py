import json

import numpy as np
import pytest

from xpcs import cli
from xpcs.errors import DomainError
from xpcs.expander import SensingOperator, generate_expander, read_graph
from xpcs.harness import (
    DEFAULTS,
    ExperimentConfig,
    SweepRecord,
    check_record,
    rip1_report,
    run_bounds_report,
    run_experiment,
    run_fig2_sweep,
    run_flows_comparison,
    run_model_equiv,
    summarize,
    tune_tau,
)
from xpcs.recovery import pmle_spiral_l1
from xpcs.rng import stream

SMALL_FIG2 = {
    "n": 300,
    "d": 4,
    "k_list": [3],
    "intensity_list": [1e3],
    "m_list": [40, 120],
    "max_iters": 200,
}
SMALL_FLOWS = {"n": 400, "m": 120, "d": 4, "l0": 100.0, "rho": 10.0, "nu_list": [10], "k_list": [3]}


class TestConfig:
    def test_defaults_merged(self):
        cfg = ExperimentConfig("fig2_sweep", params={"n": 500})
        assert cfg.trials == 10
        assert cfg["n"] == 500
        assert cfg["d"] == 8

    def test_full_scale(self):
        cfg = ExperimentConfig("fig2_sweep", params={"full_scale": True})
        assert cfg["n"] == 100000
        assert cfg["k_list"] == [100, 500, 1000]

    def test_rejects_unknown(self):
        with pytest.raises(DomainError):
            ExperimentConfig("fig3")
        with pytest.raises(DomainError):
            ExperimentConfig("fig2_sweep", params={"nn": 1})
        with pytest.raises(DomainError):
            ExperimentConfig.from_dict({"experiment": "fig2_sweep", "trails": 3})
        with pytest.raises(DomainError):
            ExperimentConfig("fig2_sweep", params={"m_list": []})

    def test_load(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "model_equiv", "seed": 3, "params": {"samples": 10}}))
        cfg = ExperimentConfig.load(path)
        assert cfg.seed == 3 and cfg["samples"] == 10 and cfg["threshold"] == 0.02


class TestRecord:
    def test_csv_format(self):
        rec = SweepRecord(("a", "b", "c"), [(1, 0.1, True), (np.int64(2), np.float64(1 / 3), False)])
        assert rec.to_csv() == "a,b,c\n1,0.1,1\n2,0.3333333333333333,0\n"

    def test_width_check(self):
        with pytest.raises(DomainError):
            SweepRecord(("a",), [(1, 2)])

    def test_summarize(self):
        rec = SweepRecord(("k", "err"), [(2, 1.0), (1, 4.0), (2, 3.0)])
        out = summarize(rec, ("k",), ("err",))
        assert out.columns == ("k", "trials", "mean_err")
        assert out.rows == [(1, 1, 4.0), (2, 2, 2.0)]


class TestTuneTau:
    def test_finds_good_tau(self):
        g = generate_expander(200, 80, 4, seed=0)
        op = SensingOperator(g)
        theta = np.zeros(200)
        theta[[1, 2, 3]] = 500.0
        y = stream(0).poisson(op.matrix @ theta)
        tau, err = tune_tau(y, op, theta)
        assert 1e-3 <= tau <= 1e3
        grid = [
            np.abs(pmle_spiral_l1(y, op, 10.0**lt).estimate.values - theta).sum() / theta.sum()
            for lt in np.linspace(-3, 3, 61)
        ]
        # search tolerance is 0.05 decades, the grid spacing 0.1
        assert err <= min(grid) * 1.01 + 1e-9


class TestExperiments:
    def test_fig2_schema_and_reproducible(self):
        cfg = ExperimentConfig("fig2_sweep", trials=2, params=SMALL_FIG2)
        a = run_fig2_sweep(cfg)
        assert a.columns == ("k", "intensity", "mode", "m", "trial", "tau", "rel_l1_error")
        assert len(a) == 4
        assert a.to_csv() == run_fig2_sweep(cfg).to_csv()

    def test_fig2_point_independent_of_grid(self):
        full = run_fig2_sweep(ExperimentConfig("fig2_sweep", trials=1, params=SMALL_FIG2))
        only = run_fig2_sweep(ExperimentConfig("fig2_sweep", trials=1, params={**SMALL_FIG2, "m_list": [120]}))
        assert only.rows == [r for r in full.rows if r[3] == 120]

    def test_fig2_checks(self):
        rec = run_fig2_sweep(ExperimentConfig("fig2_sweep", trials=1, params=SMALL_FIG2))
        names = [name for name, _, _ in check_record("fig2_sweep", rec)]
        assert names == ["transition k=3 I=1000"]

    def test_flows(self):
        cfg = ExperimentConfig("flows_vs_k", trials=2, params={**SMALL_FLOWS, "record_timing": False})
        rec = run_flows_comparison(cfg)
        assert len(rec) == 4
        assert set(rec.column("seconds")) == {0.0}
        assert rec.to_csv() == run_flows_comparison(cfg).to_csv()
        assert [n for n, _, _ in check_record("flows_vs_k", rec)] == [
            "pmle_error<=direct k=3",
            "pmle_support>=direct k=3",
        ]

    def test_flows_parallel_matches_serial(self):
        params = {**SMALL_FLOWS, "record_timing": False}
        serial = run_flows_comparison(ExperimentConfig("flows_vs_k", trials=2, params=params))
        parallel = run_flows_comparison(ExperimentConfig("flows_vs_k", trials=2, workers=2, params=params))
        assert serial.rows == parallel.rows

    def test_flows_rejects_other_experiment(self):
        with pytest.raises(DomainError):
            run_flows_comparison(ExperimentConfig("model_equiv"))

    def test_rip1_small(self):
        cfg = ExperimentConfig(
            "rip1_report", params={"n": 200, "m": 60, "d": 4, "k": 5, "nonneg_vectors": 50, "signed_vectors": 50}
        )
        rec = rip1_report(cfg)
        assert len(rec) == 1
        assert all(ok for _, ok, _ in check_record("rip1_report", rec))

    def test_model_equiv_small(self):
        rec = run_model_equiv(ExperimentConfig("model_equiv", params={"samples": 2000, "threshold": 0.2}))
        assert rec.column("case") == ["zero", "single_cell", "two_by_two"]
        assert rec.column("tv")[0] == 0.0

    def test_bounds_small(self):
        rec = run_bounds_report(ExperimentConfig("bounds_report", trials=5, params={"direct_trials": 3}))
        assert len(rec) == 7
        assert rec.column("bound")[-1] == "direct"

    def test_bounds_rejects_large_n(self):
        with pytest.raises(DomainError):
            run_bounds_report(ExperimentConfig("bounds_report", params={"n": 1000}))

    def test_dispatch(self):
        rec = run_experiment(ExperimentConfig("model_equiv", params={"samples": 100}))
        assert len(rec) == 3
        with pytest.raises(DomainError):
            check_record("nope", rec)

    def test_every_default_is_valid(self):
        for name in DEFAULTS:
            ExperimentConfig(name)


class TestCli:
    def test_graph_check_recover_whales(self, tmp_path, capsys):
        gpath = tmp_path / "g.txt"
        assert cli.main(["gen-graph", "--n", "60", "--m", "24", "--d", "3", "--seed", "4", "--out", str(gpath)]) == 0
        g = read_graph(gpath)
        assert g == generate_expander(60, 24, 3, 4)

        assert cli.main(["check", "--graph", str(gpath), "--k", "2", "--trials", "20"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "trials,min_expansion,min_rip1,max_right_degree"
        assert lines[1].split(",")[0] == "20"

        theta = np.zeros(60)
        theta[[3, 40]] = 200.0
        y = stream(0).poisson(SensingOperator(g).matrix @ theta)
        ypath = tmp_path / "y.txt"
        ypath.write_text(",".join(map(str, y)) + "\n")
        out = tmp_path / "est.txt"
        assert cli.main(["recover", "--graph", str(gpath), "--y", str(ypath), "--tau", "0.01", "--out", str(out)]) == 0
        est = np.array([float(v) for v in out.read_text().split()])
        assert est.shape == (60,)
        np.testing.assert_array_equal(np.sort(np.argsort(-est)[:2]), [3, 40])

        capsys.readouterr()
        assert cli.main(["whales", "--graph", str(gpath), "--y", str(ypath), "--k", "2"]) == 0
        v1 = [int(v) for v in capsys.readouterr().out.strip().split(",")]
        assert {3, 40} <= set(v1)

    def test_read_counts(self, tmp_path):
        path = tmp_path / "y.txt"
        path.write_text("1, 2\n3 4\n")
        np.testing.assert_array_equal(cli.read_counts(path), [1, 2, 3, 4])
        path.write_text("1.5\n")
        with pytest.raises(ValueError):
            cli.read_counts(path)

    def test_bad_input_exit_code(self, tmp_path, capsys):
        gpath = tmp_path / "g.txt"
        cli.main(["gen-graph", "--n", "6", "--m", "4", "--d", "2", "--out", str(gpath)])
        ypath = tmp_path / "y.txt"
        ypath.write_text("1 2 3\n")
        assert cli.main(["recover", "--graph", str(gpath), "--y", str(ypath), "--out", str(tmp_path / "o")]) == 2
        assert "error" in capsys.readouterr().err
        assert cli.main(["gen-graph", "--n", "6", "--m", "4", "--d", "5", "--out", str(gpath)]) == 2

    def test_flows_stdout(self, capsys):
        argv = ["flows", "--n", "400", "--m", "120", "--d", "4", "--k", "3", "--l0", "100", "--rho", "10",
                "--nu", "10", "--trials", "1", "--scheme", "staggered"]
        assert cli.main(argv) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("trial,scheme,estimator")
        assert len(lines) == 2 and lines[1].split(",")[1] == "staggered"

    def test_bench(self, tmp_path, capsys):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"experiment": "model_equiv", "params": {"samples": 20000}}))
        code = cli.main(["bench", "model_equiv", "--config", str(conf), "--out", str(tmp_path)])
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 3 and all(line.startswith(("PASS", "FAIL")) for line in out)
        assert code == (0 if all(line.startswith("PASS") for line in out) else 1)
        assert (tmp_path / "model_equiv.csv").read_text().startswith("case,n,m,d,samples,tv")

    def test_bench_config_mismatch(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"experiment": "model_equiv"}))
        assert cli.main(["bench", "rip1_report", "--config", str(conf)]) == 2
