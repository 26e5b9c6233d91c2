import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_adjacency
from xpcs.errors import DimensionError, DomainError, InvalidDegreeError
from xpcs.expander import (
    ExpanderGraph,
    ExpansionParams,
    SensingOperator,
    apply,
    apply_transpose,
    generate_expander,
    k_term_error,
    passes_expansion_check,
    read_graph,
    sample_expansion,
    write_graph,
)

# hand-built 4x4 fixture, neighbours of each left node
FIXTURE = np.array([[0, 1], [1, 2], [2, 3], [0, 3]])


def fixture_graph():
    return ExpanderGraph(4, 4, 2, FIXTURE, seed=0)


class TestGenerate:
    def test_flow_experiment_size(self):
        g = generate_expander(5000, 800, 8, seed=1)
        assert g.adjacency.shape == (5000, 8)
        assert g.edges == 40000
        assert np.all(np.diff(g.adjacency, axis=1) > 0)
        assert g.adjacency.min() >= 0 and g.adjacency.max() < 800

    def test_single_edge(self):
        g = generate_expander(1, 1, 1, seed=0)
        np.testing.assert_array_equal(g.adjacency, [[0]])

    def test_complete_when_d_equals_m(self):
        g = generate_expander(4, 4, 4, seed=7)
        np.testing.assert_array_equal(g.adjacency, np.tile(np.arange(4), (4, 1)))

    def test_deterministic(self):
        a = generate_expander(300, 50, 6, seed=123)
        b = generate_expander(300, 50, 6, seed=123)
        assert a == b
        assert a != generate_expander(300, 50, 6, seed=124)

    @pytest.mark.parametrize("n,m,d", [(10, 5, 6), (10, 5, 0)])
    def test_bad_degree(self, n, m, d):
        with pytest.raises(InvalidDegreeError):
            generate_expander(n, m, d, seed=0)

    @pytest.mark.parametrize("n,m", [(0, 5), (5, 0)])
    def test_bad_dimension(self, n, m):
        with pytest.raises(DimensionError):
            generate_expander(n, m, 1, seed=0)

    def test_dense_branch_is_regular(self):
        # 2d > m goes through the permutation construction
        g = generate_expander(200, 10, 7, seed=3)
        assert all(len(set(row)) == 7 for row in g.adjacency.tolist())

    def test_neighbours_roughly_uniform(self):
        g = generate_expander(20000, 40, 4, seed=5)
        counts = g.right_degrees
        expected = 20000 * 4 / 40
        # each right degree is Binomial(20000, 0.1)
        assert np.all(np.abs(counts - expected) < 6 * np.sqrt(expected * 0.9))

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(1, 60),
        m=st.integers(1, 30),
        d=st.integers(1, 30),
        seed=st.integers(0, 2**64 - 1),
    )
    def test_left_regular_property(self, n, m, d, seed):
        if d > m:
            with pytest.raises(InvalidDegreeError):
                generate_expander(n, m, d, seed)
            return
        g = generate_expander(n, m, d, seed)
        assert g.adjacency.shape == (n, d)
        assert all(len(set(row)) == d for row in g.adjacency.tolist())
        assert g.edges == n * d


class TestGraphType:
    def test_rejects_unsorted(self):
        with pytest.raises(DomainError):
            ExpanderGraph(2, 4, 2, np.array([[1, 0], [2, 3]]))

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            ExpanderGraph(1, 3, 2, np.array([[0, 3]]))

    def test_adjacency_read_only(self):
        g = fixture_graph()
        with pytest.raises(ValueError):
            g.adjacency[0, 0] = 3

    def test_neighbors(self):
        np.testing.assert_array_equal(fixture_graph().neighbors([0, 1]), [0, 1, 2])

    def test_file_round_trip(self, tmp_path):
        g = generate_expander(30, 12, 3, seed=99)
        path = tmp_path / "g.txt"
        write_graph(g, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "30 12 3 99"
        assert lines[1] == " ".join(map(str, g.adjacency[0]))
        assert read_graph(path) == g

    def test_read_rejects_short_file(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("3 4 2 0\n0 1\n")
        with pytest.raises(DimensionError):
            read_graph(path)


class TestApply:
    def test_unit_vector(self):
        g = generate_expander(50, 20, 4, seed=2)
        out = apply(SensingOperator(g, normalized=False), np.eye(50)[7])
        expected = np.zeros(20)
        expected[g.adjacency[7]] = 1.0
        np.testing.assert_array_equal(out, expected)

    def test_normalized_preserves_mass(self):
        g = generate_expander(80, 30, 5, seed=4)
        x = np.random.default_rng(0).random(80)
        assert apply(SensingOperator(g), x).sum() == pytest.approx(x.sum(), rel=1e-14)

    def test_fixture_dense_oracle(self):
        out = apply(SensingOperator(fixture_graph(), normalized=False), [1, 2, 0, 0])
        np.testing.assert_array_equal(out, [1.0, 3.0, 2.0, 0.0])

    def test_transpose_all_ones(self):
        g = generate_expander(40, 10, 3, seed=8)
        np.testing.assert_array_equal(apply_transpose(SensingOperator(g, normalized=False), np.ones(10)), 3.0)

    def test_transpose_unit(self):
        g = generate_expander(40, 10, 3, seed=8)
        out = apply_transpose(SensingOperator(g, normalized=False), np.eye(10)[4])
        np.testing.assert_array_equal(out, (g.adjacency == 4).any(axis=1).astype(float))

    def test_transpose_fixture_dense_oracle(self):
        out = apply_transpose(SensingOperator(fixture_graph(), normalized=False), [1, 0, 2, 0])
        np.testing.assert_array_equal(out, [1.0, 2.0, 2.0, 1.0])

    def test_length_mismatch(self):
        op = SensingOperator(fixture_graph())
        with pytest.raises(DimensionError):
            apply(op, np.ones(3))
        with pytest.raises(DimensionError):
            apply_transpose(op, np.ones(5))

    def test_column_sums(self):
        g = generate_expander(60, 25, 6, seed=1)
        np.testing.assert_allclose(SensingOperator(g).column_sums(), 1.0, rtol=1e-15)
        np.testing.assert_array_equal(SensingOperator(g, normalized=False).column_sums(), 6.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32), n=st.integers(1, 8), m=st.integers(1, 8))
    def test_matches_dense_oracle(self, seed, n, m):
        d = 1 + seed % m
        g = generate_expander(n, m, d, seed)
        rng = np.random.default_rng(seed)
        dense = dense_adjacency(g.adjacency, m)
        op = SensingOperator(g, normalized=False)
        x = rng.integers(-5, 6, n).astype(float)
        v = rng.integers(-5, 6, m).astype(float)
        np.testing.assert_array_equal(apply(op, x), dense @ x)
        np.testing.assert_array_equal(apply_transpose(op, v), dense.T @ v)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32))
    def test_adjoint(self, seed):
        rng = np.random.default_rng(seed)
        g = generate_expander(120, 40, 5, seed)
        op = SensingOperator(g)
        x, v = rng.standard_normal(120), rng.standard_normal(40)
        lhs, rhs = apply(op, x) @ v, x @ apply_transpose(op, v)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32))
    def test_l1_isometry_and_upper_bound(self, seed):
        rng = np.random.default_rng(seed)
        g = generate_expander(200, 50, 6, seed)
        op = SensingOperator(g, normalized=False)
        xpos = rng.random(200)
        assert np.abs(apply(op, xpos)).sum() == pytest.approx(6 * xpos.sum(), rel=1e-12)
        x = rng.standard_normal(200) * (rng.random(200) < 0.1)
        assert np.abs(apply(op, x)).sum() <= 6 * np.abs(x).sum() * (1 + 1e-12)


class TestKTermError:
    def test_example(self):
        # every single-coordinate support: keeping 3 leaves 1 + 2
        u = np.array([3.0, 1.0, 2.0])
        best = min(np.abs(np.delete(u, i)).sum() for i in range(3))
        assert k_term_error(u, 1) == best == 3.0

    def test_full_support(self):
        assert k_term_error(np.array([1.0, -4.0, 2.0]), 3) == 0.0

    def test_zero(self):
        assert k_term_error(np.zeros(5), 2) == 0.0

    def test_ties_keep_lower_index(self):
        # the value is the same either way; the order is what is pinned
        assert k_term_error(np.array([1.0, -1.0, 1.0]), 1) == 2.0

    def test_bad_k(self):
        with pytest.raises(DomainError):
            k_term_error(np.ones(3), 4)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.integers(0, 8))
    def test_matches_exhaustive(self, values, k):
        import itertools

        u = np.array(values)
        k = min(k, u.size)
        best = min(
            np.abs(np.delete(u, list(s))).sum() for s in itertools.combinations(range(u.size), k)
        )
        assert k_term_error(u, k) == pytest.approx(best, abs=1e-9)


class TestExpansion:
    def test_singletons_expand_fully(self):
        g = generate_expander(100, 40, 5, seed=0)
        report = sample_expansion(g, ExpansionParams(1), trials=50, seed=1)
        assert report.min_expansion_ratio == 1.0

    def test_nonnegative_ratio_one(self):
        g = generate_expander(100, 40, 5, seed=0)
        x = np.random.default_rng(0).random(100)
        a = g.csr
        assert np.abs(a @ x).sum() / (5 * x.sum()) == pytest.approx(1.0, abs=1e-14)

    def test_complete_graph_cancels(self):
        # x = [1, -1, 0, 0] on the complete graph maps to zero
        g = generate_expander(4, 4, 4, seed=7)
        x = np.array([1.0, -1.0, 0.0, 0.0])
        assert np.abs(apply(SensingOperator(g, normalized=False), x)).sum() / (4 * 2.0) == 0.0

    def test_report_fields(self):
        g = generate_expander(300, 60, 6, seed=9)
        rep = sample_expansion(g, ExpansionParams(5), trials=200, seed=2)
        assert rep.trials == 200
        assert 0.0 <= rep.min_rip1_ratio <= 1.0
        assert 0.0 < rep.min_expansion_ratio <= 1.0
        assert rep.rip1_upper_held
        assert rep.max_right_degree == g.right_degrees.max() <= 300
        assert rep.csv_row().split(",")[0] == "200"

    def test_check_agrees_with_report(self):
        params = ExpansionParams(4, 1 / 16)
        for seed in range(30):
            g = generate_expander(80, 60, 4, seed)
            rep = sample_expansion(g, params, trials=20, seed=seed)
            assert passes_expansion_check(g, params, 20, seed) == rep.passes(params.eps)

    def test_k_too_large(self):
        g = generate_expander(10, 5, 2, seed=0)
        with pytest.raises(DomainError):
            sample_expansion(g, ExpansionParams(6), trials=5, seed=0)

    @pytest.mark.parametrize("k,eps", [(0, 0.1), (2, 0.0), (2, 1.0)])
    def test_params_validation(self, k, eps):
        with pytest.raises(DomainError):
            ExpansionParams(k, eps)
