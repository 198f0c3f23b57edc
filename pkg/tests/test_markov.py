import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import k4, path3, star
from rdslab.markov import (
    WalkStuck,
    ZeroDegreeGraph,
    mixing_diagnostic,
    n_step,
    n_step_series,
    read_matrix_csv,
    simulate_walk,
    stationary,
    transition_matrix,
    two_clique_graph,
    write_matrix_csv,
)
from rdslab.netgen import Network

CLUSTERED = two_clique_graph(bridges=1)
MIXED = two_clique_graph(bridges=5)


def tv(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def walk_frequencies(net, start, steps, runs, rng):
    counts = np.zeros(net.n_nodes)
    for _ in range(runs):
        counts[simulate_walk(net, start, steps, rng)[-1]] += 1
    return counts / runs


class TestTransitionMatrix:
    def test_path(self):
        t = transition_matrix(path3()).entries
        assert np.array_equal(t, [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]])

    def test_k4(self):
        t = transition_matrix(k4()).entries
        assert np.allclose(t, (np.ones((4, 4)) - np.eye(4)) / 3)

    def test_star(self):
        t = transition_matrix(star(3)).entries
        assert np.allclose(t[0], [0, 1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(t[1:], [[1, 0, 0, 0]] * 3)

    def test_isolated_flag(self):
        tm = transition_matrix(Network.from_edges(3, 1, [(0, 1)]))
        assert tm.isolated.tolist() == [False, False, True]
        assert tm.has_isolated
        assert (tm.entries[2] == 0).all()


class TestNStep:
    def test_k1_identity(self):
        tm = transition_matrix(CLUSTERED)
        assert np.array_equal(n_step(tm, 1).entries, tm.entries)

    def test_path_two_steps(self):
        t2 = n_step(transition_matrix(path3()), 2).entries
        assert np.allclose(t2, [[0.5, 0, 0.5], [0, 1, 0], [0.5, 0, 0.5]], atol=1e-15)

    def test_converges_to_stationary(self):
        t200 = n_step(transition_matrix(MIXED), 200).entries
        p = stationary(MIXED).probs
        assert np.abs(t200 - p).max() < 1e-6

    def test_series_matches_power(self):
        tm = transition_matrix(CLUSTERED)
        series = n_step_series(tm, 9)
        assert len(series) == 9
        for k, m in enumerate(series, start=1):
            assert np.allclose(m, np.linalg.matrix_power(tm.entries, k), atol=1e-14)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            n_step(transition_matrix(path3()), 0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(4, 12), st.floats(0.3, 0.9), st.integers(1, 30), st.integers(0, 2**32 - 1))
    def test_rows_stay_stochastic(self, n, p, k, seed):
        rng = np.random.default_rng(seed)
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
        net = Network.from_edges(n, 1, pairs)
        tm = transition_matrix(net)
        live = ~tm.isolated
        assert np.allclose(tm.row_sums()[live], 1, atol=1e-12)
        assert np.allclose(n_step(tm, k).row_sums()[live], 1, atol=1e-9)


class TestStationary:
    def test_star(self):
        assert np.allclose(stationary(star(3)).probs, [0.5, 1 / 6, 1 / 6, 1 / 6])

    def test_regular(self):
        assert np.allclose(stationary(MIXED).probs, 0.1)

    def test_path(self):
        s = stationary(path3())
        assert np.allclose(s.probs, [0.25, 0.5, 0.25])
        assert s.alpha == pytest.approx(0.25)

    def test_no_edges(self):
        with pytest.raises(ZeroDegreeGraph):
            stationary(Network.from_edges(3, 1, []))

    @pytest.mark.parametrize("net", [CLUSTERED, MIXED, k4(), star(4), path3()], ids=str)
    def test_fixed_point(self, net):
        p = stationary(net).probs
        t = transition_matrix(net).entries
        assert p.sum() == pytest.approx(1, abs=1e-12)
        assert np.abs(p @ t - p).max() < 1e-10


class TestMixing:
    def test_k4_step_one(self):
        assert mixing_diagnostic(transition_matrix(k4()), 1)[0] == pytest.approx(1 / 3)

    def test_vanishes_at_limit(self):
        assert mixing_diagnostic(transition_matrix(MIXED), 200)[-1] < 1e-12

    def test_clustered_dominates_mixed(self):
        a = mixing_diagnostic(transition_matrix(CLUSTERED), 30)
        b = mixing_diagnostic(transition_matrix(MIXED), 30)
        assert a[13] > b[13]
        assert (a >= b).all()

    def test_step_nine_below_step_one(self):
        s = mixing_diagnostic(transition_matrix(CLUSTERED), 9)
        assert len(s) == 9 and s[8] < s[0]


class TestWalk:
    def test_path_single_step(self, rng):
        freq = walk_frequencies(path3(), 1, 1, 10_000, rng)
        assert freq[0] == pytest.approx(0.5, abs=0.02)
        assert freq[2] == pytest.approx(0.5, abs=0.02)

    def test_k4_uniform(self, rng):
        freq = walk_frequencies(k4(), 2, 1, 10_000, rng)
        for j in (0, 1, 3):
            assert freq[j] == pytest.approx(1 / 3, abs=0.02)
        assert freq[2] == 0

    @pytest.mark.slow
    def test_five_step_distribution(self, rng):
        runs = 100_000
        freq = walk_frequencies(CLUSTERED, 0, 5, runs, rng)
        exact = n_step(transition_matrix(CLUSTERED), 5).entries[0]
        assert tv(freq, exact) < 0.02
        assert tv(freq, exact) < 3 / np.sqrt(runs)

    def test_starts_at_start(self, rng):
        path = simulate_walk(CLUSTERED, 3, 4, rng)
        assert path[0] == 3 and len(path) == 5
        for a, b in zip(path, path[1:]):
            assert b in CLUSTERED.neighbors[a]

    def test_isolated_start(self, rng):
        with pytest.raises(WalkStuck):
            simulate_walk(Network.from_edges(3, 1, [(0, 1)]), 2, 3, rng)


def test_matrix_csv_round_trip(tmp_path):
    m = n_step(transition_matrix(CLUSTERED), 3).entries
    write_matrix_csv(m, tmp_path / "m.csv")
    assert np.array_equal(read_matrix_csv(tmp_path / "m.csv"), m)
