import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import star
from rdslab.markov import n_step, transition_matrix, two_clique_graph
from rdslab.netgen import Network, PopulationConfig, sample_network, solve_dyad_probabilities
from rdslab.sampler import (
    InsufficientEligibleSeeds,
    RdsSample,
    SamplingDesign,
    _draw_alters,
    read_sample_csv,
    run_rds,
    select_seeds,
    wave_census,
    write_sample_csv,
)


def sequential_pps_pairs(degrees) -> dict[frozenset, float]:
    """Exact unordered-pair probabilities of two sequential PPS draws."""
    d = np.asarray(degrees, dtype=float)
    out: dict[frozenset, float] = {}
    for a, b in itertools.permutations(range(len(d)), 2):
        p = d[a] / d.sum() * d[b] / (d.sum() - d[a])
        out[frozenset((a, b))] = out.get(frozenset((a, b)), 0) + p
    return out


def standard_net(seed=0, **kw):
    cfg = PopulationConfig(**kw)
    return sample_network(solve_dyad_probabilities(cfg), cfg, np.random.default_rng(seed))


class TestSeeds:
    def test_equal_degree_pairs(self, rng):
        exact = sequential_pps_pairs([2, 2, 2])
        assert all(v == pytest.approx(1 / 3) for v in exact.values())
        tri = Network.from_edges(3, 1, [(0, 1), (1, 2), (0, 2)])
        design = SamplingDesign(n_seeds=2, target_size=2)
        counts = Counter(frozenset(s.node for s in select_seeds(tri, design, rng)) for _ in range(6000))
        for pair, p in exact.items():
            assert counts[pair] / 6000 == pytest.approx(p, abs=0.02)

    def test_unequal_degree_pairs(self, rng):
        # path 0-1-2-3: degrees (1, 2, 2, 1)
        net = Network.from_edges(4, 1, [(0, 1), (1, 2), (2, 3)])
        exact = sequential_pps_pairs(net.degree)
        design = SamplingDesign(n_seeds=2, target_size=2)
        runs = 20_000
        counts = Counter(frozenset(s.node for s in select_seeds(net, design, rng)) for _ in range(runs))
        pairs = sorted(exact, key=sorted)
        obs = [counts[p] for p in pairs]
        exp = [exact[p] * runs for p in pairs]
        assert stats.chisquare(obs, exp).pvalue > 0.001

    def test_single_pps_draw(self, rng):
        # infected = {0 (leaf, degree 1), 1 (centre, degree 3)}
        net = Network.from_edges(4, 2, [(1, 0), (1, 2), (1, 3)])
        design = SamplingDesign(n_seeds=1, seed_policy="ppd_all_infected", target_size=1)
        picks = [select_seeds(net, design, rng)[0].node for _ in range(10_000)]
        assert np.mean(np.array(picks) == 1) == pytest.approx(0.75, abs=0.01)

    def test_all_infected_policy(self, rng):
        net = standard_net()
        seeds = select_seeds(net, SamplingDesign(n_seeds=20, seed_policy="ppd_all_infected"), rng)
        assert all(s.trait for s in seeds)
        assert len({s.node for s in seeds}) == 20
        assert all(s.wave == 0 and s.recruiter is None for s in seeds)

    def test_all_uninfected_policy(self, rng):
        seeds = select_seeds(standard_net(), SamplingDesign(n_seeds=20, seed_policy="ppd_all_uninfected"), rng)
        assert not any(s.trait for s in seeds)

    def test_zero_degree_ineligible(self, rng):
        net = Network.from_edges(4, 1, [(1, 2)])
        with pytest.raises(InsufficientEligibleSeeds):
            select_seeds(net, SamplingDesign(n_seeds=3, target_size=3), rng)
        for _ in range(50):
            assert {s.node for s in select_seeds(net, SamplingDesign(n_seeds=2, target_size=2), rng)} == {1, 2}


class TestRunRds:
    def test_star_centre_plus_two(self, rng):
        net = star(5, n_infected=1)  # centre is node 0, the only infected node
        design = SamplingDesign(n_seeds=1, seed_policy="ppd_all_infected", target_size=3)
        leaves = Counter()
        for _ in range(2000):
            s = run_rds(net, design, rng)
            assert len(s) == 3 and s.node[0] == 0
            assert len(set(s.node.tolist())) == 3
            assert s.wave.tolist() == [0, 1, 1]
            leaves.update(s.node[1:].tolist())
        assert stats.chisquare([leaves[i] for i in range(1, 6)]).pvalue > 0.001

    def test_disconnected_cliques(self, rng):
        net = two_clique_graph(bridges=0)
        design = SamplingDesign(n_seeds=2, seed_policy="ppd_all_infected", target_size=8)
        for _ in range(100):
            s = run_rds(net, design, rng)
            assert s.trait.all()
            assert s.died_out and len(s) == 5

    def test_referral_bias_weight(self, rng):
        # uninfected centre 2 with alters 0 (infected) and 1 (uninfected)
        net = Network.from_edges(3, 1, [(0, 2), (1, 2)])
        design = SamplingDesign(n_seeds=1, seed_policy="ppd_all_uninfected", target_size=2, max_coupons=1,
                                referral_bias_infected=1.2)
        hits, trials = 0, 0
        while trials < 10_000:
            s = run_rds(net, design, rng)
            if s.node[0] != 2:
                continue
            trials += 1
            hits += bool(s.trait[1])
        assert hits / trials == pytest.approx(1.2 / 2.2, abs=0.01)

    def test_weighted_draw_exact_law(self, rng):
        # Oracle: enumerate sequential weighted draws of 2 from [I, I, U].
        infected = [True, True, False]
        w = np.array([1.5, 1.5, 1.0])
        exact = {}
        for a, b in itertools.permutations(range(3), 2):
            exact[frozenset((a, b))] = exact.get(frozenset((a, b)), 0) + w[a] / w.sum() * w[b] / (w.sum() - w[a])
        u = lambda: rng.random()  # noqa: E731
        runs = 20_000
        counts = Counter(frozenset(_draw_alters([0, 1, 2], 2, 1.5, infected, u)) for _ in range(runs))
        keys = list(exact)
        assert stats.chisquare([counts[k] for k in keys], [exact[k] * runs for k in keys]).pvalue > 0.001

    def test_uniform_choice_chi_square(self, rng):
        net = star(6, n_infected=1)
        design = SamplingDesign(n_seeds=1, seed_policy="ppd_all_infected", target_size=2, max_coupons=1)
        c = Counter(int(run_rds(net, design, rng).node[1]) for _ in range(10_000))
        assert stats.chisquare([c[i] for i in range(1, 7)]).pvalue > 0.001

    def test_with_replacement_is_random_walk(self, rng):
        # 1 seed, 1 coupon, with replacement: draw k is step k of a walk from the seed.
        net = two_clique_graph(bridges=2)
        net = Network(net.n_nodes, 1, net.edges)  # seed forced to node 0
        k = 4
        design = SamplingDesign(n_seeds=1, seed_policy="ppd_all_infected", target_size=k + 1, max_coupons=1,
                                replacement="with")
        runs = 10_000
        freq = np.bincount([int(run_rds(net, design, rng).node[k]) for _ in range(runs)], minlength=10) / runs
        exact = n_step(transition_matrix(net), k).entries[0]
        assert 0.5 * np.abs(freq - exact).sum() < 0.03

    def test_target_reached_mid_wave(self, rng):
        s = run_rds(standard_net(1), SamplingDesign(), rng)
        assert len(s) == 500 and not s.died_out
        assert s.truncated_wave == s.wave.max()
        assert np.bincount(s.wave)[0] == 10

    def test_with_replacement_duplicates(self, rng):
        s = run_rds(standard_net(2), SamplingDesign(n_seeds=6, replacement="with"), rng)
        assert len(s) == 500
        assert len(set(s.node.tolist())) < 500

    def test_seeds_equal_target(self, rng):
        s = run_rds(standard_net(3), SamplingDesign(n_seeds=10, target_size=10), rng)
        assert len(s) == 10 and (s.wave == 0).all() and s.truncated_wave == 0


def check_sample(net: Network, design: SamplingDesign, s: RdsSample):
    n = len(s)
    assert n <= design.target_size
    if not s.died_out:
        assert n == design.target_size
    if design.replacement == "without":
        assert len(set(s.node.tolist())) == n
    seeds = s.wave == 0
    assert seeds.sum() == design.n_seeds
    assert (s.recruiter[seeds] == -1).all() and (s.recruiter_draw[seeds] == -1).all()
    rd = s.recruiter_draw[~seeds]
    idx = np.flatnonzero(~seeds)
    assert (rd < idx).all()
    assert (s.wave[rd] == s.wave[~seeds] - 1).all()
    assert (s.node[rd] == s.recruiter[~seeds]).all()
    assert (np.diff(s.wave) >= 0).all()
    assert np.bincount(rd, minlength=n).max(initial=0) <= design.max_coupons
    assert (s.reported_degree >= 1).all()
    assert (s.reported_degree == net.degree[s.node]).all()
    assert (s.trait == net.infected[s.node]).all()
    for a, b in zip(s.recruiter[~seeds], s.node[~seeds]):
        assert b in net.neighbors[a]


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(8, 60),
    density=st.floats(0.05, 0.5),
    n_seeds=st.integers(1, 4),
    coupons=st.integers(1, 3),
    target=st.integers(4, 40),
    replacement=st.sampled_from(["with", "without"]),
    bias=st.sampled_from([1.0, 1.2, 3.0]),
    seed=st.integers(0, 2**32 - 1),
)
def test_sampler_invariants(n, density, n_seeds, coupons, target, replacement, bias, seed):
    rng = np.random.default_rng(seed)
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < density]
    net = Network.from_edges(n, max(1, n // 4), pairs)
    if (net.degree > 0).sum() < n_seeds:
        return
    design = SamplingDesign(n_seeds=n_seeds, max_coupons=coupons, target_size=max(target, n_seeds),
                            replacement=replacement, referral_bias_infected=bias)
    check_sample(net, design, run_rds(net, design, rng))


class TestWaveCensus:
    def test_seeds_only(self, rng):
        net = standard_net()
        s = run_rds(net, SamplingDesign(n_seeds=10, target_size=10, seed_policy="ppd_all_infected"), rng)
        c = wave_census(s)
        assert len(c) == 1 and c[0].count == 10 and c[0].infected_proportion == 1.0

    def test_counts_sum_and_branching_bound(self, rng):
        net = standard_net(4)
        design = SamplingDesign()
        s = run_rds(net, design, rng)
        c = wave_census(s)
        assert sum(w.count for w in c) == len(s)
        for w in c:
            assert w.count <= design.n_seeds * design.max_coupons ** w.wave


def test_csv_round_trip(tmp_path, rng):
    s = run_rds(standard_net(5), SamplingDesign(), rng)
    write_sample_csv(s, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "draw_index,node,wave,recruiter,reported_degree,trait"
    assert lines[1].split(",")[3] == "-1"
    back = read_sample_csv(tmp_path / "s.csv")
    for col in ("node", "wave", "recruiter", "recruiter_draw", "reported_degree", "trait"):
        assert np.array_equal(getattr(back, col), getattr(s, col)), col


def test_records_view(rng):
    s = run_rds(standard_net(6), SamplingDesign(target_size=30), rng)
    recs = s.records
    assert [r.draw_index for r in recs] == list(range(30))
    assert all((r.recruiter is None) == (r.wave == 0) for r in recs)
    back = RdsSample.from_records(recs)
    assert np.array_equal(back.recruiter_draw, s.recruiter_draw)
