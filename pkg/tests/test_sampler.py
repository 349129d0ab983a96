import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bgcn.graph import build_graph, neighbors, validate
from bgcn.sampler import (IdentitySampler, NeighborhoodRandomWalkSampler, SamplerConfig,
                          acceptance_prob, copy_probabilities, mh_step, sample_graph,
                          sample_xi, transition_matrix, walk, walk_many, xi_distribution)

from conftest import connected_graph, random_graph


def test_acceptance_prob():
    assert acceptance_prob(4, 2) == 1.0
    assert acceptance_prob(2, 4) == 0.5
    assert acceptance_prob(3, 3) == 1.0
    with pytest.raises(ValueError):
        acceptance_prob(0, 2)


def test_sampler_config_rejects_zero_steps():
    with pytest.raises(ValueError):
        SamplerConfig(walk_steps=0)


def test_mh_step_regular_graph_always_moves():
    cycle = build_graph([(i, (i + 1) % 6) for i in range(6)], 6)
    rng = np.random.default_rng(0)
    hits = [mh_step(cycle, 0, rng) for _ in range(4000)]
    assert set(hits) == {1, 5}
    assert abs(hits.count(1) / 4000 - 0.5) < 3 * np.sqrt(0.25 / 4000)


def test_mh_step_star_leaf_acceptance():
    k = 4
    star = build_graph([(0, i) for i in range(1, k + 1)], k + 1)
    rng = np.random.default_rng(1)
    n = 40000
    moved = sum(mh_step(star, 1, rng) == 0 for _ in range(n)) / n
    assert abs(moved - 1 / k) < 3 * np.sqrt((1 / k) * (1 - 1 / k) / n)


def test_mh_step_isolated_returns_current():
    assert mh_step(build_graph([], 2), 1, np.random.default_rng(0)) == 1


def test_mh_step_path3_frequencies_match_exact_matrix(path3):
    p = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])
    np.testing.assert_array_equal(transition_matrix(path3), p)
    rng = np.random.default_rng(2)
    n = 100_000
    for i in range(3):
        counts = np.bincount([mh_step(path3, i, rng) for _ in range(n)], minlength=3)
        se = np.sqrt(p[i] * (1 - p[i]) / n)
        assert np.all(np.abs(counts / n - p[i]) <= 3 * se + 1e-12)


def test_walk_isolated_start_and_bad_steps(path3):
    assert walk(build_graph([], 3), 2, 5, np.random.default_rng(0)) == 2
    with pytest.raises(ValueError):
        walk(path3, 0, 0, np.random.default_rng(0))


def test_two_node_walk_occupancy():
    # the single-edge chain is periodic, so walkers start at uniformly random nodes
    g = build_graph([(0, 1)], 2)
    starts = np.random.default_rng(5).integers(0, 2, 100_000)
    ends = walk_many(g, starts, 10, seed=5)
    assert abs(ends.mean() - 0.5) <= 0.01


@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_detailed_balance_and_uniform_stationarity(n, seed):
    g = connected_graph(np.random.default_rng(seed), n)
    p = transition_matrix(g)
    deg = g.degrees
    for i, j in g.edge_set():
        assert abs(p[i, j] - p[j, i]) <= 1e-15
        assert abs(p[i, j] - 1.0 / max(deg[i], deg[j])) <= 1e-15
    u = np.full(n, 1.0 / n)
    assert np.max(np.abs(u @ p - u)) <= 1e-12
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-15)


def test_xi_all_isolated_is_identity():
    g = build_graph([], 5)
    assert sample_xi(g, SamplerConfig(3, 0)).tolist() == list(range(5))


def test_xi_two_node_matches_exact_chain():
    g = build_graph([(0, 1)], 2)
    # every move is accepted on a single edge, so xi[0] after 1 + 1 moves is 0
    exact = xi_distribution(g, 1)[0]
    draws = np.array([sample_xi(g, SamplerConfig(1, s))[0] for s in range(10_000)])
    freq = np.bincount(draws, minlength=2) / draws.size
    se = np.sqrt(exact * (1 - exact) / draws.size)
    assert np.all(np.abs(freq - exact) <= 3 * se + 1e-12)


def test_xi_distribution_matches_empirical(karate):
    steps = 3
    exact = xi_distribution(karate, steps)
    reps = 4000
    counts = np.zeros((karate.n, karate.n))
    for s in range(reps):
        xi = sample_xi(karate, SamplerConfig(steps, s))
        counts[np.arange(karate.n), xi] += 1
    freq = counts / reps
    se = np.sqrt(exact * (1 - exact) / reps)
    # 34*34 cells: allow a handful beyond 3 SE, none beyond 5 SE
    z = np.abs(freq - exact) / np.where(se > 0, se, 1)
    assert np.all(freq[exact == 0] == 0)
    assert np.max(z) < 5.0
    assert np.mean(z > 3) < 0.01


def test_xi_reachable_and_deterministic(karate):
    cfg = SamplerConfig(10, 42)
    a = sample_xi(karate, cfg)
    assert np.array_equal(a, sample_xi(karate, cfg))
    reach = np.linalg.matrix_power(transition_matrix(karate), 11) > 0
    assert all(reach[j, a[j]] for j in range(karate.n))


def test_copy_probabilities():
    star = build_graph([(0, 1), (0, 2), (0, 3)], 4)
    gamma = copy_probabilities(star, np.array([1, 0, 2, 3]))
    assert gamma.tolist() == [1.0, 1 / 3, 1.0, 1.0]


def test_sample_graph_identity_xi_returns_g_obs(karate):
    xi = np.arange(karate.n)
    assert sample_graph(karate, xi, np.random.default_rng(0)) == karate


def test_sample_graph_high_degree_node_always_kept():
    star = build_graph([(0, 1), (0, 2), (0, 3)], 4)
    xi = np.array([1, 1, 2, 3])
    for s in range(200):
        assert sample_graph(star, xi, np.random.default_rng(s)) == star


def _oracle_graph(edges, n, xi, pattern):
    """Set-based rewrite of the copy pattern, sources read from the observed graph."""
    obs = [set() for _ in range(n)]
    for i, j in edges:
        obs[i].add(j)
        obs[j].add(i)
    adj = [set(s) for s in obs]
    for j in range(n):
        if not pattern[j]:
            continue
        for k in adj[j]:
            adj[k].discard(j)
        adj[j] = obs[xi[j]] - {j}
        for k in adj[j]:
            adj[k].add(j)
    return frozenset(frozenset((i, k)) for i in range(n) for k in adj[i])


def test_sample_graph_path4_enumeration():
    edges = [(0, 1), (1, 2), (2, 3)]
    g = build_graph(edges, 4)
    xi = [1, 1, 2, 2]
    deg = [1, 2, 2, 1]
    gamma = [min(1.0, deg[j] / deg[xi[j]]) if xi[j] != j else 1.0 for j in range(4)]
    law = {}
    for pattern in itertools.product([0, 1], repeat=4):
        prob = np.prod([gamma[j] if not c else 1 - gamma[j] for j, c in enumerate(pattern)])
        key = _oracle_graph(edges, 4, xi, pattern)
        law[key] = law.get(key, 0.0) + prob
    n = 100_000
    rng = np.random.default_rng(11)
    counts = {}
    for _ in range(n):
        out = sample_graph(g, np.array(xi), rng)
        key = frozenset(frozenset(e) for e in out.edge_set())
        counts[key] = counts.get(key, 0) + 1
    assert set(counts) <= {k for k, p in law.items() if p > 0}
    for key, p in law.items():
        se = np.sqrt(p * (1 - p) / n)
        assert abs(counts.get(key, 0) / n - p) <= 3 * se + 1e-12


@given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_sampled_graphs_are_valid(n, seed, steps):
    g = random_graph(np.random.default_rng(seed), n, 0.3)
    s = NeighborhoodRandomWalkSampler(steps)
    xi = s.sample_xi(g, seed)
    out = s.sample_graph(g, xi, seed)
    assert out.n == g.n
    validate(out)
    assert out == s.sample_graph(g, xi, seed)


def test_identity_sampler(karate):
    s = IdentitySampler()
    xi = s.sample_xi(karate, 0)
    assert s.sample_graph(karate, xi, 0) is karate


def test_karate_chi_square_uniform(karate):
    starts = np.arange(10**6) % karate.n
    ends = walk_many(karate, starts, 50, seed=2024)
    counts = np.bincount(ends, minlength=karate.n)
    _, pval = stats.chisquare(counts)
    assert pval > 0.01
