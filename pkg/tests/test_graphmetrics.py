import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meshband import oracles
from meshband.graphmetrics import (betweenness_centrality, global_efficiency, in_degree, node_metrics,
                                   out_degree, out_strength, shortest_paths, subband_summary,
                                   summarize_reports, total_strength)
from meshband.mesh import MeshNetwork, build_mesh_network
from meshband.wavelet import SubbandIndex


def _arc(n, arcs):
    a = np.zeros((n, n))
    for s, r, w in arcs:
        a[r, s] = w
    return a


def _digraph(gen, n, weights=(1.0, 0.5, 0.25)):
    a = gen.choice((0.0,) + tuple(weights), size=(n, n))
    np.fill_diagonal(a, 0.0)
    return a


def test_star_out_degree():
    a = _arc(4, [(0, 1, 0.5), (0, 2, 0.5), (0, 3, 0.5), (1, 0, 0.2)])
    assert out_degree(a)[0] == 3
    assert list(in_degree(a)) == [1, 1, 1, 1]


def test_out_degree_sums_to_rp(rng):
    net = build_mesh_network(rng.standard_normal((9, 40)), 3, 1.0)
    assert out_degree(net).sum() == 9 * 3
    np.testing.assert_array_equal(in_degree(net), 3)
    np.testing.assert_array_equal(out_degree(net), np.count_nonzero(net.adjacency, axis=0))


def test_out_strength_signs():
    a = _arc(3, [(0, 1, 0.7)])
    assert out_strength(a)[0] == pytest.approx(0.7)
    b = _arc(3, [(0, 1, 0.5), (0, 2, -0.5)])
    assert out_strength(b)[0] == pytest.approx(0.0)
    assert out_strength(b, absolute=True)[0] == pytest.approx(1.0)


def test_total_strength_identity(rng):
    a = rng.standard_normal((6, 6))
    assert total_strength(a) == pytest.approx(a.sum())


def test_path_betweenness():
    a = _arc(3, [(0, 1, 1.0), (1, 2, 1.0)])
    np.testing.assert_allclose(betweenness_centrality(a), [0, 1, 0])


def test_complete_graph():
    a = np.ones((5, 5)) - np.eye(5)
    np.testing.assert_allclose(betweenness_centrality(a), 0)
    assert global_efficiency(a) == pytest.approx(1.0)


def test_no_positive_arcs():
    a = -np.ones((4, 4)) + np.eye(4)
    assert global_efficiency(a) == 0.0
    np.testing.assert_array_equal(betweenness_centrality(a), 0)


def test_two_node_betweenness_zero():
    np.testing.assert_array_equal(betweenness_centrality(np.array([[0, 1.0], [1.0, 0]])), 0)


def test_tied_paths_are_split():
    # 0 -> 1 -> 3 and 0 -> 2 -> 3 have equal length
    a = _arc(4, [(0, 1, 1.0), (0, 2, 0.5), (1, 3, 0.5), (2, 3, 1.0)])
    dist, sigma = shortest_paths(a)
    assert dist[0, 3] == pytest.approx(3.0)
    assert sigma[0][3] == 2
    np.testing.assert_allclose(betweenness_centrality(a), [0, 0.5, 0.5, 0])


def test_three_cycle_distances():
    a = _arc(3, [(0, 1, 1.0), (1, 2, 0.5), (2, 0, 0.25)])
    dist, sigma, _ = oracles.allpairs_paths(a)
    assert dist[0][2] == pytest.approx(3.0)
    assert dist[2][1] == pytest.approx(5.0)
    fast, _ = shortest_paths(a)
    np.testing.assert_allclose(fast, np.array(dist, dtype=float))


def test_random_graph_matches_enumeration(rng):
    for _ in range(20):
        a = _digraph(rng, 7)
        brute = [float(v) for v in oracles.brute_betweenness(a)]
        np.testing.assert_allclose(betweenness_centrality(a), brute, atol=1e-12)


def test_random_efficiency_matches_relaxation(rng):
    for _ in range(20):
        a = _digraph(rng, 6, weights=(0.3, 0.9, 1.7, -0.4))
        assert global_efficiency(a) == pytest.approx(oracles.brute_global_efficiency(a), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.sampled_from([0.5, 2.0, 3.0, 10.0]))
def test_scaling_invariance(seed, alpha):
    a = _digraph(np.random.default_rng(seed), 6)
    np.testing.assert_allclose(betweenness_centrality(alpha * a), betweenness_centrality(a), atol=1e-9)
    d1, _ = shortest_paths(a)
    d2, _ = shortest_paths(alpha * a)
    np.testing.assert_allclose(d2, d1 / alpha)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_removing_arc_never_increases_efficiency(seed):
    gen = np.random.default_rng(seed)
    a = _digraph(gen, 6, weights=(0.2, 0.6, 1.0))
    a[1, 0] = a[0, 1] = 1.0
    # any arc except the two that pin the normalising maximum
    arcs = [(r, s) for r, s in np.argwhere(a > 0) if (r, s) not in ((1, 0), (0, 1))]
    if not arcs:
        return
    r, s = arcs[gen.integers(len(arcs))]
    b = a.copy()
    b[r, s] = 0.0
    assert global_efficiency(b) <= global_efficiency(a) + 1e-12


def test_removing_strongest_arc_can_raise_normalised_efficiency():
    a = _arc(4, [(0, 1, 1.0), (2, 3, 0.1), (3, 2, 0.1)])
    b = a.copy()
    b[1, 0] = 0.0
    assert global_efficiency(b) > global_efficiency(a)


def test_node_metrics_report(rng):
    net = build_mesh_network(rng.standard_normal((6, 30)), 2, 1.0)
    rep = node_metrics(net)
    assert np.all(rep.betweenness >= 0)
    assert 0 <= rep.global_efficiency <= 1
    assert rep.std_out_degree == pytest.approx(np.std(out_degree(net)))
    assert set(rep.as_dict()) >= {"out_degree", "betweenness", "global_efficiency"}


def test_summary_identical_networks_have_zero_spread(rng):
    net = build_mesh_network(rng.standard_normal((6, 30)), 2, 1.0)
    summary = summarize_reports([node_metrics(net)] * 3)
    np.testing.assert_array_equal(summary.out_degree_std, 0)
    assert summary.global_efficiency_std == 0


def test_summary_two_sessions_midpoint(rng):
    a, b = (build_mesh_network(rng.standard_normal((6, 30)), 2, 1.0) for _ in range(2))
    ra, rb = node_metrics(a), node_metrics(b)
    s = summarize_reports([ra, rb])
    np.testing.assert_allclose(s.out_strength, (ra.out_strength + rb.out_strength) / 2)
    np.testing.assert_allclose(s.betweenness, (ra.betweenness + rb.betweenness) / 2)


def test_summary_matches_two_pass_oracle(rng):
    reps = [node_metrics(build_mesh_network(rng.standard_normal((5, 25)), 2, 1.0)) for _ in range(6)]
    s = summarize_reports(reps)
    vals = np.array([r.out_strength for r in reps])
    mean = vals.sum(axis=0) / len(reps)
    std = np.sqrt(((vals - mean) ** 2).sum(axis=0) / len(reps))
    np.testing.assert_allclose(s.out_strength, mean, atol=1e-12)
    np.testing.assert_allclose(s.out_strength_std, std, atol=1e-12)


def test_subband_summary_groups(rng):
    nets = []
    for label in (1, 2):
        for band in ("A0", "D2"):
            for _ in range(2):
                adj = build_mesh_network(rng.standard_normal((5, 25)), 2, 1.0).adjacency
                nets.append(MeshNetwork(adj, SubbandIndex.from_label(band, 3), {"label": label}))
    groups = subband_summary(nets)
    assert set(groups) == {(1, "A0"), (1, "D2"), (2, "A0"), (2, "D2")}
    assert all(g.n_sessions == 2 for g in groups.values())


def test_empty_group():
    with pytest.raises(ValueError):
        summarize_reports([])
