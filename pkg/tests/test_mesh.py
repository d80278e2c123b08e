import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meshband import oracles
from meshband.mesh import (FeatureTable, MeshError, build_mesh_network, correlation_matrix, embed_mesh,
                           functional_neighbors, pairwise_correlation_features, raw_series_features,
                           ridge_mesh, standardize_rows, unembed)


def _ranking_oracle(m, seed, p):
    z = m - m.mean(axis=1, keepdims=True)
    corr = [(float(z[seed] @ z[s] / np.sqrt((z[seed] @ z[seed]) * (z[s] @ z[s]))), s)
            for s in range(m.shape[0]) if s != seed]
    corr.sort(key=lambda cs: (-cs[0], cs[1]))
    return [s for _, s in corr[:p]]


def test_perfect_correlation_neighbor(rng):
    m = rng.standard_normal((3, 20))
    m[1] = m[0]
    hood = functional_neighbors(m, 0, 1)
    assert hood.neighbors == (1,)
    assert hood.correlations[0] == pytest.approx(1.0)


def test_negated_region_ranks_last(rng):
    m = rng.standard_normal((5, 30))
    m[4] = -m[0]
    hood = functional_neighbors(m, 0, 3)
    assert 4 not in hood.neighbors
    assert functional_neighbors(m, 0, 4).neighbors[-1] == 4


def test_ranking_matches_oracle(rng):
    m = rng.standard_normal((6, 25))
    for seed in range(6):
        assert list(functional_neighbors(m, seed, 3).neighbors) == _ranking_oracle(m, seed, 3)


def test_ties_prefer_smaller_index(rng):
    base = rng.standard_normal(20)
    m = np.vstack([base, rng.standard_normal(20), base * 2, base * 3])
    assert functional_neighbors(m, 0, 2).neighbors == (2, 3)


def test_zero_variance_region_named(rng):
    m = rng.standard_normal((4, 10))
    m[2] = 5.0
    with pytest.raises(MeshError, match="region 2"):
        functional_neighbors(m, 0, 2)


def test_shape_preconditions(rng):
    with pytest.raises(MeshError):
        functional_neighbors(rng.standard_normal((4, 10)), 0, 4)
    with pytest.raises(MeshError):
        functional_neighbors(rng.standard_normal((4, 2)), 0, 1)


def test_exact_fit_identical_neighbor(rng):
    m = rng.standard_normal((3, 15))
    m[1] = m[0]
    w, resid = ridge_mesh(m, functional_neighbors(m, 0, 1), 0.0)
    assert w[0] == pytest.approx(1.0, abs=1e-12)
    assert resid == pytest.approx(0.0, abs=1e-20)


def test_large_lambda_shrinks(rng):
    m = standardize_rows(rng.standard_normal((6, 40)))
    hood = functional_neighbors(m, 0, 3)
    w32, _ = ridge_mesh(m, hood, 32.0)
    w_big, _ = ridge_mesh(m, hood, 1e9)
    assert np.linalg.norm(w_big) < 1e-6 < np.linalg.norm(w32)
    norms = [np.linalg.norm(ridge_mesh(m, hood, lam)[0]) for lam in (0.1, 1, 10, 100, 1e4)]
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_ridge_matches_dense_oracle():
    m = np.random.default_rng(7).standard_normal((4, 12))
    hood = functional_neighbors(m, 2, 2)
    w, resid = ridge_mesh(m, hood, 32.0)
    n = m[list(hood.neighbors)].T
    want = oracles.dense_ridge_solve(n, m[2], 32.0)
    np.testing.assert_allclose(w, want, atol=1e-9)
    assert resid == pytest.approx(np.var(m[2] - n @ want), abs=1e-12)


def test_scalar_ridge_oracle():
    assert oracles.dense_ridge_solve([[2.0]], [3.0], 1.0) == pytest.approx([6.0 / 5.0])


def test_singular_without_penalty(rng):
    m = rng.standard_normal((4, 20))
    m[2] = 2 * m[1]
    m[0] = m[1] + 0.01 * rng.standard_normal(20)
    hood = functional_neighbors(m, 0, 2)
    assert set(hood.neighbors) == {1, 2}
    with pytest.raises(MeshError, match="lambda > 0"):
        ridge_mesh(m, hood, 0.0)
    ridge_mesh(m, hood, 0.5)


def test_negative_lambda(rng):
    m = rng.standard_normal((3, 10))
    with pytest.raises(MeshError):
        ridge_mesh(m, functional_neighbors(m, 0, 1), -1.0)


def test_penalized_loss_is_local_minimum(rng):
    m = standardize_rows(rng.standard_normal((8, 50)))
    hood = functional_neighbors(m, 3, 4)
    lam = 4.0
    w, _ = ridge_mesh(m, hood, lam)
    n, y = m[list(hood.neighbors)].T, m[3]

    def loss(v):
        return np.sum((y - n @ v) ** 2) + lam * np.sum(v ** 2)

    best = loss(w)
    assert best <= loss(np.zeros_like(w))
    for _ in range(100):
        assert best <= loss(w + 0.01 * rng.standard_normal(w.size))


def test_network_in_degree_and_asymmetry(rng):
    m = rng.standard_normal((10, 60))
    net = build_mesh_network(m, 4, 1.0)
    assert np.all(np.count_nonzero(net.adjacency, axis=1) == 4)
    assert np.all(np.diag(net.adjacency) == 0)
    assert not np.allclose(net.adjacency, net.adjacency.T)
    assert net.residual_variance.shape == (10,)


def test_network_is_deterministic(rng):
    m = rng.standard_normal((8, 40))
    a = build_mesh_network(m, 3, 2.0).adjacency
    b = build_mesh_network(m.copy(), 3, 2.0).adjacency
    assert a.tobytes() == b.tobytes()


def test_duplicate_region_splits_weight(rng):
    m = rng.standard_normal((5, 80))
    m[0] = m[1] + 0.3 * rng.standard_normal(80)
    lam = 2.0
    single = build_mesh_network(m, 1, lam, standardize=False).adjacency[0, 1]
    dup = np.vstack([m, m[1:2]])
    net = build_mesh_network(dup, 2, lam, standardize=False)
    assert set(np.flatnonzero(net.adjacency[0])) == {1, 5}
    pair = net.adjacency[0, [1, 5]]
    assert pair[0] == pytest.approx(pair[1], rel=1e-10)
    want = oracles.dense_ridge_solve(dup[[1, 5]].T, dup[0], lam)
    np.testing.assert_allclose(pair, want, atol=1e-9)
    assert abs(pair[0]) < abs(single)


def test_seed_scaling_scales_incoming_weights(rng):
    m = rng.standard_normal((6, 40))
    a = build_mesh_network(m, 3, 1.0, standardize=False).adjacency
    m2 = m.copy()
    m2[2] *= 3.0
    b = build_mesh_network(m2, 3, 1.0, standardize=False).adjacency
    np.testing.assert_allclose(b[2], 3.0 * a[2], atol=1e-12)


def test_embed_row_major():
    a = np.array([[0.0, 2.0], [3.0, 0.0]])
    np.testing.assert_array_equal(embed_mesh(a), [0, 2, 3, 0])
    np.testing.assert_array_equal(embed_mesh(np.zeros((3, 3))), np.zeros(9))


@settings(max_examples=25, deadline=None)
@given(r=st.integers(1, 6), seed=st.integers(0, 1000))
def test_unembed_inverts_embed(r, seed):
    a = np.random.default_rng(seed).standard_normal((r, r))
    np.testing.assert_array_equal(unembed(embed_mesh(a)), a)


def test_correlation_features(rng):
    m = rng.standard_normal((5, 30))
    m[3] = m[1]
    f = pairwise_correlation_features(m).reshape(5, 5)
    assert f[1, 3] == pytest.approx(1.0)
    np.testing.assert_allclose(f, f.T, atol=1e-12)
    np.testing.assert_allclose(np.diag(f), 1.0)
    cov = np.cov(m, bias=True)
    sd = np.sqrt(np.diag(cov))
    np.testing.assert_allclose(f, cov / np.outer(sd, sd), atol=1e-12)


def test_raw_series_features():
    m = np.arange(12.0).reshape(2, 6)
    np.testing.assert_array_equal(raw_series_features(m, 6), m.ravel())
    padded = raw_series_features(m, 8).reshape(2, 8)
    np.testing.assert_array_equal(padded[:, 6:], 0)
    np.testing.assert_array_equal(raw_series_features(m, 4).reshape(2, 4), m[:, :4])


def test_feature_table_validation():
    with pytest.raises(ValueError):
        FeatureTable(np.zeros((2, 3)), np.zeros(3), ("a", "b"), "mesh_arcs")
    with pytest.raises(ValueError):
        FeatureTable(np.zeros((2, 3)), np.zeros(2), ("a", "b"), "wavelets")
    with pytest.raises(ValueError):
        FeatureTable(np.full((2, 3), np.inf), np.zeros(2), ("a", "b"), "mesh_arcs")


def test_correlation_matrix_is_symmetric(rng):
    c = correlation_matrix(rng.standard_normal((7, 20)))
    np.testing.assert_allclose(c, c.T, atol=1e-15)
