import math
import warnings

import numpy as np
import pytest

from meshband.analysis import (OracleMatrix, diversity_report, membership_significance,
                               nonpairwise_diversity, oracle_outputs, pairwise_diversity,
                               pooled_t, printed_statistic)
from meshband.learn import decision_space_from_blocks
from meshband.oracles import pair_contingency


def _slow_nonpairwise(m):
    n, e = m.shape
    entropy = kw = 0.0
    for row in m:
        k = int(sum(row))
        entropy += min(k, e - k) / (e - math.ceil(e / 2))
        kw += k * (e - k)
    p = m.mean()
    kappa = 1 - (kw / e) / (n * (e - 1) * p * (1 - p))
    theta = np.mean([(sum(r) / e - m.sum(axis=1).mean() / e) ** 2 for r in m])
    return entropy / n, kappa, kw / (n * e * e), theta


def test_oracle_rule():
    memberships = np.array([[0.51, 0.49, 0.2, 0.8],
                            [0.3, 0.7, 0.5, 0.5],
                            [0.9, 0.1, 0.1, 0.9]])
    o = oracle_outputs(memberships, labels=[0, 1, 1], n_classes=2)
    np.testing.assert_array_equal(o.matrix, [[1, 0], [1, 0], [0, 1]])


def test_uniform_memberships_never_correct():
    space = decision_space_from_blocks([np.full((5, 3), 1 / 3)] * 2, np.zeros(5, int), 3)
    assert oracle_outputs(space).matrix.sum() == 0


def test_oracle_matrix_validation():
    with pytest.raises(ValueError):
        OracleMatrix(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        oracle_outputs(np.ones((2, 4)))


def test_identical_classifiers():
    col = np.array([1, 0, 1, 1, 0, 1])
    m = np.stack([col, col, col], axis=1)
    assert pairwise_diversity(m) == (0.0, 1.0, 1.0)
    entropy, kappa, kw, theta = nonpairwise_diversity(m)
    assert entropy == 0 and kw == 0
    r = diversity_report(m)
    assert r.flags == ()
    assert r.kappa == pytest.approx(1.0)


def test_complementary_classifiers():
    col = np.array([1, 0, 1, 0])
    dis, q, rho = pairwise_diversity(np.stack([col, 1 - col], axis=1))
    assert (dis, q, rho) == (1.0, -1.0, -1.0)


def test_two_by_two_diagonal():
    entropy, kappa, kw, theta = nonpairwise_diversity(np.array([[1, 0], [0, 1]]))
    assert entropy == 1.0
    assert kw == 0.25
    assert theta == 0.0


def test_pairwise_against_contingency(rng):
    m = rng.integers(0, 2, size=(20, 4))
    dis, qs, rhos = [], [], []
    for i in range(4):
        for k in range(i + 1, 4):
            n11, n10, n01, n00 = pair_contingency(m[:, i], m[:, k])
            dis.append((n10 + n01) / 20)
            qs.append((n11 * n00 - n10 * n01) / (n11 * n00 + n10 * n01))
            rhos.append((n11 * n00 - n10 * n01)
                        / math.sqrt((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)))
    got = pairwise_diversity(m)
    np.testing.assert_allclose(got, (np.mean(dis), np.mean(qs), np.mean(rhos)), atol=1e-12)


def test_nonpairwise_against_slow(rng):
    m = rng.integers(0, 2, size=(30, 5))
    np.testing.assert_allclose(nonpairwise_diversity(m), _slow_nonpairwise(m), atol=1e-12)


@pytest.mark.parametrize("e", [2, 3, 4, 7])
def test_kw_disagreement_identity(rng, e):
    for _ in range(25):
        m = rng.integers(0, 2, size=(int(rng.integers(1, 40)), e))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            dis = pairwise_diversity(m)[0]
            kw = nonpairwise_diversity(m)[2]
        assert abs(kw - dis * (e - 1) / (2 * e)) <= 1e-12


def test_all_correct_is_flagged():
    m = np.ones((6, 3), dtype=int)
    with pytest.warns(RuntimeWarning):
        dis, q, rho = pairwise_diversity(m)
    assert (dis, q, rho) == (0.0, 0.0, 0.0)
    with pytest.warns(RuntimeWarning):
        entropy, kappa, kw, theta = nonpairwise_diversity(m)
    assert kappa == 1.0 and entropy == 0 and kw == 0 and theta == 0
    flags = diversity_report(m).flags
    assert set(flags) == {"q_zero_denominator", "rho_zero_denominator", "kappa_undefined"}


def test_needs_two_classifiers():
    with pytest.raises(ValueError):
        pairwise_diversity(np.ones((4, 1), dtype=int))


def test_report_dict_keys():
    d = diversity_report(np.array([[1, 0], [0, 1], [1, 1]])).as_dict()
    assert set(d) == {"disagreement", "mean_q", "mean_rho", "entropy", "kappa", "kw_variance", "theta", "flags"}


def _hand_groups():
    dev = math.sqrt(7 * 0.25 / 8)
    signs = np.array([1, -1] * 4, dtype=float)
    return (1.0 + dev * signs)[:, None], (dev * signs)[:, None]


def test_pooled_t_hand_case():
    g, r = _hand_groups()
    assert g.std(ddof=1) == pytest.approx(0.5)
    assert abs(pooled_t(g, r)[0] - 4.0) <= 1e-9


def test_identical_groups_zero(rng):
    x = rng.standard_normal((6, 3))
    np.testing.assert_array_equal(pooled_t(x, x), 0.0)


def test_pooled_t_location_invariant_and_symmetric(rng):
    g, r = rng.standard_normal((7, 4)), rng.standard_normal((9, 4)) + 0.5
    z = pooled_t(g, r)
    np.testing.assert_allclose(pooled_t(g + 3.0, r + 3.0), z, rtol=1e-12)
    np.testing.assert_allclose(pooled_t(r, g), z, rtol=1e-12)
    np.testing.assert_allclose(pooled_t(2 * g, 2 * r), z, rtol=1e-12)


def test_pooled_t_needs_two_rows():
    with pytest.raises(ValueError, match="at least 2"):
        pooled_t(np.ones((1, 2)), np.ones((3, 2)))


def test_printed_statistic_negative_radicand_is_nan():
    g = np.array([[0.0], [0.1]])
    r = np.array([[0.0], [5.0], [-5.0]])
    assert np.isnan(printed_statistic(g, r)[0])
    big = np.array([[0.0], [4.0]])
    small = np.array([[0.0], [0.1], [0.0]])
    s1, s0 = big.std(ddof=1), small.std(ddof=1)
    want = abs(big.mean() - small.mean()) / math.sqrt(s1 / 2 - s0 / 3)
    assert printed_statistic(big, small)[0] == pytest.approx(want)


def test_membership_significance_shapes(rng):
    y = np.repeat(np.arange(3), 5)
    memberships = rng.dirichlet(np.ones(3), size=(15, 2)).reshape(15, 6)
    table = membership_significance(memberships, y, 3, block_labels=("A0", "D1"))
    assert table.z.shape == (3, 6) and table.block_max.shape == (3, 2)
    np.testing.assert_allclose(table.block_max, table.z.reshape(3, 2, 3).max(axis=2))
    np.testing.assert_allclose(table.z[1], pooled_t(memberships[y == 1], memberships[y != 1]))
    d = table.as_dict()
    assert d["block_labels"] == ["A0", "D1"] and d["as_printed"] is False


def test_membership_significance_as_printed_nan_blocks(rng):
    y = np.repeat(np.arange(2), 4)
    m = rng.dirichlet(np.ones(2), size=8)
    table = membership_significance(m, y, 2, as_printed=True)
    assert table.as_printed
    d = table.as_dict()
    assert all(v is None or isinstance(v, float) for row in d["z"] for v in row)
