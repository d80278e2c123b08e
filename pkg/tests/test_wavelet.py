import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meshband import oracles
from meshband.data import SubjectRecord, sessions_from_scans
from meshband.wavelet import (FAMILY_NAMES, SubbandIndex, all_subbands, decompose, default_subbands,
                              get_family, pad_signal, padded_length, parse_subbands, reconstruct,
                              reconstruct_subband, subband_stack)

S = np.sqrt(0.5)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_family_invariants(name):
    fam = get_family(name)
    tol = 1e-12
    assert abs(np.sum(fam.lowpass ** 2) - 1) < tol
    assert abs(np.sum(fam.highpass ** 2) - 1) < tol
    assert abs(np.sum(fam.highpass)) < 1e-10
    assert abs(np.sum(fam.lowpass) - np.sqrt(2)) < 1e-10
    # even-shift orthogonality
    h = fam.lowpass
    for shift in range(2, h.size, 2):
        assert abs(np.dot(h[shift:], h[:-shift])) < 1e-12


def test_battle_lemarie_has_40_taps_and_loose_tolerance():
    fam = get_family("battle_lemarie_cubic")
    assert fam.support == 40
    assert fam.tolerance == 1e-4


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown wavelet family"):
        get_family("coiflet")


def test_haar_one_level():
    c = decompose([1, 2, 3, 4], "haar", 1)
    np.testing.assert_allclose(c.approx[0], [3 * S, 7 * S], atol=1e-15)
    np.testing.assert_allclose(c.detail[0], [-S, -S], atol=1e-15)


def test_haar_subbands():
    c = decompose([1, 2, 3, 4], "haar", 1)
    np.testing.assert_allclose(reconstruct_subband(c, 1), [1.5, 1.5, 3.5, 3.5], atol=1e-14)
    np.testing.assert_allclose(reconstruct_subband(c, 2), [-0.5, 0.5, -0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(reconstruct_subband(c, 0), [1, 2, 3, 4], atol=1e-14)


@pytest.mark.parametrize("name", FAMILY_NAMES)
@pytest.mark.parametrize("levels", [1, 3, 5])
def test_constant_signal_has_no_detail(name, levels):
    c = decompose(np.full(64, 3.25), name, levels)
    for d in c.detail:
        assert np.max(np.abs(d)) <= 1e-10


def test_matches_matrix_oracle_length_1940(rng):
    fam = get_family("daubechies4")
    x = rng.standard_normal(1940)
    c = decompose(x, fam, 11)
    n = c.padded_length
    q = oracles.matrix_dwt(n, fam.lowpass, fam.highpass, 11)
    approx, details = oracles.split_matrix_dwt(q @ pad_signal(x, 11), n, 11)
    np.testing.assert_allclose(c.approx[-1], approx, atol=1e-10)
    for l in range(11):
        np.testing.assert_allclose(c.detail[l], details[l], atol=1e-10)


@pytest.mark.parametrize("name", ["haar", "daubechies4"])
def test_matrix_oracle_is_orthogonal(name):
    fam = get_family(name)
    q = oracles.matrix_dwt(64, fam.lowpass, fam.highpass, 3)
    np.testing.assert_allclose(q.T @ q, np.eye(64), atol=1e-10)


def test_padding_lengths():
    assert padded_length(1940, 11) == 2048
    assert padded_length(256, 4) == 256
    x = np.arange(5.0)
    np.testing.assert_array_equal(pad_signal(x, 3), [0, 1, 2, 3, 4, 4, 3, 2])


def test_too_many_levels():
    with pytest.raises(ValueError, match="padded length"):
        decompose(np.ones(5), "haar", 4)


def test_decompose_rejects_bad_input():
    with pytest.raises(ValueError):
        decompose([1.0], "haar", 1)
    with pytest.raises(ValueError):
        decompose([1.0, np.nan], "haar", 1)
    with pytest.raises(ValueError):
        decompose([1.0, 2.0], "haar", 0)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_completeness_and_telescoping(name, rng):
    levels = 6
    x = rng.standard_normal(300)
    c = decompose(x, name, levels)
    parts = [reconstruct_subband(c, j) for j in range(2 * levels + 1)]
    tol = 1e-8
    np.testing.assert_allclose(parts[levels] + sum(parts[levels + 1:]), x, atol=tol)
    for l in range(1, levels + 1):
        np.testing.assert_allclose(parts[l - 1], parts[l] + parts[levels + l], atol=tol)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_energy_conservation(name, rng):
    x = rng.standard_normal(256)
    c = decompose(x, name, 5)
    energy = np.sum(c.approx[-1] ** 2) + sum(np.sum(d ** 2) for d in c.detail)
    assert abs(energy - np.sum(x ** 2)) <= 1e-8 * np.sum(x ** 2)


@pytest.mark.parametrize("name", ["haar", "daubechies4"])
def test_detail_subbands_are_orthogonal(name, rng):
    x = rng.standard_normal(256)
    c = decompose(x, name, 4)
    recon = [reconstruct_subband(c, SubbandIndex.from_label(f"D{l}", 4)) for l in range(1, 5)]
    scale = np.sum(x ** 2)
    for a in range(4):
        for b in range(a + 1, 4):
            assert abs(np.dot(recon[a], recon[b])) <= 1e-6 * scale


def test_round_trip_identity(rng):
    x = rng.standard_normal(512)
    for name in FAMILY_NAMES:
        np.testing.assert_allclose(reconstruct(decompose(x, name, 7)), x, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(-5, 5), beta=st.floats(-5, 5), j=st.integers(0, 8), seed=st.integers(0, 10_000))
def test_subband_linearity(alpha, beta, j, seed):
    gen = np.random.default_rng(seed)
    x, y = gen.standard_normal((2, 100))
    lhs = reconstruct_subband(decompose(alpha * x + beta * y, "daubechies4", 4), j)
    rhs = (alpha * reconstruct_subband(decompose(x, "daubechies4", 4), j)
           + beta * reconstruct_subband(decompose(y, "daubechies4", 4), j))
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_subband_index_mapping():
    levels = 3
    labels = [s.label for s in all_subbands(levels)]
    assert labels == ["A0", "A1", "A2", "A3", "D1", "D2", "D3"]
    for j, label in enumerate(labels):
        s = SubbandIndex.from_label(label, levels)
        assert s.j == j
    d1 = SubbandIndex(4, 3)
    assert (d1.kind, d1.level) == ("detail", 1)
    assert SubbandIndex(0, 3).kind == "original"
    with pytest.raises(ValueError):
        SubbandIndex(7, 3)
    with pytest.raises(ValueError):
        SubbandIndex.from_label("D4", 3)


def test_invalid_subband_for_coefficients():
    c = decompose(np.arange(16.0), "haar", 2)
    with pytest.raises(ValueError):
        reconstruct_subband(c, 5)


def test_default_subbands_drop_d1():
    labels = [str(s) for s in default_subbands(11)]
    assert "D1" not in labels and len(labels) == 22
    assert [str(s) for s in parse_subbands("A0,D2,A0", 4)] == ["A0", "D2"]


def _subject(rng, r=3, t=96):
    return SubjectRecord("toy", rng.standard_normal((r, t)), sessions_from_scans([1, 2], [40, t - 40]))


def test_subband_stack_matches_rowwise(rng):
    subj = _subject(rng)
    stack = subband_stack(subj, "daubechies4", 3)
    assert stack.data.shape == (7, 3, 96)
    np.testing.assert_array_equal(stack[0], subj.series)
    for r in range(3):
        c = decompose(subj.series[r], "daubechies4", 3)
        for j in range(7):
            np.testing.assert_allclose(stack[j][r], reconstruct_subband(c, j), atol=1e-12)
    total = stack["A3"] + stack["D1"] + stack["D2"] + stack["D3"]
    np.testing.assert_allclose(total, subj.series, atol=1e-8)


def test_subband_stack_per_session(rng):
    subj = _subject(rng)
    stack = subband_stack(subj, "haar", 2, per_session=True)
    first = decompose(subj.series[:, :40], "haar", 2)
    np.testing.assert_allclose(stack["D2"][:, :40], reconstruct_subband(first, 4), atol=1e-12)
