import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from thzwave.channels import DdChannel, dd_effective_channel
from thzwave.core import ConfigError, QamConstellation, SingularityError, qam_indices
from thzwave.equalization import (EqualizerSpec, matrix_equalize, otfs_equalize,
                                  single_tap_equalize)

ZF = EqualizerSpec("ZF")


def test_single_tap_identity_and_mmse_limit(rng):
    y = oracles.random_complex(rng, 16)
    np.testing.assert_array_equal(single_tap_equalize(y, np.ones(16), ZF), y)
    h = oracles.random_complex(rng, 16)
    np.testing.assert_array_equal(single_tap_equalize(y, h, EqualizerSpec("MMSE", 0.0)),
                                  np.conj(h) * y / np.abs(h) ** 2)
    np.testing.assert_allclose(single_tap_equalize(y, h, EqualizerSpec("MMSE", 0.0)),
                               single_tap_equalize(y, h, ZF), rtol=1e-12)


def test_single_tap_vs_dense(rng):
    M = 4
    h, y = oracles.random_complex(rng, M), oracles.random_complex(rng, M)
    H = np.diag(h)
    np.testing.assert_allclose(single_tap_equalize(y, h, ZF), oracles.zf_dense(H, y), atol=1e-12)
    spec = EqualizerSpec("MMSE", 0.3, 2.0)
    np.testing.assert_allclose(single_tap_equalize(y, h, spec),
                               oracles.mmse_dense(H, y, 0.15), atol=1e-12)


def test_single_tap_broadcasts_over_grid(rng):
    h, Y = oracles.random_complex(rng, 8), oracles.random_complex(rng, 8, 3)
    out = single_tap_equalize(Y, h, ZF)
    np.testing.assert_allclose(out[:, 2], Y[:, 2] / h)


def test_zf_singular_bin_named():
    with pytest.raises(SingularityError, match=r"\[\[2\]\]|\[2\]"):
        single_tap_equalize(np.ones(4), np.array([1, 1, 0, 1]), ZF)


def test_spec_validation():
    with pytest.raises(ConfigError):
        EqualizerSpec("MMSE", -1.0)
    with pytest.raises(ConfigError):
        EqualizerSpec("MMSE", 1.0, 0.0)
    assert ZF.regularization == 0
    assert EqualizerSpec("MMSE", 0.5, 2.0).regularization == 0.25


def test_matrix_equalize_cases(rng):
    y = oracles.random_complex(rng, 16)
    np.testing.assert_allclose(matrix_equalize(y, np.eye(16), ZF), y, atol=1e-14)
    H = oracles.random_complex(rng, 16, 16) + 4 * np.eye(16)
    x = oracles.random_complex(rng, 16)
    xh = matrix_equalize(H @ x, H, ZF)
    assert np.linalg.norm(xh - x) / np.linalg.norm(x) <= 1e-8
    x_zf = matrix_equalize(y, H, ZF)
    x_big = matrix_equalize(y, H, EqualizerSpec("MMSE", 1e6, 1.0))
    assert np.linalg.norm(x_big) < 0.01 * np.linalg.norm(x_zf)
    np.testing.assert_allclose(matrix_equalize(y, H, EqualizerSpec("MMSE", 0.2)),
                               oracles.mmse_dense(H, y, 0.2), atol=1e-10)


def test_matrix_equalize_tall_and_sparse(rng):
    H = oracles.random_complex(rng, 20, 8)
    x = oracles.random_complex(rng, 8)
    np.testing.assert_allclose(matrix_equalize(H @ x, H, ZF), x, atol=1e-10)
    Hs = sp.csr_matrix(np.eye(8) * 2 + np.diag(np.ones(7), -1))
    x = oracles.random_complex(rng, 8)
    np.testing.assert_allclose(matrix_equalize(Hs @ x, Hs, ZF), x, atol=1e-12)


def test_matrix_equalize_rank_deficient(rng):
    H = oracles.random_complex(rng, 8, 8)
    H[:, 3] = H[:, 1]
    with pytest.raises(SingularityError):
        matrix_equalize(np.ones(8), H, ZF)
    with pytest.raises(SingularityError):
        matrix_equalize(np.ones(4), sp.csr_matrix((4, 4), dtype=complex), ZF)


def test_mmse_tends_to_zf(rng):
    H = oracles.random_complex(rng, 12, 12) + 3 * np.eye(12)
    y = oracles.random_complex(rng, 12)
    d = matrix_equalize(y, H, EqualizerSpec("MMSE", 1e-12)) - matrix_equalize(y, H, ZF)
    assert np.linalg.norm(d) < 1e-9


def test_otfs_equalize_cases(rng):
    M, N = 4, 8
    y = oracles.random_complex(rng, M * N)
    Hi = dd_effective_channel(DdChannel.from_paths([(1, 0, 0)]), M, N)
    np.testing.assert_allclose(otfs_equalize(y, Hi, ZF), y, atol=1e-12)
    h = 0.4 - 0.9j
    Hs = dd_effective_channel(DdChannel.from_paths([(h, 0, 0)]), M, N)
    np.testing.assert_allclose(otfs_equalize(y, Hs, ZF), y / h, atol=1e-12)


@pytest.mark.parametrize("paths", [[(1.0, 0, 0), (0.5j, 1, 0)],
                                   [(1.0, 0, 1), (0.6, 2, -1)]])
def test_otfs_two_path_zf_recovers_qam(rng, paths):
    M, N = 4, 8
    c = QamConstellation(4)
    idx = rng.integers(0, 4, M * N)
    x = c.points[idx]
    ch = DdChannel.from_paths(paths)
    Hd = oracles.dd_effective(paths, M, N)
    y = Hd @ x
    for H in (dd_effective_channel(ch, M, N), Hd):
        xh = otfs_equalize(y, H, ZF)
        np.testing.assert_array_equal(qam_indices(xh, c), idx)
        np.testing.assert_allclose(xh, x, atol=1e-8)
    spec = EqualizerSpec("MMSE", 0.05)
    np.testing.assert_allclose(otfs_equalize(y, dd_effective_channel(ch, M, N), spec),
                               oracles.mmse_dense(Hd, y, 0.05), atol=1e-10)


def test_mmse_mse_not_above_zf(rng):
    # per random channel, average the squared error over data and noise draws
    wins, channels, draws, s2 = 0, 100, 100, 0.1
    for _ in range(channels):
        H = oracles.random_complex(rng, 8, 8)
        e_m = e_z = 0.0
        for _ in range(draws):
            x = oracles.random_complex(rng, 8)
            y = H @ x + oracles.random_complex(rng, 8) * np.sqrt(s2)
            e_m += np.sum(np.abs(matrix_equalize(y, H, EqualizerSpec("MMSE", s2)) - x) ** 2)
            e_z += np.sum(np.abs(matrix_equalize(y, H, ZF) - x) ** 2)
        wins += e_m <= e_z
    assert wins >= 0.95 * channels


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 2**32))
def test_noiseless_zf_property(n, seed):
    rng = np.random.default_rng(seed)
    H = oracles.random_complex(rng, n, n) + 3 * np.eye(n)
    x = oracles.random_complex(rng, n)
    assert np.linalg.norm(matrix_equalize(H @ x, H, ZF) - x) <= 1e-8 * np.linalg.norm(x)
