import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfsup import theory as th


def test_kernel_diagonal_and_limits():
    K = th.gp_kernel(th.TorusGP(5, 2.0, 0.5))
    assert np.allclose(np.diag(K), 1.0)
    assert np.allclose(th.gp_kernel(th.TorusGP(5, 1e-3, 0.5)), np.eye(25))


def test_kernel_wraps_around():
    ell = 0.5
    K = th.gp_kernel(th.TorusGP(4, ell, 0.5))
    # node (0, 0) and node (0, 3) are one step apart through the seam
    assert K[0, 3] == pytest.approx(math.exp(-1 / (2 * ell ** 2)), rel=1e-6)
    assert K[0, 3] == pytest.approx(K[0, 1])


def test_wrapped_kernel_close_to_min_distance_kernel():
    side, ell = 9, 1.0
    K = th.gp_kernel(th.TorusGP(side, ell, 0.5))
    naive = np.exp(-th.torus_sq_dist(side) / (2 * ell ** 2))
    assert np.abs(K - naive).max() < 1e-4


@pytest.mark.parametrize("side,ell", [(9, 0.5), (9, 4.0), (9, 8.0), (12, 20.0)])
def test_kernel_psd(side, ell):
    K = th.gp_kernel(th.TorusGP(side, ell, 0.5))
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-9


def test_sample_properties():
    gp = th.TorusGP(9, 2.0, 0.0)
    y, x = th.gp_sample(gp, seed=1)
    assert np.array_equal(x, y)
    a = th.gp_sample(th.TorusGP(9, 2.0, 0.3), seed=4)
    b = th.gp_sample(th.TorusGP(9, 2.0, 0.3), seed=4)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    white = np.array([th.gp_sample(th.TorusGP(33, 1e-3, 0.5), s)[0] for s in range(100)])
    assert abs(white.var() - 1) < 0.05


def test_full_mse_limits():
    assert th.gp_full_predictor_mse(th.TorusGP(9, 1e-3, 0.5)) == pytest.approx(0.2, abs=1e-9)
    assert th.gp_full_predictor_mse(th.TorusGP(5, 2.0, 1e-4)) < 1e-6
    assert th.gp_full_predictor_mse(th.TorusGP(5, 2.0, 1e4)) == pytest.approx(1.0, abs=1e-6)


def test_jinv_mse_limits_and_trend():
    assert th.gp_jinv_predictor_mse(th.TorusGP(9, 1e-3, 0.5)) == pytest.approx(1.0, abs=1e-9)
    assert th.gp_jinv_predictor_mse(th.TorusGP(9, 4, 0.5)) < th.gp_jinv_predictor_mse(th.TorusGP(9, 1, 0.5))


def test_block_inverse_matches_direct_solve():
    C = th.gp_kernel(th.TorusGP(7, 1.5, 0.5))
    fast = th.gaussian_jinv_mse_per_coord(C, 0.5)
    for j in np.random.default_rng(0).choice(C.shape[0], 6, replace=False):
        assert fast[j] == pytest.approx(th.gaussian_jinv_mse_direct(C, 0.5, j), rel=1e-9)
    # the torus is homogeneous, so every pixel has the same error
    assert np.ptp(fast) < 1e-10


def test_gap_nonnegative_and_decreasing():
    rows = th.gp_curve(9, [1, 2, 3, 5, 8], 0.5)
    gaps = [j - f for _, j, f in rows]
    assert all(g >= 0 for g in gaps)
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_glyphs():
    g = th.glyph_alphabet(30, 16, seed=0)
    assert g.shape == (30, 256)
    assert set(np.unique(g)) <= {0.0, 1.0}
    assert len({row.tobytes() for row in g}) == 30


def test_alphabet_denoise_examples():
    letters = th.glyph_alphabet(8, 16, seed=1)
    x = np.random.default_rng(0).random(256)
    one = letters[:1]
    assert np.array_equal(th.alphabet_denoise(x, one, 0.5, [3]), one[0])
    assert np.allclose(th.alphabet_denoise(x, letters, 1e6, []), letters.mean(axis=0))
    assert np.allclose(th.alphabet_denoise(letters[5], letters, 1e-3, [0, 1, 2]), letters[5])


def test_singleton_prediction_matches_generic_form():
    letters = th.glyph_alphabet(6, 8, seed=2)
    x = letters[2] + 0.7 * np.random.default_rng(1).standard_normal(64)
    fast = th.alphabet_jinv_predict(x, letters, 0.7)
    slow = np.array([th.alphabet_denoise(x, letters, 0.7, [j])[j] for j in range(64)])
    assert np.allclose(fast, slow, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(0.05, 5.0))
def test_alphabet_output_is_convex_combination(seed, sigma):
    rng = np.random.default_rng(seed)
    letters = rng.random((5, 20))
    x = rng.normal(size=20) * 3
    out = th.alphabet_jinv_predict(x, letters, sigma)
    assert np.all(out >= letters.min(axis=0) - 1e-12) and np.all(out <= letters.max(axis=0) + 1e-12)


def test_alphabet_single_letter_exact():
    letters = th.glyph_alphabet(1, 8, seed=3)
    row = th.alphabet_vs_gp_mse(letters, [0.5], trials=20)[0]
    assert row.alphabet_mse == 0 and row.gp_mse >= 0


def test_gaussian_letters_approach_gaussian_bound():
    # for many Gaussian "letters" the alphabet error rises towards the Gaussian error
    rng = np.random.default_rng(5)
    errs = []
    for r in (4, 64, 1024):
        letters = rng.standard_normal((r, 16))
        row = th.alphabet_vs_gp_mse(letters, [1.0], seed=1, trials=300)[0]
        errs.append((row.alphabet_mse, row.alphabet_se, row.gp_mse))
    assert errs[0][0] < errs[1][0] < errs[2][0]
    for mse, se, gp in errs:
        assert mse <= gp + 4 * se


def test_psd_block_lemma():
    assert th.check_psd_block_lemma(th.CovariancePair(np.eye(2), np.eye(3), np.zeros((2, 3))))
    bad = th.CovariancePair(np.eye(1), np.eye(1), np.array([[2.0]]))
    assert not th.check_psd_block_lemma(bad)
    with pytest.raises(ValueError):
        th.check_psd_block_lemma(th.CovariancePair(np.eye(2), np.eye(2), np.zeros((3, 2))))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10_000))
def test_psd_block_lemma_on_valid_covariances(nx, ny, seed):
    A = np.random.default_rng(seed).standard_normal((nx + ny + 2, nx + ny))
    S = A.T @ A
    pair = th.CovariancePair(S[ny:, ny:], S[:ny, :ny], S[ny:, :ny])
    assert th.check_psd_block_lemma(pair)


def test_law_of_total_variance():
    # y ~ N(0, 1), x = y + 0.5 n: Var y = Var E[y|x] + E Var(y|x)
    rng = np.random.default_rng(6)
    y = rng.standard_normal(200_000)
    x = y + 0.5 * rng.standard_normal(y.size)
    post_mean = x / 1.25
    post_var = 0.25 / 1.25
    assert y.var() == pytest.approx(post_mean.var() + post_var, rel=0.01)
    assert np.mean((y - post_mean) ** 2) == pytest.approx(post_var, rel=0.02)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        th.TorusGP(1, 1.0, 0.5)
    with pytest.raises(ValueError):
        th.TorusGP(5, 0.0, 0.5)
    with pytest.raises(ValueError):
        th.gaussian_full_mse(np.eye(2), 0.0)
    with pytest.raises(th.NumericError):
        th.cholesky_jitter(-np.eye(3))
