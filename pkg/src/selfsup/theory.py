"""Analytic denoisers for Gaussian processes and finite alphabets.

These give exact (or Monte-Carlo) errors of the best J-invariant predictor
for the singleton partition, to compare with the best unrestricted one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg


class NumericError(ArithmeticError):
    pass


# -- Gaussian processes on a torus --------------------------------------------

@dataclass(frozen=True)
class TorusGP:
    side: int = 33
    lengthscale: float = 1.0
    noise_sigma: float = 0.5

    def __post_init__(self):
        if self.side < 2:
            raise ValueError("side must be >= 2")
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be > 0")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")


def torus_sq_dist(side: int) -> np.ndarray:
    """Squared wrap-around distance between all pairs of grid nodes (row-major)."""
    i = np.arange(side)
    d = np.abs(i[:, None] - i[None, :])
    d = np.minimum(d, side - d) ** 2
    # node index p = a * side + b
    return (d[:, None, :, None] + d[None, :, None, :]).reshape(side * side, side * side).astype(np.float64)


def periodic_se_1d(side: int, lengthscale: float) -> np.ndarray:
    """Squared-exponential correlation on a cycle, summed over all wraps.

    ``k(d) = sum_n exp(-(d + n side)^2 / 2l^2)``, scaled to ``k(0) = 1``.
    Unlike ``exp(-min_wrap(d)^2 / 2l^2)`` this is positive semi-definite for
    every length scale; the two agree to within ``exp(-side^2 / 8l^2)``.
    """
    n_wraps = int(math.ceil(8.0 * lengthscale / side)) + 1
    n = np.arange(-n_wraps, n_wraps + 1)
    d = np.arange(side)
    k = np.exp(-((d[:, None] + n[None, :] * side) ** 2) / (2.0 * lengthscale ** 2)).sum(axis=1)
    k /= k[0]
    diff = np.abs(d[:, None] - d[None, :])
    return k[diff]


def gp_kernel(gp: TorusGP) -> np.ndarray:
    """Unit-diagonal covariance of the torus process over ``side**2`` nodes (row-major)."""
    k = periodic_se_1d(gp.side, gp.lengthscale)
    return np.kron(k, k)


def cholesky_jitter(K: np.ndarray, start: float = 1e-12, stop: float = 1e-6) -> np.ndarray:
    """Lower Cholesky factor of ``K + eps I`` for the smallest working ``eps`` in ``0, start, ..., stop``."""
    eps = 0.0
    while True:
        try:
            return linalg.cholesky(K + eps * np.eye(K.shape[0]), lower=True)
        except linalg.LinAlgError:
            eps = start if eps == 0.0 else eps * 10.0
            if eps > stop * (1 + 1e-9):
                raise NumericError("kernel not positive definite even with jitter") from None


def gp_sample(gp: TorusGP, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw a clean field ``y ~ N(0, K)`` and its noisy copy ``x = y + sigma * n``."""
    rng = np.random.default_rng(seed)
    L = cholesky_jitter(gp_kernel(gp))
    m = gp.side ** 2
    y = L @ rng.standard_normal(m)
    x = y + gp.noise_sigma * rng.standard_normal(m) if gp.noise_sigma > 0 else y.copy()
    return y.reshape(gp.side, gp.side), x.reshape(gp.side, gp.side)


def gaussian_full_mse(C: np.ndarray, sigma: float) -> float:
    """Per-coordinate mean of ``Var(y | x)`` for ``y ~ N(., C)``, ``x = y + sigma n``."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    lam = np.clip(linalg.eigvalsh(C), 0.0, None)
    s2 = sigma * sigma
    return float(np.mean(lam * s2 / (lam + s2)))


def gaussian_jinv_mse_per_coord(C: np.ndarray, sigma: float) -> np.ndarray:
    """``Var(y_j | x_{-j})`` for every coordinate ``j``.

    Uses the block inverse identity
    ``A_{-j,-j}^{-1} = P_{-j,-j} - P_{-j,j} P_{j,-j} / P_jj`` with
    ``P = (C + sigma^2 I)^{-1}``, so one inversion serves all coordinates.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    m = C.shape[0]
    A = C + sigma * sigma * np.eye(m)
    try:
        P = linalg.inv(A, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NumericError(str(exc)) from None
    Cz = C.copy()
    np.fill_diagonal(Cz, 0.0)
    PC = P @ Cz
    quad = np.einsum("ij,ij->j", Cz, PC)
    lin = np.diag(PC)
    return np.diag(C) - (quad - lin * lin / np.diag(P))


def gaussian_jinv_mse_direct(C: np.ndarray, sigma: float, j: int) -> float:
    """``Var(y_j | x_{-j})`` by solving the reduced system directly."""
    A = C + sigma * sigma * np.eye(C.shape[0])
    keep = np.arange(C.shape[0]) != j
    k = C[keep, j]
    return float(C[j, j] - k @ linalg.solve(A[np.ix_(keep, keep)], k, assume_a="pos"))


def gp_full_predictor_mse(gp: TorusGP) -> float:
    return gaussian_full_mse(gp_kernel(gp), gp.noise_sigma)


def gp_jinv_predictor_mse(gp: TorusGP) -> float:
    """Per-pixel error of ``E[y_j | x_{-j}]`` on the torus."""
    return float(np.mean(gaussian_jinv_mse_per_coord(gp_kernel(gp), gp.noise_sigma)))


def gp_curve(side: int, lengthscales, sigma: float) -> list[tuple[float, float, float]]:
    """Rows ``(lengthscale, jinv_mse, full_mse)``."""
    rows = []
    for ell in lengthscales:
        gp = TorusGP(side, float(ell), sigma)
        rows.append((float(ell), gp_jinv_predictor_mse(gp), gp_full_predictor_mse(gp)))
    return rows


# -- alphabets -----------------------------------------------------------------

def glyph_alphabet(n: int = 30, size: int = 16, seed: int = 0) -> np.ndarray:
    """*n* distinct binary glyphs of ``size x size`` pixels drawn from random strokes.

    Returned as an ``(n, size * size)`` array of 0/1 floats.
    """
    rng = np.random.default_rng(seed)
    glyphs, seen = [], set()
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    while len(glyphs) < n:
        img = np.zeros((size, size), dtype=bool)
        for _ in range(rng.integers(2, 5)):
            p0 = rng.uniform(2, size - 2, 2)
            p1 = rng.uniform(2, size - 2, 2)
            width = rng.uniform(0.8, 1.6)
            d = p1 - p0
            t = np.clip(((yy - p0[0]) * d[0] + (xx - p0[1]) * d[1]) / max(d @ d, 1e-9), 0, 1)
            dist = np.hypot(yy - p0[0] - t * d[0], xx - p0[1] - t * d[1])
            img |= dist < width
        key = img.tobytes()
        if key in seen or img.sum() < size:
            continue
        seen.add(key)
        glyphs.append(img.ravel().astype(np.float64))
    return np.array(glyphs)


def _log_weights(letters: np.ndarray, x: np.ndarray, sigma: float, J) -> np.ndarray:
    keep = np.ones(letters.shape[1], dtype=bool)
    keep[np.asarray(J, dtype=np.intp)] = False
    d = letters[:, keep] - x[keep]
    return -np.einsum("ij,ij->i", d, d) / (2.0 * sigma * sigma)


def alphabet_denoise(x, letters, sigma: float, J) -> np.ndarray:
    """Posterior-mean letter given the coordinates of *x* outside *J*.

    Returns the full weighted average of the letters; the J-invariant
    prediction is its restriction to *J*.
    """
    letters = np.atleast_2d(np.asarray(letters, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != letters.shape[1]:
        raise ValueError("x and letters differ in length")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    lw = _log_weights(letters, x, sigma, J)
    w = np.exp(lw - lw.max())
    return w @ letters / w.sum()


def alphabet_jinv_predict(x, letters, sigma: float) -> np.ndarray:
    """Singleton-partition prediction: coordinate ``j`` uses every coordinate except ``j``."""
    letters = np.asarray(letters, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    diff2 = (letters - x) ** 2                        # (r, m)
    lw = -(diff2.sum(axis=1, keepdims=True) - diff2) / (2.0 * sigma * sigma)
    lw -= lw.max(axis=0, keepdims=True)
    w = np.exp(lw)
    return (w * letters).sum(axis=0) / w.sum(axis=0)


@dataclass(frozen=True)
class AlphabetRow:
    sigma: float
    alphabet_mse: float
    alphabet_se: float
    gp_mse: float


def letter_covariance(letters) -> np.ndarray:
    """Covariance of a uniformly drawn letter (population normalisation)."""
    letters = np.asarray(letters, dtype=np.float64)
    centred = letters - letters.mean(axis=0)
    return centred.T @ centred / letters.shape[0]


def alphabet_vs_gp_mse(letters, sigmas, seed: int = 0, trials: int = 200) -> list[AlphabetRow]:
    """Monte-Carlo error of the alphabet denoiser against the Gaussian with the letters' covariance.

    Both errors are per-pixel, for the singleton partition.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    letters = np.atleast_2d(np.asarray(letters, dtype=np.float64))
    C = letter_covariance(letters)
    rows = []
    for k, sigma in enumerate(sigmas):
        sigma = float(sigma)
        rng = np.random.default_rng([seed, k])
        errs = np.empty(trials)
        for t in range(trials):
            a = letters[rng.integers(letters.shape[0])]
            x = a + sigma * rng.standard_normal(a.size)
            errs[t] = np.mean((alphabet_jinv_predict(x, letters, sigma) - a) ** 2)
        se = float(errs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
        gp = float(np.mean(gaussian_jinv_mse_per_coord(C, sigma)))
        rows.append(AlphabetRow(sigma, float(errs.mean()), se, gp))
    return rows


# -- covariance lemmas ---------------------------------------------------------

@dataclass(frozen=True)
class CovariancePair:
    """Blocks of a joint covariance: ``Cov(x)``, ``Cov(y)`` and ``Cov(x, y)`` of shape ``(nx, ny)``."""

    sigma_xx: np.ndarray
    sigma_yy: np.ndarray
    sigma_xy: np.ndarray

    def joint(self) -> np.ndarray:
        xy = np.asarray(self.sigma_xy)
        return np.block([[self.sigma_yy, xy.T], [xy, self.sigma_xx]])


def check_psd_block_lemma(cov: CovariancePair, jitter: float = 1e-12) -> bool:
    """True iff ``Cov(y) - Cov(y, x) Cov(x)^{-1} Cov(x, y)`` is positive semi-definite."""
    xx = np.asarray(cov.sigma_xx, dtype=np.float64)
    yy = np.asarray(cov.sigma_yy, dtype=np.float64)
    xy = np.asarray(cov.sigma_xy, dtype=np.float64)
    if xy.shape != (xx.shape[0], yy.shape[0]):
        raise ValueError("blocks are not conformable")
    for name, blk in (("sigma_xx", xx), ("sigma_yy", yy)):
        if not np.allclose(blk, blk.T, rtol=0, atol=1e-12 * max(1.0, np.abs(blk).max())):
            raise ValueError(f"{name} is not symmetric")
    scale = max(np.abs(cov.joint()).max(), 1e-300)
    try:
        sol = linalg.solve(xx, xy, assume_a="sym")
    except linalg.LinAlgError:
        sol = linalg.solve(xx + jitter * scale * np.eye(xx.shape[0]), xy, assume_a="sym")
    schur = yy - xy.T @ sol
    schur = 0.5 * (schur + schur.T)
    return bool(linalg.eigvalsh(schur).min() >= -1e-9 * scale)
