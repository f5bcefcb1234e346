"""Classical single-image denoisers with one tunable knob each.

Each parameter record is also the denoiser: ``MedianRadius(3)(x)`` filters
*x*.  All filters use reflect-101 boundaries (``d c b | a b c d | c b a``),
which never maps a pixel's out-of-range neighbour back onto the pixel itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import as_image


def disk_offsets(r: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets ``(dr, dc) != (0, 0)`` with ``dr^2 + dc^2 <= r^2``."""
    dr, dc = np.mgrid[-r:r + 1, -r:r + 1]
    keep = (dr * dr + dc * dc <= r * r) & ~((dr == 0) & (dc == 0))
    return (np.ascontiguousarray(dr[keep], dtype=np.intp),
            np.ascontiguousarray(dc[keep], dtype=np.intp))


def _mask_arg(mask, shape):
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        mask = mask.reshape(shape)
    return np.ascontiguousarray(mask, dtype=np.uint8)


def median_filter(x, r: int, include_center: bool = True, mask=None) -> np.ndarray:
    """Median over the disk of radius *r*; ``include_center=False`` gives the donut median.

    Even-sized neighbourhoods take the mean of the two middle order statistics.
    When *mask* is given only those pixels are filtered, the rest copied.
    """
    if r < 1:
        raise ValueError("radius must be >= 1")
    x = np.ascontiguousarray(as_image(x))
    if not include_center and x.size == 1:
        raise ValueError("donut median needs at least two pixels")
    dr, dc = disk_offsets(int(r))
    return kernels.disk_median(x, dr, dc, bool(include_center), _mask_arg(mask, x.shape))


# -- Haar wavelet -------------------------------------------------------------

_S = np.sqrt(0.5)


def haar2d(a: np.ndarray, levels: int) -> list:
    """Orthonormal multi-level 2-D Haar transform.

    Returns ``[approx, (h1, v1, d1), ..., (hL, vL, dL)]`` with level 1 the
    finest.  Both sides must be divisible by ``2**levels``.
    """
    details = []
    for _ in range(levels):
        lo = (a[0::2] + a[1::2]) * _S
        hi = (a[0::2] - a[1::2]) * _S
        ll = (lo[:, 0::2] + lo[:, 1::2]) * _S
        lh = (lo[:, 0::2] - lo[:, 1::2]) * _S
        hl = (hi[:, 0::2] + hi[:, 1::2]) * _S
        hh = (hi[:, 0::2] - hi[:, 1::2]) * _S
        details.append((lh, hl, hh))
        a = ll
    return [a] + details


def ihaar2d(coeffs: list) -> np.ndarray:
    a = coeffs[0]
    for lh, hl, hh in reversed(coeffs[1:]):
        lo = np.empty((a.shape[0], 2 * a.shape[1]))
        hi = np.empty_like(lo)
        lo[:, 0::2] = (a + lh) * _S
        lo[:, 1::2] = (a - lh) * _S
        hi[:, 0::2] = (hl + hh) * _S
        hi[:, 1::2] = (hl - hh) * _S
        a = np.empty((2 * lo.shape[0], lo.shape[1]))
        a[0::2] = (lo + hi) * _S
        a[1::2] = (lo - hi) * _S
    return a


def soft_threshold(c: np.ndarray, t: float) -> np.ndarray:
    return np.sign(c) * np.maximum(np.abs(c) - t, 0.0)


def haar_wavelet_denoise(x, t: float, levels: int = 3, mask=None) -> np.ndarray:
    """Soft-threshold every Haar detail coefficient by *t*.

    The image is mirror-padded up to a multiple of ``2**levels`` and cropped
    back afterwards.  *mask* is accepted for interface symmetry; the transform
    is global so every pixel is computed anyway.
    """
    if t < 0:
        raise ValueError("threshold must be >= 0")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    x = as_image(x)
    H, W = x.shape
    step = 2 ** levels
    ph, pw = (-H) % step, (-W) % step
    a = np.pad(x, ((0, ph), (0, pw)), mode="reflect") if (ph or pw) else x
    coeffs = haar2d(a, levels)
    coeffs = [coeffs[0]] + [tuple(soft_threshold(d, t) for d in lvl) for lvl in coeffs[1:]]
    return ihaar2d(coeffs)[:H, :W]


# -- NL-means -----------------------------------------------------------------

def nl_means(x, h: float, patch: int = 5, window: int = 11, mask=None) -> np.ndarray:
    """Non-local means with weights ``exp(-D / h^2)``.

    ``D`` is the mean squared difference between the patches around the two
    pixels; every pixel of the search window, the centre included, takes part.
    """
    if not h > 0:
        raise ValueError("h must be > 0")
    if patch < 1 or window < 1 or patch % 2 == 0 or window % 2 == 0:
        raise ValueError("patch and window must be odd positive integers")
    if patch > window:
        raise ValueError("patch must not exceed window")
    x = as_image(x)
    H, W = x.shape
    pad = patch // 2 + window // 2
    padded = np.ascontiguousarray(np.pad(x, pad, mode="reflect"))
    return kernels.nl_means(padded, H, W, float(h), int(patch), int(window), _mask_arg(mask, x.shape))


# -- parameter records --------------------------------------------------------

@dataclass(frozen=True)
class MedianRadius:
    r: int
    include_center: bool = False

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("radius must be >= 1")

    def __call__(self, x, mask=None):
        return median_filter(x, self.r, self.include_center, mask=mask)

    @property
    def value(self):
        return self.r

    def __str__(self):
        return str(self.r)


@dataclass(frozen=True)
class WaveletThreshold:
    t: float
    levels: int = 3

    def __post_init__(self):
        if self.t < 0 or self.levels < 1:
            raise ValueError("need t >= 0 and levels >= 1")

    def __call__(self, x, mask=None):
        return haar_wavelet_denoise(x, self.t, self.levels, mask=mask)

    @property
    def value(self):
        return self.t

    def __str__(self):
        return repr(float(self.t))


@dataclass(frozen=True)
class NlmCutoff:
    h: float
    patch: int = 5
    window: int = 11

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be > 0")
        if self.patch % 2 == 0 or self.window % 2 == 0 or self.patch > self.window:
            raise ValueError("patch and window must be odd with patch <= window")

    def __call__(self, x, mask=None):
        return nl_means(x, self.h, self.patch, self.window, mask=mask)

    @property
    def value(self):
        return self.h

    def __str__(self):
        return repr(float(self.h))


DenoiserParam = (MedianRadius, WaveletThreshold, NlmCutoff)


def denoise(x, param, mask=None) -> np.ndarray:
    return param(x, mask=mask)
