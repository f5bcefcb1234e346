"""Pure numpy versions of the compiled kernels (same signatures)."""

import numpy as np


def _reflect(i, n):
    if n == 1:
        return np.zeros_like(i)
    period = 2 * (n - 1)
    i = np.mod(i, period)
    return np.where(i >= n, period - i, i)


def disk_median(img, dr, dc, include_center, mask=None):
    img = np.ascontiguousarray(img, dtype=np.float64)
    H, W = img.shape
    out = img.copy()
    if mask is None:
        rows, cols = np.divmod(np.arange(img.size), W)
    else:
        rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return out
    rr = _reflect(rows[None, :] + np.asarray(dr)[:, None], H)
    cc = _reflect(cols[None, :] + np.asarray(dc)[:, None], W)
    vals = img[rr, cc]
    if include_center:
        vals = np.vstack([img[rows, cols][None, :], vals])
        med = np.median(vals, axis=0)
    else:
        own = (rr == rows) & (cc == cols)
        if own.any():
            if own.all(axis=0).any():
                raise ValueError("empty neighbourhood; image too small for a donut filter")
            vals = np.where(own, np.nan, vals)
            med = np.nanmedian(vals, axis=0)
        else:
            med = np.median(vals, axis=0)
    out[rows, cols] = med
    return out


def _box_sum(a, k):
    """Sum over k x k windows (valid region only)."""
    s = np.cumsum(np.cumsum(a, axis=0), axis=1)
    s = np.pad(s, ((1, 0), (1, 0)))
    return s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]


def nl_means(padded, H, W, h, patch, window, mask=None):
    padded = np.asarray(padded, dtype=np.float64)
    hp, hw = patch // 2, window // 2
    off = hp + hw
    # the region whose patches are fully inside the padding
    inner = padded[hw:hw + H + 2 * hp, hw:hw + W + 2 * hp]
    centre = padded[off:off + H, off:off + W]
    wsum = np.zeros((H, W))
    acc = np.zeros((H, W))
    scale = 1.0 / (patch * patch * h * h)
    for dr in range(-hw, hw + 1):
        for dc in range(-hw, hw + 1):
            shifted = padded[hw + dr:hw + dr + H + 2 * hp, hw + dc:hw + dc + W + 2 * hp]
            d = _box_sum((inner - shifted) ** 2, patch)
            w = np.exp(-d * scale)
            wsum += w
            acc += w * padded[off + dr:off + dr + H, off + dc:off + dc + W]
    out = acc / wsum
    if mask is not None:
        out = np.where(mask.astype(bool), out, centre)
    return out
