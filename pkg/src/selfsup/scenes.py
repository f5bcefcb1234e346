"""Procedural test scenes: piecewise-constant shapes over smooth gradients."""

import numpy as np


def synthetic_scene(size: int = 256, seed: int = 0, n_shapes: int = 14, width: int | None = None) -> np.ndarray:
    """Deterministic scene with values in ``[0.1, 0.9]``.

    A smooth background (linear ramp plus a low-frequency wave) is overlaid
    with rectangles, discs and stripe patches of random intensity.
    """
    H, W = size, (size if width is None else width)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:H, 0:W]
    u, v = yy / H, xx / W
    a, b = rng.uniform(-0.3, 0.3, size=2)
    fy, fx = rng.uniform(0.5, 2.0, size=2)
    img = 0.5 + a * (u - 0.5) + b * (v - 0.5) + 0.1 * np.sin(2 * np.pi * (fy * u + fx * v))
    for _ in range(n_shapes):
        level = rng.uniform(0.0, 1.0)
        kind = rng.integers(3)
        cy, cx = rng.uniform(0, H), rng.uniform(0, W)
        if kind == 0:
            hh, hw = rng.uniform(0.05, 0.25) * H, rng.uniform(0.05, 0.25) * W
            inside = (np.abs(yy - cy) < hh) & (np.abs(xx - cx) < hw)
        elif kind == 1:
            rad = rng.uniform(0.04, 0.2) * min(H, W)
            inside = (yy - cy) ** 2 + (xx - cx) ** 2 < rad ** 2
        else:
            rad = rng.uniform(0.08, 0.2) * min(H, W)
            period = rng.uniform(6, 14)
            theta = rng.uniform(0, np.pi)
            phase = (np.cos(theta) * yy + np.sin(theta) * xx) / period
            inside = ((yy - cy) ** 2 + (xx - cx) ** 2 < rad ** 2) & (np.floor(phase) % 2 == 0)
        img = np.where(inside, level, img)
    lo, hi = img.min(), img.max()
    return 0.1 + 0.8 * (img - lo) / (hi - lo)
