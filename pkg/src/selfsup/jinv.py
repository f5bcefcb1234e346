"""Masking construction turning any denoiser into a J-invariant one.

For every subset ``J`` of a partition the pixels in ``J`` are replaced (by a
neighbour interpolation or by random values), the base denoiser is run on the
result, and only its output on ``J`` is kept.  The output on ``J`` therefore
cannot depend on the input on ``J``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .denoise import DenoiserParam
from .grid import Partition, as_image


def _neighbour_sum(a: np.ndarray) -> np.ndarray:
    p = np.pad(a, 1, mode="reflect")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]


def interpolate_neighbors(x, exclude=None) -> np.ndarray:
    """Replace each pixel by the mean of its four edge neighbours (reflect-101 borders).

    With a boolean *exclude* mask, neighbours inside the mask are left out and
    the remaining ones re-averaged; a pixel with no usable neighbour gets the
    mean of all non-excluded pixels.  For partitions that put adjacent pixels
    in different subsets the exclusion changes nothing.
    """
    x = as_image(x)
    if min(x.shape) < 2:
        raise ValueError("neighbour interpolation needs an image at least 2x2")
    if exclude is None:
        return 0.25 * _neighbour_sum(x)
    keep = ~np.asarray(exclude, dtype=bool).reshape(x.shape)
    num = _neighbour_sum(np.where(keep, x, 0.0))
    den = _neighbour_sum(keep.astype(np.float64))
    out = np.empty_like(x)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    if not ok.all():
        out[~ok] = x[keep].mean() if keep.any() else 0.0
    return out


@dataclass(frozen=True)
class InterpolateNeighbors:
    def field(self, x: np.ndarray, jmask: np.ndarray) -> np.ndarray:
        return interpolate_neighbors(x, exclude=jmask)


@dataclass(frozen=True)
class RandomUniform:
    """Replace masked pixels with uniform values on ``[lo, hi)``.

    The values depend only on ``seed`` and the image shape, so the resulting
    function is deterministic.  ``fresh=True`` draws new values on every call,
    giving a random J-invariant function instead.
    """

    lo: float = 0.0
    hi: float = 1.0
    seed: int = 0
    fresh: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    def field(self, x: np.ndarray, jmask: np.ndarray) -> np.ndarray:
        rng = np.random.default_rng() if self.fresh else np.random.default_rng([self.seed, *x.shape])
        return rng.uniform(self.lo, self.hi, size=x.shape)


ReplacementStrategy = (InterpolateNeighbors, RandomUniform)


def _run_base(base, x, jmask):
    if isinstance(base, DenoiserParam):
        return base(x, mask=jmask)
    return np.asarray(base(x), dtype=np.float64)


@dataclass(frozen=True)
class JInvariantDenoiser:
    """``f(x)_J = g(1_J * s(x) + 1_{J^c} * x)_J`` for every ``J`` in *partition*."""

    base: Callable
    partition: Partition
    replacement: object = InterpolateNeighbors()
    workers: int = 1

    def _check(self, x):
        x = as_image(x)
        if self.partition.m != x.size:
            raise ValueError(f"partition covers {self.partition.m} pixels, image has {x.size}")
        return x

    def _masked_output(self, x: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
        J = self.partition[j]
        jmask = self.partition.mask(j, x.shape)
        xm = np.where(jmask, self.replacement.field(x, jmask), x)
        out = _run_base(self.base, xm, jmask)
        return out.ravel()[J], J

    def __call__(self, x) -> np.ndarray:
        return evaluate_j_invariant(self, x)

    def raw(self, x) -> np.ndarray:
        """The unmasked base denoiser applied to *x*."""
        return _run_base(self.base, as_image(x), None)


def evaluate_j_invariant(f: JInvariantDenoiser, x) -> np.ndarray:
    x = f._check(x)
    out = np.empty(x.size)
    idx = range(len(f.partition))
    if f.workers > 1:
        with ThreadPoolExecutor(f.workers) as pool:
            parts = list(pool.map(lambda j: f._masked_output(x, j), idx))
    else:
        parts = [f._masked_output(x, j) for j in idx]
    for vals, J in parts:
        out[J] = vals
    return out.reshape(x.shape)


def evaluate_single_J(f: JInvariantDenoiser, x, j_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Masked output on subset *j_index* only, with the subset's indices."""
    x = f._check(x)
    if not 0 <= j_index < len(f.partition):
        raise IndexError(f"subset index {j_index} out of range 0..{len(f.partition) - 1}")
    return f._masked_output(x, j_index)


@dataclass(frozen=True)
class InvarianceReport:
    max_deviation: float
    passed: bool
    trials: int


def verify_j_invariance(f, x, trials: int = 100, seed: int = 0, tol: float = 0.0,
                        partition: Partition | None = None) -> InvarianceReport:
    """Perturb ``x_J`` for random ``J`` and measure the change of ``f(x)_J``.

    *f* may be a :class:`JInvariantDenoiser` (its own partition is used) or any
    image-to-image callable together with an explicit *partition*.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = as_image(x)
    if partition is None:
        partition = getattr(f, "partition", None)
        if partition is None:
            raise ValueError("a partition is required for a plain callable")
    if partition.m != x.size:
        raise ValueError("partition does not match image size")
    rng = np.random.default_rng(seed)
    lo, hi = x.min() - 1.0, x.max() + 1.0
    masked = isinstance(f, JInvariantDenoiser)
    base_out = None if masked else np.asarray(f(x)).ravel()
    worst = 0.0
    for _ in range(trials):
        j = int(rng.integers(len(partition)))
        J = partition[j]
        xp = x.copy()
        xp.ravel()[J] = rng.uniform(lo, hi, size=J.size)
        if masked:
            before, _ = evaluate_single_J(f, x, j)
            after, _ = evaluate_single_J(f, xp, j)
        else:
            before = base_out[J]
            after = np.asarray(f(xp)).ravel()[J]
        worst = max(worst, float(np.max(np.abs(after - before))))
    return InvarianceReport(worst, worst <= tol, trials)
