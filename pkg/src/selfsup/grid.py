"""Rasters, index partitions and masked gather/scatter.

Images are plain 2-D ``float64`` arrays of shape ``(height, width)``.  A pixel's
linear index is row-major, ``idx = r * width + c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def as_image(values, copy: bool = False) -> np.ndarray:
    """Validate and convert *values* to a finite 2-D float64 raster."""
    img = np.array(values, dtype=np.float64, copy=copy) if copy else np.asarray(values, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


@dataclass(frozen=True)
class Partition:
    """A partition of ``range(m)`` into non-empty, disjoint subsets."""

    m: int
    subsets: tuple[np.ndarray, ...]
    labels: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("partition needs m >= 1")
        subsets = tuple(np.asarray(s, dtype=np.intp).ravel() for s in self.subsets)
        labels = np.full(self.m, -1, dtype=np.intp)
        for i, s in enumerate(subsets):
            if s.size == 0:
                raise ValueError(f"subset {i} is empty")
            if s.min() < 0 or s.max() >= self.m:
                raise ValueError(f"subset {i} has indices outside 0..{self.m - 1}")
            if np.any(labels[s] != -1) or np.unique(s).size != s.size:
                raise ValueError(f"subset {i} overlaps another subset")
            labels[s] = i
        if np.any(labels < 0):
            raise ValueError("subsets do not cover every index")
        labels.setflags(write=False)
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels, dtype=np.intp).ravel()
        k = int(labels.max()) + 1
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(k + 1))
        return cls(labels.size, tuple(order[bounds[i]:bounds[i + 1]] for i in range(k)))

    def __len__(self) -> int:
        return len(self.subsets)

    def __iter__(self):
        return iter(self.subsets)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.subsets[i]

    def mask(self, i: int, shape: tuple[int, int] | None = None) -> np.ndarray:
        """Boolean indicator of subset *i*, reshaped to *shape* if given."""
        out = self.labels == i
        return out.reshape(shape) if shape is not None else out


def partition_singletons(m: int) -> Partition:
    if m < 1:
        raise ValueError("m must be >= 1")
    return Partition.from_labels(np.arange(m))


def partition_grid(width: int, height: int, gw: int, gh: int) -> Partition:
    """Residue-class partition: pixel (r, c) goes to subset ``(r % gh) * gw + c % gw``."""
    if not (1 <= gw <= width and 1 <= gh <= height):
        raise ValueError(f"grid {gw}x{gh} does not fit a {width}x{height} image")
    r, c = np.mgrid[0:height, 0:width]
    return Partition.from_labels((r % gh) * gw + (c % gw))


def partition_random(m: int, k: int, seed: int = 0) -> Partition:
    """Assign each index to one of *k* subsets i.i.d. uniformly.

    Any subset left empty takes one index from a randomly chosen subset that
    can spare it, so the call always succeeds, also for *k* close to *m*.
    """
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, size=m)
    sizes = np.bincount(labels, minlength=k)
    for e in np.flatnonzero(sizes == 0):
        donors = np.flatnonzero(sizes[labels] > 1)
        i = donors[rng.integers(donors.size)]
        sizes[labels[i]] -= 1
        labels[i] = e
        sizes[e] = 1
    return Partition.from_labels(labels)


def _check_indices(img: np.ndarray, J) -> np.ndarray:
    J = np.asarray(J, dtype=np.intp).ravel()
    if J.size and (J.min() < 0 or J.max() >= img.size):
        raise IndexError(f"index out of range for image of {img.size} pixels")
    return J


def gather(img: np.ndarray, J) -> np.ndarray:
    """Values of *img* at linear indices *J*, in *J*'s order."""
    img = np.asarray(img)
    return img.ravel()[_check_indices(img, J)].copy()


def scatter(img: np.ndarray, J, vals) -> np.ndarray:
    """Copy of *img* with linear indices *J* replaced by *vals*."""
    img = np.asarray(img)
    J = _check_indices(img, J)
    vals = np.asarray(vals, dtype=img.dtype).ravel()
    if vals.size != J.size:
        raise ValueError(f"{vals.size} values for {J.size} indices")
    out = img.copy()
    out.ravel()[J] = vals
    return out
