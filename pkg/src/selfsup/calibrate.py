"""Self-supervised losses, hyperparameter sweeps and post-hoc corrections.

All losses are per-pixel means, so a noise variance ``sigma**2`` is directly
comparable with them.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import Partition, as_image
from .jinv import InterpolateNeighbors, JInvariantDenoiser
from .noise import NoiseSpec, UnsupportedSpec, apply_noise, is_unbiased


def mse(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


# squared errors below this are floating-point rounding, not signal differences
_EXACT_MSE = (16 * np.finfo(np.float64).eps) ** 2


def psnr(a, ref) -> float:
    """``10 log10(1 / mse)`` for unit-range images.

    Returns ``inf`` when the inputs agree up to rounding error (mse below
    ``(16 eps)^2``), e.g. after undoing an affine distortion.
    """
    err = mse(a, ref)
    return math.inf if err <= _EXACT_MSE else 10.0 * math.log10(1.0 / err)


def self_supervised_loss(f, x) -> float:
    """``mse(f(x), x)``; only meaningful when *f* is J-invariant."""
    x = as_image(x)
    return mse(f(x), x)


@dataclass(frozen=True)
class DecompositionReport:
    lhs: float
    rhs: float
    gap: float
    se: float
    n: int


def check_loss_decomposition(f, y, spec: NoiseSpec, seeds) -> DecompositionReport:
    """Compare ``E|f(x) - x|^2`` with ``E|f(x) - y|^2 + E|x - y|^2`` over noise draws.

    ``se`` is the standard error of the paired per-seed differences.
    """
    if not is_unbiased(spec):
        raise UnsupportedSpec("the decomposition needs conditionally unbiased, unclipped noise")
    y = as_image(y)
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    lhs, rhs = [], []
    for s in seeds:
        x = apply_noise(y, spec, s)
        fx = f(x)
        lhs.append(mse(fx, x))
        rhs.append(mse(fx, y) + mse(x, y))
    lhs, rhs = np.array(lhs), np.array(rhs)
    diff = lhs - rhs
    se = float(diff.std(ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else math.nan
    return DecompositionReport(float(lhs.mean()), float(rhs.mean()), float(abs(diff.mean())), se, diff.size)


# -- calibration curves -------------------------------------------------------

@dataclass
class CurveEntry:
    param: object
    ss_loss: float
    gt_loss: float | None = None
    psnr: float | None = None


def _param_value(p):
    return getattr(p, "value", p)


@dataclass
class CalibrationCurve:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def params(self):
        return [e.param for e in self.entries]

    @property
    def ss_loss(self) -> np.ndarray:
        return np.array([e.ss_loss for e in self.entries])

    @property
    def gt_loss(self) -> np.ndarray:
        return np.array([np.nan if e.gt_loss is None else e.gt_loss for e in self.entries])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "ss_loss", "gt_loss", "psnr"])
        for e in self.entries:
            w.writerow([str(e.param), repr(e.ss_loss),
                        "" if e.gt_loss is None else repr(e.gt_loss),
                        "" if e.psnr is None else repr(e.psnr)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "CalibrationCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        entries = []
        for row in rows:
            p = row["param"]
            try:
                p = int(p)
            except ValueError:
                p = float(p)
            opt = lambda s: float(s) if s != "" else None  # noqa: E731
            entries.append(CurveEntry(p, float(row["ss_loss"]), opt(row["gt_loss"]), opt(row["psnr"])))
        return cls(entries)


def sweep(params, x, partition: Partition | None = None, replacement=InterpolateNeighbors(),
          y=None, workers: int = 1) -> CalibrationCurve:
    """Self-supervised (and, with *y*, ground-truth) loss for every parameter.

    With a *partition* each parameter's denoiser is wrapped by the masking
    construction; without one it is applied as-is, which is right for filters
    that are J-invariant by design such as the donut median.
    """
    params = list(params)
    if not params:
        raise ValueError("params must be non-empty")
    x = as_image(x)
    y = None if y is None else as_image(y)

    def one(p):
        f = JInvariantDenoiser(p, partition, replacement) if partition is not None else p
        fx = f(x)
        if y is None:
            return CurveEntry(p, mse(fx, x))
        return CurveEntry(p, mse(fx, x), mse(fx, y), psnr(fx, y))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            entries = list(pool.map(one, params))
    else:
        entries = [one(p) for p in params]
    return CalibrationCurve(entries)


def select_best(curve: CalibrationCurve):
    """Parameter with the smallest self-supervised loss; ties go to the smallest parameter."""
    if not len(curve):
        raise ValueError("empty curve")
    best = min(curve.entries, key=lambda e: (e.ss_loss, _param_value(e.param)))
    return best.param


# -- corrections --------------------------------------------------------------

@dataclass(frozen=True)
class MixingResult:
    lam: float
    mixed: np.ndarray
    predicted_psnr_gain: float


def optimal_mixing(fx, x, noise_var: float, ss_loss: float) -> MixingResult:
    """Blend ``lam * f(x) + (1 - lam) * x`` with ``lam = noise_var / ss_loss``.

    ``f(x)`` and ``x`` are uncorrelated estimates of the signal when *f* is
    J-invariant, with variances ``ss_loss - noise_var`` and ``noise_var``.
    """
    if not 0 < noise_var <= ss_loss:
        raise ValueError("need 0 < noise_var <= ss_loss")
    fx, x = as_image(fx), as_image(x)
    if fx.shape != x.shape:
        raise ValueError("shape mismatch")
    lam = noise_var / ss_loss
    residual = ss_loss - noise_var
    gain = 10.0 * math.log10(1.0 + residual / noise_var)
    return MixingResult(lam, lam * fx + (1.0 - lam) * x, gain)


def rescale_to_moments(out, ref) -> np.ndarray:
    """Affine map of *out* whose mean and variance equal those of *ref*."""
    out, ref = as_image(out), as_image(ref)
    if out.shape != ref.shape:
        raise ValueError("shape mismatch")
    s_out = out.std()
    if s_out == 0:
        warnings.warn("output has zero variance; returning the reference mean", RuntimeWarning, stacklevel=2)
        return np.full_like(out, ref.mean())
    a = ref.std() / s_out
    return a * (out - out.mean()) + ref.mean()
