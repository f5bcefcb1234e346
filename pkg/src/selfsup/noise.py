"""Seeded synthetic noise models.

Every model is a small frozen dataclass; a :class:`Composite` applies several in
order and optionally clips.  Randomness comes from a per-step Philox stream
keyed on ``(seed, step)``, drawn in raster order, so output depends only on the
input, the noise model and the seed.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, fields
from typing import Union

import numpy as np

from .grid import as_image


class UnsupportedSpec(ValueError):
    """Raised when an analytic quantity is undefined for a noise spec."""


@dataclass(frozen=True)
class Gaussian:
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class Poisson:
    """Shot noise: ``k ~ Poisson(peak * x)``, returned as ``k / peak``."""

    peak: float

    def __post_init__(self):
        if not self.peak > 0:
            raise ValueError("peak must be > 0")


@dataclass(frozen=True)
class Bernoulli:
    """Each pixel is set, with probability *p*, to *low* or *high* (equally likely)."""

    p: float
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")


@dataclass(frozen=True)
class CauchyAdditive:
    scale: float

    def __post_init__(self):
        if not self.scale >= 0:
            raise ValueError("scale must be >= 0")


@dataclass(frozen=True)
class GainField:
    """Per-pixel multiplicative gain ``1 + Normal(0, sigma_gain)``, fixed per image."""

    sigma_gain: float

    def __post_init__(self):
        if not self.sigma_gain >= 0:
            raise ValueError("sigma_gain must be >= 0")


Step = Union[Gaussian, Poisson, Bernoulli, CauchyAdditive, GainField]
_STEPS = {"gaussian": Gaussian, "poisson": Poisson, "bernoulli": Bernoulli,
          "cauchy": CauchyAdditive, "gain": GainField}
_NAMES = {cls: name for name, cls in _STEPS.items()}


@dataclass(frozen=True)
class Composite:
    steps: tuple = ()
    clip: tuple[float, float] | None = None

    def __post_init__(self):
        steps = tuple(self.steps)
        for s in steps:
            if type(s) not in _NAMES:
                raise ValueError(f"not a noise step: {s!r}")
        if self.clip is not None:
            lo, hi = map(float, self.clip)
            if not lo < hi:
                raise ValueError("clip needs lo < hi")
            object.__setattr__(self, "clip", (lo, hi))
        object.__setattr__(self, "steps", steps)


NoiseSpec = Union[Step, Composite]


# Camera-like default for a harsh low-light regime: few photons, per-pixel
# gain variation, read noise and rare heavy-tailed outliers.
PRESETS = {
    "scmos": Composite((Poisson(20.0), GainField(0.1), Gaussian(0.05), CauchyAdditive(0.01))),
}


def as_composite(spec: NoiseSpec) -> Composite:
    if isinstance(spec, Composite):
        return spec
    if type(spec) in _NAMES:
        return Composite((spec,))
    raise ValueError(f"not a noise spec: {spec!r}")


def _rng(seed: int, step: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), step])))


def apply_noise(y, spec: NoiseSpec, seed: int = 0) -> np.ndarray:
    """Corrupt the clean image *y* according to *spec*."""
    spec = as_composite(spec)
    x = as_image(y, copy=True)
    for i, step in enumerate(spec.steps):
        rng = _rng(seed, i)
        if isinstance(step, Gaussian):
            if step.sigma > 0:
                x = x + step.sigma * rng.standard_normal(x.shape)
        elif isinstance(step, Poisson):
            # negative intensities (e.g. after Gaussian noise) have zero rate
            x = rng.poisson(step.peak * np.maximum(x, 0.0)) / step.peak
        elif isinstance(step, Bernoulli):
            hit = rng.random(x.shape) < step.p
            hot = rng.random(x.shape) < 0.5
            x = np.where(hit, np.where(hot, step.high, step.low), x)
        elif isinstance(step, CauchyAdditive):
            if step.scale > 0:
                x = x + step.scale * rng.standard_cauchy(x.shape)
        elif isinstance(step, GainField):
            x = x * (1.0 + step.sigma_gain * rng.standard_normal(x.shape))
    if spec.clip is not None:
        x = np.clip(x, *spec.clip)
    return x


def noise_variance(spec: NoiseSpec, y) -> float:
    """Analytic per-pixel mean of ``E (x - y)^2``.

    Tracks the first two moments of every pixel through the steps, assuming
    the steps draw independent randomness.
    """
    spec = as_composite(spec)
    if spec.clip is not None:
        raise UnsupportedSpec("variance is not tracked through clipping")
    y = as_image(y)
    m1 = y.copy()
    m2 = y * y
    for step in spec.steps:
        if isinstance(step, Gaussian):
            m2 = m2 + step.sigma ** 2
        elif isinstance(step, Poisson):
            m2 = m2 + np.maximum(m1, 0.0) / step.peak
        elif isinstance(step, Bernoulli):
            p = step.p
            m1 = (1 - p) * m1 + p * 0.5 * (step.low + step.high)
            m2 = (1 - p) * m2 + p * 0.5 * (step.low ** 2 + step.high ** 2)
        elif isinstance(step, GainField):
            m2 = m2 * (1 + step.sigma_gain ** 2)
        elif isinstance(step, CauchyAdditive):
            raise UnsupportedSpec("Cauchy noise has no variance")
    return float(np.mean(m2 - 2 * y * m1 + y * y))


def is_unbiased(spec: NoiseSpec) -> bool:
    """True when ``E[x | y] = y`` holds for every non-negative *y*."""
    spec = as_composite(spec)
    if spec.clip is not None:
        return False
    for step in spec.steps:
        if isinstance(step, (CauchyAdditive, Bernoulli)) and not _is_trivial(step):
            return False
    return True


def _is_trivial(step: Step) -> bool:
    return (isinstance(step, Bernoulli) and step.p == 0) or (
        isinstance(step, CauchyAdditive) and step.scale == 0)


# -- text configuration -------------------------------------------------------

def parse_step(text: str) -> Step:
    """Parse ``"gaussian sigma=0.1"`` into a step."""
    words = shlex.split(text)
    if not words:
        raise ValueError("empty noise step")
    kind, args = words[0].lower(), words[1:]
    if kind not in _STEPS:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {sorted(_STEPS)}")
    cls = _STEPS[kind]
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for arg in args:
        key, sep, value = arg.partition("=")
        if not sep or key not in names:
            raise ValueError(f"bad argument {arg!r} for {kind}; expected key=value with key in {sorted(names)}")
        kwargs[key] = float(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"{kind}: {exc}") from None


def format_step(step: Step) -> str:
    args = " ".join(f"{f.name}={getattr(step, f.name)!r}" for f in fields(step))
    return f"{_NAMES[type(step)]} {args}"


def parse_spec(text: str) -> Composite:
    """Parse a key=value noise configuration.

    One ``step = <kind> key=value ...`` line per step, applied in file order,
    plus an optional ``clip = lo,hi`` line.  ``#`` starts a comment.
    """
    steps, clip = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value")
        if key == "step":
            steps.append(parse_step(value))
        elif key == "clip":
            lo, hi = (float(v) for v in value.split(","))
            clip = (lo, hi)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return Composite(tuple(steps), clip)


def format_spec(spec: NoiseSpec) -> str:
    spec = as_composite(spec)
    lines = [f"step = {format_step(s)}" for s in spec.steps]
    if spec.clip is not None:
        lines.append(f"clip = {spec.clip[0]!r},{spec.clip[1]!r}")
    return "\n".join(lines) + "\n"
