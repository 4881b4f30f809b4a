"""Procedural Moire interference synthesis.

A pattern is a superposition of radial sine waves.  Component i has a
center c_i = (c_x, c_y) in continuous pixel coordinates and a frequency
f_i in cycles per image width; the field value at integer pixel (u, v) is

    M(u, v) = sum_i sin(2*pi * f_i * sqrt((u - c_x)^2 + (v - c_y)^2) / W)

The distance normalization divides by the width W even for non-square
images.  The accumulated field is min-max normalized to [0, 1] and
replicated across three channels.

This is the hot path of the whole package: a training data loader calls it
once per sample, so the renderer uses cached coordinate grids and in-place
ufuncs to keep per-image cost low.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .imagecore import ImageBuffer, GrayField, replicate_channels

MINMAX_EPS = 1e-9


@dataclass(frozen=True)
class MoireConfig:
    """Sampling ranges for pattern generation.

    ``n_max`` defaults to 3; the printed upper bound of 5 remains reachable
    by configuration.  Frequency band ablations (low/mid/high) are expressed
    by narrowing (f_min, f_max).
    """

    width: int
    height: int
    n_max: int = 3
    f_min: float = 1.0
    f_max: float = 100.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"invalid size {self.width}x{self.height}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if not (0 < self.f_min <= self.f_max):
            raise ValueError(f"need 0 < f_min <= f_max, got [{self.f_min}, {self.f_max}]")


@dataclass(frozen=True)
class MoireParams:
    """Sampled parameters for one pattern: (c_x, c_y, f) per component."""

    n: int
    components: tuple  # of (c_x, c_y, f) float triples

    def __post_init__(self):
        if self.n < 1 or len(self.components) != self.n:
            raise ValueError(f"n={self.n} does not match {len(self.components)} components")

    def to_dict(self) -> dict:
        return {"n": self.n, "components": [list(c) for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "MoireParams":
        return cls(n=int(d["n"]), components=tuple(tuple(c) for c in d["components"]))


def sample_moire_params(stream: np.random.Generator, cfg: MoireConfig) -> MoireParams:
    """Draw pattern parameters from a stream.

    Draw order is fixed: n first, then (c_x, c_y, f) for each component in
    turn.  n is uniform on {1..n_max}; centers are continuous uniform on
    [0, W) x [0, H); frequencies are continuous uniform on [f_min, f_max].
    """
    n = int(stream.integers(1, cfg.n_max + 1))
    comps = []
    for _ in range(n):
        cx = stream.uniform(0.0, cfg.width)
        cy = stream.uniform(0.0, cfg.height)
        f = stream.uniform(cfg.f_min, cfg.f_max)
        comps.append((cx, cy, f))
    return MoireParams(n=n, components=tuple(comps))


@lru_cache(maxsize=8)
def _grids(width: int, height: int):
    # Cached read-only coordinate grids; callers must not mutate them.
    v, u = np.mgrid[0:height, 0:width]
    u = u.astype(np.float64)
    v = v.astype(np.float64)
    u.setflags(write=False)
    v.setflags(write=False)
    return u, v


def render_moire(params: MoireParams, width: int, height: int) -> GrayField:
    """Accumulate the radial sine components into an unbounded gray field.

    Pixel coordinates are the integer indices (u, v) themselves; distances
    are normalized by the width only.  All arithmetic runs in float64 and
    reuses scratch buffers, which keeps this roughly at memory bandwidth.
    """
    u, v = _grids(width, height)
    acc = None
    for cx, cy, f in params.components:
        t = u - cx
        t *= t
        t2 = v - cy
        t2 *= t2
        t += t2
        np.sqrt(t, out=t)
        t *= 2.0 * np.pi * f / width
        np.sin(t, out=t)
        if acc is None:
            acc = t
        else:
            acc += t
    return acc


def normalize_minmax(field: GrayField) -> GrayField:
    """Affinely rescale a field so its minimum is 0 and its maximum is 1.

    Near-constant fields (max - min <= 1e-9) map to all zeros instead of
    dividing by zero.
    """
    field = np.asarray(field, dtype=np.float64)
    lo = field.min()
    hi = field.max()
    if hi - lo <= MINMAX_EPS:
        return np.zeros_like(field)
    return (field - lo) / (hi - lo)


def generate_moire_image(stream: np.random.Generator, cfg: MoireConfig) -> ImageBuffer:
    """Sample, render, normalize, and replicate one pattern to 3 channels."""
    params = sample_moire_params(stream, cfg)
    field = render_moire(params, cfg.width, cfg.height)
    return replicate_channels(normalize_minmax(field))
