"""Alternative procedural texture generators behind one interface.

Five kinds share the signature ``generate(kind, stream, cfg)``:

* ``moire``         - radial interference fringes (delegates to :mod:`.moire`)
* ``perlin``        - single-octave gradient noise, low-frequency dominated
* ``dead_leaves``   - occluding random disks, sharp edges
* ``stripe``        - one planar sine wave, single frequency and direction
* ``fourier_basis`` - independent planar-wave mixtures per RGB channel (the
  only colored kind)

Every generator is split into a sampling step that draws a parameter record
from the stream and a pure rendering step that maps the record to pixels.
The records serialize to JSON, so export manifests and mixing traces can
reproduce any texture without replaying the random stream.

The wave generators are vectorized transcriptions of their formulas (the
fourier kind reuses scratch buffers, since it runs several sine passes per
image); the disk painter leans on OpenCV's rasterizer because occlusion is
inherently sequential.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from . import moire as _moire
from .imagecore import ImageBuffer, replicate_channels
from .moire import MoireConfig, MoireParams, normalize_minmax

GENERATOR_KINDS = ("moire", "perlin", "dead_leaves", "stripe", "fourier_basis")

DEAD_LEAVES_BACKGROUND = 0.5
_DEAD_LEAVES_CHUNK = 256


@dataclass(frozen=True)
class GeneratorConfig:
    """Kind selector plus per-kind sampling ranges.

    Only the fields belonging to ``kind`` are consulted.  Defaults aim for
    visually distinct textures at natural-image resolutions; none of them
    are prescribed by the pattern definitions themselves.
    """

    kind: str
    width: int
    height: int
    # moire
    n_max: int = 3
    f_min: float = 1.0
    f_max: float = 100.0
    # perlin: lattice cell size in pixels, drawn uniformly from this range
    cell_min: int = 16
    cell_max: int = 64
    # dead leaves: radius density ~ r^-radius_exponent on [radius_min, radius_max]
    radius_exponent: float = 3.0
    radius_min: float = 2.0
    radius_max: float | None = None  # None means width / 2
    shape_cap: int = 2000
    # stripe
    stripe_f_min: float = 1.0
    stripe_f_max: float = 100.0
    # fourier basis: integer indices in [-freq_index_max, freq_index_max]^2 \ {0,0};
    # each channel superimposes waves_per_channel such waves
    freq_index_max: int = 32
    waves_per_channel: int = 2

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"invalid size {self.width}x{self.height}")
        if self.cell_min < 1 or self.cell_max < self.cell_min:
            raise ValueError("invalid perlin cell range")
        if self.radius_min <= 0 or (self.radius_max is not None and self.radius_max < self.radius_min):
            raise ValueError("invalid dead-leaves radius range")
        if self.shape_cap < 1:
            raise ValueError("shape_cap must be >= 1")
        if not (0 < self.stripe_f_min <= self.stripe_f_max):
            raise ValueError("invalid stripe frequency range")
        if self.freq_index_max < 1:
            raise ValueError("freq_index_max must be >= 1")
        if self.waves_per_channel < 1:
            raise ValueError("waves_per_channel must be >= 1")

    def moire_config(self) -> MoireConfig:
        return MoireConfig(
            width=self.width, height=self.height,
            n_max=self.n_max, f_min=self.f_min, f_max=self.f_max,
        )

    def effective_radius_max(self) -> float:
        return self.width / 2.0 if self.radius_max is None else self.radius_max


# ---------------------------------------------------------------------------
# stripe

@dataclass(frozen=True)
class StripeParams:
    frequency: float  # cycles per image width
    theta: float      # orientation in radians, [0, pi)

    def to_dict(self) -> dict:
        return {"frequency": self.frequency, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict) -> "StripeParams":
        return cls(frequency=float(d["frequency"]), theta=float(d["theta"]))


def sample_stripe_params(stream: np.random.Generator, cfg: GeneratorConfig) -> StripeParams:
    # Draw order: frequency, then orientation.
    f = stream.uniform(cfg.stripe_f_min, cfg.stripe_f_max)
    theta = stream.uniform(0.0, np.pi)
    return StripeParams(frequency=f, theta=theta)


def render_stripe_field(params: StripeParams, width: int, height: int) -> np.ndarray:
    u, v = _moire._grids(width, height)
    phase = u * np.cos(params.theta) + v * np.sin(params.theta)
    return np.sin(2.0 * np.pi * params.frequency * phase / width)


def generate_stripe(stream: np.random.Generator, cfg: GeneratorConfig) -> ImageBuffer:
    params = sample_stripe_params(stream, cfg)
    return replicate_channels(normalize_minmax(render_stripe_field(params, cfg.width, cfg.height)))


# ---------------------------------------------------------------------------
# perlin

@dataclass(frozen=True)
class PerlinParams:
    cell: int            # lattice cell size in pixels
    angles: tuple        # row-major gradient angles, shape (grid_h, grid_w)

    def to_dict(self) -> dict:
        return {"cell": self.cell, "angles": [list(row) for row in self.angles]}

    @classmethod
    def from_dict(cls, d: dict) -> "PerlinParams":
        return cls(cell=int(d["cell"]), angles=tuple(tuple(r) for r in d["angles"]))


def _perlin_grid_shape(cell: int, width: int, height: int) -> tuple[int, int]:
    return height // cell + 2, width // cell + 2


def sample_perlin_params(stream: np.random.Generator, cfg: GeneratorConfig) -> PerlinParams:
    # Draw order: cell size, then the gradient-angle block (row-major).
    cell = int(stream.integers(cfg.cell_min, cfg.cell_max + 1))
    gh, gw = _perlin_grid_shape(cell, cfg.width, cfg.height)
    angles = stream.uniform(0.0, 2.0 * np.pi, size=(gh, gw))
    return PerlinParams(cell=cell, angles=tuple(tuple(row) for row in angles))


def render_perlin_field(params: PerlinParams, width: int, height: int) -> np.ndarray:
    """Classic gradient noise: lattice dot products blended by a quintic fade.

    The field is exactly zero at lattice corners (zero offset dotted with
    any gradient) and C1-smooth everywhere.
    """
    angles = np.asarray(params.angles, dtype=np.float64)
    gx = np.cos(angles)
    gy = np.sin(angles)
    u, v = _moire._grids(width, height)
    x = u / params.cell
    y = v / params.cell
    x0 = x.astype(np.int64)
    y0 = y.astype(np.int64)
    dx = x - x0
    dy = y - y0

    def corner(ix, iy, ox, oy):
        return gx[iy, ix] * ox + gy[iy, ix] * oy

    n00 = corner(x0, y0, dx, dy)
    n10 = corner(x0 + 1, y0, dx - 1.0, dy)
    n01 = corner(x0, y0 + 1, dx, dy - 1.0)
    n11 = corner(x0 + 1, y0 + 1, dx - 1.0, dy - 1.0)
    fx = dx * dx * dx * (dx * (dx * 6.0 - 15.0) + 10.0)
    fy = dy * dy * dy * (dy * (dy * 6.0 - 15.0) + 10.0)
    nx0 = n00 + fx * (n10 - n00)
    nx1 = n01 + fx * (n11 - n01)
    return nx0 + fy * (nx1 - nx0)


def generate_perlin(stream: np.random.Generator, cfg: GeneratorConfig) -> ImageBuffer:
    params = sample_perlin_params(stream, cfg)
    return replicate_channels(normalize_minmax(render_perlin_field(params, cfg.width, cfg.height)))


# ---------------------------------------------------------------------------
# dead leaves

@dataclass(frozen=True)
class DeadLeavesParams:
    disks: tuple  # of (c_x, c_y, radius, intensity), painted first to last

    def to_dict(self) -> dict:
        return {"disks": [list(d) for d in self.disks]}

    @classmethod
    def from_dict(cls, d: dict) -> "DeadLeavesParams":
        return cls(disks=tuple(tuple(x) for x in d["disks"]))


def _radius_from_quantile(q: np.ndarray, r_min: float, r_max: float, exponent: float) -> np.ndarray:
    # Inverse CDF of the truncated power law density ~ r^-exponent.
    if abs(exponent - 1.0) < 1e-12:
        return r_min * (r_max / r_min) ** q
    p = 1.0 - exponent
    return (r_min ** p + q * (r_max ** p - r_min ** p)) ** (1.0 / p)


def _paint_disks(img: np.ndarray, disks: np.ndarray) -> None:
    # cv2 rasterizes with integer centers and radii; geometry is snapped to
    # the nearest pixel at paint time, later disks occlude earlier ones.
    # Scalar conversion happens vectorized up front: the 2000-call paint
    # loop is this generator's hot path.
    disks = np.asarray(disks, dtype=np.float64)
    cx = np.rint(disks[:, 0]).astype(np.int64).tolist()
    cy = np.rint(disks[:, 1]).astype(np.int64).tolist()
    r = np.maximum(np.rint(disks[:, 2]).astype(np.int64), 1).tolist()
    val = disks[:, 3].tolist()
    circle = cv2.circle
    for k in range(len(cx)):
        circle(img, (cx[k], cy[k]), r[k], val[k], thickness=-1)


def _sample_and_paint(stream: np.random.Generator, cfg: GeneratorConfig):
    """Draw disks until the canvas is covered or the shape cap is reached.

    Draws happen in chunks of 256 disks: the c_x block, then c_y, then the
    radius quantiles, then the intensities.  Coverage is checked between
    chunks (uncovered pixels still hold the 0.5 background sentinel), so up
    to a chunk of shapes may be painted past exact coverage.  Returns the
    painted field together with the raw parameter chunks so the single-pass
    result and the replayable parameters stay in sync.
    """
    width, height = cfg.width, cfg.height
    r_min = cfg.radius_min
    r_max = cfg.effective_radius_max()
    img = np.full((height, width), DEAD_LEAVES_BACKGROUND)
    chunks: list[np.ndarray] = []
    remaining = cfg.shape_cap
    while remaining > 0:
        m = min(_DEAD_LEAVES_CHUNK, remaining)
        cx = stream.uniform(0.0, width, size=m)
        cy = stream.uniform(0.0, height, size=m)
        q = stream.random(size=m)
        r = _radius_from_quantile(q, r_min, r_max, cfg.radius_exponent)
        val = stream.random(size=m)
        chunk = np.stack([cx, cy, r, val], axis=1)
        _paint_disks(img, chunk)
        chunks.append(chunk)
        remaining -= m
        # An intensity drawn exactly equal to the background sentinel would
        # only delay this stop check; that event has probability ~2^-53.
        if not (img == DEAD_LEAVES_BACKGROUND).any():
            break
    return img, chunks


def _params_from_chunks(chunks: list) -> DeadLeavesParams:
    if not chunks:
        return DeadLeavesParams(disks=())
    return DeadLeavesParams(disks=tuple(map(tuple, np.concatenate(chunks, axis=0).tolist())))


def sample_dead_leaves_params(stream: np.random.Generator, cfg: GeneratorConfig) -> DeadLeavesParams:
    return _params_from_chunks(_sample_and_paint(stream, cfg)[1])


def render_dead_leaves_field(params: DeadLeavesParams, width: int, height: int) -> np.ndarray:
    img = np.full((height, width), DEAD_LEAVES_BACKGROUND)
    if params.disks:
        _paint_disks(img, np.asarray(params.disks, dtype=np.float64))
    return img


def generate_dead_leaves(stream: np.random.Generator, cfg: GeneratorConfig) -> ImageBuffer:
    field, _ = _sample_and_paint(stream, cfg)
    return replicate_channels(normalize_minmax(field))


# ---------------------------------------------------------------------------
# fourier basis

@dataclass(frozen=True)
class FourierBasisParams:
    channels: tuple  # per RGB channel: a tuple of (i, j, phase) waves

    def to_dict(self) -> dict:
        return {"channels": [[list(w) for w in ch] for ch in self.channels]}

    @classmethod
    def from_dict(cls, d: dict) -> "FourierBasisParams":
        return cls(channels=tuple(
            tuple((int(w[0]), int(w[1]), float(w[2])) for w in ch) for ch in d["channels"]
        ))


def sample_fourier_basis_params(stream: np.random.Generator, cfg: GeneratorConfig) -> FourierBasisParams:
    """Per channel, per wave: one index pair without (0, 0), then one phase.

    The pair is drawn as a single integer over the (2m+1)^2 - 1 valid grid
    cells and unflattened, skipping the origin.
    """
    m = cfg.freq_index_max
    side = 2 * m + 1
    zero_linear = m * side + m
    chans = []
    for _ in range(3):
        waves = []
        for _ in range(cfg.waves_per_channel):
            idx = int(stream.integers(0, side * side - 1))
            if idx >= zero_linear:
                idx += 1
            i = idx // side - m
            j = idx % side - m
            phase = stream.uniform(0.0, 2.0 * np.pi)
            waves.append((i, j, phase))
        chans.append(tuple(waves))
    return FourierBasisParams(channels=tuple(chans))


def render_fourier_basis(params: FourierBasisParams, width: int, height: int) -> ImageBuffer:
    # The planar phase is separable, so each wave is built from one column
    # and one row phase vector broadcast together; with the shared scratch
    # buffer this keeps the per-wave cost at two full-image passes.  The
    # vectors are wrapped mod 2*pi so every sine argument stays in the fast
    # range-reduction regime regardless of the frequency indices drawn.
    two_pi = 2.0 * np.pi
    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    out = np.empty((height, width, 3), dtype=np.float64)
    t = np.empty((height, width), dtype=np.float64)
    acc = np.empty((height, width), dtype=np.float64)
    for c, waves in enumerate(params.channels):
        acc.fill(0.0)
        for i, j, phase in waves:
            cu = np.mod(cols * (two_pi * i / width), two_pi)
            rv = np.mod(rows * (two_pi * j / width) + phase, two_pi)
            np.add(rv[:, None], cu[None, :], out=t)
            np.sin(t, out=t)
            acc += t
        out[:, :, c] = normalize_minmax(acc)
    return out


def generate_fourier_basis(stream: np.random.Generator, cfg: GeneratorConfig) -> ImageBuffer:
    # The only generator with independent channels; no replication.
    params = sample_fourier_basis_params(stream, cfg)
    return render_fourier_basis(params, cfg.width, cfg.height)


# ---------------------------------------------------------------------------
# dispatch

_GENERATORS = {
    "perlin": generate_perlin,
    "dead_leaves": generate_dead_leaves,
    "stripe": generate_stripe,
    "fourier_basis": generate_fourier_basis,
}

_SAMPLERS = {
    "perlin": sample_perlin_params,
    "dead_leaves": sample_dead_leaves_params,
    "stripe": sample_stripe_params,
    "fourier_basis": sample_fourier_basis_params,
}

_PARAM_TYPES = {
    "moire": MoireParams,
    "perlin": PerlinParams,
    "dead_leaves": DeadLeavesParams,
    "stripe": StripeParams,
    "fourier_basis": FourierBasisParams,
}


def generate(kind: str, stream: np.random.Generator, cfg: GeneratorConfig) -> ImageBuffer:
    """Dispatch to the generator selected by ``kind``.

    ``cfg.kind`` must match ``kind``; the moire kind delegates to
    :func:`texmix.moire.generate_moire_image`.
    """
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"unknown generator kind {kind!r}")
    if cfg.kind != kind:
        raise ValueError(f"config is for kind {cfg.kind!r}, requested {kind!r}")
    if kind == "moire":
        return _moire.generate_moire_image(stream, cfg.moire_config())
    return _GENERATORS[kind](stream, cfg)


def sample_params(kind: str, stream: np.random.Generator, cfg: GeneratorConfig):
    """Draw the parameter record for ``kind`` without rendering."""
    if cfg.kind != kind:
        raise ValueError(f"config is for kind {cfg.kind!r}, requested {kind!r}")
    if kind == "moire":
        return _moire.sample_moire_params(stream, cfg.moire_config())
    return _SAMPLERS[kind](stream, cfg)


def render_params(kind: str, params, width: int, height: int) -> ImageBuffer:
    """Render a previously sampled parameter record to an image buffer."""
    if kind == "moire":
        field = _moire.render_moire(params, width, height)
        return replicate_channels(normalize_minmax(field))
    if kind == "stripe":
        return replicate_channels(normalize_minmax(render_stripe_field(params, width, height)))
    if kind == "perlin":
        return replicate_channels(normalize_minmax(render_perlin_field(params, width, height)))
    if kind == "dead_leaves":
        return replicate_channels(normalize_minmax(render_dead_leaves_field(params, width, height)))
    if kind == "fourier_basis":
        return render_fourier_basis(params, width, height)
    raise ValueError(f"unknown generator kind {kind!r}")


def params_from_dict(kind: str, d: dict):
    """Rebuild a parameter record from its JSON dictionary form."""
    if kind not in _PARAM_TYPES:
        raise ValueError(f"unknown generator kind {kind!r}")
    return _PARAM_TYPES[kind].from_dict(d)


def sample_and_render(kind: str, stream: np.random.Generator, cfg: GeneratorConfig):
    """Draw parameters and render them in one pass.

    Guarantees that the returned image equals
    ``render_params(kind, params, cfg.width, cfg.height)`` bit for bit;
    the dead-leaves kind shares one painting pass between the two.
    """
    if cfg.kind != kind:
        raise ValueError(f"config is for kind {cfg.kind!r}, requested {kind!r}")
    if kind == "dead_leaves":
        field, chunks = _sample_and_paint(stream, cfg)
        return _params_from_chunks(chunks), replicate_channels(normalize_minmax(field))
    params = sample_params(kind, stream, cfg)
    return params, render_params(kind, params, cfg.width, cfg.height)
