"""Camera/display degradation simulator: a five-stage resampling pipeline.

The pipeline models re-photographing an image shown on an LCD panel:

1. LCD subpixel resampling: every source pixel expands to an s x s block
   with vertical R|G|B subpixel stripes.
2. Random projective warp (display tilt plus scale jitter) with bilinear
   resampling back to the original resolution.
3. Bayer color-filter-array sampling followed by bilinear demosaicing.
4. In-camera signal processing, realized as a 3x3 unsharp mask.
5. JPEG compression at a quality drawn from a configured range.

Stage parameters are an approximate reconstruction of published degradation
benchmarks, not a byte-level match of any specific one; every default is a
documented choice of this package.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .imagecore import ImageBuffer, ensure_image, quantize


BAYER_PATTERNS = {
    # channel index at (row % 2, col % 2)
    "RGGB": ((0, 1), (1, 2)),
    "BGGR": ((2, 1), (1, 0)),
    "GRBG": ((1, 0), (2, 1)),
    "GBRG": ((1, 2), (0, 1)),
}

# Bilinear demosaic weights; the normalized convolution divides them out.
_KERNEL_RB = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])
_KERNEL_G = np.array([[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]])

# 3x3 binomial approximation of a Gaussian, used by the unsharp mask.
_KERNEL_BLUR = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 16.0


@dataclass(frozen=True)
class DegradeConfig:
    """Stage parameters; defaults chosen to produce visible resampling moire."""

    lcd_scale: int = 3
    tilt_max_deg: float = 10.0
    scale_jitter: float = 0.05
    cfa: str = "RGGB"
    jpeg_quality_min: int = 60
    jpeg_quality_max: int = 95
    sharpen_amount: float = 0.5

    def __post_init__(self):
        if self.lcd_scale < 1:
            raise ValueError(f"lcd_scale must be >= 1, got {self.lcd_scale}")
        if self.cfa not in BAYER_PATTERNS:
            raise ValueError(f"unknown CFA pattern {self.cfa!r}")
        if not (1 <= self.jpeg_quality_min <= self.jpeg_quality_max <= 100):
            raise ValueError("jpeg quality range must satisfy 1 <= min <= max <= 100")
        if self.tilt_max_deg < 0 or self.scale_jitter < 0 or self.sharpen_amount < 0:
            raise ValueError("tilt, jitter, and sharpen amounts must be non-negative")


@dataclass(frozen=True)
class DegradeParams:
    """Random draws for one image, in draw order."""

    tilt_x_deg: float
    tilt_y_deg: float
    scale: float
    jpeg_quality: int

    def to_dict(self) -> dict:
        return {
            "tilt_x_deg": self.tilt_x_deg,
            "tilt_y_deg": self.tilt_y_deg,
            "scale": self.scale,
            "jpeg_quality": self.jpeg_quality,
        }


def lcd_resample(x: ImageBuffer, cfg: DegradeConfig) -> ImageBuffer:
    """Expand each pixel into an s x s block of vertical R|G|B stripes.

    Block column c holds stripe 3*c // s; a channel's value fills its own
    stripe and the other channels read zero there.  Per channel the output
    energy is the input energy times s * (stripe column count); for s = 3
    that factor is exactly 3.  s = 1 is the identity.
    """
    ensure_image(x)
    if x.shape[2] != 3:
        raise ValueError("lcd_resample requires a 3-channel image")
    s = cfg.lcd_scale
    if s == 1:
        return x.copy()
    up = np.repeat(np.repeat(x, s, axis=0), s, axis=1)
    stripe = (3 * (np.arange(up.shape[1]) % s)) // s  # 0=R, 1=G, 2=B per block column
    out = np.zeros_like(up)
    for ch in range(3):
        cols = stripe == ch
        out[:, cols, ch] = up[:, cols, ch]
    return out


def tilt_homography(
    in_width: int, in_height: int, out_width: int, out_height: int,
    tilt_x_deg: float, tilt_y_deg: float, scale: float,
) -> np.ndarray:
    """Forward homography from input pixel coords to output pixel coords.

    The input plane is rotated about its center by tilt_x (around the
    horizontal axis) then tilt_y (around the vertical axis) and projected
    through a pinhole at focal distance f = max(in_width, in_height); the
    projection is scaled by ``scale`` and by the output/input size ratio.
    Zero tilt with scale 1 and equal sizes is the identity.
    """
    ax = np.deg2rad(tilt_x_deg)
    ay = np.deg2rad(tilt_y_deg)
    rx = np.array([
        [1.0, 0.0, 0.0],
        [0.0, np.cos(ax), -np.sin(ax)],
        [0.0, np.sin(ax), np.cos(ax)],
    ])
    ry = np.array([
        [np.cos(ay), 0.0, np.sin(ay)],
        [0.0, 1.0, 0.0],
        [-np.sin(ay), 0.0, np.cos(ay)],
    ])
    r = ry @ rx
    f = float(max(in_width, in_height))
    sx = scale * out_width / in_width
    sy = scale * out_height / in_height
    core = np.array([
        [sx * f * r[0, 0], sx * f * r[0, 1], 0.0],
        [sy * f * r[1, 0], sy * f * r[1, 1], 0.0],
        [r[2, 0], r[2, 1], f],
    ])
    cin_x, cin_y = (in_width - 1) / 2.0, (in_height - 1) / 2.0
    cout_x, cout_y = (out_width - 1) / 2.0, (out_height - 1) / 2.0
    t_in = np.array([[1.0, 0.0, -cin_x], [0.0, 1.0, -cin_y], [0.0, 0.0, 1.0]])
    t_out = np.array([[1.0, 0.0, cout_x], [0.0, 1.0, cout_y], [0.0, 0.0, 1.0]])
    return t_out @ core @ t_in


def warp_projective(
    x: ImageBuffer, tilt_x_deg: float, tilt_y_deg: float, scale: float,
    out_size: tuple[int, int] | None = None,
) -> ImageBuffer:
    """Apply the tilt homography with bilinear sampling and mid-gray fill.

    ``out_size`` is (width, height) of the output grid; defaults to the
    input size.  When the input is larger (LCD-expanded), the same map
    performs the downsample, which is intentionally alias-prone.
    """
    ensure_image(x)
    in_h, in_w = x.shape[:2]
    out_w, out_h = out_size if out_size is not None else (in_w, in_h)
    fwd = tilt_homography(in_w, in_h, out_w, out_h, tilt_x_deg, tilt_y_deg, scale)
    inv = np.linalg.inv(fwd)
    yo, xo = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    denom = inv[2, 0] * xo + inv[2, 1] * yo + inv[2, 2]
    xi = (inv[0, 0] * xo + inv[0, 1] * yo + inv[0, 2]) / denom
    yi = (inv[1, 0] * xo + inv[1, 1] * yo + inv[1, 2]) / denom
    out = np.empty((out_h, out_w, x.shape[2]), dtype=np.float64)
    for c in range(x.shape[2]):
        out[:, :, c] = ndimage.map_coordinates(
            x[:, :, c], [yi, xi], order=1, mode="constant", cval=0.5
        )
    return out


def geometric_transform(
    x: ImageBuffer, stream: np.random.Generator, cfg: DegradeConfig,
    out_size: tuple[int, int] | None = None,
) -> ImageBuffer:
    """Random projective warp: draws tilt_x, tilt_y, then scale."""
    tx = stream.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg)
    ty = stream.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg)
    sc = stream.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter)
    return warp_projective(x, tx, ty, sc, out_size=out_size)


def bayer_cfa(x: ImageBuffer, cfg: DegradeConfig) -> ImageBuffer:
    """Sample one channel per pixel on the CFA mosaic, then demosaic.

    Demosaicing is a normalized bilinear convolution: each channel plane is
    interpolated from its known sites with the standard 3x3 weights, and
    the weight mass is renormalized near borders.  Constant inputs are
    preserved exactly, as are known sites.
    """
    ensure_image(x)
    if x.shape[2] != 3:
        raise ValueError("bayer_cfa requires a 3-channel image")
    h, w = x.shape[:2]
    pattern = BAYER_PATTERNS[cfg.cfa]
    rows = np.arange(h)[:, None] % 2
    cols = np.arange(w)[None, :] % 2
    channel_at = np.empty((h, w), dtype=np.int64)
    for rp in (0, 1):
        for cp in (0, 1):
            channel_at[(rows == rp) & (cols == cp)] = pattern[rp][cp]
    out = np.empty_like(x)
    for ch, kernel in ((0, _KERNEL_RB), (1, _KERNEL_G), (2, _KERNEL_RB)):
        mask = (channel_at == ch).astype(np.float64)
        sparse = x[:, :, ch] * mask
        num = ndimage.convolve(sparse, kernel, mode="constant", cval=0.0)
        den = ndimage.convolve(mask, kernel, mode="constant", cval=0.0)
        out[:, :, ch] = num / den
    return out


def signal_process(x: ImageBuffer, cfg: DegradeConfig) -> ImageBuffer:
    """Unsharp mask over a 3x3 binomial blur, then clip.

    out = clip(x + amount * (x - blur(x))); amount 0 is the identity and
    constant images pass through unchanged for any amount.
    """
    ensure_image(x)
    blurred = np.empty_like(x)
    for c in range(x.shape[2]):
        blurred[:, :, c] = ndimage.convolve(x[:, :, c], _KERNEL_BLUR, mode="reflect")
    return np.clip(x + cfg.sharpen_amount * (x - blurred), 0.0, 1.0)


def jpeg_roundtrip(x: ImageBuffer, quality: int) -> ImageBuffer:
    """Encode to baseline JPEG in memory at the given quality and decode."""
    ensure_image(x)
    data = quantize(x)
    if data.shape[2] == 1:
        im = Image.fromarray(data[:, :, 0], mode="L")
    else:
        im = Image.fromarray(data, mode="RGB")
    buf = io.BytesIO()
    im.save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    arr = np.asarray(Image.open(buf), dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def sample_degrade_params(stream: np.random.Generator, cfg: DegradeConfig) -> DegradeParams:
    """Draw all per-image randomness upfront: tilt_x, tilt_y, scale, quality."""
    tx = stream.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg)
    ty = stream.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg)
    sc = stream.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter)
    q = int(stream.integers(cfg.jpeg_quality_min, cfg.jpeg_quality_max + 1))
    return DegradeParams(tilt_x_deg=tx, tilt_y_deg=ty, scale=sc, jpeg_quality=q)


def apply_degrade(x: ImageBuffer, params: DegradeParams, cfg: DegradeConfig) -> ImageBuffer:
    """Run the five stages with fixed parameters."""
    ensure_image(x)
    if x.shape[2] != 3:
        raise ValueError("degrade requires a 3-channel image")
    h, w = x.shape[:2]
    stage = lcd_resample(x, cfg)
    stage = warp_projective(stage, params.tilt_x_deg, params.tilt_y_deg, params.scale, out_size=(w, h))
    stage = bayer_cfa(stage, cfg)
    stage = signal_process(stage, cfg)
    return jpeg_roundtrip(stage, params.jpeg_quality)


def degrade(x: ImageBuffer, stream: np.random.Generator, cfg: DegradeConfig) -> ImageBuffer:
    """Full pipeline with stream-drawn parameters; preserves dimensions."""
    return apply_degrade(x, sample_degrade_params(stream, cfg), cfg)
