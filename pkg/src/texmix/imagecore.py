"""Image buffers, file I/O, and deterministic random streams.

Conventions used throughout the package:

* An image buffer is a float64 ndarray of shape (H, W, C) with C in {1, 3}
  and intensities in [0, 1].  Row-major, origin at the top-left; u is the
  column index, v is the row index.
* A gray field is a float64 ndarray of shape (H, W) holding unbounded
  accumulator values (pre-normalization pattern math lives here).
* 8-bit quantization happens only at file boundaries; everything in between
  stays in unit-interval floats.
* All randomness flows through counter-based Philox streams keyed by
  (root_seed, image_index), so any per-image result is a pure function of
  the root seed, the image index, and the configuration.  Parallel drivers
  can process images in any order on any number of workers and produce
  identical bytes.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, UnidentifiedImageError

# Type aliases for documentation purposes; both are plain ndarrays.
ImageBuffer = np.ndarray
GrayField = np.ndarray

_MASK64 = (1 << 64) - 1


class ImageIOError(Exception):
    """Raised when an image file cannot be read or written."""


def derive_stream(root_seed: int, image_index: int) -> np.random.Generator:
    """Return the deterministic random stream for one image.

    The stream is a counter-based Philox generator keyed by
    (root_seed, image_index).  Equal inputs always produce identical draw
    sequences; distinct image indices yield statistically independent
    streams, which makes batch processing order- and worker-independent.
    """
    key = [int(root_seed) & _MASK64, int(image_index) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))


def ensure_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate buffer shape and dtype; returns the array unchanged."""
    if not isinstance(img, np.ndarray):
        raise TypeError(f"{name}: expected ndarray, got {type(img).__name__}")
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"{name}: expected (H, W, C) with C in {{1, 3}}, got shape {img.shape}")
    return img


def load_image(path) -> ImageBuffer:
    """Load an 8-bit PNG or JPEG as a unit-interval float buffer.

    Grayscale files map to one channel, everything else to RGB.
    Intensities are stored_byte / 255.
    """
    path = str(path)
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise ImageIOError(f"{path}: unsupported format {im.format!r} (PNG and JPEG only)")
            if im.mode != "L":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except FileNotFoundError as e:
        raise ImageIOError(f"{path}: file not found") from e
    except ImageIOError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise ImageIOError(f"{path}: cannot decode image ({e})") from e
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def quantize(img: ImageBuffer) -> np.ndarray:
    """Map unit-interval intensities to uint8 via round(i * 255)."""
    return np.rint(np.asarray(img, dtype=np.float64) * 255.0).astype(np.uint8)


def save_image(img: ImageBuffer, path, format: str = "png", jpeg_quality: int = 95) -> None:
    """Write a buffer as 8-bit PNG (lossless) or baseline JPEG.

    PNG round-trips bit-exactly through :func:`load_image` after
    quantization; JPEG is lossy.
    """
    ensure_image(img)
    fmt = format.lower()
    if fmt not in ("png", "jpeg"):
        raise ValueError(f"unsupported format {format!r} (png or jpeg)")
    if fmt == "jpeg" and not (1 <= int(jpeg_quality) <= 100):
        raise ValueError(f"jpeg_quality must be in 1..100, got {jpeg_quality}")
    data = quantize(img)
    if data.shape[2] == 1:
        im = Image.fromarray(data[:, :, 0], mode="L")
    else:
        im = Image.fromarray(data, mode="RGB")
    try:
        if fmt == "png":
            im.save(str(path), format="PNG")
        else:
            im.save(str(path), format="JPEG", quality=int(jpeg_quality))
    except OSError as e:
        raise ImageIOError(f"{path}: cannot write image ({e})") from e


def replicate_channels(field: GrayField) -> ImageBuffer:
    """Copy a [0, 1] gray field into all three color channels."""
    field = np.asarray(field, dtype=np.float64)
    out = np.empty(field.shape + (3,), dtype=np.float64)
    out[:, :, :] = field[:, :, None]
    return out
