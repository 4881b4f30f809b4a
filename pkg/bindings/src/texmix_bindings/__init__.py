"""In-process adapter dropping the texmix pipeline into training loops.

The package exposes exactly three operations plus the version string:

* :class:`TransformHandle` wraps a mixing configuration and a root seed and
  augments arrays, one image index at a time;
* :func:`make_generator` returns an index-to-array texture callable;
* :func:`degrade_array` applies the display-recapture pipeline.

Arrays are exchanged in H x W x 3 row-major layout.  Float inputs must
already be unit-interval; uint8 inputs are divided by 255 on ingress.
Outputs are bit-identical to the primary CLI under shared
(root_seed, image_index) pairs: the handle derives the same per-image
streams the batch commands use, so results never depend on call order or
thread count.  The heavy kernels run inside numpy/OpenCV, which drop the
interpreter lock, so concurrent data-loader workers scale.
"""

from __future__ import annotations

import itertools
import threading

import numpy as np

import texmix
from texmix import GeneratorConfig, MixConfig, derive_stream
from texmix.degrade import DegradeConfig, degrade
from texmix.mixer import augment
from texmix.texgen import generate

__version__ = texmix.__version__

__all__ = ["TransformHandle", "make_generator", "degrade_array", "__version__"]


def _ingest(image, name: str = "image") -> np.ndarray:
    """Validate an incoming array and normalize it to unit-interval float64."""
    arr = np.asarray(image)
    if arr.ndim != 3:
        raise ValueError(f"{name}: expected 3 dimensions (H, W, channels), got shape {arr.shape}")
    if arr.shape[2] != 3:
        raise ValueError(f"{name}: channels must be 3, got {arr.shape[2]}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    arr = arr.astype(np.float64, copy=False)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: range must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name}: range must be within [0, 1] for float inputs")
    return arr


class TransformHandle:
    """Per-image augmentation bound to a mixing config and a root seed.

    Thread-safe: concurrent calls draw distinct image indices from an
    internal counter unless the caller supplies explicit indices, and two
    handles never share state.  Supplying an explicit ``image_index`` makes
    the call a pure function of (root_seed, image_index, config).
    """

    def __init__(self, config: MixConfig | None = None, root_seed: int = 0):
        self._config = config if config is not None else MixConfig()
        self._root_seed = int(root_seed)
        self._counter = itertools.count()
        self._lock = threading.Lock()

    @property
    def config(self) -> MixConfig:
        return self._config

    @property
    def root_seed(self) -> int:
        return self._root_seed

    def next_index(self) -> int:
        with self._lock:
            return next(self._counter)

    def augment_array(self, image, image_index: int | None = None) -> np.ndarray:
        """Augment one image; identical bytes to the CLI for the same index."""
        arr = _ingest(image)
        index = self.next_index() if image_index is None else int(image_index)
        out, _ = augment(arr, derive_stream(self._root_seed, index), self._config)
        return out

    def __call__(self, image, image_index: int | None = None) -> np.ndarray:
        return self.augment_array(image, image_index)


def make_generator(kind: str, config: GeneratorConfig, root_seed: int = 0):
    """Return ``fn(image_index) -> array`` producing textures of ``kind``.

    The callable matches the primary generators bit for bit under shared
    seeds; ``config.kind`` must equal ``kind``.
    """
    if config.kind != kind:
        raise ValueError(f"config is for kind {config.kind!r}, requested {kind!r}")
    root_seed = int(root_seed)

    def produce(image_index: int) -> np.ndarray:
        return generate(kind, derive_stream(root_seed, int(image_index)), config)

    return produce


def degrade_array(image, image_index: int, config: DegradeConfig | None = None,
                  root_seed: int = 0) -> np.ndarray:
    """Apply the five-stage degradation pipeline to one array."""
    arr = _ingest(image)
    cfg = config if config is not None else DegradeConfig()
    return degrade(arr, derive_stream(int(root_seed), int(image_index)), cfg)
