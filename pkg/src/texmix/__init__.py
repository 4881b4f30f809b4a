"""Storage-free procedural texture synthesis and image-mixing augmentation.

The package synthesizes interference and noise textures on the fly,
blends them into training images through a stochastic mixing pipeline,
and ships the analysis tooling (spectra, sensitivity heatmaps, a
degradation simulator, and microbenchmarks) used to validate the
generators.  Everything is a pure function of (root seed, image index,
configuration).
"""

__version__ = "0.1.0"

from .imagecore import derive_stream, load_image, replicate_channels, save_image
from .mixer import MixConfig, MixTrace, augment, export_dataset, replay_trace
from .moire import MoireConfig, MoireParams, generate_moire_image, normalize_minmax, render_moire
from .texgen import GENERATOR_KINDS, GeneratorConfig, generate

__all__ = [
    "__version__",
    "derive_stream",
    "load_image",
    "save_image",
    "replicate_channels",
    "MoireConfig",
    "MoireParams",
    "generate_moire_image",
    "render_moire",
    "normalize_minmax",
    "GENERATOR_KINDS",
    "GeneratorConfig",
    "generate",
    "MixConfig",
    "MixTrace",
    "augment",
    "replay_trace",
    "export_dataset",
]
