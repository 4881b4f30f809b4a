"""Stochastic texture-mixing augmentation pipeline.

One augmentation call works in two stages.  Stage 1 synthesizes a
procedural texture at the input image's resolution (never resized).  Stage
2 initializes the working image as a coin flip between the input and a
base-augmented copy, then runs a uniformly drawn number of mixing rounds
(0..k); each round blends in either a fresh base-augmented copy of the
input or the per-image texture, using Add or Multiply with coefficients
derived from Beta(beta) draws.  The result is clipped to [0, 1] once at
the end, then optionally standardized.

The texture is generated once per image and reused across rounds.  Every
random decision is recorded in a :class:`MixTrace`; replaying a trace
against the same input reproduces the output bit-exactly without touching
a random stream.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import texgen
from .imagecore import ImageBuffer, ensure_image, save_image
from .texgen import GeneratorConfig

DEFAULT_AUG_OPS = (
    "rotate", "shear-x", "shear-y", "translate-x", "translate-y",
    "posterize", "solarize", "equalize", "autocontrast",
)

GEOMETRY_FILL = 0.5
MULTIPLY_FLOOR = 1e-37

# Fixed severity ranges for the base operations.
ROTATE_MAX_DEG = 30.0
SHEAR_MAX = 0.3
TRANSLATE_MAX_FRAC = 1.0 / 3.0
POSTERIZE_BITS = (1, 2, 3, 4)
SOLARIZE_MIN_THRESHOLD = 0.3


@dataclass(frozen=True)
class MixConfig:
    """Pipeline hyperparameters.

    ``generator`` carries the texture kind and its sampling ranges; its
    width/height are overridden by each input image's resolution.
    ``standardize`` is an optional ((means), (stds)) pair applied after the
    final clip; the library ships no dataset constants.
    """

    k: int = 4
    beta: float = 4.0
    generator: GeneratorConfig = field(
        default_factory=lambda: GeneratorConfig(kind="moire", width=224, height=224)
    )
    aug_ops: tuple = DEFAULT_AUG_OPS
    clip: bool = True
    standardize: tuple | None = None

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.aug_ops:
            raise ValueError("aug_ops must be non-empty")
        for op in self.aug_ops:
            if op not in DEFAULT_AUG_OPS:
                raise ValueError(f"unknown augmentation op {op!r}")
        if not self.clip:
            raise ValueError("the final clip is structural and cannot be disabled")


@dataclass(frozen=True)
class AugOp:
    """One sampled base augmentation: the op name and its drawn severity."""

    op: str
    value: float | int | None = None

    def to_dict(self) -> dict:
        return {"op": self.op, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "AugOp":
        return cls(op=d["op"], value=d["value"])


@dataclass(frozen=True)
class MixStep:
    source: str  # "augmented" | "procedural"
    aug: AugOp | None
    op: str  # "add" | "multiply"
    a: float
    b: float


@dataclass(frozen=True)
class MixTrace:
    """Complete record of one augmentation: every choice, fully replayable."""

    init_source: str  # "original" | "augmented"
    init_aug: AugOp | None
    texture_kind: str
    texture_params: object
    rounds: int
    steps: tuple

    def __post_init__(self):
        if self.rounds != len(self.steps):
            raise ValueError("rounds must equal the number of recorded steps")

    def to_dict(self) -> dict:
        return {
            "init_source": self.init_source,
            "init_aug": self.init_aug.to_dict() if self.init_aug else None,
            "texture_kind": self.texture_kind,
            "texture_params": self.texture_params.to_dict(),
            "rounds": self.rounds,
            "steps": [
                {
                    "source": s.source,
                    "aug": s.aug.to_dict() if s.aug else None,
                    "op": s.op,
                    "a": s.a,
                    "b": s.b,
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixTrace":
        return cls(
            init_source=d["init_source"],
            init_aug=AugOp.from_dict(d["init_aug"]) if d["init_aug"] else None,
            texture_kind=d["texture_kind"],
            texture_params=texgen.params_from_dict(d["texture_kind"], d["texture_params"]),
            rounds=int(d["rounds"]),
            steps=tuple(
                MixStep(
                    source=s["source"],
                    aug=AugOp.from_dict(s["aug"]) if s["aug"] else None,
                    op=s["op"],
                    a=float(s["a"]),
                    b=float(s["b"]),
                )
                for s in d["steps"]
            ),
        )


# ---------------------------------------------------------------------------
# base augmentations

def sample_base_aug(stream: np.random.Generator, aug_ops=DEFAULT_AUG_OPS) -> AugOp:
    """Pick one op uniformly, then draw its severity (if it has one)."""
    op = aug_ops[int(stream.integers(0, len(aug_ops)))]
    if op == "rotate":
        return AugOp(op, stream.uniform(-ROTATE_MAX_DEG, ROTATE_MAX_DEG))
    if op in ("shear-x", "shear-y"):
        return AugOp(op, stream.uniform(-SHEAR_MAX, SHEAR_MAX))
    if op in ("translate-x", "translate-y"):
        return AugOp(op, stream.uniform(-TRANSLATE_MAX_FRAC, TRANSLATE_MAX_FRAC))
    if op == "posterize":
        return AugOp(op, int(POSTERIZE_BITS[int(stream.integers(0, len(POSTERIZE_BITS)))]))
    if op == "solarize":
        return AugOp(op, stream.uniform(SOLARIZE_MIN_THRESHOLD, 1.0))
    return AugOp(op, None)  # equalize, autocontrast


def _affine(x: np.ndarray, m2: np.ndarray, off2: np.ndarray) -> np.ndarray:
    # Bilinear resampling; pixels pulled from outside the frame read the
    # mid-gray fill.  The 2x2 matrix acts on (row, col); channels pass through.
    m = np.eye(3)
    m[:2, :2] = m2
    offset = np.array([off2[0], off2[1], 0.0])
    return ndimage.affine_transform(x, m, offset=offset, order=1, mode="constant", cval=GEOMETRY_FILL)


def apply_base_aug(x: ImageBuffer, rec: AugOp) -> ImageBuffer:
    """Apply a sampled base augmentation; pure in (x, rec)."""
    ensure_image(x)
    h, w = x.shape[:2]
    cr, cc = (h - 1) / 2.0, (w - 1) / 2.0
    op, val = rec.op, rec.value
    if op == "rotate":
        th = np.deg2rad(val)
        m2 = np.array([[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]])
        off = np.array([cr, cc]) - m2 @ np.array([cr, cc])
        return _affine(x, m2, off)
    if op == "shear-x":
        m2 = np.array([[1.0, 0.0], [-val, 1.0]])
        return _affine(x, m2, np.array([0.0, val * cr]))
    if op == "shear-y":
        m2 = np.array([[1.0, -val], [0.0, 1.0]])
        return _affine(x, m2, np.array([val * cc, 0.0]))
    if op == "translate-x":
        return _affine(x, np.eye(2), np.array([0.0, -val * w]))
    if op == "translate-y":
        return _affine(x, np.eye(2), np.array([-val * h, 0.0]))
    if op == "posterize":
        levels = 2 ** int(val)
        return np.rint(x * (levels - 1)) / (levels - 1)
    if op == "solarize":
        # Strictly-greater comparison: threshold 1.0 is the identity.
        return np.where(x > val, 1.0 - x, x)
    if op == "equalize":
        return _equalize(x)
    if op == "autocontrast":
        return _autocontrast(x)
    raise ValueError(f"unknown augmentation op {op!r}")


def _equalize(x: np.ndarray) -> np.ndarray:
    # Per-channel histogram equalization over the 256-level quantization.
    out = np.empty_like(x)
    npix = x.shape[0] * x.shape[1]
    for c in range(x.shape[2]):
        q = np.rint(x[:, :, c] * 255.0).astype(np.int64)
        hist = np.bincount(q.ravel(), minlength=256)
        cdf = np.cumsum(hist)
        cdf_min = cdf[np.nonzero(hist)[0][0]]
        denom = npix - cdf_min
        if denom == 0:
            out[:, :, c] = x[:, :, c]
        else:
            lut = (cdf - cdf_min) / denom
            out[:, :, c] = lut[q]
    return out


def _autocontrast(x: np.ndarray) -> np.ndarray:
    # Per-channel min-max stretch; near-constant channels pass through.
    out = np.empty_like(x)
    for c in range(x.shape[2]):
        ch = x[:, :, c]
        lo, hi = ch.min(), ch.max()
        if hi - lo <= 1e-9:
            out[:, :, c] = ch
        else:
            out[:, :, c] = (ch - lo) / (hi - lo)
    return out


def base_augment(x: ImageBuffer, stream: np.random.Generator, aug_ops=DEFAULT_AUG_OPS) -> ImageBuffer:
    """Sample and apply one base augmentation."""
    return apply_base_aug(x, sample_base_aug(stream, aug_ops))


# ---------------------------------------------------------------------------
# mixing

def sample_coefficients(stream: np.random.Generator, beta: float) -> tuple[float, float]:
    """Draw blend coefficients.

    Branch coin first, then the two Beta draws.  Heads: a ~ Beta(beta, 1),
    b ~ Beta(1, beta).  Tails: a = 1 + Beta(1, beta), b = -Beta(1, beta).
    The support is a in (0, 2) and b in (-1, 1); at beta = 4 the expected
    value of a is 0.5 * 4/5 + 0.5 * 6/5 = 1.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if stream.random() < 0.5:
        a = stream.beta(beta, 1.0)
        b = stream.beta(1.0, beta)
    else:
        a = 1.0 + stream.beta(1.0, beta)
        b = -stream.beta(1.0, beta)
    return float(a), float(b)


def mix_op(x1: ImageBuffer, x2: ImageBuffer, op: str, a: float, b: float) -> ImageBuffer:
    """Blend two images without clipping the result.

    add:      remap both to [-1, 1] via 2x - 1, take a*x1 + b*x2, map back.
    multiply: remap both to [0, 2] via 2x, take x1^a * max(x2, 1e-37)^b / 2.

    The multiply base is floored at 0 so that out-of-range intermediates
    from earlier unclipped rounds cannot produce NaN under fractional
    exponents; for in-range inputs the floor never engages.
    """
    if x1.shape[:2] != x2.shape[:2]:
        raise ValueError(f"dimension mismatch: {x1.shape[:2]} vs {x2.shape[:2]}")
    if op == "add":
        y = a * (2.0 * x1 - 1.0) + b * (2.0 * x2 - 1.0)
        return (y + 1.0) / 2.0
    if op == "multiply":
        y = np.maximum(2.0 * x1, 0.0) ** a * np.maximum(2.0 * x2, MULTIPLY_FLOOR) ** b
        return y / 2.0
    raise ValueError(f"unknown mix op {op!r}")


def _standardize(x: np.ndarray, standardize: tuple) -> np.ndarray:
    means, stds = standardize
    return (x - np.asarray(means, dtype=np.float64)) / np.asarray(stds, dtype=np.float64)


def augment(x: ImageBuffer, stream: np.random.Generator, cfg: MixConfig) -> tuple[ImageBuffer, MixTrace]:
    """Run the full two-stage pipeline on one image.

    Draw order: texture parameters; the init coin (and base-aug draws if
    taken); the round count; then per round the partner coin (and base-aug
    draws if taken), the operator coin, and the coefficient draws.  Coin
    semantics: a uniform draw below 0.5 selects the first-listed option.
    """
    ensure_image(x)
    if x.shape[2] != 3:
        raise ValueError(f"augment requires a 3-channel image, got {x.shape[2]} channels")
    h, w = x.shape[:2]

    gen_cfg = dataclasses.replace(cfg.generator, width=w, height=h)
    kind = gen_cfg.kind
    texture_params, texture = texgen.sample_and_render(kind, stream, gen_cfg)

    if stream.random() < 0.5:
        init_aug = sample_base_aug(stream, cfg.aug_ops)
        mixed = apply_base_aug(x, init_aug)
        init_source = "augmented"
    else:
        init_aug = None
        mixed = x.copy()
        init_source = "original"

    rounds = int(stream.integers(0, cfg.k + 1))
    steps = []
    for _ in range(rounds):
        if stream.random() < 0.5:
            aug = sample_base_aug(stream, cfg.aug_ops)
            partner = apply_base_aug(x, aug)
            source = "augmented"
        else:
            aug = None
            partner = texture
            source = "procedural"
        op = "add" if stream.random() < 0.5 else "multiply"
        a, b = sample_coefficients(stream, cfg.beta)
        mixed = mix_op(mixed, partner, op, a, b)
        steps.append(MixStep(source=source, aug=aug, op=op, a=a, b=b))

    out = np.clip(mixed, 0.0, 1.0)
    if cfg.standardize is not None:
        out = _standardize(out, cfg.standardize)
    trace = MixTrace(
        init_source=init_source,
        init_aug=init_aug,
        texture_kind=kind,
        texture_params=texture_params,
        rounds=rounds,
        steps=tuple(steps),
    )
    return out, trace


def replay_trace(x: ImageBuffer, trace: MixTrace, standardize: tuple | None = None) -> ImageBuffer:
    """Re-run a recorded augmentation; bit-identical to the original output."""
    ensure_image(x)
    h, w = x.shape[:2]
    texture = texgen.render_params(trace.texture_kind, trace.texture_params, w, h)
    if trace.init_source == "augmented":
        mixed = apply_base_aug(x, trace.init_aug)
    else:
        mixed = x.copy()
    for step in trace.steps:
        partner = apply_base_aug(x, step.aug) if step.source == "augmented" else texture
        mixed = mix_op(mixed, partner, step.op, step.a, step.b)
    out = np.clip(mixed, 0.0, 1.0)
    if standardize is not None:
        out = _standardize(out, standardize)
    return out


# ---------------------------------------------------------------------------
# static export

def export_dataset(count: int, gen_cfg: GeneratorConfig, out_dir, root_seed: int) -> Path:
    """Write ``count`` textures as PNGs plus a reproducibility manifest.

    Image i is generated from the stream derived from (root_seed, i) and
    saved as ``{i:06d}.png``.  The manifest CSV has columns
    ``index,seed,generator,params_json``; re-running with the same root
    seed reproduces every file byte for byte.
    """
    from .imagecore import derive_stream

    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.csv"
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "seed", "generator", "params_json"])
        for i in range(count):
            stream = derive_stream(root_seed, i)
            params, img = texgen.sample_and_render(gen_cfg.kind, stream, gen_cfg)
            save_image(img, out_dir / f"{i:06d}.png", format="png")
            writer.writerow([i, root_seed, gen_cfg.kind, json.dumps(params.to_dict())])
    return manifest_path
