"""Per-image generation and augmentation microbenchmarks.

Timing protocol: single-threaded, monotonic clock, one measurement per
generated image (not amortized batches) so tail latency is visible.  At
least 5 warm-up samples are discarded before at least 30 retained samples.
Each sample uses a fresh stream derived from (root_seed, sample_index), so
benchmarked generation produces exactly the same images as unbenchmarked
generation with the same seeds.

Reports carry an environment block so runs on different machines are
comparable in protocol even when absolute times differ.
"""

from __future__ import annotations

import csv
import dataclasses
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import texgen
from .imagecore import derive_stream, load_image
from .mixer import MixConfig, augment

MIN_SAMPLES = 30
DEFAULT_WARMUP = 5


@dataclass(frozen=True)
class BenchEntry:
    name: str
    resolution: str
    samples: int
    mean_s: float
    median_s: float
    p95_s: float
    std_s: float


@dataclass(frozen=True)
class BenchReport:
    entries: tuple
    environment: dict
    generation_fraction: float | None = None

    def entry(self, name: str) -> BenchEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def _environment(width: int, height: int, samples: int, warmup: int) -> dict:
    return {
        "resolution": f"{width}x{height}",
        "thread_count": 1,
        "samples": samples,
        "warmup_discarded": warmup,
        "timer": "time.perf_counter",
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def _stats(name: str, width: int, height: int, times: list) -> BenchEntry:
    arr = np.asarray(times)
    return BenchEntry(
        name=name,
        resolution=f"{width}x{height}",
        samples=len(times),
        mean_s=float(arr.mean()),
        median_s=float(np.median(arr)),
        p95_s=float(np.percentile(arr, 95)),
        std_s=float(arr.std(ddof=1)) if len(times) > 1 else 0.0,
    )


def bench_generators(
    kinds, width: int, height: int, samples: int, root_seed: int,
    warmup: int = DEFAULT_WARMUP,
) -> BenchReport:
    """Time each generator kind per image at the given resolution.

    Each kind is measured as a contiguous block (warm-up discarded, then
    the retained samples): that matches the steady state of a data-loader
    worker generating the same texture kind every batch.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}, got {samples}")
    entries = []
    for kind in kinds:
        cfg = texgen.GeneratorConfig(kind=kind, width=width, height=height)
        times = []
        for idx in range(warmup + samples):
            stream = derive_stream(root_seed, idx)
            t0 = time.perf_counter()
            texgen.generate(kind, stream, cfg)
            dt = time.perf_counter() - t0
            if idx >= warmup:
                times.append(dt)
        entries.append(_stats(kind, width, height, times))
    return BenchReport(entries=tuple(entries), environment=_environment(width, height, samples, warmup))


def bench_pipeline(
    cfg: MixConfig, image_dir, samples: int, root_seed: int,
    warmup: int = DEFAULT_WARMUP,
) -> BenchReport:
    """Time the end-to-end augmentation against pure texture generation.

    Cycles through the images found directly in ``image_dir``.  The report
    holds one entry for the configured generator alone and one for the full
    pipeline, plus their mean ratio as ``generation_fraction``.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}, got {samples}")
    image_dir = Path(image_dir)
    paths = sorted(p for p in image_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not paths:
        raise ValueError(f"{image_dir}: no images found")
    images = [load_image(p) for p in paths]
    images = [img if img.shape[2] == 3 else np.repeat(img, 3, axis=2) for img in images]

    kind = cfg.generator.kind
    gen_times = []
    pipe_times = []
    for idx in range(warmup + samples):
        img = images[idx % len(images)]
        h, w = img.shape[:2]
        gen_cfg = dataclasses.replace(cfg.generator, width=w, height=h)

        stream = derive_stream(root_seed, idx)
        t0 = time.perf_counter()
        texgen.generate(kind, stream, gen_cfg)
        dt_gen = time.perf_counter() - t0

        stream = derive_stream(root_seed, idx)
        t0 = time.perf_counter()
        augment(img, stream, cfg)
        dt_pipe = time.perf_counter() - t0

        if idx >= warmup:
            gen_times.append(dt_gen)
            pipe_times.append(dt_pipe)

    h, w = images[0].shape[:2]
    gen_entry = _stats(f"generator:{kind}", w, h, gen_times)
    pipe_entry = _stats("pipeline", w, h, pipe_times)
    return BenchReport(
        entries=(gen_entry, pipe_entry),
        environment=_environment(w, h, samples, warmup),
        generation_fraction=gen_entry.mean_s / pipe_entry.mean_s,
    )


def write_report_csv(report: BenchReport, path) -> None:
    """Emit the report with ``#``-prefixed environment header lines."""
    with open(path, "w", newline="") as fh:
        for key, value in report.environment.items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        header = ["generator", "resolution", "samples", "mean_s", "median_s", "p95_s", "std_s"]
        if report.generation_fraction is not None:
            header.append("generation_fraction")
        writer.writerow(header)
        for e in report.entries:
            row = [e.name, e.resolution, e.samples,
                   f"{e.mean_s:.9f}", f"{e.median_s:.9f}", f"{e.p95_s:.9f}", f"{e.std_s:.9f}"]
            if report.generation_fraction is not None:
                row.append(f"{report.generation_fraction:.6f}" if e.name == "pipeline" else "")
            writer.writerow(row)


def format_report(report: BenchReport) -> str:
    """Human-readable table."""
    lines = []
    for key, value in report.environment.items():
        lines.append(f"# {key}={value}")
    lines.append(f"{'generator':<22} {'mean':>12} {'median':>12} {'p95':>12} {'std':>12}")
    for e in report.entries:
        lines.append(
            f"{e.name:<22} {e.mean_s * 1e3:>10.4f}ms {e.median_s * 1e3:>10.4f}ms "
            f"{e.p95_s * 1e3:>10.4f}ms {e.std_s * 1e3:>10.4f}ms"
        )
    if report.generation_fraction is not None:
        lines.append(f"generation fraction of pipeline mean: {report.generation_fraction:.3f}")
    return "\n".join(lines)
