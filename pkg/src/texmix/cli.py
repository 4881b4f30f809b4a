"""Command-line surface.

Commands: gen, export-db, augment, degrade, spectrum, heatmap, bench.
Every command is deterministic under --seed, accepts --config with INI
key=value sections (one section per command; explicit flags win), honors
the TEXMIX_SEED environment variable as the seed fallback, and echoes the
effective configuration to a sidecar file next to its outputs.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Batch commands
log and skip per-file failures and fail only when every file fails.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import spectra
from .degrade import DegradeConfig, apply_degrade, sample_degrade_params
from .imagecore import ImageIOError, derive_stream, load_image, save_image
from .mixer import MixConfig, augment, export_dataset
from .spectra import FourierBasisSpec
from .texgen import GENERATOR_KINDS, GeneratorConfig

ENV_SEED = "TEXMIX_SEED"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class UsageError(Exception):
    """Invalid flag/config values detected after parsing."""


def parallel_map(fn, items, workers: int):
    """Order-preserving map over a thread pool; workers=1 stays in-line."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _config_section(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError(f"config file not found: {path}")
    section = args.command
    if parser.has_section(section):
        return dict(parser.items(section))
    return {}


def _resolve(args, section: dict, key: str, default, cast):
    """flag > config file > default (seed additionally falls back to env)."""
    v = getattr(args, key.replace("-", "_"), None)
    if v is not None:
        return v
    if key in section:
        raw = section[key]
        try:
            return cast(raw)
        except (TypeError, ValueError) as e:
            raise UsageError(f"config key {key}={raw!r}: {e}") from e
    return default


def _resolve_seed(args, section: dict) -> int:
    v = getattr(args, "seed", None)
    if v is not None:
        return v
    if "seed" in section:
        return int(section["seed"])
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise UsageError(f"{ENV_SEED}={env!r} is not an integer") from e
    return 0


def _write_effective_config(path: Path, command: str, values: dict) -> None:
    parser = configparser.ConfigParser()
    parser[command] = {k: str(v) for k, v in values.items()}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        parser.write(fh)


def _bool_cast(raw) -> bool:
    return str(raw).strip().lower() in ("1", "true", "yes", "on")


def _list_images(root: Path) -> list:
    return sorted(p for p in root.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)


def _load_rgb(path) -> np.ndarray:
    img = load_image(path)
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    return img


# ---------------------------------------------------------------------------
# gen / export-db

def _generator_config(args, section, width: int, height: int) -> GeneratorConfig:
    kind = _resolve(args, section, "kind", "moire", str)
    f_min = _resolve(args, section, "f-min", 1.0, float)
    f_max = _resolve(args, section, "f-max", 100.0, float)
    radius_max = _resolve(args, section, "radius-max", None, float)
    try:
        return GeneratorConfig(
            kind=kind,
            width=width,
            height=height,
            n_max=_resolve(args, section, "n-max", 3, int),
            f_min=f_min,
            f_max=f_max,
            cell_min=_resolve(args, section, "cell-min", 16, int),
            cell_max=_resolve(args, section, "cell-max", 64, int),
            radius_exponent=_resolve(args, section, "radius-exponent", 3.0, float),
            radius_min=_resolve(args, section, "radius-min", 2.0, float),
            radius_max=radius_max,
            shape_cap=_resolve(args, section, "shape-cap", 2000, int),
            stripe_f_min=f_min,
            stripe_f_max=f_max,
            freq_index_max=_resolve(args, section, "freq-index-max", 32, int),
            waves_per_channel=_resolve(args, section, "waves-per-channel", 2, int),
        )
    except ValueError as e:
        raise UsageError(str(e)) from e


def cmd_gen(args) -> int:
    section = _config_section(args)
    width = _resolve(args, section, "width", 224, int)
    height = _resolve(args, section, "height", 224, int)
    count = _resolve(args, section, "count", 1 if args.command == "gen" else None, int)
    if count is None:
        raise UsageError("--count is required for export-db")
    seed = _resolve_seed(args, section)
    out_dir = Path(_resolve(args, section, "out", None, str) or ".")
    gen_cfg = _generator_config(args, section, width, height)
    manifest = export_dataset(count, gen_cfg, out_dir, seed)
    effective = {"seed": seed, "count": count, "width": width, "height": height}
    effective.update({k: v for k, v in dataclasses.asdict(gen_cfg).items()})
    _write_effective_config(out_dir / "effective-config.ini", args.command, effective)
    print(f"wrote {count} images and {manifest}")
    return 0


# ---------------------------------------------------------------------------
# augment

def cmd_augment(args) -> int:
    section = _config_section(args)
    in_dir = Path(_resolve(args, section, "in-dir", None, str) or "")
    out_dir = Path(_resolve(args, section, "out-dir", None, str) or "")
    if not str(in_dir) or not str(out_dir):
        raise UsageError("--in-dir and --out-dir are required")
    if not in_dir.is_dir():
        raise UsageError(f"not a directory: {in_dir}")
    k = _resolve(args, section, "k", 4, int)
    beta = _resolve(args, section, "beta", 4.0, float)
    seed = _resolve_seed(args, section)
    workers = _resolve(args, section, "workers", os.cpu_count() or 1, int)
    write_trace = _resolve(args, section, "trace", False, _bool_cast)
    gen_cfg = _generator_config(args, section, 224, 224)
    kind = _resolve(args, section, "generator", gen_cfg.kind, str)
    try:
        gen_cfg = dataclasses.replace(gen_cfg, kind=kind)
        cfg = MixConfig(k=k, beta=beta, generator=gen_cfg)
    except ValueError as e:
        raise UsageError(str(e)) from e

    paths = _list_images(in_dir)
    if not paths:
        raise UsageError(f"{in_dir}: no images found")

    def process(item):
        index, path = item
        try:
            img = _load_rgb(path)
            stream = derive_stream(seed, index)
            out, trace = augment(img, stream, cfg)
            rel = path.relative_to(in_dir)
            dest = out_dir / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            fmt = "jpeg" if dest.suffix.lower() in (".jpg", ".jpeg") else "png"
            save_image(out, dest, format=fmt)
            if write_trace:
                with open(dest.with_suffix(dest.suffix + ".trace.json"), "w") as fh:
                    json.dump({"image_index": index, "seed": seed} | trace.to_dict(), fh)
            return None
        except Exception as e:  # per-file failures are logged, not fatal
            return f"{path}: {e}"

    failures = [r for r in parallel_map(process, enumerate(paths), workers) if r]
    for f in failures:
        print(f"skipped {f}", file=sys.stderr)
    _write_effective_config(
        out_dir / "effective-config.ini", "augment",
        {"seed": seed, "k": k, "beta": beta, "generator": gen_cfg.kind, "workers": workers,
         "trace": write_trace, "in-dir": in_dir, "out-dir": out_dir},
    )
    print(f"augmented {len(paths) - len(failures)}/{len(paths)} images into {out_dir}")
    return 1 if failures and len(failures) == len(paths) else 0


# ---------------------------------------------------------------------------
# degrade

def cmd_degrade(args) -> int:
    section = _config_section(args)
    in_dir = Path(_resolve(args, section, "in-dir", None, str) or "")
    out_dir = Path(_resolve(args, section, "out-dir", None, str) or "")
    if not str(in_dir) or not str(out_dir):
        raise UsageError("--in-dir and --out-dir are required")
    if not in_dir.is_dir():
        raise UsageError(f"not a directory: {in_dir}")
    seed = _resolve_seed(args, section)
    workers = _resolve(args, section, "workers", os.cpu_count() or 1, int)
    try:
        cfg = DegradeConfig(
            lcd_scale=_resolve(args, section, "lcd-scale", 3, int),
            tilt_max_deg=_resolve(args, section, "tilt", 10.0, float),
            scale_jitter=_resolve(args, section, "scale-jitter", 0.05, float),
            cfa=_resolve(args, section, "cfa", "RGGB", str),
            jpeg_quality_min=_resolve(args, section, "jpeg-min", 60, int),
            jpeg_quality_max=_resolve(args, section, "jpeg-max", 95, int),
            sharpen_amount=_resolve(args, section, "sharpen", 0.5, float),
        )
    except ValueError as e:
        raise UsageError(str(e)) from e

    paths = _list_images(in_dir)
    if not paths:
        raise UsageError(f"{in_dir}: no images found")

    def process(item):
        index, path = item
        try:
            img = _load_rgb(path)
            stream = derive_stream(seed, index)
            params = sample_degrade_params(stream, cfg)
            out = apply_degrade(img, params, cfg)
            rel = path.relative_to(in_dir)
            dest = out_dir / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            fmt = "jpeg" if dest.suffix.lower() in (".jpg", ".jpeg") else "png"
            save_image(out, dest, format=fmt)
            return ("ok", index, str(rel), params)
        except Exception as e:
            return ("fail", index, str(path), e)

    results = parallel_map(process, enumerate(paths), workers)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "degrade-log.csv", "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["path", "image_index", "seed", "tilt_x_deg", "tilt_y_deg", "scale", "jpeg_quality"])
        for r in results:
            if r[0] == "ok":
                _, index, rel, params = r
                writer.writerow([rel, index, seed, params.tilt_x_deg, params.tilt_y_deg,
                                 params.scale, params.jpeg_quality])
    failures = [r for r in results if r[0] == "fail"]
    for _, _, path, err in failures:
        print(f"skipped {path}: {err}", file=sys.stderr)
    _write_effective_config(
        out_dir / "effective-config.ini", "degrade",
        {"seed": seed, "workers": workers} | {k: v for k, v in dataclasses.asdict(cfg).items()},
    )
    print(f"degraded {len(paths) - len(failures)}/{len(paths)} images into {out_dir}")
    return 1 if failures and len(failures) == len(paths) else 0


# ---------------------------------------------------------------------------
# spectrum / heatmap / bench

def cmd_spectrum(args) -> int:
    section = _config_section(args)
    src = _resolve(args, section, "in", None, str)
    if not src:
        raise UsageError("--in is required")
    bins = _resolve(args, section, "bins", 128, int)
    out = Path(_resolve(args, section, "out", None, str) or (Path(src).stem + "-spectrum.csv"))
    report = spectra.radial_power_spectrum(load_image(src), bins)
    spectra.write_spectrum_csv(report, out)
    _write_effective_config(Path(str(out) + ".config.ini"), "spectrum",
                            {"in": src, "bins": bins, "out": out})
    print(f"wrote {out}")
    return 0


def cmd_heatmap(args) -> int:
    section = _config_section(args)
    dataset = _resolve(args, section, "dataset", None, str)
    labels = _resolve(args, section, "labels", None, str)
    oracle_spec = _resolve(args, section, "oracle", None, str)
    if not dataset or not labels or not oracle_spec:
        raise UsageError("--dataset, --labels, and --oracle are required")
    half_extent = _resolve(args, section, "half-extent", 31, int)
    epsilon = _resolve(args, section, "epsilon", None, float)
    rms = _resolve(args, section, "rms", 4.0 / 255.0, float)
    sign_policy = _resolve(args, section, "sign-policy", "per_channel", str)
    seed = _resolve_seed(args, section)
    out_prefix = Path(_resolve(args, section, "out-prefix", "heatmap", str))

    labeled = spectra.read_labels_csv(labels, dataset)
    first = load_image(labeled[0][0])
    if epsilon is None:
        # Default norm: per-pixel RMS perturbation of 4/255.
        epsilon = rms * float(np.sqrt(first.shape[0] * first.shape[1]))
    try:
        template = FourierBasisSpec(i=0, j=1, epsilon=epsilon, sign_policy=sign_policy)
        oracle = spectra.resolve_oracle(oracle_spec)
    except ValueError as e:
        raise UsageError(str(e)) from e
    grid = spectra.sensitivity_heatmap(dataset, labels, oracle, template, half_extent, root_seed=seed)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    spectra.write_heatmap_csv(grid, Path(str(out_prefix) + ".csv"))
    spectra.render_heatmap_png(grid, Path(str(out_prefix) + ".png"))
    _write_effective_config(
        Path(str(out_prefix) + ".config.ini"), "heatmap",
        {"dataset": dataset, "labels": labels, "oracle": oracle_spec, "half-extent": half_extent,
         "epsilon": epsilon, "sign-policy": sign_policy, "seed": seed},
    )
    print(f"wrote {out_prefix}.csv and {out_prefix}.png")
    return 0


def cmd_bench(args) -> int:
    section = _config_section(args)
    resolution = _resolve(args, section, "resolution", 224, int)
    samples = _resolve(args, section, "samples", 100, int)
    seed = _resolve_seed(args, section)
    out = Path(_resolve(args, section, "out", "bench.csv", str))
    image_dir = _resolve(args, section, "image-dir", None, str)
    try:
        if _resolve(args, section, "pipeline", False, _bool_cast):
            if not image_dir:
                raise UsageError("--image-dir is required with --pipeline")
            kind = _resolve(args, section, "generator", "moire", str)
            cfg = MixConfig(
                k=_resolve(args, section, "k", 4, int),
                beta=_resolve(args, section, "beta", 4.0, float),
                generator=GeneratorConfig(kind=kind, width=resolution, height=resolution),
            )
            report = bench_mod.bench_pipeline(cfg, image_dir, samples, seed)
        else:
            kinds_raw = _resolve(args, section, "kinds", ",".join(GENERATOR_KINDS), str)
            kinds = tuple(k.strip() for k in kinds_raw.split(",") if k.strip())
            for k in kinds:
                if k not in GENERATOR_KINDS:
                    raise UsageError(f"unknown generator kind {k!r}")
            report = bench_mod.bench_generators(kinds, resolution, resolution, samples, seed)
    except ValueError as e:
        raise UsageError(str(e)) from e
    bench_mod.write_report_csv(report, out)
    _write_effective_config(Path(str(out) + ".config.ini"), "bench",
                            {"resolution": resolution, "samples": samples, "seed": seed, "out": out})
    print(bench_mod.format_report(report))
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texmix",
        description="Procedural texture synthesis, mixing augmentation, and analysis tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"root random seed (default: ${ENV_SEED} or 0)")
        p.add_argument("--config", type=str, default=None,
                       help="INI config file; section [command], flags win")

    def add_generator_flags(p):
        p.add_argument("--n-max", type=int, default=None, help="moire: max wave components")
        p.add_argument("--f-min", type=float, default=None, help="moire/stripe: min frequency")
        p.add_argument("--f-max", type=float, default=None, help="moire/stripe: max frequency")
        p.add_argument("--cell-min", type=int, default=None, help="perlin: min lattice cell size")
        p.add_argument("--cell-max", type=int, default=None, help="perlin: max lattice cell size")
        p.add_argument("--radius-exponent", type=float, default=None, help="dead-leaves: power-law exponent")
        p.add_argument("--radius-min", type=float, default=None, help="dead-leaves: min radius")
        p.add_argument("--radius-max", type=float, default=None, help="dead-leaves: max radius")
        p.add_argument("--shape-cap", type=int, default=None, help="dead-leaves: max shapes")
        p.add_argument("--freq-index-max", type=int, default=None, help="fourier-basis: max index")
        p.add_argument("--waves-per-channel", type=int, default=None,
                       help="fourier-basis: waves superimposed per channel")

    for name, help_text in (("gen", "generate textures"), ("export-db", "export a static texture set")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--kind", choices=GENERATOR_KINDS, default=None, help="generator kind")
        p.add_argument("--width", type=int, default=None)
        p.add_argument("--height", type=int, default=None)
        p.add_argument("--count", type=int, default=None)
        p.add_argument("--out", type=str, default=None, help="output directory")
        add_generator_flags(p)
        add_common(p)
        p.set_defaults(func=cmd_gen)

    p = sub.add_parser("augment", help="mix textures into a directory of images")
    p.add_argument("--in-dir", type=str, default=None)
    p.add_argument("--out-dir", type=str, default=None)
    p.add_argument("--k", type=int, default=None, help="max mixing rounds")
    p.add_argument("--beta", type=float, default=None, help="Beta shape parameter")
    p.add_argument("--generator", choices=GENERATOR_KINDS, default=None)
    p.add_argument("--trace", action="store_const", const=True, default=None,
                   help="write per-image trace JSON")
    p.add_argument("--workers", type=int, default=None)
    add_generator_flags(p)
    add_common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("degrade", help="apply the display-recapture degradation pipeline")
    p.add_argument("--in-dir", type=str, default=None)
    p.add_argument("--out-dir", type=str, default=None)
    p.add_argument("--lcd-scale", type=int, default=None)
    p.add_argument("--tilt", type=float, default=None, help="max tilt angle, degrees")
    p.add_argument("--scale-jitter", type=float, default=None)
    p.add_argument("--cfa", type=str, default=None, help="Bayer pattern (RGGB/BGGR/GRBG/GBRG)")
    p.add_argument("--jpeg-min", type=int, default=None)
    p.add_argument("--jpeg-max", type=int, default=None)
    p.add_argument("--sharpen", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    add_common(p)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("spectrum", help="radially averaged power spectrum of an image")
    p.add_argument("--in", dest="in_", type=str, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("heatmap", help="frequency sensitivity heatmap via a classifier oracle")
    p.add_argument("--dataset", type=str, default=None)
    p.add_argument("--labels", type=str, default=None, help="CSV: image_path,label")
    p.add_argument("--oracle", type=str, default=None,
                   help='command, or "stub" / "stub:constant:N" / "stub:threshold:T"')
    p.add_argument("--half-extent", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None, help="perturbation l2 norm")
    p.add_argument("--rms", type=float, default=None,
                   help="per-pixel RMS used when --epsilon is absent (default 4/255)")
    p.add_argument("--sign-policy", choices=("per_channel", "global"), default=None)
    p.add_argument("--out-prefix", type=str, default=None)
    add_common(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("bench", help="generation and pipeline microbenchmarks")
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--kinds", type=str, default=None, help="comma-separated generator kinds")
    p.add_argument("--pipeline", action="store_const", const=True, default=None,
                   help="benchmark the full augmentation pipeline")
    p.add_argument("--image-dir", type=str, default=None)
    p.add_argument("--generator", choices=GENERATOR_KINDS, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--out", type=str, default=None)
    add_common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # argparse stores --in as in_; normalize for the resolver.
    if hasattr(args, "in_"):
        args.__dict__["in"] = args.in_
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ImageIOError, OSError, spectra.OracleError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
