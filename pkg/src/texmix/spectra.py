"""Frequency-domain tooling: radial power spectra and sensitivity heatmaps.

The radially averaged power spectrum summarizes an image's frequency
content irrespective of orientation and is the package's main validation
instrument for generator claims.  Power is defined as |F|^2 / (W*H) with F
the unnormalized 2D DFT, so the total non-DC power equals the spatial
variance times the pixel count (Parseval).

The sensitivity harness perturbs evaluation images with unit-energy
Fourier basis images, queries a classifier oracle, and collects an error
rate per frequency pair (i, j).  The package never embeds a classifier:
the oracle is either a Python callable mapping image paths to predicted
labels or an external command run through a CSV request/response protocol.

Oracle subprocess protocol: the harness writes a request manifest CSV
(``request_id,image_path``), invokes ``command <manifest> <response>``, and
reads back a response CSV (``image_path,predicted_label``).  A stub oracle
for wiring tests ships as the ``texmix-stub-oracle`` script.
"""

from __future__ import annotations

import csv
import dataclasses
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import ImageBuffer, derive_stream, ensure_image, load_image, save_image


@dataclass(frozen=True)
class SpectrumReport:
    """Radially binned power: centers in cycles per image width.

    ``bins`` holds (center_frequency, mean_power) sorted ascending;
    ``counts`` holds the number of DFT samples per bin; ``total_power`` is
    the sum over all non-DC samples (not just binned means), which makes
    Parseval checks independent of the binning.
    """

    bin_count: int
    bins: tuple
    counts: tuple
    dc_power: float
    total_power: float


def radial_power_spectrum(x: ImageBuffer, bin_count: int) -> SpectrumReport:
    """Bin 2D DFT power by radial frequency.

    3-channel inputs are averaged to gray first.  The radial frequency of
    DFT sample (ky, kx) is W * sqrt((kx/W)^2 + (ky/H)^2), i.e. cycles per
    width-length in any direction; bins split [0, r_max] evenly and the DC
    sample is reported separately.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        gray = x.mean(axis=2) if x.shape[2] > 1 else x[:, :, 0]
    else:
        gray = x
    h, w = gray.shape
    if h < 2 or w < 2:
        raise ValueError(f"image too small for spectrum analysis: {w}x{h}")
    if bin_count < 1:
        raise ValueError(f"bin_count must be >= 1, got {bin_count}")
    power = np.abs(np.fft.fft2(gray)) ** 2 / (w * h)
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = w * np.sqrt(fx * fx + fy * fy)
    r_max = float(radius.max())
    flat_r = radius.ravel()
    flat_p = power.ravel()
    nondc = flat_r > 0
    idx = np.minimum((flat_r[nondc] / r_max * bin_count).astype(np.int64), bin_count - 1)
    sums = np.bincount(idx, weights=flat_p[nondc], minlength=bin_count)
    counts = np.bincount(idx, minlength=bin_count)
    means = np.divide(sums, counts, out=np.zeros(bin_count), where=counts > 0)
    centers = (np.arange(bin_count) + 0.5) * r_max / bin_count
    return SpectrumReport(
        bin_count=bin_count,
        bins=tuple(zip(centers.tolist(), means.tolist())),
        counts=tuple(int(c) for c in counts),
        dc_power=float(power[0, 0]),
        total_power=float(flat_p[nondc].sum()),
    )


def write_spectrum_csv(report: SpectrumReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_cycles_per_width", "mean_power"])
        for freq, p in report.bins:
            writer.writerow([f"{freq:.6f}", f"{p:.12g}"])


def spectral_centroid(report: SpectrumReport) -> float:
    """Power-weighted mean radial frequency over the non-DC bins."""
    freqs = np.array([b[0] for b in report.bins])
    sums = np.array([b[1] for b in report.bins]) * np.array(report.counts)
    total = sums.sum()
    if total == 0:
        return 0.0
    return float((freqs * sums).sum() / total)


# ---------------------------------------------------------------------------
# Fourier basis perturbations

@dataclass(frozen=True)
class FourierBasisSpec:
    """One frequency pair with a perturbation norm and a sign policy.

    ``i`` is the row frequency (cycles per height), ``j`` the column
    frequency (cycles per width).  ``epsilon`` is the l2 norm of the
    per-channel perturbation before clipping; zero is allowed and makes the
    perturbation the identity.  ``sign_policy`` is either "per_channel"
    (independent +-1 per channel) or "global" (one sign).
    """

    i: int
    j: int
    epsilon: float
    sign_policy: str = "per_channel"

    def __post_init__(self):
        if self.i == 0 and self.j == 0:
            raise ValueError("(i, j) must not be (0, 0)")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.sign_policy not in ("per_channel", "global"):
            raise ValueError(f"unknown sign policy {self.sign_policy!r}")


def fourier_basis_image(spec: FourierBasisSpec, width: int, height: int) -> np.ndarray:
    """Unit-l2-norm planar cosine whose DFT support is {(i,j), (-i,-j)}.

    Returns a signed (H, W) matrix.  (i, j) = (1, 0) varies as a cosine
    down the columns and is constant along each row.
    """
    if abs(spec.i) > height // 2 or abs(spec.j) > width // 2:
        raise ValueError(f"(i={spec.i}, j={spec.j}) outside Nyquist for {width}x{height}")
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    wave = np.cos(2.0 * np.pi * (spec.i * v / height + spec.j * u / width))
    return wave / np.linalg.norm(wave)


def perturb(x: ImageBuffer, spec: FourierBasisSpec, stream: np.random.Generator) -> ImageBuffer:
    """Add the signed, epsilon-scaled basis to each channel, then clip.

    Per-channel signs are drawn first (three draws, or one under the
    "global" policy); before clipping the per-channel perturbation has l2
    norm exactly epsilon.
    """
    ensure_image(x)
    channels = x.shape[2]
    if spec.sign_policy == "global":
        signs = np.full(channels, int(stream.integers(0, 2)) * 2 - 1, dtype=np.float64)
    else:
        signs = stream.integers(0, 2, size=channels).astype(np.float64) * 2.0 - 1.0
    basis = fourier_basis_image(spec, x.shape[1], x.shape[0])
    out = x + basis[:, :, None] * (signs[None, None, :] * spec.epsilon)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# classifier oracle protocol

class OracleError(Exception):
    """Raised when an oracle invocation fails or returns malformed output."""


def run_oracle_command(command: str, image_paths: list, workdir) -> list:
    """Invoke an external oracle over the CSV request/response protocol."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    manifest = workdir / "request.csv"
    response = workdir / "response.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["request_id", "image_path"])
        for i, p in enumerate(image_paths):
            writer.writerow([i, str(p)])
    argv = shlex.split(command) + [str(manifest), str(response)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=300)
    except (OSError, subprocess.TimeoutExpired) as e:
        raise OracleError(f"oracle invocation failed: {e}") from e
    if proc.returncode != 0:
        raise OracleError(f"oracle exited {proc.returncode}: {proc.stderr.strip()[:500]}")
    try:
        with open(response, newline="") as fh:
            rows = list(csv.DictReader(fh))
        by_path = {r["image_path"]: int(r["predicted_label"]) for r in rows}
        return [by_path[str(p)] for p in image_paths]
    except (OSError, KeyError, ValueError) as e:
        raise OracleError(f"malformed oracle response: {e}") from e


def _call_oracle(oracle, image_paths: list, workdir) -> list:
    if callable(oracle):
        preds = oracle([str(p) for p in image_paths])
        if len(preds) != len(image_paths):
            raise OracleError("oracle returned a prediction count mismatch")
        return [int(p) for p in preds]
    return run_oracle_command(str(oracle), image_paths, workdir)


def stub_constant_oracle(label: int):
    """Oracle that predicts one label for everything."""
    return lambda paths: [label] * len(paths)


def stub_threshold_oracle(threshold: float = 0.5):
    """Oracle that predicts 1 when the mean intensity exceeds a threshold."""

    def classify(paths):
        return [1 if load_image(p).mean() > threshold else 0 for p in paths]

    return classify


def resolve_oracle(spec: str):
    """Map an oracle CLI string to a callable or pass a command through.

    "stub" or "stub:threshold:T" select the built-in threshold stub;
    "stub:constant:L" selects the constant stub.  Anything else is treated
    as an external command.
    """
    if spec == "stub":
        return stub_threshold_oracle()
    if spec.startswith("stub:"):
        parts = spec.split(":")
        if len(parts) == 3 and parts[1] == "constant":
            return stub_constant_oracle(int(parts[2]))
        if len(parts) == 3 and parts[1] == "threshold":
            return stub_threshold_oracle(float(parts[2]))
        raise ValueError(f"unknown stub oracle spec {spec!r}")
    return spec


# ---------------------------------------------------------------------------
# sensitivity heatmap

@dataclass(frozen=True)
class HeatmapGrid:
    """Error rates indexed by frequency pair over [-E..E]^2.

    ``error_rate[i + E, j + E]`` is the misclassification rate under the
    (i, j) perturbation; failed cells hold NaN.  ``counts`` carries the
    number of evaluated images per cell (0 for failed cells).
    """

    half_extent: int
    error_rate: np.ndarray
    counts: np.ndarray

    def at(self, i: int, j: int) -> float:
        e = self.half_extent
        return float(self.error_rate[i + e, j + e])


def read_labels_csv(labels_csv, dataset_dir=None) -> list:
    """Load (path, label) pairs; relative paths resolve against dataset_dir."""
    base = Path(dataset_dir) if dataset_dir is not None else None
    out = []
    with open(labels_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            p = Path(row["image_path"])
            if base is not None and not p.is_absolute():
                p = base / p
            out.append((p, int(row["label"])))
    if not out:
        raise ValueError(f"{labels_csv}: no labeled images")
    return out


def sensitivity_heatmap(
    dataset_dir,
    labels_csv,
    oracle,
    spec_template: FourierBasisSpec,
    half_extent: int,
    root_seed: int = 0,
    workdir=None,
) -> HeatmapGrid:
    """Evaluate the oracle's error rate under every (i, j) perturbation.

    Cells are evaluated on the half-plane i > 0 plus the i = 0, j >= 0 axis
    and mirrored to (-i, -j); the basis image is even in (i, j), so the
    mirrored cell sees byte-identical perturbed images.  The (0, 0) cell is
    the unperturbed error rate.  An oracle failure marks the cell (and its
    mirror) with NaN and a count of 0 rather than inventing a rate.

    Perturbation signs for cell c and image n are drawn from the stream
    derived from (root_seed, c * 2^32 + n), keeping every cell independent
    of evaluation order.
    """
    if half_extent < 0:
        raise ValueError("half_extent must be >= 0")
    labeled = read_labels_csv(labels_csv, dataset_dir)
    images = [(load_image(p), int(label)) for p, label in labeled]
    side = 2 * half_extent + 1
    rates = np.full((side, side), np.nan)
    counts = np.zeros((side, side), dtype=np.int64)

    own_tmp = None
    if workdir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix="texmix-heatmap-")
        workdir = own_tmp.name
    workdir = Path(workdir)
    try:
        for i in range(0, half_extent + 1):
            j_start = 0 if i == 0 else -half_extent
            for j in range(j_start, half_extent + 1):
                cell_linear = (i + half_extent) * side + (j + half_extent)
                cell_dir = workdir / f"cell_{i}_{j}"
                cell_dir.mkdir(parents=True, exist_ok=True)
                batch_paths = []
                label_list = []
                for n, (img, label) in enumerate(images):
                    if i == 0 and j == 0:
                        pert = img
                    else:
                        spec = dataclasses.replace(spec_template, i=i, j=j)
                        stream = derive_stream(root_seed, (cell_linear << 32) + n)
                        pert = perturb(img, spec, stream)
                    p = cell_dir / f"{n:05d}.png"
                    save_image(pert, p, format="png")
                    batch_paths.append(p)
                    label_list.append(label)
                try:
                    preds = _call_oracle(oracle, batch_paths, cell_dir)
                except OracleError:
                    preds = None
                if preds is None:
                    rate, n_eval = np.nan, 0
                else:
                    errors = sum(1 for p, t in zip(preds, label_list) if p != t)
                    rate, n_eval = errors / len(label_list), len(label_list)
                rates[i + half_extent, j + half_extent] = rate
                counts[i + half_extent, j + half_extent] = n_eval
                rates[-i + half_extent, -j + half_extent] = rate
                counts[-i + half_extent, -j + half_extent] = n_eval
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()
    return HeatmapGrid(half_extent=half_extent, error_rate=rates, counts=counts)


def write_heatmap_csv(grid: HeatmapGrid, path) -> None:
    e = grid.half_extent
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "error_rate", "n"])
        for i in range(-e, e + 1):
            for j in range(-e, e + 1):
                r = grid.error_rate[i + e, j + e]
                writer.writerow([i, j, "nan" if np.isnan(r) else f"{r:.6f}", int(grid.counts[i + e, j + e])])


def render_heatmap_png(grid: HeatmapGrid, path) -> None:
    """Grayscale ramp: error 0 maps to black, 1 to white; NaN cells to black."""
    img = np.nan_to_num(grid.error_rate, nan=0.0)[:, :, None]
    save_image(np.clip(img, 0.0, 1.0), path, format="png")


# ---------------------------------------------------------------------------
# stub oracle subprocess entry point

def stub_oracle_main(argv=None) -> int:
    """Console entry: ``texmix-stub-oracle MODE request.csv response.csv``.

    MODE is ``constant:<label>`` or ``threshold:<float>``.  Reads the
    request manifest, writes the response CSV.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    if len(argv) != 3:
        print("usage: texmix-stub-oracle MODE request.csv response.csv", file=sys.stderr)
        return 2
    mode, manifest, response = argv
    try:
        if mode.startswith("constant:"):
            oracle = stub_constant_oracle(int(mode.split(":", 1)[1]))
        elif mode.startswith("threshold:"):
            oracle = stub_threshold_oracle(float(mode.split(":", 1)[1]))
        else:
            print(f"unknown stub mode {mode!r}", file=sys.stderr)
            return 2
        with open(manifest, newline="") as fh:
            paths = [row["image_path"] for row in csv.DictReader(fh)]
        preds = oracle(paths)
        with open(response, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_path", "predicted_label"])
            for p, pred in zip(paths, preds):
                writer.writerow([p, pred])
    except Exception as e:  # stub: any failure is a protocol failure
        print(f"stub oracle error: {e}", file=sys.stderr)
        return 1
    return 0
