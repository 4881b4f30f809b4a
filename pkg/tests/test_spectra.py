import csv
import shutil

import numpy as np
import pytest

from texmix.imagecore import derive_stream, save_image
from texmix.spectra import (
    FourierBasisSpec,
    OracleError,
    fourier_basis_image,
    perturb,
    radial_power_spectrum,
    read_labels_csv,
    render_heatmap_png,
    resolve_oracle,
    run_oracle_command,
    sensitivity_heatmap,
    spectral_centroid,
    stub_constant_oracle,
    stub_threshold_oracle,
    write_heatmap_csv,
    write_spectrum_csv,
)


class TestRadialPowerSpectrum:
    def test_constant_image_all_zero_bins(self):
        report = radial_power_spectrum(np.full((16, 16, 3), 0.7), 8)
        assert all(p == 0.0 for _, p in report.bins)
        assert report.dc_power > 0.0
        assert report.total_power == 0.0

    def test_planar_wave_single_bin(self):
        # integer-frequency wave: one bin holds >=99% of non-DC power
        v, u = np.mgrid[0:64, 0:64]
        for f in (5, 11, 23):
            wave = np.sin(2 * np.pi * f * u / 64)
            report = radial_power_spectrum(wave[:, :, None], 45)  # ~1-cycle bins
            powers = np.array([p for _, p in report.bins])
            counts = np.array(report.counts)
            best = int(powers.argmax())
            assert powers[best] * counts[best] >= 0.99 * report.total_power
            assert abs(report.bins[best][0] - f) <= 1.0

    def test_parseval(self):
        rng = np.random.default_rng(0)
        img = rng.random((24, 20, 3))
        report = radial_power_spectrum(img, 16)
        gray = img.mean(axis=2)
        expected = gray.var() * gray.size
        assert abs(report.total_power - expected) / expected < 1e-6

    def test_bins_sorted_and_nonnegative(self):
        rng = np.random.default_rng(1)
        report = radial_power_spectrum(rng.random((16, 16, 1)), 12)
        freqs = [fq for fq, _ in report.bins]
        assert freqs == sorted(freqs)
        assert all(p >= 0 for _, p in report.bins)
        assert len(report.bins) == 12

    def test_too_small_image(self):
        with pytest.raises(ValueError, match="small"):
            radial_power_spectrum(np.zeros((1, 5, 1)), 4)

    def test_csv_row_count(self, tmp_path):
        report = radial_power_spectrum(np.random.default_rng(2).random((16, 16, 1)), 32)
        out = tmp_path / "spec.csv"
        write_spectrum_csv(report, out)
        rows = list(csv.reader(open(out)))
        assert len(rows) == 33  # header + 32 bins

    def test_centroid_weighting(self):
        v, u = np.mgrid[0:64, 0:64]
        low = np.sin(2 * np.pi * 2 * u / 64)[:, :, None]
        high = np.sin(2 * np.pi * 20 * u / 64)[:, :, None]
        assert spectral_centroid(radial_power_spectrum(low, 45)) < spectral_centroid(
            radial_power_spectrum(high, 45)
        )


class TestFourierBasisImage:
    def test_unit_norm(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            i = int(rng.integers(-8, 9))
            j = int(rng.integers(-8, 9))
            if (i, j) == (0, 0):
                continue
            basis = fourier_basis_image(FourierBasisSpec(i=i, j=j, epsilon=1.0), 32, 24)
            assert abs(np.linalg.norm(basis) - 1.0) < 1e-9

    def test_axis_wave_orientation(self):
        # (1, 0): constant along each row, cosine down the columns
        basis = fourier_basis_image(FourierBasisSpec(i=1, j=0, epsilon=1.0), 16, 16)
        assert np.abs(basis - basis[:, 0:1]).max() < 1e-12
        col = basis[:, 0]
        expected = np.cos(2 * np.pi * np.arange(16) / 16)
        expected /= np.linalg.norm(np.tile(expected[:, None], (1, 16)))
        assert np.abs(col - expected).max() < 1e-12

    def test_dft_support_two_coefficients(self):
        basis = fourier_basis_image(FourierBasisSpec(i=3, j=-5, epsilon=1.0), 32, 32)
        f = np.fft.fft2(basis)
        nonzero = np.abs(f) > 1e-9
        assert nonzero.sum() == 2
        assert nonzero[3, -5 % 32]
        assert nonzero[-3 % 32, 5]

    def test_orthonormality(self):
        pairs = [(1, 0), (0, 1), (2, 3), (-2, 3), (5, 5)]
        bases = [fourier_basis_image(FourierBasisSpec(i=i, j=j, epsilon=1.0), 16, 16) for i, j in pairs]
        for a in range(len(bases)):
            for b in range(len(bases)):
                inner = float((bases[a] * bases[b]).sum())
                if a == b:
                    assert abs(inner - 1.0) < 1e-9
                else:
                    assert abs(inner) < 1e-9

    def test_rejects_origin_and_out_of_range(self):
        with pytest.raises(ValueError):
            FourierBasisSpec(i=0, j=0, epsilon=1.0)
        with pytest.raises(ValueError, match="Nyquist"):
            fourier_basis_image(FourierBasisSpec(i=0, j=99, epsilon=1.0), 16, 16)

    def test_even_symmetry_in_indices(self):
        a = fourier_basis_image(FourierBasisSpec(i=2, j=-3, epsilon=1.0), 16, 16)
        b = fourier_basis_image(FourierBasisSpec(i=-2, j=3, epsilon=1.0), 16, 16)
        assert np.array_equal(a, b)


class TestPerturb:
    def test_epsilon_zero_identity(self):
        x = np.full((8, 8, 3), 0.5)
        spec = FourierBasisSpec(i=1, j=1, epsilon=0.0)
        out = perturb(x, spec, derive_stream(0, 0))
        assert np.array_equal(out, x)

    def test_preclip_norm_is_epsilon(self):
        x = np.full((16, 16, 3), 0.5)  # far from the clip boundaries
        spec = FourierBasisSpec(i=2, j=1, epsilon=0.125)
        out = perturb(x, spec, derive_stream(1, 1))
        for c in range(3):
            assert abs(np.linalg.norm(out[:, :, c] - x[:, :, c]) - 0.125) < 1e-9

    def test_deterministic_signs(self):
        rng = np.random.default_rng(4)
        x = np.clip(rng.random((8, 8, 3)), 0, 1)
        spec = FourierBasisSpec(i=1, j=2, epsilon=0.05)
        a = perturb(x, spec, derive_stream(7, 3))
        b = perturb(x, spec, derive_stream(7, 3))
        assert np.array_equal(a, b)

    def test_global_sign_policy(self):
        x = np.full((8, 8, 3), 0.5)
        spec = FourierBasisSpec(i=1, j=0, epsilon=0.04, sign_policy="global")
        out = perturb(x, spec, derive_stream(2, 2))
        d = out - x
        assert np.array_equal(d[:, :, 0], d[:, :, 1])
        assert np.array_equal(d[:, :, 0], d[:, :, 2])

    def test_mirrored_spec_same_perturbation(self):
        # the basis is even in (i, j): same stream -> identical output
        rng = np.random.default_rng(5)
        x = np.clip(rng.random((12, 12, 3)), 0, 1)
        a = perturb(x, FourierBasisSpec(i=2, j=-1, epsilon=0.1), derive_stream(9, 0))
        b = perturb(x, FourierBasisSpec(i=-2, j=1, epsilon=0.1), derive_stream(9, 0))
        assert np.array_equal(a, b)


def make_dataset(tmp_path, n=6, size=16, bright=0):
    """Labeled images: label 1 iff mean intensity > 0.5."""
    dataset = tmp_path / "data"
    dataset.mkdir()
    rows = []
    rng = np.random.default_rng(0)
    for k in range(n):
        level = 0.8 if k < bright else 0.2
        img = np.clip(np.full((size, size, 3), level) + 0.01 * rng.standard_normal((size, size, 3)), 0, 1)
        name = f"img{k}.png"
        save_image(img, dataset / name, format="png")
        rows.append((name, 1 if level > 0.5 else 0))
    labels = tmp_path / "labels.csv"
    with open(labels, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_path", "label"])
        writer.writerows(rows)
    return dataset, labels


class TestSensitivityHeatmap:
    def test_constant_correct_oracle_all_zero(self, tmp_path):
        dataset, labels = make_dataset(tmp_path, n=4, bright=0)  # all labels 0
        spec = FourierBasisSpec(i=1, j=1, epsilon=0.1)
        grid = sensitivity_heatmap(dataset, labels, stub_constant_oracle(0), spec, 2)
        assert grid.error_rate.shape == (5, 5)
        assert np.all(grid.error_rate == 0.0)
        assert np.all(grid.counts == 4)

    def test_constant_wrong_oracle_all_one(self, tmp_path):
        dataset, labels = make_dataset(tmp_path, n=4, bright=0)
        spec = FourierBasisSpec(i=1, j=1, epsilon=0.1)
        grid = sensitivity_heatmap(dataset, labels, stub_constant_oracle(1), spec, 2)
        assert np.all(grid.error_rate == 1.0)

    def test_conjugate_symmetry_structural(self, tmp_path):
        dataset, labels = make_dataset(tmp_path, n=4, bright=2)
        spec = FourierBasisSpec(i=1, j=1, epsilon=0.2)
        grid = sensitivity_heatmap(dataset, labels, stub_threshold_oracle(0.5), spec, 2)
        for i in range(-2, 3):
            for j in range(-2, 3):
                assert grid.at(i, j) == grid.at(-i, -j)

    def test_threshold_stub_center_cell_unperturbed(self, tmp_path):
        dataset, labels = make_dataset(tmp_path, n=4, bright=2)
        spec = FourierBasisSpec(i=1, j=1, epsilon=0.2)
        grid = sensitivity_heatmap(dataset, labels, stub_threshold_oracle(0.5), spec, 1)
        assert grid.at(0, 0) == 0.0  # stub is perfect on clean images

    def test_oracle_failure_records_sentinel(self, tmp_path):
        dataset, labels = make_dataset(tmp_path, n=3)

        def broken(paths):
            raise OracleError("oracle down")

        spec = FourierBasisSpec(i=1, j=1, epsilon=0.1)
        grid = sensitivity_heatmap(dataset, labels, broken, spec, 1)
        assert np.all(np.isnan(grid.error_rate))
        assert np.all(grid.counts == 0)

    def test_subprocess_oracle_roundtrip(self, tmp_path):
        exe = shutil.which("texmix-stub-oracle")
        assert exe is not None, "console script not installed"
        dataset, labels = make_dataset(tmp_path, n=4, bright=0)
        spec = FourierBasisSpec(i=1, j=1, epsilon=0.05)
        grid = sensitivity_heatmap(dataset, labels, f"{exe} constant:0", spec, 1,
                                   workdir=tmp_path / "work")
        assert np.all(grid.error_rate == 0.0)

    def test_run_oracle_command_failure_raises(self, tmp_path):
        with pytest.raises(OracleError):
            run_oracle_command("false", ["x.png"], tmp_path)

    def test_csv_and_png_outputs(self, tmp_path):
        dataset, labels = make_dataset(tmp_path, n=3)
        spec = FourierBasisSpec(i=1, j=1, epsilon=0.1)
        grid = sensitivity_heatmap(dataset, labels, stub_constant_oracle(0), spec, 2)
        write_heatmap_csv(grid, tmp_path / "grid.csv")
        render_heatmap_png(grid, tmp_path / "grid.png")
        rows = list(csv.DictReader(open(tmp_path / "grid.csv")))
        assert len(rows) == 25
        assert {r["i"] for r in rows} == {str(i) for i in range(-2, 3)}
        from texmix.imagecore import load_image

        png = load_image(tmp_path / "grid.png")
        assert png.shape == (5, 5, 1)

    def test_resolve_oracle_specs(self):
        assert callable(resolve_oracle("stub"))
        assert callable(resolve_oracle("stub:constant:1"))
        assert callable(resolve_oracle("stub:threshold:0.3"))
        assert resolve_oracle("python oracle.py") == "python oracle.py"
        with pytest.raises(ValueError):
            resolve_oracle("stub:bogus:1")

    def test_labels_csv_validation(self, tmp_path):
        labels = tmp_path / "empty.csv"
        labels.write_text("image_path,label\n")
        with pytest.raises(ValueError, match="no labeled"):
            read_labels_csv(labels)
