import numpy as np
import pytest

from freqbal.spectral import (
    FrequencyMaps,
    SpectralConfig,
    assemble_maps,
    center_crop,
    compute_maps,
    compute_maps_batch,
    dct2,
    extract_bands,
    fft_filter,
    idct2,
    merge_patches,
    partition_patches,
    spectral_energy,
    to_plane,
)


def naive_dct2(x):
    # Literal O(p^4) orthonormal DCT-II double sum.
    p = x.shape[0]
    out = np.zeros((p, p))
    for u in range(p):
        for v in range(p):
            cu = np.sqrt(1.0 / p) if u == 0 else np.sqrt(2.0 / p)
            cv = np.sqrt(1.0 / p) if v == 0 else np.sqrt(2.0 / p)
            acc = 0.0
            for m in range(p):
                for n in range(p):
                    acc += (
                        x[m, n]
                        * np.cos((2 * m + 1) * u * np.pi / (2 * p))
                        * np.cos((2 * n + 1) * v * np.pi / (2 * p))
                    )
            out[u, v] = cu * cv * acc
    return out


class TestPartition:
    def test_quadrants(self):
        img = np.arange(256, dtype=float).reshape(16, 16)
        patches = partition_patches(img, 8)
        assert patches.shape == (4, 8, 8)
        assert np.array_equal(patches[0], img[:8, :8])
        assert np.array_equal(patches[1], img[:8, 8:])
        assert np.array_equal(patches[2], img[8:, :8])
        assert np.array_equal(patches[3], img[8:, 8:])

    def test_single_patch(self):
        img = np.random.default_rng(0).random((8, 8))
        patches = partition_patches(img, 8)
        assert patches.shape == (1, 8, 8)
        assert np.array_equal(patches[0], img)

    def test_roundtrip_24x16(self):
        img = np.random.default_rng(1).random((24, 16))
        patches = partition_patches(img, 8)
        assert patches.shape == (6, 8, 8)
        assert np.array_equal(merge_patches(patches, (3, 2)), img)

    def test_bijection_property(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            gh, gw = rng.integers(1, 5, size=2)
            img = rng.random((gh * 8, gw * 8))
            back = merge_patches(partition_patches(img, 8), (gh, gw))
            assert np.array_equal(back, img)

    def test_not_divisible_rejected(self):
        with pytest.raises(ValueError):
            partition_patches(np.zeros((12, 16)), 8)


class TestDct:
    def test_constant_patch_dc_only(self):
        coeffs = dct2(np.full((8, 8), 3.0))
        assert coeffs[0, 0] == pytest.approx(8 * 3.0, abs=1e-12)
        off = coeffs.copy()
        off[0, 0] = 0.0
        assert np.abs(off).max() < 1e-12

    def test_zero_patch(self):
        assert np.abs(dct2(np.zeros((8, 8)))).max() == 0.0

    def test_matches_naive_definition(self):
        rng = np.random.default_rng(3)
        for p in (4, 8):
            x = rng.random((p, p))
            assert np.abs(dct2(x) - naive_dct2(x)).max() < 1e-9

    def test_roundtrip_and_parseval(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            x = rng.random((8, 8))
            c = dct2(x)
            assert np.abs(idct2(c) - x).max() < 1e-9
            assert abs((c**2).sum() - (x**2).sum()) < 1e-9

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            dct2(np.zeros((4, 8)))


class TestBands:
    def test_index_encoding_corners(self):
        coeffs = np.array([[10.0 * r + c for c in range(8)] for r in range(8)])
        low, high = extract_bands(coeffs, 2)
        assert np.array_equal(low, [[0.0, 1.0], [10.0, 11.0]])
        assert np.array_equal(high, [[66.0, 67.0], [76.0, 77.0]])

    def test_half_patch_disjoint_tiling(self):
        coeffs = np.random.default_rng(5).random((8, 8))
        low, high = extract_bands(coeffs, 4)
        assert np.array_equal(low, coeffs[:4, :4])
        assert np.array_equal(high, coeffs[4:, 4:])

    def test_matches_bruteforce_slicing(self):
        rng = np.random.default_rng(6)
        coeffs = rng.random((8, 8))
        for q in (1, 2, 3, 4):
            low, high = extract_bands(coeffs, q)
            exp_low = np.array([[coeffs[a, b] for b in range(q)] for a in range(q)])
            exp_high = np.array(
                [[coeffs[8 - q + a, 8 - q + b] for b in range(q)] for a in range(q)]
            )
            assert np.array_equal(low, exp_low)
            assert np.array_equal(high, exp_high)

    def test_band_index_sets_disjoint(self):
        for p in (4, 8, 16):
            for q in range(1, p // 2 + 1):
                low_idx = {(a, b) for a in range(q) for b in range(q)}
                high_idx = {(p - q + a, p - q + b) for a in range(q) for b in range(q)}
                assert not low_idx & high_idx

    def test_overlap_rejected_without_flag(self):
        coeffs = np.zeros((8, 8))
        with pytest.raises(ValueError):
            extract_bands(coeffs, 6)
        low, high = extract_bands(coeffs, 6, allow_overlap=True)
        assert low.shape == high.shape == (6, 6)


class TestAssemble:
    def test_dims_16x16(self):
        img = np.random.default_rng(7).random((16, 16))
        maps = compute_maps(img, SpectralConfig())
        assert maps.low.shape == maps.high.shape == (4, 4)

    def test_single_patch_maps_equal_blocks(self):
        img = np.random.default_rng(8).random((8, 8))
        low, high = extract_bands(dct2(img), 2)
        maps = compute_maps(img, SpectralConfig())
        assert np.allclose(maps.low, low, atol=1e-12)
        assert np.allclose(maps.high, high, atol=1e-12)

    def test_missing_block_rejected(self):
        blocks = np.zeros((3, 2, 2))
        with pytest.raises(ValueError):
            assemble_maps(blocks, blocks, (2, 2))

    def test_pipeline_matches_straight_line_reimplementation(self):
        rng = np.random.default_rng(9)
        img = rng.random((32, 32))
        cfg = SpectralConfig(p=8, q=2)
        maps = compute_maps(img, cfg)
        exp_low = np.zeros((8, 8))
        exp_high = np.zeros((8, 8))
        for r in range(4):
            for c in range(4):
                coeffs = naive_dct2(img[r * 8 : (r + 1) * 8, c * 8 : (c + 1) * 8])
                exp_low[r * 2 : r * 2 + 2, c * 2 : c * 2 + 2] = coeffs[:2, :2]
                exp_high[r * 2 : r * 2 + 2, c * 2 : c * 2 + 2] = coeffs[6:, 6:]
        assert np.abs(maps.low - exp_low).max() < 1e-9
        assert np.abs(maps.high - exp_high).max() < 1e-9

    def test_batch_matches_single(self):
        rng = np.random.default_rng(10)
        imgs = rng.random((5, 16, 16))
        cfg = SpectralConfig()
        low, high = compute_maps_batch(imgs, cfg)
        for i in range(5):
            maps = compute_maps(imgs[i], cfg)
            assert np.array_equal(low[i], maps.low)
            assert np.array_equal(high[i], maps.high)

    def test_mismatched_maps_rejected(self):
        with pytest.raises(ValueError):
            FrequencyMaps(low=np.zeros((2, 2)), high=np.zeros((3, 3)))


class TestFftFilter:
    def test_full_window_low_pass_is_identity(self):
        img = np.random.default_rng(11).random((32, 32))
        assert np.abs(fft_filter(img, "low_pass", 32) - img).max() < 1e-6

    def test_full_window_high_pass_is_zero(self):
        img = np.random.default_rng(12).random((32, 32))
        assert np.abs(fft_filter(img, "high_pass", 32)).max() < 1e-6

    def test_complementarity(self):
        rng = np.random.default_rng(13)
        for n in (1, 7, 15, 16, 31):
            img = rng.random((32, 32))
            total = fft_filter(img, "low_pass", n) + fft_filter(img, "high_pass", n)
            assert np.abs(total - img).max() < 1e-6

    def test_odd_image_side(self):
        img = np.random.default_rng(14).random((31, 31))
        assert np.abs(fft_filter(img, "low_pass", 31) - img).max() < 1e-6

    def test_energy_monotone_in_window(self):
        img = np.random.default_rng(15).random((64, 64))
        e15 = spectral_energy(fft_filter(img, "low_pass", 15))
        e7 = spectral_energy(fft_filter(img, "low_pass", 7))
        assert e15 > e7

    def test_window_too_large_rejected(self):
        with pytest.raises(ValueError):
            fft_filter(np.zeros((16, 16)), "low_pass", 17)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            fft_filter(np.zeros((16, 16)), "band_pass", 4)


class TestSpectralEnergy:
    def test_zero_image(self):
        assert spectral_energy(np.zeros((16, 16))) == 0.0

    def test_unit_impulse(self):
        img = np.zeros((16, 16))
        img[3, 5] = 1.0
        assert spectral_energy(img) == pytest.approx(1.0, abs=1e-6)

    def test_parseval(self):
        img = np.random.default_rng(16).random((32, 32))
        assert spectral_energy(img) == pytest.approx(float((img**2).sum()), abs=1e-6)


class TestHelpers:
    def test_to_plane_averages_channels(self):
        arr = np.stack([np.full((4, 4), 1.0), np.full((4, 4), 3.0)], axis=2)
        assert np.array_equal(to_plane(arr), np.full((4, 4), 2.0))

    def test_center_crop(self):
        img = np.arange(11 * 13, dtype=float).reshape(11, 13)
        cropped = center_crop(img, 8)
        assert cropped.shape == (8, 8)
        assert np.array_equal(cropped, img[1:9, 2:10])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SpectralConfig(p=8, q=5)
        SpectralConfig(p=8, q=5, allow_overlap=True)
        with pytest.raises(ValueError):
            SpectralConfig(sigma=0.0)
        with pytest.raises(ValueError):
            SpectralConfig(omega_bank=1.5)
