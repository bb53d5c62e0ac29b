import numpy as np
import pytest

from colorvein.imaging import (
    TEMPLATE_VALUES_PER_COMPONENT,
    BinaryPattern,
    FeatureVector,
    GrayImage,
    ImageFormatError,
    load_gray,
    load_pattern,
    normalize_roi,
    quantize_template,
    write_pgm,
)


def write_pgm_raw(path, width, height, maxval, payload: bytes):
    path.write_bytes(f"P5\n{width} {height}\n{maxval}\n".encode() + payload)


class TestGrayImage:
    def test_rejects_small_images(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((4, 64)))

    def test_rejects_out_of_range(self):
        data = np.zeros((8, 8))
        data[3, 3] = 1.5
        with pytest.raises(ValueError):
            GrayImage(data)

    def test_immutable(self):
        img = GrayImage(np.zeros((8, 8)))
        with pytest.raises(ValueError):
            img.data[0, 0] = 1.0


class TestBinaryPattern:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BinaryPattern(np.full((8, 8), 2, dtype=np.uint8))

    def test_counts(self):
        arr = np.zeros((8, 8), dtype=np.uint8)
        arr[2, 3] = 1
        assert BinaryPattern(arr).count() == 1


class TestLoadGray:
    def test_all_255_maps_to_one(self, tmp_path):
        p = tmp_path / "white.pgm"
        write_pgm_raw(p, 8, 8, 255, bytes([255] * 64))
        assert np.all(load_gray(p).data == 1.0)

    def test_all_zero_maps_to_zero(self, tmp_path):
        p = tmp_path / "black.pgm"
        write_pgm_raw(p, 8, 8, 255, bytes([0] * 64))
        assert np.all(load_gray(p).data == 0.0)

    def test_mid_value_rescale(self, tmp_path):
        # 8-bit pixel 128 -> 128/255 by direct arithmetic
        p = tmp_path / "mid.pgm"
        write_pgm_raw(p, 8, 8, 255, bytes([128] * 64))
        assert np.all(load_gray(p).data == 128 / 255)

    def test_16bit_uses_nominal_max(self, tmp_path):
        p = tmp_path / "deep.pgm"
        value = 30000
        payload = value.to_bytes(2, "big") * 64
        write_pgm_raw(p, 8, 8, 65535, payload)
        assert np.allclose(load_gray(p).data, value / 65535)

    def test_deterministic(self, tmp_path):
        p = tmp_path / "img.pgm"
        rng = np.random.default_rng(0)
        write_pgm_raw(p, 16, 8, 255, bytes(rng.integers(0, 256, 128, dtype=np.uint8)))
        a = load_gray(p)
        b = load_gray(p)
        assert np.array_equal(a.data, b.data)

    def test_expected_dims_mismatch(self, tmp_path):
        p = tmp_path / "img.pgm"
        write_pgm_raw(p, 8, 8, 255, bytes(64))
        with pytest.raises(ImageFormatError):
            load_gray(p, expected_dims=(16, 16))

    def test_png_roundtrip_and_multichannel_rejection(self, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(3)
        arr = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
        p = tmp_path / "gray.png"
        Image.fromarray(arr, mode="L").save(p)
        img = load_gray(p)
        assert np.array_equal(img.data, arr / 255.0)
        rgb = tmp_path / "color.png"
        Image.fromarray(np.stack([arr] * 3, axis=2), mode="RGB").save(rgb)
        with pytest.raises(ImageFormatError):
            load_gray(rgb)

    def test_garbage_rejected(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"not an image")
        with pytest.raises(ImageFormatError):
            load_gray(p)

    def test_pgm_comment_and_pattern_roundtrip(self, tmp_path):
        p = tmp_path / "mask.pgm"
        arr = np.zeros((8, 8), dtype=np.uint8)
        arr[1:4, 2:6] = 1
        write_pgm(BinaryPattern(arr), p)
        assert np.array_equal(load_pattern(p).data, arr)


class TestNormalizeRoi:
    def test_identity_is_bit_exact(self, rng):
        img = GrayImage(rng.uniform(size=(128, 256)))
        out = normalize_roi(img, (128, 256))
        assert np.array_equal(out.data, img.data)

    def test_checkerboard_upscale_matches_hand_bilinear(self):
        # 2x2 checkerboard {0,1;1,0} upscaled to 4x4.  The interpolant is
        # f(y, x) = x + y - 2xy; half-pixel-center coords for 2 -> 4 are
        # clip(j/2 - 0.25) = (0, 0.25, 0.75, 1).  Derived by hand:
        from colorvein.imaging import bilinear_resample

        out = bilinear_resample(np.array([[0.0, 1.0], [1.0, 0.0]]), (4, 4))
        expected = np.array([
            [0.0, 0.25, 0.75, 1.0],
            [0.25, 0.375, 0.625, 0.75],
            [0.75, 0.625, 0.375, 0.25],
            [1.0, 0.75, 0.25, 0.0],
        ])
        assert np.allclose(out, expected, atol=1e-15)
        # the four center samples straddle the interpolant's exact 0.5 center
        assert out[1:3, 1:3].mean() == 0.5

    def test_constant_preserved(self):
        img = GrayImage(np.full((16, 16), 0.7))
        out = normalize_roi(img, (32, 8))
        assert np.allclose(out.data, 0.7)

    def test_idempotent_at_fixed_dims(self, rng):
        img = GrayImage(rng.uniform(size=(20, 30)))
        once = normalize_roi(img, (16, 16))
        twice = normalize_roi(once, (16, 16))
        assert np.array_equal(once.data, twice.data)

    def test_degenerate_target_rejected(self, rng):
        img = GrayImage(rng.uniform(size=(16, 16)))
        with pytest.raises(ValueError):
            normalize_roi(img, (4, 16))


class TestQuantizeTemplate:
    def test_rounding_half_away_from_zero(self):
        raw = np.zeros(64)
        raw[0] = 0.123456
        raw[1] = -0.123456
        raw[2] = 0.00005
        raw[3] = -0.00005
        fv = quantize_template(raw)
        assert fv.components[0] == pytest.approx(0.1235, abs=0)
        assert fv.components[1] == pytest.approx(-0.1235, abs=0)
        assert fv.components[2] == pytest.approx(0.0001, abs=0)
        assert fv.components[3] == pytest.approx(-0.0001, abs=0)

    def test_clamping(self):
        raw = np.zeros(64)
        raw[0] = 15.0
        raw[1] = -10.00004
        fv = quantize_template(raw)
        assert fv.components[0] == 10.0
        assert fv.components[1] == -10.0

    def test_idempotent(self, rng):
        raw = rng.uniform(-12, 12, size=64)
        once = quantize_template(raw)
        twice = quantize_template(once.components)
        assert np.array_equal(once.components, twice.components)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            quantize_template(np.zeros(63))

    def test_representable_value_count(self):
        # closed interval [-10, 10] at 4 decimals: one more than 200,000
        assert TEMPLATE_VALUES_PER_COMPONENT == 200_001
        lo = quantize_template(np.full(64, -10.0)).components[0]
        hi = quantize_template(np.full(64, 10.0)).components[0]
        assert round((hi - lo) * 10_000) + 1 == 200_001

    def test_feature_vector_invariants(self):
        with pytest.raises(ValueError):
            FeatureVector(np.full(64, 0.00001 / 2))  # not on the grid
        with pytest.raises(ValueError):
            FeatureVector(np.full(64, 11.0))
