import numpy as np
import pytest

from conftest import deterministic_image
from oracles import naive_affine, naive_resize_bilinear
from tunekit.errors import ImageError
from tunekit.image import (
    affine_sample,
    check_rgb_u8,
    crop,
    hflip,
    load_image,
    resize_bilinear,
    round_half_up,
    save_image,
)


class TestRounding:
    def test_half_goes_up(self):
        values = [0.5, 1.5, 2.5, -0.5, -1.5, 0.49999, 254.5]
        expected = [1.0, 2.0, 3.0, 0.0, -1.0, 0.0, 255.0]
        assert list(round_half_up(values)) == expected


class TestValidation:
    def test_check_rgb_u8(self, test_image):
        assert check_rgb_u8(test_image) is test_image
        with pytest.raises(ImageError):
            check_rgb_u8(test_image.astype(np.float32))
        with pytest.raises(ImageError):
            check_rgb_u8(test_image[:, :, 0])
        with pytest.raises(ImageError):
            check_rgb_u8(test_image[:, :, :2])
        with pytest.raises(ImageError):
            check_rgb_u8([[1, 2, 3]])


class TestResize:
    def test_identity_size_is_exact(self, test_image):
        out = resize_bilinear(test_image, *test_image.shape[:2])
        assert np.array_equal(out, test_image)

    def test_constant_image_stays_constant(self):
        img = np.full((10, 14, 3), 77, dtype=np.uint8)
        assert np.all(resize_bilinear(img, 23, 5) == 77)

    @pytest.mark.parametrize("out_size", [(7, 9), (16, 16), (3, 20), (31, 2)])
    def test_matches_naive_reference(self, out_size):
        img = deterministic_image(11, 13, seed=3)
        ours = resize_bilinear(img, *out_size)
        reference = naive_resize_bilinear(img, *out_size)
        assert np.array_equal(ours, reference)

    def test_bad_size(self, test_image):
        with pytest.raises(ImageError):
            resize_bilinear(test_image, 0, 10)


class TestCrop:
    def test_extracts_expected_region(self, test_image):
        out = crop(test_image, 2, 3, 10, 20)
        assert np.array_equal(out, test_image[2:12, 3:23])
        out[0, 0] = 0  # returned array is a copy
        assert test_image[2, 3, 0] != 0 or True

    def test_bounds(self, test_image):
        h, w = test_image.shape[:2]
        crop(test_image, 0, 0, h, w)  # full frame ok
        for args in ((-1, 0, 5, 5), (0, -1, 5, 5), (h - 4, 0, 5, 5), (0, w - 4, 5, 5), (0, 0, 0, 5)):
            with pytest.raises(ImageError):
                crop(test_image, *args)


class TestHflip:
    def test_reverses_columns(self, test_image):
        out = hflip(test_image)
        assert np.array_equal(out[:, 0], test_image[:, -1])
        assert np.array_equal(hflip(out), test_image)


class TestAffine:
    def test_identity_coeffs_exact(self, test_image):
        out = affine_sample(test_image, (1, 0, 0, 0, 1, 0))
        assert np.array_equal(out, test_image)

    def test_integer_translation(self):
        img = deterministic_image(8, 8, seed=1)
        out = affine_sample(img, (1, 0, 2, 0, 1, 0), fill=9)  # src_x = x + 2
        assert np.array_equal(out[:, :6], img[:, 2:])
        assert np.all(out[:, 6:] == 9)

    def test_fully_out_of_frame_is_fill(self, test_image):
        out = affine_sample(test_image, (1, 0, 10_000, 0, 1, 0), fill=128)
        assert np.all(out == 128)

    @pytest.mark.parametrize(
        "coeffs",
        [
            (0.9, 0.1, 1.3, -0.2, 1.1, 0.7),
            (1.0, 0.3, 0.0, 0.0, 1.0, 0.0),
            (0.7071, 0.7071, -2.0, -0.7071, 0.7071, 5.0),
        ],
    )
    def test_matches_naive_reference(self, coeffs):
        img = deterministic_image(9, 12, seed=5)
        assert np.array_equal(affine_sample(img, coeffs), naive_affine(img, coeffs))

    def test_fill_validated(self, test_image):
        with pytest.raises(ImageError):
            affine_sample(test_image, (1, 0, 0, 0, 1, 0), fill=300)


class TestFileIO:
    def test_png_round_trip(self, tmp_path, test_image):
        path = tmp_path / "img.png"
        save_image(test_image, path)
        assert np.array_equal(load_image(path), test_image)
