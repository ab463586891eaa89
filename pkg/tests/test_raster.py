from __future__ import annotations

import numpy as np
import pytest

from gradseek.core import SeededRng
from gradseek.raster import (DecodeFailure, EncodeFailure, WorldView,
                             decode_png, encode_png, fill_rect)


def test_round_trip_random_images():
    rng = SeededRng(41)
    for _ in range(5):
        img = rng.integers(0, 256, size=(37, 53, 3)).astype(np.uint8)
        assert np.array_equal(decode_png(encode_png(img)), img)


def test_encoding_is_byte_deterministic():
    img = SeededRng(42).integers(0, 256, size=(64, 64, 3)).astype(np.uint8)
    assert encode_png(img) == encode_png(img.copy())


def test_encode_rejects_bad_shapes():
    with pytest.raises(EncodeFailure):
        encode_png(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(EncodeFailure):
        encode_png(np.zeros((4, 4, 3), dtype=np.float64))


def test_decode_rejects_non_png():
    with pytest.raises(DecodeFailure):
        decode_png(b"definitely not a png")


def test_fill_rect_clips_to_image():
    img = np.zeros((10, 10, 3), dtype=np.uint8)
    fill_rect(img, -5, -5, 3, 3, (255, 0, 0))
    assert img[0, 0, 0] == 255
    assert img[3, 3, 0] == 0  # half-open
    fill_rect(img, 8, 8, 100, 100, (0, 255, 0))
    assert img[9, 9, 1] == 255


def test_world_view_orientation():
    # +y in the world is up on screen (row 0).
    view = WorldView(0.0, 1.0, 0.0, 1.0, 100, 100)
    col, row = view.to_px(0.5, 0.99)
    assert row <= 1
    col, row = view.to_px(0.99, 0.01)
    assert col >= 98 and row >= 98
