"""Tests for palette rendering and alpha overlays."""

import numpy as np
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from relprop.heatmap import (
    ALPHA_FLOOR,
    ColorMapSpec,
    RgbaImage,
    RgbImage,
    default_colormap,
    grayscale_to_rgb,
    overlay_alpha,
    render,
)

BLUE = (0, 0, 255)
GREEN = (0, 255, 0)
YELLOW = (255, 255, 0)
DARK_RED = (139, 0, 0)


def test_anchor_colors_are_exact():
    image = render(np.array([[-1.0, 0.0, 0.5, 1.0]]))
    assert image.pixels[0, 0].tolist() == list(BLUE)
    assert image.pixels[0, 1].tolist() == list(GREEN)
    assert image.pixels[0, 2].tolist() == list(YELLOW)
    assert image.pixels[0, 3].tolist() == list(DARK_RED)


def test_interpolated_colors_match_hand_arithmetic():
    # Midpoints of each palette segment, resolved by hand: channel values are
    # averages of the surrounding anchors, rounded to nearest (ties to even).
    # The map is scaled by 4 with a peak entry of 4.0, so normalization
    # restores the original fractions exactly.
    image = render(np.array([[-0.5, 0.25, 0.75, 1.0]]) * 4.0)
    assert image.pixels[0, 0].tolist() == [0, 128, 128]
    assert image.pixels[0, 1].tolist() == [128, 255, 0]
    assert image.pixels[0, 2].tolist() == [197, 128, 0]
    assert image.pixels[0, 3].tolist() == list(DARK_RED)


def test_render_normalizes_by_peak_magnitude():
    a = render(np.array([[0.2, -0.1], [0.05, 0.0]]))
    b = render(np.array([[1.0, -0.5], [0.25, 0.0]]))
    assert np.array_equal(a.pixels, b.pixels)


def test_render_zero_map_is_all_neutral():
    image = render(np.zeros((3, 4)))
    assert np.array_equal(image.pixels, np.broadcast_to(GREEN, (3, 4, 3)))


def test_render_negative_peak_sets_scale():
    image = render(np.array([[-2.0, 1.0]]))
    assert image.pixels[0, 0].tolist() == list(BLUE)  # -2/2 -> -1
    # +1/2 -> +0.5 -> the yellow anchor
    assert image.pixels[0, 1].tolist() == list(YELLOW)


def test_render_rejects_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        render(np.array([[np.nan, 0.0]]))


def test_render_scale_invariance_for_power_of_two_factors():
    values = np.random.default_rng(5).normal(size=(8, 8))
    base = render(values).pixels
    for factor in (0.5, 2.0, 64.0):
        assert np.array_equal(render(values * factor).pixels, base)


@settings(max_examples=60, deadline=None)
@given(
    arrays(
        np.float64,
        (4, 4),
        elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False),
    ),
    st.sampled_from([0.25, 0.5, 2.0, 8.0, 1024.0]),
)
def test_render_scale_invariance_property(values, factor):
    # Power-of-two factors rescale both numerator and denominator exactly.
    assert np.array_equal(render(values * factor).pixels, render(values).pixels)


def test_colormap_spec_requires_increasing_positions():
    with pytest.raises(ValueError, match="strictly increasing"):
        ColorMapSpec([(0.0, GREEN), (0.0, YELLOW)])
    with pytest.raises(ValueError, match="RGB"):
        ColorMapSpec([(0.0, (1, 2)), (1.0, (3, 4))])


def test_overlay_alpha_values():
    base = RgbImage(np.full((1, 4, 3), 10, dtype=np.uint8))
    overlay = overlay_alpha(base, np.array([[0.0, 0.25, 0.5, 1.0]]))
    assert isinstance(overlay, RgbaImage)
    assert np.array_equal(overlay.pixels[:, :, :3], base.pixels)
    # alpha = floor(clip(|R|/max, 0.1, 1) * 255)
    assert overlay.pixels[0, :, 3].tolist() == [25, 63, 127, 255]


def test_overlay_alpha_zero_map_floors_everywhere():
    base = RgbImage(np.zeros((2, 2, 3), dtype=np.uint8))
    overlay = overlay_alpha(base, np.zeros((2, 2)))
    assert np.all(overlay.pixels[:, :, 3] == int(ALPHA_FLOOR * 255))


def test_overlay_alpha_uses_magnitude():
    base = RgbImage(np.zeros((1, 2, 3), dtype=np.uint8))
    overlay = overlay_alpha(base, np.array([[-3.0, 3.0]]))
    assert overlay.pixels[0, 0, 3] == overlay.pixels[0, 1, 3] == 255


def test_overlay_alpha_rejects_size_mismatch():
    base = RgbImage(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError, match="does not match map"):
        overlay_alpha(base, np.zeros((3, 3)))


def test_grayscale_to_rgb_clips_and_replicates():
    image = grayscale_to_rgb(np.array([[-5.0, 0.0, 127.4, 300.0]]))
    assert image.pixels[0].tolist() == [[0] * 3, [0] * 3, [127] * 3, [255] * 3]


def test_rgb_image_validates_shape_and_dtype():
    with pytest.raises(ValueError, match="uint8"):
        RgbImage(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError, match="RgbaImage"):
        RgbaImage(np.zeros((2, 2, 3), dtype=np.uint8))
    image = RgbImage(np.zeros((2, 3, 3), dtype=np.uint8))
    assert image.height == 2 and image.width == 3


def test_colormap_is_continuous_at_half_lsb_steps():
    # Normalized values 1/1024 apart (half the continuity budget) must never
    # jump more than one count in any channel.
    values = np.linspace(-1.0, 1.0, 2049)[None, :]
    pixels = render(values).pixels.astype(np.int32)
    assert np.abs(np.diff(pixels, axis=1)).max() <= 1
