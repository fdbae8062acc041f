"""Relevance maps to color images.

The diverging palette anchors normalized relevance at four points: -1 is
blue, 0 is green (neutral), +0.5 yellow and +1 dark red, with linear
interpolation in between. Maps are normalized per image by the maximum
absolute relevance, so rendering is invariant to positive rescaling of the
map. The overlay variant keeps the base image's colors and writes |relevance|
into the alpha channel with a visibility floor.
"""

import numpy as np

from .validation import check_finite_map


class RgbImage:
    """8-bit RGB raster stored as an (H, W, 3) uint8 array."""

    def __init__(self, pixels):
        pixels = np.asarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
            raise ValueError(
                f"RgbImage needs an (H, W, 3) uint8 array, got {pixels.shape} "
                f"{pixels.dtype}"
            )
        self.pixels = pixels

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, RgbImage) and np.array_equal(self.pixels, other.pixels)


class RgbaImage:
    """8-bit RGBA raster stored as an (H, W, 4) uint8 array."""

    def __init__(self, pixels):
        pixels = np.asarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 4 or pixels.dtype != np.uint8:
            raise ValueError(
                f"RgbaImage needs an (H, W, 4) uint8 array, got {pixels.shape} "
                f"{pixels.dtype}"
            )
        self.pixels = pixels

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


class ColorMapSpec:
    """Piecewise-linear palette over normalized relevance in [-1, 1]."""

    def __init__(self, anchors):
        positions = [p for p, _ in anchors]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ValueError("colormap anchor positions must be strictly increasing")
        self.positions = np.asarray(positions, dtype=np.float64)
        self.colors = np.asarray([c for _, c in anchors], dtype=np.float64)
        if self.colors.shape[1] != 3:
            raise ValueError("anchors must carry RGB triplets")


def default_colormap():
    return ColorMapSpec(
        [
            (-1.0, (0, 0, 255)),
            (0.0, (0, 255, 0)),
            (0.5, (255, 255, 0)),
            (1.0, (139, 0, 0)),
        ]
    )


def _map_values(map2d):
    values = np.asarray(map2d, dtype=np.float64)
    if hasattr(map2d, "values"):
        values = np.asarray(map2d.values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"relevance map must be 2-D, got shape {values.shape}")
    return values


def render(map2d, spec=None):
    """Color-render one relevance map.

    The map is divided by its maximum absolute value (an all-zero map sits at
    the neutral anchor everywhere) and pushed through the palette; channel
    values round to nearest.
    """
    values = _map_values(map2d)
    check_finite_map(values)
    spec = spec if spec is not None else default_colormap()
    peak = np.abs(values).max()
    norm = values / peak if peak > 0.0 else np.zeros_like(values)
    flat = norm.ravel()
    channels = [
        np.interp(flat, spec.positions, spec.colors[:, c]) for c in range(3)
    ]
    pixels = np.rint(np.stack(channels, axis=-1)).astype(np.uint8)
    return RgbImage(pixels.reshape(values.shape + (3,)))


ALPHA_FLOOR = 0.1


def overlay_alpha(base, map2d):
    """Attach |relevance| as an alpha channel to a base image.

    Alpha is clamp(|R| / max|R|, 0.1, 1) scaled to bytes (truncating), so
    even irrelevant regions keep a faint presence; an all-zero map gives the
    uniform floor alpha 25. RGB bytes pass through untouched.
    """
    values = _map_values(map2d)
    check_finite_map(values)
    if (base.height, base.width) != values.shape:
        raise ValueError(
            f"base image {base.height}x{base.width} does not match map "
            f"{values.shape[0]}x{values.shape[1]}"
        )
    peak = np.abs(values).max()
    strength = np.abs(values) / peak if peak > 0.0 else np.zeros_like(values)
    alpha = np.floor(np.clip(strength, ALPHA_FLOOR, 1.0) * 255.0).astype(np.uint8)
    pixels = np.concatenate([base.pixels, alpha[:, :, None]], axis=2)
    return RgbaImage(pixels)


def grayscale_to_rgb(image):
    """Clip a float grayscale array to bytes and replicate into RGB."""
    gray = np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 255.0))
    gray = gray.astype(np.uint8)
    return RgbImage(np.repeat(gray[:, :, None], 3, axis=2))
