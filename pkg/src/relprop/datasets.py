"""Synthetic desk-scale datasets for exercising the pipeline end to end.

The two-class quadrant-texture set puts all class information into descriptor
statistics inside one known quadrant: both classes carry a stripe texture in
the top-left quarter of the image (horizontal stripes for one class, vertical
for the other), over a constant background. Because Fisher pooling discards
descriptor positions, the classes must differ in their gradient-orientation
statistics — stripe direction — rather than in where the texture sits; the
shared, known quadrant is what lets tests measure how much relevance lands on
the evidence.
"""

import os

import numpy as np

from .imageio import write_pgm

BACKGROUND = 128
CLASS_NAMES = ("horizontal", "vertical")


def signal_quadrant(size):
    """(y, x, height, width) of the textured quadrant (top-left quarter)."""
    half = size // 2
    return (0, 0, half, half)


def quadrant_texture_image(rng, orientation, size=64, period=4,
                           amplitude_range=(40, 80), noise=4, margin=2):
    """One grayscale image: striped texture in the signal quadrant.

    ``orientation`` is "horizontal" (stripes vary along y, strong vertical
    gradients) or "vertical". Amplitude and additive noise vary per image;
    the stripe phase is deliberately fixed so that, after per-descriptor
    normalization, each class's texture descriptors cluster tightly instead
    of scattering sign-flipped Fisher statistics around the origin. The
    texture is inset ``margin`` pixels from the quadrant edge:
    central-difference gradients reach one pixel beyond a value change, so
    the inset guarantees every nonzero gradient — including the texture /
    background transition — lies strictly inside the quadrant, and every
    descriptor outside it is exactly the zero vector.
    """
    if orientation not in CLASS_NAMES:
        raise ValueError(f"orientation must be one of {CLASS_NAMES}, got {orientation!r}")
    image = np.full((size, size), float(BACKGROUND))
    y0, x0, qh, qw = signal_quadrant(size)
    th, tw = qh - 2 * margin, qw - 2 * margin
    if th < period or tw < period:
        raise ValueError(
            f"quadrant {qh}x{qw} too small for margin {margin} and period {period}"
        )
    amplitude = rng.uniform(*amplitude_range)
    yy, xx = np.mgrid[0:th, 0:tw]
    coord = yy if orientation == "horizontal" else xx
    stripes = np.where((coord // period) % 2 == 0, amplitude, -amplitude)
    block = BACKGROUND + stripes + rng.uniform(-noise, noise, size=(th, tw))
    image[y0 + margin : y0 + margin + th, x0 + margin : x0 + margin + tw] = block
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def make_quadrant_dataset(n_per_class, size=64, seed=0):
    """In-memory dataset: (list of uint8 images, list of class-name labels)."""
    rng = np.random.default_rng(seed)
    images = []
    labels = []
    for orientation in CLASS_NAMES:
        for _ in range(n_per_class):
            images.append(quadrant_texture_image(rng, orientation, size=size))
            labels.append(orientation)
    return images, labels


def write_quadrant_dataset(root, n_per_class, size=64, seed=0):
    """Write the dataset as PGM files in one subdirectory per class."""
    images, labels = make_quadrant_dataset(n_per_class, size=size, seed=seed)
    counters = {name: 0 for name in CLASS_NAMES}
    for image, label in zip(images, labels):
        class_dir = os.path.join(root, label)
        os.makedirs(class_dir, exist_ok=True)
        index = counters[label]
        counters[label] += 1
        write_pgm(image, os.path.join(class_dir, f"{label}_{index:03d}.pgm"))
    return root
