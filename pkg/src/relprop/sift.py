"""Dense upright SIFT descriptors with explicit receptive-field geometry.

Descriptors are sampled on a regular grid at one or more side lengths. Each
covers a size x size pixel patch split into a 4x4 grid of spatial bins; every
bin accumulates an 8-direction histogram of gradient magnitudes with bilinear
orientation binning, giving the usual 128 dimensions (bin b owns dimensions
[8b, 8b+8)). There is no rotation normalization and no Gaussian weighting:
the point of keeping the geometry this literal is that relevance assigned to
descriptor dimensions can be mapped back onto exact pixel rectangles.
"""

import warnings

import numpy as np

from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_grayscale_image, check_positive_int

N_SPATIAL = 4
N_ORIENT = 8
DESCRIPTOR_DIM = N_SPATIAL * N_SPATIAL * N_ORIENT


class LocalDescriptor:
    """A 128-vector plus the exact pixel geometry it was computed from.

    ``bin_rects`` holds 16 rectangles (y, x, height, width) in image
    coordinates, ordered row-major over the 4x4 spatial grid; they tile the
    size x size receptive field exactly even when size is not divisible by 4.
    """

    __slots__ = ("vector", "center", "size", "origin", "bin_rects")

    def __init__(self, vector, center, size, origin, bin_rects):
        self.vector = vector
        self.center = center
        self.size = size
        self.origin = origin
        self.bin_rects = bin_rects

    @property
    def field_rect(self):
        """(y, x, height, width) of the full receptive field."""
        return (self.origin[0], self.origin[1], self.size, self.size)

    def __repr__(self):
        return (
            f"LocalDescriptor(center={self.center}, size={self.size}, "
            f"norm={np.linalg.norm(self.vector):.4f})"
        )


def spatial_bin_edges(size):
    """Integer cut points 0 = e_0 < ... < e_4 = size along one patch axis."""
    return [(q * size) // N_SPATIAL for q in range(N_SPATIAL + 1)]


def bin_rectangles(y0, x0, size):
    """The 16 bin rectangles of a patch anchored at (y0, x0), row-major."""
    edges = spatial_bin_edges(size)
    rects = []
    for by in range(N_SPATIAL):
        for bx in range(N_SPATIAL):
            rects.append(
                (
                    y0 + edges[by],
                    x0 + edges[bx],
                    edges[by + 1] - edges[by],
                    edges[bx + 1] - edges[bx],
                )
            )
    return rects


def image_gradients(image):
    """Per-pixel gradient magnitude and orientation in [0, 2*pi)."""
    gy, gx = np.gradient(image)
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    return magnitude, angle


def extract_dense_sift(image, sizes=(16, 24, 32), stride=8):
    """Grid-sampled upright SIFT descriptors for one grayscale image.

    Sizes larger than the image are skipped with a warning rather than
    failing, so a too-small image yields an empty list. Descriptors are
    ordered by size (as given), then by grid position row-major, which fixes
    the summation order everywhere downstream.
    """
    image = check_grayscale_image(image)
    stride = check_positive_int(stride, "stride")
    height, width = image.shape
    magnitude, angle = image_gradients(image)

    # Bilinear split of each pixel's magnitude between its two nearest
    # orientation bins, shared by all descriptors.
    position = angle * (N_ORIENT / (2.0 * np.pi))
    lower = np.floor(position)
    frac = position - lower
    lower = lower.astype(np.int64) % N_ORIENT
    upper = (lower + 1) % N_ORIENT
    weight_lower = magnitude * (1.0 - frac)
    weight_upper = magnitude * frac

    descriptors = []
    for size in sizes:
        size = check_positive_int(size, "descriptor size")
        if size > height or size > width:
            warnings.warn(
                f"descriptor size {size} exceeds image {height}x{width}; skipped",
                stacklevel=2,
            )
            continue
        for y0 in range(0, height - size + 1, stride):
            for x0 in range(0, width - size + 1, stride):
                rects = bin_rectangles(y0, x0, size)
                vector = np.zeros(DESCRIPTOR_DIM)
                for b, (ry, rx, rh, rw) in enumerate(rects):
                    if rh == 0 or rw == 0:
                        continue
                    window = np.s_[ry : ry + rh, rx : rx + rw]
                    hist = np.zeros(N_ORIENT)
                    np.add.at(hist, lower[window].ravel(), weight_lower[window].ravel())
                    np.add.at(hist, upper[window].ravel(), weight_upper[window].ravel())
                    vector[N_ORIENT * b : N_ORIENT * (b + 1)] = hist
                norm = np.linalg.norm(vector)
                if norm > 0.0:
                    vector /= norm
                descriptors.append(
                    LocalDescriptor(
                        vector=vector,
                        center=(y0 + size / 2.0, x0 + size / 2.0),
                        size=size,
                        origin=(y0, x0),
                        bin_rects=rects,
                    )
                )
    return descriptors


def descriptor_matrix(descriptors):
    """Stack descriptor vectors into an (n, 128) matrix."""
    if not descriptors:
        return np.zeros((0, DESCRIPTOR_DIM))
    return np.stack([d.vector for d in descriptors])


class DenseSiftExtractor(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper around ``extract_dense_sift``.

    Stateless; ``fit`` exists only so the extractor composes with the usual
    fit/transform idiom. ``transform`` maps one image to its descriptor list.
    """

    def __init__(self, sizes=(16, 24, 32), stride=8):
        self.sizes = sizes
        self.stride = stride

    def fit(self, X=None, y=None):
        return self

    def transform(self, image):
        return extract_dense_sift(image, sizes=self.sizes, stride=self.stride)
