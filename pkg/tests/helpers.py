"""Shared builders and slow reference implementations for the test suite.

The reference functions here are deliberately written with explicit loops and
none of the vectorized shortcuts used by the package, so agreement between
the two is meaningful.
"""

import numpy as np

from relprop.gmm import DiagonalGmm
from relprop.model import Conv2d, Dense, ReLU, SequentialModel, SumPool2d
from relprop.pca import PcaReducer


def make_gmm(weights, means, variances):
    """A DiagonalGmm with parameters set directly (no fitting)."""
    weights = np.asarray(weights, dtype=np.float64)
    gmm = DiagonalGmm(n_components=weights.shape[0])
    gmm.weights_ = weights
    gmm.means_ = np.asarray(means, dtype=np.float64)
    gmm.variances_ = np.asarray(variances, dtype=np.float64)
    return gmm


def make_pca(components, mean):
    """A PcaReducer with parameters set directly (no fitting)."""
    components = np.asarray(components, dtype=np.float64)
    pca = PcaReducer(n_components=components.shape[0])
    pca.components_ = components
    pca.mean_ = np.asarray(mean, dtype=np.float64)
    return pca


def random_orthonormal_rows(n_rows, n_cols, rng):
    """(n_rows, n_cols) matrix with orthonormal rows, from a seeded QR."""
    q, _ = np.linalg.qr(rng.normal(size=(n_cols, n_rows)))
    return q.T[:n_rows]


# -- random bias-free positive models ------------------------------------

_TEMPLATES = (
    ("conv", "dense"),
    ("conv", "relu", "dense"),
    ("conv", "sumpool", "dense"),
    ("sumpool", "conv", "dense"),
    ("sumpool", "dense"),
    ("dense", "relu", "dense"),
    ("conv", "conv", "dense"),
    ("dense", "dense"),
    ("conv", "relu", "sumpool", "dense"),
    ("conv", "sumpool", "relu", "dense"),
)


def random_positive_model(rng, n_scores=3):
    """A 2-4 layer bias-free model with strictly positive weights.

    Together with strictly positive inputs this guarantees every
    redistribution denominator is nonzero, so the basic rule applies cleanly.
    Input shape is always (1, 6, 6).
    """
    template = _TEMPLATES[rng.integers(len(_TEMPLATES))]
    layers = []
    shape = (1, 6, 6)
    for kind in template:
        if kind == "conv":
            c_in, h, w = shape
            c_out = int(rng.integers(1, 4))
            k = int(rng.integers(2, 4))
            stride = int(rng.integers(1, 3))
            kernel = rng.uniform(0.2, 1.0, size=(c_out, c_in, k, k))
            layers.append(Conv2d(kernel, stride=stride))
            out_h = (h - k) // stride + 1
            out_w = (w - k) // stride + 1
            shape = (c_out, out_h, out_w)
        elif kind == "sumpool":
            c, h, w = shape
            layers.append(SumPool2d(2, stride=2))
            shape = (c, h // 2, w // 2)
        elif kind == "relu":
            layers.append(ReLU())
        else:
            n_in = int(np.prod(shape))
            n_out = n_scores if kind == template[-1] else int(rng.integers(3, 7))
            layers.append(Dense(rng.uniform(0.2, 1.0, size=(n_in, n_out))))
            shape = (n_out,)
    return SequentialModel(layers, (1, 6, 6))


def positive_input(rng, shape=(1, 6, 6)):
    return rng.uniform(0.1, 1.0, size=shape)


# -- slow reference implementations --------------------------------------

def conv_contribution_matrix(kernel, x, stride, padding):
    """Dense z matrix of a convolution: (flat inputs, flat outputs).

    Built with nothing but index loops; padded positions contribute zero and
    have no input index, matching a bias-free forward pass where
    z_j = sum_i z_ij.
    """
    c_out, c_in, kh, kw = kernel.shape
    _, h, w = x.shape
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (w + 2 * padding - kw) // stride + 1
    n_in = c_in * h * w
    n_out = c_out * out_h * out_w
    z = np.zeros((n_in, n_out))
    for oc in range(c_out):
        for oh in range(out_h):
            for ow in range(out_w):
                j = (oc * out_h + oh) * out_w + ow
                for ic in range(c_in):
                    for dy in range(kh):
                        for dx in range(kw):
                            y = oh * stride - padding + dy
                            xx = ow * stride - padding + dx
                            if 0 <= y < h and 0 <= xx < w:
                                i = (ic * h + y) * w + xx
                                z[i, j] = kernel[oc, ic, dy, dx] * x[ic, y, xx]
    return z


def basic_rule_reference(z, relevance):
    """R_i = sum_j z_ij / (sum_i z_ij) * R_j, written as loops."""
    n_in, n_out = z.shape
    out = np.zeros(n_in)
    for j in range(n_out):
        total = z[:, j].sum()
        if total == 0.0:
            continue
        for i in range(n_in):
            out[i] += z[i, j] / total * relevance[j]
    return out
