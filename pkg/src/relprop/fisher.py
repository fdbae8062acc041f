"""Fisher-vector encoding of pooled local descriptors.

For a K-component diagonal GMM over D-dimensional descriptors, each
descriptor l contributes, per component k,

    psi_mu_k(l)    = gamma_k(l) / sqrt(pi_k)   * (l - mu_k) / sigma_k
    psi_sigma_k(l) = gamma_k(l) / sqrt(2 pi_k) * ((l - mu_k)^2 / sigma_k^2 - 1)

and the Fisher vector is the sum of these over all descriptors, laid out as
[psi_mu_0 | psi_sigma_0 | psi_mu_1 | psi_sigma_1 | ...] — see ``fv_index``
for the (component, moment, dimension) -> flat position bijection that the
relevance decomposition relies on.
"""

import numpy as np

from sklearn.base import BaseEstimator, TransformerMixin

from .validation import as_float_array

MOMENT_MEAN = 0
MOMENT_VARIANCE = 1


def fv_index(component, moment, dimension, n_features):
    """Flat Fisher-vector position of one (k, mu-or-sigma, i) statistic."""
    if moment not in (MOMENT_MEAN, MOMENT_VARIANCE):
        raise ValueError(f"moment must be 0 (mean) or 1 (variance), got {moment}")
    if not 0 <= dimension < n_features:
        raise ValueError(f"dimension {dimension} out of range [0, {n_features})")
    return (2 * component + moment) * n_features + dimension


def descriptor_contributions(gmm, descriptors):
    """Per-descriptor Fisher contributions, shape (n, 2*K*D).

    Row l is psi_lambda(descriptor l); summing rows gives the unnormalized
    Fisher vector. Kept as an explicit matrix because the backward
    decomposition needs the individual rows, not just their sum.
    """
    X = as_float_array(descriptors, "descriptors", ndim=2)
    n_samples, n_features = X.shape
    weights = gmm.weights_
    n_components = weights.shape[0]
    if gmm.means_.shape[1] != n_features:
        raise ValueError(
            f"descriptors have dimension {n_features}, GMM expects "
            f"{gmm.means_.shape[1]}"
        )
    posteriors = gmm.predict_proba(X)
    if posteriors.ndim == 1:
        posteriors = posteriors[None]
    sigma = np.sqrt(gmm.variances_)
    out = np.empty((n_samples, 2 * n_components * n_features))
    for k in range(n_components):
        centered = (X - gmm.means_[k]) / sigma[k]
        gamma = posteriors[:, k][:, None]
        mu_block = gamma * centered / np.sqrt(weights[k])
        sigma_block = gamma * (centered * centered - 1.0) / np.sqrt(2.0 * weights[k])
        start = 2 * k * n_features
        out[:, start : start + n_features] = mu_block
        out[:, start + n_features : start + 2 * n_features] = sigma_block
    return out


def encode_fv(gmm, descriptors):
    """Sum-pooled Fisher vector of a nonempty descriptor set."""
    X = as_float_array(descriptors, "descriptors", ndim=2)
    if X.shape[0] == 0:
        raise ValueError("cannot encode an empty descriptor set")
    return descriptor_contributions(gmm, X).sum(axis=0)


def normalize_fv(fv):
    """Improved-FV normalization: signed square root, then global L2.

    Both steps preserve each entry's sign, and the all-zero vector is returned
    unchanged.
    """
    fv = as_float_array(fv, "fv", ndim=1)
    rooted = np.sign(fv) * np.sqrt(np.abs(fv))
    norm = np.linalg.norm(rooted)
    if norm == 0.0:
        return rooted
    return rooted / norm


class FisherVectorEncoder(BaseEstimator, TransformerMixin):
    """Estimator-style facade: descriptors in reduced space -> Fisher vector."""

    def __init__(self, gmm, normalize=True):
        self.gmm = gmm
        self.normalize = normalize

    def fit(self, X=None, y=None):
        return self

    def transform(self, descriptors):
        fv = encode_fv(self.gmm, descriptors)
        return normalize_fv(fv) if self.normalize else fv
