"""PCA dimensionality reduction for descriptor vectors.

Fitted by singular value decomposition of the centered data matrix. The
projection is the plain affine map out = components @ (x - mean); keeping it
this explicit matters because relevance is later pushed back through exactly
this map, term by term.
"""

import numpy as np

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .validation import as_float_array, check_positive_int


class PcaReducer(BaseEstimator, TransformerMixin):
    """Project vectors onto the top principal components of the training set.

    Attributes after ``fit``: ``mean_`` (input dimension,) and ``components_``
    (n_components, input dimension) with orthonormal rows.
    """

    def __init__(self, n_components=80):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = as_float_array(X, "X", ndim=2)
        n_components = check_positive_int(self.n_components, "n_components")
        n_samples, n_features = X.shape
        if n_components > n_features:
            raise ValueError(
                f"n_components={n_components} exceeds input dimension {n_features}"
            )
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, singular, vt = np.linalg.svd(centered, full_matrices=False)
        # Rank via the conventional relative threshold on singular values.
        if singular.size:
            tol = singular[0] * max(n_samples, n_features) * np.finfo(np.float64).eps
            rank = int(np.sum(singular > tol))
        else:
            rank = 0
        if rank < n_components:
            raise ValueError(
                f"data rank {rank} is below the requested {n_components} components"
            )
        components = vt[:n_components]
        # Deterministic sign: make each component's largest-magnitude entry
        # positive so refits of the same data agree exactly.
        flips = np.sign(components[np.arange(n_components),
                                   np.argmax(np.abs(components), axis=1)])
        self.components_ = components * flips[:, None]
        return self

    def _require_fitted(self):
        if not hasattr(self, "components_"):
            raise NotFittedError("PcaReducer must be fitted before use")

    def transform(self, X):
        """Project one vector or a matrix of row vectors."""
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None]
        if X.shape[1] != self.mean_.shape[0]:
            raise ValueError(
                f"input dimension {X.shape[1]} does not match fitted dimension "
                f"{self.mean_.shape[0]}"
            )
        out = (X - self.mean_) @ self.components_.T
        return out[0] if single else out

    def inverse_transform(self, Z):
        self._require_fitted()
        Z = np.asarray(Z, dtype=np.float64)
        return Z @ self.components_ + self.mean_


def fit_pca(vectors, n_components=80):
    """Fit a PcaReducer on an (n, d) matrix of row vectors."""
    return PcaReducer(n_components=n_components).fit(vectors)


def project_pca(pca, vector):
    """Apply a fitted reducer to one vector (or a stack of them)."""
    return pca.transform(vector)
