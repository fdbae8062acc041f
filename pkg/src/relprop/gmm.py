"""Diagonal-covariance Gaussian mixtures fitted by expectation-maximization.

The implementation is deliberately small and deterministic: seeded k-means
initialization, log-domain responsibilities, per-dimension variances with a
floor tied to the data scale, and a relative log-likelihood stopping rule.
The fitted parameters (weights, means, variances) are exactly the ones the
Fisher-vector encoding differentiates against, so they are kept as plain
arrays.
"""

import logging

import numpy as np

from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .validation import as_float_array, check_positive_int

logger = logging.getLogger("relprop.gmm")

LOG_2PI = np.log(2.0 * np.pi)


class DiagonalGmm(BaseEstimator):
    """Mixture of axis-aligned Gaussians.

    Attributes after ``fit``: ``weights_`` (K,) summing to one, ``means_``
    (K, D), ``variances_`` (K, D) floored at ``variance_floor_frac`` times the
    mean per-dimension data variance, and ``log_likelihood_path_`` with one
    entry per EM iteration (nondecreasing).
    """

    def __init__(
        self,
        n_components=8,
        random_state=0,
        max_iter=200,
        tol=1e-6,
        variance_floor_frac=1e-4,
        kmeans_iter=20,
    ):
        self.n_components = n_components
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol
        self.variance_floor_frac = variance_floor_frac
        self.kmeans_iter = kmeans_iter

    # -- fitting ---------------------------------------------------------

    def fit(self, X, y=None):
        X = as_float_array(X, "X", ndim=2)
        n_components = check_positive_int(self.n_components, "n_components")
        n_samples, n_features = X.shape
        if n_samples < 10 * n_components:
            raise ValueError(
                f"need at least {10 * n_components} samples to fit "
                f"{n_components} components, got {n_samples}"
            )
        data_variance = X.var(axis=0).mean()
        if data_variance == 0.0:
            raise ValueError("data has zero variance; a mixture fit is degenerate")
        self._floor = self.variance_floor_frac * data_variance
        rng = np.random.default_rng(self.random_state)

        means = self._kmeans_init(X, n_components, rng)
        assign = self._nearest(X, means)
        weights = np.bincount(assign, minlength=n_components) / n_samples
        variances = np.empty((n_components, n_features))
        for k in range(n_components):
            members = X[assign == k]
            variances[k] = members.var(axis=0) if len(members) else data_variance
        variances = np.maximum(variances, self._floor)
        weights = np.maximum(weights, 1.0 / (10.0 * n_samples))
        weights /= weights.sum()

        path = []
        previous = None
        for iteration in range(self.max_iter):
            log_joint = _log_joint(X, weights, means, variances)
            log_norm = logsumexp(log_joint, axis=1)
            log_likelihood = float(log_norm.sum())
            path.append(log_likelihood)
            resp = np.exp(log_joint - log_norm[:, None])

            counts = resp.sum(axis=0)
            starving = counts < 1e-10
            if starving.any():
                # A component lost all responsibility; reseed it at the point
                # farthest from its nearest center and restart the E-step.
                means = means.copy()
                for k in np.flatnonzero(starving):
                    means[k] = self._farthest_point(X, means)
                    variances[k] = np.maximum(X.var(axis=0), self._floor)
                weights = np.full(n_components, 1.0 / n_components)
                logger.info("reseeded %d starving component(s)", starving.sum())
                continue

            weights = counts / n_samples
            means = (resp.T @ X) / counts[:, None]
            second = (resp.T @ (X * X)) / counts[:, None]
            variances = np.maximum(second - means * means, self._floor)

            if previous is not None:
                improvement = (log_likelihood - previous) / abs(previous)
                if improvement < self.tol:
                    break
            previous = log_likelihood

        self.weights_ = weights
        self.means_ = means
        self.variances_ = variances
        self.log_likelihood_path_ = np.asarray(path)
        return self

    def _kmeans_init(self, X, n_components, rng):
        n_samples = len(X)
        centers = X[rng.choice(n_samples, size=n_components, replace=False)].copy()
        for _ in range(self.kmeans_iter):
            assign = self._nearest(X, centers)
            counts = np.bincount(assign, minlength=n_components)
            for attempt in range(4):
                empty = np.flatnonzero(counts == 0)
                if empty.size == 0:
                    break
                if attempt == 3:
                    raise ValueError(
                        f"{empty.size} component(s) stayed empty after 3 reseeds"
                    )
                for k in empty:
                    centers[k] = self._farthest_point(X, centers)
                assign = self._nearest(X, centers)
                counts = np.bincount(assign, minlength=n_components)
            updated = np.stack(
                [X[assign == k].mean(axis=0) for k in range(n_components)]
            )
            if np.array_equal(updated, centers):
                break
            centers = updated
        return centers

    @staticmethod
    def _nearest(X, centers):
        distances = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
        return distances.argmin(axis=1)

    @staticmethod
    def _farthest_point(X, centers):
        distances = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
        return X[distances.min(axis=1).argmax()].copy()

    # -- inference -------------------------------------------------------

    def _require_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("DiagonalGmm must be fitted before use")

    def predict_proba(self, X):
        """Posterior component probabilities, one row per sample."""
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None]
        log_joint = _log_joint(X, self.weights_, self.means_, self.variances_)
        post = np.exp(log_joint - logsumexp(log_joint, axis=1)[:, None])
        return post[0] if single else post

    def score_samples(self, X):
        """Per-sample log-likelihood under the mixture."""
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        log_joint = _log_joint(X, self.weights_, self.means_, self.variances_)
        return logsumexp(log_joint, axis=1)


def _log_joint(X, weights, means, variances):
    """log(pi_k) + log N(x | mu_k, diag sigma_k^2) for every sample/component."""
    n_features = X.shape[1]
    log_det = np.log(variances).sum(axis=1)
    mahalanobis = (
        ((X[:, None, :] - means[None]) ** 2) / variances[None]
    ).sum(axis=2)
    log_pdf = -0.5 * (n_features * LOG_2PI + log_det[None] + mahalanobis)
    return np.log(weights)[None] + log_pdf


def gmm_posterior(gmm, vector):
    """Soft assignment of one descriptor to each mixture component."""
    return gmm.predict_proba(vector)
