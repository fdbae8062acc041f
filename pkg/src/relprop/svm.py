"""Linear hinge-loss classifiers trained by seeded subgradient descent.

Pegasos-style updates: at step t the weight vector is shrunk by the
regularization factor (1 - eta_t * lam) with eta_t = 1/(lam * t), and samples
violating the margin add eta_t * y * x. The learning-rate schedule starts at
1/lam, which is far too violent for an unregularized intercept (its first
step would dominate everything after), so the descent runs without one and
the intercept is placed afterwards at the midpoint of the learned margin.
Everything is driven by a single seeded generator, so training is
bit-reproducible.
"""

import numpy as np

from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .validation import as_float_array


class HingeClassifier(BaseEstimator, ClassifierMixin):
    """Binary L2-regularized hinge-loss model; labels must be +/-1.

    Attributes after ``fit``: ``coef_`` (d,) and ``intercept_`` (scalar).
    """

    def __init__(self, lam=1e-4, n_epochs=50, random_state=0):
        self.lam = lam
        self.n_epochs = n_epochs
        self.random_state = random_state

    def fit(self, X, y):
        X = as_float_array(X, "X", ndim=2)
        y = np.asarray(y, dtype=np.float64)
        if set(np.unique(y)) - {-1.0, 1.0}:
            raise ValueError("labels must be -1 or +1")
        if np.unique(y).size < 2:
            raise ValueError("training data contains a single class")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        n_samples, n_features = X.shape
        rng = np.random.default_rng(self.random_state)
        w = np.zeros(n_features)
        t = 0
        for _ in range(self.n_epochs):
            order = rng.permutation(n_samples)
            for i in order:
                t += 1
                eta = 1.0 / (self.lam * t)
                w *= 1.0 - eta * self.lam
                if y[i] * (X[i] @ w) < 1.0:
                    w += eta * y[i] * X[i]
        # Threshold at the middle of the empirical margin, so the intercept
        # stays small relative to the spread of w . x.
        margins = X @ w
        b = -0.5 * (margins[y > 0].min() + margins[y < 0].max())
        self.coef_ = w
        self.intercept_ = float(b)
        return self

    def _require_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("HingeClassifier must be fitted before use")

    def decision_function(self, X):
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1.0, -1.0)


class OneVsRestHinge(BaseEstimator, ClassifierMixin):
    """One independent binary hinge model per class, sharing one seed stream.

    ``classes_`` keeps the lexicographic label order; ``coef_`` stacks the
    per-class weight vectors (n_classes, d) and ``intercept_`` the biases.
    """

    def __init__(self, lam=1e-4, n_epochs=50, random_state=0):
        self.lam = lam
        self.n_epochs = n_epochs
        self.random_state = random_state

    def fit(self, X, y):
        X = as_float_array(X, "X", ndim=2)
        y = np.asarray(y)
        self.classes_ = np.array(sorted(np.unique(y).tolist()))
        if self.classes_.size < 2:
            raise ValueError("need at least two classes")
        coefs = []
        intercepts = []
        for index, label in enumerate(self.classes_):
            binary = np.where(y == label, 1.0, -1.0)
            clf = HingeClassifier(
                lam=self.lam,
                n_epochs=self.n_epochs,
                random_state=self.random_state + index,
            ).fit(X, binary)
            coefs.append(clf.coef_)
            intercepts.append(clf.intercept_)
        self.coef_ = np.stack(coefs)
        self.intercept_ = np.asarray(intercepts)
        return self

    def _require_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("OneVsRestHinge must be fitted before use")

    def decision_function(self, X):
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=-1)]


def train_classifier(fvs, labels, regularization=1e-4, n_epochs=50, random_state=0):
    """Fit a one-vs-rest linear hinge model on encoded Fisher vectors."""
    return OneVsRestHinge(
        lam=regularization, n_epochs=n_epochs, random_state=random_state
    ).fit(fvs, labels)


def predict_score(classifier, fv, class_index=None):
    """Raw decision value(s) for one Fisher vector."""
    scores = classifier.decision_function(np.asarray(fv)[None])[0]
    if class_index is None:
        return scores
    return scores[class_index]
