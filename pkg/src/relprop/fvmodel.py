"""The full Fisher-vector classification pipeline as one loadable artifact.

Bundles the extraction geometry, fitted PCA, fitted GMM, the normalization
flag and the per-class linear classifiers, with text-file persistence that
round-trips every float exactly (same container format as network models,
header ``RELPROP-FVMODEL v1``).
"""

import numpy as np

from sklearn.exceptions import NotFittedError

from .errors import FormatError
from .fisher import encode_fv, normalize_fv
from .gmm import DiagonalGmm
from .pca import PcaReducer
from .serialize import BlockWriter, LineReader, write_text_atomic
from .sift import descriptor_matrix, extract_dense_sift


class FvPipelineModel:
    """Extraction config + PCA + GMM + normalization + linear classifiers."""

    def __init__(self, sizes, stride, pca, gmm, normalize, class_names, weights, biases):
        self.sizes = tuple(int(s) for s in sizes)
        self.stride = int(stride)
        self.pca = pca
        self.gmm = gmm
        self.normalize = bool(normalize)
        self.class_names = list(class_names)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.biases = np.asarray(biases, dtype=np.float64)
        expected = 2 * gmm.weights_.shape[0] * gmm.means_.shape[1]
        if self.weights.shape != (len(self.class_names), expected):
            raise ValueError(
                f"classifier weights shape {self.weights.shape} does not match "
                f"{len(self.class_names)} classes x FV length {expected}"
            )
        if self.biases.shape != (len(self.class_names),):
            raise ValueError("one bias per class required")

    @property
    def n_classes(self):
        return len(self.class_names)

    def class_index(self, label):
        """Accept a class name or a numeric index string/int."""
        if isinstance(label, (int, np.integer)):
            index = int(label)
        elif label in self.class_names:
            return self.class_names.index(label)
        else:
            try:
                index = int(label)
            except (TypeError, ValueError):
                raise ValueError(
                    f"unknown class {label!r}; known: {', '.join(self.class_names)}"
                ) from None
        if not 0 <= index < self.n_classes:
            raise ValueError(
                f"class index {index} out of range for {self.n_classes} classes"
            )
        return index

    def extract(self, image):
        return extract_dense_sift(image, sizes=self.sizes, stride=self.stride)

    def encode(self, image):
        """Image -> (descriptors, reduced matrix, raw FV, scored FV)."""
        descriptors = self.extract(image)
        if not descriptors:
            raise ValueError(
                f"image produced no descriptors for sizes {self.sizes}"
            )
        reduced = self.pca.transform(descriptor_matrix(descriptors))
        raw_fv = encode_fv(self.gmm, reduced)
        scored_fv = normalize_fv(raw_fv) if self.normalize else raw_fv
        return descriptors, reduced, raw_fv, scored_fv

    def predict_scores(self, image):
        """Per-class decision values for one grayscale image."""
        _, _, _, fv = self.encode(image)
        return self.weights @ fv + self.biases


def save_fv_model(model, path):
    writer = BlockWriter("RELPROP-FVMODEL v1")
    writer.line("sizes", *model.sizes)
    writer.line("stride", model.stride)
    writer.line("normalize", int(model.normalize))
    writer.array("pca_mean", model.pca.mean_)
    writer.array("pca_components", model.pca.components_)
    writer.array("gmm_weights", model.gmm.weights_)
    writer.array("gmm_means", model.gmm.means_)
    writer.array("gmm_variances", model.gmm.variances_)
    writer.line("classes", model.n_classes)
    for name in model.class_names:
        writer.line("class", name)
    writer.array("svm_weights", model.weights)
    writer.array("svm_bias", model.biases)
    write_text_atomic(path, writer.text())


def load_fv_model(path):
    with open(path, "rb") as fh:
        reader = LineReader(fh.read())
    reader.expect("RELPROP-FVMODEL v1", context="file header")
    sizes, _ = reader.read_keyword("sizes")
    try:
        sizes = [int(s) for s in sizes]
    except ValueError as exc:
        raise FormatError("bad integer in 'sizes' line") from exc
    (stride,) = reader.read_ints("stride", count=1)
    (normalize,) = reader.read_ints("normalize", count=1)
    pca_mean = reader.read_array("pca_mean")
    pca_components = reader.read_array("pca_components")
    gmm_weights = reader.read_array("gmm_weights")
    gmm_means = reader.read_array("gmm_means")
    gmm_variances = reader.read_array("gmm_variances")
    if pca_components.ndim != 2 or pca_mean.ndim != 1:
        raise FormatError("PCA blocks must be a matrix and a vector")
    if pca_components.shape[1] != pca_mean.shape[0]:
        raise FormatError(
            f"pca_components width {pca_components.shape[1]} does not match "
            f"pca_mean length {pca_mean.shape[0]}"
        )
    if gmm_means.shape != gmm_variances.shape or gmm_means.ndim != 2:
        raise FormatError("gmm_means and gmm_variances must be equal-shape matrices")
    if gmm_weights.shape != (gmm_means.shape[0],):
        raise FormatError("one gmm weight per component required")

    pca = PcaReducer(n_components=pca_components.shape[0])
    pca.mean_ = pca_mean
    pca.components_ = pca_components
    gmm = DiagonalGmm(n_components=gmm_means.shape[0])
    gmm.weights_ = gmm_weights
    gmm.means_ = gmm_means
    gmm.variances_ = gmm_variances

    (n_classes,) = reader.read_ints("classes", count=1)
    names = []
    for _ in range(n_classes):
        tokens, offset = reader.read_keyword("class")
        if not tokens:
            raise FormatError("empty class name", offset)
        names.append(" ".join(tokens))
    svm_weights = reader.read_array("svm_weights")
    svm_bias = reader.read_array("svm_bias")
    return FvPipelineModel(
        sizes=sizes,
        stride=stride,
        pca=pca,
        gmm=gmm,
        normalize=bool(normalize),
        class_names=names,
        weights=svm_weights,
        biases=svm_bias,
    )


def require_fitted_pipeline(model):
    """Raise if any stage of a pipeline model lacks fitted parameters."""
    for stage, attr in ((model.pca, "components_"), (model.gmm, "weights_")):
        if not hasattr(stage, attr):
            raise NotFittedError(f"{type(stage).__name__} is not fitted")
