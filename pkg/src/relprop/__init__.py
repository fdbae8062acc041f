"""Relevance-propagation explanations for two classifier families.

The package pairs a small float64 neural-network engine with a full
Fisher-vector classification pipeline (dense SIFT, PCA, diagonal GMM, FV
encoding, linear hinge classifiers) and decomposes either model's prediction
back onto input pixels layer by layer. A configurable mapping-influence
cut-off switches lower stages from value-proportional redistribution to flat
receptive-field spreading, trading heatmap resolution against fidelity to the
forward mapping; heatmaps render through a diverging blue/green/yellow/red
palette with bit-exact PPM output.
"""

from .datasets import make_quadrant_dataset, signal_quadrant, write_quadrant_dataset
from .errors import FormatError, NumericalInstabilityError
from .fisher import (
    FisherVectorEncoder,
    descriptor_contributions,
    encode_fv,
    fv_index,
    normalize_fv,
)
from .fv_lrp import (
    DescriptorRelevance,
    PixelRelevance,
    backproject_pca,
    decompose_classifier,
    decompose_fv_to_descriptors,
    explain_fv,
    format_diagnostics,
    redistribute_bins,
    redistribute_uniform,
)
from .fvmodel import FvPipelineModel, load_fv_model, save_fv_model
from .gmm import DiagonalGmm, gmm_posterior
from .heatmap import (
    ColorMapSpec,
    RgbaImage,
    RgbImage,
    default_colormap,
    grayscale_to_rgb,
    overlay_alpha,
    render,
)
from .imageio import (
    load_grayscale,
    read_pam_rgba,
    read_pgm,
    read_ppm,
    to_grayscale,
    write_pam_rgba,
    write_pgm,
    write_ppm,
)
from .lrp import CutoffConfig, RelevanceMap, RuleConfig, explain_nn
from .model import (
    ActivationTrace,
    Conv2d,
    Dense,
    MaxPool2d,
    ReLU,
    SequentialModel,
    SumPool2d,
    load_model,
    save_model,
)
from .pca import PcaReducer, fit_pca, project_pca
from .rules import (
    propagate_alphabeta,
    propagate_basic,
    propagate_epsilon,
    propagate_flat,
    propagate_w2,
)
from .serialize import read_relevance_map, write_relevance_map
from .sift import DenseSiftExtractor, LocalDescriptor, descriptor_matrix, extract_dense_sift
from .svm import HingeClassifier, OneVsRestHinge, predict_score, train_classifier

__version__ = "0.1.0"

__all__ = [
    "ActivationTrace",
    "ColorMapSpec",
    "Conv2d",
    "CutoffConfig",
    "Dense",
    "DenseSiftExtractor",
    "DescriptorRelevance",
    "DiagonalGmm",
    "FisherVectorEncoder",
    "FormatError",
    "FvPipelineModel",
    "HingeClassifier",
    "LocalDescriptor",
    "MaxPool2d",
    "NumericalInstabilityError",
    "OneVsRestHinge",
    "PcaReducer",
    "PixelRelevance",
    "ReLU",
    "RelevanceMap",
    "RgbImage",
    "RgbaImage",
    "RuleConfig",
    "SequentialModel",
    "SumPool2d",
    "backproject_pca",
    "decompose_classifier",
    "decompose_fv_to_descriptors",
    "default_colormap",
    "descriptor_contributions",
    "descriptor_matrix",
    "encode_fv",
    "explain_fv",
    "explain_nn",
    "extract_dense_sift",
    "fit_pca",
    "format_diagnostics",
    "fv_index",
    "gmm_posterior",
    "grayscale_to_rgb",
    "load_fv_model",
    "load_grayscale",
    "load_model",
    "make_quadrant_dataset",
    "normalize_fv",
    "overlay_alpha",
    "predict_score",
    "project_pca",
    "propagate_alphabeta",
    "propagate_basic",
    "propagate_epsilon",
    "propagate_flat",
    "propagate_w2",
    "read_pam_rgba",
    "read_pgm",
    "read_ppm",
    "read_relevance_map",
    "redistribute_bins",
    "redistribute_uniform",
    "render",
    "save_fv_model",
    "save_model",
    "signal_quadrant",
    "to_grayscale",
    "train_classifier",
    "write_pam_rgba",
    "write_pgm",
    "write_ppm",
    "write_quadrant_dataset",
    "write_relevance_map",
]
