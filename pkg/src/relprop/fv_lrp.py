"""Backward relevance decomposition of the Fisher-vector pipeline.

The chain mirrors the forward stages in reverse: classifier score to FV
dimensions (R3), FV dimensions through the sum-pooling to per-descriptor,
per-dimension relevance in reduced space (R2), optionally back through the
PCA projection to the 128 SIFT dimensions, and finally onto pixels. Two pixel
assignments are offered: ``fine`` splits each descriptor's relevance over its
16 spatial bins (using the bin-to-dimension ownership of SIFT), ``coarse``
spreads each descriptor's total uniformly over its whole receptive field —
the latter is the mapping-influence cut-off placed at the descriptor level.
"""

import numpy as np

from .errors import NumericalInstabilityError
from .fisher import descriptor_contributions
from .rules import stabilized
from .sift import N_ORIENT, descriptor_matrix
from .validation import as_float_array

DEFAULT_EPSILON = 100.0


class DescriptorRelevance:
    """Per-descriptor relevance in reduced space (and optionally SIFT space).

    ``reduced`` is (n_descriptors, D); ``totals`` are its row sums R2_l;
    ``backprojected`` is (n_descriptors, 128) when the fine path computed it.
    """

    def __init__(self, reduced, backprojected=None):
        self.reduced = reduced
        self.backprojected = backprojected

    @property
    def totals(self):
        return self.reduced.sum(axis=1)

    def __len__(self):
        return self.reduced.shape[0]


class PixelRelevance:
    """A 2-D relevance map plus the assignment mode that produced it."""

    def __init__(self, values, mode):
        self.values = np.asarray(values, dtype=np.float64)
        self.mode = mode

    @property
    def shape(self):
        return self.values.shape

    def total(self):
        return float(self.values.sum())


def decompose_classifier(weights, bias, fv):
    """Linear-score relevance: R3_d = w_d * fv_d; the bias share is absorbed.

    The rows sum to the decision value minus the bias.
    """
    weights = as_float_array(weights, "weights", ndim=1)
    fv = as_float_array(fv, "fv", ndim=1, shape=weights.shape)
    del bias  # excluded from redistribution by design
    return weights * fv


def decompose_fv_to_descriptors(gmm, reduced, r3, epsilon=DEFAULT_EPSILON):
    """Push FV-dimension relevance back through the sum-pooling.

    Each pooled statistic S_d = sum_l psi_d(l) redistributes R3_d over the
    descriptors proportionally to psi_d(l) / (S_d + eps * sign(S_d)); the mu
    and sigma shares of reduced dimension i are then combined over all K
    components, yielding an (n_descriptors, D) matrix.
    """
    reduced = as_float_array(reduced, "reduced", ndim=2)
    n_desc, n_features = reduced.shape
    r3 = as_float_array(r3, "r3", ndim=1)
    psi = descriptor_contributions(gmm, reduced)
    if psi.shape[1] != r3.shape[0]:
        raise ValueError(
            f"r3 length {r3.shape[0]} does not match FV length {psi.shape[1]} "
            "for this GMM/descriptor combination"
        )
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    pooled = psi.sum(axis=0)
    denom = stabilized(pooled, epsilon)
    if epsilon == 0.0:
        zero = denom == 0.0
        if zero.any():
            bad = zero & np.any(psi != 0.0, axis=0)
            if bad.any():
                d = int(np.flatnonzero(bad)[0])
                raise NumericalInstabilityError(
                    f"pooled statistic {d} vanished while descriptor "
                    "contributions did not; use a positive epsilon"
                )
            denom = np.where(zero, 1.0, denom)
    shares = (psi / denom) * r3
    # Fold the 2K blocks back onto the D reduced dimensions.
    reduced_rel = shares.reshape(n_desc, -1, n_features).sum(axis=1)
    return DescriptorRelevance(reduced_rel)


def backproject_pca(pca, reduced_relevance, original, epsilon=DEFAULT_EPSILON):
    """Undo the PCA projection for relevance, dimension by dimension.

    The projection out_i = sum_u components[i, u] * (x_u - mean_u) is a linear
    map whose per-connection contributions are known in closed form, so the
    redistribution collapses to

        r128_u = (x_u - mean_u) * sum_i components[i, u] * r80_i / denom_i

    with epsilon-stabilized denominators denom_i built from the projected
    values. Works on one descriptor (1-D inputs) or stacks of them.
    """
    reduced_relevance = np.asarray(reduced_relevance, dtype=np.float64)
    original = np.asarray(original, dtype=np.float64)
    single = reduced_relevance.ndim == 1
    if single:
        reduced_relevance = reduced_relevance[None]
        original = original[None]
    if original.shape[1] != pca.mean_.shape[0]:
        raise ValueError(
            f"descriptor dimension {original.shape[1]} does not match PCA "
            f"input dimension {pca.mean_.shape[0]}"
        )
    if reduced_relevance.shape[1] != pca.components_.shape[0]:
        raise ValueError(
            f"relevance dimension {reduced_relevance.shape[1]} does not match "
            f"PCA output dimension {pca.components_.shape[0]}"
        )
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    centered = original - pca.mean_
    projected = centered @ pca.components_.T
    denom = stabilized(projected, epsilon)
    if epsilon == 0.0:
        zero_rows, zero_cols = np.nonzero(denom == 0.0)
        for row, col in zip(zero_rows, zero_cols):
            if np.any(pca.components_[col] * centered[row] != 0.0):
                raise NumericalInstabilityError(
                    f"projected value {col} of descriptor {row} vanished while "
                    "its contributions did not; use a positive epsilon"
                )
            denom[row, col] = 1.0
    out = centered * ((reduced_relevance / denom) @ pca.components_)
    return out[0] if single else out


def _check_rect(rect, height, width):
    y, x, rh, rw = rect
    if y < 0 or x < 0 or y + rh > height or x + rw > width:
        raise ValueError(
            f"rectangle {rect} falls outside the {height}x{width} image"
        )


def redistribute_bins(rel128, descriptor, target):
    """Fine assignment: each spatial bin's 8 orientation dims spread uniformly.

    ``target`` is the 2-D accumulation map; overlapping descriptors simply
    add. Returns the total amount deposited.
    """
    rel128 = as_float_array(rel128, "rel128", ndim=1)
    height, width = target.shape
    deposited = 0.0
    for b, rect in enumerate(descriptor.bin_rects):
        _check_rect(rect, height, width)
        y, x, rh, rw = rect
        bin_total = rel128[N_ORIENT * b : N_ORIENT * (b + 1)].sum()
        area = rh * rw
        if area == 0:
            if bin_total != 0.0:
                raise ValueError(
                    f"bin {b} of a size-{descriptor.size} descriptor has zero "
                    "area but nonzero relevance"
                )
            continue
        target[y : y + rh, x : x + rw] += bin_total / area
        deposited += bin_total
    return deposited


def redistribute_uniform(total, descriptor, target):
    """Coarse assignment: one flat share over the whole receptive field."""
    height, width = target.shape
    rect = descriptor.field_rect
    _check_rect(rect, height, width)
    y, x, rh, rw = rect
    target[y : y + rh, x : x + rw] += total / (rh * rw)
    return total


def explain_fv(image, model, target_class, mode="fine", epsilon=DEFAULT_EPSILON):
    """Full backward chain from one class score to a pixel relevance map.

    Returns ``(PixelRelevance, diagnostics)`` where the diagnostics dict
    carries per-stage relevance sums and the mass absorbed by the epsilon
    stabilizers at each transition.
    """
    if mode not in ("fine", "coarse"):
        raise ValueError(f"mode must be 'fine' or 'coarse', got {mode!r}")
    image = np.asarray(image, dtype=np.float64)
    target = model.class_index(target_class)
    descriptors, reduced, raw_fv, scored_fv = model.encode(image)
    score = float(model.weights[target] @ scored_fv + model.biases[target])

    r3 = decompose_classifier(model.weights[target], model.biases[target], scored_fv)
    # The pooled sums that actually produced the score live in the raw FV;
    # normalization is sign-preserving and globally scaled, so R3 indexes the
    # same dimensions and the pooling decomposition runs against raw psi sums.
    desc_rel = decompose_fv_to_descriptors(model.gmm, reduced, r3, epsilon=epsilon)

    pixel = np.zeros(image.shape)
    diagnostics = {
        "mode": mode,
        "epsilon": float(epsilon),
        "target_class": model.class_names[target],
        "descriptor_count": len(descriptors),
        "score": score,
        "bias": float(model.biases[target]),
        "r3_sum": float(r3.sum()),
        "r2_sum": float(desc_rel.reduced.sum()),
    }
    if mode == "coarse":
        for descriptor, total in zip(descriptors, desc_rel.totals):
            redistribute_uniform(float(total), descriptor, pixel)
    else:
        originals = descriptor_matrix(descriptors)
        rel128 = backproject_pca(pca=model.pca, reduced_relevance=desc_rel.reduced,
                                 original=originals, epsilon=epsilon)
        desc_rel.backprojected = rel128
        diagnostics["r1_descriptor_sum"] = float(rel128.sum())
        for index, descriptor in enumerate(descriptors):
            redistribute_bins(rel128[index], descriptor, pixel)
    result = PixelRelevance(pixel, mode)
    diagnostics["pixel_sum"] = result.total()
    diagnostics["absorbed_pooling"] = diagnostics["r3_sum"] - diagnostics["r2_sum"]
    if mode == "fine":
        diagnostics["absorbed_pca"] = (
            diagnostics["r2_sum"] - diagnostics["r1_descriptor_sum"]
        )
    return result, diagnostics


def format_diagnostics(diagnostics):
    """Render a diagnostics dict as the line-oriented ``key value`` report."""
    lines = []
    for key, value in diagnostics.items():
        if isinstance(value, float):
            lines.append(f"{key} {value!r}")
        else:
            lines.append(f"{key} {value}")
    return "\n".join(lines) + "\n"
