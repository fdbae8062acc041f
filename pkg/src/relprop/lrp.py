"""Layer-by-layer relevance propagation through sequential models.

The backward pass starts from a one-hot vector holding the target class score
and applies one redistribution rule per layer, walking the activation trace in
reverse. A cut-off layer index may be set: every layer strictly below it
redistributes flatly over receptive fields, discarding the forward mapping, so
the heatmap resolution is governed by field geometry alone below that point.
"""

import numpy as np

from . import rules as _rules
from .errors import NumericalInstabilityError
from .model import Conv2d, Dense, MaxPool2d, ReLU, SumPool2d
from .rules import RULE_NAMES, check_alpha_beta, stabilized


class RuleConfig:
    """Which redistribution rule to apply, plus its parameters.

    Defaults to the alpha/beta rule with alpha=2, beta=1, the standard choice
    for explaining networks whose activations can carry both signs. epsilon is
    only consulted by the epsilon rule.
    """

    def __init__(self, rule="alphabeta", epsilon=100.0, alpha=2.0, beta=1.0):
        self.rule = rule
        self.epsilon = epsilon
        self.alpha = alpha
        self.beta = beta

    def validate(self):
        if self.rule not in RULE_NAMES:
            raise ValueError(
                f"unknown rule {self.rule!r}; expected one of {', '.join(RULE_NAMES)}"
            )
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.rule == "alphabeta":
            check_alpha_beta(self.alpha, self.beta)
        return self

    def __repr__(self):
        return (
            f"RuleConfig(rule={self.rule!r}, epsilon={self.epsilon!r}, "
            f"alpha={self.alpha!r}, beta={self.beta!r})"
        )


class CutoffConfig:
    """Optional layer index below which propagation switches to flat fields."""

    def __init__(self, cutoff_layer=None):
        self.cutoff_layer = cutoff_layer

    def validate(self, n_layers):
        if self.cutoff_layer is None:
            return self
        k = self.cutoff_layer
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
            raise ValueError(f"cutoff_layer must be an integer, got {k!r}")
        if not 0 <= k < n_layers:
            raise ValueError(
                f"cutoff_layer {k} out of range for a {n_layers}-layer model"
            )
        return self

    def __repr__(self):
        return f"CutoffConfig(cutoff_layer={self.cutoff_layer!r})"


class RelevanceMap:
    """Relevance tensors for every layer boundary of one explanation.

    ``relevances[l]`` is the relevance at the *input* of layer l, so index 0
    aligns with the model input; the final entry is the one-hot relevance at
    the score vector.
    """

    def __init__(self, relevances):
        self.relevances = relevances

    @property
    def input_relevance(self):
        return self.relevances[0]

    @property
    def pixel_map(self):
        """Input relevance as a 2-D map, channels summed away."""
        bottom = self.relevances[0]
        if bottom.ndim == 3:
            return bottom.sum(axis=0)
        if bottom.ndim == 2:
            return bottom
        return bottom.reshape(1, -1)

    def layer_sums(self):
        """Total relevance at each layer boundary, bottom to top."""
        return [float(np.sum(r)) for r in self.relevances]


def _guard_window(contribs_flat, totals, what):
    """Windowed version of the zero-denominator contract."""
    zero = totals == 0.0
    if zero.any():
        bad = zero & np.any(contribs_flat != 0.0, axis=1)
        if bad.any():
            raise NumericalInstabilityError(
                f"{what} vanished while contributions did not; "
                "use the epsilon rule to stabilize the denominator"
            )
        totals = np.where(zero, 1.0, totals)
    return totals


def _affine_denominators(contribs_flat, bias, rule_name, config, what):
    totals = contribs_flat.sum(axis=1) + bias
    if rule_name == "basic":
        return _guard_window(contribs_flat, totals, what)
    denom = stabilized(totals, config.epsilon)
    if config.epsilon == 0.0:
        denom = _guard_window(contribs_flat, denom, what)
    return denom


def _dense_backward(layer, record, upper, rule_name, config):
    x = np.asarray(record.input, dtype=np.float64).ravel()
    weights = layer.weights
    if rule_name == "flat":
        full = np.arange(layer.n_in)
        lower = _rules.propagate_flat([full] * layer.n_out, upper, layer.n_in)
    elif rule_name == "w2":
        lower = _rules.propagate_w2(weights, upper)
    elif rule_name == "alphabeta":
        contribs = x[:, None] * weights
        totals_pos = np.maximum(contribs, 0.0).sum(axis=0) + np.maximum(layer.bias, 0.0)
        totals_neg = np.minimum(contribs, 0.0).sum(axis=0) + np.minimum(layer.bias, 0.0)
        lower = _rules.propagate_alphabeta(
            contribs, totals_pos, totals_neg, upper, config.alpha, config.beta
        )
    else:
        contribs = x[:, None] * weights
        totals = contribs.sum(axis=0) + layer.bias
        if rule_name == "basic":
            lower = _rules.propagate_basic(contribs, totals, upper)
        else:
            lower = _rules.propagate_epsilon(contribs, totals, upper, config.epsilon)
    return lower.reshape(record.input.shape)


def _conv_backward(layer, record, upper, rule_name, config):
    x = np.asarray(record.input, dtype=np.float64)
    kernel = layer.kernel
    c_out, c_in, kh, kw = kernel.shape
    stride, pad = layer.stride, layer.padding
    _, height, width = x.shape
    out_h, out_w = upper.shape[1], upper.shape[2]
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    lower = np.zeros_like(padded)
    in_bounds = np.zeros(padded.shape[1:], dtype=bool)
    in_bounds[pad : pad + height, pad : pad + width] = True
    kernel_sq = kernel * kernel
    for oh in range(out_h):
        hs = oh * stride
        for ow in range(out_w):
            ws = ow * stride
            r_here = upper[:, oh, ow]
            window = np.s_[hs : hs + kh, ws : ws + kw]
            if rule_name == "flat":
                mask = in_bounds[window]
                count = c_in * int(mask.sum())
                if count == 0:
                    raise ValueError(
                        f"output window ({oh}, {ow}) covers no in-bounds inputs"
                    )
                lower[(slice(None),) + window] += (r_here.sum() / count) * mask
                continue
            if rule_name == "w2":
                squared = kernel_sq * in_bounds[window]
                denom = squared.sum(axis=(1, 2, 3))
                bad = (denom == 0.0) & (r_here != 0.0)
                if bad.any():
                    raise NumericalInstabilityError(
                        f"output window ({oh}, {ow}) carries relevance but its "
                        "in-bounds weights are all zero"
                    )
                denom = np.where(denom == 0.0, 1.0, denom)
                lower[(slice(None),) + window] += np.einsum(
                    "o,oijk->ijk", r_here / denom, squared
                )
                continue
            patch = padded[(slice(None),) + window]
            contribs = kernel * patch[None]
            flat = contribs.reshape(c_out, -1)
            if rule_name == "alphabeta":
                pos = np.maximum(contribs, 0.0)
                neg = np.minimum(contribs, 0.0)
                totals_pos = pos.sum(axis=(1, 2, 3)) + np.maximum(layer.bias, 0.0)
                totals_neg = neg.sum(axis=(1, 2, 3)) + np.minimum(layer.bias, 0.0)
                totals_pos = np.where(totals_pos == 0.0, 1.0, totals_pos)
                totals_neg = np.where(totals_neg == 0.0, 1.0, totals_neg)
                lower[(slice(None),) + window] += np.einsum(
                    "o,oijk->ijk", config.alpha * r_here / totals_pos, pos
                )
                lower[(slice(None),) + window] -= np.einsum(
                    "o,oijk->ijk", config.beta * r_here / totals_neg, neg
                )
            else:
                denom = _affine_denominators(
                    flat, layer.bias, rule_name, config,
                    f"combined output z_j at window ({oh}, {ow})",
                )
                lower[(slice(None),) + window] += np.einsum(
                    "o,oijk->ijk", r_here / denom, contribs
                )
    return lower[:, pad : pad + height, pad : pad + width]


def _canonical_planes(array):
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 2:
        return array[None], True
    return array, False


def _sumpool_backward(layer, record, upper, rule_name, config):
    planes, squeeze = _canonical_planes(record.input)
    r_up, _ = _canonical_planes(upper)
    channels, height, width = planes.shape
    flat_in = planes.reshape(channels, height * width)
    r_up_flat = r_up.reshape(channels, -1)
    lower = np.zeros_like(flat_in)
    for j, members in enumerate(record.field_map):
        r_here = r_up_flat[:, j]
        if rule_name in ("flat", "w2"):
            # Every pooling weight is 1, so the w^2 split is the flat split.
            lower[:, members] += r_here[:, None] / members.size
            continue
        values = flat_in[:, members]
        if rule_name == "alphabeta":
            pos = np.maximum(values, 0.0)
            neg = np.minimum(values, 0.0)
            totals_pos = pos.sum(axis=1)
            totals_neg = neg.sum(axis=1)
            totals_pos = np.where(totals_pos == 0.0, 1.0, totals_pos)
            totals_neg = np.where(totals_neg == 0.0, 1.0, totals_neg)
            lower[:, members] += (config.alpha * r_here / totals_pos)[:, None] * pos
            lower[:, members] -= (config.beta * r_here / totals_neg)[:, None] * neg
        else:
            denom = _affine_denominators(
                values, 0.0, rule_name, config, f"pooled sum at output {j}"
            )
            lower[:, members] += (r_here / denom)[:, None] * values
    lower = lower.reshape(planes.shape)
    return lower[0] if squeeze else lower


def _maxpool_backward(layer, record, upper, rule_name, config):
    planes, squeeze = _canonical_planes(record.input)
    r_up, _ = _canonical_planes(upper)
    channels, height, width = planes.shape
    r_up_flat = r_up.reshape(channels, -1)
    lower = np.zeros((channels, height * width))
    if rule_name == "flat":
        for j, members in enumerate(record.field_map):
            lower[:, members] += r_up_flat[:, j][:, None] / members.size
    else:
        # Winner-take-all: the recorded argmax input receives everything.
        winners = record.winners
        rows = np.arange(channels)
        for j in range(r_up_flat.shape[1]):
            win = winners[:, j]
            live = win >= 0
            lower[rows[live], win[live]] += r_up_flat[live, j]
    lower = lower.reshape(planes.shape)
    return lower[0] if squeeze else lower


def _layer_backward(layer, record, upper, rule_name, config):
    if isinstance(layer, ReLU):
        return upper
    if isinstance(layer, Dense):
        return _dense_backward(layer, record, upper, rule_name, config)
    if isinstance(layer, Conv2d):
        return _conv_backward(layer, record, upper, rule_name, config)
    if isinstance(layer, SumPool2d):
        return _sumpool_backward(layer, record, upper, rule_name, config)
    if isinstance(layer, MaxPool2d):
        return _maxpool_backward(layer, record, upper, rule_name, config)
    raise ValueError(f"no propagation defined for layer kind {layer.kind!r}")


def explain_nn(model, trace, target_class, rules=None, cutoff=None):
    """Propagate the target class score back to the input.

    ``trace`` must come from ``model.forward`` on the input being explained.
    Returns a RelevanceMap whose top entry is one-hot at ``target_class``
    (holding the raw score) and whose bottom entry aligns with the input
    tensor. Rule failures are re-raised with the layer index prepended.
    """
    config = (rules if rules is not None else RuleConfig()).validate()
    cut = (cutoff if cutoff is not None else CutoffConfig()).validate(len(model.layers))
    scores = np.asarray(trace.scores, dtype=np.float64)
    flat_scores = scores.ravel()
    target_class = int(target_class)
    if not 0 <= target_class < flat_scores.size:
        raise ValueError(
            f"target_class {target_class} out of range for {flat_scores.size} scores"
        )
    top = np.zeros_like(flat_scores)
    top[target_class] = flat_scores[target_class]
    top = top.reshape(scores.shape)

    relevances = [None] * (len(model.layers) + 1)
    relevances[len(model.layers)] = top
    current = top
    for index in reversed(range(len(model.layers))):
        layer = model.layers[index]
        record = trace[index]
        name = config.rule
        if cut.cutoff_layer is not None and index < cut.cutoff_layer:
            name = "flat"
        try:
            current = _layer_backward(layer, record, current, name, config)
        except (ValueError, FloatingPointError) as exc:
            raise type(exc)(f"layer {index} ({layer.kind}): {exc}") from exc
        relevances[index] = current
    return RelevanceMap(relevances)
