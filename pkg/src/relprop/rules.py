"""Relevance redistribution primitives.

Each function maps relevance at the output of one linear (or structural)
mapping back to its inputs. They operate on dense per-connection arrays:
``contribs[i, j]`` is the forward contribution z_ij of input i to output j,
``totals[j]`` the combined output z_j (including any bias term). Layer-level
propagation builds the same quantities windowed per output unit; these
primitives are the reference semantics.

Conventions shared by all rules: a vanished fraction 0/0 contributes nothing,
and a vanished denominator with surviving numerators is an error (use the
epsilon rule instead), never silent infinity.
"""

import numpy as np

from .errors import NumericalInstabilityError
from .validation import as_float_array

RULE_NAMES = ("basic", "epsilon", "alphabeta", "flat", "w2")


def _check_shapes(contribs, totals, relevance):
    contribs = as_float_array(contribs, "contribs", ndim=2)
    n_out = contribs.shape[1]
    totals = as_float_array(totals, "totals", ndim=1, shape=(n_out,))
    relevance = as_float_array(relevance, "relevance", ndim=1, shape=(n_out,))
    return contribs, totals, relevance


def _guard_zero_denominators(contribs, totals, what):
    """Zero totals are fine only where every contribution is zero too."""
    zero = totals == 0.0
    if not zero.any():
        return totals
    bad = zero & np.any(contribs != 0.0, axis=0)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise NumericalInstabilityError(
            f"{what} vanished at output {j} while its contributions did not; "
            "use the epsilon rule to stabilize the denominator"
        )
    # Surviving zero columns have all-zero numerators; any denominator gives 0.
    return np.where(zero, 1.0, totals)


def propagate_basic(contribs, totals, relevance):
    """R_i = sum_j (z_ij / z_j) R_j with the 0/0 -> 0 convention."""
    contribs, totals, relevance = _check_shapes(contribs, totals, relevance)
    denom = _guard_zero_denominators(contribs, totals, "combined output z_j")
    return (contribs / denom) @ relevance


def stabilized(totals, epsilon):
    """Denominators z_j + eps * sign(z_j), with sign(0) taken as +1."""
    totals = np.asarray(totals, dtype=np.float64)
    sign = np.where(totals >= 0.0, 1.0, -1.0)
    return totals + epsilon * sign


def propagate_epsilon(contribs, totals, relevance, epsilon):
    """Stabilized variant of the basic rule; epsilon = 0 reduces to it exactly."""
    contribs, totals, relevance = _check_shapes(contribs, totals, relevance)
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    denom = stabilized(totals, epsilon)
    if epsilon == 0.0:
        # The stabilizer is inactive; enforce the basic rule's error contract
        # rather than dividing by zero.
        denom = _guard_zero_denominators(contribs, denom, "combined output z_j")
    return (contribs / denom) @ relevance


def propagate_alphabeta(contribs, totals_pos, totals_neg, relevance, alpha, beta):
    """Separate redistribution of positive and negative contributions.

    R_i = sum_j (alpha * z_ij+ / z_j+  -  beta * z_ij- / z_j-) R_j, where each
    fraction is zero when both its parts vanish. totals_pos/totals_neg are the
    signed column sums including the matching signed part of the bias.
    """
    check_alpha_beta(alpha, beta)
    contribs, totals_pos, relevance = _check_shapes(contribs, totals_pos, relevance)
    totals_neg = as_float_array(totals_neg, "totals_neg", ndim=1, shape=totals_pos.shape)
    pos = np.maximum(contribs, 0.0)
    neg = np.minimum(contribs, 0.0)
    denom_pos = _guard_zero_denominators(pos, totals_pos, "positive part z_j+")
    denom_neg = _guard_zero_denominators(neg, totals_neg, "negative part z_j-")
    return alpha * ((pos / denom_pos) @ relevance) - beta * ((neg / denom_neg) @ relevance)


def check_alpha_beta(alpha, beta):
    if alpha < 0 or beta < 0 or alpha - beta != 1.0:
        raise ValueError(
            f"alpha/beta must be nonnegative with alpha - beta = 1, "
            f"got alpha={alpha}, beta={beta}"
        )


def propagate_flat(field_map, relevance, n_in):
    """Uniform split of each R_j over its receptive field, ignoring the mapping.

    ``field_map[j]`` lists the input indices feeding output j; overlapping
    fields accumulate. Forward values and weights play no role.
    """
    relevance = as_float_array(relevance, "relevance", ndim=1)
    if len(field_map) != relevance.shape[0]:
        raise ValueError(
            f"field_map has {len(field_map)} fields for {relevance.shape[0]} outputs"
        )
    out = np.zeros(n_in)
    for j, members in enumerate(field_map):
        members = np.asarray(members, dtype=np.int64)
        if members.size == 0:
            raise ValueError(f"output {j} has an empty receptive field")
        out[members] += relevance[j] / members.size
    return out


def propagate_w2(weights, relevance):
    """R_i = sum_j (w_ij^2 / sum_i' w_i'j^2) R_j; input-independent."""
    weights = as_float_array(weights, "weights", ndim=2)
    relevance = as_float_array(relevance, "relevance", ndim=1, shape=(weights.shape[1],))
    squared = weights * weights
    denom = squared.sum(axis=0)
    bad = (denom == 0.0) & (relevance != 0.0)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise NumericalInstabilityError(
            f"output {j} carries relevance but all of its weights are zero"
        )
    denom = np.where(denom == 0.0, 1.0, denom)
    return (squared / denom) @ relevance
