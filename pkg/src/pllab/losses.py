"""Partial-label losses and risks.

Probabilities are softmax outputs (rows sum to 1); masks are boolean
candidate sets, one row per example. Every log argument is floored at
``PROB_FLOOR`` so losses stay finite. Losses return their gradient with
respect to the logits, already divided by the batch size.
"""

import math

import numpy as np

from .errors import ContractError

PROB_FLOOR = 1e-12
MAX_CLASSES_CC = 52


def _check(probs, masks):
    probs = np.asarray(probs, dtype=np.float64)
    masks = np.asarray(masks, dtype=bool)
    if probs.shape != masks.shape or probs.ndim != 2:
        raise ContractError(f"probs {probs.shape} and masks {masks.shape} must be equal 2-D shapes")
    if not masks.any(axis=1).all():
        raise ContractError("every candidate set must be non-empty")
    return probs, masks


def candidate_mass(probs, masks):
    """Total probability on each row's candidate set."""
    return np.einsum("ij,ij->i", probs, masks.astype(np.float64))


def naive_loss(probs, masks):
    """Deep naive loss ``-mean(log sum_{k in S} p_k)`` and its logit gradient.

    The gradient is the closed form ``p - 1[k in S] * p / P_S``; the floor
    only guards the loss value.
    """
    probs, masks = _check(probs, masks)
    mass = candidate_mass(probs, masks)
    loss = -np.mean(np.log(np.maximum(mass, PROB_FLOOR)))
    # mass can underflow to 0 only if every candidate logit is ~745 below the max
    safe = np.where(mass > 0, mass, 1.0)
    grad = probs - masks * (probs / safe[:, None])
    return float(loss), grad / probs.shape[0]


def avg_log_loss(probs, masks):
    """Classic naive-model objective ``-mean((1/|S|) sum_{k in S} log p_k)``."""
    probs, masks = _check(probs, masks)
    sizes = masks.sum(axis=1)
    logp = np.log(np.maximum(probs, PROB_FLOOR))
    per_row = -np.sum(np.where(masks, logp, 0.0), axis=1) / sizes
    grad = probs - masks / sizes[:, None]
    return float(per_row.mean()), grad / probs.shape[0]


def cross_entropy(probs, labels):
    """Standard supervised cross-entropy and its logit gradient."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(len(labels))
    loss = -np.mean(np.log(np.maximum(probs[rows, labels], PROB_FLOOR)))
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return float(loss), grad / probs.shape[0]


def cc_normalizer(K: int) -> int:
    """``2**(K-1) - 1``: the number of candidate sets containing a fixed label, minus one."""
    if not 2 <= K <= MAX_CLASSES_CC:
        raise ContractError(f"K must lie in [2, {MAX_CLASSES_CC}], got {K}")
    return 2 ** (K - 1) - 1


def cc_risk(probs, masks, K: int) -> float:
    """Empirical classifier-consistent risk under the uniform transition matrix.

    ``-mean(log(sum_{k in S} p_k / (2**(K-1) - 1)))``
    """
    denom = float(cc_normalizer(K))
    probs, masks = _check(probs, masks)
    if probs.shape[1] != K:
        raise ContractError(f"probs have {probs.shape[1]} columns but K={K}")
    mass = np.maximum(candidate_mass(probs, masks), PROB_FLOOR)
    return float(-np.mean(np.log(mass / denom)))


def cc_loss_upper_bound(K: int, floor: float = PROB_FLOOR) -> float:
    """Largest value the floored CC loss can take: ``log((2**(K-1) - 1) / floor)``."""
    return math.log(cc_normalizer(K)) - math.log(floor)


def partial_zero_one_risk(predictions, masks) -> float:
    """Fraction of predictions falling outside their candidate set."""
    predictions = np.asarray(predictions, dtype=np.int64)
    masks = np.asarray(masks, dtype=bool)
    if len(predictions) == 0:
        return 0.0
    if predictions.min() < 0 or predictions.max() >= masks.shape[1]:
        raise ContractError("prediction outside [0, K)")
    inside = masks[np.arange(len(predictions)), predictions]
    return float(np.mean(~inside))


def classification_error(predictions, true_labels) -> float:
    if true_labels is None:
        raise ContractError("classification error needs true labels")
    predictions = np.asarray(predictions)
    true_labels = np.asarray(true_labels)
    if predictions.shape != true_labels.shape:
        raise ContractError("predictions and true labels differ in length")
    if len(predictions) == 0:
        return 0.0
    return float(np.mean(predictions != true_labels))


def generalization_gap(err: float, partial_risk: float) -> float:
    return abs(err - partial_risk)
