"""Softmax cross-entropy and smooth-L1 losses with their gradients."""
from typing import Tuple

import numpy as np

from ..errors import ShapeError


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise class probabilities."""
    return np.exp(_log_softmax(np.asarray(logits, dtype=np.float64)))


def _check_labels(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (n, C), got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(labels) != len(logits):
        raise ShapeError(f"{len(labels)} labels for {len(logits)} rows of logits")
    if np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise ValueError(f"labels must lie in [0, {logits.shape[1]})")
    return labels


def softmax_ce_per_sample(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Negative log softmax probability of the true class, per row."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(logits, labels)
    if len(labels) == 0:
        return np.zeros(0, dtype=np.float64)
    return -_log_softmax(logits)[np.arange(len(labels)), labels]


def softmax_ce(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean softmax cross-entropy.

    Returns:
        (loss, grad_logits) with grad = (softmax - onehot) / n
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(logits, labels)
    n = len(labels)
    if n == 0:
        return 0.0, np.zeros_like(logits)

    log_probs = _log_softmax(logits)
    loss = float(-log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def smooth_l1(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Smooth-L1 over (n, 4) deltas: 0.5 d^2 when |d| < 1, else |d| - 0.5; summed over
    coordinates and averaged over boxes.

    Returns:
        (loss, grad_pred); an empty set gives 0 and an empty gradient
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ")
    n = len(pred)
    if n == 0:
        return 0.0, np.zeros_like(pred)

    diff = pred - target
    abs_diff = np.abs(diff)
    quadratic = abs_diff < 1.0
    per_coord = np.where(quadratic, 0.5 * diff * diff, abs_diff - 0.5)
    grad = np.where(quadratic, diff, np.sign(diff))
    return float(per_coord.sum() / n), grad / n
