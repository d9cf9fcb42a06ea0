"""Online hard example mining: all positives plus the hardest negatives at a fixed 1:ratio mix."""
import math
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from ..models import Label, ScoredSample


def _cap_positives(
    positives: np.ndarray, ratio: int, batch_cap: int, rng: Optional[np.random.Generator]
) -> np.ndarray:
    pos_cap = math.ceil(batch_cap / (1 + ratio))
    if len(positives) <= pos_cap:
        return positives
    rng = rng if rng is not None else np.random.default_rng(0)
    logger.debug(f"Subsampling {len(positives)} positives down to {pos_cap}")
    return np.sort(rng.choice(positives, size=pos_cap, replace=False))


def _negative_budget(num_pos: int, num_neg: int, ratio: int, batch_cap: int) -> int:
    if num_pos == 0:
        return min(batch_cap, num_neg)
    return min(ratio * num_pos, num_neg, batch_cap - num_pos)


def _check_args(ratio: int, batch_cap: int) -> None:
    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    if batch_cap < 1:
        raise ValueError(f"batch_cap must be >= 1, got {batch_cap}")


def select_hard_examples(
    labels: np.ndarray,
    losses: np.ndarray,
    ratio: int = 3,
    batch_cap: int = 128,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Array form of ohem_select.

    Args:
        labels: per-sample Label values; IGNORE entries are never selected
        losses: per-sample classification loss (hardness)

    Returns:
        Selected positions: positives ascending, then negatives hardest first
        (equal losses broken by ascending position)
    """
    _check_args(ratio, batch_cap)
    labels = np.asarray(labels).reshape(-1)
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)

    positives = _cap_positives(np.flatnonzero(labels == Label.POSITIVE), ratio, batch_cap, rng)
    negatives = np.flatnonzero(labels == Label.NEGATIVE)
    budget = _negative_budget(len(positives), len(negatives), ratio, batch_cap)

    hardest = negatives[np.lexsort((negatives, -losses[negatives]))]
    return np.concatenate([positives, hardest[:budget]]).astype(np.int64)


def select_random_examples(
    labels: np.ndarray,
    ratio: int = 3,
    batch_cap: int = 128,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Same positive cap and negative budget as OHEM, with negatives drawn uniformly."""
    _check_args(ratio, batch_cap)
    labels = np.asarray(labels).reshape(-1)
    rng = rng if rng is not None else np.random.default_rng(0)

    positives = _cap_positives(np.flatnonzero(labels == Label.POSITIVE), ratio, batch_cap, rng)
    negatives = np.flatnonzero(labels == Label.NEGATIVE)
    budget = _negative_budget(len(positives), len(negatives), ratio, batch_cap)
    chosen = np.sort(rng.choice(negatives, size=budget, replace=False)) if budget else negatives[:0]
    return np.concatenate([positives, chosen]).astype(np.int64)


def ohem_select(
    samples: Sequence[ScoredSample],
    ratio: int = 3,
    batch_cap: int = 128,
    rng: Optional[np.random.Generator] = None,
) -> List[int]:
    """
    Keep every positive (up to ceil(batch_cap / (1 + ratio))) and the highest-loss negatives.

    Returns:
        Selected sample indices; with no positives, up to batch_cap hardest negatives
    """
    _check_args(ratio, batch_cap)
    if not samples:
        return []

    ordered = sorted(samples, key=lambda s: s.index)
    labels = np.array([int(s.label) for s in ordered], dtype=np.int8)
    losses = np.array([s.loss for s in ordered], dtype=np.float64)
    picked = select_hard_examples(labels, losses, ratio, batch_cap, rng)
    return [ordered[i].index for i in picked]
