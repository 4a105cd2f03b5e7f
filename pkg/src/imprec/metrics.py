"""Classification, ranking, and regression metrics.

Conventions: any 0/0 denominator yields 0 so reports never hold undefined
entries; NDCG uses binary gains, log base 2, ranks starting at 1, and an
ideal ordering over min(k, |relevant|) placements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DataError, LengthMismatchError, NoRelevantItemsError


@dataclass(frozen=True)
class BinaryConfusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DataError("confusion counts must be non-negative")


@dataclass(frozen=True)
class RankedEval:
    ranked_items: tuple
    relevant_items: frozenset
    k: int

    def __post_init__(self) -> None:
        if len(set(self.ranked_items)) != len(self.ranked_items):
            raise DataError("ranked list contains duplicates")
        if self.k < 1:
            raise DataError("k must be positive")


def precision_recall_f1(c: BinaryConfusion) -> tuple[float, float, float]:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def recall_at_k(e: RankedEval) -> float:
    if not e.relevant_items:
        raise NoRelevantItemsError("recall@k needs a non-empty relevant set")
    top = set(e.ranked_items[: e.k])
    return len(top & e.relevant_items) / len(e.relevant_items)


def ndcg_at_k(e: RankedEval) -> float:
    if not e.relevant_items:
        raise NoRelevantItemsError("ndcg@k needs a non-empty relevant set")
    dcg = 0.0
    for i, item in enumerate(e.ranked_items[: e.k], start=1):
        if item in e.relevant_items:
            dcg += 1.0 / math.log2(i + 1)
    ideal = min(e.k, len(e.relevant_items))
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, ideal + 1))
    return dcg / idcg if idcg else 0.0


def regression_errors(
    pred: Sequence[float], truth: Sequence[float]
) -> tuple[float, float, float]:
    """(MAE, MSE, RMSE) with rmse = sqrt(mse) exactly."""
    if len(pred) != len(truth):
        raise LengthMismatchError(f"{len(pred)} predictions vs {len(truth)} truths")
    if not pred:
        raise DataError("regression_errors needs at least one pair")
    mae = sum(abs(p - t) for p, t in zip(pred, truth)) / len(pred)
    mse = sum((p - t) ** 2 for p, t in zip(pred, truth)) / len(pred)
    return mae, mse, math.sqrt(mse)
