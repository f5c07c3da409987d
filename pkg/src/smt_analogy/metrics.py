"""Per-cell classification metrics for alignment matrices."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    recall: float
    precision: float
    f1: float
    roc_auc: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return asdict(self)


def roc_auc(scores: np.ndarray, gold: np.ndarray) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Ties get average ranks, which equals the trapezoidal ROC area. A gold
    vector with a single class gives 0.5.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(gold).ravel().astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _from_counts(tp: int, fp: int, tn: int, fn: int, auc: float) -> Metrics:
    total = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = (tp + tn) / total if total else 0.0
    return Metrics(accuracy, recall, precision, f1, auc, tp, fp, tn, fn)


def _counts(pred: np.ndarray, gold: np.ndarray) -> tuple[int, int, int, int]:
    p = pred.astype(bool)
    g = gold.astype(bool)
    return int(np.sum(p & g)), int(np.sum(p & ~g)), int(np.sum(~p & ~g)), int(np.sum(~p & g))


def _check(scores: np.ndarray, pred: np.ndarray, gold: np.ndarray) -> None:
    if not (scores.shape == pred.shape == gold.shape):
        raise ValueError(f"shape mismatch: scores {scores.shape}, pred {pred.shape}, gold {gold.shape}")


def compute_metrics(scores: np.ndarray, pred: np.ndarray, gold: np.ndarray) -> Metrics:
    """Treat every cell as one binary decision against gold."""
    scores, pred, gold = np.asarray(scores, dtype=np.float64), np.asarray(pred), np.asarray(gold)
    _check(scores, pred, gold)
    return _from_counts(*_counts(pred, gold), roc_auc(scores, gold))


def micro_metrics(items: Iterable[tuple[np.ndarray, np.ndarray, np.ndarray]]) -> Metrics:
    """Metrics over the pooled cells of several (scores, pred, gold) triples."""
    scores, preds, golds = [], [], []
    for s, p, g in items:
        s, p, g = np.asarray(s, dtype=np.float64), np.asarray(p), np.asarray(g)
        _check(s, p, g)
        scores.append(s.ravel())
        preds.append(p.ravel())
        golds.append(g.ravel())
    if not scores:
        return _from_counts(0, 0, 0, 0, 0.5)
    return compute_metrics(np.concatenate(scores), np.concatenate(preds), np.concatenate(golds))


def exact_match(pred: np.ndarray, gold: np.ndarray) -> bool:
    """Whether the binary prediction equals gold in every cell."""
    pred, gold = np.asarray(pred), np.asarray(gold)
    if pred.shape != gold.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape}, gold {gold.shape}")
    return bool(np.array_equal(pred.astype(bool), gold.astype(bool)))
