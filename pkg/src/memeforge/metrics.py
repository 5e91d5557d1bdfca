"""Evaluation metrics and inter-annotator agreement statistics.

Covers the confusion matrix, per-class and macro precision/recall/F1,
stratified k-fold cross-validation, Cohen's and Fleiss's kappa, and the
multilingual (M) index of a code-switched corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyCorpus, LabelOutOfRange, LengthMismatch, TooFewItems


@dataclass
class MetricsReport:
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def to_dict(self) -> dict:
        return {
            "per_class": [
                {"precision": p, "recall": r, "f1": f, "support": s}
                for p, r, f, s in zip(self.precision, self.recall,
                                      self.f1, self.support)
            ],
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
        }


class FleissResult(NamedTuple):
    value: float
    degenerate: bool


def confusion(y_true: Sequence[int], y_pred: Sequence[int], k: int) -> np.ndarray:
    """k x k count matrix; rows are true labels, columns predictions."""
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} vs {len(y_pred)}")
    cm = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if not (0 <= t < k and 0 <= p < k):
            raise LabelOutOfRange(f"label pair ({t}, {p}) with k={k}")
        cm[t, p] += 1
    return cm


def precision_recall_f1(cm: np.ndarray) -> MetricsReport:
    """Per-class P/R/F1 with 0-on-empty-denominator convention, plus
    unweighted macro averages."""
    k = cm.shape[0]
    precision, recall, f1 = [], [], []
    for c in range(k):
        tp = float(cm[c, c])
        fp = float(cm[:, c].sum() - cm[c, c])
        fn = float(cm[c, :].sum() - cm[c, c])
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
    support = [int(cm[c, :].sum()) for c in range(k)]
    return MetricsReport(
        precision=precision, recall=recall, f1=f1, support=support,
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
    )


def stratified_kfold(labels: Sequence[int], k: int = 10,
                     seed: int = 0) -> np.ndarray:
    """Fold id per item: within each class, shuffle by seed and deal
    round-robin, so per-class fold sizes differ by at most one."""
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise TooFewItems(f"{n} items for {k} folds")
    classes = np.unique(labels)
    if any((labels == c).sum() == 0 for c in classes):
        raise TooFewItems("empty class")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    for c in classes:
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for pos, item in enumerate(idx):
            fold_of[item] = pos % k
    return fold_of


def cross_validate(trainer: Callable[[np.ndarray, np.ndarray], Sequence[int]],
                   labels: Sequence[int], k: int = 10, seed: int = 0,
                   n_classes: int | None = None):
    """Stratified k-fold CV driven by a fit-and-predict callback.

    `trainer(train_idx, test_idx)` must return predicted labels for
    `test_idx`. Returns (pooled_report, per_fold_reports, pooled_confusion);
    the pooled report is computed over the union of held-out predictions.
    """
    labels = np.asarray(labels)
    kc = n_classes if n_classes is not None else int(labels.max()) + 1
    fold_of = stratified_kfold(labels, k=k, seed=seed)
    pooled_true: list[int] = []
    pooled_pred: list[int] = []
    per_fold = []
    for fold in range(k):
        test_idx = np.flatnonzero(fold_of == fold)
        train_idx = np.flatnonzero(fold_of != fold)
        if len(test_idx) == 0:
            continue
        try:
            preds = np.asarray(trainer(train_idx, test_idx))
        except Exception as exc:
            raise type(exc)(f"fold {fold}: {exc}") from exc
        pooled_true.extend(labels[test_idx].tolist())
        pooled_pred.extend(preds.tolist())
        per_fold.append(precision_recall_f1(
            confusion(labels[test_idx], preds, kc)))
    pooled_cm = confusion(pooled_true, pooled_pred, kc)
    return precision_recall_f1(pooled_cm), per_fold, pooled_cm


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement between two raters."""
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)}")
    if len(a) == 0:
        raise LengthMismatch("empty inputs")
    n = len(a)
    cats = sorted(set(a) | set(b), key=str)
    index = {c: i for i, c in enumerate(cats)}
    table = np.zeros((len(cats), len(cats)))
    for x, y in zip(a, b):
        table[index[x], index[y]] += 1
    table /= n
    p_o = float(np.trace(table))
    p_e = float((table.sum(axis=1) * table.sum(axis=0)).sum())
    if abs(1.0 - p_e) < 1e-12:
        return 1.0 if p_o >= 1.0 - 1e-12 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(table: Sequence[Sequence]) -> FleissResult:
    """Fleiss's kappa for an items x raters label matrix.

    When a single category is used everywhere the chance term hits 1;
    that degenerate case returns 1 with a flag.
    """
    rows = [list(r) for r in table]
    if not rows or len(rows[0]) < 2:
        raise ValueError("need >= 1 item and >= 2 raters")
    n_raters = len(rows[0])
    if any(len(r) != n_raters for r in rows):
        raise ValueError("ragged agreement table")
    cats = sorted({c for r in rows for c in r}, key=str)
    if len(cats) == 1:
        return FleissResult(1.0, True)
    index = {c: i for i, c in enumerate(cats)}
    counts = np.zeros((len(rows), len(cats)))
    for i, r in enumerate(rows):
        for c in r:
            counts[i, index[c]] += 1
    n_items = len(rows)
    p_i = ((counts ** 2).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (n_items * n_raters)
    p_e = float((p_j ** 2).sum())
    if abs(1.0 - p_e) < 1e-12:
        return FleissResult(1.0, True)
    return FleissResult((p_bar - p_e) / (1.0 - p_e), False)


def m_index(lang_counts: dict[str, int]) -> float:
    """Multilingual index: 0 for a monolingual corpus, 1 for perfectly even
    mixing over the languages present."""
    counts = np.array([c for c in lang_counts.values() if c > 0], dtype=np.float64)
    if counts.size == 0 or counts.sum() < 1:
        raise EmptyCorpus("no tokens")
    k = counts.size
    if k == 1:
        return 0.0
    p = counts / counts.sum()
    sum_sq = float((p ** 2).sum())
    return (1.0 - sum_sq) / ((k - 1) * sum_sq)
