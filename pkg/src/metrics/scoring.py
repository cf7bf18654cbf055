import numpy as np
from pydantic import BaseModel

from src.exceptions import ShapeError
from src.nncore.utils import Tensor

DEFAULT_THRESHOLD = 0.5


class ConfusionCounts:
    """Per-class TP / FP / FN accumulated over one-second segments."""

    def __init__(self, num_classes: int):
        self.tp = np.zeros(num_classes, dtype=np.int64)
        self.fp = np.zeros(num_classes, dtype=np.int64)
        self.fn = np.zeros(num_classes, dtype=np.int64)

    def accumulate(self, decisions: Tensor, references: Tensor) -> "ConfusionCounts":
        decided = decisions.astype(bool)
        actual = references.astype(bool)
        self.tp += np.sum(decided & actual, axis=0)
        self.fp += np.sum(decided & ~actual, axis=0)
        self.fn += np.sum(~decided & actual, axis=0)
        return self


class ClassScore(BaseModel):
    index: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


class F1Result(BaseModel):
    per_class: list[ClassScore]
    micro_f1: float
    macro_f1: float


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def binarize(predictions: Tensor, threshold: float = DEFAULT_THRESHOLD) -> Tensor:
    """Segment decisions: active iff probability > threshold (strict)."""
    return np.asarray(predictions) > threshold


def f1_segment(
    predictions: Tensor,
    references: Tensor,
    threshold: float = DEFAULT_THRESHOLD,
    classes: list[int] | None = None,
) -> F1Result:
    """
    Segment-based precision, recall and F1.

    Predictions are binarized with a strict ``> threshold``. Counts are pooled
    over every segment; the micro F1 is 2TP / (2TP + FP + FN) summed over the
    class subset, and every 0/0 ratio is defined as 0.

    Parameters:
    predictions (Tensor): Probabilities [S, K] (segments of all files stacked).
    references (Tensor): Reference labels [S, K] in {0, 1}.
    threshold (float, optional): Decision threshold in (0, 1). Defaults to 0.5.
    classes (list[int], optional): Column subset to score. Defaults to all columns.

    Returns:
    F1Result: Per-class scores plus micro and macro F1 over the subset.

    Raises:
    ShapeError: If shapes disagree or the threshold is outside (0, 1).
    """
    predictions = np.asarray(predictions)
    references = np.asarray(references)
    if predictions.shape != references.shape or predictions.ndim != 2:
        raise ShapeError(
            f"f1_segment: predictions {predictions.shape} and references {references.shape} must be equal [S, K]"
        )
    if not 0.0 < threshold < 1.0:
        raise ShapeError(f"f1_segment: threshold {threshold} is outside (0, 1)")
    columns = list(range(predictions.shape[1])) if classes is None else list(classes)
    for column in columns:
        if not 0 <= column < predictions.shape[1]:
            raise ShapeError(f"f1_segment: class index {column} out of range")

    counts = ConfusionCounts(len(columns)).accumulate(
        binarize(predictions[:, columns], threshold), references[:, columns]
    )
    per_class = []
    for position, column in enumerate(columns):
        tp, fp, fn = (int(counts.tp[position]), int(counts.fp[position]), int(counts.fn[position]))
        per_class.append(
            ClassScore(
                index=column,
                tp=tp,
                fp=fp,
                fn=fn,
                precision=_ratio(tp, tp + fp),
                recall=_ratio(tp, tp + fn),
                f1=_ratio(2 * tp, 2 * tp + fp + fn),
            )
        )
    tp, fp, fn = int(counts.tp.sum()), int(counts.fp.sum()), int(counts.fn.sum())
    micro = _ratio(2 * tp, 2 * tp + fp + fn)
    macro = float(np.mean([score.f1 for score in per_class])) if per_class else 0.0
    return F1Result(per_class=per_class, micro_f1=micro, macro_f1=macro)
