"""Binary confusion matrices and classification reports.

Class 1 ("fight") is the positive class. Reports carry per-class
precision/recall/F1, accuracy, and macro/weighted averages, rendered as a
two-decimal text table with a full-precision machine-readable variant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DataError

CLASS_NAMES = {0: "Normal", 1: "Fight"}


@dataclass(frozen=True)
class ConfusionMatrix2:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def actual_count(self, label: int) -> int:
        return (self.fp + self.tn) if label == 0 else (self.tp + self.fn)

    def predicted_count(self, label: int) -> int:
        return (self.tn + self.fn) if label == 0 else (self.tp + self.fp)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    normal: ClassMetrics
    fight: ClassMetrics
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    overall_precision: float
    divide_by_zero_flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "class_0": {
                "precision": self.normal.precision,
                "recall": self.normal.recall,
                "f1": self.normal.f1,
                "support": self.normal.support,
            },
            "class_1": {
                "precision": self.fight.precision,
                "recall": self.fight.recall,
                "f1": self.fight.f1,
                "support": self.fight.support,
            },
            "accuracy": self.accuracy,
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "overall_precision": self.overall_precision,
            "divide_by_zero": list(self.divide_by_zero_flags),
        }


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix2:
    if len(y_true) != len(y_pred):
        raise DataError(f"length mismatch: {len(y_true)} labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise DataError("cannot build a confusion matrix from empty inputs")
    tn = fp = fn = tp = 0
    for t, p in zip(y_true, y_pred):
        if t not in (0, 1) or p not in (0, 1):
            raise DataError(f"labels must be 0 or 1, got ({t!r}, {p!r})")
        if t == 0:
            if p == 0:
                tn += 1
            else:
                fp += 1
        else:
            if p == 1:
                tp += 1
            else:
                fn += 1
    return ConfusionMatrix2(tn=tn, fp=fp, fn=fn, tp=tp)


def _safe_div(num: float, den: float, flag: str, flags: list[str]) -> float:
    # Degenerate splits still need renderable reports: 0 with a flag, not NaN.
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def classification_report(cm: ConfusionMatrix2) -> ClassificationReport:
    if cm.total <= 0:
        raise DataError("confusion matrix is empty")
    flags: list[str] = []

    def class_metrics(label: int) -> ClassMetrics:
        correct = cm.tn if label == 0 else cm.tp
        precision = _safe_div(correct, cm.predicted_count(label), f"precision_{label}", flags)
        recall = _safe_div(correct, cm.actual_count(label), f"recall_{label}", flags)
        f1 = _safe_div(2.0 * precision * recall, precision + recall, f"f1_{label}", flags)
        return ClassMetrics(precision=precision, recall=recall, f1=f1, support=cm.actual_count(label))

    normal = class_metrics(0)
    fight = class_metrics(1)
    accuracy = (cm.tn + cm.tp) / cm.total

    w0 = normal.support / cm.total
    w1 = fight.support / cm.total
    return ClassificationReport(
        normal=normal,
        fight=fight,
        accuracy=accuracy,
        macro_precision=(normal.precision + fight.precision) / 2.0,
        macro_recall=(normal.recall + fight.recall) / 2.0,
        macro_f1=(normal.f1 + fight.f1) / 2.0,
        weighted_precision=w0 * normal.precision + w1 * fight.precision,
        weighted_recall=w0 * normal.recall + w1 * fight.recall,
        weighted_f1=w0 * normal.f1 + w1 * fight.f1,
        # Micro-averaged precision; for single-label binary data this equals
        # accuracy and is exposed separately for percent-style reporting.
        overall_precision=accuracy,
        divide_by_zero_flags=tuple(flags),
    )


def render_report(report: ClassificationReport, include_overall_precision: bool = False) -> str:
    """Format the report as the conventional 5-row text table, 2 decimals."""
    rows = [
        ("", "Precision", "Recall", "F1-score"),
        ("Class 0: Normal", f"{report.normal.precision:.2f}", f"{report.normal.recall:.2f}", f"{report.normal.f1:.2f}"),
        ("Class 1: Fight", f"{report.fight.precision:.2f}", f"{report.fight.recall:.2f}", f"{report.fight.f1:.2f}"),
        ("Accuracy", "-", "-", f"{report.accuracy:.2f}"),
        ("Macro average", f"{report.macro_precision:.2f}", f"{report.macro_recall:.2f}", f"{report.macro_f1:.2f}"),
        ("Weighted average", f"{report.weighted_precision:.2f}", f"{report.weighted_recall:.2f}", f"{report.weighted_f1:.2f}"),
    ]
    if include_overall_precision:
        rows.append(("Precision", f"{report.overall_precision * 100:.2f}%", "-", "-"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines)
