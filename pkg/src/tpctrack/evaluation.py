"""Confusion matrices, per-class precision/recall/F1, and evaluation reports.

Matrix convention: rows are the predicted class, columns the true class, so
a perfect classifier fills the diagonal. Metrics with a zero denominator
are defined as 0 (a model that never predicts a class has precision 0 for
that class).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .datastore import Dataset

REPORT_VERSION = 1


@dataclass
class ConfusionMatrix:
    counts: np.ndarray          # (k, k) int64, [predicted][true]
    class_names: List[str]

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(predictions: Sequence[int], truths: Sequence[int], k: int,
              class_names: Optional[Sequence[str]] = None) -> ConfusionMatrix:
    preds = np.asarray(predictions, dtype=np.int64)
    trues = np.asarray(truths, dtype=np.int64)
    if preds.shape != trues.shape:
        raise ValueError("predictions and truths must have equal length")
    if preds.size and (preds.min() < 0 or preds.max() >= k
                       or trues.min() < 0 or trues.max() >= k):
        raise ValueError("label out of range")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (preds, trues), 1)
    names = list(class_names) if class_names else [f"class{i}" for i in range(k)]
    return ConfusionMatrix(counts=counts, class_names=names)


def precision(matrix: ConfusionMatrix, cls: int) -> float:
    tp = matrix.counts[cls, cls]
    predicted = matrix.counts[cls, :].sum()
    return float(tp / predicted) if predicted > 0 else 0.0


def recall(matrix: ConfusionMatrix, cls: int) -> float:
    tp = matrix.counts[cls, cls]
    actual = matrix.counts[:, cls].sum()
    return float(tp / actual) if actual > 0 else 0.0


def f1(matrix: ConfusionMatrix, cls: int) -> float:
    p = precision(matrix, cls)
    r = recall(matrix, cls)
    return f1_score(p, r)


def f1_score(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    return 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0


@dataclass
class EvalReport:
    matrix: ConfusionMatrix
    per_class: Dict[str, Dict[str, float]]
    proton: Dict[str, float]
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "class_names": self.matrix.class_names,
            "matrix": self.matrix.counts.tolist(),
            "per_class": self.per_class,
            "proton": self.proton,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def report_from_confusion(matrix: ConfusionMatrix,
                          provenance: Optional[dict] = None) -> EvalReport:
    per_class = {}
    for i, name in enumerate(matrix.class_names):
        per_class[name] = {
            "precision": precision(matrix, i),
            "recall": recall(matrix, i),
            "f1": f1(matrix, i),
        }
    proton = per_class.get("proton", {"precision": 0.0, "recall": 0.0, "f1": 0.0})
    return EvalReport(matrix=matrix, per_class=per_class, proton=proton,
                      provenance=provenance or {})


def evaluate(model, dataset: Dataset, provenance: Optional[dict] = None) -> EvalReport:
    """Deterministic report of a fitted model on a labeled dataset."""
    if dataset.m == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    preds = model.predict_label(dataset.features)
    truths = model.encode_truth(dataset)
    matrix = confusion(preds, truths, len(model.class_names), model.class_names)
    prov = dict(provenance or {})
    prov.setdefault("m", dataset.m)
    prov.update({k: v for k, v in dataset.provenance.items() if k == "split"})
    return report_from_confusion(matrix, prov)


def render_text(report: EvalReport) -> str:
    """Aligned plain-text table: per-class precision / recall / F1 plus the
    predicted-vs-true count matrix."""
    names = report.matrix.class_names
    width = max(9, *(len(n) for n in names))
    lines = []
    header = f"{'class'.ljust(width)}  precision  recall  f1"
    lines.append(header)
    lines.append("-" * len(header))
    for name in names:
        m = report.per_class[name]
        lines.append(
            f"{name.ljust(width)}  {m['precision']:9.3f}  {m['recall']:6.3f}  {m['f1']:.3f}"
        )
    lines.append("")
    lines.append("confusion (rows = predicted, cols = true):")
    col_header = " " * (width + 2) + "  ".join(n.rjust(width) for n in names)
    lines.append(col_header)
    for i, name in enumerate(names):
        row = "  ".join(str(int(c)).rjust(width) for c in report.matrix.counts[i])
        lines.append(f"{name.ljust(width)}  {row}")
    return "\n".join(lines) + "\n"
