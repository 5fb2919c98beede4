"""Micro/macro F1 scoring with explicit abstention accounting.

Abstentions and unparseable replies land in a reserved confusion column:
they cost the gold class a false negative but credit no class with a false
positive, so every one of the N instances is scored and micro-F1 collapses
to plain accuracy exactly when every prediction is a real label.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import DomainError
from .icl import Prediction

PredictionLike = Union[Prediction, int]


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int

    def to_json_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }


@dataclass(frozen=True)
class EvalReport:
    micro_f1: float
    macro_f1: float
    per_class: Mapping[int, ClassMetrics]
    confusion: np.ndarray  # (C, C+1); last column = abstain/parse_failed
    n_instances: int
    route_counts: Mapping[str, int]

    def to_json_dict(self) -> dict:
        return {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "per_class": {str(k): v.to_json_dict() for k, v in self.per_class.items()},
            "confusion": self.confusion.tolist(),
            "n_instances": self.n_instances,
            "route_counts": dict(self.route_counts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def _f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """(precision, recall, f1); all 0.0 when tp = 0 and nothing to divide."""
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def _predicted_label(pred: PredictionLike, n_classes: int) -> int | None:
    """Label id of a prediction, or None for abstain/parse_failed."""
    if isinstance(pred, Prediction):
        return pred.label_id if pred.is_label else None
    label = int(pred)
    if not 0 <= label < n_classes:
        raise DomainError(f"predicted label {label} outside 0..{n_classes - 1}")
    return label


def score(
    golds: Sequence[int],
    preds: Sequence[PredictionLike],
    n_classes: int,
) -> EvalReport:
    """Pooled micro-F1 and unweighted macro-F1 over all n_classes classes.

    Accepts Prediction objects or bare label ids. Order of (gold, pred)
    pairs never affects any metric.
    """
    if len(golds) != len(preds):
        raise DomainError(
            f"gold/prediction length mismatch: {len(golds)} vs {len(preds)}"
        )
    if n_classes < 1:
        raise DomainError("n_classes must be >= 1")
    confusion = np.zeros((n_classes, n_classes + 1), dtype=np.int64)
    routes: Counter[str] = Counter()
    for gold, pred in zip(golds, preds):
        if not 0 <= gold < n_classes:
            raise DomainError(f"gold label {gold} outside 0..{n_classes - 1}")
        label = _predicted_label(pred, n_classes)
        confusion[gold, label if label is not None else n_classes] += 1
        if isinstance(pred, Prediction):
            routes[pred.parse_route.value] += 1
    per_class: dict[int, ClassMetrics] = {}
    tp_sum = fp_sum = fn_sum = 0
    for c in range(n_classes):
        tp = int(confusion[c, c])
        fp = int(confusion[:, c].sum()) - tp
        fn = int(confusion[c, :].sum()) - tp
        tp_sum, fp_sum, fn_sum = tp_sum + tp, fp_sum + fp, fn_sum + fn
        precision, recall, f1 = _f1(tp, fp, fn)
        per_class[c] = ClassMetrics(precision, recall, f1, int(confusion[c, :].sum()))
    _, _, micro = _f1(tp_sum, fp_sum, fn_sum)
    macro = sum(m.f1 for m in per_class.values()) / n_classes
    return EvalReport(
        micro_f1=micro,
        macro_f1=macro,
        per_class=per_class,
        confusion=confusion,
        n_instances=len(golds),
        route_counts=dict(routes),
    )


@dataclass(frozen=True)
class ResultRow:
    method: str
    setting: str
    micro_f1: float | None
    macro_f1: float | None

    @classmethod
    def from_report(cls, method: str, setting: str, report: EvalReport) -> "ResultRow":
        return cls(method, setting, report.micro_f1, report.macro_f1)


def _fmt_pct(value: float | None) -> str:
    return "NA" if value is None else f"{value * 100:.1f}"


def render_table(rows: Sequence[ResultRow], fmt: str = "markdown") -> str:
    """Results table with micro/macro columns; best value per column bolded
    in markdown (ties all bolded); missing cells render as NA."""
    if fmt not in ("markdown", "plain"):
        raise DomainError(f"unknown table format {fmt!r}")
    header = ("Method", "Setting", "micro-F1", "macro-F1")
    best_micro = max((r.micro_f1 for r in rows if r.micro_f1 is not None), default=None)
    best_macro = max((r.macro_f1 for r in rows if r.macro_f1 is not None), default=None)

    def cell(value: float | None, best: float | None) -> str:
        text = _fmt_pct(value)
        if fmt == "markdown" and value is not None and value == best:
            return f"**{text}**"
        return text

    body = [
        (row.method, row.setting, cell(row.micro_f1, best_micro), cell(row.macro_f1, best_macro))
        for row in rows
    ]
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(header) + " |",
            "| " + " | ".join("---" for _ in header) + " |",
        ]
        lines += ["| " + " | ".join(cells) + " |" for cells in body]
        return "\n".join(lines)
    widths = [max(len(col[i]) for col in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip() for cells in body]
    return "\n".join(lines)


def render_report(report: EvalReport, name: str = "run") -> str:
    """Short human summary: headline scores plus the parse-route histogram."""
    lines = [
        f"{name}: micro-F1 {report.micro_f1 * 100:.1f}, "
        f"macro-F1 {report.macro_f1 * 100:.1f} "
        f"({report.n_instances} instances)"
    ]
    if report.route_counts:
        routes = ", ".join(
            f"{route}={count}" for route, count in sorted(report.route_counts.items())
        )
        lines.append(f"parse routes: {routes}")
    return "\n".join(lines)
