"""Confusion matrices, precision/recall and report rendering."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from trackdiag.errors import InvalidArgumentError, ParseError
from trackdiag.generator import AnomalyClass

N_CLASSES = 3


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes, both in class-code order."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (N_CLASSES, N_CLASSES) or c.min() < 0:
            raise InvalidArgumentError("confusion counts must be a non-negative 3x3 matrix")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self):
        return int(self.counts.sum())

    def off_diagonal(self):
        """(true, predicted, count) for every non-zero confusion."""
        return [
            (AnomalyClass(t), AnomalyClass(p), int(self.counts[t, p]))
            for t in range(N_CLASSES)
            for p in range(N_CLASSES)
            if t != p and self.counts[t, p]
        ]


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """Per-class precision is ``None`` for a class that was never predicted."""

    confusion: ConfusionMatrix
    per_class_precision: tuple
    per_class_recall: tuple
    macro_precision: Optional[float]
    dataset_meta: dict = field(default_factory=dict)

    @property
    def accuracy(self):
        c = self.confusion.counts
        return float(np.trace(c) / c.sum())

    @property
    def undefined_precision(self):
        return [AnomalyClass(k) for k, p in enumerate(self.per_class_precision) if p is None]

    @property
    def macro_recall(self):
        vals = [r for r in self.per_class_recall if r is not None]
        return float(np.mean(vals)) if vals else None


def compute_metrics(truths, preds, dataset_meta=None) -> MetricsReport:
    t = np.asarray(truths).reshape(-1)
    p = np.asarray(preds).reshape(-1)
    if t.size != p.size:
        raise InvalidArgumentError(f"length mismatch: {t.size} truths vs {p.size} predictions")
    if t.size == 0:
        raise InvalidArgumentError("need at least one sample")
    for name, arr in (("truth", t), ("prediction", p)):
        if not np.all(np.isin(arr, np.arange(N_CLASSES))):
            raise InvalidArgumentError(f"unknown {name} label outside 0..2")
    t = t.astype(np.int64)
    p = p.astype(np.int64)
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    diag = np.diag(counts)
    precision = tuple(float(diag[k] / col[k]) if col[k] else None for k in range(N_CLASSES))
    recall = tuple(float(diag[k] / row[k]) if row[k] else None for k in range(N_CLASSES))
    defined = [v for v in precision if v is not None]
    macro = float(np.mean(defined)) if defined else None
    return MetricsReport(ConfusionMatrix(counts), precision, recall, macro, dict(dataset_meta or {}))


def _f(v):
    return "undefined" if v is None else f"{v:.4f}"


def _render_text(r: MetricsReport) -> str:
    names = [c.slug for c in AnomalyClass]
    w = max(len(n) for n in names) + 2
    lines = []
    title = r.dataset_meta.get("title")
    if title:
        lines.append(title)
    lines.append("confusion matrix (rows: true, columns: predicted)")
    lines.append(" " * w + "".join(n.rjust(w) for n in names))
    for k, n in enumerate(names):
        lines.append(n.ljust(w) + "".join(str(v).rjust(w) for v in r.confusion.counts[k].tolist()))
    lines.append("")
    lines.append("class".ljust(w) + "precision".rjust(12) + "recall".rjust(12))
    for k, n in enumerate(names):
        lines.append(n.ljust(w) + _f(r.per_class_precision[k]).rjust(12) + _f(r.per_class_recall[k]).rjust(12))
    lines.append("")
    lines.append(f"accuracy {r.accuracy:.4f}")
    lines.append(f"macro_precision {_f(r.macro_precision)}")
    for cls in r.undefined_precision:
        lines.append(f"warning: {cls.slug} was never predicted; precision undefined and excluded from the macro mean")
    return "\n".join(lines) + "\n"


def _delimited_fields(r: MetricsReport):
    rows = [("total", str(r.confusion.total))]
    for t, tn in enumerate(AnomalyClass):
        for p, pn in enumerate(AnomalyClass):
            rows.append((f"count.{tn.slug}.{pn.slug}", str(int(r.confusion.counts[t, p]))))
    for k, cls in enumerate(AnomalyClass):
        rows.append((f"precision.{cls.slug}", _num(r.per_class_precision[k])))
        rows.append((f"recall.{cls.slug}", _num(r.per_class_recall[k])))
    rows.append(("accuracy", _num(r.accuracy)))
    rows.append(("macro_precision", _num(r.macro_precision)))
    for key in sorted(r.dataset_meta):
        rows.append((f"meta.{key}", json.dumps(r.dataset_meta[key], sort_keys=True)))
    return rows


def _num(v):
    return "undefined" if v is None else repr(float(v))


def render_report(report: MetricsReport, format: str = "text") -> bytes:
    if format == "text":
        return _render_text(report).encode("utf-8")
    if format == "delimited":
        return "".join(f"{k},{v}\n" for k, v in _delimited_fields(report)).encode("utf-8")
    raise InvalidArgumentError(f"unknown report format {format!r}")


def parse_delimited_report(data) -> MetricsReport:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        key, sep, value = line.partition(",")
        if not sep:
            raise ParseError("expected 'key,value'", lineno)
        values[key] = value
    try:
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        for t, tn in enumerate(AnomalyClass):
            for p, pn in enumerate(AnomalyClass):
                counts[t, p] = int(values[f"count.{tn.slug}.{pn.slug}"])
        parse = lambda s: None if s == "undefined" else float(s)
        precision = tuple(parse(values[f"precision.{c.slug}"]) for c in AnomalyClass)
        recall = tuple(parse(values[f"recall.{c.slug}"]) for c in AnomalyClass)
        macro = parse(values["macro_precision"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"incomplete metrics report: {exc}") from None
    meta = {
        k[len("meta."):]: json.loads(v)
        for k, v in values.items()
        if k.startswith("meta.")
    }
    return MetricsReport(ConfusionMatrix(counts), precision, recall, macro, meta)


def confusion_grid_data(report: MetricsReport) -> bytes:
    """Long-form ``true,predicted,count`` rows for external heat-map plotting."""
    lines = ["true,predicted,count"]
    for t, tn in enumerate(AnomalyClass):
        for p, pn in enumerate(AnomalyClass):
            lines.append(f"{tn.slug},{pn.slug},{int(report.confusion.counts[t, p])}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def warn_undefined(report: MetricsReport):
    for cls in report.undefined_precision:
        warnings.warn(f"{cls.slug} never predicted; precision undefined", RuntimeWarning, stacklevel=2)
