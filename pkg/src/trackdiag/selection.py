"""Stratified k-fold cross-validated grid search over (C, gamma, kernel)."""

from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from trackdiag.errors import ConvergenceError, InvalidArgumentError, ParseError
from trackdiag.parallel import pmap
from trackdiag.svm.kernels import KernelKind, KernelSpec
from trackdiag.svm.multiclass import FeatureScaling, predict_classes, train_one_vs_one
from trackdiag.svm.smo import SmoSettings

CV_FORMAT = "trackdiag-cv/1"
_KERNEL_ORDER = {KernelKind.RBF: 0, KernelKind.Polynomial: 1}


@dataclass(frozen=True)
class HyperGrid:
    c_values: tuple = (0.1, 1.0, 10.0, 100.0)
    gamma_values: tuple = (0.0001, 0.001, 0.1, 1.0)
    kernels: tuple = (KernelKind.RBF, KernelKind.Polynomial)

    def __post_init__(self):
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        object.__setattr__(self, "gamma_values", tuple(float(g) for g in self.gamma_values))
        object.__setattr__(self, "kernels", tuple(KernelKind.parse(k) for k in self.kernels))
        if not (self.c_values and self.gamma_values and self.kernels):
            raise InvalidArgumentError("grid lists must be non-empty")
        if min(self.c_values) <= 0 or min(self.gamma_values) <= 0:
            raise InvalidArgumentError("C and gamma values must be positive")

    def combinations(self):
        return [(c, g, k) for k in self.kernels for g in self.gamma_values for c in self.c_values]

    def __len__(self):
        return len(self.c_values) * len(self.gamma_values) * len(self.kernels)


def combo_sort_key(combo, mean_accuracy):
    """Value-based preference: accuracy desc, then C asc, gamma asc, RBF first."""
    c, g, k = combo
    return (-mean_accuracy, c, g, _KERNEL_ORDER[KernelKind.parse(k)])


@dataclass
class CvResult:
    fold_accuracies: dict
    mean_accuracy: dict
    fit_seconds: dict
    errors: dict
    best_combination: tuple
    k: int
    n_models_trained: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def best_accuracy(self):
        return self.mean_accuracy[self.best_combination]

    def ranked(self):
        return sorted(self.mean_accuracy, key=lambda cb: combo_sort_key(cb, self.mean_accuracy[cb]))


def stratified_kfold(ds_or_labels, k: int = 5, seed=0):
    """``k`` (train, validation) index pairs; per-class fold sizes differ by at most one."""
    labels = getattr(ds_or_labels, "labels", ds_or_labels)
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise InvalidArgumentError("k must be >= 2")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for code in np.unique(labels):
        members = np.flatnonzero(labels == code)
        if members.size < k:
            raise InvalidArgumentError(
                f"class {int(code)} has {members.size} windows, fewer than k={k} folds"
            )
        perm = rng.permutation(members)
        # rotate which folds receive the extra window so totals stay balanced
        order = (np.arange(k) + offset) % k
        for chunk, f in zip(np.array_split(perm, k), order):
            fold_of[chunk] = f
        offset += members.size % k
    folds = []
    for f in range(k):
        val = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append((train, val))
    return folds


class _FoldGram:
    """Squared distances and inner products of one fold's training rows, shared by all grid points."""

    def __init__(self, X):
        self.inner = X @ X.T
        self.inner = 0.5 * (self.inner + self.inner.T)
        sq = np.einsum("ij,ij->i", X, X)
        self.dist = sq[:, None] + sq[None, :] - 2.0 * self.inner
        np.maximum(self.dist, 0.0, out=self.dist)
        np.fill_diagonal(self.dist, 0.0)

    def kernel(self, spec: KernelSpec):
        if spec.kind is KernelKind.RBF:
            return np.exp(-spec.gamma * self.dist)
        return (spec.gamma * self.inner + spec.coef0) ** spec.degree


def grid_search(
    ds,
    grid: HyperGrid = HyperGrid(),
    k: int = 5,
    settings: SmoSettings = SmoSettings(),
    seed=0,
    *,
    scaling: str = "full_scale",
    threads=None,
    progress=None,
) -> CvResult:
    ds.require_all_classes()
    folds = stratified_kfold(ds, k, seed)
    combos = grid.combinations()

    def run_fold(fold_index):
        train_idx, val_idx = folds[fold_index]
        train = ds.subset(train_idx)
        scaler = FeatureScaling.fit(scaling, train.X)
        fg = _FoldGram(scaler.transform(train.X))
        out = {}
        for c, g, kind in combos:
            spec = KernelSpec(kind, g)
            t0 = time.perf_counter()
            try:
                model = train_one_vs_one(
                    train, c, spec, settings, seed, scaling=scaler, gram_matrix=fg.kernel(spec), threads=1
                )
                pred = predict_classes(model, ds.X[val_idx])
                acc = float(np.mean(pred == ds.labels[val_idx]))
                err = ""
            except (ConvergenceError, FloatingPointError, OverflowError) as exc:
                acc, err = 0.0, f"{type(exc).__name__}: {exc}"
            out[(c, g, kind.value)] = (acc, time.perf_counter() - t0, err)
            if progress is not None:
                progress(fold_index, (c, g, kind.value), acc)
        return out

    per_fold = pmap(run_fold, range(k), threads=threads)

    fold_acc, mean_acc, secs, errors = {}, {}, {}, {}
    for c, g, kind in combos:
        key = (c, g, kind.value)
        accs = [per_fold[f][key][0] for f in range(k)]
        fold_acc[key] = accs
        mean_acc[key] = float(sum(accs) / k)
        secs[key] = [per_fold[f][key][1] for f in range(k)]
        errors[key] = [per_fold[f][key][2] for f in range(k)]
    best = min(mean_acc, key=lambda cb: combo_sort_key(cb, mean_acc[cb]))
    return CvResult(
        fold_acc, mean_acc, secs, errors, best, k,
        n_models_trained=k * len(combos),
        meta={"seed": seed, "k": k, "scaling": scaling, "smo": settings.as_dict()},
    )


def _num(v):
    return repr(float(v))


def dumps_cv(result: CvResult, config: Optional[dict] = None, include_timings: bool = False) -> str:
    """Tabular export: one ``fold`` record per (C, gamma, kernel, fold), then ``mean`` and ``best`` records.

    Wall times are left out unless requested so that reruns give identical files.
    """
    out = io.StringIO()
    header = dict(result.meta)
    if config:
        header["config"] = config
    out.write(f"# {CV_FORMAT} " + json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
    cols = ["record", "c", "gamma", "kernel", "fold", "accuracy", "note"]
    if include_timings:
        cols.append("fit_seconds")
    out.write(",".join(cols) + "\n")
    for key in result.ranked():
        c, g, kind = key
        for f, acc in enumerate(result.fold_accuracies[key]):
            note = result.errors[key][f].replace(",", ";").replace("\n", " ")
            row = ["fold", _num(c), _num(g), kind, str(f), _num(acc), note]
            if include_timings:
                row.append(f"{result.fit_seconds[key][f]:.3f}")
            out.write(",".join(row) + "\n")
    for key in result.ranked():
        c, g, kind = key
        row = ["mean", _num(c), _num(g), kind, "", _num(result.mean_accuracy[key]), ""]
        if include_timings:
            row.append(f"{sum(result.fit_seconds[key]):.3f}")
        out.write(",".join(row) + "\n")
    c, g, kind = result.best_combination
    row = ["best", _num(c), _num(g), kind, "", _num(result.best_accuracy), ""]
    if include_timings:
        row.append("")
    out.write(",".join(row) + "\n")
    return out.getvalue()


def loads_cv(text: str, path=None) -> CvResult:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(f"# {CV_FORMAT}"):
        raise ParseError(f"missing '{CV_FORMAT}' header", 1, path)
    try:
        meta = json.loads(lines[0][len(f"# {CV_FORMAT}"):].strip() or "{}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header metadata: {exc}", 1, path) from exc
    if len(lines) < 2:
        raise ParseError("missing column header", 2, path)
    cols = lines[1].split(",")
    fold_acc, mean_acc, errors = {}, {}, {}
    best = None
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        rec = dict(zip(cols, line.split(",")))
        try:
            key = (float(rec["c"]), float(rec["gamma"]), rec["kernel"])
            acc = float(rec["accuracy"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad CV record: {exc}", lineno, path) from None
        if rec["record"] == "fold":
            fold_acc.setdefault(key, []).append(acc)
            errors.setdefault(key, []).append(rec.get("note", ""))
        elif rec["record"] == "mean":
            mean_acc[key] = acc
        elif rec["record"] == "best":
            best = key
        else:
            raise ParseError(f"unknown record type {rec['record']!r}", lineno, path)
    if best is None:
        raise ParseError("no 'best' record", None, path)
    k = int(meta.get("k", len(next(iter(fold_acc.values()), []))))
    secs = {key: [0.0] * len(v) for key, v in fold_acc.items()}
    return CvResult(fold_acc, mean_acc, secs, errors, best, k, k * len(mean_acc), meta)
