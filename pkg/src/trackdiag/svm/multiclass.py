"""One-vs-one combination of pairwise SVMs with majority voting."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from trackdiag.errors import InvalidArgumentError
from trackdiag.generator import AnomalyClass
from trackdiag.parallel import pmap
from trackdiag.svm.kernels import KernelSpec
from trackdiag.svm.smo import SmoSettings, decision_values, train_binary_smo

CLASS_PAIRS = tuple(itertools.combinations(range(3), 2))

# volts are divided by the sanity bound of the trace model
FULL_SCALE_V = 40.0


@dataclass(frozen=True, eq=False)
class FeatureScaling:
    """Affine input map ``(x - offset) / scale`` applied before every kernel.

    ``full_scale`` divides by a fixed reference voltage and needs no fitting;
    ``standardize`` learns per-feature mean and deviation from training data.
    """

    kind: str = "full_scale"
    offset: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None

    @classmethod
    def fit(cls, kind: str, X=None):
        if kind == "none":
            return cls("none")
        if kind == "full_scale":
            return cls("full_scale", None, np.array([FULL_SCALE_V]))
        if kind == "standardize":
            X = np.asarray(X, dtype=np.float64)
            sd = X.std(axis=0)
            sd[sd == 0] = 1.0
            return cls("standardize", X.mean(axis=0), sd)
        raise InvalidArgumentError(f"unknown scaling {kind!r}")

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.kind == "none":
            return X
        out = X - self.offset if self.offset is not None else X
        return out / self.scale

    def as_dict(self):
        return {
            "kind": self.kind,
            "offset": None if self.offset is None else self.offset.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        off = d.get("offset")
        sc = d.get("scale")
        return cls(
            d["kind"],
            None if off is None else np.asarray(off, dtype=np.float64),
            None if sc is None else np.asarray(sc, dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class MulticlassSvmModel:
    binary_models: tuple
    classes: tuple = tuple(AnomalyClass)
    scaling: FeatureScaling = field(default_factory=lambda: FeatureScaling.fit("full_scale"))
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        models = tuple(self.binary_models)
        pairs = [m.class_pair for m in models]
        if sorted(pairs) != list(CLASS_PAIRS):
            raise InvalidArgumentError(f"need one binary model per class pair, got {pairs}")
        first = models[0]
        for m in models[1:]:
            if m.kernel != first.kernel or m.c != first.c:
                raise InvalidArgumentError("pairwise models must share kernel and C")
        object.__setattr__(self, "binary_models", tuple(sorted(models, key=lambda m: m.class_pair)))
        object.__setattr__(self, "classes", tuple(AnomalyClass(c) for c in self.classes))

    @property
    def kernel(self) -> KernelSpec:
        return self.binary_models[0].kernel

    @property
    def c(self) -> float:
        return self.binary_models[0].c

    @property
    def n_features(self):
        return self.binary_models[0].n_features


def _pair_data(X, labels, pair):
    neg, pos = pair
    idx = np.flatnonzero((labels == neg) | (labels == pos))
    y = np.where(labels[idx] == pos, 1.0, -1.0)
    return idx, y


def train_one_vs_one(
    ds,
    c: float,
    kernel: KernelSpec,
    settings: SmoSettings = SmoSettings(),
    seed=None,
    *,
    scaling="full_scale",
    gram_matrix=None,
    threads=None,
) -> MulticlassSvmModel:
    """Fit the three pairwise SVMs.

    ``gram_matrix`` may hold the kernel over all (scaled) rows of ``ds`` to
    skip recomputation; pair problems then slice it.
    """
    ds.require_all_classes()
    scaler = scaling if isinstance(scaling, FeatureScaling) else FeatureScaling.fit(scaling, ds.X)
    X = scaler.transform(ds.X)
    labels = ds.labels

    def fit(pair):
        idx, y = _pair_data(X, labels, pair)
        K = None if gram_matrix is None else gram_matrix[np.ix_(idx, idx)]
        return train_binary_smo(X[idx], y, c, kernel, settings, seed, class_pair=pair, K=K)

    models = pmap(fit, CLASS_PAIRS, threads=threads)
    meta = {
        "c": float(c),
        "kernel": kernel.as_dict(),
        "seed": seed,
        "n_train": int(len(ds)),
        "class_counts": {c_.slug: n for c_, n in ds.class_counts.items()},
        "smo": settings.as_dict(),
    }
    if "seed" in ds.meta:
        meta["corpus_seed"] = ds.meta["seed"]
    return MulticlassSvmModel(tuple(models), scaling=scaler, training_meta=meta)


def pair_decisions(model: MulticlassSvmModel, X) -> np.ndarray:
    """Decision values, one column per class pair in ``CLASS_PAIRS`` order."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise InvalidArgumentError(f"expected {model.n_features} features, got {X.shape[1]}")
    Z = model.scaling.transform(X)
    return np.column_stack([decision_values(m, Z) for m in model.binary_models])


def vote(decisions: np.ndarray):
    """Resolve pairwise decisions to class codes.

    Majority vote; ties go to the largest summed |decision| over the votes a
    class won, then to the lowest class code. Returns ``(classes, votes)``.
    """
    D = np.atleast_2d(decisions)
    n = D.shape[0]
    votes = np.zeros((n, 3), dtype=np.int64)
    strength = np.zeros((n, 3))
    rows = np.arange(n)
    for col, (neg, pos) in enumerate(CLASS_PAIRS):
        winner = np.where(D[:, col] > 0, pos, neg)
        np.add.at(votes, (rows, winner), 1)
        np.add.at(strength, (rows, winner), np.abs(D[:, col]))
    top = votes == votes.max(axis=1, keepdims=True)
    masked = np.where(top, strength, -np.inf)
    best = masked == masked.max(axis=1, keepdims=True)
    return np.argmax(best, axis=1), votes


def predict_classes(model: MulticlassSvmModel, X) -> np.ndarray:
    classes, _ = vote(pair_decisions(model, X))
    return classes


def predict_class(model: MulticlassSvmModel, x) -> AnomalyClass:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return AnomalyClass(int(predict_classes(model, x)[0]))
