"""Fixed-width labelled windows, corpus construction, splitting and persistence."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from trackdiag._version import __version__
from trackdiag.errors import InvalidArgumentError, ParseError
from trackdiag.generator import AnomalyClass, SeverityProfile, generate_window
from trackdiag.signal import TrackCircuitConfig, VoltageTrace

WINDOW_WIDTH = 600
FORMAT_VERSION = "trackdiag-dataset/1"


@dataclass(frozen=True, eq=False)
class Window:
    values: np.ndarray
    label: Optional[AnomalyClass] = None
    origin: tuple = ("", 0)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise InvalidArgumentError("window values must be finite and non-empty")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.label is not None:
            object.__setattr__(self, "label", AnomalyClass(self.label))

    def __len__(self):
        return self.values.size

    @property
    def start_time(self):
        return self.origin[1]


class LabeledDataset:
    """Windows stored row-wise in ``X`` with integer class codes in ``labels``."""

    def __init__(self, X, labels, origins=None, meta=None):
        X = np.array(X, dtype=np.float64, ndmin=2)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if X.shape[0] != labels.size:
            raise InvalidArgumentError("one label per window required")
        if labels.size and (labels.min() < 0 or labels.max() > 2):
            raise InvalidArgumentError("labels must be class codes 0, 1 or 2")
        if not np.all(np.isfinite(X)):
            raise InvalidArgumentError("window values must be finite")
        X.setflags(write=False)
        labels.setflags(write=False)
        self.X = X
        self.labels = labels
        self.origins = list(origins) if origins is not None else [("", 0)] * labels.size
        self.meta = dict(meta or {})

    @classmethod
    def from_windows(cls, windows: Sequence[Window], meta=None):
        if any(w.label is None for w in windows):
            raise InvalidArgumentError("every window in a labelled dataset needs a label")
        if not windows:
            raise InvalidArgumentError("empty dataset")
        return cls(
            np.stack([w.values for w in windows]),
            [int(w.label) for w in windows],
            [w.origin for w in windows],
            meta,
        )

    def __len__(self):
        return self.labels.size

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.labels, other.labels)

    __hash__ = None

    @property
    def width(self):
        return self.X.shape[1]

    @property
    def class_counts(self):
        counts = np.bincount(self.labels, minlength=3)
        return {AnomalyClass(k): int(counts[k]) for k in range(3)}

    @property
    def windows(self):
        return [
            Window(self.X[k], AnomalyClass(int(self.labels[k])), self.origins[k])
            for k in range(len(self))
        ]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.X[idx], self.labels[idx], [self.origins[k] for k in idx.tolist()], self.meta
        )

    def require_all_classes(self):
        missing = [c.name for c, n in self.class_counts.items() if n == 0]
        if missing:
            raise InvalidArgumentError(f"dataset lacks classes: {', '.join(missing)}")


def window_trace(trace: VoltageTrace, width: int = WINDOW_WIDTH, stride: int = WINDOW_WIDTH) -> list[Window]:
    """Cut ``trace`` into windows starting every ``stride`` samples; drop the remainder."""
    if stride <= 0 or int(stride) != stride:
        raise InvalidArgumentError(f"stride must be a positive integer, got {stride}")
    if width <= 0 or int(width) != width:
        raise InvalidArgumentError(f"width must be a positive integer, got {width}")
    n = len(trace)
    if width > n:
        return []
    starts = range(0, n - width + 1, stride)
    return [
        Window(trace.samples[s:s + width], None, (trace.circuit_id, trace.start_time + s))
        for s in starts
    ]


def window_matrix(samples: np.ndarray, width: int = WINDOW_WIDTH, stride: int = WINDOW_WIDTH):
    """Strided view of all complete windows as a 2-D array (no copy)."""
    n = samples.size
    if width > n:
        return np.empty((0, width))
    count = (n - width) // stride + 1
    return np.lib.stride_tricks.as_strided(
        samples, shape=(count, width), strides=(samples.strides[0] * stride, samples.strides[0]),
        writeable=False,
    )


def sample_seed(master_seed, anomaly: AnomalyClass, index: int) -> np.random.SeedSequence:
    """Per-window seed: stable function of (master seed, class, index)."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(anomaly), int(index)))


def build_training_corpus(
    config: TrackCircuitConfig = TrackCircuitConfig(),
    severity: SeverityProfile = SeverityProfile(),
    per_class: int = 2800,
    seed: int = 0,
    width: int = WINDOW_WIDTH,
) -> LabeledDataset:
    if per_class < 1 or int(per_class) != per_class:
        raise InvalidArgumentError("per_class must be a positive integer")
    X = np.empty((3 * per_class, width))
    labels = np.empty(3 * per_class, dtype=np.int64)
    origins = []
    row = 0
    for anomaly in AnomalyClass:
        for k in range(per_class):
            trace, _ = generate_window(anomaly, config, severity, width, sample_seed(seed, anomaly, k))
            X[row] = trace.samples
            labels[row] = int(anomaly)
            origins.append((f"synthetic:{anomaly.slug}:{k}", 0))
            row += 1
    meta = {
        "format": FORMAT_VERSION,
        "tool_version": __version__,
        "seed": int(seed),
        "per_class": int(per_class),
        "config": {
            "base_voltage": config.base_voltage,
            "occupancy_threshold": config.occupancy_threshold,
            "nominal_noise_halfband": config.nominal_noise_halfband,
        },
        "severity": severity.as_dict(),
    }
    return LabeledDataset(X, labels, origins, meta)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidArgumentError("train_fraction must lie strictly between 0 and 1")


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split_indices(ds: LabeledDataset, spec: SplitSpec = SplitSpec()):
    """Sorted (train, test) index arrays."""
    if len(ds) == 0:
        raise InvalidArgumentError("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    train = []
    if spec.stratified:
        for code in range(3):
            members = np.flatnonzero(ds.labels == code)
            if members.size == 0:
                continue
            if members.size < 2:
                raise InvalidArgumentError(
                    f"class {AnomalyClass(code).name} has {members.size} window(s); "
                    "stratified splitting needs at least 2"
                )
            n_train = min(max(_round_half_up(spec.train_fraction * members.size), 1), members.size - 1)
            train.append(rng.permutation(members)[:n_train])
    else:
        n_train = _round_half_up(spec.train_fraction * len(ds))
        train.append(rng.permutation(len(ds))[:n_train])
    train_idx = np.sort(np.concatenate(train))
    mask = np.ones(len(ds), dtype=bool)
    mask[train_idx] = False
    return train_idx, np.flatnonzero(mask)


def split_dataset(ds: LabeledDataset, spec: SplitSpec = SplitSpec()):
    train_idx, test_idx = split_indices(ds, spec)
    return ds.subset(train_idx), ds.subset(test_idx)


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps_dataset(ds: LabeledDataset) -> str:
    out = io.StringIO()
    if ds.meta:
        out.write("# " + json.dumps(ds.meta, sort_keys=True, separators=(",", ":")) + "\n")
    out.write("label," + ",".join(f"v{k}" for k in range(ds.width)) + "\n")
    for label, row in zip(ds.labels.tolist(), ds.X.tolist()):
        out.write(f"{label}," + ",".join(map(_fmt, row)) + "\n")
    return out.getvalue()


def save_dataset(ds: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_dataset(ds))


def loads_dataset(text: str, width: Optional[int] = WINDOW_WIDTH, path=None) -> LabeledDataset:
    meta = {}
    header = None
    rows = []
    labels = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if header is None and not meta:
                body = line[1:].strip()
                try:
                    meta = json.loads(body) if body.startswith("{") else {}
                except json.JSONDecodeError as exc:
                    raise ParseError(f"bad metadata comment: {exc}", lineno, path) from exc
            continue
        fields = line.rstrip("\r").split(",")
        if header is None:
            if fields[0] != "label" or any(f != f"v{k}" for k, f in enumerate(fields[1:])):
                raise ParseError("expected header 'label,v0,v1,...'", lineno, path)
            header = len(fields) - 1
            if header < 1:
                raise ParseError("header declares no value columns", lineno, path)
            if width is not None and header != width:
                raise ParseError(f"header declares {header} values, expected {width}", lineno, path)
            continue
        if len(fields) - 1 != header:
            raise ParseError(f"row has {len(fields) - 1} values, expected {header}", lineno, path)
        try:
            label = int(fields[0])
        except ValueError:
            raise ParseError(f"label {fields[0]!r} is not an integer", lineno, path) from None
        if label not in (0, 1, 2):
            raise ParseError(f"label code {label} outside {{0, 1, 2}}", lineno, path)
        try:
            values = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise ParseError(f"bad voltage value: {exc}", lineno, path) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite voltage value", lineno, path)
        labels.append(label)
        rows.append(values)
    if header is None:
        raise ParseError("missing header line (empty file?)", 1, path)
    if not rows:
        raise ParseError("dataset contains no windows", None, path)
    return LabeledDataset(np.array(rows), labels, meta=meta)


def load_dataset(path, width: Optional[int] = WINDOW_WIDTH) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_dataset(text, width, path=str(path))
