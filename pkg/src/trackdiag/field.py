"""Field voltage logs: ingestion, nominal screening, classification, episodes."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from trackdiag.dataset import WINDOW_WIDTH, window_matrix
from trackdiag.errors import InvalidArgumentError, ParseError
from trackdiag.generator import AnomalyClass
from trackdiag.signal import MAX_VOLTAGE, TrackCircuitConfig, VoltageTrace
from trackdiag.svm.io import model_fingerprint
from trackdiag.svm.multiclass import MulticlassSvmModel, pair_decisions, vote

MAX_FILLED_GAP_S = 5
NOMINAL_BAND_V = 0.5
# classifier view starts this long before the onset of a window's anomaly
ONSET_LEAD_S = 150
NOMINAL = "nominal"
SUSPECT = "suspect"


@dataclass(frozen=True)
class FieldRecord:
    timestamp_s: int
    voltage_v: float

    def __post_init__(self):
        if not (0.0 <= self.voltage_v <= MAX_VOLTAGE):
            raise InvalidArgumentError(f"voltage {self.voltage_v} outside [0, {MAX_VOLTAGE}] V")


def read_field_records(text: str, path=None):
    """Parse trace-CSV text into ``(timestamps, voltages)`` arrays."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty file", 1, path)
    if lines[0].strip().replace(" ", "") != "timestamp_s,voltage_v":
        raise ParseError("expected header 'timestamp_s,voltage_v'", 1, path)
    ts = []
    vs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", lineno, path)
        try:
            t = int(parts[0])
            v = float(parts[1])
        except ValueError:
            raise ParseError(f"malformed row {line!r}", lineno, path) from None
        if not np.isfinite(v) or not 0.0 <= v <= MAX_VOLTAGE:
            raise ParseError(f"voltage {parts[1].strip()} outside [0, {MAX_VOLTAGE}] V", lineno, path)
        if ts and t <= ts[-1]:
            raise ParseError(f"timestamp {t} does not increase (previous {ts[-1]})", lineno, path)
        ts.append(t)
        vs.append(v)
    if not ts:
        raise ParseError("file has no data rows", 2, path)
    return np.asarray(ts, dtype=np.int64), np.asarray(vs, dtype=np.float64)


def assemble_segments(timestamps, voltages, circuit_id="", max_fill_s: int = MAX_FILLED_GAP_S):
    """Forward-fill gaps of up to ``max_fill_s`` seconds; split at longer gaps."""
    timestamps = np.asarray(timestamps, dtype=np.int64)
    voltages = np.asarray(voltages, dtype=np.float64)
    deltas = np.diff(timestamps)
    if np.any(deltas <= 0):
        raise InvalidArgumentError("timestamps must be strictly increasing")
    cuts = np.flatnonzero(deltas > max_fill_s) + 1
    segments = []
    for ts, vs in zip(np.split(timestamps, cuts), np.split(voltages, cuts)):
        # each sample holds until the next timestamp
        hold = np.diff(np.append(ts, ts[-1] + 1))
        segments.append(VoltageTrace(np.repeat(vs, hold), start_time=int(ts[0]), circuit_id=circuit_id))
    return segments


def parse_field_csv(path, circuit_id: Optional[str] = None, max_fill_s: int = MAX_FILLED_GAP_S):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    ts, vs = read_field_records(text, path=str(path))
    if circuit_id is None:
        import os

        circuit_id = os.path.splitext(os.path.basename(str(path)))[0]
    return assemble_segments(ts, vs, circuit_id, max_fill_s)


def estimate_base_voltage(trace: VoltageTrace, threshold: float = 17.0) -> float:
    """Median free-track level, clipped to the admissible [19, 21] V range."""
    free = trace.samples[trace.samples >= threshold]
    if free.size == 0:
        return 20.0
    return float(np.clip(np.median(free), 19.0, 21.0))


def gate_mask(X, config: TrackCircuitConfig, band: float = NOMINAL_BAND_V) -> np.ndarray:
    """True for rows of ``X`` that look nominal.

    A sample is acceptable if it lies within ``band`` of the base voltage or
    belongs to a 0 V train-occupancy run. Occupancy runs may touch the window
    edges and a window may hold several train passes.
    """
    X = np.atleast_2d(X)
    ok = (np.abs(X - config.base_voltage) <= band) | (X == 0.0)
    return ok.all(axis=1)


def off_nominal(samples, config: TrackCircuitConfig, band: float = NOMINAL_BAND_V) -> np.ndarray:
    return (np.abs(samples - config.base_voltage) > band) & (samples != 0.0)


def onset_views(samples, window_starts, config, width=WINDOW_WIDTH, band=NOMINAL_BAND_V, lead=ONSET_LEAD_S):
    """Start index of the classifier view for each suspect window.

    The view begins ``lead`` samples before the start of the off-nominal run
    holding the window's first off-nominal sample, so an anomaly that began
    in an earlier window (a persisting drop) or straddles a window edge is
    seen with its full signature.
    """
    off = off_nominal(samples, config, band)
    idx = np.arange(samples.size)
    rising = off & ~np.concatenate(([False], off[:-1]))
    run_start = np.maximum.accumulate(np.where(rising, idx, 0))
    first_off = np.empty(len(window_starts), dtype=np.int64)
    for k, s in enumerate(window_starts):
        hits = np.flatnonzero(off[s:s + width])
        first_off[k] = s + hits[0] if hits.size else s
    onset = run_start[first_off]
    return np.clip(onset - lead, 0, samples.size - width)


def nominal_gate(window, config: TrackCircuitConfig, band: float = NOMINAL_BAND_V) -> str:
    values = getattr(window, "values", window)
    return NOMINAL if gate_mask(np.asarray(values, dtype=np.float64), config, band)[0] else SUSPECT


@dataclass(frozen=True)
class WindowVerdict:
    start_time: int
    verdict: Union[str, AnomalyClass]
    votes: tuple = ()

    @property
    def anomalous(self):
        return isinstance(self.verdict, AnomalyClass)

    @property
    def label(self):
        return self.verdict.slug if self.anomalous else self.verdict


@dataclass(frozen=True)
class Episode:
    start_time: int
    end_time: int
    anomaly: AnomalyClass
    window_votes: tuple

    @property
    def n_windows(self):
        return sum(self.window_votes)

    def overlaps(self, start, end):
        return self.start_time < end and start < self.end_time


@dataclass
class DiagnosisReport:
    circuit_id: str
    windows: list
    episodes: list
    model_fingerprint: str = ""
    start_time: int = 0
    end_time: int = 0
    notes: list = field(default_factory=list)


def merge_episodes(verdicts, width: int, stride: int):
    """Join runs of consecutive anomalous windows; majority class, ties to the earliest."""
    episodes = []
    run = []

    def close():
        if not run:
            return
        counts = [0, 0, 0]
        for v in run:
            counts[int(v.verdict)] += 1
        top = max(counts)
        tied = {k for k in range(3) if counts[k] == top}
        winner = next(int(v.verdict) for v in run if int(v.verdict) in tied)
        episodes.append(
            Episode(run[0].start_time, run[-1].start_time + width, AnomalyClass(winner), tuple(counts))
        )
        run.clear()

    for v in verdicts:
        if v.anomalous and (not run or v.start_time - run[-1].start_time == stride):
            run.append(v)
        elif v.anomalous:
            close()
            run.append(v)
        else:
            close()
    close()
    return episodes


def classify_trace(
    trace: VoltageTrace,
    model: MulticlassSvmModel,
    config: TrackCircuitConfig = TrackCircuitConfig(),
    stride: int = WINDOW_WIDTH,
    *,
    width: int = WINDOW_WIDTH,
    band: float = NOMINAL_BAND_V,
    anchor: str = "onset",
) -> DiagnosisReport:
    """Gate every window, classify the suspect ones, merge into episodes.

    With ``anchor="onset"`` a suspect window is classified from a view
    aligned to the onset of its anomaly (see :func:`onset_views`);
    ``anchor="window"`` classifies the window samples as they are.
    """
    if anchor not in ("onset", "window"):
        raise InvalidArgumentError(f"unknown anchor mode {anchor!r}")
    if len(trace) < width:
        raise InvalidArgumentError(f"trace of {len(trace)} s is shorter than one {width} s window")
    if stride <= 0:
        raise InvalidArgumentError("stride must be positive")
    W = window_matrix(trace.samples, width, stride)
    starts = trace.start_time + stride * np.arange(W.shape[0])
    nominal = gate_mask(W, config, band)
    suspect = np.flatnonzero(~nominal)
    classes = np.empty(0, dtype=np.int64)
    votes = np.empty((0, 3), dtype=np.int64)
    if suspect.size:
        views = W[suspect]
        if anchor == "onset":
            begin = onset_views(trace.samples, stride * suspect, config, width, band)
            views = np.stack([trace.samples[b:b + width] for b in begin.tolist()])
        classes, votes = vote(pair_decisions(model, views))
    verdicts = [WindowVerdict(int(t), NOMINAL) for t in starts.tolist()]
    for k, idx in enumerate(suspect.tolist()):
        verdicts[idx] = WindowVerdict(int(starts[idx]), AnomalyClass(int(classes[k])), tuple(votes[k].tolist()))
    return DiagnosisReport(
        circuit_id=trace.circuit_id,
        windows=verdicts,
        episodes=merge_episodes(verdicts, width, stride),
        model_fingerprint=model_fingerprint(model),
        start_time=trace.start_time,
        end_time=trace.end_time,
    )


def render_diagnosis_text(reports) -> str:
    out = io.StringIO()
    total = sum(len(r.episodes) for r in reports)
    out.write(f"{total} episodes in {len(reports)} segment(s)\n")
    for r in reports:
        n_susp = sum(1 for v in r.windows if v.anomalous)
        out.write(
            f"\nsegment circuit={r.circuit_id or '-'} span=[{r.start_time}, {r.end_time}) "
            f"windows={len(r.windows)} anomalous_windows={n_susp} model={r.model_fingerprint}\n"
        )
        for note in r.notes:
            out.write(f"  note: {note}\n")
        for e in r.episodes:
            votes = "/".join(str(v) for v in e.window_votes)
            out.write(
                f"  episode [{e.start_time}, {e.end_time}) {e.anomaly.slug} "
                f"({e.n_windows} window(s), votes bc/tn/ci={votes})\n"
            )
    return out.getvalue()


def render_diagnosis_delimited(reports) -> str:
    lines = ["episode_start,episode_end,class_name,window_votes"]
    for r in reports:
        for e in r.episodes:
            lines.append(
                f"{e.start_time},{e.end_time},{e.anomaly.slug},{'/'.join(str(v) for v in e.window_votes)}"
            )
    return "\n".join(lines) + "\n"
