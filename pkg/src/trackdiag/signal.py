"""Received RMS voltage traces and the nominal track-circuit model.

A trace is sampled at 1 Hz: sample ``i`` belongs to ``start_time + i``.
The track reads as occupied while the voltage sits strictly below the
occupancy threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from trackdiag.errors import InvalidArgumentError

MAX_VOLTAGE = 40.0


@dataclass(frozen=True)
class VoltageTrace:
    samples: np.ndarray
    start_time: int = 0
    circuit_id: str = ""

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise InvalidArgumentError("trace must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("trace samples must be finite")
        if arr.min() < 0.0 or arr.max() > MAX_VOLTAGE:
            raise InvalidArgumentError(
                f"trace samples must lie in [0, {MAX_VOLTAGE}] V, "
                f"got [{arr.min():.3f}, {arr.max():.3f}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "start_time", int(self.start_time))
        object.__setattr__(self, "circuit_id", str(self.circuit_id))

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, VoltageTrace):
            return NotImplemented
        return (
            self.start_time == other.start_time
            and self.circuit_id == other.circuit_id
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    @property
    def end_time(self):
        """Timestamp one past the last sample."""
        return self.start_time + len(self)

    def timestamps(self):
        return self.start_time + np.arange(len(self), dtype=np.int64)


@dataclass(frozen=True)
class TrackCircuitConfig:
    base_voltage: float = 20.0
    occupancy_threshold: float = 17.0
    nominal_noise_halfband: float = 0.25

    def __post_init__(self):
        if not 19.0 <= self.base_voltage <= 21.0:
            raise InvalidArgumentError(
                f"base_voltage must lie in [19, 21] V, got {self.base_voltage}"
            )
        if self.nominal_noise_halfband < 0:
            raise InvalidArgumentError("nominal_noise_halfband must be >= 0")
        if not self.occupancy_threshold < self.base_voltage - self.nominal_noise_halfband:
            raise InvalidArgumentError(
                "occupancy_threshold must sit below the nominal noise band"
            )


@dataclass(frozen=True, order=True)
class OccupancyEvent:
    """Half-open index range ``[start_index, end_index)``."""

    start_index: int
    end_index: int

    def __post_init__(self):
        object.__setattr__(self, "start_index", int(self.start_index))
        object.__setattr__(self, "end_index", int(self.end_index))
        if self.start_index < 0 or self.start_index >= self.end_index:
            raise InvalidArgumentError(
                f"invalid occupancy [{self.start_index}, {self.end_index})"
            )

    @property
    def duration(self):
        return self.end_index - self.start_index


def check_occupancies(occupancies: Iterable[OccupancyEvent], duration_s: int):
    """Validate range and pairwise disjointness; return them sorted."""
    occs = sorted(occupancies)
    prev_end = 0
    for occ in occs:
        if occ.end_index > duration_s:
            raise InvalidArgumentError(
                f"occupancy [{occ.start_index}, {occ.end_index}) exceeds duration {duration_s}"
            )
        if occ.start_index < prev_end:
            raise InvalidArgumentError("occupancy events overlap")
        prev_end = occ.end_index
    return occs


def check_duration(duration_s):
    if int(duration_s) != duration_s or duration_s <= 0:
        raise InvalidArgumentError(f"duration_s must be a positive integer, got {duration_s}")
    return int(duration_s)


def nominal_samples(config: TrackCircuitConfig, duration_s: int, rng: np.random.Generator):
    h = config.nominal_noise_halfband
    return config.base_voltage + rng.uniform(-h, h, size=duration_s)


def gen_nominal_trace(
    config: TrackCircuitConfig,
    duration_s: int,
    occupancies: Sequence[OccupancyEvent] = (),
    seed=None,
    *,
    start_time: int = 0,
    circuit_id: str = "",
) -> VoltageTrace:
    """Steady baseline with uniform noise; train passes pull the voltage to 0."""
    duration_s = check_duration(duration_s)
    occs = check_occupancies(occupancies, duration_s)
    rng = np.random.default_rng(seed)
    samples = nominal_samples(config, duration_s, rng)
    for occ in occs:
        samples[occ.start_index:occ.end_index] = 0.0
    return VoltageTrace(samples, start_time=start_time, circuit_id=circuit_id)


def below_threshold_runs(values: np.ndarray, threshold: float):
    """(starts, ends) of maximal runs where ``values < threshold``."""
    below = np.asarray(values) < threshold
    padded = np.concatenate(([False], below, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return edges[0::2], edges[1::2]


def detect_occupancies(trace: VoltageTrace, threshold: float = 17.0) -> list[OccupancyEvent]:
    starts, ends = below_threshold_runs(trace.samples, threshold)
    return [OccupancyEvent(s, e) for s, e in zip(starts.tolist(), ends.tolist())]


def write_trace_csv(trace: VoltageTrace, path_or_file):
    """Write ``timestamp_s,voltage_v`` rows, voltages with full precision."""
    lines = ["timestamp_s,voltage_v"]
    t0 = trace.start_time
    lines.extend(f"{t0 + i},{_fmt_voltage(v)}" for i, v in enumerate(trace.samples.tolist()))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fmt_voltage(v: float) -> str:
    # shortest round-tripping positional form, at least 3 fractional digits
    s = np.format_float_positional(float(v), unique=True, trim="0")
    whole, _, frac = s.partition(".")
    return f"{whole}.{frac.ljust(3, '0')}"
