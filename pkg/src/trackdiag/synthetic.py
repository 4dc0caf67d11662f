"""Long synthetic field traces with regular train traffic and planted faults.

Used to check that field classification finds faults whose class and time
span are known in advance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trackdiag.errors import InvalidArgumentError
from trackdiag.generator import (
    AnomalyClass,
    BadContactParams,
    ContactInterruptedParams,
    MAX_SQUARE_AMPLITUDE_V,
    MAX_SQUARE_FREQ_HZ,
    MIN_SQUARE_FREQ_HZ,
    SeverityProfile,
    TractionNoiseParams,
    gen_bad_contact,
    gen_contact_interrupted,
    gen_traction_noise,
)
from trackdiag.signal import OccupancyEvent, TrackCircuitConfig, VoltageTrace, nominal_samples

MONTH_S = 30 * 86400


@dataclass(frozen=True)
class PlantedEpisode:
    anomaly: AnomalyClass
    start_index: int
    end_index: int

    def time_span(self, start_time):
        return start_time + self.start_index, start_time + self.end_index


@dataclass(frozen=True)
class TrafficProfile:
    headway_range_s: tuple = (900, 3600)
    occupancy_range_s: tuple = (10, 60)
    # clear track kept around a planted fault
    quiet_margin_s: int = 1200
    bad_contact_duration_range_s: tuple = (300, 1200)
    repair_delay_range_s: tuple = (600, 3600)


def _train_schedule(rng, duration_s, traffic: TrafficProfile):
    occs = []
    t = int(rng.integers(0, traffic.headway_range_s[0]))
    while True:
        length = int(rng.integers(traffic.occupancy_range_s[0], traffic.occupancy_range_s[1], endpoint=True))
        if t + length >= duration_s:
            break
        occs.append((t, t + length))
        t += length + int(rng.integers(traffic.headway_range_s[0], traffic.headway_range_s[1], endpoint=True))
    return occs


def _paste(samples, segment: VoltageTrace, offset, lo, hi):
    samples[offset + lo:offset + hi] = segment.samples[lo:hi]


def synth_field_trace(
    classes,
    duration_s: int = MONTH_S,
    config: TrackCircuitConfig = TrackCircuitConfig(),
    severity: SeverityProfile = SeverityProfile(),
    traffic: TrafficProfile = TrafficProfile(),
    seed=None,
    *,
    start_time: int = 0,
    circuit_id: str = "synthetic",
):
    """Nominal traffic with one planted fault per entry of ``classes``.

    Faults are spread over equal slots of the trace at random offsets; train
    passes are suppressed within ``quiet_margin_s`` of each fault. Returns
    ``(trace, planted)``.
    """
    classes = [AnomalyClass(c) for c in classes]
    rng = np.random.default_rng(seed)
    samples = nominal_samples(config, duration_s, rng)
    slot = duration_s // max(len(classes), 1)
    needed = 2 * traffic.quiet_margin_s + traffic.repair_delay_range_s[1] + 200
    if classes and slot < needed:
        raise InvalidArgumentError(f"trace too short for {len(classes)} planted faults")

    planted = []
    quiet = []
    for k, anomaly in enumerate(classes):
        lo = k * slot + traffic.quiet_margin_s
        hi = (k + 1) * slot - traffic.quiet_margin_s - traffic.repair_delay_range_s[1] - 200
        at = int(rng.integers(lo, hi))
        sub_seed = rng.integers(0, 2**63)
        occ_len = int(rng.integers(*severity.occupancy_duration_range_s, endpoint=True))
        if anomaly is AnomalyClass.BadContact:
            n = int(rng.integers(*traffic.bad_contact_duration_range_s, endpoint=True))
            params = BadContactParams(
                square_freq_hz=float(rng.uniform(MIN_SQUARE_FREQ_HZ, MAX_SQUARE_FREQ_HZ)),
                square_amplitude_v=float(rng.uniform(severity.min_square_amplitude_v, MAX_SQUARE_AMPLITUDE_V)),
                onset_index=0,
                end_index=n,
            )
            seg = gen_bad_contact(config, params, n, sub_seed)
            _paste(samples, seg, at, 0, n)
            planted.append(PlantedEpisode(anomaly, at, at + n))
        elif anomaly is AnomalyClass.TractionNoise:
            rise_len = int(rng.integers(*severity.traction_rise_duration_range_s, endpoint=True))
            params = TractionNoiseParams(
                rise_v=float(rng.uniform(*severity.traction_rise_range_v)),
                rise_duration_s=rise_len,
                occupancy=OccupancyEvent(rise_len, rise_len + occ_len),
            )
            seg = gen_traction_noise(config, params, rise_len + occ_len + 1, sub_seed)
            _paste(samples, seg, at, 0, rise_len + occ_len)
            planted.append(PlantedEpisode(anomaly, at, at + rise_len + occ_len))
        else:
            repair = int(rng.integers(*traffic.repair_delay_range_s, endpoint=True))
            params = ContactInterruptedParams(
                drop_v=float(rng.uniform(*severity.interrupted_drop_range_v)),
                occupancy=OccupancyEvent(0, occ_len),
            )
            seg = gen_contact_interrupted(config, params, occ_len + repair, sub_seed)
            _paste(samples, seg, at, 0, occ_len + repair)
            planted.append(PlantedEpisode(anomaly, at, at + occ_len + repair))
        quiet.append((planted[-1].start_index - traffic.quiet_margin_s, planted[-1].end_index + traffic.quiet_margin_s))

    for s, e in _train_schedule(rng, duration_s, traffic):
        if any(s < qe and qs < e for qs, qe in quiet):
            continue
        samples[s:e] = 0.0
    trace = VoltageTrace(samples, start_time=start_time, circuit_id=circuit_id)
    return trace, planted


def synth_nominal_field_trace(duration_s: int = MONTH_S, config=TrackCircuitConfig(), traffic=TrafficProfile(),
                              seed=None, **kwargs):
    trace, _ = synth_field_trace([], duration_s, config, traffic=traffic, seed=seed, **kwargs)
    return trace
