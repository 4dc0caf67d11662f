"""Labelled synthetic failure traces for the three anomaly categories.

Every generator first draws the nominal noise stream exactly as
:func:`gen_nominal_trace` does, so samples outside the anomaly are
identical to the nominal trace for the same seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from trackdiag.errors import InvalidArgumentError
from trackdiag.signal import (
    OccupancyEvent,
    TrackCircuitConfig,
    VoltageTrace,
    check_duration,
    nominal_samples,
)

MIN_SQUARE_FREQ_HZ = 0.005
MAX_SQUARE_FREQ_HZ = 0.03
MAX_SQUARE_AMPLITUDE_V = 4.0
BAD_CONTACT_NOISE_HALFBAND_V = 0.5
# the drop/rise must stay visible for at least this long after the train leaves
POST_OCCUPANCY_CONTEXT_S = 60


class AnomalyClass(enum.IntEnum):
    BadContact = 0
    TractionNoise = 1
    ContactInterrupted = 2

    @property
    def slug(self):
        return _SLUGS[self]

    @classmethod
    def from_slug(cls, name: str):
        for member, slug in _SLUGS.items():
            if name in (slug, member.name):
                return member
        raise InvalidArgumentError(f"unknown anomaly class {name!r}")


_SLUGS = {
    AnomalyClass.BadContact: "bad_contact",
    AnomalyClass.TractionNoise: "traction_noise",
    AnomalyClass.ContactInterrupted: "contact_interrupted",
}


@dataclass(frozen=True)
class BadContactParams:
    square_freq_hz: float
    square_amplitude_v: float
    onset_index: int
    end_index: int
    noise_halfband_v: float = BAD_CONTACT_NOISE_HALFBAND_V

    def __post_init__(self):
        if not MIN_SQUARE_FREQ_HZ <= self.square_freq_hz <= MAX_SQUARE_FREQ_HZ:
            raise InvalidArgumentError(
                f"square_freq_hz must lie in [{MIN_SQUARE_FREQ_HZ}, {MAX_SQUARE_FREQ_HZ}], "
                f"got {self.square_freq_hz}"
            )
        if not 0.0 <= self.square_amplitude_v <= MAX_SQUARE_AMPLITUDE_V:
            raise InvalidArgumentError(
                f"square_amplitude_v must lie in [0, {MAX_SQUARE_AMPLITUDE_V}]"
            )
        if self.noise_halfband_v < 0:
            raise InvalidArgumentError("noise_halfband_v must be >= 0")
        if not 0 <= self.onset_index < self.end_index:
            raise InvalidArgumentError("need 0 <= onset_index < end_index")

    @property
    def period_s(self):
        return 1.0 / self.square_freq_hz


@dataclass(frozen=True)
class TractionNoiseParams:
    rise_v: float
    rise_duration_s: int
    occupancy: OccupancyEvent

    def __post_init__(self):
        if not self.rise_v > 0:
            raise InvalidArgumentError(f"rise_v must be > 0, got {self.rise_v}")
        if int(self.rise_duration_s) != self.rise_duration_s or self.rise_duration_s <= 0:
            raise InvalidArgumentError("rise_duration_s must be a positive integer")

    @property
    def rise_start(self):
        return self.occupancy.start_index - int(self.rise_duration_s)


@dataclass(frozen=True)
class ContactInterruptedParams:
    drop_v: float
    occupancy: OccupancyEvent

    def __post_init__(self):
        if not self.drop_v > 0:
            raise InvalidArgumentError(f"drop_v must be > 0, got {self.drop_v}")


AnomalyParams = Union[BadContactParams, TractionNoiseParams, ContactInterruptedParams]


def _check_range(name, rng):
    lo, hi = rng
    if lo > hi or lo < 0:
        raise InvalidArgumentError(f"{name} must satisfy 0 <= lower <= upper, got {rng}")


@dataclass(frozen=True)
class SeverityProfile:
    min_square_amplitude_v: float = 1.0
    traction_rise_range_v: tuple = (1.0, 4.0)
    traction_rise_duration_range_s: tuple = (10, 60)
    interrupted_drop_range_v: tuple = (2.0, 6.0)
    occupancy_duration_range_s: tuple = (10, 60)
    bad_contact_duration_range_s: tuple = (300, 600)

    def __post_init__(self):
        if not 0.0 <= self.min_square_amplitude_v <= MAX_SQUARE_AMPLITUDE_V:
            raise InvalidArgumentError("min_square_amplitude_v must lie in [0, 4]")
        for name in (
            "traction_rise_range_v",
            "traction_rise_duration_range_s",
            "interrupted_drop_range_v",
            "occupancy_duration_range_s",
            "bad_contact_duration_range_s",
        ):
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
            _check_range(name, value)
        if self.traction_rise_range_v[0] <= 0 or self.interrupted_drop_range_v[0] <= 0:
            raise InvalidArgumentError("rise and drop ranges must be strictly positive")
        for name in (
            "traction_rise_duration_range_s",
            "occupancy_duration_range_s",
            "bad_contact_duration_range_s",
        ):
            if getattr(self, name)[0] < 1:
                raise InvalidArgumentError(f"{name} must start at >= 1 s")

    def as_dict(self):
        return {
            "min_square_amplitude_v": self.min_square_amplitude_v,
            "traction_rise_range_v": list(self.traction_rise_range_v),
            "traction_rise_duration_range_s": list(self.traction_rise_duration_range_s),
            "interrupted_drop_range_v": list(self.interrupted_drop_range_v),
            "occupancy_duration_range_s": list(self.occupancy_duration_range_s),
            "bad_contact_duration_range_s": list(self.bad_contact_duration_range_s),
        }


def square_wave(n: int, period_s: float, phase_s: float) -> np.ndarray:
    """0/1 square wave, 50% duty: 1 during the second half of each period."""
    t = np.arange(n, dtype=np.float64) + phase_s
    return (np.mod(t, period_s) >= 0.5 * period_s).astype(np.float64)


def _check_occupancy_fits(occ: OccupancyEvent, duration_s: int):
    if occ.end_index > duration_s:
        raise InvalidArgumentError(
            f"occupancy [{occ.start_index}, {occ.end_index}) exceeds duration {duration_s}"
        )


def gen_bad_contact(
    config: TrackCircuitConfig,
    params: BadContactParams,
    duration_s: int,
    seed=None,
    *,
    start_time: int = 0,
    circuit_id: str = "",
) -> VoltageTrace:
    """Square-wave dips below baseline plus wide-band noise over the anomalous interval.

    The interval noise replaces the nominal noise; the square wave phase is
    drawn uniformly over one period.
    """
    duration_s = check_duration(duration_s)
    if params.end_index > duration_s:
        raise InvalidArgumentError(
            f"anomalous interval [{params.onset_index}, {params.end_index}) "
            f"exceeds duration {duration_s}"
        )
    rng = np.random.default_rng(seed)
    samples = nominal_samples(config, duration_s, rng)
    n = params.end_index - params.onset_index
    phase = rng.uniform(0.0, params.period_s)
    h = params.noise_halfband_v
    noise = rng.uniform(-h, h, size=n)
    dips = square_wave(n, params.period_s, phase) * params.square_amplitude_v
    samples[params.onset_index:params.end_index] = np.clip(
        config.base_voltage - dips + noise, 0.0, None
    )
    return VoltageTrace(samples, start_time=start_time, circuit_id=circuit_id)


def gen_traction_noise(
    config: TrackCircuitConfig,
    params: TractionNoiseParams,
    duration_s: int,
    seed=None,
    *,
    start_time: int = 0,
    circuit_id: str = "",
) -> VoltageTrace:
    """Flat voltage pedestal just before a train pass; nominal again afterwards."""
    duration_s = check_duration(duration_s)
    occ = params.occupancy
    _check_occupancy_fits(occ, duration_s)
    if params.rise_start < 0:
        raise InvalidArgumentError("rise interval extends before the start of the trace")
    rng = np.random.default_rng(seed)
    samples = nominal_samples(config, duration_s, rng)
    samples[params.rise_start:occ.start_index] += params.rise_v
    samples[occ.start_index:occ.end_index] = 0.0
    return VoltageTrace(samples, start_time=start_time, circuit_id=circuit_id)


def gen_contact_interrupted(
    config: TrackCircuitConfig,
    params: ContactInterruptedParams,
    duration_s: int,
    seed=None,
    *,
    start_time: int = 0,
    circuit_id: str = "",
) -> VoltageTrace:
    """Train pass followed by a permanent voltage drop to the end of the trace."""
    duration_s = check_duration(duration_s)
    occ = params.occupancy
    if occ.end_index >= duration_s:
        raise InvalidArgumentError("occupancy must end before the last sample")
    rng = np.random.default_rng(seed)
    samples = nominal_samples(config, duration_s, rng)
    samples[occ.start_index:occ.end_index] = 0.0
    samples[occ.end_index:] = np.clip(samples[occ.end_index:] - params.drop_v, 0.0, None)
    return VoltageTrace(samples, start_time=start_time, circuit_id=circuit_id)


def _randint(rng, lo, hi):
    return int(rng.integers(int(lo), int(hi), endpoint=True))


def sample_params(
    anomaly: AnomalyClass,
    severity: SeverityProfile = SeverityProfile(),
    window_len_s: int = 600,
    seed=None,
) -> AnomalyParams:
    """Draw class parameters uniformly and place the signature inside the window."""
    anomaly = AnomalyClass(anomaly)
    window_len_s = check_duration(window_len_s)
    rng = np.random.default_rng(seed)

    if anomaly is AnomalyClass.BadContact:
        lo, hi = severity.bad_contact_duration_range_s
        if lo > window_len_s:
            raise InvalidArgumentError(
                f"window of {window_len_s} s cannot hold a {lo} s bad-contact interval"
            )
        n = _randint(rng, lo, min(hi, window_len_s))
        onset = _randint(rng, 0, window_len_s - n)
        return BadContactParams(
            square_freq_hz=float(rng.uniform(MIN_SQUARE_FREQ_HZ, MAX_SQUARE_FREQ_HZ)),
            square_amplitude_v=float(
                rng.uniform(severity.min_square_amplitude_v, MAX_SQUARE_AMPLITUDE_V)
            ),
            onset_index=onset,
            end_index=onset + n,
        )

    occ_lo, occ_hi = severity.occupancy_duration_range_s
    if anomaly is AnomalyClass.TractionNoise:
        rise_lo, rise_hi = severity.traction_rise_duration_range_s
        if rise_lo + occ_lo + POST_OCCUPANCY_CONTEXT_S > window_len_s:
            raise InvalidArgumentError(
                f"window of {window_len_s} s cannot hold rise + occupancy + recovery"
            )
        rise_len = _randint(rng, rise_lo, min(rise_hi, window_len_s - occ_lo - POST_OCCUPANCY_CONTEXT_S))
        occ_len = _randint(rng, occ_lo, min(occ_hi, window_len_s - rise_len - POST_OCCUPANCY_CONTEXT_S))
        rise_start = _randint(rng, 0, window_len_s - rise_len - occ_len - POST_OCCUPANCY_CONTEXT_S)
        occ_start = rise_start + rise_len
        return TractionNoiseParams(
            rise_v=float(rng.uniform(*severity.traction_rise_range_v)),
            rise_duration_s=rise_len,
            occupancy=OccupancyEvent(occ_start, occ_start + occ_len),
        )

    if occ_lo + POST_OCCUPANCY_CONTEXT_S > window_len_s:
        raise InvalidArgumentError(
            f"window of {window_len_s} s cannot hold occupancy + post-drop context"
        )
    occ_len = _randint(rng, occ_lo, min(occ_hi, window_len_s - POST_OCCUPANCY_CONTEXT_S))
    occ_start = _randint(rng, 0, window_len_s - occ_len - POST_OCCUPANCY_CONTEXT_S)
    return ContactInterruptedParams(
        drop_v=float(rng.uniform(*severity.interrupted_drop_range_v)),
        occupancy=OccupancyEvent(occ_start, occ_start + occ_len),
    )


_GENERATORS = {
    AnomalyClass.BadContact: gen_bad_contact,
    AnomalyClass.TractionNoise: gen_traction_noise,
    AnomalyClass.ContactInterrupted: gen_contact_interrupted,
}


def params_class(params: AnomalyParams) -> AnomalyClass:
    if isinstance(params, BadContactParams):
        return AnomalyClass.BadContact
    if isinstance(params, TractionNoiseParams):
        return AnomalyClass.TractionNoise
    if isinstance(params, ContactInterruptedParams):
        return AnomalyClass.ContactInterrupted
    raise InvalidArgumentError(f"not an anomaly parameter set: {params!r}")


def generate(config, params: AnomalyParams, duration_s, seed=None, **kwargs) -> VoltageTrace:
    """Dispatch to the generator matching ``params``."""
    return _GENERATORS[params_class(params)](config, params, duration_s, seed, **kwargs)


def generate_window(
    anomaly: AnomalyClass,
    config: TrackCircuitConfig = TrackCircuitConfig(),
    severity: SeverityProfile = SeverityProfile(),
    window_len_s: int = 600,
    seed=None,
):
    """One labelled window: random parameters then the class generator.

    Returns ``(trace, params)``. Parameter draws and signal noise use two
    independent child streams of ``seed``.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    param_seed, signal_seed = (
        np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (k,)) for k in (0, 1)
    )
    params = sample_params(anomaly, severity, window_len_s, param_seed)
    return generate(config, params, window_len_s, signal_seed), params
