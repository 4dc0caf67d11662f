import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trackdiag.errors import InvalidArgumentError
from trackdiag.signal import (
    MAX_VOLTAGE,
    OccupancyEvent,
    TrackCircuitConfig,
    VoltageTrace,
    detect_occupancies,
    gen_nominal_trace,
    write_trace_csv,
)


def test_trace_rejects_out_of_range_and_empty():
    with pytest.raises(InvalidArgumentError):
        VoltageTrace(np.array([]))
    with pytest.raises(InvalidArgumentError):
        VoltageTrace(np.array([20.0, 41.0]))
    with pytest.raises(InvalidArgumentError):
        VoltageTrace(np.array([20.0, -0.1]))
    with pytest.raises(InvalidArgumentError):
        VoltageTrace(np.array([20.0, np.nan]))


def test_trace_samples_are_read_only():
    tr = VoltageTrace(np.full(5, 20.0), start_time=100)
    with pytest.raises(ValueError):
        tr.samples[0] = 1.0
    assert tr.end_time == 105
    assert tr.timestamps().tolist() == [100, 101, 102, 103, 104]


def test_config_invariants():
    with pytest.raises(InvalidArgumentError):
        TrackCircuitConfig(base_voltage=25.0)
    with pytest.raises(InvalidArgumentError):
        TrackCircuitConfig(occupancy_threshold=21.0)


def test_nominal_trace_band_and_length():
    cfg = TrackCircuitConfig()
    tr = gen_nominal_trace(cfg, 3600, seed=3)
    assert len(tr) == 3600
    assert np.all(np.abs(tr.samples - 20.0) <= 0.25)


def test_occupancy_zeroes_and_is_detected():
    cfg = TrackCircuitConfig()
    occ = [OccupancyEvent(100, 130), OccupancyEvent(400, 460)]
    tr = gen_nominal_trace(cfg, 600, occupancies=occ, seed=1)
    assert np.all(tr.samples[100:130] == 0.0)
    assert np.all(tr.samples[400:460] == 0.0)
    assert detect_occupancies(tr) == occ


def test_overlapping_or_outside_occupancies_rejected():
    cfg = TrackCircuitConfig()
    with pytest.raises(InvalidArgumentError):
        gen_nominal_trace(cfg, 600, occupancies=[OccupancyEvent(10, 50), OccupancyEvent(40, 60)])
    with pytest.raises(InvalidArgumentError):
        gen_nominal_trace(cfg, 600, occupancies=[OccupancyEvent(590, 610)])


def test_same_seed_same_trace():
    cfg = TrackCircuitConfig()
    assert gen_nominal_trace(cfg, 600, seed=9) == gen_nominal_trace(cfg, 600, seed=9)
    assert gen_nominal_trace(cfg, 600, seed=9) != gen_nominal_trace(cfg, 600, seed=10)


def test_trace_csv_format():
    tr = VoltageTrace(np.array([20.0, 19.875, 0.0]), start_time=7)
    buf = io.StringIO()
    write_trace_csv(tr, buf)
    assert buf.getvalue().splitlines() == ["timestamp_s,voltage_v", "7,20.000", "8,19.875", "9,0.000"]


@settings(max_examples=50, deadline=None)
@given(
    base=st.floats(19.0, 21.0),
    halfband=st.floats(0.0, 0.5),
    n=st.integers(1, 2000),
    seed=st.integers(0, 2**32 - 1),
)
def test_nominal_samples_stay_in_band(base, halfband, n, seed):
    tr = gen_nominal_trace(TrackCircuitConfig(base, 17.0, halfband), n, seed=seed)
    assert np.all(np.abs(tr.samples - base) <= halfband + 1e-12)
    assert np.all((tr.samples >= 0) & (tr.samples <= MAX_VOLTAGE))


def test_zero_noise_degenerate_case():
    tr = gen_nominal_trace(TrackCircuitConfig(20.0, 17.0, 0.0), 10, seed=0)
    assert tr.samples.tolist() == [20.0] * 10
    with pytest.raises(InvalidArgumentError):
        gen_nominal_trace(TrackCircuitConfig(), 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), data=st.data())
def test_detect_occupancies_round_trip(seed, data):
    cuts = sorted(data.draw(st.sets(st.integers(1, 1199), max_size=8)))
    if len(cuts) % 2:
        cuts = cuts[:-1]
    occs = [OccupancyEvent(a, b) for a, b in zip(cuts[::2], cuts[1::2])]
    tr = gen_nominal_trace(TrackCircuitConfig(), 1200, occupancies=occs, seed=seed)
    assert detect_occupancies(tr) == occs
