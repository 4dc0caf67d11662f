import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trackdiag.errors import InvalidArgumentError
from trackdiag.generator import (
    AnomalyClass,
    BadContactParams,
    ContactInterruptedParams,
    SeverityProfile,
    TractionNoiseParams,
    gen_bad_contact,
    gen_contact_interrupted,
    gen_traction_noise,
    generate,
    generate_window,
    sample_params,
    square_wave,
)
from trackdiag.signal import OccupancyEvent, TrackCircuitConfig

CFG = TrackCircuitConfig()
QUIET = TrackCircuitConfig(nominal_noise_halfband=0.0)


def edge_spacings(values, level):
    """Distances between consecutive falling edges through ``level``."""
    below = values < level
    falls = np.flatnonzero(below[1:] & ~below[:-1]) + 1
    return np.diff(falls)


def test_anomaly_codes_and_slugs():
    assert [int(c) for c in AnomalyClass] == [0, 1, 2]
    assert [c.slug for c in AnomalyClass] == ["bad_contact", "traction_noise", "contact_interrupted"]
    assert AnomalyClass.from_slug("traction_noise") is AnomalyClass.TractionNoise


def test_square_wave_duty_cycle():
    w = square_wave(1000, 100.0, 0.0)
    assert w.sum() == 500
    assert np.all(w[:50] == 0) and np.all(w[50:100] == 1)


def test_bad_contact_params_validated():
    with pytest.raises(InvalidArgumentError):
        BadContactParams(0.04, 2.0, 0, 300)
    with pytest.raises(InvalidArgumentError):
        BadContactParams(0.01, 4.5, 0, 300)
    with pytest.raises(InvalidArgumentError):
        BadContactParams(0.01, 2.0, 300, 300)


@pytest.mark.parametrize("freq", [0.005, 0.0123, 0.02, 0.03])
def test_bad_contact_period_noise_free(freq):
    p = BadContactParams(freq, 3.0, 0, 3000, noise_halfband_v=0.0)
    tr = gen_bad_contact(QUIET, p, 3000, seed=5)
    spacings = edge_spacings(tr.samples, 20.0 - 1.5)
    assert spacings.size >= 10
    assert np.all(np.abs(spacings - 1.0 / freq) <= 1.0)


def test_bad_contact_outside_interval_is_nominal():
    p = BadContactParams(0.01, 2.0, 100, 400)
    tr = gen_bad_contact(CFG, p, 600, seed=2)
    rest = np.concatenate([tr.samples[:100], tr.samples[400:]])
    assert np.all(np.abs(rest - 20.0) <= 0.25)


def test_traction_noise_shape():
    p = TractionNoiseParams(2.5, 30, OccupancyEvent(200, 240))
    tr = gen_traction_noise(CFG, p, 600, seed=4)
    assert np.all(np.abs(tr.samples[170:200] - 22.5) <= 0.25)
    assert np.all(tr.samples[200:240] == 0.0)
    assert np.all(np.abs(tr.samples[240:] - 20.0) <= 0.25)
    assert np.all(np.abs(tr.samples[:170] - 20.0) <= 0.25)


def test_traction_rise_cannot_start_before_trace():
    with pytest.raises(InvalidArgumentError):
        gen_traction_noise(CFG, TractionNoiseParams(2.0, 50, OccupancyEvent(20, 40)), 600)


def test_contact_interrupted_drop_persists():
    p = ContactInterruptedParams(4.0, OccupancyEvent(100, 130))
    tr = gen_contact_interrupted(CFG, p, 600, seed=8)
    assert np.all(tr.samples[100:130] == 0.0)
    assert np.all(np.abs(tr.samples[130:] - 16.0) <= 0.25)
    with pytest.raises(InvalidArgumentError):
        gen_contact_interrupted(CFG, ContactInterruptedParams(4.0, OccupancyEvent(560, 600)), 600)


def test_generate_window_deterministic_and_does_not_mutate_seed():
    ss = np.random.SeedSequence(5, spawn_key=(1, 2))
    a, pa = generate_window(AnomalyClass.TractionNoise, seed=ss)
    b, pb = generate_window(AnomalyClass.TractionNoise, seed=ss)
    assert a == b and pa == pb
    assert ss.n_children_spawned == 0


def test_window_too_short_for_signature():
    with pytest.raises(InvalidArgumentError):
        sample_params(AnomalyClass.BadContact, window_len_s=200)
    with pytest.raises(InvalidArgumentError):
        sample_params(AnomalyClass.TractionNoise, window_len_s=60)


N_DRAWS = 10_000


def _check_bad_contact(tr, p):
    s = tr.samples
    assert 0.005 <= p.square_freq_hz <= 0.03
    assert 1.0 <= p.square_amplitude_v <= 4.0
    assert 0 <= p.onset_index < p.end_index <= 600
    r = s[p.onset_index:p.end_index] - 20.0
    # every sample is baseline or a dip, each within the +-0.5 V noise band
    assert np.all((np.abs(r) <= 0.5) | (np.abs(r + p.square_amplitude_v) <= 0.5))
    rest = np.concatenate([s[:p.onset_index], s[p.end_index:]])
    assert np.all(np.abs(rest - 20.0) <= 0.25)


def _check_traction(tr, p):
    s = tr.samples
    occ = p.occupancy
    assert 1.0 <= p.rise_v <= 4.0 and 10 <= p.rise_duration_s <= 60
    assert 10 <= occ.duration <= 60 and p.rise_start >= 0 and occ.end_index <= 600
    assert np.all(np.abs(s[p.rise_start:occ.start_index] - 20.0 - p.rise_v) <= 0.25)
    assert np.all(s[occ.start_index:occ.end_index] == 0.0)
    rest = np.concatenate([s[:p.rise_start], s[occ.end_index:]])
    assert np.all(np.abs(rest - 20.0) <= 0.25)


def _check_interrupted(tr, p):
    s = tr.samples
    occ = p.occupancy
    assert 2.0 <= p.drop_v <= 6.0 and 10 <= occ.duration <= 60
    assert occ.end_index < 600
    assert np.all(s[occ.start_index:occ.end_index] == 0.0)
    # the drop holds through the last sample
    assert np.all(np.abs(s[occ.end_index:] - (20.0 - p.drop_v)) <= 0.25)
    assert np.all(np.abs(s[:occ.start_index] - 20.0) <= 0.25)


CHECKS = {
    AnomalyClass.BadContact: _check_bad_contact,
    AnomalyClass.TractionNoise: _check_traction,
    AnomalyClass.ContactInterrupted: _check_interrupted,
}


@pytest.mark.parametrize("anomaly", list(AnomalyClass), ids=lambda c: c.slug)
def test_ten_thousand_draws_satisfy_ranges(anomaly):
    check = CHECKS[anomaly]
    root = np.random.SeedSequence(2024)
    for k in range(N_DRAWS):
        tr, p = generate_window(anomaly, CFG, SeverityProfile(), 600, root.spawn(1)[0])
        assert len(tr) == 600
        check(tr, p)


def test_severity_profile_narrows_draws():
    sev = SeverityProfile(min_square_amplitude_v=3.5, interrupted_drop_range_v=(5.0, 5.5))
    for seed in range(200):
        assert sample_params(AnomalyClass.BadContact, sev, seed=seed).square_amplitude_v >= 3.5
        assert 5.0 <= sample_params(AnomalyClass.ContactInterrupted, sev, seed=seed).drop_v <= 5.5


@settings(max_examples=40, deadline=None)
@given(
    anomaly=st.sampled_from(list(AnomalyClass)),
    length=st.integers(600, 1800),
    seed=st.integers(0, 2**63 - 1),
)
def test_sampled_signatures_fit_any_window(anomaly, length, seed):
    p = sample_params(anomaly, window_len_s=length, seed=seed)
    tr = generate(CFG, p, length, seed=seed)
    assert len(tr) == length
    assert np.all((tr.samples >= 0) & (tr.samples <= 40))


def test_deep_bad_contact_reads_as_intermittent_occupancy():
    from trackdiag.signal import detect_occupancies

    p = BadContactParams(0.01, 4.0, 0, 600, noise_halfband_v=0.0)
    occs = detect_occupancies(gen_bad_contact(QUIET, p, 600, seed=1))
    assert len(occs) >= 5
    assert all(o.duration <= 50 for o in occs)
    assert sum(o.duration == 50 for o in occs) >= 4


def test_noise_free_interrupted_drop_below_threshold():
    p = ContactInterruptedParams(4.0, OccupancyEvent(200, 240))
    s = gen_contact_interrupted(QUIET, p, 600, seed=0).samples
    assert np.all(s[240:] == 16.0) and np.all(s[:200] == 20.0)


def test_noise_free_traction_recovers_to_base():
    p = TractionNoiseParams(2.0, 30, OccupancyEvent(300, 340))
    s = gen_traction_noise(QUIET, p, 600, seed=0).samples
    assert np.all(s[270:300] == 22.0)
    assert s[340:400].mean() == 20.0
