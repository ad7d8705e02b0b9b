import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_latency
from waveeraser.detection import (ClickEvent, ClickStream, DetectorModel, LengthMismatchError,
                                  ThresholdPopulation, apply_dead_time, charging_time, clicks_to_csv,
                                  clicks_to_records, expected_latency, first_click_latency,
                                  sample_clicks, sample_counts, sample_pulse_clicks)


def test_model_invariants():
    with pytest.raises(ValueError):
        DetectorModel(efficiency=1.5)
    with pytest.raises(ValueError):
        DetectorModel(dark_rate=-1)
    with pytest.raises(ValueError):
        DetectorModel(n_bins=0)
    with pytest.raises(ValueError):
        DetectorModel(exposure=0)


def test_zero_profile_no_clicks():
    assert len(sample_clicks(np.zeros(5), DetectorModel(n_bins=5), 1)) == 0


def test_length_mismatch():
    with pytest.raises(LengthMismatchError):
        sample_clicks(np.ones(4), DetectorModel(n_bins=5), 1)
    with pytest.raises(ValueError):
        sample_clicks(-np.ones(5), DetectorModel(n_bins=5), 1)


def test_poisson_dispersion():
    n = 20_000
    counts = sample_counts(np.full(n, 1e4), DetectorModel(n_bins=n), 8)
    assert 0.94 <= counts.var(ddof=1) / counts.mean() <= 1.06


def test_counts_match_click_histogram():
    prof = np.linspace(1, 50, 30)
    model = DetectorModel(n_bins=30, exposure=3.0, dark_rate=2.0)
    clicks = sample_clicks(prof, model, 77)
    assert np.array_equal(np.bincount(clicks.bins, minlength=30), sample_counts(prof, model, 77))


def test_doubling_exposure_doubles_counts():
    prof = np.full(10, 1e4)
    one = sample_counts(prof, DetectorModel(n_bins=10, exposure=1.0), 1).sum()
    two = sample_counts(prof, DetectorModel(n_bins=10, exposure=2.0), 2).sum()
    assert two / one == pytest.approx(2.0, rel=0.03)


def test_click_histogram_converges_to_profile():
    x = np.linspace(-1, 1, 4)
    prof = np.exp(-x ** 2) * (1 + 0.5 * np.cos(3 * x))
    counts = sample_counts(prof, DetectorModel(n_bins=4, exposure=1e5 / prof.sum()), 5)
    n = counts.sum()
    assert n >= 99_000
    assert np.abs(counts / n - prof / prof.sum()).sum() < 3 / math.sqrt(n)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 200), min_size=1, max_size=20), st.floats(0.01, 5), st.integers(0, 2**32))
def test_clicks_stay_in_range(prof, exposure, seed):
    model = DetectorModel(n_bins=len(prof), exposure=exposure, dark_rate=1.0)
    c = sample_clicks(np.array(prof), model, seed)
    assert np.all((c.bins >= 0) & (c.bins < len(prof)))
    assert np.all((c.timestamps >= 0) & (c.timestamps <= exposure))
    assert np.all(np.diff(c.timestamps) >= 0)
    again = sample_clicks(np.array(prof), model, seed)
    assert again.timestamps.tobytes() == c.timestamps.tobytes()


def test_click_stream_events():
    s = ClickStream.from_events([ClickEvent("a", 3, 0.5), ClickEvent("b", 1, 0.25)])
    assert s[0] == ClickEvent("a", 3, 0.5)
    assert [e.bin for e in s.sorted()] == [1, 3]
    assert len(ClickStream.empty()) == 0


def test_dead_time_per_bin():
    s = ClickStream.single("d", [0, 0, 1, 0], [0.0, 0.5, 0.6, 1.2])
    kept = apply_dead_time(s, 1.0)
    assert list(zip(kept.bins.tolist(), kept.timestamps.tolist())) == [(0, 0.0), (1, 0.6), (0, 1.2)]
    model = DetectorModel(n_bins=3, exposure=1.0, dead_time=0.1)
    c = sample_clicks(np.full(3, 200.0), model, 1)
    for b in range(3):
        assert np.all(np.diff(c.timestamps[c.bins == b]) >= 0.1)


def test_pulse_landing():
    rng = np.random.default_rng(1)
    land, det = sample_pulse_clicks([0.0, 1.0, 3.0, 0.0], 40_000, 0.5, rng)
    assert set(np.unique(land)) == {1, 2}
    assert np.mean(land == 2) == pytest.approx(0.75, abs=0.01)
    assert det.mean() == pytest.approx(0.5, abs=0.01)
    with pytest.raises(ValueError):
        sample_pulse_clicks([0.0, 0.0], 3, 0.5, rng)


def test_click_serialization():
    s = ClickStream.single("signal", [2, 4], [0.1, 0.2])
    text = clicks_to_csv(s)
    assert text.splitlines() == ["detector_id,bin,timestamp_s", "signal,2,0.1", "signal,4,0.2"]
    assert json.loads(json.dumps(clicks_to_records(s)))[1] == {"detector_id": "signal", "bin": 4,
                                                                 "timestamp_s": 0.2}


# --- threshold population -------------------------------------------------

def test_population_invariants():
    with pytest.raises(ValueError):
        ThresholdPopulation(0, 0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        ThresholdPopulation(10, 1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        ThresholdPopulation(10, 0.1, 1.0, 0.0)


def test_dark_and_cold_never_clicks():
    stats = first_click_latency(ThresholdPopulation(100, 0.0, 1.0, 1.0), 0.0, 100, 1)
    assert stats.n_clicked == 0
    assert math.isinf(stats.mean)


def test_cold_population_charges_classically():
    pop = ThresholdPopulation(50, 0.0, 2.0, 3.0)
    intensity, dt = 4.0, 1e-6
    stats = first_click_latency(pop, intensity, 100, 1, step_time=dt)
    t_charge = charging_time(pop, intensity)
    assert stats.quantiles[0.05] == stats.quantiles[0.95]
    assert abs(stats.mean - t_charge) <= dt


def test_nearly_cold_population_approaches_charging_time():
    pop = ThresholdPopulation(50, 1e-4, 2.0, 3.0)
    stats = first_click_latency(pop, 4.0, 500, 1, step_time=1e-6)
    assert stats.mean == pytest.approx(charging_time(pop, 4.0), rel=1e-3)


POP = ThresholdPopulation(n_electrons=100, noise_energy_scale=0.05, binding_energy=0.3,
                          signal_power_coupling=1e-4)
STEP = 1.0


def test_latency_matches_one_step_formula():
    p = math.exp(-(POP.binding_energy - 1e-4) / POP.noise_energy_scale)
    formula = STEP / (1 - (1 - p) ** POP.n_electrons)
    stats = first_click_latency(POP, 1.0, 10_000, 3, step_time=STEP)
    assert stats.mean == pytest.approx(formula, rel=0.10)


def test_latency_matches_brute_force_population():
    stats = first_click_latency(POP, 1.0, 10_000, 3, step_time=STEP)
    ref = brute_force_latency(POP.n_electrons, POP.noise_energy_scale, POP.binding_energy,
                              POP.signal_power_coupling * 1.0 * STEP, STEP, 10_000, 99)
    assert np.all(np.isfinite(ref))
    assert stats.mean == pytest.approx(ref.mean(), rel=0.10)
    assert expected_latency(POP, 1.0, STEP) == pytest.approx(ref.mean(), rel=0.05)


def test_noisy_population_beats_charging_time():
    stats = first_click_latency(POP, 1.0, 10_000, 4, step_time=STEP)
    assert stats.mean + 2.576 * stats.stderr < charging_time(POP, 1.0)


def test_latency_decreases_with_noise():
    means = [expected_latency(ThresholdPopulation(100, t, 0.3, 1e-4), 1.0, STEP)
             for t in (0.0, 0.01, 0.02, 0.05, 0.1, 0.2)]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_latency_quantiles_and_determinism():
    a = first_click_latency(POP, 1.0, 2000, 5, step_time=STEP)
    b = first_click_latency(POP, 1.0, 2000, 5, step_time=STEP)
    assert a == b
    assert a.quantiles[0.05] <= a.quantiles[0.5] <= a.quantiles[0.95]
    with pytest.raises(ValueError):
        first_click_latency(POP, 1.0, 0, 5)


def test_l1_distance_is_pure_shot_noise():
    # reference: the same profile sampled by numpy's multinomial, no package code involved
    x = np.linspace(-2, 2, 192)
    prof = np.exp(-x ** 2) * np.cos(6 * x) ** 2 + 1e-3
    p = prof / prof.sum()
    model = DetectorModel(n_bins=192, exposure=1e5 / prof.sum())
    ours = []
    for seed in range(40):
        c = sample_counts(prof, model, seed)
        ours.append(np.abs(c / c.sum() - p).sum() * math.sqrt(c.sum()))
    rng = np.random.default_rng(0)
    ref = [np.abs(rng.multinomial(100_000, p) / 1e5 - p).sum() * math.sqrt(1e5) for _ in range(40)]
    assert np.mean(ours) == pytest.approx(np.mean(ref), rel=0.03)
    # far above the 3/sqrt(N) level at this resolution
    assert np.mean(ours) > 3
