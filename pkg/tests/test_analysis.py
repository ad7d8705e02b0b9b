import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_coincidences
from waveeraser.analysis import (CoincidenceWindow, FitConvergenceError, coincidence_filter,
                                 coincidence_match, dominant_period, find_nodes, fit_fringe,
                                 fit_to_json, fringe_model, histogram, histogram_from_csv,
                                 histogram_to_csv, nodes_to_json, normalized_cross_correlation,
                                 phase_difference, visibility)
from waveeraser.detection import ClickEvent, ClickStream, DetectorModel, sample_clicks
from waveeraser.wavefield import Grid, bin_profile, intensity_profile, propagate, two_slit_fields

# --- histogram ------------------------------------------------------------


def test_histogram_examples():
    assert np.array_equal(histogram([], 5), np.zeros(5))
    h = histogram([ClickEvent("s", 3, 0.0)], 5)
    assert h.tolist() == [0, 0, 0, 1, 0]
    assert histogram(ClickStream.single("s", [0, 7, 2], [0, 1, 2]), 5).sum() == 2
    with pytest.raises(ValueError):
        histogram([], 0)


def test_histogram_matches_profile():
    x = np.linspace(-1, 1, 8)
    prof = np.exp(-2 * x ** 2) * np.cos(2 * x) ** 2 + 0.05
    clicks = sample_clicks(prof, DetectorModel(n_bins=8, exposure=1e5 / prof.sum()), 3)
    h = histogram(clicks, 8)
    assert abs(h.sum() - 1e5) < 2000
    assert np.abs(h / h.sum() - prof / prof.sum()).sum() < 0.01


def test_histogram_csv_round_trip():
    text = histogram_to_csv([0.5, 1.5], [3, 4])
    assert text == "bin_center_m,counts\n0.5,3\n1.5,4\n"
    c, n = histogram_from_csv(text)
    assert c.tolist() == [0.5, 1.5] and n.tolist() == [3, 4]
    with pytest.raises(ValueError):
        histogram_from_csv("x,y\n1,2\n")


# --- coincidences ---------------------------------------------------------

def stream(times):
    return ClickStream.single("d", np.zeros(len(times), np.int64), times)


def test_empty_idler_gives_nothing():
    assert len(coincidence_filter(stream([1.0, 2.0]), stream([]), 1e-9)) == 0


def test_identical_streams_fully_retained():
    t = np.cumsum(np.full(50, 1e-6))
    out = coincidence_filter(stream(t), stream(t), CoincidenceWindow(5e-9))
    assert np.array_equal(out.timestamps, t)


def test_one_idler_serves_one_signal():
    ms, mi = coincidence_match([0.0, 1.0e-9], [0.6e-9], CoincidenceWindow(4e-9))
    assert ms.tolist() == [1] and mi.tolist() == [0]


def test_offset_compensates_delay():
    ts = np.array([1e-6, 2e-6, 3e-6])
    w = CoincidenceWindow(2e-9, offset=-50e-9)
    assert len(coincidence_filter(stream(ts), stream(ts + 50e-9), w)) == 3
    assert len(coincidence_filter(stream(ts), stream(ts + 50e-9), CoincidenceWindow(2e-9))) == 0
    with pytest.raises(ValueError):
        CoincidenceWindow(0.0)


def random_streams(rng, n_s, n_i, span):
    ts = np.sort(rng.uniform(0, span, n_s))
    pick = rng.choice(n_s, size=min(n_i, n_s), replace=False)
    ti = np.sort(np.r_[ts[pick] + rng.normal(0, 1e-9, pick.size), rng.uniform(0, span, n_i - pick.size)])
    return ts, ti


def test_matches_brute_force_on_dense_streams():
    rng = np.random.default_rng(0)
    ts, ti = random_streams(rng, 1000, 1000, 2e-6)
    for width in (1e-9, 3e-9, 10e-9):
        got = coincidence_filter(stream(ts), stream(ti), CoincidenceWindow(width))
        ref = brute_force_coincidences(ts, ti, width)
        assert np.array_equal(got.timestamps, ts[ref])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 120), st.integers(0, 120), st.floats(1e-10, 2e-8),
       st.floats(-5e-9, 5e-9))
def test_matches_brute_force(seed, n_s, n_i, width, offset):
    rng = np.random.default_rng(seed)
    ts = np.sort(rng.uniform(0, 3e-7, n_s))
    ti = np.sort(rng.uniform(0, 3e-7, n_i))
    ms, _ = coincidence_match(ts, ti, CoincidenceWindow(width, offset))
    assert ms.tolist() == brute_force_coincidences(ts, ti, width, offset)


def test_window_monotonicity_on_random_streams():
    rng = np.random.default_rng(1)
    for _ in range(100):
        ts, ti = random_streams(rng, int(rng.integers(1, 300)), int(rng.integers(1, 300)), 1e-6)
        widths = np.sort(rng.uniform(1e-10, 3e-8, 4))
        kept = [set(coincidence_match(ts, ti, CoincidenceWindow(w))[0].tolist()) for w in widths]
        assert all(a <= b for a, b in zip(kept, kept[1:]))


# --- visibility -----------------------------------------------------------

def test_visibility_examples():
    x = np.arange(400)
    assert visibility(np.cos(math.pi * x / 20) ** 2) == pytest.approx(1.0, abs=1e-9)
    assert visibility(np.full(100, 3.0)) == 0.0
    u = np.linspace(-3, 3, 600)
    k, a, b = 5.0, 0.4, 12.0
    total = fringe_model(u, k, a, b, 0.0) + fringe_model(u, k, a, b, math.pi / 2)
    assert visibility(total) == pytest.approx(0.0, abs=1e-9)
    assert visibility(np.zeros(10)) == 0.0


def test_visibility_of_partial_fringes():
    x = np.arange(1000)
    p = 1 + 0.5 * np.cos(2 * math.pi * x / 20)
    assert visibility(p) == pytest.approx(0.5, abs=1e-3)
    assert dominant_period(p) == pytest.approx(20, rel=1e-3)


def test_noise_merging_flattens_shot_noise():
    rng = np.random.default_rng(2)
    u = np.linspace(-3, 3, 192)
    env = rng.poisson(400 * np.exp(-u ** 2))
    assert visibility(env, period=8, noise_sigmas=5) < 0.05
    fringes = rng.poisson(800 * np.exp(-u ** 2) * np.cos(math.pi * u * 192 / 6 / 8) ** 2)
    assert visibility(fringes, period=8, noise_sigmas=5) > 0.8


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=3, max_size=80), st.floats(1e-3, 1e3))
def test_visibility_bounds_and_scale_invariance(vals, scale):
    p = np.array(vals)
    v = visibility(p)
    assert 0.0 <= v <= 1.0
    assert visibility(p * scale) == pytest.approx(v, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 100), st.floats(0.05, 2), st.floats(5, 40))
def test_complementary_patterns_sum_to_envelope(k, a, b):
    x = np.linspace(-3, 3, 1201)
    total = fringe_model(x, k, a, b, 0.0) + fringe_model(x, k, a, b, math.pi / 2)
    assert np.allclose(total, k * np.exp(-a * x * x), rtol=1e-12, atol=0)
    assert visibility(total) < 1e-9


# --- fitting --------------------------------------------------------------

X = np.linspace(-1, 1, 2001)


@pytest.mark.parametrize("k, a, b, phi", list(itertools.product(
    [1.0, 10.0], [0.3, 3.0, 30.0], [30.0, 100.0, 300.0], [0.0, math.pi / 2, 1.0])))
def test_noiseless_round_trip(k, a, b, phi):
    fit = fit_fringe(fringe_model(X, k, a, b, phi), X)
    assert fit.k == pytest.approx(k, rel=1e-6)
    assert fit.a == pytest.approx(a, rel=1e-6)
    assert fit.b == pytest.approx(b, rel=1e-6)
    assert phase_difference(fit.phi, phi) < 1e-6
    assert 0 <= fit.phi < math.pi and fit.rms_residual < 1e-9 and fit.valid


def test_antifringe_phase():
    fit = fit_fringe(fringe_model(X, 2.0, 3.0, 100.0, math.pi / 2), X)
    assert fit.phi == pytest.approx(math.pi / 2, abs=1e-6)


def test_poisson_noise_fit_accuracy():
    rng = np.random.default_rng(4)
    x = np.linspace(-0.0336, 0.0336, 192)
    b = math.pi * 250e-6 / 702e-9
    p = fringe_model(x, 1.0, 4000.0, b, 0.0)
    counts = rng.multinomial(100_000, p / p.sum())
    assert fit_fringe(counts, x).b == pytest.approx(b, rel=0.01)


def test_fit_preconditions_and_nonconvergence():
    with pytest.raises(ValueError):
        fit_fringe(fringe_model(X, 1.0, 0.3, 5.0, 0.0), X)
    with pytest.raises(ValueError):
        fit_fringe(-np.ones(20), np.arange(20.0))
    with pytest.raises(FitConvergenceError) as info:
        fit_fringe(fringe_model(X, 1.0, 3.0, 100.0, 0.4) + 0.05 * np.cos(7 * X) ** 2, X, max_evaluations=2)
    assert info.value.best.valid is False


def test_fit_json():
    doc = json.loads(fit_to_json(fit_fringe(fringe_model(X, 1.0, 3.0, 100.0, 0.0), X)))
    assert set(doc) >= {"k", "a", "b", "phi", "rms_residual", "valid"}


# --- nodes ----------------------------------------------------------------

def test_nodes_of_cos_squared():
    b = 3.0
    x = np.linspace(0, 10, 4001)
    nodes = find_nodes(np.cos(b * x) ** 2, x)
    expected = (math.pi / 2 + math.pi * np.arange(nodes.size)) / b
    assert nodes.size == 9
    assert np.all(np.abs(nodes - expected) <= (x[1] - x[0]) / 2)


def test_constant_profile_has_no_nodes():
    x = np.linspace(0, 1, 50)
    assert find_nodes(np.ones(50), x).size == 0


def test_dark_tails_are_not_nodes():
    x = np.linspace(-5, 5, 2001)
    nodes = find_nodes(np.exp(-x ** 2) * np.cos(4 * x) ** 2, x)
    assert np.all(np.abs(nodes) < 2.5)
    assert np.all(np.diff(nodes) > 0)


def test_two_slit_node_spacing():
    lam, d, L = 702e-9, 250e-6, 1.0
    g = Grid.centered(262144, 2e-6)
    a, b = two_slit_fields(g, lam, 40e-6, d, 10e-6)
    prof = intensity_profile(propagate(a + b, L))
    nodes = find_nodes(prof, g.positions)
    assert nodes.size >= 8
    assert np.median(np.diff(nodes)) == pytest.approx(lam * L / d, rel=0.01)
    edges = np.linspace(-33.6e-3, 33.6e-3, 193)
    assert bin_profile(propagate(a + b, L), edges).sum() > 0


def test_nodes_json_and_ncc():
    assert json.loads(nodes_to_json([1.0, 2.0]))["nodes_m"] == [1.0, 2.0]
    a = np.array([1.0, 2.0, 3.0])
    assert normalized_cross_correlation(a, 4 * a) == pytest.approx(1.0)
    assert normalized_cross_correlation(a, np.zeros(3)) == 0.0
