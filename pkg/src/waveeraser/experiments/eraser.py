"""Polarization-tagged double slit with a correlated idler arm.

The slit field is solved once: each slit's Gaussian-apodized field is
propagated to the screen, tagged by its slit polarizer, and summed into a
vector field J(x).  Every pulse pair then lands at a screen position drawn
from |J|^2, and its idler partner carries the polarization J(x) implies
(orthogonal for type I, identical for type II), analyzed by a polarizing
beam splitter in the idler arm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import analysis as an
from ..detection import (ClickStream, apply_dead_time, concatenate, dark_clicks,
                         sample_pulse_clicks)
from ..polarization import JonesVector, apply_polarizer
from ..sources import PdcType, PulseStream, generate_pdc_pairs
from ..wavefield import Grid, VectorField, propagate, two_slit_fields
from .config import IDLER_SETTINGS, EraserConfig, _EraserBase
from .result import ExperimentResult

#: extremum pairs within this many Poisson sigmas are treated as noise
VISIBILITY_SIGMAS = 5.0


@dataclass(frozen=True, eq=False)
class ScreenOptics:
    """Binned screen intensities; index ``n_bins`` collects light missing the detector."""

    edges: np.ndarray
    field: VectorField
    weights: np.ndarray
    pdc_type: PdcType

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return an.bin_centers(self.edges)

    def _bucket(self, density: np.ndarray) -> np.ndarray:
        return _bucket(self.edges, self.field, density)

    def idler_pass_probability(self, theta: float) -> np.ndarray:
        """Per bucket, the chance that the idler passes an analyzer at ``theta``."""
        jh, jv = self.field.h.samples, self.field.v.samples
        if self.pdc_type is PdcType.TYPE_I:
            ih, iv = jv.conj(), -jh.conj()
        else:
            ih, iv = jh, jv
        amp = ih * math.sin(theta) + iv * math.cos(theta)
        passed = self._bucket(np.abs(amp) ** 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(self.weights > 0, passed / self.weights, 0.0)
        return np.clip(p, 0.0, 1.0)

    def daughter_profiles(self) -> dict[str, np.ndarray]:
        b = self._bucket
        return {"h": b(np.abs(self.field.h.samples) ** 2)[:-1],
                "v": b(np.abs(self.field.v.samples) ** 2)[:-1]}


def _bucket(edges: np.ndarray, field: VectorField, density: np.ndarray) -> np.ndarray:
    """Integrate a per-sample density into detector bins plus one overflow bucket."""
    n_bins = edges.size - 1
    idx = np.searchsorted(edges, field.positions, side="right") - 1
    idx = np.where((idx >= 0) & (idx < n_bins), idx, n_bins)
    return np.bincount(idx, density * field.h.pitch, minlength=n_bins + 1)


def screen_optics(cfg: _EraserBase) -> ScreenOptics:
    grid = Grid.centered(cfg.grid_points, cfg.grid_pitch)
    ea, eb = two_slit_fields(grid, cfg.wavelength, cfg.slit_width, cfg.slit_separation, cfg.beam_waist)
    mother = JonesVector.vertical()
    ta, tb = cfg.slit_polarizers
    at_slits = (VectorField.from_scalar(ea, apply_polarizer(mother, ta))
                + VectorField.from_scalar(eb, apply_polarizer(mother, tb)))
    screen = propagate(at_slits, cfg.screen_distance)
    edges = np.linspace(-cfg.screen_half_width, cfg.screen_half_width, cfg.n_bins + 1)
    total = np.abs(screen.h.samples) ** 2 + np.abs(screen.v.samples) ** 2
    return ScreenOptics(edges, screen, _bucket(edges, screen, total), PdcType(cfg.pdc_type))


@dataclass(frozen=True, eq=False)
class PairRun:
    """Per-pair draws shared by every idler analysis of one simulated stream."""

    pairs: PulseStream
    landing: np.ndarray
    signal: ClickStream
    idler_u: np.ndarray
    idler_detected: np.ndarray
    t_end: float


def simulate_pairs(cfg: _EraserBase, optics: ScreenOptics, seeds) -> PairRun:
    pair_seed, land_seed, dark_seed, u_seed, idet_seed = seeds[:5]
    pairs = generate_pdc_pairs(cfg.n_pairs, PdcType(cfg.pdc_type), cfg.pair_rate_hz, pair_seed,
                               cfg.pairing_efficiency)
    rng = np.random.default_rng(land_seed)
    landing, detected = sample_pulse_clicks(optics.weights, cfg.n_pairs, cfg.detector_efficiency, rng)
    fired = detected & (landing < optics.n_bins)
    t_end = pairs.duration + 1.0 / cfg.pair_rate_hz
    signal = ClickStream.single("signal", landing[fired], pairs.timestamps[fired])
    dark = dark_clicks(optics.n_bins, cfg.dark_rate_hz, 0.0, t_end, np.random.default_rng(dark_seed), "signal")
    signal = concatenate([signal, dark]).sorted()
    signal = apply_dead_time(signal, cfg.dead_time)
    idler_u = np.random.default_rng(u_seed).random(cfg.n_pairs)
    idet = (np.random.default_rng(idet_seed).random(cfg.n_pairs) < cfg.idler_efficiency) & pairs.idler_present
    return PairRun(pairs, landing, signal, idler_u, idet, t_end)


def pbs_split(optics: ScreenOptics, run: PairRun, theta: float) -> np.ndarray:
    """True where the idler leaves the transmitted port of a PBS with axis ``theta``.

    One uniform draw per pair decides, so the two ports are exact complements.
    """
    p = optics.idler_pass_probability(theta)
    return run.idler_u < p[run.landing]


def fit_or_none(counts, centers) -> an.FringeFit | None:
    try:
        return an.fit_fringe(counts, centers)
    except an.FitConvergenceError as exc:
        return exc.best
    except ValueError:
        return None


def period_in_bins(cfg: _EraserBase) -> float:
    return cfg.fringe_period / (2 * cfg.screen_half_width / cfg.n_bins)


def fringe_visibility(counts, cfg: _EraserBase) -> float:
    return an.visibility(counts, period=period_in_bins(cfg), noise_sigmas=VISIBILITY_SIGMAS)


_IDLER_THETA = {"vertical": 0.0, "horizontal": math.pi / 2}


def run_eraser(cfg: EraserConfig) -> ExperimentResult:
    """Raw and coincidence-filtered signal histograms for each idler analyzer setting.

    All settings analyze the same pair stream.  Vertical and horizontal are
    the two output ports of one PBS, so their coincidence histograms add up
    to the histogram of all paired clicks.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(5 + len(IDLER_SETTINGS))
    optics = screen_optics(cfg)
    run = simulate_pairs(cfg, optics, seeds)
    res = ExperimentResult("eraser", cfg, cfg.seed)
    centers = optics.centers
    window = an.CoincidenceWindow(cfg.coincidence_window)

    raw = an.histogram(run.signal, cfg.n_bins)
    res.add_histogram("raw", centers, raw)
    res.scalars["visibility_raw"] = fringe_visibility(raw, cfg)
    res.scalars["n_signal_clicks"] = int(raw.sum())
    res.scalars["fringe_b_analytic_per_m"] = math.pi / cfg.fringe_period
    if res.scalars["visibility_raw"] >= 0.5:
        res.fits["raw"] = fit_or_none(raw, centers)

    transmitted = pbs_split(optics, run, 0.0)
    for setting in cfg.idler_polarizers:
        if setting == "vertical":
            passed = transmitted
        elif setting == "horizontal":
            passed = ~transmitted
        else:
            passed = np.ones(cfg.n_pairs, bool)
        keep = passed & run.idler_detected
        idler = ClickStream.single(f"idler_{setting}", np.zeros(int(keep.sum()), np.int64),
                                   run.pairs.timestamps[keep])
        dark_seed = seeds[5 + IDLER_SETTINGS.index(setting)]
        dark = dark_clicks(1, cfg.dark_rate_hz, 0.0, run.t_end, np.random.default_rng(dark_seed),
                           f"idler_{setting}")
        idler = concatenate([idler, dark]).sorted()
        coinc = an.coincidence_filter(run.signal, idler, window)
        counts = an.histogram(coinc, cfg.n_bins)
        name = f"coincidence_{setting}"
        res.add_histogram(name, centers, counts)
        res.scalars[f"visibility_{setting}"] = fringe_visibility(counts, cfg)
        res.scalars[f"retained_fraction_{setting}"] = len(coinc) / max(len(run.signal), 1)
        res.scalars[f"n_idler_clicks_{setting}"] = len(idler)
        if setting in _IDLER_THETA:
            res.fits[name] = fit_or_none(counts, centers)

    fv, fh = res.fits.get("coincidence_vertical"), res.fits.get("coincidence_horizontal")
    if fv is not None and fh is not None:
        res.scalars["phase_difference_rad"] = an.phase_difference(fv.phi, fh.phi)
    return res
