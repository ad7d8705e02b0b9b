"""Delayed-choice eraser: a passive beam splitter picks the idler's analysis basis.

Idlers transmitted by the splitter reach the eraser arm, a PBS in the H/V
basis whose ports select the two daughter patterns.  Reflected idlers reach
the which-path arm, a PBS aligned with the slit polarizers whose ports each
select a single slit.  The idler path is longer than the signal path; the
delay only shifts idler timestamps and is compensated in the coincidence
window offset.
"""
from __future__ import annotations

import math

import numpy as np

from .. import analysis as an
from ..detection import ClickStream, concatenate, dark_clicks
from ..polarization import canonical_angle
from ..sources import route
from .config import DelayedChoiceConfig
from .eraser import fit_or_none, fringe_visibility, pbs_split, screen_optics, simulate_pairs
from .result import ExperimentResult

IDLER_DETECTORS = ("eraser_V", "eraser_H", "which_path_p45", "which_path_m45")
ERASER_SUBENSEMBLES = IDLER_DETECTORS[:2]
WHICH_PATH_SUBENSEMBLES = IDLER_DETECTORS[2:]


def which_path_axis(cfg: DelayedChoiceConfig) -> float:
    """PBS axis of the which-path arm: the slit-B polarizer axis, folded into [0, pi/2)."""
    return canonical_angle(cfg.slit_polarizers[1]) % (math.pi / 2)


def run_delayed_choice(cfg: DelayedChoiceConfig) -> ExperimentResult:
    """Signal histograms partitioned by which idler detector fired.

    Every signal click joins at most one subensemble (one-to-one
    coincidence matching against all idler detectors at once); unmatched
    clicks form the ``unpaired`` subensemble, so the subensembles sum to the
    raw histogram bin by bin.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(6 + len(IDLER_DETECTORS))
    optics = screen_optics(cfg)
    run = simulate_pairs(cfg, optics, seeds)
    to_eraser = route(cfg.n_pairs, cfg.splitter_transmittance, np.random.default_rng(seeds[5]))
    eraser_t = pbs_split(optics, run, 0.0)
    wp_t = pbs_split(optics, run, which_path_axis(cfg))
    port = {
        "eraser_V": to_eraser & eraser_t,
        "eraser_H": to_eraser & ~eraser_t,
        "which_path_p45": ~to_eraser & wp_t,
        "which_path_m45": ~to_eraser & ~wp_t,
    }
    t_idler = run.pairs.timestamps + cfg.idler_delay
    streams = []
    for i, name in enumerate(IDLER_DETECTORS):
        keep = port[name] & run.idler_detected
        streams.append(ClickStream.single(name, np.zeros(int(keep.sum()), np.int64), t_idler[keep]))
        streams.append(dark_clicks(1, cfg.dark_rate_hz, 0.0, run.t_end + cfg.idler_delay,
                                   np.random.default_rng(seeds[6 + i]), name))
    idler = concatenate(streams).sorted()

    window = an.CoincidenceWindow(cfg.coincidence_window, offset=-cfg.idler_delay)
    ms, mi = an.coincidence_match(run.signal.timestamps, idler.timestamps, window)
    owner = np.full(len(run.signal), "unpaired", dtype=object)
    owner[ms] = idler.detector[mi]

    res = ExperimentResult("delayed-choice", cfg, cfg.seed)
    centers = optics.centers
    raw = an.histogram(run.signal, cfg.n_bins)
    res.add_histogram("raw", centers, raw)
    res.scalars["visibility_raw"] = fringe_visibility(raw, cfg)
    res.scalars["n_signal_clicks"] = int(raw.sum())
    res.scalars["n_eraser_arm"] = int(to_eraser.sum())
    res.scalars["n_which_path_arm"] = int(cfg.n_pairs - to_eraser.sum())
    res.scalars["fringe_b_analytic_per_m"] = math.pi / cfg.fringe_period
    for name in IDLER_DETECTORS + ("unpaired",):
        counts = an.histogram(run.signal.take(owner == name), cfg.n_bins)
        res.add_histogram(name, centers, counts)
        res.scalars[f"visibility_{name}"] = fringe_visibility(counts, cfg)
        res.scalars[f"n_{name}"] = int(counts.sum())
        if name in ERASER_SUBENSEMBLES and counts.sum() > 0:
            res.fits[name] = fit_or_none(counts, centers)
    fv, fh = res.fits.get("eraser_V"), res.fits.get("eraser_H")
    if fv is not None and fh is not None:
        res.scalars["phase_difference_rad"] = an.phase_difference(fv.phi, fh.phi)
    return res
