"""Wire grid at the interference nodes, followed by a lens imaging the slits.

Wires sit at the nodes of the two-slit pattern found a distance
``slits_to_grid_m`` behind the slits.  The lens images the slit plane onto
the image plane, so each slit maps to its own image spot.  Four cases are
computed: with and without the grid, with both slits open and with one
blocked.
"""
from __future__ import annotations

import numpy as np

from .. import analysis as an
from ..wavefield import (GeometryError, Grid, ScalarField, apply_mask, apply_thin_lens,
                         intensity_profile, make_wire_grid_mask, propagate, total_power,
                         two_slit_fields)
from .config import AfsharConfig
from .result import ExperimentResult


class ImagingConditionError(ValueError):
    pass


def _image(cfg: AfsharConfig, at_grid: ScalarField) -> ScalarField:
    at_lens = propagate(at_grid, cfg.grid_to_lens_m)
    return propagate(apply_thin_lens(at_lens, cfg.focal_length_m), cfg.lens_to_image_m)


def _peak_positions(profile: np.ndarray, x: np.ndarray, count: int) -> np.ndarray:
    inner = profile[1:-1]
    idx = np.flatnonzero((inner > profile[:-2]) & (inner >= profile[2:])) + 1
    top = idx[np.argsort(profile[idx])[::-1][:count]]
    return np.sort(x[top])


def run_afshar(cfg: AfsharConfig) -> ExperimentResult:
    """Image-plane profiles and grid interception for {grid, no grid} x {both slits, one slit}.

    ``power_intercepted`` is the fraction of the power reaching the grid
    plane that the wires remove; ``fidelity`` is the normalized cross
    correlation of the image with and without the grid.
    """
    mismatch = cfg.imaging_mismatch()
    if mismatch > cfg.imaging_tolerance:
        raise ImagingConditionError(
            f"1/s + 1/s' = 1/f violated by {mismatch:.3g} (relative), tolerance "
            f"{cfg.imaging_tolerance:g}; s = {cfg.object_distance:g} m, s' = {cfg.lens_to_image_m:g} m, "
            f"f = {cfg.focal_length_m:g} m")
    grid = Grid.centered(cfg.grid_points, cfg.grid_pitch)
    x = grid.positions
    ea, eb = two_slit_fields(grid, cfg.wavelength, cfg.slit_width, cfg.slit_separation, cfg.beam_waist)
    open_field, blocked_center = (eb, -cfg.slit_separation / 2) if cfg.blocked_slit == "slit_a" \
        else (ea, cfg.slit_separation / 2)
    sources = {"both": ea + eb, "one": open_field}
    at_grid = {k: propagate(f, cfg.slits_to_grid_m) for k, f in sources.items()}

    grid_profile = intensity_profile(at_grid["both"])
    nodes = an.find_nodes(grid_profile, x, cfg.node_fraction)
    if nodes.size < 2:
        raise GeometryError("fewer than two interference nodes found at the grid plane")
    spacing = float(np.median(np.diff(nodes)))
    wire_width = cfg.wire_width_fraction * spacing
    wires = make_wire_grid_mask(grid, nodes, wire_width)

    res = ExperimentResult("afshar", cfg, cfg.seed)
    m = cfg.magnification
    half = abs(m) * (cfg.slit_separation + 2 * cfg.slit_width)
    crop = np.abs(x) <= half
    node_span = (x >= nodes[0] - spacing) & (x <= nodes[-1] + spacing)
    res.arrays["node_positions_m"] = nodes
    res.scalars.update({"n_nodes": int(nodes.size), "node_spacing_m": spacing,
                        "node_spacing_analytic_m": cfg.wavelength * cfg.slits_to_grid_m / cfg.slit_separation,
                        "wire_width_m": wire_width, "magnification": m})

    images = {}
    for case, field in at_grid.items():
        before = total_power(field)
        after = apply_mask(field, wires)
        plain = intensity_profile(_image(cfg, field))
        gridded = intensity_profile(_image(cfg, after))
        images[case] = (plain, gridded)
        res.scalars[f"power_intercepted_{case}"] = (before - total_power(after)) / before
        res.scalars[f"fidelity_{case}"] = an.normalized_cross_correlation(plain, gridded)
        res.scalars[f"image_power_ratio_{case}"] = float(gridded.sum() / plain.sum())
        res.add_histogram(f"grid_plane_{case}", x[node_span], intensity_profile(field)[node_span])
        res.add_histogram(f"image_{case}_no_grid", x[crop], plain[crop])
        res.add_histogram(f"image_{case}_grid", x[crop], gridded[crop])

    peaks = _peak_positions(images["both"][0], x, 2)
    expected = np.sort(m * np.array([-cfg.slit_separation / 2, cfg.slit_separation / 2]))
    res.arrays["image_peaks_m"] = peaks
    res.arrays["image_conjugates_m"] = expected
    if peaks.size == 2:
        res.scalars["image_peak_offset_samples"] = float(np.max(np.abs(peaks - expected)) / grid.pitch)
    # light in the blocked slit's image spot, relative to the whole image
    ghost = np.abs(x - m * blocked_center) <= abs(m) * cfg.slit_width / 2
    one_grid = images["one"][1]
    res.scalars["ghost_fraction_one_grid"] = float(one_grid[ghost].sum() / one_grid.sum())
    res.scalars["ghost_fraction_one_no_grid"] = float(images["one"][0][ghost].sum() / images["one"][0].sum())
    return res
