"""Sampled 1-D complex fields and their propagation.

Fields live on a uniform transverse grid.  Free-space propagation uses the
band-limited angular spectrum method: the exact Helmholtz transfer function
exp(i 2 pi z sqrt(1/lambda^2 - f^2)), with evanescent components and
components beyond the band limit of the periodic grid removed.  Removal is
only allowed while the discarded spectral power stays below
``max_clipped_power`` of the total; otherwise a :class:`SamplingError` is
raised instead of returning a silently aliased field.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._io import format_float

#: relative spectral power that propagation may discard
CLIPPED_POWER_TOLERANCE = 1e-10


class GridMismatchError(ValueError):
    pass


class GeometryError(ValueError):
    pass


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    n: int
    pitch: float
    origin: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a grid needs at least 2 samples")
        if not self.pitch > 0:
            raise ValueError("grid pitch must be positive")

    @classmethod
    def centered(cls, n: int, pitch: float) -> "Grid":
        """Grid with sample ``n // 2`` at x = 0."""
        return cls(int(n), float(pitch), -(int(n) // 2) * float(pitch))

    @property
    def positions(self) -> np.ndarray:
        return self.origin + self.pitch * np.arange(self.n)

    @property
    def extent(self) -> float:
        return self.n * self.pitch

    @property
    def bounds(self) -> tuple[float, float]:
        """Spatial interval covered by the sample cells."""
        return self.origin - 0.5 * self.pitch, self.origin + (self.n - 0.5) * self.pitch


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    samples: np.ndarray
    pitch: float
    wavelength: float
    origin_offset: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValueError("a field needs a 1-D array of at least 2 samples")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def on_grid(cls, grid: Grid, samples, wavelength: float) -> "ScalarField":
        return cls(samples, grid.pitch, wavelength, grid.origin)

    @classmethod
    def zeros(cls, grid: Grid, wavelength: float) -> "ScalarField":
        return cls.on_grid(grid, np.zeros(grid.n, complex), wavelength)

    @property
    def grid(self) -> Grid:
        return Grid(self.samples.size, self.pitch, self.origin_offset)

    @property
    def positions(self) -> np.ndarray:
        return self.grid.positions

    def with_samples(self, samples) -> "ScalarField":
        return ScalarField(samples, self.pitch, self.wavelength, self.origin_offset)

    def same_grid(self, other: "ScalarField") -> bool:
        return (
            self.samples.size == other.samples.size
            and self.pitch == other.pitch
            and self.origin_offset == other.origin_offset
            and self.wavelength == other.wavelength
        )

    def _check(self, other: "ScalarField"):
        if not self.same_grid(other):
            raise GridMismatchError("fields are sampled on different grids")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return self.with_samples(self.samples - other.samples)

    def __mul__(self, s: complex) -> "ScalarField":
        return self.with_samples(self.samples * s)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    h: ScalarField
    v: ScalarField

    def __post_init__(self):
        if not self.h.same_grid(self.v):
            raise GridMismatchError("h and v components must share one grid")

    @classmethod
    def from_scalar(cls, f: ScalarField, jones) -> "VectorField":
        """Uniformly polarized field ``f`` times a Jones vector."""
        return cls(f * jones.e_h, f * jones.e_v)

    @property
    def positions(self) -> np.ndarray:
        return self.h.positions

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.h + other.h, self.v + other.v)


@dataclass(frozen=True, eq=False)
class ApertureMask:
    transmission: np.ndarray

    def __post_init__(self):
        t = np.array(self.transmission, dtype=float)
        if t.ndim != 1:
            raise ValueError("mask must be 1-D")
        if np.any(~np.isfinite(t)) or t.min(initial=0.0) < 0.0 or t.max(initial=0.0) > 1.0:
            raise ValueError("mask transmission must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "transmission", t)

    @property
    def open_fraction(self) -> float:
        return float(self.transmission.mean())

    def __mul__(self, other: "ApertureMask") -> "ApertureMask":
        return ApertureMask(self.transmission * other.transmission)


def total_power(f: ScalarField | VectorField) -> float:
    if isinstance(f, VectorField):
        return total_power(f.h) + total_power(f.v)
    return float(np.sum(np.abs(f.samples) ** 2) * f.pitch)


# --- apertures -------------------------------------------------------------

def make_slit_mask(grid: Grid, center: float, width: float) -> ApertureMask:
    if not width > 0:
        raise GeometryError("slit width must be positive")
    lo, hi = grid.bounds
    if center - width / 2 < lo or center + width / 2 > hi:
        raise GeometryError("slit does not fit inside the grid extent")
    x = grid.positions
    return ApertureMask((np.abs(x - center) <= width / 2).astype(float))


def make_two_slit_mask(grid: Grid, slit_width: float, slit_separation: float) -> ApertureMask:
    """Binary mask with slits centred at -separation/2 and +separation/2."""
    if not slit_width > 0:
        raise GeometryError("slit_width must be positive")
    if not slit_separation > slit_width:
        raise GeometryError("slit_separation must exceed slit_width")
    a = make_slit_mask(grid, -slit_separation / 2, slit_width)
    b = make_slit_mask(grid, slit_separation / 2, slit_width)
    return ApertureMask(np.maximum(a.transmission, b.transmission))


def make_wire_grid_mask(grid: Grid, centers: Sequence[float], wire_width: float) -> ApertureMask:
    """Opaque wires of width ``wire_width`` centred at ``centers``.

    Each sample cell transmits the fraction of its width not covered by a
    wire, so the blocked area equals the wire area regardless of where the
    wire edges fall relative to the samples.
    """
    if not wire_width > 0:
        raise GeometryError("wire width must be positive")
    x = grid.positions
    lo = x - grid.pitch / 2
    hi = x + grid.pitch / 2
    blocked = np.zeros(grid.n)
    for c in centers:
        i0 = max(int(math.floor((c - wire_width / 2 - grid.origin) / grid.pitch)) - 1, 0)
        i1 = min(int(math.ceil((c + wire_width / 2 - grid.origin) / grid.pitch)) + 2, grid.n)
        if i0 >= i1:
            continue
        overlap = np.minimum(hi[i0:i1], c + wire_width / 2) - np.maximum(lo[i0:i1], c - wire_width / 2)
        blocked[i0:i1] += np.clip(overlap, 0.0, None) / grid.pitch
    return ApertureMask(1.0 - np.clip(blocked, 0.0, 1.0))


def gaussian_slit_field(grid: Grid, wavelength: float, center: float, width: float,
                        waist: float, amplitude: complex = 1.0) -> ScalarField:
    """Slit of ``width`` at ``center`` lit by a Gaussian of 1/e amplitude radius ``waist``."""
    if not waist > 0:
        raise GeometryError("beam waist must be positive")
    mask = make_slit_mask(grid, center, width)
    x = grid.positions
    beam = amplitude * np.exp(-((x - center) / waist) ** 2)
    return ScalarField.on_grid(grid, beam * mask.transmission, wavelength)


def two_slit_fields(grid: Grid, wavelength: float, slit_width: float, slit_separation: float,
                    waist: float) -> tuple[ScalarField, ScalarField]:
    """Fields just behind slit A (x < 0) and slit B (x > 0), each Gaussian-apodized."""
    make_two_slit_mask(grid, slit_width, slit_separation)  # geometry checks
    a = gaussian_slit_field(grid, wavelength, -slit_separation / 2, slit_width, waist)
    b = gaussian_slit_field(grid, wavelength, slit_separation / 2, slit_width, waist)
    return a, b


def apply_mask(f: ScalarField | VectorField, m: ApertureMask) -> ScalarField | VectorField:
    if isinstance(f, VectorField):
        return VectorField(apply_mask(f.h, m), apply_mask(f.v, m))
    if m.transmission.size != f.samples.size:
        raise GridMismatchError(
            f"mask has {m.transmission.size} samples, field has {f.samples.size}")
    return f.with_samples(f.samples * m.transmission)


# --- propagation -----------------------------------------------------------

def band_limit(n: int, pitch: float, wavelength: float, distance: float) -> float:
    """Highest spatial frequency whose transfer-function phase is sampled without aliasing."""
    extent = n * pitch
    return 1.0 / (wavelength * math.sqrt((2.0 * distance / extent) ** 2 + 1.0))


def _passband(n: int, pitch: float, wavelength: float, distance: float) -> tuple[np.ndarray, np.ndarray]:
    fx = np.fft.fftfreq(n, pitch)
    arg = 1.0 / wavelength**2 - fx**2
    keep = (arg > 0) & (np.abs(fx) <= band_limit(n, pitch, wavelength, distance))
    return keep, arg


def transfer_function(n: int, pitch: float, wavelength: float, distance: float) -> np.ndarray:
    keep, arg = _passband(n, pitch, wavelength, distance)
    kz = 2.0 * np.pi * np.sqrt(np.where(keep, arg, 0.0))
    return np.where(keep, np.exp(1j * kz * distance), 0.0)


def clipped_power_fraction(f: ScalarField, distance: float) -> float:
    """Fraction of spectral power outside the passband at ``distance``."""
    spectrum = np.abs(np.fft.fft(f.samples)) ** 2
    total = spectrum.sum()
    if total == 0.0:
        return 0.0
    keep, _ = _passband(f.samples.size, f.pitch, f.wavelength, distance)
    return float(spectrum[~keep].sum() / total)


def propagate(f: ScalarField | VectorField, distance: float,
              max_clipped_power: float = CLIPPED_POWER_TOLERANCE) -> ScalarField | VectorField:
    """Propagate ``f`` a distance ``distance`` (m) through free space."""
    if isinstance(f, VectorField):
        return VectorField(propagate(f.h, distance, max_clipped_power),
                           propagate(f.v, distance, max_clipped_power))
    if distance < 0:
        raise ValueError("propagation distance must be non-negative")
    if distance == 0:
        return f
    clipped = clipped_power_fraction(f, distance)
    if clipped > max_clipped_power:
        raise SamplingError(
            f"{clipped:.3g} of the field power lies beyond the grid band limit at "
            f"z = {distance:g} m; enlarge the grid extent or shorten the distance")
    h = transfer_function(f.samples.size, f.pitch, f.wavelength, distance)
    return f.with_samples(np.fft.ifft(np.fft.fft(f.samples) * h))


def apply_thin_lens(f: ScalarField | VectorField, focal_length: float) -> ScalarField | VectorField:
    """Multiply by the paraxial lens phase exp(-i pi x^2 / (lambda f))."""
    if isinstance(f, VectorField):
        return VectorField(apply_thin_lens(f.h, focal_length), apply_thin_lens(f.v, focal_length))
    if focal_length == 0:
        raise ValueError("focal length must be non-zero")
    if math.isinf(focal_length):
        return f
    x = f.positions
    return f.with_samples(f.samples * np.exp(-1j * np.pi * x**2 / (f.wavelength * focal_length)))


def intensity_profile(f: ScalarField | VectorField) -> np.ndarray:
    """Per-sample |h|^2 + |v|^2."""
    if isinstance(f, VectorField):
        return np.abs(f.h.samples) ** 2 + np.abs(f.v.samples) ** 2
    return np.abs(f.samples) ** 2


def bin_profile(f: ScalarField | VectorField, edges: np.ndarray) -> np.ndarray:
    """Integrate intensity over detector bins delimited by ``edges`` (m)."""
    x = f.positions
    pitch = f.h.pitch if isinstance(f, VectorField) else f.pitch
    idx = np.searchsorted(edges, x, side="right") - 1
    ok = (idx >= 0) & (idx < edges.size - 1)
    return np.bincount(idx[ok], intensity_profile(f)[ok] * pitch, minlength=edges.size - 1)


# --- serialization ---------------------------------------------------------

FIELD_COLUMNS = ("position_m", "re_h", "im_h", "re_v", "im_v")


def _as_vector(f: ScalarField | VectorField) -> VectorField:
    if isinstance(f, VectorField):
        return f
    return VectorField(ScalarField.zeros(f.grid, f.wavelength), f)


def field_to_csv(f: ScalarField | VectorField) -> str:
    """CSV text; a scalar field is written as the vertical component."""
    vf = _as_vector(f)
    out = io.StringIO()
    out.write(",".join(FIELD_COLUMNS) + "\n")
    for x, h, v in zip(vf.positions, vf.h.samples, vf.v.samples):
        out.write(",".join(format_float(c) for c in (x, h.real, h.imag, v.real, v.imag)) + "\n")
    return out.getvalue()


def field_from_csv(text: str, wavelength: float) -> VectorField:
    rows = [line.split(",") for line in text.strip().splitlines()]
    if tuple(rows[0]) != FIELD_COLUMNS:
        raise ValueError(f"expected columns {FIELD_COLUMNS}, got {tuple(rows[0])}")
    data = np.array(rows[1:], dtype=float)
    x = data[:, 0]
    pitch = float(x[1] - x[0])
    h = ScalarField(data[:, 1] + 1j * data[:, 2], pitch, wavelength, float(x[0]))
    v = ScalarField(data[:, 3] + 1j * data[:, 4], pitch, wavelength, float(x[0]))
    return VectorField(h, v)


def field_to_dict(f: ScalarField | VectorField) -> dict:
    vf = _as_vector(f)
    return {
        "wavelength_m": vf.h.wavelength,
        "pitch_m": vf.h.pitch,
        "origin_m": vf.h.origin_offset,
        "re_h": vf.h.samples.real.tolist(),
        "im_h": vf.h.samples.imag.tolist(),
        "re_v": vf.v.samples.real.tolist(),
        "im_v": vf.v.samples.imag.tolist(),
    }


def field_to_json(f: ScalarField | VectorField) -> str:
    return json.dumps(field_to_dict(f))
