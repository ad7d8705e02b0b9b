"""Flat, unit-suffixed experiment configurations.

Every key carries its unit in its name (``slit_width_um``, ``screen_distance_m``)
so that unit slips show up in review.  Files are TOML with top-level keys
only; unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, fields
from typing import Any, ClassVar, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_SEED = 12345
IDLER_SETTINGS = ("vertical", "horizontal", "absent")
PDC_TYPES = ("type1", "type2")
SLIT_NAMES = ("slit_a", "slit_b")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _require(cond: bool, key: str, what: str, value: Any):
    if not cond:
        raise ConfigError(f"{key}: {what} (got {value!r})")


def _positive(cfg, *keys):
    for k in keys:
        v = getattr(cfg, k)
        _require(math.isfinite(v) and v > 0, k, "must be positive", v)


def _fraction(cfg, *keys):
    for k in keys:
        v = getattr(cfg, k)
        _require(0.0 <= v <= 1.0, k, "must lie in [0, 1]", v)


def _non_negative(cfg, *keys):
    for k in keys:
        v = getattr(cfg, k)
        _require(math.isfinite(v) and v >= 0, k, "must be non-negative", v)


@dataclass(frozen=True)
class _SlitOptics:
    wavelength_nm: float = 702.0
    slit_width_um: float = 40.0
    slit_separation_um: float = 250.0
    beam_waist_um: float = 10.0
    grid_pitch_um: float = 2.0
    seed: int = DEFAULT_SEED

    def _check_optics(self):
        _positive(self, "wavelength_nm", "slit_width_um", "slit_separation_um",
                  "beam_waist_um", "grid_pitch_um")
        _require(self.slit_separation_um > self.slit_width_um, "slit_separation_um",
                 "must exceed slit_width_um", self.slit_separation_um)
        _require(0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer", self.seed)

    @property
    def wavelength(self) -> float:
        return self.wavelength_nm * 1e-9

    @property
    def slit_width(self) -> float:
        return self.slit_width_um * 1e-6

    @property
    def slit_separation(self) -> float:
        return self.slit_separation_um * 1e-6

    @property
    def beam_waist(self) -> float:
        return self.beam_waist_um * 1e-6

    @property
    def grid_pitch(self) -> float:
        return self.grid_pitch_um * 1e-6


@dataclass(frozen=True)
class _EraserBase(_SlitOptics):
    screen_distance_m: float = 1.0
    slit_polarizer_a_deg: float = -45.0
    slit_polarizer_b_deg: float = 45.0
    pdc_type: str = "type1"
    n_pairs: int = 100_000
    pair_rate_hz: float = 1e5
    pairing_efficiency: float = 1.0
    detector_efficiency: float = 1.0
    idler_efficiency: float = 1.0
    dark_rate_hz: float = 0.0
    dead_time_ns: float = 0.0
    n_bins: int = 192
    screen_half_width_mm: float = 33.6
    coincidence_window_ns: float = 5.0
    grid_points: int = 262_144

    def __post_init__(self):
        self._check_optics()
        _positive(self, "screen_distance_m", "pair_rate_hz", "screen_half_width_mm",
                  "coincidence_window_ns")
        _require(self.pdc_type in PDC_TYPES, "pdc_type", f"must be one of {PDC_TYPES}", self.pdc_type)
        _require(self.n_pairs >= 1, "n_pairs", "must be at least 1", self.n_pairs)
        _require(self.n_bins >= 1, "n_bins", "must be at least 1", self.n_bins)
        _require(self.grid_points >= 2, "grid_points", "must be at least 2", self.grid_points)
        _fraction(self, "pairing_efficiency", "detector_efficiency", "idler_efficiency")
        _non_negative(self, "dark_rate_hz", "dead_time_ns")
        for k in ("slit_polarizer_a_deg", "slit_polarizer_b_deg"):
            _require(math.isfinite(getattr(self, k)), k, "must be finite", getattr(self, k))
        extent = self.grid_points * self.grid_pitch
        _require(self.screen_half_width_mm * 1e-3 < extent / 2, "screen_half_width_mm",
                 f"must lie inside the simulation grid (half extent {extent / 2 * 1e3:g} mm)",
                 self.screen_half_width_mm)
        _require(self.slit_separation / 2 + self.slit_width / 2 < extent / 2, "slit_separation_um",
                 "slits must fit inside the simulation grid", self.slit_separation_um)

    @property
    def screen_distance(self) -> float:
        return self.screen_distance_m

    @property
    def screen_half_width(self) -> float:
        return self.screen_half_width_mm * 1e-3

    @property
    def coincidence_window(self) -> float:
        return self.coincidence_window_ns * 1e-9

    @property
    def dead_time(self) -> float:
        return self.dead_time_ns * 1e-9

    @property
    def slit_polarizers(self) -> tuple[float, float]:
        return math.radians(self.slit_polarizer_a_deg), math.radians(self.slit_polarizer_b_deg)

    @property
    def fringe_period(self) -> float:
        """Far-field two-slit fringe period lambda L / d at the screen."""
        return self.wavelength * self.screen_distance / self.slit_separation


@dataclass(frozen=True)
class EraserConfig(_EraserBase):
    kind: ClassVar[str] = "eraser"
    idler_polarizers: tuple = IDLER_SETTINGS

    def __post_init__(self):
        object.__setattr__(self, "idler_polarizers", tuple(self.idler_polarizers))
        super().__post_init__()
        _require(len(self.idler_polarizers) >= 1, "idler_polarizers", "must not be empty",
                 self.idler_polarizers)
        for s in self.idler_polarizers:
            _require(s in IDLER_SETTINGS, "idler_polarizers", f"entries must be in {IDLER_SETTINGS}", s)
        _require(len(set(self.idler_polarizers)) == len(self.idler_polarizers), "idler_polarizers",
                 "must not repeat a setting", self.idler_polarizers)


@dataclass(frozen=True)
class DelayedChoiceConfig(_EraserBase):
    kind: ClassVar[str] = "delayed-choice"
    splitter_transmittance: float = 0.5
    idler_delay_ns: float = 50.0

    def __post_init__(self):
        super().__post_init__()
        _fraction(self, "splitter_transmittance")
        _non_negative(self, "idler_delay_ns")

    @property
    def idler_delay(self) -> float:
        return self.idler_delay_ns * 1e-9


@dataclass(frozen=True)
class AfsharConfig(_SlitOptics):
    kind: ClassVar[str] = "afshar"
    slits_to_grid_m: float = 0.25
    grid_to_lens_m: float = 0.25
    focal_length_m: float = 0.25
    lens_to_image_m: float = 0.5
    imaging_tolerance: float = 1e-3
    wire_width_fraction: float = 0.1
    node_fraction: float = 0.05
    blocked_slit: str = "slit_a"
    grid_points: int = 131_072

    def __post_init__(self):
        self._check_optics()
        _positive(self, "slits_to_grid_m", "grid_to_lens_m", "lens_to_image_m", "imaging_tolerance")
        _require(math.isfinite(self.focal_length_m) and self.focal_length_m != 0, "focal_length_m",
                 "must be finite and non-zero", self.focal_length_m)
        _require(0 < self.wire_width_fraction < 1, "wire_width_fraction",
                 "must lie in (0, 1) so wires are narrower than the node spacing",
                 self.wire_width_fraction)
        _require(0 < self.node_fraction < 1, "node_fraction", "must lie in (0, 1)", self.node_fraction)
        _require(self.blocked_slit in SLIT_NAMES, "blocked_slit", f"must be one of {SLIT_NAMES}",
                 self.blocked_slit)
        _require(self.grid_points >= 2, "grid_points", "must be at least 2", self.grid_points)

    @property
    def object_distance(self) -> float:
        return self.slits_to_grid_m + self.grid_to_lens_m

    def imaging_mismatch(self) -> float:
        """Relative violation of 1/s + 1/s' = 1/f."""
        s, si, f = self.object_distance, self.lens_to_image_m, self.focal_length_m
        return abs((1 / s + 1 / si - 1 / f) * f)

    @property
    def magnification(self) -> float:
        return -self.lens_to_image_m / self.object_distance


CONFIG_TYPES = {c.kind: c for c in (EraserConfig, DelayedChoiceConfig, AfsharConfig)}


# --- (de)serialization ----------------------------------------------------

def config_keys(cls) -> list[str]:
    return [f.name for f in fields(cls)]


def config_echo(cfg) -> dict:
    """Every key and its value, defaults included."""
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(cfg).items()}


def _coerce(cls, key: str, value: Any, line: int | None):
    where = f" (line {line})" if line else ""
    default = next(f.default for f in fields(cls) if f.name == key)
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{key}{where}: booleans are not accepted")
    if isinstance(default, int):
        if not isinstance(value, int):
            raise ConfigError(f"{key}{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{key}{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{key}{where}: expected a list of strings, got {value!r}")
        return tuple(value)
    raise ConfigError(f"{key}{where}: unsupported value {value!r}")


def _key_lines(text: str) -> dict[str, int]:
    lines = {}
    for n, ln in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*([A-Za-z0-9_\-]+)\s*=", ln)
        if m:
            lines.setdefault(m.group(1), n)
    return lines


def config_from_mapping(cls, data: Mapping[str, Any], key_lines: Mapping[str, int] | None = None):
    key_lines = key_lines or {}
    allowed = set(config_keys(cls))
    unknown = sorted(set(data) - allowed)
    if unknown:
        where = ", ".join(f"{k} (line {key_lines[k]})" if k in key_lines else k for k in unknown)
        raise ConfigError(f"unknown key(s) for {cls.kind}: {where}; allowed keys: {', '.join(sorted(allowed))}")
    kwargs = {k: _coerce(cls, k, v, key_lines.get(k)) for k, v in data.items()}
    return cls(**kwargs)


def config_from_toml(cls, text: str):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    tables = [k for k, v in data.items() if isinstance(v, dict)]
    if tables:
        raise ConfigError(f"tables are not supported, keys must be top-level: {', '.join(tables)}")
    return config_from_mapping(cls, data, _key_lines(text))


def _toml_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_toml(cfg) -> str:
    lines = [f"# {cfg.kind} configuration"]
    lines += [f"{k} = {_toml_value(v)}" for k, v in config_echo(cfg).items()]
    return "\n".join(lines) + "\n"
