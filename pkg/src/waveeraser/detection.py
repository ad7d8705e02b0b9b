"""Semiclassical photodetection.

A continuous intensity profile becomes discrete clicks because the detector
is made of discrete charges: each bin fires as a Poisson process whose rate
is proportional to the local intensity.  The threshold-population model
below shows why the first click can arrive long before the classical
charging time of a single cold electron.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._io import format_float


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_rate: float = 0.0  # Hz per bin
    n_bins: int = 1
    exposure: float = 1.0  # s
    dead_time: float = 0.0  # s, per bin

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.dark_rate < 0:
            raise ValueError("dark_rate must be non-negative")
        if self.n_bins < 1:
            raise ValueError("n_bins must be at least 1")
        if not self.exposure > 0:
            raise ValueError("exposure must be positive")
        if self.dead_time < 0:
            raise ValueError("dead_time must be non-negative")


@dataclass(frozen=True)
class ClickEvent:
    detector_id: str
    bin: int
    timestamp: float


@dataclass(frozen=True, eq=False)
class ClickStream:
    """Column-wise click record; iterating yields :class:`ClickEvent`."""

    detector: np.ndarray
    bins: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        n = len(self.timestamps)
        if len(self.bins) != n or len(self.detector) != n:
            raise ValueError("click columns must have equal length")

    @classmethod
    def empty(cls) -> "ClickStream":
        return cls(np.array([], dtype=str), np.array([], dtype=np.int64), np.array([], dtype=float))

    @classmethod
    def single(cls, detector_id: str, bins, timestamps) -> "ClickStream":
        bins = np.asarray(bins, dtype=np.int64)
        return cls(np.full(bins.size, detector_id), bins, np.asarray(timestamps, dtype=float))

    @classmethod
    def from_events(cls, events: Iterable[ClickEvent]) -> "ClickStream":
        events = list(events)
        if not events:
            return cls.empty()
        return cls(np.array([e.detector_id for e in events]),
                   np.array([e.bin for e in events], dtype=np.int64),
                   np.array([e.timestamp for e in events], dtype=float))

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> ClickEvent:
        return ClickEvent(str(self.detector[i]), int(self.bins[i]), float(self.timestamps[i]))

    def __iter__(self) -> Iterator[ClickEvent]:
        for i in range(len(self)):
            yield self[i]

    def take(self, index) -> "ClickStream":
        return ClickStream(self.detector[index], self.bins[index], self.timestamps[index])

    def sorted(self) -> "ClickStream":
        order = np.lexsort((self.bins, self.timestamps))
        return self.take(order)


def as_stream(clicks: ClickStream | Sequence[ClickEvent]) -> ClickStream:
    return clicks if isinstance(clicks, ClickStream) else ClickStream.from_events(clicks)


def concatenate(streams: Sequence[ClickStream]) -> ClickStream:
    streams = [s for s in streams if len(s)]
    if not streams:
        return ClickStream.empty()
    return ClickStream(np.concatenate([s.detector for s in streams]),
                       np.concatenate([s.bins for s in streams]),
                       np.concatenate([s.timestamps for s in streams]))


def _check_profile(profile, model: DetectorModel) -> np.ndarray:
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1 or p.size != model.n_bins:
        raise LengthMismatchError(f"profile has {p.size} bins, detector has {model.n_bins}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("intensities must be finite and non-negative")
    return p


def expected_counts(profile, model: DetectorModel) -> np.ndarray:
    """Mean clicks per bin: efficiency * I * exposure + dark_rate * exposure."""
    p = _check_profile(profile, model)
    return model.efficiency * p * model.exposure + model.dark_rate * model.exposure


def sample_counts(profile, model: DetectorModel, seed) -> np.ndarray:
    """Poisson click count per bin; the counting half of :func:`sample_clicks`."""
    rng = np.random.default_rng(seed)
    return rng.poisson(expected_counts(profile, model))


def sample_clicks(profile, model: DetectorModel, seed, detector_id: str = "signal") -> ClickStream:
    """Clicks for intensity ``profile`` (counts/s per bin) over one exposure.

    Counts are identical to :func:`sample_counts` with the same seed; the
    timestamps come from the same generator afterwards, uniform over
    ``[0, exposure]``.
    """
    rng = np.random.default_rng(seed)
    counts = rng.poisson(expected_counts(profile, model))
    bins = np.repeat(np.arange(model.n_bins, dtype=np.int64), counts)
    times = rng.uniform(0.0, model.exposure, size=bins.size)
    stream = ClickStream.single(detector_id, bins, times).sorted()
    if model.dead_time > 0:
        stream = apply_dead_time(stream, model.dead_time)
    return stream


def apply_dead_time(clicks: ClickStream, dead_time: float) -> ClickStream:
    """Drop clicks arriving within ``dead_time`` of the last accepted click in the same bin."""
    if dead_time <= 0 or len(clicks) == 0:
        return clicks
    clicks = clicks.sorted()
    keep = np.zeros(len(clicks), bool)
    last: dict[tuple[str, int], float] = {}
    for i, (d, b, t) in enumerate(zip(clicks.detector, clicks.bins, clicks.timestamps)):
        key = (str(d), int(b))
        if key not in last or t - last[key] >= dead_time:
            keep[i] = True
            last[key] = t
    return clicks.take(keep)


def sample_pulse_clicks(weights, n_pulses: int, efficiency: float, rng: np.random.Generator):
    """Where each of ``n_pulses`` identical pulses lands, and whether it clicks.

    ``weights`` are non-negative landing weights per bucket (normalized
    internally; callers may reserve a bucket for light missing the
    detector).  Returns the landing bucket of every pulse and a boolean
    mask of pulses registered with probability ``efficiency``.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("landing weights must be non-negative with a positive sum")
    if not 0.0 <= efficiency <= 1.0:
        raise ValueError("efficiency must lie in [0, 1]")
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    landing = np.searchsorted(cdf, rng.random(n_pulses), side="right").astype(np.int64)
    landing = np.minimum(landing, w.size - 1)
    detected = rng.random(n_pulses) < efficiency
    return landing, detected


def dark_clicks(n_bins: int, rate_per_bin: float, t0: float, t1: float,
                rng: np.random.Generator, detector_id: str) -> ClickStream:
    if rate_per_bin <= 0 or t1 <= t0:
        return ClickStream.empty()
    counts = rng.poisson(rate_per_bin * (t1 - t0), size=n_bins)
    bins = np.repeat(np.arange(n_bins, dtype=np.int64), counts)
    return ClickStream.single(detector_id, bins, rng.uniform(t0, t1, size=bins.size))


CLICK_COLUMNS = ("detector_id", "bin", "timestamp_s")


def clicks_to_csv(clicks: ClickStream) -> str:
    out = io.StringIO()
    out.write(",".join(CLICK_COLUMNS) + "\n")
    for d, b, t in zip(clicks.detector, clicks.bins, clicks.timestamps):
        out.write(f"{d},{int(b)},{format_float(t)}\n")
    return out.getvalue()


def clicks_to_records(clicks: ClickStream) -> list[dict]:
    return [{"detector_id": str(d), "bin": int(b), "timestamp_s": float(t)}
            for d, b, t in zip(clicks.detector, clicks.bins, clicks.timestamps)]


# --- threshold population -------------------------------------------------

@dataclass(frozen=True)
class ThresholdPopulation:
    """Electrons whose noise energy is exponential with mean ``noise_energy_scale`` (eV).

    Each step every electron redraws its noise energy while all of them
    accumulate the absorbed signal energy; an electron escapes once noise
    plus accumulated signal reaches ``binding_energy``.
    """

    n_electrons: int
    noise_energy_scale: float
    binding_energy: float
    signal_power_coupling: float  # eV/s per unit intensity

    def __post_init__(self):
        if self.n_electrons < 1:
            raise ValueError("n_electrons must be at least 1")
        if self.noise_energy_scale < 0:
            raise ValueError("noise_energy_scale must be non-negative")
        if not self.binding_energy > self.noise_energy_scale:
            raise ValueError("binding_energy must exceed noise_energy_scale")
        if not self.signal_power_coupling > 0:
            raise ValueError("signal_power_coupling must be positive")


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    std: float
    stderr: float
    quantiles: dict = field(default_factory=dict)
    n_trials: int = 0
    n_clicked: int = 0


#: hazard tables longer than this are refused
MAX_STEPS = 10_000_000


def charging_time(pop: ThresholdPopulation, incident_intensity: float) -> float:
    """Time for a cold electron to absorb the full binding energy."""
    if incident_intensity <= 0:
        return math.inf
    return pop.binding_energy / (pop.signal_power_coupling * incident_intensity)


def escape_probabilities(pop: ThresholdPopulation, incident_intensity: float,
                         step_time: float, steps: np.ndarray) -> np.ndarray:
    """Per-electron escape probability during each (1-based) step."""
    gained = pop.signal_power_coupling * incident_intensity * step_time * steps
    gap = np.maximum(pop.binding_energy - gained, 0.0)
    if pop.noise_energy_scale == 0:
        return (gap <= 0).astype(float)
    return np.exp(-gap / pop.noise_energy_scale)


def _cumulative_hazard(pop, incident_intensity, step_time):
    """Cumulative hazard of the first click after each step, or a constant hazard."""
    de = pop.signal_power_coupling * incident_intensity * step_time
    if de <= 0:
        p = float(escape_probabilities(pop, 0.0, step_time, np.array([1.0]))[0])
        return None, -pop.n_electrons * math.log1p(-p) if p < 1 else math.inf
    k_max = math.ceil(pop.binding_energy / de - 1e-12)
    if k_max > MAX_STEPS:
        raise ValueError(f"{k_max} steps to the charging time; increase step_time")
    k = np.arange(1, max(k_max, 1) + 1, dtype=float)
    p = escape_probabilities(pop, incident_intensity, step_time, k)
    with np.errstate(divide="ignore"):
        h = -pop.n_electrons * np.log1p(-np.minimum(p, 1.0))
    return np.cumsum(h), None


def first_click_latency(pop: ThresholdPopulation, incident_intensity: float, n_trials: int,
                        seed, step_time: float = 1e-9) -> LatencyStats:
    """Distribution of the time to the first escaping electron over ``n_trials`` runs."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if not step_time > 0:
        raise ValueError("step_time must be positive")
    rng = np.random.default_rng(seed)
    e = rng.exponential(size=n_trials)
    cum, rate = _cumulative_hazard(pop, incident_intensity, step_time)
    if cum is not None:
        steps = np.searchsorted(cum, e, side="left") + 1.0
    elif rate == 0:
        steps = np.full(n_trials, math.inf)
    else:
        steps = np.maximum(np.ceil(e / rate), 1.0)
    return _summarize(steps * step_time)


def _summarize(latency: np.ndarray) -> LatencyStats:
    clicked = latency[np.isfinite(latency)]
    n = latency.size
    if clicked.size < n or clicked.size == 0:
        mean = std = stderr = math.inf
        qs = {q: (float(np.quantile(latency, q)) if clicked.size else math.inf)
              for q in (0.05, 0.5, 0.95)}
    else:
        mean = float(clicked.mean())
        std = float(clicked.std(ddof=1)) if n > 1 else 0.0
        stderr = std / math.sqrt(n)
        qs = {q: float(np.quantile(clicked, q)) for q in (0.05, 0.5, 0.95)}
    return LatencyStats(mean, std, stderr, qs, n, int(clicked.size))


def expected_latency(pop: ThresholdPopulation, incident_intensity: float,
                     step_time: float = 1e-9) -> float:
    """Exact mean of the step-discretized first-click time."""
    cum, rate = _cumulative_hazard(pop, incident_intensity, step_time)
    if cum is None:
        if rate == 0:
            return math.inf
        return step_time / -math.expm1(-rate)
    survival = np.exp(-cum)
    return step_time * (1.0 + float(survival[:-1].sum()))
