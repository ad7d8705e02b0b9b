"""Histograms, coincidence filtering, visibility, fringe fitting and node finding."""
from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from ._io import dumps, format_float
from .detection import ClickEvent, ClickStream, as_stream

DEFAULT_WINDOW = 5e-9


# --- histograms -----------------------------------------------------------

def histogram(clicks: ClickStream | Sequence[ClickEvent], n_bins: int) -> np.ndarray:
    """Counts per bin; clicks with out-of-range bins are ignored."""
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    bins = as_stream(clicks).bins
    bins = bins[(bins >= 0) & (bins < n_bins)]
    return np.bincount(bins, minlength=n_bins).astype(np.int64)


def bin_centers(edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    return 0.5 * (edges[1:] + edges[:-1])


HISTOGRAM_COLUMNS = ("bin_center_m", "counts")


def histogram_to_csv(centers, counts) -> str:
    out = io.StringIO()
    out.write(",".join(HISTOGRAM_COLUMNS) + "\n")
    for c, n in zip(centers, counts):
        n = float(n)
        out.write(f"{format_float(c)},{int(n) if n.is_integer() else format_float(n)}\n")
    return out.getvalue()


def histogram_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or tuple(h.strip() for h in lines[0].split(",")) != HISTOGRAM_COLUMNS:
        raise ValueError(f"histogram CSV must have header {','.join(HISTOGRAM_COLUMNS)}")
    data = np.array([ln.split(",") for ln in lines[1:]], dtype=float).reshape(-1, 2)
    return data[:, 0], data[:, 1]


# --- coincidences ---------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceWindow:
    """Accept pairs with ``|t_signal - t_idler - offset| <= width / 2``.

    ``offset`` compensates a known extra path delay on the signal side.
    """

    width: float = DEFAULT_WINDOW
    offset: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("coincidence window width must be positive")


def coincidence_match(signal_times, idler_times, window: CoincidenceWindow) -> tuple[np.ndarray, np.ndarray]:
    """Greedy one-to-one pairing, nearest in time first.

    All (signal, idler) candidates inside the window are ranked by
    ``|dt - offset|`` (ties by signal then idler index) and accepted while
    neither member is already used.  Returns matched index arrays sorted by
    signal index.
    """
    ts = np.asarray(signal_times, dtype=float)
    ti = np.asarray(idler_times, dtype=float)
    if ts.size == 0 or ti.size == 0:
        return np.array([], np.int64), np.array([], np.int64)
    half = window.width / 2
    order = np.argsort(ti, kind="stable")
    ti_sorted = ti[order]
    # slightly widened search; the exact test below decides
    slack = 4 * np.finfo(float).eps * (np.abs(ts) + abs(window.offset) + half)
    lo = np.searchsorted(ti_sorted, ts - window.offset - half - slack, side="left")
    hi = np.searchsorted(ti_sorted, ts - window.offset + half + slack, side="right")
    n_cand = hi - lo
    s_idx = np.repeat(np.arange(ts.size), n_cand)
    within = np.arange(n_cand.sum()) - np.repeat(np.cumsum(n_cand) - n_cand, n_cand)
    i_idx = order[np.repeat(lo, n_cand) + within]
    gap = np.abs(ts[s_idx] - ti[i_idx] - window.offset)
    ok = gap <= half
    s_idx, i_idx, gap = s_idx[ok], i_idx[ok], gap[ok]
    rank = np.lexsort((i_idx, s_idx, gap))
    used_s = np.zeros(ts.size, bool)
    used_i = np.zeros(ti.size, bool)
    ms, mi = [], []
    for s, i in zip(s_idx[rank].tolist(), i_idx[rank].tolist()):
        if not used_s[s] and not used_i[i]:
            used_s[s] = used_i[i] = True
            ms.append(s)
            mi.append(i)
    ms = np.array(ms, np.int64)
    mi = np.array(mi, np.int64)
    srt = np.argsort(ms, kind="stable")
    return ms[srt], mi[srt]


def coincidence_filter(signal: ClickStream | Sequence[ClickEvent], idler: ClickStream | Sequence[ClickEvent],
                       window: CoincidenceWindow | float = DEFAULT_WINDOW) -> ClickStream:
    """Signal clicks that won a partner idler click, in their original order."""
    if not isinstance(window, CoincidenceWindow):
        window = CoincidenceWindow(float(window))
    sig, idl = as_stream(signal), as_stream(idler)
    ms, _ = coincidence_match(sig.timestamps, idl.timestamps, window)
    return sig.take(ms)


# --- visibility -----------------------------------------------------------

def dominant_period(profile) -> float | None:
    """Period in samples of the strongest non-DC spectral component."""
    p = np.asarray(profile, dtype=float)
    if p.size < 4 or np.ptp(p) == 0:
        return None
    n_fft = 8 * (1 << (p.size - 1).bit_length())
    spectrum = np.abs(np.fft.rfft(p * np.hanning(p.size), n_fft))
    # skip the lobe around DC that belongs to the envelope
    start = 0
    while start < spectrum.size - 1 and spectrum[start + 1] <= spectrum[start]:
        start += 1
    if start >= spectrum.size - 2:
        return None
    j = start + int(np.argmax(spectrum[start:-1]))
    y0, y1, y2 = spectrum[j - 1], spectrum[j], spectrum[j + 1]
    den = y0 - 2 * y1 + y2
    nu = (j + (0.5 * (y0 - y2) / den if den < 0 else 0.0)) / n_fft
    return 1.0 / nu if nu > 0 else None


def _extrema(p: np.ndarray) -> list[list]:
    """Alternating strict local extrema as [index, kind (+1 max / -1 min), value]."""
    ext: list[list] = []
    for i in range(1, p.size - 1):
        if p[i] > p[i - 1] and p[i] >= p[i + 1]:
            e = [i, 1, p[i]]
        elif p[i] < p[i - 1] and p[i] <= p[i + 1]:
            e = [i, -1, p[i]]
        else:
            continue
        if ext and ext[-1][1] == e[1]:
            if (e[1] == 1) == (e[2] > ext[-1][2]):
                ext[-1] = e
        else:
            ext.append(e)
    return ext


def _merge_insignificant(ext: list[list], z: float) -> list[list]:
    """Drop adjacent max/min pairs whose contrast is within z Poisson sigmas."""
    ext = list(ext)
    while len(ext) >= 2:
        sig = [abs(a[2] - b[2]) - z * math.sqrt(max(a[2] + b[2], 0.0)) for a, b in zip(ext, ext[1:])]
        j = int(np.argmin(sig))
        if sig[j] >= 0:
            break
        del ext[j:j + 2]
        if 0 < j < len(ext) and ext[j - 1][1] == ext[j][1]:
            a, b = ext[j - 1], ext[j]
            ext[j - 1:j + 1] = [a if (a[1] == 1) == (a[2] >= b[2]) else b]
    return ext


def central_region(profile, period: float | None = None) -> tuple[int, int]:
    """Index span around the envelope peak where the envelope is at least half its maximum.

    The envelope is a moving average over one fringe period.
    """
    p = np.asarray(profile, dtype=float)
    if period is None:
        period = dominant_period(p)
    width = max(1, int(round(period))) if period else 1
    env = np.convolve(p, np.ones(width) / width, mode="same")
    i0 = int(np.argmax(env))
    half = env[i0] / 2
    lo = i0
    while lo > 0 and env[lo - 1] >= half:
        lo -= 1
    hi = i0
    while hi < p.size - 1 and env[hi + 1] >= half:
        hi += 1
    return lo, hi


def visibility(profile, period: float | None = None, region: tuple[int, int] | None = None,
               noise_sigmas: float = 0.0) -> float:
    """Mean (I_max - I_min)/(I_max + I_min) over adjacent extrema in the central region.

    ``period`` is the fringe period in samples (estimated from the spectrum
    when omitted).  With ``noise_sigmas > 0`` the profile is treated as
    counts and extremum pairs not separated by that many Poisson standard
    deviations are discarded first, so shot noise on a smooth profile does
    not register as fringes.
    """
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1:
        raise ValueError("profile must be one-dimensional")
    if p.size < 3 or not np.any(p > 0):
        return 0.0
    if np.any(p < 0):
        raise ValueError("profile must be non-negative")
    if noise_sigmas == 0:
        # work on the shape only so that rescaling cannot move comparisons
        p = p / p.max()
    known_period = period
    if region is None:
        region = central_region(p, period)
    lo, hi = region
    ext = _extrema(p)
    if noise_sigmas > 0:
        ext = _merge_insignificant(ext, noise_sigmas)
    ext = [e for e in ext if lo <= e[0] <= hi]
    v = []
    for a, b in zip(ext, ext[1:]):
        if known_period is not None and b[0] - a[0] > known_period:
            continue
        mx, mn = max(a[2], b[2]), min(a[2], b[2])
        v.append((mx - mn) / (mx + mn) if mx + mn > 0 else 0.0)
    return float(min(max(np.mean(v), 0.0), 1.0)) if v else 0.0


# --- fringe fitting -------------------------------------------------------

@dataclass(frozen=True)
class FringeFit:
    """Parameters of k * exp(-a x^2) * cos^2(b x + phi)."""

    k: float
    a: float
    b: float
    phi: float
    rms_residual: float
    valid: bool = True
    n_evaluations: int = 0

    def model(self, x) -> np.ndarray:
        return fringe_model(x, self.k, self.a, self.b, self.phi)

    def to_dict(self) -> dict:
        return asdict(self)


class FitConvergenceError(RuntimeError):
    def __init__(self, message: str, best: FringeFit):
        super().__init__(message)
        self.best = best


def fringe_model(x, k, a, b, phi) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return k * np.exp(-a * x * x) * np.cos(b * x + phi) ** 2


def phase_difference(phi1: float, phi2: float) -> float:
    """Distance between two intensity phases modulo pi, in [0, pi/2]."""
    d = (phi1 - phi2) % math.pi
    return min(d, math.pi - d)


def _initial_guess(x: np.ndarray, p: np.ndarray) -> tuple[float, float, float, float]:
    dx = float(np.mean(np.diff(x)))
    period = dominant_period(p)
    if period is None:
        raise ValueError("profile has no fringe structure to fit")
    b = math.pi / (period * dx)
    # a fringe-averaged profile approximates (k/2) exp(-a x^2)
    width = max(1, int(round(period)))
    env = np.convolve(p, np.ones(width) / width, mode="same")
    use = env > 0.1 * env.max()
    use[: width // 2] = use[p.size - width // 2:] = False
    if use.sum() >= 3 and np.ptp(x[use]) > 0:
        slope, icpt = np.polyfit(x[use] ** 2, np.log(env[use]), 1)
        a = -slope
        k = 2 * math.exp(icpt)
    else:
        a, k = 0.0, float(p.max())
    if not a > 0:
        a = 1.0 / np.ptp(x) ** 2
    k = k if k > 0 else float(p.max())
    w = p * np.exp(a * x * x) if a * np.max(x * x) < 50 else p
    two_phi = math.atan2(-np.sum(w * np.sin(2 * b * x)), np.sum(w * np.cos(2 * b * x)))
    return k, a, b, two_phi / 2


def _canonical(k, a, b, phi):
    if b < 0:
        b, phi = -b, -phi
    phi = phi % math.pi
    if phi >= math.pi - 1e-12:  # rounding of a tiny negative phase
        phi = 0.0
    return k, a, b, phi


def fit_fringe(profile, positions, max_evaluations: int = 4000) -> FringeFit:
    """Least-squares fit of k * exp(-a x^2) * cos^2(b x + phi).

    The start point is deterministic: b from the dominant spectral peak,
    k and a from a log-linear fit of the fringe-averaged envelope, phi by
    projecting onto cos(2bx) and sin(2bx).  Raises
    :class:`FitConvergenceError` (carrying the best fit, flagged invalid)
    when the solver does not converge within ``max_evaluations``.
    """
    p = np.asarray(profile, dtype=float)
    x = np.asarray(positions, dtype=float)
    if p.shape != x.shape or p.ndim != 1:
        raise ValueError("profile and positions must be 1-D arrays of equal length")
    if p.size < 8 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("profile must hold at least 8 finite non-negative values")
    scale = float(p.max())
    if scale <= 0:
        raise ValueError("profile is identically zero")
    xs = float(np.max(np.abs(x))) or 1.0
    u, q = x / xs, p / scale
    k0, a0, b0, phi0 = _initial_guess(u, q)
    if b0 * np.ptp(u) / math.pi < 8:
        raise ValueError("fewer than 8 fringe periods sampled")

    def resid(t):
        return fringe_model(u, *t) - q

    sol = least_squares(resid, np.array([k0, a0, b0, phi0]), method="lm", x_scale="jac",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_evaluations)
    kf, af, bf, phf = sol.x
    kf, af, bf, phf = _canonical(kf * scale, af / xs ** 2, bf / xs, phf)
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    fit = FringeFit(float(kf), float(af), float(bf), float(phf), rms, True, int(sol.nfev))
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)) or not (kf > 0 and af > 0):
        bad = replace(fit, valid=False)
        raise FitConvergenceError(f"fringe fit did not converge: {sol.message}", bad)
    return fit


def fit_to_json(fit: FringeFit) -> str:
    return dumps(fit.to_dict())


# --- nodes ----------------------------------------------------------------

def find_nodes(profile, positions, fraction: float = 0.05) -> np.ndarray:
    """Positions of interference nodes, sorted ascending.

    A node is the lowest sample of a run of samples below ``fraction`` of
    the global maximum, provided the run is closed on both sides by samples
    above the threshold; its position is refined by a parabola through the
    neighbouring samples.  Dark tails running off the grid are not nodes.
    """
    p = np.asarray(profile, dtype=float)
    x = np.asarray(positions, dtype=float)
    if p.shape != x.shape or p.ndim != 1:
        raise ValueError("profile and positions must be 1-D arrays of equal length")
    if p.size < 3 or p.max() <= 0:
        return np.array([])
    below = p < fraction * p.max()
    edges = np.diff(below.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    stops = np.flatnonzero(edges == -1) + 1
    if below[0]:
        stops = stops[1:]
    starts = starts[: stops.size]
    nodes = []
    for s, e in zip(starts, stops):
        j = s + int(np.argmin(p[s:e]))
        y0, y1, y2 = p[j - 1], p[j], p[j + 1]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den > 0 else 0.0
        step = x[j + 1] - x[j] if off > 0 else x[j] - x[j - 1]
        nodes.append(x[j] + off * step)
    return np.sort(np.array(nodes, dtype=float))


def nodes_to_json(nodes, **extra) -> str:
    return dumps({"nodes_m": [float(n) for n in nodes], **extra})


def normalized_cross_correlation(a, b) -> float:
    """sum(a b) / sqrt(sum(a^2) sum(b^2)); 1 for profiles equal up to scale."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    den = math.sqrt(float(np.sum(a * a)) * float(np.sum(b * b)))
    return float(np.sum(a * b) / den) if den > 0 else 0.0
