"""Correlated classical pulse pairs and passive beam-splitter routing.

Every pair carries definite polarizations: the signal is vertical, the idler
horizontal (type I) or vertical (type II).  Streams are stored column-wise;
iterating a :class:`PulseStream` yields :class:`PulsePair` records.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ._io import format_float
from .polarization import JonesVector


class PdcType(enum.Enum):
    TYPE_I = "type1"
    TYPE_II = "type2"


class Port(enum.Enum):
    TRANSMITTED = "transmitted"
    REFLECTED = "reflected"


@dataclass(frozen=True)
class PulsePair:
    timestamp: float
    signal: JonesVector
    idler: JonesVector
    pdc_type: PdcType


def idler_for_signal(signal: JonesVector, pdc_type: PdcType) -> JonesVector:
    """Partner polarization: orthogonal for type I, identical for type II."""
    return signal.orthogonal() if pdc_type is PdcType.TYPE_I else signal


@dataclass(frozen=True, eq=False)
class PulseStream:
    timestamps: np.ndarray
    signal: np.ndarray  # (n, 2) complex, columns (H, V)
    idler: np.ndarray
    idler_present: np.ndarray  # False where the partner pulse was lost
    pdc_type: PdcType

    def __len__(self) -> int:
        return self.timestamps.size

    def __getitem__(self, i: int) -> PulsePair:
        return PulsePair(float(self.timestamps[i]), JonesVector.from_array(self.signal[i]),
                         JonesVector.from_array(self.idler[i]), self.pdc_type)

    def __iter__(self) -> Iterator[PulsePair]:
        for i in range(len(self)):
            yield self[i]

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1]) if len(self) else 0.0


def generate_pdc_pairs(n: int, pdc_type: PdcType, mean_rate: float, seed,
                       pairing_efficiency: float = 1.0) -> PulseStream:
    """Emit ``n`` pairs with exponential inter-arrival times at ``mean_rate`` (Hz).

    ``pairing_efficiency`` is the probability that a pair's idler partner
    survives; lost partners are flagged in ``idler_present``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if not mean_rate > 0:
        raise ValueError("mean_rate must be positive")
    if not 0.0 <= pairing_efficiency <= 1.0:
        raise ValueError("pairing_efficiency must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1.0 / mean_rate, size=n)
    # a zero gap would break strict ordering
    gaps = np.maximum(gaps, np.finfo(float).tiny)
    t = np.cumsum(gaps)
    present = rng.random(n) < pairing_efficiency if pairing_efficiency < 1.0 else np.ones(n, bool)
    sig = np.tile(np.array([0.0, 1.0], complex), (n, 1))
    idl_one = idler_for_signal(JonesVector.vertical(), pdc_type).as_array()
    idl = np.tile(idl_one, (n, 1))
    return PulseStream(t, sig, idl, present, pdc_type)


def beam_splitter(transmittance: float, rng: np.random.Generator) -> Port:
    """Route one whole pulse to a single output port."""
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")
    return Port.TRANSMITTED if rng.random() < transmittance else Port.REFLECTED


def route(n: int, transmittance: float, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`beam_splitter`: True where the pulse is transmitted."""
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")
    return rng.random(n) < transmittance


STREAM_COLUMNS = ("timestamp_s", "sig_re_h", "sig_im_h", "sig_re_v", "sig_im_v",
                  "idl_re_h", "idl_im_h", "idl_re_v", "idl_im_v")


def stream_to_csv(stream: PulseStream) -> str:
    out = io.StringIO()
    out.write(",".join(STREAM_COLUMNS) + "\n")
    for t, s, i in zip(stream.timestamps, stream.signal, stream.idler):
        vals = (t, s[0].real, s[0].imag, s[1].real, s[1].imag,
                i[0].real, i[0].imag, i[1].real, i[1].imag)
        out.write(",".join(format_float(v) for v in vals) + "\n")
    return out.getvalue()


def stream_from_csv(text: str, pdc_type: PdcType) -> PulseStream:
    lines = text.strip().splitlines()
    if tuple(lines[0].split(",")) != STREAM_COLUMNS:
        raise ValueError("unexpected pulse-stream columns")
    data = np.array([ln.split(",") for ln in lines[1:]], dtype=float).reshape(-1, 9)
    sig = data[:, 1:5:2] + 1j * data[:, 2:5:2]
    idl = data[:, 5:9:2] + 1j * data[:, 6:9:2]
    return PulseStream(data[:, 0], sig, idl, np.ones(len(data), bool), pdc_type)
