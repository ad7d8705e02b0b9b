"""Jones-vector polarization algebra.

Components are ordered (H, V).  Polarizer angles are measured from the
vertical axis, counterclockwise positive, so an ideal linear polarizer at
angle ``theta`` passes the unit axis ``(sin theta, cos theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def canonical_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = math.remainder(float(theta), 2.0 * math.pi)
    if t == -math.pi:
        t = math.pi
    return t


@dataclass(frozen=True)
class PolarizerAngle:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", canonical_angle(self.theta))

    @classmethod
    def degrees(cls, deg: float) -> "PolarizerAngle":
        return cls(math.radians(deg))

    def __float__(self) -> float:
        return self.theta


VERTICAL = PolarizerAngle(0.0)
HORIZONTAL = PolarizerAngle(math.pi / 2)


@dataclass(frozen=True)
class JonesVector:
    e_h: complex
    e_v: complex

    def __post_init__(self):
        object.__setattr__(self, "e_h", complex(self.e_h))
        object.__setattr__(self, "e_v", complex(self.e_v))

    @classmethod
    def linear(cls, theta: float | PolarizerAngle, amplitude: float = 1.0) -> "JonesVector":
        """Linear polarization at ``theta`` from vertical."""
        t = float(theta)
        return cls(amplitude * math.sin(t), amplitude * math.cos(t))

    @classmethod
    def vertical(cls) -> "JonesVector":
        return cls(0.0, 1.0)

    @classmethod
    def horizontal(cls) -> "JonesVector":
        return cls(1.0, 0.0)

    @classmethod
    def from_array(cls, a) -> "JonesVector":
        return cls(a[0], a[1])

    def as_array(self) -> np.ndarray:
        return np.array([self.e_h, self.e_v], dtype=complex)

    def normalized(self) -> "JonesVector":
        n = math.sqrt(intensity(self))
        if n == 0.0:
            raise ValueError("cannot normalize a null Jones vector")
        return JonesVector(self.e_h / n, self.e_v / n)

    def orthogonal(self) -> "JonesVector":
        """The orthogonal state (e_v*, -e_h*); linear states rotate by +pi/2."""
        return JonesVector(self.e_v.conjugate(), -self.e_h.conjugate())

    def __add__(self, other: "JonesVector") -> "JonesVector":
        return JonesVector(self.e_h + other.e_h, self.e_v + other.e_v)

    def __sub__(self, other: "JonesVector") -> "JonesVector":
        return JonesVector(self.e_h - other.e_h, self.e_v - other.e_v)

    def __mul__(self, s: complex) -> "JonesVector":
        return JonesVector(self.e_h * s, self.e_v * s)

    __rmul__ = __mul__


def polarizer_axis(theta: float | PolarizerAngle) -> np.ndarray:
    t = float(theta)
    return np.array([math.sin(t), math.cos(t)])


def polarizer_matrix(theta: float | PolarizerAngle) -> np.ndarray:
    """Jones matrix of an ideal linear polarizer, the projector u u^T."""
    u = polarizer_axis(theta)
    return np.outer(u, u).astype(complex)


def intensity(j: JonesVector) -> float:
    return abs(j.e_h) ** 2 + abs(j.e_v) ** 2


def inner(a: JonesVector, b: JonesVector) -> complex:
    """Hermitian inner product <a|b>."""
    return a.e_h.conjugate() * b.e_h + a.e_v.conjugate() * b.e_v


def apply_polarizer(j: JonesVector, theta: float | PolarizerAngle) -> JonesVector:
    """Project ``j`` onto the polarizer axis: (j . u) u."""
    t = float(theta)
    s, c = math.sin(t), math.cos(t)
    proj = j.e_h * s + j.e_v * c
    return JonesVector(proj * s, proj * c)


def decompose(j: JonesVector) -> tuple[complex, complex]:
    return j.e_h, j.e_v


def transmission_probability(j: JonesVector, theta: float | PolarizerAngle) -> float:
    """Malus fraction of the power of ``j`` passed by a polarizer at ``theta``."""
    total = intensity(j)
    if total == 0.0:
        return 0.0
    return intensity(apply_polarizer(j, theta)) / total
