"""Jones-calculus model of the Brown-Twiss measurement arms.

Each arm is a quarter-wave plate, then a half-wave plate, then an analyzer
passing vertical polarization.  Angles are radians, measured from horizontal.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .qutrit import SQRT2, PureQutrit, majorana_decompose

QUARTER_WAVE = math.pi / 2
HALF_WAVE = math.pi


@dataclass(frozen=True)
class PolarizationVector:
    h: complex
    v: complex

    def __post_init__(self):
        n = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"polarization vector not unit norm ({n!r})")

    @classmethod
    def from_array(cls, arr) -> "PolarizationVector":
        a = np.asarray(arr, dtype=complex).reshape(2)
        a = a / np.linalg.norm(a)
        return cls(complex(a[0]), complex(a[1]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=complex)

    def stokes(self) -> tuple[float, float, float]:
        h, v = self.h, self.v
        hv = h.conjugate() * v
        return abs(h) ** 2 - abs(v) ** 2, 2 * hv.real, 2 * hv.imag


H = PolarizationVector(1, 0)
V = PolarizationVector(0, 1)
D = PolarizationVector(1 / SQRT2, 1 / SQRT2)
A = PolarizationVector(1 / SQRT2, -1 / SQRT2)
R = PolarizationVector(1 / SQRT2, 1j / SQRT2)
L = PolarizationVector(1 / SQRT2, -1j / SQRT2)
NAMED_POLARIZATIONS = {"H": H, "V": V, "D": D, "A": A, "R": R, "L": L}


def _wrap_half_turn(angle: float) -> float:
    """Map an angle into (-pi/2, pi/2]."""
    a = math.remainder(angle, math.pi)
    return math.pi / 2 if a == -math.pi / 2 else a


@dataclass(frozen=True)
class WaveplateSetting:
    retardance: float
    angle: float

    def __post_init__(self):
        if self.retardance not in (QUARTER_WAVE, HALF_WAVE):
            raise ValueError("only quarter- and half-wave retarders are modelled")
        if not (-math.pi / 2 < self.angle <= math.pi / 2):
            raise ValueError(f"fast-axis angle out of (-pi/2, pi/2]: {self.angle!r}")


@dataclass(frozen=True)
class FilterSettings:
    """Quarter-wave angle ``chi`` and half-wave angle ``theta`` of one arm."""

    chi: float
    theta: float

    def __post_init__(self):
        for name in ("chi", "theta"):
            a = getattr(self, name)
            if not (-math.pi / 2 < a <= math.pi / 2):
                raise ValueError(f"{name} out of (-pi/2, pi/2]: {a!r}")

    @property
    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.chi), math.degrees(self.theta)


def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def jones_waveplate(w: WaveplateSetting) -> np.ndarray:
    """R(angle) . diag(1, exp(i retardance)) . R(-angle)."""
    core = np.diag([1.0, cmath.exp(1j * w.retardance)])
    return _rotation(w.angle) @ core @ _rotation(-w.angle)


def filter_matrix(f: FilterSettings) -> np.ndarray:
    """Jones matrix of the two plates, quarter-wave first."""
    qwp = jones_waveplate(WaveplateSetting(QUARTER_WAVE, f.chi))
    hwp = jones_waveplate(WaveplateSetting(HALF_WAVE, f.theta))
    return hwp @ qwp


def filter_accept_mode(f: FilterSettings) -> PolarizationVector:
    """Input polarization that the arm transmits with certainty."""
    return PolarizationVector.from_array(filter_matrix(f).conj().T @ np.array([0, 1]))


def transmission_probability(p: PolarizationVector, f: FilterSettings) -> float:
    return float(abs((filter_matrix(f) @ p.array)[1]) ** 2)


def solve_filter_settings(p: PolarizationVector) -> FilterSettings:
    """Plate angles that rotate ``p`` onto the analyzer axis.

    The quarter-wave plate is aligned with the polarization ellipse so its
    output is linear, then the half-wave plate turns that line onto V.  The
    branch kept has ``chi`` in (-pi/4, pi/4] and ``theta`` in (-pi/4, pi/4].
    Circular input admits any ``chi``; ``chi = pi/4`` is used.
    """
    s1, s2, _ = p.stokes()
    if math.hypot(s1, s2) < 1e-12:
        chi = math.pi / 4
    else:
        two_chi = math.remainder(math.atan2(s2, s1), math.pi)
        if two_chi == -math.pi / 2:
            two_chi = math.pi / 2
        chi = two_chi / 2
    q = jones_waveplate(WaveplateSetting(QUARTER_WAVE, chi)) @ p.array
    ref = q[int(np.argmax(np.abs(q)))]
    q = q * (abs(ref) / ref)
    beta = math.atan2(q[1].real, q[0].real)
    # the half-wave plate reflects a line at beta to 2*theta - beta
    theta = math.remainder((beta + math.pi / 2) / 2, math.pi / 2)
    if theta <= -math.pi / 4:
        theta += math.pi / 2
    return FilterSettings(chi, theta)


def majorana_modes(state: PureQutrit) -> tuple[PolarizationVector, PolarizationVector]:
    """The two single-photon polarizations that make up ``state``."""
    pair = majorana_decompose(state)
    return (
        PolarizationVector.from_array(pair.p1.jones),
        PolarizationVector.from_array(pair.p2.jones),
    )


def detection_vector(p1: PolarizationVector, p2: PolarizationVector) -> np.ndarray:
    """Vector w with coincidence amplitude ``<w|c>`` for arm modes p1, p2."""
    h1, v1 = p1.h, p1.v
    h2, v2 = p2.h, p2.v
    return np.array([SQRT2 * h1 * h2, h1 * v2 + v1 * h2, SQRT2 * v1 * v2], dtype=complex)


def coincidence_moment(
    state: PureQutrit, p1: PolarizationVector, p2: PolarizationVector
) -> float:
    """Fourth-order moment seen with arm 1 passing p1 and arm 2 passing p2.

    Bosonic factors are kept, so the value lies in [0, 2]; the 50/50 splitter
    only adds a constant factor, which is dropped.
    """
    amp = np.vdot(detection_vector(p1, p2), state.vector)
    return float(abs(amp) ** 2)


class OrthogonalityResult(NamedTuple):
    orthogonal: bool
    residual: float


def is_orthogonal(
    state: PureQutrit, set_state: PureQutrit, tol: float = 1e-10
) -> OrthogonalityResult:
    """Zero-coincidence test with both filters tuned to ``set_state``."""
    p1, p2 = majorana_modes(set_state)
    m = coincidence_moment(state, p1, p2)
    return OrthogonalityResult(m <= tol, m)
