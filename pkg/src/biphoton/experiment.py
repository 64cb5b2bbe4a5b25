"""Preparation interferometer and counting statistics.

Knob model: HWP1 splits the pump between the type-II crystal (|1,1>) and the
crossed type-I pair, HWP2 balances |2,0> against |0,2>, the quartz plates set
phi13 and the piezo voltage sets phi12 linearly.  Imperfect wavepacket
overlap between type-I and type-II biphotons is a single ``overlap``
parameter that scales their mutual coherence.
"""
from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import FitError
from .optics import majorana_modes, solve_filter_settings
from .qutrit import DensityMatrix3, PureQutrit, normalize
from .tomography import (
    CountRecord,
    MeasurementSetting,
    MomentVector,
    SinusoidFit,
    covers_period,
    expected_moments,
    fit_sinusoid,
    moments_from_counts,
    protocol_settings,
)

PHASE_PER_VOLT_DEG = 51.7


@dataclass(frozen=True)
class ApparatusConfig:
    """Preparation knobs; angles in radians, ``phase_per_volt`` in deg/V.

    ``mean_events = inf`` selects expectation mode: simulated counts are the
    exact expected values instead of Poisson draws.
    """

    hwp1_angle: float = 0.0
    hwp2_angle: float = 0.0
    phi13: float = 0.0
    pzt_volts: float = 0.0
    phase_per_volt: float = PHASE_PER_VOLT_DEG
    overlap: float = 1.0
    accidental_rate: float = 0.0
    mean_events: float = 500.0

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap!r}")
        if not self.mean_events > 0:
            raise ValueError("mean_events must be > 0")
        if self.accidental_rate < 0:
            raise ValueError("accidental_rate must be >= 0")
        if not self.phase_per_volt > 0:
            raise ValueError("phase_per_volt must be > 0")

    @property
    def phi12(self) -> float:
        return math.radians(self.phase_per_volt * self.pzt_volts)

    @property
    def expectation(self) -> bool:
        return math.isinf(self.mean_events)

    def replace(self, **changes) -> "ApparatusConfig":
        return dataclasses.replace(self, **changes)

    def with_phases(self, phi12: float, phi13: float | None = None) -> "ApparatusConfig":
        return self.replace(
            pzt_volts=volts_for_phase(phi12, self.phase_per_volt),
            phi13=self.phi13 if phi13 is None else phi13,
        )


# HWP angles giving equal moduli for all three amplitudes
BALANCED_HWP1 = 0.5 * math.asin(1 / math.sqrt(3))
BALANCED_HWP2 = math.pi / 8


def prepared_state(cfg: ApparatusConfig) -> PureQutrit:
    type_ii = math.sin(2 * cfg.hwp1_angle)
    type_i = math.cos(2 * cfg.hwp1_angle)
    return normalize([
        type_i * math.cos(2 * cfg.hwp2_angle),
        type_ii * cmath.exp(1j * cfg.phi12),
        type_i * math.sin(2 * cfg.hwp2_angle) * cmath.exp(1j * cfg.phi13),
    ])


def volts_for_phase(phi12: float, phase_per_volt: float = PHASE_PER_VOLT_DEG) -> float:
    if not phase_per_volt > 0:
        raise ValueError("phase_per_volt must be > 0")
    return math.degrees(phi12) / phase_per_volt


def config_for_state(state: PureQutrit, **knobs) -> ApparatusConfig:
    """Knob positions that prepare ``state``; extra keywords go to the config."""
    c1, c2, c3 = state.vector
    hwp1 = 0.5 * math.asin(min(abs(c2), 1.0))
    hwp2 = 0.5 * math.atan2(abs(c3), abs(c1))
    if abs(c1) > 1e-12:
        phi12 = cmath.phase(c2) - cmath.phase(c1)
        phi13 = cmath.phase(c3) - cmath.phase(c1)
    else:
        phi12 = 0.0
        phi13 = cmath.phase(c3) - cmath.phase(c2) if abs(c2) > 1e-12 else 0.0
    phi12 = math.remainder(phi12, 2 * math.pi)
    phi13 = math.remainder(phi13, 2 * math.pi)
    base = ApparatusConfig(hwp1_angle=hwp1, hwp2_angle=hwp2, phi13=phi13, **knobs)
    return base.with_phases(phi12)


def effective_density(cfg: ApparatusConfig) -> DensityMatrix3:
    """Prepared state with type-I/type-II coherences scaled by ``overlap``."""
    rho = prepared_state(cfg).projector
    for j, k in ((0, 1), (1, 0), (1, 2), (2, 1)):
        rho[j, k] *= cfg.overlap
    return DensityMatrix3.from_array(rho, physical=True)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate_counts(
    rho,
    settings: Sequence[MeasurementSetting] | None = None,
    mean_events: float = 500.0,
    accidental_rate: float = 0.0,
    seed=None,
    *,
    expectation: bool = False,
) -> list[CountRecord]:
    """Coincidences ~ Poisson(mean_events * p_k / sum(p) + accidental_rate).

    With ``expectation`` (or infinite ``mean_events``) the means are returned
    unsampled; the infinite case reports the normalized fractions.
    """
    settings = protocol_settings() if settings is None else settings
    if not mean_events > 0:
        raise ValueError("mean_events must be > 0")
    p = expected_moments(rho, settings)
    frac = p / p.sum()
    if math.isinf(mean_events):
        mu = frac
        expectation = True
    else:
        mu = mean_events * frac + accidental_rate
    if expectation:
        counts = [float(m) for m in mu]
    else:
        counts = [int(c) for c in _rng(seed).poisson(mu)]
    return [CountRecord(s.label, c, 1.0) for s, c in zip(settings, counts)]


# ---------------------------------------------------------------------------
# Scans


@dataclass(frozen=True)
class ScanSpec:
    """Grid of the scanned knob at fixed ``phi13``.

    ``variable`` is ``"phi12"`` (piezo phase) or ``"hwp2"`` (type-I balance,
    used for the trivial basis whose states differ only in moduli).
    """

    phi13: float
    grid: tuple[float, ...]
    settings: tuple[MeasurementSetting, ...] | None = None
    seed: int = 0
    variable: Literal["phi12", "hwp2"] = "phi12"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0:
            raise ValueError("scan grid is empty")
        if np.any(np.diff(g) <= 0):
            raise ValueError("scan grid must be strictly increasing")
        if self.variable not in ("phi12", "hwp2"):
            raise ValueError(f"unknown scan variable {self.variable!r}")
        object.__setattr__(self, "grid", tuple(float(x) for x in g))

    @property
    def fringe_phase(self) -> np.ndarray:
        """Abscissa in which the fringe is a single harmonic."""
        g = np.asarray(self.grid)
        return g if self.variable == "phi12" else 4 * g

    def point_seeds(self) -> list[np.random.SeedSequence]:
        return np.random.SeedSequence(self.seed).spawn(len(self.grid))


def _config_at(spec: ScanSpec, cfg: ApparatusConfig, x: float) -> ApparatusConfig:
    if spec.variable == "phi12":
        return cfg.with_phases(x, spec.phi13)
    return cfg.replace(hwp2_angle=x, phi13=spec.phi13)


@dataclass(frozen=True)
class OrthogonalityScan:
    grid: np.ndarray
    counts: np.ndarray
    fit: SinusoidFit
    settings: tuple
    variable: str = "phi12"

    @property
    def visibility(self) -> float:
        """(max - min) / (max + min) of the fitted fringe."""
        return min(self.fit.visibility, 1.0)

    @property
    def minimum_at(self) -> float:
        return float(self.grid[int(np.argmin(self.counts))])


def orthogonality_scan(
    set_state: PureQutrit, spec: ScanSpec, cfg: ApparatusConfig
) -> OrthogonalityScan:
    """Coincidences with both filters tuned to ``set_state`` across the grid.

    The mean count is ``mean_events * M + accidental_rate`` for coincidence
    moment ``M``.
    """
    if not covers_period(spec.fringe_phase):
        raise FitError("scan grid must cover a full fringe period")
    if spec.settings:
        arm1, arm2 = spec.settings[0].arm1, spec.settings[0].arm2
    else:
        p1, p2 = majorana_modes(set_state)
        arm1, arm2 = solve_filter_settings(p1), solve_filter_settings(p2)
    setting = MeasurementSetting(arm1, arm2, "set")
    proj = setting.projector
    seeds = spec.point_seeds()
    counts = []
    for x, ss in zip(spec.grid, seeds):
        rho = effective_density(_config_at(spec, cfg, x)).data
        moment = float(np.einsum("ij,ji->", proj, rho).real)
        if cfg.expectation:
            counts.append(moment)
        else:
            mu = cfg.mean_events * moment + cfg.accidental_rate
            counts.append(float(np.random.default_rng(ss).poisson(mu)))
    counts = np.array(counts)
    fit = fit_sinusoid(spec.fringe_phase, counts)
    return OrthogonalityScan(np.asarray(spec.grid), counts, fit, (arm1, arm2), spec.variable)


def expected_visibility(set_state: PureQutrit, spec: ScanSpec, cfg: ApparatusConfig) -> float:
    """Fringe visibility from exact expected counts at the config's scale."""
    if math.isinf(cfg.mean_events):
        cfg = cfg.replace(mean_events=1.0, accidental_rate=0.0)
    if spec.settings:
        proj = spec.settings[0].projector
    else:
        proj = MeasurementSetting.from_modes(*majorana_modes(set_state), "set").projector
    y = []
    for x in spec.grid:
        rho = effective_density(_config_at(spec, cfg, x)).data
        y.append(cfg.mean_events * float(np.einsum("ij,ji->", proj, rho).real) + cfg.accidental_rate)
    return min(fit_sinusoid(spec.fringe_phase, y).visibility, 1.0)


def tune_visibility(
    set_state: PureQutrit,
    spec: ScanSpec,
    cfg: ApparatusConfig,
    target: float,
    knob: Literal["overlap", "accidental_rate"] = "overlap",
) -> ApparatusConfig:
    """Solve one imperfection knob so the expected fringe has ``target`` visibility."""
    if math.isinf(cfg.mean_events):
        raise ValueError("tuning needs a finite mean_events")

    def gap(value):
        return expected_visibility(set_state, spec, cfg.replace(**{knob: value})) - target

    if knob == "overlap":
        lo, hi = 0.0, 1.0
    elif knob == "accidental_rate":
        lo, hi = 0.0, cfg.mean_events
        while gap(hi) > 0:
            hi *= 4
    else:
        raise ValueError(f"unknown knob {knob!r}")
    if gap(lo) * gap(hi) > 0:
        raise ValueError(f"visibility {target!r} not reachable with {knob}")
    value = brentq(gap, lo, hi, xtol=1e-14, rtol=1e-12)
    return cfg.replace(**{knob: value})


@dataclass(frozen=True)
class TomographyPoint:
    phi12: float
    moments: MomentVector
    counts: tuple[CountRecord, ...] = field(repr=False, default=())


def tomography_scan(spec: ScanSpec, cfg: ApparatusConfig) -> list[TomographyPoint]:
    """Nine-setting tomography at every phi12 of the grid."""
    if spec.variable != "phi12":
        raise ValueError("tomography scans run over phi12")
    settings = list(spec.settings) if spec.settings else protocol_settings()
    out = []
    for x, ss in zip(spec.grid, spec.point_seeds()):
        rho = effective_density(_config_at(spec, cfg, x))
        recs = simulate_counts(
            rho.data, settings, cfg.mean_events, cfg.accidental_rate,
            np.random.default_rng(ss), expectation=cfg.expectation,
        )
        out.append(TomographyPoint(x, moments_from_counts(recs, settings), tuple(recs)))
    return out

