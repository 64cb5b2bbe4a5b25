"""Nine-setting biphoton tomography.

Coincidence counts are inverted into the six fourth-order field moments, the
moments give a raw density matrix, and maximum likelihood turns counts into a
physical estimate.  The likelihood is maximized by the diluted fixed-point
iteration ``rho <- N[A rho A]`` with ``A = (1-eps) I + eps R(rho)``, run on a
rank-r root ``T`` (``rho = T T^+``); ``A T`` keeps the rank fixed, and rank 1
is the usual choice for nearly pure states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateDataError, FitError
from .optics import (
    NAMED_POLARIZATIONS,
    FilterSettings,
    PolarizationVector,
    detection_vector,
    filter_accept_mode,
    solve_filter_settings,
)
from .qutrit import SQRT2, DensityMatrix3, PureQutrit, fidelity

PROTOCOL_PAIRS = ("HH", "VV", "HV", "DD", "DH", "DV", "DR", "RH", "RV")

# order of the real parameters of a 3x3 Hermitian matrix
PARAMETER_NAMES = (
    "rho11", "rho22", "rho33",
    "re_rho21", "im_rho21", "re_rho32", "im_rho32", "re_rho31", "im_rho31",
)


def _hermitian_basis() -> np.ndarray:
    basis = []
    for i in range(3):
        e = np.zeros((3, 3), complex)
        e[i, i] = 1
        basis.append(e)
    for j, k in ((1, 0), (2, 1), (2, 0)):
        e = np.zeros((3, 3), complex)
        e[j, k] = e[k, j] = 1
        basis.append(e)
        e = np.zeros((3, 3), complex)
        e[j, k], e[k, j] = 1j, -1j
        basis.append(e)
    return np.array(basis)


HERMITIAN_BASIS = _hermitian_basis()


def matrix_from_parameters(x: np.ndarray) -> np.ndarray:
    return np.einsum("...b,bij->...ij", x, HERMITIAN_BASIS)


def parameters_from_matrix(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    return np.array([
        rho[0, 0].real, rho[1, 1].real, rho[2, 2].real,
        rho[1, 0].real, rho[1, 0].imag, rho[2, 1].real, rho[2, 1].imag,
        rho[2, 0].real, rho[2, 0].imag,
    ])


@dataclass(frozen=True)
class MeasurementSetting:
    arm1: FilterSettings
    arm2: FilterSettings
    label: str

    @property
    def modes(self) -> tuple[PolarizationVector, PolarizationVector]:
        return filter_accept_mode(self.arm1), filter_accept_mode(self.arm2)

    @property
    def detection_vector(self) -> np.ndarray:
        return detection_vector(*self.modes)

    @property
    def projector(self) -> np.ndarray:
        """Unnormalized operator whose expectation is the coincidence moment."""
        w = self.detection_vector
        return np.outer(w, w.conj())

    @classmethod
    def from_modes(cls, p1: PolarizationVector, p2: PolarizationVector, label: str):
        return cls(solve_filter_settings(p1), solve_filter_settings(p2), label)


def protocol_settings() -> list[MeasurementSetting]:
    """The nine filter pairs used for reconstruction."""
    return [
        MeasurementSetting.from_modes(
            NAMED_POLARIZATIONS[a], NAMED_POLARIZATIONS[b], a + b
        )
        for a, b in PROTOCOL_PAIRS
    ]


def projectors(settings: Sequence[MeasurementSetting]) -> np.ndarray:
    return np.array([s.projector for s in settings])


def response_matrix(settings: Sequence[MeasurementSetting]) -> np.ndarray:
    """Real map from the nine Hermitian parameters to expected moments."""
    proj = projectors(settings)
    return np.einsum("kij,bji->kb", proj, HERMITIAN_BASIS).real


def expected_moments(rho, settings: Sequence[MeasurementSetting]) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.einsum("kij,ji->k", projectors(settings), rho).real


@dataclass(frozen=True)
class MomentVector:
    """The six normally ordered fourth-order moments.

    ``a2a2 = <a+^2 a^2>``, ``b2b2 = <b+^2 b^2>``, ``abab = <a+ b+ a b>``,
    ``a2ab = <a+^2 a b>``, ``abb2 = <a+ b+ b^2>``, ``a2b2 = <a+^2 b^2>``.
    """

    a2a2: float
    b2b2: float
    abab: float
    a2ab: complex
    abb2: complex
    a2b2: complex

    @property
    def trace(self) -> float:
        return 0.5 * self.a2a2 + self.abab + 0.5 * self.b2b2

    def normalized(self) -> "MomentVector":
        t = self.trace
        if not t > 0:
            raise DegenerateDataError(f"moments have non-positive trace {t!r}")
        return MomentVector(
            self.a2a2 / t, self.b2b2 / t, self.abab / t,
            self.a2ab / t, self.abb2 / t, self.a2b2 / t,
        )

    def channel(self, name: str) -> float:
        rho = moment_matrix(self)
        return float(parameters_from_matrix(rho)[PARAMETER_NAMES.index(name)])


def moment_matrix(m: MomentVector) -> np.ndarray:
    """Hermitian matrix from the moment rules, without trace normalization."""
    rho = np.zeros((3, 3), complex)
    rho[0, 0] = m.a2a2 / 2
    rho[1, 1] = m.abab
    rho[2, 2] = m.b2b2 / 2
    rho[1, 0] = m.a2ab / SQRT2
    rho[2, 1] = m.abb2 / SQRT2
    rho[2, 0] = m.a2b2 / 2
    for j, k in ((1, 0), (2, 1), (2, 0)):
        rho[k, j] = np.conj(rho[j, k])
    return rho


def rho_from_moments(m: MomentVector) -> DensityMatrix3:
    """Raw density matrix; it is not forced to be positive."""
    rho = moment_matrix(m)
    tr = np.trace(rho).real
    if not tr > 0:
        raise DegenerateDataError(f"moments have non-positive trace {tr!r}")
    return DensityMatrix3.from_array(rho / tr, physical=False)


def moments_from_rho(rho) -> MomentVector:
    r = np.asarray(rho, dtype=complex)
    return MomentVector(
        a2a2=2 * r[0, 0].real,
        b2b2=2 * r[2, 2].real,
        abab=r[1, 1].real,
        a2ab=complex(SQRT2 * r[1, 0]),
        abb2=complex(SQRT2 * r[2, 1]),
        a2b2=complex(2 * r[2, 0]),
    )


def moments_from_state(s: PureQutrit) -> MomentVector:
    c1, c2, c3 = (complex(c) for c in s.vector)
    return MomentVector(
        a2a2=2 * abs(c1) ** 2,
        b2b2=2 * abs(c3) ** 2,
        abab=abs(c2) ** 2,
        a2ab=SQRT2 * c2 * c1.conjugate(),
        abb2=SQRT2 * c3 * c2.conjugate(),
        a2b2=2 * c3 * c1.conjugate(),
    )


@dataclass(frozen=True)
class CountRecord:
    """Raw coincidences for one setting; ``weight`` scales the exposure.

    Sampled counts are integers; expectation-mode simulations store the
    exact expected value.
    """

    setting: str
    count: float
    weight: float = 1.0

    def __post_init__(self):
        if self.count < 0 or not math.isfinite(self.count):
            raise ValueError(f"count must be finite and >= 0, got {self.count!r}")
        if not self.weight > 0:
            raise ValueError(f"weight must be > 0, got {self.weight!r}")


def _align(
    records: Sequence[CountRecord], settings: Sequence[MeasurementSetting]
) -> tuple[np.ndarray, np.ndarray]:
    by_label = {}
    for r in records:
        if r.setting in by_label:
            raise ValueError(f"duplicate record for setting {r.setting!r}")
        by_label[r.setting] = r
    labels = [s.label for s in settings]
    missing = [lab for lab in labels if lab not in by_label]
    if missing:
        raise ValueError(f"no counts for settings {missing}")
    extra = set(by_label) - set(labels)
    if extra:
        raise ValueError(f"counts for unknown settings {sorted(extra)}")
    counts = np.array([by_label[lab].count for lab in labels], dtype=float)
    weights = np.array([by_label[lab].weight for lab in labels], dtype=float)
    return counts, weights


def moments_from_counts(
    records: Sequence[CountRecord], settings: Sequence[MeasurementSetting] | None = None
) -> MomentVector:
    """Least-squares inversion of rates into trace-normalized moments."""
    settings = protocol_settings() if settings is None else settings
    counts, weights = _align(records, settings)
    if counts.sum() <= 0:
        raise DegenerateDataError("all counts are zero")
    x, *_ = np.linalg.lstsq(response_matrix(settings), counts / weights, rcond=None)
    return moments_from_rho(matrix_from_parameters(x)).normalized()


def linear_inversion(
    records: Sequence[CountRecord], settings: Sequence[MeasurementSetting] | None = None
) -> DensityMatrix3:
    return rho_from_moments(moments_from_counts(records, settings))


# ---------------------------------------------------------------------------
# Phase scans


@dataclass(frozen=True)
class SinusoidFit:
    """``y = baseline + amplitude * cos(x + offset)``."""

    amplitude: float
    offset: float
    baseline: float
    residual: float
    amplitude_stderr: float

    def __call__(self, x):
        return self.baseline + self.amplitude * np.cos(np.asarray(x) + self.offset)

    @property
    def visibility(self) -> float:
        return self.amplitude / self.baseline if self.baseline > 0 else float("nan")


def covers_period(x: np.ndarray, period: float = 2 * math.pi) -> bool:
    x = np.unique(np.asarray(x, dtype=float))
    if len(x) < 2:
        return False
    span = (x[-1] - x[0]) * len(x) / (len(x) - 1)
    return span >= period * (1 - 1e-9)


def fit_sinusoid(x, y) -> SinusoidFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(x)) < 5:
        raise FitError("need at least 5 distinct abscissae")
    if not covers_period(x):
        raise FitError("scan grid must cover a full period")
    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    d, a, b = coef
    resid = y - design @ coef
    amp = math.hypot(a, b)
    offset = math.atan2(-b, a) if amp > 0 else 0.0
    dof = len(x) - 3
    stderr = float("nan")
    if dof > 0:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(design.T @ design)
        if amp > 0:
            g = np.array([0.0, a / amp, b / amp])
            stderr = math.sqrt(max(float(g @ cov @ g), 0.0))
        else:
            stderr = math.sqrt(max(cov[1, 1], 0.0))
    rms = math.sqrt(float(resid @ resid) / len(x))
    return SinusoidFit(amp, offset, float(d), rms, stderr)


OFF_DIAGONAL_CHANNELS = ("re_rho21", "im_rho21", "re_rho32", "im_rho32")


@dataclass(frozen=True)
class PhaseScanFit:
    channels: Mapping[str, SinusoidFit]

    @property
    def residual(self) -> float:
        return max(self.channels[c].residual for c in OFF_DIAGONAL_CHANNELS)

    def moments_at(self, phi12: float) -> MomentVector:
        """Moments read off the fitted curves at ``phi12``."""
        x = np.array([float(self.channels[n](phi12)) for n in PARAMETER_NAMES])
        return moments_from_rho(matrix_from_parameters(x)).normalized()


def fit_phase_scan(records: Iterable[tuple[float, MomentVector]]) -> PhaseScanFit:
    """Fit every density-matrix channel of a phi12 scan with a sinusoid."""
    records = list(records)
    phi = np.array([r[0] for r in records], dtype=float)
    params = np.array(
        [parameters_from_matrix(rho_from_moments(m).data) for _, m in records]
    )
    if params.ndim != 2:
        raise FitError("empty scan")
    fits = {name: fit_sinusoid(phi, params[:, i]) for i, name in enumerate(PARAMETER_NAMES)}
    return PhaseScanFit(fits)


# ---------------------------------------------------------------------------
# Maximum likelihood


@dataclass(frozen=True)
class MleResult:
    rho: DensityMatrix3
    iterations: int
    log_likelihood: float
    converged: bool
    rank: int = 1
    history: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class MleBatch:
    rho: np.ndarray  # (B, 3, 3)
    iterations: np.ndarray
    log_likelihood: np.ndarray
    converged: np.ndarray
    history: list = field(default_factory=list, repr=False)


class _Whitened:
    """Measurement operators transformed so that they sum to the identity.

    With a free overall rate the Poisson likelihood depends on rho only
    through normalized probabilities, so it equals a multinomial likelihood
    for ``sigma = G^(1/2) rho G^(1/2)`` and the operators
    ``G^(-1/2) w_k Pi_k G^(-1/2)``.
    """

    def __init__(self, proj: np.ndarray, weights: np.ndarray):
        weighted = weights[:, None, None] * proj
        g = weighted.sum(axis=0)
        vals, vecs = np.linalg.eigh(g)
        if vals.min() <= 1e-12 * vals.max():
            raise DegenerateDataError("measurement settings are not informationally complete")
        self.g_inv_half = (vecs * vals ** -0.5) @ vecs.conj().T
        self.ops = self.g_inv_half @ weighted @ self.g_inv_half
        self.response = np.einsum("kij,bji->kb", self.ops, HERMITIAN_BASIS).real

    def to_rho(self, sigma: np.ndarray) -> np.ndarray:
        rho = self.g_inv_half @ sigma @ self.g_inv_half
        rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
        tr = np.trace(rho, axis1=-2, axis2=-1).real
        return rho / tr[..., None, None]


def _signal_rate(counts, probs, background, iters: int = 60):
    """Rate lambda solving sum n p / (lambda p + b) = 1, batched."""
    total = counts.sum(axis=1)
    if not np.any(background):
        return total

    def g(lam):
        den = lam[:, None] * probs + background
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(counts * probs > 0, counts * probs / den, 0.0)
        return term.sum(axis=1) - 1.0

    lo = np.zeros_like(total)
    hi = total.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


def _profile_loglik(counts, probs, background, lam):
    mu = lam[:, None] * probs + background
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(counts > 0, counts * np.log(mu), 0.0)
    return (term - mu - gammaln(counts + 1)).sum(axis=1)


def _probs(ops, roots):
    # Tr(T T^+ Pi_k) for each root
    # plain broadcasting keeps every row's arithmetic independent of the batch
    x = ops[None] @ roots[:, None]
    return (roots.conj()[:, None] * x).real.sum(axis=(2, 3))


def _gram(roots):
    return roots @ np.conj(np.swapaxes(roots, 1, 2))


def _initial_roots(white: _Whitened, counts, background, rank: int) -> np.ndarray:
    signal = np.clip(counts - background, 0.0, None)
    tot = signal.sum(axis=1, keepdims=True)
    freqs = np.where(tot > 0, signal / np.where(tot > 0, tot, 1.0), counts / counts.sum(axis=1, keepdims=True))
    pinv = np.linalg.solve(white.response.T @ white.response, white.response.T)
    x = (freqs[:, None, :] * pinv[None]).sum(axis=-1)
    sigma = matrix_from_parameters(x)
    vals, vecs = np.linalg.eigh(sigma)
    vals = vals[:, ::-1]
    vecs = vecs[:, :, ::-1]
    if rank == 3:
        psd = vals[:, -1] >= -1e-9
        clipped = np.clip(vals, 0.0, None)
        clipped = clipped / clipped.sum(axis=1, keepdims=True)
        # boundary optima are approached from the interior
        mixed = np.where(psd[:, None], clipped, 0.5 * clipped + 0.5 / 3)
        return vecs * np.sqrt(mixed)[:, None, :]
    lead = np.clip(vals[:, :rank], 0.0, None)
    lead = np.maximum(lead, 0.05 * lead[:, :1])
    lead = lead / lead.sum(axis=1, keepdims=True)
    return vecs[:, :, :rank] * np.sqrt(lead)[:, None, :]


def diluted_mle(
    counts,
    settings: Sequence[MeasurementSetting] | None = None,
    *,
    weights=None,
    accidental_rate: float = 0.0,
    rank: int = 1,
    eps: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    record_history: bool = False,
) -> MleBatch:
    """Batched likelihood maximization over rows of ``counts`` (B, K).

    Steps are accepted only if they do not lower the likelihood; the dilution
    grows after an accepted step and halves after a rejected one.  Every row
    evolves independently of the others.
    """
    settings = protocol_settings() if settings is None else settings
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    nb, nk = counts.shape
    if nk != len(settings):
        raise ValueError(f"{nk} count columns for {len(settings)} settings")
    if rank not in (1, 2, 3):
        raise ValueError("rank must be 1, 2 or 3")
    if np.any(counts < 0):
        raise ValueError("negative counts")
    if np.any(counts.sum(axis=1) <= 0):
        raise DegenerateDataError("a data set has zero counts everywhere")
    weights = np.ones(nk) if weights is None else np.asarray(weights, dtype=float)
    white = _Whitened(projectors(settings), weights)
    background = np.broadcast_to(accidental_rate * weights, (nb, nk)).copy()

    roots = _initial_roots(white, counts, background, rank)
    probs = _probs(white.ops, roots)
    lam = _signal_rate(counts, probs, background)
    loglik = _profile_loglik(counts, probs, background, lam)
    step = np.full(nb, float(eps))
    iterations = np.zeros(nb, dtype=int)
    converged = np.zeros(nb, dtype=bool)
    history = [[float(v)] for v in loglik] if record_history else []
    eye = np.eye(3)

    for _ in range(max_iter):
        act = np.flatnonzero(~converged)
        if act.size == 0:
            break
        n_a, b_a, t_a, p_a = counts[act], background[act], roots[act], probs[act]
        # floor keeps round-off counts on exactly dark settings finite
        den = np.maximum(lam[act, None] * p_a + b_a, 1e-15 * n_a.sum(axis=1, keepdims=True))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(n_a > 0, n_a / den, 0.0)
        rmat = (ratio[:, :, None, None] * white.ops[None]).sum(axis=1)
        e = step[act, None, None]
        new = ((1 - e) * eye + e * rmat) @ t_a
        new /= np.sqrt((np.abs(new) ** 2).sum(axis=(1, 2)))[:, None, None]
        new_p = _probs(white.ops, new)
        new_lam = _signal_rate(n_a, new_p, b_a)
        new_ll = _profile_loglik(n_a, new_p, b_a, new_lam)
        change = np.abs(
            _gram(new) - _gram(t_a)
        ).max(axis=(1, 2))
        ok = new_ll >= loglik[act]
        iterations[act] += 1
        acc = act[ok]
        roots[acc], probs[acc], lam[acc], loglik[acc] = new[ok], new_p[ok], new_lam[ok], new_ll[ok]
        step[acc] = np.minimum(step[acc] * 1.5, 1e6)
        step[act[~ok]] *= 0.5
        # a rejected step smaller than tol leaves nothing to improve
        converged[act[change < tol]] = True
        if record_history:
            for i in acc:
                history[i].append(float(loglik[i]))

    sigma = _gram(roots)
    rho = white.to_rho(sigma)
    return MleBatch(rho, iterations, loglik, converged, history)


def mle_reconstruct(
    counts: Sequence[CountRecord],
    settings: Sequence[MeasurementSetting] | None = None,
    *,
    accidental_rate: float = 0.0,
    rank: int = 1,
    eps: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    record_history: bool = False,
) -> MleResult:
    """Physical density matrix maximizing the Poisson likelihood of ``counts``.

    ``rank=1`` estimates a pure state; ``rank=3`` searches all density
    matrices.
    """
    settings = protocol_settings() if settings is None else settings
    n, w = _align(counts, settings)
    batch = diluted_mle(
        n[None], settings, weights=w, accidental_rate=accidental_rate, rank=rank,
        eps=eps, tol=tol, max_iter=max_iter, record_history=record_history,
    )
    rho = DensityMatrix3.from_array(batch.rho[0], physical=True)
    hist = tuple(batch.history[0]) if record_history else ()
    return MleResult(
        rho, int(batch.iterations[0]), float(batch.log_likelihood[0]),
        bool(batch.converged[0]), rank, hist,
    )


@dataclass(frozen=True)
class FidelityQuantiles:
    q05: float
    q50: float
    q95: float
    fidelities: np.ndarray = field(repr=False)
    converged_fraction: float = 1.0

    def as_dict(self) -> dict:
        return {"q05": self.q05, "q50": self.q50, "q95": self.q95}


def sample_count_table(
    rho, settings: Sequence[MeasurementSetting], mean_events: float, trials: int,
    seed: int, accidental_rate: float = 0.0,
) -> np.ndarray:
    """Poisson count table (trials, K); trial i uses the i-th spawned seed."""
    p = expected_moments(rho, settings)
    mu = mean_events * p / p.sum() + accidental_rate
    children = np.random.SeedSequence(seed).spawn(trials)
    return np.array([np.random.default_rng(c).poisson(mu) for c in children], dtype=float)


def fidelity_quantiles(
    target: PureQutrit,
    mean_events: int,
    trials: int,
    seed: int,
    *,
    rho=None,
    settings: Sequence[MeasurementSetting] | None = None,
    rank: int = 1,
) -> FidelityQuantiles:
    """Monte Carlo 5/50/95 % quantiles of the MLE fidelity to ``target``.

    Data are drawn from ``rho`` (default: the target itself).
    """
    if mean_events < 50:
        raise ValueError("mean_events must be >= 50")
    if trials < 200:
        raise ValueError("trials must be >= 200")
    settings = protocol_settings() if settings is None else settings
    source = target.projector if rho is None else np.asarray(rho, dtype=complex)
    table = sample_count_table(source, settings, mean_events, trials, seed)
    batch = diluted_mle(table, settings, rank=rank)
    fids = np.array([fidelity(r, target) for r in batch.rho])
    q05, q50, q95 = np.quantile(fids, [0.05, 0.5, 0.95])
    return FidelityQuantiles(float(q05), float(q50), float(q95), fids, float(batch.converged.mean()))
