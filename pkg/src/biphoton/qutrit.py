"""Polarization qutrits carried by single-mode biphotons.

A pure state is ``c1|2,0> + c2|1,1> + c3|0,2>`` in the photon-number basis of
the horizontal (a) and vertical (b) modes.  The same state can be written as a
symmetrized pair of single-photon polarizations, which is how the measurement
filters are tuned to it.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ShapeError, ZeroStateError

SQRT2 = math.sqrt(2.0)
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
PSD_TOL = 1e-9


@dataclass(frozen=True)
class PureQutrit:
    """Unit-norm amplitudes with the first nonzero amplitude real and >= 0.

    Build instances with :func:`normalize` unless the amplitudes are already
    canonical.
    """

    c1: complex
    c2: complex
    c3: complex

    def __post_init__(self):
        vec = self.vector
        norm = float(np.vdot(vec, vec).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes not unit norm (|c|^2 = {norm!r})")
        for c in vec:
            if abs(c) > NORM_TOL:
                if abs(c.imag) > NORM_TOL or c.real < 0:
                    raise ValueError("first nonzero amplitude must be real and >= 0")
                break

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3], dtype=complex)

    @property
    def projector(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    @property
    def phases_deg(self) -> tuple[float, float, float]:
        """Arguments of the amplitudes in degrees; zero for vanishing ones."""
        return tuple(
            math.degrees(cmath.phase(c)) if abs(c) > NORM_TOL else 0.0 for c in self.vector
        )

    @property
    def phi12(self) -> float:
        return cmath.phase(self.c2) - cmath.phase(self.c1)

    @property
    def phi13(self) -> float:
        return cmath.phase(self.c3) - cmath.phase(self.c1)

    def density(self) -> "DensityMatrix3":
        return DensityMatrix3(self.projector, physical=True)


def normalize(raw: Sequence[complex]) -> PureQutrit:
    """Scale a complex triple to unit norm and remove its global phase."""
    vec = np.asarray(raw, dtype=complex).reshape(3)
    norm = np.linalg.norm(vec)
    if norm == 0 or not np.isfinite(norm):
        raise ZeroStateError("cannot normalize the zero vector")
    vec = vec / norm
    for c in vec:
        if abs(c) > NORM_TOL:
            vec = vec * (abs(c) / c)
            break
    # snap the reference amplitude so the canonical-phase check is exact
    idx = int(np.argmax(np.abs(vec) > NORM_TOL))
    vec[idx] = abs(vec[idx])
    vec = vec / np.linalg.norm(vec)
    return PureQutrit(complex(vec[0]), complex(vec[1]), complex(vec[2]))


class DensityMatrix3:
    """3x3 Hermitian, unit-trace matrix.

    ``physical`` marks matrices known to be positive semidefinite; raw
    reconstructions from measured moments carry ``physical=False`` because
    they may have small negative eigenvalues.
    """

    __slots__ = ("_data", "physical")

    def __init__(self, data, physical: bool = False):
        arr = np.array(data, dtype=complex)
        if arr.shape != (3, 3):
            raise ShapeError(f"expected a 3x3 matrix, got shape {arr.shape}")
        if np.max(np.abs(arr - arr.conj().T)) > HERMITIAN_TOL:
            raise ShapeError("matrix is not Hermitian")
        tr = np.trace(arr).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace must be 1, got {tr!r}")
        arr.setflags(write=False)
        self._data = arr
        if physical and np.linalg.eigvalsh(arr).min() < -PSD_TOL:
            raise ValueError("matrix flagged physical but has negative eigenvalues")
        self.physical = bool(physical)

    @property
    def data(self) -> np.ndarray:
        return self._data

    def __array__(self, dtype=None, copy=None):
        return self._data.astype(dtype) if dtype is not None else self._data.copy()

    def __getitem__(self, idx):
        return self._data[idx]

    def __repr__(self):
        return f"DensityMatrix3({self._data.tolist()!r}, physical={self.physical})"

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix3):
            return NotImplemented
        return self.physical == other.physical and np.array_equal(self._data, other._data)

    def __hash__(self):
        return hash((self._data.tobytes(), self.physical))

    @classmethod
    def from_array(cls, data, physical: bool | None = None, normalize_trace: bool = False):
        """Build from an array, symmetrizing rounding noise.

        With ``physical=None`` the flag is set from the spectrum.
        """
        arr = np.array(data, dtype=complex)
        if arr.shape != (3, 3):
            raise ShapeError(f"expected a 3x3 matrix, got shape {arr.shape}")
        if np.max(np.abs(arr - arr.conj().T)) > 1e-9:
            raise ShapeError("matrix is not Hermitian")
        arr = 0.5 * (arr + arr.conj().T)
        if normalize_trace:
            arr = arr / np.trace(arr).real
        if physical is None:
            physical = bool(np.linalg.eigvalsh(arr).min() >= -PSD_TOL)
        return cls(arr, physical=physical)

    @classmethod
    def maximally_mixed(cls):
        return cls(np.eye(3) / 3.0, physical=True)


@dataclass(frozen=True, order=True)
class MajoranaPoint:
    """Direction of one photon's polarization on the Poincare sphere (radians)."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta out of [0, pi]: {self.theta!r}")
        if not (0.0 <= self.phi < 2 * math.pi):
            raise ValueError(f"phi out of [0, 2pi): {self.phi!r}")

    @property
    def jones(self) -> np.ndarray:
        """(h, v) components of the photon's polarization."""
        return np.array(
            [math.cos(self.theta / 2), cmath.exp(1j * self.phi) * math.sin(self.theta / 2)]
        )


@dataclass(frozen=True)
class MajoranaPair:
    p1: MajoranaPoint
    p2: MajoranaPoint

    def __post_init__(self):
        if self.p2 < self.p1:
            a, b = self.p2, self.p1
            object.__setattr__(self, "p1", a)
            object.__setattr__(self, "p2", b)

    def __iter__(self):
        yield self.p1
        yield self.p2


class ProtocolStateId(enum.Enum):
    """The twelve states of the qutrit BB84 extension, grouped in four bases.

    Member names carry the number of primes as a suffix digit.
    """

    ALPHA = ("alpha", 1, (1.0, 0.0, 0.0), (0, 0, 0))
    BETA = ("beta", 1, (0.0, 1.0, 0.0), (0, 0, 0))
    GAMMA = ("gamma", 1, (0.0, 0.0, 1.0), (0, 0, 0))
    ALPHA1 = ("alpha", 2, None, (0, 0, 0))
    BETA1 = ("beta", 2, None, (0, 120, -120))
    GAMMA1 = ("gamma", 2, None, (0, -120, 120))
    ALPHA2 = ("alpha", 3, None, (120, 0, 0))
    BETA2 = ("beta", 3, None, (0, 120, 0))
    GAMMA2 = ("gamma", 3, None, (0, 0, 120))
    ALPHA3 = ("alpha", 4, None, (-120, 0, 0))
    BETA3 = ("beta", 4, None, (0, -120, 0))
    GAMMA3 = ("gamma", 4, None, (0, 0, -120))

    def __init__(self, letter, basis, moduli, phases_deg):
        self.letter = letter
        self.basis = basis
        self.moduli = moduli if moduli is not None else (1 / math.sqrt(3),) * 3
        self.phases_deg = phases_deg

    @property
    def primes(self) -> int:
        return self.basis - 1

    @property
    def label(self) -> str:
        greek = {"alpha": "α", "beta": "β", "gamma": "γ"}[self.letter]
        return greek + ("", "′", "″", "‴")[self.primes]

    @property
    def ascii_name(self) -> str:
        return self.letter + "'" * self.primes

    @classmethod
    def parse(cls, text: str) -> "ProtocolStateId":
        """Accept ``beta''``, ``beta_pp``, ``β″``, ``BETA2`` and similar spellings."""
        s = text.strip()
        for greek, name in (("α", "alpha"), ("β", "beta"), ("γ", "gamma")):
            s = s.replace(greek, name)
        s = s.replace("‴", "'''").replace("″", "''").replace("′", "'")
        s = s.replace("’", "'").lower()
        if s.upper() in cls.__members__:
            return cls[s.upper()]
        if "_" in s:
            base, _, suffix = s.partition("_")
            if suffix and set(suffix) == {"p"}:
                s = base + "'" * len(suffix)
        letter = s.rstrip("'")
        primes = len(s) - len(letter)
        for member in cls:
            if member.letter == letter and member.primes == primes:
                return member
        raise KeyError(f"unknown protocol state {text!r}")


def protocol_state(state_id: ProtocolStateId) -> PureQutrit:
    """Amplitudes of a protocol state, canonicalized to a real first amplitude.

    ``state_id.moduli`` and ``state_id.phases_deg`` keep the tabulated form;
    the two differ only by a global phase.
    """
    raw = [
        m * cmath.exp(1j * math.radians(p))
        for m, p in zip(state_id.moduli, state_id.phases_deg)
    ]
    return normalize(raw)


def protocol_states() -> dict[ProtocolStateId, PureQutrit]:
    return {sid: protocol_state(sid) for sid in ProtocolStateId}


def inner_product(a: PureQutrit, b: PureQutrit) -> complex:
    return complex(np.vdot(a.vector, b.vector))


StateLike = Union[PureQutrit, DensityMatrix3, np.ndarray]


def _as_matrix(rho: StateLike) -> np.ndarray:
    if isinstance(rho, PureQutrit):
        return rho.projector
    if isinstance(rho, DensityMatrix3):
        return rho.data
    arr = np.asarray(rho, dtype=complex)
    if arr.shape == (3,):
        return np.outer(arr, arr.conj())
    return arr


def fidelity(rho: StateLike, target: PureQutrit) -> float:
    """Tr(|t><t| rho), exceeding 1 only for non-positive rho."""
    t = target.vector
    return float(np.real(t.conj() @ _as_matrix(rho) @ t))


# ---------------------------------------------------------------------------
# Majorana factorization


def _point_from_root(u: complex | None) -> MajoranaPoint:
    if u is None:
        return MajoranaPoint(math.pi, 0.0)
    r = abs(u)
    theta = 2.0 * math.atan(r)
    if theta < 1e-12:
        return MajoranaPoint(0.0, 0.0)
    if math.pi - theta < 1e-12:
        return MajoranaPoint(math.pi, 0.0)
    phi = cmath.phase(u) % (2 * math.pi)
    if phi >= 2 * math.pi:
        phi = 0.0
    return MajoranaPoint(theta, phi)


def _quadratic_roots(a: complex, b: complex, c: complex) -> tuple[complex, complex]:
    # cancellation-free form; a and q are both nonzero here
    s = cmath.sqrt(b * b - 4 * a * c)
    if (b.conjugate() * s).real < 0:
        s = -s
    q = -0.5 * (b + s)
    if q == 0:
        return 0j, 0j
    return q / a, c / q


def majorana_decompose(state: PureQutrit) -> MajoranaPair:
    """Split a state into the two photon polarizations whose product makes it.

    Roots ``u`` of ``c1 z^2 - sqrt2 c2 z + c3 = 0`` give a photon
    ``a^+ + u b^+``; a missing root (``c1 = 0``) is the pure V photon.
    """
    c1, c2, c3 = state.vector
    if abs(c1) <= NORM_TOL:
        if abs(c2) <= NORM_TOL:
            return MajoranaPair(_point_from_root(None), _point_from_root(None))
        return MajoranaPair(_point_from_root(c3 / (SQRT2 * c2)), _point_from_root(None))
    u1, u2 = _quadratic_roots(complex(c1), complex(-SQRT2 * c2), complex(c3))
    return MajoranaPair(_point_from_root(u1), _point_from_root(u2))


def majorana_compose(pair: MajoranaPair) -> PureQutrit:
    h1, v1 = pair.p1.jones
    h2, v2 = pair.p2.jones
    return normalize([SQRT2 * h1 * h2, h1 * v2 + v1 * h2, SQRT2 * v1 * v2])


# ---------------------------------------------------------------------------
# Spectra


@dataclass(frozen=True)
class EigenDecomposition:
    """Descending eigenvalues with matching eigenvectors (rows X, Y, Z)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def principal(self) -> np.ndarray:
        return self.eigenvectors[0]

    @property
    def principal_weight(self) -> float:
        return float(self.eigenvalues[0])

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return np.einsum("k,ki,kj->ij", self.eigenvalues, v, v.conj())


def _pivot(vec: np.ndarray) -> int:
    """First component within round-off of the largest magnitude."""
    mag = np.abs(vec)
    return int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])


def eigendecompose(rho: StateLike) -> EigenDecomposition:
    """Hermitian eigen-decomposition, sorted descending.

    Each eigenvector is rotated so its largest-magnitude component (the
    first one on near-ties) is real and positive.
    """
    arr = _as_matrix(rho)
    if arr.shape != (3, 3):
        raise ShapeError(f"expected a 3x3 matrix, got shape {arr.shape}")
    if np.max(np.abs(arr - arr.conj().T)) > 1e-9:
        raise ShapeError("matrix is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (arr + arr.conj().T))
    order = np.argsort(w)[::-1]
    w = w[order]
    vecs = v[:, order].T.copy()
    for k, vec in enumerate(vecs):
        j = _pivot(vec)
        vecs[k] = vec * (abs(vec[j]) / vec[j])
    w.setflags(write=False)
    vecs.setflags(write=False)
    return EigenDecomposition(w, vecs)


# ---------------------------------------------------------------------------
# Mutually unbiased bases


@dataclass(frozen=True)
class MubViolation:
    a: ProtocolStateId
    b: ProtocolStateId
    expected: float
    observed: float


@dataclass(frozen=True)
class MubReport:
    ids: tuple[ProtocolStateId, ...]
    overlaps: np.ndarray  # |<i|j>|^2, indexed like ids
    violations: tuple[MubViolation, ...] = field(default=())
    tolerance: float = 1e-12

    @property
    def ok(self) -> bool:
        return not self.violations

    def overlap(self, a: ProtocolStateId, b: ProtocolStateId) -> float:
        return float(self.overlaps[self.ids.index(a), self.ids.index(b)])


def expected_overlap(a: ProtocolStateId, b: ProtocolStateId) -> float:
    if a is b:
        return 1.0
    return 0.0 if a.basis == b.basis else 1.0 / 3.0


def verify_mub(
    states: dict[ProtocolStateId, PureQutrit] | None = None, tol: float = 1e-12
) -> MubReport:
    """Check every pairwise overlap against basis membership."""
    states = protocol_states() if states is None else states
    ids = tuple(states)
    vecs = np.array([states[i].vector for i in ids])
    overlaps = np.abs(vecs.conj() @ vecs.T) ** 2
    bad = []
    for i, j in combinations_with_replacement(range(len(ids)), 2):
        exp = expected_overlap(ids[i], ids[j])
        if abs(overlaps[i, j] - exp) > tol:
            bad.append(MubViolation(ids[i], ids[j], exp, float(overlaps[i, j])))
    overlaps.setflags(write=False)
    return MubReport(ids, overlaps, tuple(bad), tol)


def random_states(n: int, rng: np.random.Generator) -> Iterable[PureQutrit]:
    """Haar-random pure states, for property checks and benchmarks."""
    raw = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    for row in raw:
        yield normalize(row)
