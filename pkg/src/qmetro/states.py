"""N-qubit states and collective phase-shift generators.

Basis convention: H is ``0`` and V is ``1``; qubit (mode) 1 occupies the most
significant bit of the computational-basis index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import comb, sqrt
from typing import Sequence, Union

import numpy as np

from .errors import ParameterError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / sqrt(2),
    "-": np.array([1, -1], dtype=complex) / sqrt(2),
    "R": np.array([1, 1j], dtype=complex) / sqrt(2),
    "L": np.array([1, -1j], dtype=complex) / sqrt(2),
}

MAX_QUBITS = 12


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_n(n):
    if int(n) != n or n < 1:
        raise ParameterError(f"number of qubits must be a positive integer, got {n!r}")
    if n > MAX_QUBITS:
        raise ParameterError(f"at most {MAX_QUBITS} qubits are supported, got {n}")
    return int(n)


@dataclass(frozen=True, eq=False)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        n = _check_n(self.n_qubits)
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape != (2**n,):
            raise ParameterError(f"expected {2**n} amplitudes, got {amps.shape[0]}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-12:
            raise ParameterError(f"state is not normalized (norm**2 = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def density(self) -> QuantumState:
        return QuantumState(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Density matrix of ``n_qubits`` qubits."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        n = _check_n(self.n_qubits)
        rho = _frozen(self.matrix)
        if rho.shape != (2**n, 2**n):
            raise ParameterError(f"expected a {2**n}x{2**n} matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ParameterError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise ParameterError(f"density matrix trace is {np.trace(rho).real!r}, expected 1")
        if self.eigenvalues[0] < -1e-10:
            raise ParameterError(f"density matrix has negative eigenvalue {self.eigenvalues[0]!r}")
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> QuantumState:
        d = 2 ** _check_n(n_qubits)
        return cls(n_qubits, np.eye(d) / d)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @cached_property
    def _spectrum(self):
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._spectrum[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._spectrum[1]

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


State = Union[PureState, QuantumState]


def as_density(state: State) -> QuantumState:
    if isinstance(state, PureState):
        return state.density()
    if isinstance(state, QuantumState):
        return state
    raise ParameterError(f"expected a PureState or QuantumState, got {type(state).__name__}")


@dataclass(frozen=True)
class LocalAxis:
    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = self.x**2 + self.y**2 + self.z**2
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-12:
            raise ParameterError(f"axis ({self.x}, {self.y}, {self.z}) is not a unit vector")

    @classmethod
    def from_vector(cls, v: Sequence[float], normalize: bool = False) -> LocalAxis:
        v = np.asarray(v, dtype=float)
        if v.shape != (3,):
            raise ParameterError(f"axis needs 3 components, got {v.shape}")
        if normalize:
            norm = np.linalg.norm(v)
            if norm == 0:
                raise ParameterError("cannot normalize a zero vector")
            v = v / norm
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_label(cls, label: str) -> LocalAxis:
        try:
            return _LABELS[label.strip().lower()]
        except KeyError:
            raise ParameterError(f"unknown axis label {label!r}") from None

    @classmethod
    def from_angles(cls, polar: float, azimuth: float) -> LocalAxis:
        return cls.from_vector(
            [np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)],
            normalize=True,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def pauli(self) -> np.ndarray:
        """The single-qubit operator n.sigma."""
        return self.x * SIGMA_X + self.y * SIGMA_Y + self.z * SIGMA_Z


_LABELS = {
    "x": LocalAxis(1.0, 0.0, 0.0),
    "y": LocalAxis(0.0, 1.0, 0.0),
    "z": LocalAxis(0.0, 0.0, 1.0),
}


def embed(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Act with a 2x2 ``op`` on ``qubit`` (0 = most significant) of an n-qubit register."""
    left = np.eye(2**qubit)
    right = np.eye(2 ** (n_qubits - qubit - 1))
    return np.kron(np.kron(left, op), right)


def kron_all(ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def coerce_axes(axes, n_qubits: int | None = None) -> tuple[LocalAxis, ...]:
    """Accept a label, a LocalAxis, or a sequence of either / of 3-vectors."""
    if isinstance(axes, (str, LocalAxis)):
        if n_qubits is None:
            raise ParameterError("n_qubits is required to broadcast a single axis")
        axes = [axes] * n_qubits
    out = []
    for a in axes:
        if isinstance(a, LocalAxis):
            out.append(a)
        elif isinstance(a, str):
            out.append(LocalAxis.from_label(a))
        else:
            out.append(LocalAxis.from_vector(a))
    if n_qubits is not None and len(out) != n_qubits:
        raise ParameterError(f"expected {n_qubits} axes, got {len(out)}")
    return tuple(out)


@dataclass(frozen=True, eq=False)
class CollectiveGenerator:
    """J = 1/2 sum_i n_i . sigma^(i)."""

    n_qubits: int
    axes: tuple[LocalAxis, ...]
    matrix: np.ndarray

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    def unitary(self, theta: float) -> np.ndarray:
        lam, vec = self.spectrum
        return (vec * np.exp(-1j * lam * theta)) @ vec.conj().T


def collective_generator(axes, n_qubits: int | None = None) -> CollectiveGenerator:
    axes = coerce_axes(axes, n_qubits)
    n = _check_n(len(axes))
    mat = np.zeros((2**n, 2**n), dtype=complex)
    for i, axis in enumerate(axes):
        mat += embed(axis.pauli(), i, n)
    return CollectiveGenerator(n, axes, _frozen(0.5 * mat))


def dicke(n_qubits: int, k: int) -> PureState:
    """Symmetric state with exactly ``k`` V photons."""
    n = _check_n(n_qubits)
    if int(k) != k or not 0 <= k <= n:
        raise ParameterError(f"Dicke excitation number must satisfy 0 <= k <= {n}, got {k!r}")
    amps = np.zeros(2**n, dtype=complex)
    for ones in combinations(range(n), int(k)):
        amps[sum(1 << (n - 1 - q) for q in ones)] = 1.0
    return PureState(n, amps / sqrt(comb(n, int(k))))


def ghz(n_qubits: int) -> PureState:
    n = _check_n(n_qubits)
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / sqrt(2)
    return PureState(n, amps)


def product(n_qubits: int, ket="+") -> PureState:
    n = _check_n(n_qubits)
    if isinstance(ket, str):
        try:
            ket = KETS[ket]
        except KeyError:
            raise ParameterError(f"unknown single-qubit ket {ket!r}") from None
    ket = np.asarray(ket, dtype=complex)
    if ket.shape != (2,):
        raise ParameterError("single-qubit ket must have two amplitudes")
    norm = np.linalg.norm(ket)
    if norm == 0:
        raise ParameterError("single-qubit ket is zero")
    amps = kron_all([(ket / norm)[:, None]] * n).reshape(-1)
    return PureState(n, amps)


def state_factory(kind: str, n_qubits: int, k: int | None = None, ket="+") -> PureState:
    """Build one of the named probe states: ``dicke``, ``ghz`` or ``product``."""
    if kind == "dicke":
        if k is None:
            k = n_qubits // 2
        return dicke(n_qubits, k)
    if kind == "ghz":
        return ghz(n_qubits)
    if kind == "product":
        return product(n_qubits, ket)
    raise ParameterError(f"unknown state kind {kind!r}")


def _check_dims(a: int, b: int):
    if a != b:
        raise ParameterError(f"dimension mismatch: {a} vs {b}")


def evolve(state: State, generator: CollectiveGenerator, theta: float) -> QuantumState:
    """Return U rho U^dagger with U = exp(-i J theta)."""
    rho = as_density(state)
    _check_dims(rho.dim, generator.matrix.shape[0])
    if theta == 0:
        return rho
    u = generator.unitary(theta)
    out = u @ rho.matrix @ u.conj().T
    return QuantumState(rho.n_qubits, 0.5 * (out + out.conj().T))


def fidelity(state: State, target: PureState) -> float:
    """<psi| rho |psi> for a pure target state."""
    rho = as_density(state)
    _check_dims(rho.dim, target.dim)
    psi = target.amplitudes
    return float(np.vdot(psi, rho.matrix @ psi).real)


def mix(states: Sequence[State], weights: Sequence[float]) -> QuantumState:
    """Convex combination of density matrices."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
        raise ParameterError("mixture weights must be nonnegative and sum to 1")
    mats = [as_density(s) for s in states]
    for m in mats[1:]:
        _check_dims(m.dim, mats[0].dim)
    total = sum(w * m.matrix for w, m in zip(weights, mats))
    return QuantumState(mats[0].n_qubits, total)
