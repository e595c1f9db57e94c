"""Polarization interferometer: outcome probabilities, noise, calibration and Fisher information.

The output observable is mu = (N_H - N_V) / 2. For a probe rho, generator J and
phase theta the outcome probabilities are

    P(mu | theta) = Tr[Pi_mu U(theta) rho U(theta)^dagger],  U = exp(-i J theta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import FitError, InconsistencyError, ParameterError
from .states import (
    CollectiveGenerator,
    LocalAxis,
    QuantumState,
    State,
    as_density,
    collective_generator,
    kron_all,
)

PROB_FLOOR = 1e-12
DERIV_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    n_qubits: int
    outcomes: tuple[int, ...]
    projectors: dict[int, np.ndarray] = field(repr=False)

    def rank(self, mu: int) -> int:
        return int(round(np.trace(self.projectors[mu]).real))


def _outcome_of_index(n_qubits: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    n_v = np.array([bin(i).count("1") for i in idx])
    return (n_qubits - 2 * n_v) // 2


def projectors(n_qubits: int) -> MeasurementModel:
    """Projectors onto fixed (N_H - N_V)/2, diagonal in the H/V basis."""
    if int(n_qubits) != n_qubits or n_qubits < 2:
        raise ParameterError(f"need at least 2 qubits, got {n_qubits!r}")
    if n_qubits % 2:
        raise ParameterError("odd N gives half-integer outcomes, which are not supported")
    n = int(n_qubits)
    mu_of = _outcome_of_index(n)
    outcomes = tuple(range(-n // 2, n // 2 + 1))
    projs = {}
    for mu in outcomes:
        p = np.diag((mu_of == mu).astype(complex))
        p.setflags(write=False)
        projs[mu] = p
    return MeasurementModel(n, outcomes, projs)


@dataclass(frozen=True)
class NoiseModel:
    """Imperfections of the interferometer.

    misalignment
        Tilt angle t_i per qubit (radians), or one number for all qubits. Qubit
        i's rotation axis n_i is tilted by t_i toward e_i = n_i x z (x when n_i
        is along z), and its polarization analyzer is offset by a rotation of
        t_i about n_i.
    white_noise
        Weight p of the maximally mixed state mixed into the probe.
    visibility
        v in rho -> v rho + (1 - v) diag(rho), damping coherences of the probe.
    """

    misalignment: float | tuple[float, ...] = 0.0
    white_noise: float = 0.0
    visibility: float = 1.0

    def __post_init__(self):
        tilts = self.misalignment
        if np.ndim(tilts) == 0:
            tilts = float(tilts)
            ok = np.isfinite(tilts) and abs(tilts) <= np.pi
        else:
            tilts = tuple(float(t) for t in tilts)
            ok = all(np.isfinite(t) and abs(t) <= np.pi for t in tilts)
        if not ok:
            raise ParameterError(f"misalignment angles must lie in [-pi, pi], got {self.misalignment!r}")
        if not 0.0 <= self.white_noise <= 1.0:
            raise ParameterError(f"white_noise must lie in [0, 1], got {self.white_noise!r}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ParameterError(f"visibility must lie in [0, 1], got {self.visibility!r}")
        object.__setattr__(self, "misalignment", tilts)

    def tilts(self, n_qubits: int) -> np.ndarray:
        if isinstance(self.misalignment, tuple):
            if len(self.misalignment) != n_qubits:
                raise ParameterError(
                    f"expected {n_qubits} misalignment angles, got {len(self.misalignment)}"
                )
            return np.array(self.misalignment)
        return np.full(n_qubits, self.misalignment)

    @property
    def is_identity(self) -> bool:
        return (
            not np.any(np.asarray(self.misalignment))
            and self.white_noise == 0.0
            and self.visibility == 1.0
        )

    def as_dict(self) -> dict:
        tilt = self.misalignment
        return {
            "misalignment": list(tilt) if isinstance(tilt, tuple) else tilt,
            "white_noise": self.white_noise,
            "visibility": self.visibility,
        }


def _tilt_direction(axis: np.ndarray) -> np.ndarray:
    e = np.cross(axis, [0.0, 0.0, 1.0])
    norm = np.linalg.norm(e)
    if norm < 1e-12:
        return np.array([1.0, 0.0, 0.0])
    return e / norm


def _noisy_probe(rho: np.ndarray, noise: NoiseModel) -> np.ndarray:
    d = rho.shape[0]
    v = noise.visibility
    out = v * rho + (1 - v) * np.diag(np.diag(rho))
    p = noise.white_noise
    return (1 - p) * out + p * np.eye(d) / d


@dataclass(frozen=True, eq=False)
class ProbabilityModel:
    """theta -> {P(mu | theta)} for a probe, generator, measurement and optional noise."""

    probe: QuantumState
    generator: CollectiveGenerator
    measurement: MeasurementModel
    noise: NoiseModel | None = None

    def __post_init__(self):
        n = self.probe.n_qubits
        if self.generator.n_qubits != n or self.measurement.n_qubits != n:
            raise ParameterError("probe, generator and measurement act on different numbers of qubits")

    @property
    def n_qubits(self) -> int:
        return self.probe.n_qubits

    @property
    def outcomes(self) -> tuple[int, ...]:
        return self.measurement.outcomes

    def outcome_index(self, mu) -> int:
        try:
            return self.outcomes.index(int(mu)) if int(mu) == mu else -1
        except ValueError:
            return -1

    @cached_property
    def effective_generator(self) -> CollectiveGenerator:
        if self.noise is None or not np.any(self.noise.tilts(self.n_qubits)):
            return self.generator
        axes = []
        for axis, t in zip(self.generator.axes, self.noise.tilts(self.n_qubits)):
            n = axis.as_array()
            axes.append(
                LocalAxis.from_vector(np.cos(t) * n + np.sin(t) * _tilt_direction(n), normalize=True)
            )
        return collective_generator(axes)

    @cached_property
    def effective_probe(self) -> QuantumState:
        if self.noise is None:
            return self.probe
        rho = _noisy_probe(self.probe.matrix, self.noise)
        return QuantumState(self.n_qubits, 0.5 * (rho + rho.conj().T))

    @cached_property
    def effective_projectors(self) -> np.ndarray:
        projs = np.array([self.measurement.projectors[mu] for mu in self.outcomes])
        if self.noise is None or not np.any(self.noise.tilts(self.n_qubits)):
            return projs
        local = []
        for axis, t in zip(self.generator.axes, self.noise.tilts(self.n_qubits)):
            local.append(np.cos(t / 2) * np.eye(2) - 1j * np.sin(t / 2) * axis.pauli())
        a = kron_all(local)
        return np.einsum("ji,mjk,kl->mil", a.conj(), projs, a)

    @cached_property
    def _spectral(self):
        # P(mu|theta) = Re sum_kl W[mu,k,l] exp(-i (lam_k - lam_l) theta) in the eigenbasis of J
        lam, vec = self.effective_generator.spectrum
        r = vec.conj().T @ self.effective_probe.matrix @ vec
        q = np.einsum("ij,mjk,kl->mil", vec.conj().T, self.effective_projectors, vec)
        w = np.transpose(q, (0, 2, 1)) * r[None]
        omega = (lam[:, None] - lam[None, :]).reshape(-1)
        return w.reshape(len(self.outcomes), -1), omega

    def _evaluate(self, thetas: np.ndarray, derivative: bool):
        w, omega = self._spectral
        phase = np.exp(-1j * np.outer(thetas, omega))
        if derivative:
            phase = phase * (-1j * omega)[None, :]
        return np.real(phase @ w.T)

    def probabilities(self, theta) -> np.ndarray:
        """P(mu|theta) with shape ``theta.shape + (n_outcomes,)``."""
        thetas = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(thetas)):
            raise ParameterError("phase must be finite")
        p = self._evaluate(thetas.reshape(-1), derivative=False)
        low = p.min(initial=0.0)
        if low < -PROB_FLOOR:
            raise InconsistencyError(f"negative probability {low!r}")
        p = np.clip(p, 0.0, 1.0)
        return p.reshape(thetas.shape + (len(self.outcomes),))

    def derivatives(self, theta) -> np.ndarray:
        """dP(mu|theta)/dtheta from d rho/d theta = -i [J, rho_theta]."""
        thetas = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(thetas)):
            raise ParameterError("phase must be finite")
        d = self._evaluate(thetas.reshape(-1), derivative=True)
        return d.reshape(thetas.shape + (len(self.outcomes),))


def probability_model(
    state: State, axes="y", noise: NoiseModel | None = None
) -> ProbabilityModel:
    """Convenience constructor: probe, per-qubit axes (or one label), optional noise."""
    rho = as_density(state)
    gen = axes if isinstance(axes, CollectiveGenerator) else collective_generator(axes, rho.n_qubits)
    model = ProbabilityModel(rho, gen, projectors(rho.n_qubits))
    return apply_noise(model, noise) if noise is not None else model


def _index(model: ProbabilityModel, mu) -> int:
    i = model.outcome_index(mu)
    if i < 0:
        raise ParameterError(f"outcome {mu!r} is not in {model.outcomes}")
    return i


def cond_prob(model: ProbabilityModel, theta: float, mu: int) -> float:
    return float(model.probabilities(theta)[_index(model, mu)])


def prob_derivative(model: ProbabilityModel, theta: float, mu: int) -> float:
    return float(model.derivatives(theta)[_index(model, mu)])


def fisher_terms(model: ProbabilityModel, theta) -> tuple[np.ndarray, np.ndarray]:
    """Classical Fisher information and divergence flags on an array of phases.

    Outcomes with P < 1e-12 are skipped when |dP/dtheta| < 1e-9 as well; if the
    derivative does not vanish there the point is flagged as divergent and only
    the regular terms are summed.
    """
    p = model.probabilities(theta)
    d = model.derivatives(theta)
    small = p < PROB_FLOOR
    divergent = np.any(small & (np.abs(d) >= DERIV_FLOOR), axis=-1)
    safe = np.where(small, 1.0, p)
    f = np.sum(np.where(small, 0.0, d**2 / safe), axis=-1)
    return f, divergent


def fisher_information(model: ProbabilityModel, theta: float) -> float:
    """sum_mu (dP(mu|theta)/dtheta)^2 / P(mu|theta); ``inf`` at a divergent point."""
    f, divergent = fisher_terms(model, float(theta))
    return math.inf if bool(divergent) else float(f)


def apply_noise(model: ProbabilityModel, noise: NoiseModel | None) -> ProbabilityModel:
    """Return ``model`` with its noise replaced by ``noise`` (the ideal parts are kept)."""
    if noise is not None:
        if not isinstance(noise, NoiseModel):
            raise ParameterError(f"expected a NoiseModel, got {type(noise).__name__}")
        noise.tilts(model.n_qubits)
    return replace(model, noise=noise)


# calibration ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CalibrationData:
    """Outcome counts ``counts[j, i]`` for phase ``thetas[j]`` and outcome ``outcomes[i]``."""

    thetas: np.ndarray
    outcomes: tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        counts = np.asarray(self.counts)
        if counts.shape != (len(thetas), len(self.outcomes)):
            raise ParameterError(f"counts shape {counts.shape} does not match phases x outcomes")
        if np.any(counts < 0):
            raise ParameterError("counts must be nonnegative")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "outcomes", tuple(int(m) for m in self.outcomes))

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.totals[:, None]


def simulate_calibration(
    model: ProbabilityModel, thetas: Sequence[float], events: int, seed: int = 0
) -> CalibrationData:
    """Multinomial counts with ``events`` detections per phase."""
    rng = np.random.default_rng(seed)
    p = model.probabilities(np.asarray(thetas, dtype=float))
    counts = np.array([rng.multinomial(events, row / row.sum()) for row in p])
    return CalibrationData(np.asarray(thetas, dtype=float), model.outcomes, counts)


def calibration_residual(data: CalibrationData, model: ProbabilityModel) -> np.ndarray:
    """Frequency minus model probability, one row per phase, columns in ``data.outcomes``."""
    p = model.probabilities(data.thetas)
    cols = [_index(model, mu) for mu in data.outcomes]
    return data.frequencies - p[:, cols]


FAMILIES = ("collective", "per-qubit")


def fit_calibration(
    data: CalibrationData,
    model: ProbabilityModel,
    family: str = "collective",
    fit_visibility: bool = False,
    max_iter: int = 200,
) -> tuple[NoiseModel, ProbabilityModel]:
    """Least-squares fit of noise parameters to measured outcome frequencies.

    ``family`` selects one shared tilt (``"collective"``) or one tilt per qubit
    (``"per-qubit"``). White noise is always fitted, visibility on request.
    The objective is sum_{j,mu} (c_j(mu)/total_j - P(mu|theta_j))^2.
    """
    if family not in FAMILIES:
        raise ParameterError(f"unknown model family {family!r}; expected one of {FAMILIES}")
    if len(data.thetas) < 2:
        raise ParameterError("need at least two phase points")
    if np.any(data.totals <= 0):
        raise ParameterError("every phase needs a positive number of events")
    for mu in data.outcomes:
        _index(model, mu)
    n = model.n_qubits
    n_tilt = 1 if family == "collective" else n

    def unpack(x):
        tilt = float(x[0]) if n_tilt == 1 else tuple(float(t) for t in x[:n_tilt])
        vis = float(x[n_tilt + 1]) if fit_visibility else 1.0
        return NoiseModel(tilt, float(x[n_tilt]), vis)

    def residual(x):
        return calibration_residual(data, apply_noise(model, unpack(x))).reshape(-1)

    lower = [-np.pi / 4] * n_tilt + [0.0] + ([0.0] if fit_visibility else [])
    upper = [np.pi / 4] * n_tilt + [1.0] + ([1.0] if fit_visibility else [])
    best = None
    for sign in (1.0, -1.0):
        x0 = [sign * 0.02] * n_tilt + [0.05] + ([0.95] if fit_visibility else [])
        res = optimize.least_squares(
            residual, x0, bounds=(lower, upper), xtol=1e-10, ftol=1e-10, gtol=1e-10,
            max_nfev=max_iter * len(x0),
        )
        if res.status > 0 and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise FitError(f"calibration fit did not converge: {res.message}", residual=res.fun)
    noise = unpack(best.x)
    return noise, apply_noise(model, noise)
