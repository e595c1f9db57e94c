"""Quantum Fisher information, local-axis optimization and entanglement depth."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistencyError, ParameterError
from .states import (
    PAULIS,
    CollectiveGenerator,
    LocalAxis,
    PureState,
    State,
    as_density,
    collective_generator,
    dicke,
    embed,
    fidelity,
)

# lambda_k + lambda_l below this is a removable zero of the QFI summand
SPECTRAL_CUTOFF = 1e-12
# symmetric starts (all-z on a Dicke state) sit on saddle points of the block ascent
START_JITTER = 1e-6
WITNESS_BOUND = 2.0 / 3.0


@dataclass(frozen=True)
class QfiResult:
    value: float
    axes: tuple[LocalAxis, ...]
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)


@dataclass(frozen=True)
class DepthClassification:
    certified_depth: int
    bounds_table: dict[int, float]


def _spectral_weights(eigenvalues: np.ndarray) -> np.ndarray:
    lk = eigenvalues[:, None]
    ll = eigenvalues[None, :]
    s = lk + ll
    w = np.zeros_like(s)
    ok = s >= SPECTRAL_CUTOFF
    w[ok] = 2.0 * (lk - ll)[ok] ** 2 / s[ok]
    return w


def qfi(state: State, generator: CollectiveGenerator) -> float:
    """Quantum Fisher information F_Q[rho, J] from the spectral decomposition of rho.

    F_Q = 2 sum_{k,l} (l_k - l_l)^2 / (l_k + l_l) |<k|J|l>|^2, with pairs whose
    eigenvalue sum falls below ``SPECTRAL_CUTOFF`` skipped.
    """
    rho = as_density(state)
    if rho.dim != generator.matrix.shape[0]:
        raise ParameterError(f"dimension mismatch: {rho.dim} vs {generator.matrix.shape[0]}")
    lam = np.clip(rho.eigenvalues, 0.0, None)
    vec = rho.eigenvectors
    jkl = vec.conj().T @ generator.matrix @ vec
    return max(float(np.sum(_spectral_weights(lam) * np.abs(jkl) ** 2)), 0.0)


def qfi_pure(psi: PureState, generator: CollectiveGenerator) -> float:
    """4 Var(J) for a pure state."""
    if psi.dim != generator.matrix.shape[0]:
        raise ParameterError(f"dimension mismatch: {psi.dim} vs {generator.matrix.shape[0]}")
    a = psi.amplitudes
    ja = generator.matrix @ a
    mean = np.vdot(a, ja).real
    second = np.vdot(ja, ja).real
    return max(4.0 * float(second - mean**2), 0.0)


def qfi_matrix(state: State) -> np.ndarray:
    """The 3N x 3N symmetric form G with F_Q[rho, J(n)] = n^T G n.

    ``n`` stacks the per-qubit axes (x, y, z of qubit 1, then qubit 2, ...).
    The QFI is quadratic in the generator, and the generator is linear in the axes.
    """
    rho = as_density(state)
    n = rho.n_qubits
    lam = np.clip(rho.eigenvalues, 0.0, None)
    vec = rho.eigenvectors
    w = _spectral_weights(lam)
    blocks = np.array(
        [vec.conj().T @ (0.5 * embed(p, i, n)) @ vec for i in range(n) for p in PAULIS]
    )
    flat = blocks.reshape(3 * n, -1)
    g = np.real((flat * w.reshape(-1)) @ flat.conj().T)
    return 0.5 * (g + g.T)


def _maximize_on_sphere(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """argmax over unit n of n^T a n + 2 b^T n (a symmetric 3x3)."""
    evals, evecs = np.linalg.eigh(a)
    beta = evecs.T @ b
    if np.linalg.norm(beta) < 1e-14:
        return evecs[:, -1]
    top = evals[-1]

    def norm_sq(mu):
        return np.sum((beta / (mu - evals)) ** 2)

    # secular equation sum beta_j^2 / (mu - a_j)^2 = 1 with mu > top
    lo = top + 1e-15 * max(1.0, abs(top))
    hi = top + np.linalg.norm(beta) + 1.0
    if norm_sq(lo) < 1.0:
        # hard case: component along the top eigenvector fills the rest of the unit norm
        small = evals < top - 1e-12
        n = np.zeros(3)
        n[small] = beta[small] / (top - evals[small])
        rest = 1.0 - np.sum(n**2)
        n[~small] = 0.0
        n[np.argmax(evals)] = np.sqrt(max(rest, 0.0))
        return evecs @ n
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_sq(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    n = evecs @ (beta / (hi - evals))
    return n / np.linalg.norm(n)


def _seesaw(g: np.ndarray, start: np.ndarray, tol: float, max_sweeps: int):
    n_qubits = g.shape[0] // 3
    n = start.copy()
    value = float(n @ g @ n)
    history = [value]
    for _ in range(max_sweeps):
        for i in range(n_qubits):
            sl = slice(3 * i, 3 * i + 3)
            a = g[sl, sl]
            b = g[sl, :] @ n - a @ n[sl]
            cand = _maximize_on_sphere(a, b)
            old = n[sl].copy()
            n[sl] = cand
            new_value = float(n @ g @ n)
            if new_value < history[-1]:
                # the block maximizer is exact; this only guards against rounding
                n[sl] = old
                new_value = float(n @ g @ n)
            history.append(new_value)
        improvement = history[-1] - value
        value = history[-1]
        if improvement < tol:
            break
    return value, n, history


def optimize_axes(
    state: State,
    restarts: int = 16,
    tol: float = 1e-10,
    seed: int = 0,
    start=None,
    max_sweeps: int = 1000,
) -> QfiResult:
    """Maximize F_Q over the local rotation axes by block-coordinate (see-saw) ascent.

    Each sweep visits every qubit and replaces its axis with the exact maximizer
    of the QFI with all other axes held fixed. The all-x, all-y and all-z
    configurations are always tried, followed by ``restarts`` random ones.
    Passing ``start`` runs a single ascent from those axes only. Every start is
    perturbed by ``START_JITTER`` so that symmetric saddle points are left.
    """
    if int(restarts) != restarts or restarts < 1:
        raise ParameterError(f"restarts must be a positive integer, got {restarts!r}")
    rho = as_density(state)
    n_qubits = rho.n_qubits
    g = qfi_matrix(rho)

    rng = np.random.default_rng(seed)
    if start is not None:
        gen = collective_generator(start, n_qubits)
        starts = [np.array([a.as_array() for a in gen.axes])]
    else:
        starts = [np.tile(e, (n_qubits, 1)) for e in np.eye(3)]
        starts += list(rng.normal(size=(int(restarts), n_qubits, 3)))

    best = None
    for s in starts:
        s = s + START_JITTER * rng.normal(size=s.shape)
        s = (s / np.linalg.norm(s, axis=1, keepdims=True)).reshape(-1)
        value, n, history = _seesaw(g, s, tol, max_sweeps)
        key = (-round(value, 9), tuple(np.round(n, 12)))
        if best is None or key < best[0]:
            best = (key, value, n, history)
    _, value, n, history = best
    axes = tuple(LocalAxis.from_vector(v, normalize=True) for v in n.reshape(n_qubits, 3))
    # recompute on the normalized axes with the spectral formula itself
    value = qfi(rho, collective_generator(axes))
    return QfiResult(value, axes, tuple(history))


def producibility_bound(n_qubits: int, k: int) -> float:
    """Largest QFI reachable by a k-producible state of N qubits: s k^2 + r^2."""
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise ParameterError(f"N must be a positive integer, got {n_qubits!r}")
    if int(k) != k or not 1 <= k <= n_qubits:
        raise ParameterError(f"k must satisfy 1 <= k <= {n_qubits}, got {k!r}")
    s, r = divmod(int(n_qubits), int(k))
    return float(s * k * k + r * r)


def classify_depth(f: float, n_qubits: int) -> DepthClassification:
    """Smallest k whose producibility bound is not exceeded by ``f``."""
    table = {k: producibility_bound(n_qubits, k) for k in range(1, n_qubits + 1)}
    if not np.isfinite(f) or f < 0:
        raise ParameterError(f"Fisher information must be finite and nonnegative, got {f!r}")
    if f > n_qubits**2 + 1e-9:
        raise InconsistencyError(f"F = {f} exceeds the Heisenberg bound N^2 = {n_qubits**2}")
    depth = next(k for k, bound in table.items() if f <= bound + 1e-12 or k == n_qubits)
    return DepthClassification(depth, table)


def witness_value(state: State) -> float:
    """Projector witness 2/3 - <D_4^(2)|rho|D_4^(2)>; negative means genuine 4-partite entanglement."""
    rho = as_density(state)
    if rho.n_qubits != 4:
        raise ParameterError(f"the Dicke witness is defined for 4 qubits, got {rho.n_qubits}")
    return WITNESS_BOUND - fidelity(rho, dicke(4, 2))
