import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qmetro import (
    InconsistencyError,
    LocalAxis,
    ParameterError,
    PureState,
    QuantumState,
    classify_depth,
    collective_generator,
    dicke,
    ghz,
    optimize_axes,
    producibility_bound,
    product,
    qfi,
    qfi_pure,
    witness_value,
)
from qmetro.states import PAULIS, embed, mix

from conftest import random_axes, random_density, random_ket


def _collective_covariance(psi):
    """Covariance matrix of (Jx, Jy, Jz) computed directly from the amplitudes."""
    n = psi.n_qubits
    ops = [sum(0.5 * embed(p, i, n) for i in range(n)) for p in PAULIS]
    a = psi.amplitudes
    mean = np.array([np.vdot(a, o @ a).real for o in ops])
    cov = np.array([[np.vdot(a, 0.5 * (x @ y + y @ x) @ a).real for y in ops] for x in ops])
    return cov - np.outer(mean, mean)


def _sphere_grid(step_deg=1.0):
    theta = np.radians(np.arange(0, 180 + step_deg, step_deg))
    phi = np.radians(np.arange(0, 360, step_deg))
    t, p = np.meshgrid(theta, phi, indexing="ij")
    return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1).reshape(-1, 3)


@pytest.mark.parametrize(
    "state,axis,expected",
    [(dicke(4, 2), "y", 12.0), (dicke(4, 2), "x", 12.0), (dicke(4, 2), "z", 0.0),
     (product(4, "+"), "y", 4.0), (product(4, "+"), "x", 0.0), (ghz(4), "z", 16.0)],
)
def test_known_values(state, axis, expected):
    j = collective_generator(axis, 4)
    assert qfi(state, j) == pytest.approx(expected, abs=1e-9)
    assert qfi_pure(state, j) == pytest.approx(expected, abs=1e-9)


def test_maximally_mixed_has_zero_qfi(rng):
    rho = QuantumState.maximally_mixed(4)
    assert qfi(rho, collective_generator(random_axes(rng, 4))) == pytest.approx(0.0, abs=1e-12)


def test_pure_and_spectral_agree_on_random_states(rng):
    for n in (1, 2, 3, 4):
        for _ in range(5):
            psi = PureState(n, random_ket(rng, n))
            j = collective_generator(random_axes(rng, n))
            assert qfi(psi, j) == pytest.approx(qfi_pure(psi, j), abs=1e-9)


def test_variance_oracle_for_collective_axes(rng):
    psi = PureState(4, random_ket(rng, 4))
    cov = _collective_covariance(psi)
    for axis in random_axes(rng, 5):
        j = collective_generator([axis] * 4)
        assert qfi(psi, j) == pytest.approx(4 * axis @ cov @ axis, abs=1e-9)


def test_qfi_bounds(rng):
    for _ in range(10):
        rho = QuantumState(3, random_density(rng, 3, rank=int(rng.integers(1, 9))))
        j = collective_generator(random_axes(rng, 3))
        f = qfi(rho, j)
        assert 0 <= f <= 9 + 1e-9
        assert f <= 4 * (np.trace(rho.matrix @ j.matrix @ j.matrix) - np.trace(rho.matrix @ j.matrix) ** 2).real + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
def test_convexity(seed, w):
    rng = np.random.default_rng(seed)
    r1 = QuantumState(3, random_density(rng, 3, rank=2))
    r2 = QuantumState(3, random_density(rng, 3, rank=3))
    j = collective_generator(random_axes(rng, 3))
    mixed = mix([r1, r2], [w, 1 - w])
    assert qfi(mixed, j) <= w * qfi(r1, j) + (1 - w) * qfi(r2, j) + 1e-9


def _rotation_of(u):
    return np.array([[0.5 * np.trace(a @ u @ b @ u.conj().T).real for b in PAULIS] for a in PAULIS])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_local_unitary_covariance(seed):
    rng = np.random.default_rng(seed)
    n = 3
    rho = random_density(rng, n, rank=2)
    axes = random_axes(rng, n)
    us = []
    for _ in range(n):
        a = rng.normal(size=3)
        us.append(scipy.linalg.expm(-0.5j * sum(c * p for c, p in zip(a, PAULIS))))
    big = us[0]
    for u in us[1:]:
        big = np.kron(big, u)
    rotated_state = QuantumState(n, big @ rho @ big.conj().T)
    rotated_axes = [_rotation_of(u) @ ax for u, ax in zip(us, axes)]
    before = qfi(QuantumState(n, rho), collective_generator(axes))
    after = qfi(rotated_state, collective_generator([LocalAxis.from_vector(v, normalize=True) for v in rotated_axes]))
    assert after == pytest.approx(before, abs=1e-8)


def test_singular_state_pairs_skipped():
    # rank-2 state: the zero-eigenvalue block must not produce nan/inf
    rho = mix([dicke(4, 2), ghz(4)], [0.5, 0.5])
    f = qfi(rho, collective_generator("y", 4))
    assert np.isfinite(f) and f >= 0


def test_dimension_mismatch():
    with pytest.raises(ParameterError):
        qfi(dicke(4, 2), collective_generator("y", 3))


def test_optimize_dicke_from_each_start():
    d = dicke(4, 2)
    for start in ("x", "y", "z"):
        res = optimize_axes(d, restarts=1, start=start)
        assert res.value == pytest.approx(12.0, abs=1e-8)
        assert all(abs(a.z) < 1e-4 for a in res.axes)


def test_optimize_beats_collective_grid_search():
    rng = np.random.default_rng(11)
    psi = PureState(4, random_ket(rng, 4))
    cov = _collective_covariance(psi)
    grid = _sphere_grid(1.0)
    grid_best = float(np.max(4 * np.einsum("ia,ab,ib->i", grid, cov, grid)))
    res = optimize_axes(psi, restarts=16, seed=0)
    assert res.value >= grid_best - 1e-6
    assert res.value == pytest.approx(qfi(psi, collective_generator(res.axes)), abs=1e-12)


def test_optimize_beats_random_local_search():
    rng = np.random.default_rng(5)
    rho = QuantumState(2, random_density(rng, 2, rank=2))
    best = max(qfi(rho, collective_generator(random_axes(rng, 2))) for _ in range(3000))
    res = optimize_axes(rho, restarts=8, seed=1)
    assert res.value >= best - 1e-9


def test_optimize_history_is_monotone():
    rng = np.random.default_rng(2)
    rho = QuantumState(3, random_density(rng, 3, rank=3))
    res = optimize_axes(rho, restarts=4, seed=3)
    h = np.array(res.history)
    assert len(h) >= 1
    assert np.all(np.diff(h) >= -1e-10)


def test_optimize_is_deterministic():
    rho = mix([dicke(4, 2), QuantumState.maximally_mixed(4)], [0.8, 0.2])
    a = optimize_axes(rho, restarts=4, seed=9)
    b = optimize_axes(rho, restarts=4, seed=9)
    assert a.value == b.value
    assert [x.as_array().tolist() for x in a.axes] == [x.as_array().tolist() for x in b.axes]


def test_optimize_rejects_bad_restarts():
    with pytest.raises(ParameterError):
        optimize_axes(dicke(4, 2), restarts=0)


def test_producibility_table_n4():
    assert {k: producibility_bound(4, k) for k in range(1, 5)} == {1: 4, 2: 8, 3: 10, 4: 16}


@pytest.mark.parametrize("n", range(1, 13))
def test_producibility_properties(n):
    bounds = [producibility_bound(n, k) for k in range(1, n + 1)]
    assert bounds[0] == n and bounds[-1] == n * n
    assert all(b2 >= b1 for b1, b2 in zip(bounds, bounds[1:]))


@pytest.mark.parametrize("n,k", [(4, 0), (4, 5), (0, 1), (4, 1.5)])
def test_producibility_rejects(n, k):
    with pytest.raises(ParameterError):
        producibility_bound(n, k)


@pytest.mark.parametrize(
    "f,depth", [(0.0, 1), (4.0, 1), (4.0 + 1e-13, 1), (4.01, 2), (8.0, 2), (8.5, 3), (10.0, 3), (12.0, 4), (16.0, 4)]
)
def test_classify_depth(f, depth):
    res = classify_depth(f, 4)
    assert res.certified_depth == depth
    assert res.bounds_table == {1: 4, 2: 8, 3: 10, 4: 16}


def test_classify_depth_errors():
    with pytest.raises(InconsistencyError):
        classify_depth(17.0, 4)
    with pytest.raises(ParameterError):
        classify_depth(-1.0, 4)
    with pytest.raises(ParameterError):
        classify_depth(float("nan"), 4)


def test_witness_values():
    assert witness_value(dicke(4, 2)) == pytest.approx(2 / 3 - 1, abs=1e-12)
    assert witness_value(QuantumState.maximally_mixed(4)) == pytest.approx(2 / 3 - 1 / 16, abs=1e-12)
    assert witness_value(product(4, "H")) == pytest.approx(2 / 3, abs=1e-12)
    with pytest.raises(ParameterError):
        witness_value(dicke(3, 1))


def test_optimize_separable_reaches_n():
    res = optimize_axes(product(4, "+"), restarts=4)
    assert res.value == pytest.approx(4.0, abs=1e-6)


def test_optimize_dominates_seeded_candidates(rng):
    rho = QuantumState(3, random_density(rng, 3, rank=2))
    res = optimize_axes(rho, restarts=2, seed=4)
    for label in ("x", "y", "z"):
        assert res.value >= qfi(rho, collective_generator(label, 3)) - 1e-9


@pytest.mark.parametrize("f,depth", [(10.326, 4), (9.999, 3), (3.894, 1)])
def test_classify_quoted_values(f, depth):
    assert classify_depth(f, 4).certified_depth == depth


@pytest.mark.parametrize("n", range(1, 13))
def test_classify_bound_is_exact(n):
    for k in range(1, n + 1):
        assert classify_depth(producibility_bound(n, k), n).certified_depth == k
        if k < n:
            assert producibility_bound(n, k) < producibility_bound(n, k + 1)


def test_witness_boundary():
    d = dicke(4, 2)
    # fidelity 2/3 exactly: mix Dicke with a state orthogonal to it
    orth = product(4, "H")
    rho = mix([d, orth], [2 / 3, 1 / 3])
    assert witness_value(rho) == pytest.approx(0.0, abs=1e-12)
