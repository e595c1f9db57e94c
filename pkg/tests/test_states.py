from itertools import product as iproduct
from math import sqrt

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qmetro import (
    LocalAxis,
    ParameterError,
    PureState,
    QuantumState,
    collective_generator,
    dicke,
    evolve,
    fidelity,
    ghz,
    product,
    state_factory,
)
from qmetro.states import mix

from conftest import random_axes, random_density, random_ket


def _basis_index(label):
    return int(label.replace("H", "0").replace("V", "1"), 2)


def test_dicke_4_2_amplitudes():
    psi = state_factory("dicke", 4, k=2)
    expected = {"HHVV", "HVHV", "HVVH", "VHHV", "VHVH", "VVHH"}
    nonzero = {i for i, a in enumerate(psi.amplitudes) if abs(a) > 0}
    assert nonzero == {_basis_index(s) for s in expected}
    for s in expected:
        assert psi.amplitudes[_basis_index(s)] == pytest.approx(1 / sqrt(6), abs=1e-15)


def test_dicke_zero_excitations():
    psi = dicke(3, 0)
    assert psi.amplitudes[0] == 1
    assert np.count_nonzero(psi.amplitudes) == 1


def test_product_plus():
    psi = product(4, "+")
    np.testing.assert_allclose(psi.amplitudes, np.full(16, 0.25), atol=1e-15)


def test_ghz():
    psi = ghz(4)
    assert psi.amplitudes[0] == pytest.approx(1 / sqrt(2))
    assert psi.amplitudes[-1] == pytest.approx(1 / sqrt(2))
    assert np.count_nonzero(psi.amplitudes) == 2


@pytest.mark.parametrize("kind,n,k", [("dicke", 4, 5), ("dicke", 4, -1), ("dicke", 0, 0), ("nope", 4, None)])
def test_factory_rejects_bad_parameters(kind, n, k):
    with pytest.raises(ParameterError):
        state_factory(kind, n, k=k)


@pytest.mark.parametrize("n", range(1, 7))
def test_factory_states_normalized(n):
    for psi in [ghz(n), product(n, "R")] + [dicke(n, k) for k in range(n + 1)]:
        assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_single_qubit_z_generator():
    j = collective_generator([LocalAxis.from_label("z")])
    np.testing.assert_array_equal(j.matrix, np.diag([0.5, -0.5]))


def test_all_y_spectrum_multiplicities():
    j = collective_generator("y", 4)
    evals = np.round(np.linalg.eigvalsh(j.matrix), 9)
    values, counts = np.unique(evals, return_counts=True)
    np.testing.assert_allclose(values, [-2, -1, 0, 1, 2], atol=1e-9)
    assert list(counts) == [1, 4, 6, 4, 1]


def test_mixed_axes_generator():
    j = collective_generator(["x", "z"])
    assert np.trace(j.matrix) == pytest.approx(0)
    np.testing.assert_allclose(j.matrix, j.matrix.conj().T, atol=1e-12)
    evals = np.sort(np.linalg.eigvalsh(j.matrix))
    np.testing.assert_allclose(evals, -evals[::-1], atol=1e-12)


def test_generator_rejects_non_unit_axis():
    with pytest.raises(ParameterError):
        collective_generator([[1.0, 1.0, 0.0], [0, 0, 1]])


def test_generator_linear_in_each_axis(rng):
    axes = random_axes(rng, 3)
    n_vec, m_vec = random_axes(rng, 2)
    a, b = 0.3, -1.7

    def raw(vec):
        # the operator is linear in the axis even off the unit sphere
        from qmetro.states import PAULIS, embed

        mats = [0.5 * embed(sum(c * p for c, p in zip(ax, PAULIS)), i, 3) for i, ax in enumerate(axes)]
        mats[1] = 0.5 * embed(sum(c * p for c, p in zip(vec, PAULIS)), 1, 3)
        return sum(mats)

    lhs = raw(a * n_vec + b * m_vec)
    rest = raw(np.zeros(3))
    rhs = a * (raw(n_vec) - rest) + b * (raw(m_vec) - rest) + rest
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    # and agrees with the public constructor on unit axes
    built = collective_generator([axes[0], n_vec, axes[2]])
    np.testing.assert_allclose(built.matrix, raw(n_vec), atol=1e-12)


def test_generator_eigenvalues_bounded(rng):
    for n in range(1, 6):
        j = collective_generator(random_axes(rng, n))
        evals = np.linalg.eigvalsh(j.matrix)
        assert evals.min() >= -n / 2 - 1e-12 and evals.max() <= n / 2 + 1e-12


def test_evolve_zero_is_identity():
    rho = dicke(4, 2).density()
    assert evolve(rho, collective_generator("y", 4), 0.0) is rho


def test_evolve_full_turn_matches_expm():
    rho = QuantumState(4, random_density(np.random.default_rng(3), 4))
    j = collective_generator("y", 4)
    out = evolve(rho, j, 2 * np.pi)
    u = scipy.linalg.expm(-1j * 2 * np.pi * j.matrix)
    np.testing.assert_allclose(out.matrix, u @ rho.matrix @ u.conj().T, atol=1e-10)
    np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-10)


def test_evolve_matches_expm_random(rng):
    rho = QuantumState(3, random_density(rng, 3))
    j = collective_generator(random_axes(rng, 3))
    theta = rng.uniform(-3, 3)
    u = scipy.linalg.expm(-1j * theta * j.matrix)
    np.testing.assert_allclose(evolve(rho, j, theta).matrix, u @ rho.matrix @ u.conj().T, atol=1e-10)


def test_evolve_keeps_pure_states_pure(rng):
    psi = PureState(4, random_ket(rng, 4))
    out = evolve(psi, collective_generator(random_axes(rng, 4)), 0.77)
    assert out.purity() == pytest.approx(1.0, abs=1e-10)


def test_evolve_dimension_mismatch():
    with pytest.raises(ParameterError):
        evolve(dicke(4, 2), collective_generator("y", 3), 0.1)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(0, 2**31 - 1),
    st.floats(-4, 4, allow_nan=False),
    st.floats(-4, 4, allow_nan=False),
)
def test_evolve_group_property(seed, t1, t2):
    rng = np.random.default_rng(seed)
    rho = QuantumState(3, random_density(rng, 3, rank=2))
    j = collective_generator(random_axes(rng, 3))
    twice = evolve(evolve(rho, j, t1), j, t2)
    once = evolve(rho, j, t1 + t2)
    np.testing.assert_allclose(twice.matrix, once.matrix, atol=1e-10)
    assert np.trace(once.matrix).real == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(once.eigenvalues, rho.eigenvalues, atol=1e-10)


def test_fidelity_examples():
    d = dicke(4, 2)
    assert fidelity(d.density(), d) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(QuantumState.maximally_mixed(4), d) == pytest.approx(1 / 16, abs=1e-12)
    assert fidelity(QuantumState.maximally_mixed(4), ghz(4)) == pytest.approx(1 / 16, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.13, 0.5, 1.0])
def test_fidelity_of_noisy_dicke(p):
    d = dicke(4, 2)
    rho = mix([d, QuantumState.maximally_mixed(4)], [1 - p, p])
    # direct evaluation of <D|rho|D> with explicit sums
    direct = sum(
        np.conj(d.amplitudes[i]) * rho.matrix[i, j] * d.amplitudes[j] for i, j in iproduct(range(16), range(16))
    ).real
    assert fidelity(rho, d) == pytest.approx(1 - p + p / 16, abs=1e-12)
    assert fidelity(rho, d) == pytest.approx(direct, abs=1e-12)


def test_fidelity_dimension_mismatch():
    with pytest.raises(ParameterError):
        fidelity(dicke(3, 1).density(), dicke(4, 2))


def test_quantum_state_validation():
    with pytest.raises(ParameterError):
        QuantumState(1, np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ParameterError):
        QuantumState(1, np.diag([0.7, 0.7]))
    with pytest.raises(ParameterError):
        QuantumState(1, np.diag([1.2, -0.2]))


def test_states_are_read_only():
    psi = dicke(4, 2)
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 1.0
