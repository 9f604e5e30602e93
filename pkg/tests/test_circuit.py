import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qnn_landscape.circuit import (
    CircuitProblem,
    CircuitSpec,
    Dataset,
    QuantumDatum,
    TwoLevelGenerator,
    evaluate,
    gate_matrix,
    gradient,
    loss,
    one_layer_circuit,
)
from qnn_landscape.construction import canonical_example
from qnn_landscape.errors import DimensionError, IntegrityError
from qnn_landscape.numerics import I2, X, Y, Z, haar_unitary, random_hermitian

RHO_X = (I2 + X) / 2
RHO_Y = (I2 + Y) / 2
RHO_Z = (I2 + Z) / 2


def single(h=Z, m=Y + I2):
    return CircuitSpec((TwoLevelGenerator(h),), m)


def random_instance(seed, p=3, dim=4, m=3):
    rng = np.random.default_rng(seed)
    h = np.diag([1, 1, -1, -1]).astype(complex)
    gens = []
    for _ in range(p):
        w = haar_unitary(dim, rng)
        gens.append(TwoLevelGenerator(w @ h @ w.conj().T))
    obs = random_hermitian(dim, rng)
    data = []
    for _ in range(m):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = g @ g.conj().T
        data.append(QuantumDatum(rho / np.trace(rho).real, rng.normal(), rng.uniform(0.5, 2)))
    return CircuitSpec(tuple(gens), obs), Dataset(tuple(data))


def test_generator_validation():
    with pytest.raises(IntegrityError):
        TwoLevelGenerator(I2)  # not traceless
    with pytest.raises(IntegrityError):
        TwoLevelGenerator(2 * Z)  # H^2 != I


def test_gate_matrix_examples():
    g = TwoLevelGenerator(Z)
    assert np.allclose(gate_matrix(g, 0.0), I2)
    assert np.allclose(gate_matrix(g, np.pi / 2), np.diag([-1j, 1j]))
    # truncated Taylor series of exp(-i pi X / 4): eight even and eight odd powers
    a = -1j * np.pi / 4 * X
    series, term = np.zeros((2, 2), dtype=complex), np.eye(2, dtype=complex)
    for k in range(16):
        series += term
        term = term @ a / (k + 1)
    assert np.max(np.abs(gate_matrix(TwoLevelGenerator(X), np.pi / 4) - series)) <= 1e-9


def test_gate_is_pi_periodic_up_to_phase():
    g = TwoLevelGenerator(X)
    assert np.allclose(gate_matrix(g, 0.3 + np.pi), -gate_matrix(g, 0.3))


def test_evaluate_examples():
    c = single()
    assert np.isclose(evaluate(c, RHO_X, np.pi / 4), 2.0)
    for t in np.linspace(0, 3, 7):
        assert np.isclose(evaluate(c, RHO_X, [t]), 1 + np.sin(2 * t))
        assert np.isclose(evaluate(c, RHO_Z, [t]), 1.0)
    assert evaluate(c, RHO_Y, [0.0]) == pytest.approx(np.trace(RHO_Y @ (Y + I2)).real)


def test_evaluate_dimension_checks():
    c = single()
    with pytest.raises(DimensionError):
        evaluate(c, np.eye(4) / 4, [0.0])
    with pytest.raises(DimensionError):
        evaluate(c, RHO_X, [0.0, 1.0])


def test_generator_order_first_acts_first():
    # U = V_2 V_1: the X rotation acts on |0> before the Z rotation
    c = CircuitSpec((TwoLevelGenerator(X), TwoLevelGenerator(Z)), Y)
    th = np.array([0.4, 0.9])
    u = gate_matrix(c.generators[1], th[1]) @ gate_matrix(c.generators[0], th[0])
    assert np.allclose(c.unitary(th), u)
    assert not np.allclose(c.unitary(th), gate_matrix(c.generators[0], th[0]) @ gate_matrix(c.generators[1], th[1]))


def test_loss_examples():
    c = single()
    ds = Dataset((QuantumDatum(RHO_X, 2.0),))
    assert loss(c, ds, [np.pi / 4]) == pytest.approx(0.0, abs=1e-15)
    circ, data, _ = canonical_example("base", 1)
    assert loss(circ, data, [np.pi / 2]) == pytest.approx(0.5, abs=1e-12)
    assert loss(circ, data, [0.0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        loss(c, Dataset(()), [0.0])


def test_gradient_examples():
    circ, data, _ = canonical_example("base", 1)
    # d/dt of (1/2)(sin^2 2t + (cos 2t - 1)^2 / 4) at pi/4 is 1/2
    assert gradient(circ, data, [np.pi / 4])[0] == pytest.approx(0.5, abs=1e-12)
    for t in (0.0, np.pi / 2):
        assert abs(gradient(circ, data, [t])[0]) <= 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_gradient_matches_finite_differences(seed):
    c, ds = random_instance(seed)
    th = np.random.default_rng(seed + 1).uniform(0, np.pi, c.p)
    g = gradient(c, ds, th)
    h = 1e-5
    fd = np.array([(loss(c, ds, th + h * e) - loss(c, ds, th - h * e)) / (2 * h) for e in np.eye(c.p)])
    assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-3)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=2))
def test_loss_pi_periodic(seed, axis):
    c, ds = random_instance(seed)
    th = np.random.default_rng(seed).uniform(0, np.pi, c.p)
    shifted = th.copy()
    shifted[axis] += np.pi
    assert abs(loss(c, ds, th) - loss(c, ds, shifted)) <= 1e-10


def test_global_phase_invariance():
    c, ds = random_instance(3)
    th = np.array([0.2, 1.1, 2.5])
    lam = 0.37
    u = np.eye(4, dtype=complex)
    for g, t in zip(c.generators, th):
        h = g.hamiltonian + lam * np.eye(4)
        w, v = np.linalg.eigh(h)
        u = (v @ np.diag(np.exp(-1j * t * w)) @ v.conj().T) @ u
    shifted = np.array([np.trace(u @ s @ u.conj().T @ c.observable).real for s in ds.states])
    direct = np.array([evaluate(c, s, th) for s in ds.states])
    assert np.max(np.abs(shifted - direct)) <= 1e-10


def test_imaginary_residue_is_integrity_error():
    c = single(m=Y)
    bad = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    object.__setattr__(c, "observable", np.array([[0, 1j], [0, 0]], dtype=complex))
    with pytest.raises(IntegrityError):
        evaluate(c, bad, [0.0])


def test_datum_and_dataset_validation():
    with pytest.raises(ValueError):
        QuantumDatum(RHO_X, 1.0, weight=0.0)
    with pytest.raises(IntegrityError):
        QuantumDatum(np.eye(2), 1.0)
    with pytest.raises(DimensionError):
        Dataset((QuantumDatum(RHO_X, 1.0), QuantumDatum(np.eye(4) / 4, 1.0)))
    ds = Dataset((QuantumDatum(RHO_X, 1.0),)).with_labels([3.0])
    assert ds.labels[0] == 3.0


def test_circuit_problem_wraps_functions():
    c = one_layer_circuit(Z, Y + I2, 2)
    ds = Dataset((QuantumDatum(np.kron(RHO_X, RHO_Y), 1.5),))
    pr = CircuitProblem(c, ds)
    th = np.array([0.3, 0.8])
    assert pr.loss(th) == loss(c, ds, th)
    assert np.array_equal(pr.gradient(th), gradient(c, ds, th))
    assert pr.with_labels([0.0]).data.labels[0] == 0.0
