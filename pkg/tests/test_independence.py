import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qnn_landscape.circuit import CircuitSpec, TwoLevelGenerator, one_layer_circuit
from qnn_landscape.errors import DimensionError, IntegrityError
from qnn_landscape.independence import (
    GramReport,
    RandomModelConfig,
    gram_report,
    independence_fraction,
    moment_study,
    random_traceless_observable,
    representative_indices,
    sample_random_qnn,
)
from qnn_landscape.numerics import I2, X, Y, Z, haar_unitary


def test_gram_one_layer_example():
    rep = gram_report(one_layer_circuit(Z, Y + I2, 2))
    assert rep.order == 8
    assert np.max(np.abs(rep.gram - 4 * np.eye(8))) <= 1e-12
    assert rep.independent
    assert rep.gershgorin_margin == pytest.approx(4.0)


def test_gram_zero_observable():
    rep = gram_report(CircuitSpec((TwoLevelGenerator(Z),), np.zeros((2, 2))))
    assert not rep.gram.any() and not rep.independent


def test_gram_single_qubit():
    rep = gram_report(CircuitSpec((TwoLevelGenerator(Z),), Y))
    assert np.allclose(rep.gram, 2 * np.eye(2)) and rep.independent


def test_gram_report_roundtrip():
    rep = gram_report(CircuitSpec((TwoLevelGenerator(Z),), Y))
    back = GramReport.from_dict(rep.to_dict())
    assert np.array_equal(back.gram, rep.gram) and back.independent == rep.independent


def test_random_model_generators_and_determinism():
    m = random_traceless_observable(8, np.random.default_rng(0))
    cfg = RandomModelConfig(8, 3, seed=5)
    c1, c2 = sample_random_qnn(cfg, m), sample_random_qnn(cfg, m)
    for g1, g2 in zip(c1.generators, c2.generators):
        h = g1.hamiltonian
        assert np.max(np.abs(h @ h - np.eye(8))) <= 1e-9
        assert np.array_equal(h, g2.hamiltonian)


def test_random_model_rejects_bad_observable():
    cfg = RandomModelConfig(4, 1)
    with pytest.raises(IntegrityError):
        sample_random_qnn(cfg, np.eye(4))
    with pytest.raises(IntegrityError):
        sample_random_qnn(cfg, np.zeros((4, 4)))
    with pytest.raises(DimensionError):
        RandomModelConfig(1, 1)


def test_independence_prevalence_small():
    m = random_traceless_observable(16, np.random.default_rng(1))
    frac, lams = independence_fraction(RandomModelConfig(16, 2, seed=2), m, 40)
    assert frac >= 0.9 and len(lams) == 40


def test_moment_study_requires_samples():
    m = random_traceless_observable(8, np.random.default_rng(0))
    with pytest.raises(ValueError):
        moment_study(RandomModelConfig(8, 2), m, 10)
    with pytest.raises(DimensionError):
        moment_study(RandomModelConfig(8, 5), m, 30)


def test_representative_indices():
    assert representative_indices(2) == [(1, 0), (2, 0), (0, 1), (0, 2), (1, 1)]
    assert representative_indices(1) == [(1,), (2,)]


def test_offdiag_variance_shrinks_with_dim():
    out = []
    for d in (8, 16):
        m = random_traceless_observable(d, np.random.default_rng(3))
        out.append(moment_study(RandomModelConfig(d, 2, seed=4), m, 200).offdiag_var)
    assert out[1] / out[0] < 1


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_gershgorin_soundness_and_basis_independence(seed):
    rng = np.random.default_rng(seed)
    m = random_traceless_observable(4, rng)
    c = sample_random_qnn(RandomModelConfig(4, 2, seed=seed), m)
    rep = gram_report(c)
    if rep.gershgorin_margin > 0:
        assert rep.lambda_min > 0
    v = haar_unitary(4, rng)
    rot = CircuitSpec(
        tuple(TwoLevelGenerator(v @ g.hamiltonian @ v.conj().T) for g in c.generators),
        v @ c.observable @ v.conj().T,
    )
    assert np.max(np.abs(gram_report(rot).gram - rep.gram)) <= 1e-8


@pytest.mark.parametrize("h,mloc", [(Z, Y + I2), (X, Z + 0.5 * I2), (Y, X + Z)])
def test_product_circuits_have_diagonal_gram(h, mloc):
    rep = gram_report(one_layer_circuit(h, mloc, 2))
    off = rep.gram - np.diag(np.diag(rep.gram))
    assert np.max(np.abs(off)) <= 1e-10
