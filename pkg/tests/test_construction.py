import numpy as np
import pytest

from qnn_landscape.circuit import CircuitProblem, CircuitSpec, Dataset, TwoLevelGenerator, loss
from qnn_landscape.construction import (
    BreakingSpec,
    ClassicalConceptConfig,
    ExampleForm,
    SymmetricTargetSpec,
    add_label_noise,
    build_breaking,
    build_symmetric,
    canonical_example,
    classical_concept,
    combine,
    combine_problems,
    concept_state,
    hard_instance,
    linear_term,
    traceless_example_circuit,
)
from qnn_landscape.errors import ConstructionError, DimensionError
from qnn_landscape.independence import RandomModelConfig, random_traceless_observable, sample_random_qnn
from qnn_landscape.landscape import check_translation_symmetry
from qnn_landscape.numerics import I2, X, Y, Z, check_density

PI = np.pi


def qubit_circuit():
    return CircuitSpec((TwoLevelGenerator(Z),), Y)


def test_symmetric_single_qubit_hand_solution():
    out = build_symmetric(qubit_circuit(), SymmetricTargetSpec(np.zeros(1)))
    assert np.max(np.abs(out.operators[0] - X / 2)) <= 1e-12
    assert out.kappa == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(out.dataset.states[0] - (I2 + X) / 2)) <= 1e-12
    assert out.dataset.labels[0] == pytest.approx(0.0, abs=1e-12)
    pr = CircuitProblem(qubit_circuit(), out.dataset)
    for t in np.linspace(0, PI, 9):
        assert pr.loss([t]) == pytest.approx(np.sin(2 * t) ** 2, abs=1e-12)


def test_symmetric_two_parameter_translation():
    rng = np.random.default_rng(0)
    star = rng.uniform(0, PI, 2)
    out = build_symmetric(traceless_example_circuit(2), SymmetricTargetSpec(star, [[1, 0], [0, 1]]))
    pr = out.problem()
    assert pr.loss(star) <= 1e-10
    for th in rng.uniform(0, PI, (50, 2)):
        for zeta in ([0, 1], [1, 0], [1, 1]):
            assert abs(pr.loss(th + PI / 2 * np.array(zeta)) - pr.loss(th)) <= 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_symmetric_loss_closed_form(seed):
    # the loss is (kappa^2/m0) sum_k sin^2(2 eta_k.(theta - theta*)) on a Haar-random circuit
    rng = np.random.default_rng(seed)
    p = 2
    m = random_traceless_observable(8, rng)
    circuit = sample_random_qnn(RandomModelConfig(8, p, seed=seed), m)
    eta = np.array([[1, 0], [0, 1], [1, -1]])
    star = rng.uniform(0, PI, p)
    out = build_symmetric(circuit, SymmetricTargetSpec(star, eta))
    for st_ in out.dataset.states:
        check_density(st_)
    pr = CircuitProblem(circuit, out.dataset)
    for th in rng.uniform(0, PI, (10, p)):
        want = out.kappa ** 2 * np.mean(np.sin(2 * eta @ (th - star)) ** 2)
        assert abs(pr.loss(th) - want) <= 1e-9


def test_symmetric_rejects_dependent_or_traced():
    with pytest.raises(ConstructionError):
        build_symmetric(CircuitSpec((TwoLevelGenerator(Z),), Y + I2), SymmetricTargetSpec(np.zeros(1)))
    # Y tensor Y with Z generators: Phi_xi vanishes whenever some xi_l = 0
    dep = CircuitSpec((TwoLevelGenerator.pauli(Z, 0, 2), TwoLevelGenerator.pauli(Z, 1, 2)), np.kron(Y, Y))
    with pytest.raises(ConstructionError):
        build_symmetric(dep, SymmetricTargetSpec(np.zeros(2)))
    with pytest.raises(ValueError):
        SymmetricTargetSpec(np.zeros(2), [[1, 1], [-1, -1]])


def test_breaking_single_qubit_state_and_linear_term():
    spec = BreakingSpec(c=0.1, r=0.4, l0=1.0, eps=1.0)
    out = build_breaking(qubit_circuit(), np.zeros(1), spec)
    assert np.max(np.abs(out.dataset.states[0] - (I2 + Y) / 2)) <= 1e-12
    y = out.dataset.labels[0]
    assert y > 0
    for t in np.linspace(0, PI, 7):
        assert linear_term(out, [t], 1.0) == pytest.approx(-2 * y * np.cos(2 * t), abs=1e-12)


def test_breaking_linear_term_is_eps_invariant():
    circuit = traceless_example_circuit(2)
    star = np.array([0.3, 1.1])
    a = build_breaking(circuit, star, BreakingSpec(0.05, 0.4, 1.0, eps=1.0))
    b = build_breaking(circuit, star, BreakingSpec(0.05, 0.4, 1.0, eps=0.1))
    for th in np.random.default_rng(1).uniform(0, PI, (20, 2)):
        la, lb = linear_term(a, th, 0.5), linear_term(b, th, 0.5)
        assert abs(la - lb) <= 1e-9
        assert la == pytest.approx(-0.05 * np.sum(np.cos(2 * (th - star))), abs=1e-9)


def test_breaking_rejects_large_c():
    with pytest.raises(ConstructionError, match="bound"):
        build_breaking(qubit_circuit(), np.zeros(1), BreakingSpec(c=2.0, r=0.5, l0=1.0))
    with pytest.raises(ValueError):
        BreakingSpec(0.1, 0.4, 1.0, eps=0.0)


@pytest.mark.parametrize("p", [1, 2])
def test_hard_instance_gap(p):
    rng = np.random.default_rng(p)
    star = rng.uniform(0, PI, p)
    hi = hard_instance(traceless_example_circuit(p), star)
    pr = hi.problem()
    assert hi.spec.c < hi.spec.c_bound(p)
    base = pr.loss(star)
    for k in range(1, 2 ** p):
        zeta = np.array([(k >> l) & 1 for l in range(p)])
        assert pr.loss(star + PI / 2 * zeta) - base >= hi.gap_floor * (1 - 1e-3)
    assert check_translation_symmetry(pr.loss, p, 20, rng) > 0
    assert check_translation_symmetry(hi.symmetric.problem().loss, p, 20, rng) <= 1e-10


def test_combine_examples():
    circ, data, form = canonical_example("base", 2)
    s0 = Dataset(data.data[:2])
    s1 = Dataset(data.data[2:]).with_labels(data.labels[2:])
    s1 = Dataset(tuple(type(d)(d.state, d.label, 1.0) for d in s1))
    both = combine(s0, s1, 4, 1)
    th = np.array([0.4, 2.0])
    assert loss(circ, both, th) == pytest.approx(form.closed_form(th), abs=1e-12)
    assert loss(circ, combine(s0, s1, 1, 0), th) == pytest.approx(loss(circ, s0, th), abs=1e-15)
    assert loss(circ, combine(s0, s1, 4, 1), th) == pytest.approx(loss(circ, combine(s1, s0, 1, 4), th), abs=1e-15)
    with pytest.raises(DimensionError):
        combine(s0, canonical_example("base", 1)[1], 1, 1)
    with pytest.raises(ValueError):
        combine(s0, s1, 0, 0)


def test_combine_problems_matches_dense():
    form = ExampleForm("shifted", 2)
    pr = form.problem()
    half = len(pr) // 2
    from qnn_landscape.trig import PolyProblem
    a = PolyProblem(pr.polys[:half], pr.labels[:half])
    b = PolyProblem(pr.polys[half:], pr.labels[half:])
    th = np.array([0.2, 1.3])
    assert combine_problems(a, b, 4, 1).loss(th) == pytest.approx(form.closed_form(th), abs=1e-12)


def test_canonical_example_values():
    f1 = ExampleForm("base", 1)
    assert f1.closed_form(np.array([0.0])) == 0.0
    assert f1.closed_form(np.array([PI / 2])) == pytest.approx(0.5)
    f2 = ExampleForm("base", 2)
    vals = sorted(f2.closed_form(np.array(z) * PI / 2) for z in [(0, 0), (0, 1), (1, 0), (1, 1)])
    assert np.allclose(vals, [0, 0.25, 0.25, 0.5])
    g = ExampleForm("shifted", 2).problem().gradient(np.full(2, PI / 100))
    assert np.max(np.abs(g)) <= 1e-9
    with pytest.raises(ValueError):
        ExampleForm("twisted", 2)


@pytest.mark.parametrize("kind", ["base", "shifted", "coupled"])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_canonical_example_three_routes_agree(kind, p):
    circ, data, form = canonical_example(kind, p)
    dense, fast = CircuitProblem(circ, data), form.problem()
    for th in np.random.default_rng(p).uniform(0, 2 * PI, (5, p)):
        ref = form.closed_form(th)
        assert abs(dense.loss(th) - ref) <= 1e-12
        assert abs(fast.loss(th) - ref) <= 1e-12


def test_canonical_example_large_p_closed_form_only():
    circ, data, form = canonical_example("shifted", 32)
    assert circ is None and data is None
    th = np.full(32, 0.1)
    assert form.problem().loss(th) == pytest.approx(form.closed_form(th), abs=1e-12)


def test_classical_concept_examples():
    s = concept_state(np.zeros(4))
    want = np.zeros((4, 4))
    want[0, 0] = 1
    assert np.allclose(s, want)
    assert np.allclose(concept_state([PI / 2, 0.0]), np.diag([0, 1]), atol=1e-15)
    data, xs, w = classical_concept(ClassicalConceptConfig(2, w=np.array([1.0, -1, 0.5, 0]), m=30, seed=1))
    assert np.array_equal(data.labels, (xs @ w > 0).astype(float))
    for rho in data.states:
        assert abs(np.trace(rho) - 1) <= 1e-10
        assert np.linalg.matrix_rank(rho, tol=1e-10) == 1
    with pytest.raises(ValueError):
        ClassicalConceptConfig(1, w=np.zeros(2))


def test_label_noise():
    _, data, _ = canonical_example("base", 2)
    rng = np.random.default_rng(0)
    assert add_label_noise(data, 0.0, rng) is data
    noisy = add_label_noise(data, 0.1, rng)
    assert np.array_equal(noisy.states, data.states)
    assert not np.array_equal(noisy.labels, data.labels)
    with pytest.raises(ValueError):
        add_label_noise(data, -1.0, rng)


def test_label_noise_mean():
    rng = np.random.default_rng(3)
    shifts = rng.normal(0.0, 0.1, 10_000)  # the same draw add_label_noise makes
    from qnn_landscape.trig import PolyProblem, ScalarTrigPoly
    pr = PolyProblem([ScalarTrigPoly.constant(1, 0.0)] * 10_000, np.zeros(10_000))
    from qnn_landscape.construction import noisy_problem
    noisy = noisy_problem(pr, 0.1, np.random.default_rng(3))
    assert np.array_equal(noisy.labels, shifts)
    assert abs(noisy.labels.mean()) <= 4 * 0.1 / np.sqrt(10_000)
