import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from qnn_landscape.errors import DimensionError, IntegrityError
from qnn_landscape.numerics import (
    I2, X, Y, Z,
    basis_matrix,
    check_density,
    check_unitary,
    eigh,
    haar_unitary,
    hermitian_basis,
    hs_inner,
    kron,
    kron_all,
    local_operator,
    random_hermitian,
)


def test_kron_examples():
    assert np.array_equal(kron(Z, Z), np.diag([1, -1, -1, 1]).astype(complex))
    a = np.arange(4).reshape(2, 2) + 1j
    blk = kron(I2, a)
    assert np.array_equal(blk[:2, :2], a) and np.array_equal(blk[2:, 2:], a)
    assert not blk[:2, 2:].any()
    # entrywise sum of the diagonal, computed without np.trace
    m = kron(Y + I2, Y + I2)
    assert sum(m[i, i] for i in range(4)) == 4


def test_kron_rejects_non_square():
    with pytest.raises(DimensionError):
        kron(np.ones((2, 3)), Z)


def test_kron_associative_and_trace():
    # integer entries keep every product exact, so equality is bitwise
    rng = np.random.default_rng(1)
    a, b, c = (rng.integers(-5, 6, (2, 2)) + 1j * rng.integers(-5, 6, (2, 2)) for _ in range(3))
    assert np.array_equal(kron(kron(a, b), c), kron(a, kron(b, c)))
    assert np.isclose(np.trace(kron(a, b)), np.trace(a) * np.trace(b))


def test_local_operator_places_factor():
    assert np.array_equal(local_operator(Z, 1, 2), kron(I2, Z))
    with pytest.raises(DimensionError):
        local_operator(Z, 2, 2)


def test_haar_unitary_is_unitary_and_seeded():
    w = haar_unitary(8, np.random.default_rng(3))
    assert np.max(np.abs(w @ w.conj().T - np.eye(8))) <= 1e-10
    check_unitary(w)
    assert np.array_equal(w, haar_unitary(8, np.random.default_rng(3)))
    with pytest.raises(DimensionError):
        haar_unitary(0, np.random.default_rng(0))


def test_haar_first_moment():
    # E[W E11 W^dagger] = I/d
    rng = np.random.default_rng(7)
    d, n = 4, 2000
    acc = np.zeros((d, d), dtype=complex)
    for _ in range(n):
        w = haar_unitary(d, rng)
        acc += np.outer(w[:, 0], w[:, 0].conj())
    acc /= n
    assert np.max(np.abs(acc - np.eye(d) / d)) <= 5 / np.sqrt(n)


def test_haar_eigenphases_uniform():
    rng = np.random.default_rng(11)
    phases = np.concatenate([np.angle(np.linalg.eigvals(haar_unitary(8, rng))) for _ in range(500)])
    res = stats.kstest((phases + np.pi) / (2 * np.pi), "uniform")
    assert res.pvalue > 0.01


def test_haar_conjugation_preserves_basis_gram_spectrum():
    rng = np.random.default_rng(5)
    b = basis_matrix(4)
    w = haar_unitary(4, rng)
    rotated = w @ b @ w.conj().T
    flat = lambda ops: ops.reshape(len(ops), -1)
    sv0 = np.linalg.svd(np.real(flat(b).conj() @ flat(b).T), compute_uv=False)
    sv1 = np.linalg.svd(np.real(flat(rotated).conj() @ flat(rotated).T), compute_uv=False)
    assert np.allclose(sv0, sv1, atol=1e-8)


def test_hermitian_basis_dim2_is_paulis():
    got = hermitian_basis(2)
    want = [I2, X, Y, Z]
    for g, w in zip(got, want):
        assert np.allclose(g, w / np.sqrt(2), atol=1e-15)


def test_hermitian_basis_orthonormal_and_spanning():
    b = hermitian_basis(4)
    assert len(b) == 16
    gram = np.array([[hs_inner(x, y) for y in b] for x in b])
    assert np.max(np.abs(gram - np.eye(16))) <= 1e-12
    a = random_hermitian(4, np.random.default_rng(2))
    rebuilt = sum(hs_inner(a, x) * x for x in b)
    assert np.max(np.abs(rebuilt - a)) <= 1e-10
    with pytest.raises(DimensionError):
        hermitian_basis(1)


def test_eigh_examples():
    lam, _ = eigh(Z)
    assert np.array_equal(lam, [-1, 1])
    assert np.isclose(eigh(X / 2)[0][0], -0.5)
    a = random_hermitian(8, np.random.default_rng(4))
    lam, v = eigh(a)
    assert np.all(np.diff(lam) >= 0)
    assert np.max(np.abs(v @ np.diag(lam) @ v.conj().T - a)) <= 1e-10
    with pytest.raises(IntegrityError):
        eigh(np.array([[0, 1], [0, 0]], dtype=complex))


def test_density_checks():
    check_density((I2 + X) / 2)
    with pytest.raises(IntegrityError):
        check_density(I2)
    with pytest.raises(IntegrityError):
        check_density(np.diag([1.5, -0.5]))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=2, max_value=6))
def test_density_eigenvalues_sum_to_one(seed, dim):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    rho = check_density(rho / np.trace(rho).real)
    assert abs(eigh(rho)[0].sum() - 1) <= 1e-10


def test_kron_all_matches_pairwise():
    assert np.array_equal(kron_all([X, Y, Z]), np.kron(np.kron(X, Y), Z))
