"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  The
``check_*`` helpers validate the invariants of the matrix kinds we pass
around (Hermitian operators, density operators, unitaries) and return a
normalized copy, raising instead of silently repairing.
"""
from functools import reduce
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DimensionError, IntegrityError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def _square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def kron(a, b) -> np.ndarray:
    """Kronecker product of two square matrices."""
    return np.kron(_square(a, "left factor"), _square(b, "right factor"))


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    if not factors:
        raise DimensionError("need at least one factor")
    return reduce(kron, factors)


def local_operator(op, site: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator at ``site`` (0-based) of an n-qubit register."""
    if not 0 <= site < n_qubits:
        raise DimensionError(f"site {site} outside register of {n_qubits} qubits")
    factors = [I2] * n_qubits
    factors[site] = _square(op)
    return kron_all(factors)


def hermiticity_residual(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def check_hermitian(a, tol: float = HERMITIAN_TOL, name: str = "operator") -> np.ndarray:
    a = _square(a, name)
    scale = max(1.0, float(np.max(np.abs(a))))
    res = hermiticity_residual(a)
    if res > tol * scale:
        raise IntegrityError(f"{name} is not Hermitian (residual {res:.3e})")
    return 0.5 * (a + dagger(a))


def check_density(rho, name: str = "state") -> np.ndarray:
    rho = check_hermitian(rho, name=name)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise IntegrityError(f"{name} has trace {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -PSD_TOL:
        raise IntegrityError(f"{name} is not PSD (lambda_min = {lam_min:.3e})")
    return rho


def check_unitary(u, tol: float = UNITARY_TOL, name: str = "unitary") -> np.ndarray:
    u = _square(u, name)
    res = float(np.max(np.abs(u @ dagger(u) - np.eye(u.shape[0]))))
    if res > tol:
        raise IntegrityError(f"{name} is not unitary (residual {res:.3e})")
    return u


def eigh(a) -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix; eigenvalues ascending."""
    a = _square(a)
    scale = max(1.0, float(np.max(np.abs(a))))
    if hermiticity_residual(a) > HERMITIAN_TOL * scale:
        raise IntegrityError("eigh requires a Hermitian input")
    return np.linalg.eigh(0.5 * (a + dagger(a)))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Sample a unitary from the Haar measure on U(dim).

    QR-decompose a complex Ginibre matrix and absorb the phases of ``diag(R)``
    into ``Q`` so the distribution does not depend on the QR sign convention.
    """
    if dim < 1:
        raise DimensionError("Haar unitary dimension must be >= 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def hermitian_basis(dim: int) -> List[np.ndarray]:
    """Orthonormal basis of the real space of dim x dim Hermitian matrices.

    Normalized generalized Gell-Mann matrices under <A, B> = tr(AB), ordered as
    identity, symmetric off-diagonals, antisymmetric off-diagonals, then the
    traceless diagonals. For dim=2 this is (I, X, Y, Z)/sqrt(2).
    """
    if dim < 2:
        raise DimensionError("hermitian_basis needs dim >= 2")
    basis = [np.eye(dim, dtype=complex) / np.sqrt(dim)]
    sym, anti = [], []
    for j in range(dim):
        for k in range(j + 1, dim):
            s = np.zeros((dim, dim), dtype=complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            sym.append(s)
            a = np.zeros((dim, dim), dtype=complex)
            a[j, k] = -1j / np.sqrt(2)
            a[k, j] = 1j / np.sqrt(2)
            anti.append(a)
    basis += sym + anti
    for l in range(1, dim):
        diag = np.zeros(dim)
        diag[:l] = 1.0
        diag[l] = -l
        basis.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return basis


def basis_matrix(dim: int) -> np.ndarray:
    """Hermitian basis stacked as a (dim**2, dim, dim) array."""
    return np.stack(hermitian_basis(dim))


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """tr(AB) for Hermitian A, B (always real)."""
    return float(np.real(np.einsum("ij,ji->", a, b)))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g + dagger(g))


def balanced_two_level(dim: int) -> np.ndarray:
    """diag(+1, ..., +1, -1, ..., -1): traceless with H^2 = I (dim must be even)."""
    if dim < 2 or dim % 2:
        raise DimensionError("balanced two-level generator needs an even dim >= 2")
    half = dim // 2
    return np.diag(np.r_[np.ones(half), -np.ones(half)]).astype(complex)
