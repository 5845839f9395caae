"""Hilbert spaces, elementary operators and density matrices.

The composite space is always ``spin (3 levels) ⊗ Fock (N levels)`` with the
spin factor first, so the composite basis index is ``spin * N + n``.
Units are ħ = 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InvalidDimensionError

SPIN_DIM = 3

ArrayLike = Union[np.ndarray, sp.spmatrix]


class LevelIndex(enum.IntEnum):
    """Internal levels of the three-level ion, in basis order."""

    G = 0
    E1 = 1
    E2 = 2


@dataclass(frozen=True)
class SpaceDims:
    fock_cutoff: int
    spin_dim: int = SPIN_DIM

    def __post_init__(self):
        if self.fock_cutoff < 2:
            raise InvalidDimensionError(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")
        if self.spin_dim < 1:
            raise InvalidDimensionError(f"spin_dim must be >= 1, got {self.spin_dim}")

    @property
    def composite_dim(self) -> int:
        return self.spin_dim * self.fock_cutoff


@dataclass(frozen=True)
class Tolerances:
    """Validation thresholds for density matrices."""

    hermiticity: float = 1e-10
    trace: float = 1e-8
    min_eigenvalue: float = -1e-8


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True, eq=False)
class Operator:
    """Square matrix tagged with the tensor-factor dimensions it acts on.

    ``data`` is either a dense ndarray or a CSR matrix. Arithmetic keeps the
    sparse/dense representation of the operands where possible.
    """

    data: ArrayLike
    dims: tuple[int, ...]

    def __post_init__(self):
        shape = self.data.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise InvalidDimensionError(f"operator must be square, got shape {shape}")
        if math.prod(self.dims) != shape[0]:
            raise InvalidDimensionError(f"dims {self.dims} do not match matrix side {shape[0]}")
        if isinstance(self.data, np.ndarray):
            self.data.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def issparse(self) -> bool:
        return sp.issparse(self.data)

    def dag(self) -> Operator:
        return Operator(_copy(self.data.conj().T), self.dims)

    def toarray(self) -> np.ndarray:
        if self.issparse:
            return self.data.toarray()
        return np.array(self.data)

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.data)

    def _check(self, other: Operator):
        if self.dims != other.dims:
            raise InvalidDimensionError(f"dimension mismatch: {self.dims} vs {other.dims}")

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(_normalize(self.data @ other.data), self.dims)
        return self.data @ other

    def __add__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(_normalize(self.data + other.data), self.dims)

    def __sub__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(_normalize(self.data - other.data), self.dims)

    def __mul__(self, scalar) -> Operator:
        return Operator(_normalize(self.data * scalar), self.dims)

    __rmul__ = __mul__

    def __neg__(self) -> Operator:
        return self * -1

    def __repr__(self):
        kind = "sparse" if self.issparse else "dense"
        return f"Operator(dims={self.dims}, {kind})"


def _normalize(data):
    if sp.issparse(data):
        return sp.csr_matrix(data)
    return np.asarray(data)


def _copy(data):
    return data.copy() if sp.issparse(data) else np.array(data)


def identity(dim: int, sparse: bool = True) -> Operator:
    data = sp.identity(dim, dtype=complex, format="csr") if sparse else np.eye(dim, dtype=complex)
    return Operator(data, (dim,))


def annihilation(fock_cutoff: int, sparse: bool = False) -> Operator:
    """Truncated bosonic lowering operator with ``a[n-1, n] = sqrt(n)``."""
    if fock_cutoff < 2:
        raise InvalidDimensionError(f"fock_cutoff must be >= 2, got {fock_cutoff}")
    diag = np.sqrt(np.arange(1, fock_cutoff, dtype=float)).astype(complex)
    data = sp.diags(diag, 1, shape=(fock_cutoff, fock_cutoff), format="csr")
    return Operator(data if sparse else data.toarray(), (fock_cutoff,))


def creation(fock_cutoff: int, sparse: bool = False) -> Operator:
    return annihilation(fock_cutoff, sparse).dag()


def number(fock_cutoff: int, sparse: bool = False) -> Operator:
    diag = np.arange(fock_cutoff, dtype=complex)
    data = sp.diags(diag, 0, format="csr")
    return Operator(data if sparse else data.toarray(), (fock_cutoff,))


def spin_transition(to: LevelIndex, frm: LevelIndex) -> Operator:
    """Matrix unit ``|to><frm|`` on the three internal levels."""
    data = np.zeros((SPIN_DIM, SPIN_DIM), dtype=complex)
    data[LevelIndex(to), LevelIndex(frm)] = 1.0
    return Operator(data, (SPIN_DIM,))


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product ``a ⊗ b``; sparse if either factor is sparse."""
    if a.issparse or b.issparse:
        data = sp.kron(a.tocsr(), b.tocsr(), format="csr")
    else:
        data = np.kron(a.data, b.data)
    return Operator(data, a.dims + b.dims)


def embed_spin(op: Operator, fock_cutoff: int) -> Operator:
    """``op ⊗ I_N`` on the composite space (sparse)."""
    return tensor(Operator(sp.csr_matrix(op.data), op.dims), identity(fock_cutoff))


def embed_fock(op: Operator) -> Operator:
    """``I_3 ⊗ op`` on the composite space (sparse)."""
    return tensor(identity(SPIN_DIM), Operator(sp.csr_matrix(op.data), op.dims))


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix on the composite ``(3, N)`` or phonon-only ``(N,)`` space."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != math.prod(self.dims):
            raise InvalidDimensionError(
                f"density matrix of shape {m.shape} inconsistent with dims {self.dims}"
            )
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def fock_cutoff(self) -> int:
        return self.dims[-1]

    @property
    def is_composite(self) -> bool:
        return len(self.dims) == 2

    def as_operator(self) -> Operator:
        return Operator(self.matrix, self.dims)

    def expect(self, op: Operator) -> complex:
        if op.dims != self.dims:
            raise InvalidDimensionError(f"dimension mismatch: {op.dims} vs {self.dims}")
        # Tr(A rho) = sum_ij A_ij rho_ji
        if op.issparse:
            return complex((op.data.multiply(self.matrix.T)).sum())
        return complex(np.sum(op.data * self.matrix.T))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


@dataclass(frozen=True)
class ValidationReport:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES)

    @property
    def hermitian(self) -> bool:
        return self.hermiticity_defect <= self.tolerances.hermiticity

    @property
    def unit_trace(self) -> bool:
        return self.trace_defect <= self.tolerances.trace

    @property
    def positive(self) -> bool:
        return self.min_eigenvalue >= self.tolerances.min_eigenvalue

    @property
    def passed(self) -> bool:
        return self.hermitian and self.unit_trace and self.positive


def validate_state(rho: DensityMatrix, tol: Tolerances = DEFAULT_TOLERANCES) -> ValidationReport:
    m = rho.matrix
    herm = float(np.max(np.abs(m - m.conj().T)))
    tr = float(abs(np.trace(m) - 1.0))
    min_eig = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    return ValidationReport(herm, tr, min_eig, tol)


def basis_state(level: LevelIndex, n: int, fock_cutoff: int) -> np.ndarray:
    """Composite ket ``|level> ⊗ |n>``."""
    if not 0 <= n < fock_cutoff:
        raise InvalidDimensionError(f"Fock index {n} outside cutoff {fock_cutoff}")
    psi = np.zeros(SPIN_DIM * fock_cutoff, dtype=complex)
    psi[int(level) * fock_cutoff + n] = 1.0
    return psi


def pure_state(psi: np.ndarray, dims: Sequence[int]) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()), tuple(dims))


def projector(level: LevelIndex, n: int, fock_cutoff: int) -> DensityMatrix:
    return pure_state(basis_state(level, n, fock_cutoff), (SPIN_DIM, fock_cutoff))


def maximally_mixed(dims: Sequence[int]) -> DensityMatrix:
    d = math.prod(dims)
    return DensityMatrix(np.eye(d, dtype=complex) / d, tuple(dims))


def phonon_diagonal(probs: Sequence[float]) -> DensityMatrix:
    """Phonon-only state diagonal in the Fock basis with the given populations."""
    p = np.asarray(probs, dtype=float)
    return DensityMatrix(np.diag(p).astype(complex), (len(p),))


def fock_state(n: int, fock_cutoff: int) -> DensityMatrix:
    p = np.zeros(fock_cutoff)
    p[n] = 1.0
    return phonon_diagonal(p)


def thermal_state(mean: float, fock_cutoff: int) -> DensityMatrix:
    """Bose-Einstein populations, truncated and renormalized."""
    n = np.arange(fock_cutoff)
    p = (mean / (1.0 + mean)) ** n / (1.0 + mean)
    return phonon_diagonal(p / p.sum())


def coherent_amplitudes(beta: complex, fock_cutoff: int) -> np.ndarray:
    """Fock amplitudes ``exp(-|b|^2/2) b^n / sqrt(n!)`` (not renormalized)."""
    amps = np.empty(fock_cutoff, dtype=complex)
    amps[0] = np.exp(-0.5 * abs(beta) ** 2)
    for k in range(1, fock_cutoff):
        amps[k] = amps[k - 1] * beta / math.sqrt(k)
    return amps


def coherent_state(beta: complex, fock_cutoff: int) -> DensityMatrix:
    return pure_state(coherent_amplitudes(beta, fock_cutoff), (fock_cutoff,))


def ground_vacuum(fock_cutoff: int) -> DensityMatrix:
    return projector(LevelIndex.G, 0, fock_cutoff)
