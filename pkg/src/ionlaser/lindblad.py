"""Interaction-picture Hamiltonian and Lindblad generator of the three-level ion.

Vectorization is column-stacking, ``vec(X) = X.flatten(order="F")``, so that
``vec(A X B) = (B^T ⊗ A) vec(X)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, InvalidDimensionError
from .quantum_core import (
    LevelIndex,
    Operator,
    SpaceDims,
    annihilation,
    embed_fock,
    embed_spin,
    spin_transition,
)


@dataclass(frozen=True)
class ModelParams:
    """Couplings ``g_h = ηΩ_h``, ``g_c = ηΩ_c``, decay rates and Fock cutoff."""

    g_h: float
    g_c: float
    gamma_h: float = 1.0
    gamma_c: float = 100.0
    fock_cutoff: int = 60

    def __post_init__(self):
        for name in ("g_h", "g_c", "gamma_h", "gamma_c"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(name, f"must be finite and non-negative, got {value}")
        for name in ("gamma_h", "gamma_c"):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be strictly positive")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ConfigError("fock_cutoff", f"must be an integer >= 2, got {self.fock_cutoff}")

    @property
    def dims(self) -> SpaceDims:
        return SpaceDims(int(self.fock_cutoff))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    dims: SpaceDims
    matrix: sp.csr_matrix
    params: Optional[ModelParams] = None

    @property
    def dim(self) -> int:
        return self.dims.composite_dim

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Image of the matrix ``x`` under the generator, returned as a matrix."""
        return unvec(self.matrix @ vec(x), self.dim)


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).flatten(order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def collapse_operators(fock_cutoff: int) -> tuple[Operator, Operator]:
    """``(σ_h ⊗ I, σ_c ⊗ I)``: internal decay that leaves the phonon number alone."""
    sigma_h = spin_transition(LevelIndex.G, LevelIndex.E1)
    sigma_c = spin_transition(LevelIndex.G, LevelIndex.E2)
    return embed_spin(sigma_h, fock_cutoff), embed_spin(sigma_c, fock_cutoff)


def build_hamiltonian(params: ModelParams) -> Operator:
    """``H = g_h (a† σ_h† + a σ_h) + g_c (a σ_c† + a† σ_c)`` on the composite space."""
    n = int(params.fock_cutoff)
    a = embed_fock(annihilation(n))
    ad = a.dag()
    sh, sc = collapse_operators(n)
    heat = ad @ sh.dag()
    cool = a @ sc.dag()
    h = params.g_h * (heat + heat.dag()) + params.g_c * (cool + cool.dag())
    return h


def dissipator_action(collapse: Operator, rho) -> Operator:
    """``C ρ C† - (C†C ρ + ρ C†C)/2`` in matrix form."""
    r = rho.as_operator() if hasattr(rho, "as_operator") else rho
    if collapse.dims != r.dims:
        raise InvalidDimensionError(f"dimension mismatch: {collapse.dims} vs {r.dims}")
    c = collapse.toarray()
    cd = c.conj().T
    cdc = cd @ c
    m = r.toarray()
    out = c @ m @ cd - 0.5 * (cdc @ m + m @ cdc)
    return Operator(out, r.dims)


def _dissipator_super(c: sp.csr_matrix, ident: sp.csr_matrix) -> sp.csr_matrix:
    cdc = (c.conj().T @ c).tocsr()
    return (
        sp.kron(c.conj(), c, format="csr")
        - 0.5 * sp.kron(ident, cdc, format="csr")
        - 0.5 * sp.kron(cdc.T, ident, format="csr")
    )


def build_liouvillian(params: ModelParams) -> Liouvillian:
    """Sparse superoperator of ``-i[H, ρ] + γ_h D[σ_h]ρ + γ_c D[σ_c]ρ``.

    Built as ``-i(I⊗H - H^T⊗I) + Σ γ_k (C̄_k⊗C_k - ½ I⊗C_k†C_k - ½ (C_k†C_k)^T⊗I)``.
    """
    dims = params.dims
    d = dims.composite_dim
    ident = sp.identity(d, dtype=complex, format="csr")
    h = build_hamiltonian(params).tocsr()
    sh, sc = collapse_operators(dims.fock_cutoff)
    mat = -1j * (sp.kron(ident, h, format="csr") - sp.kron(h.T, ident, format="csr"))
    mat = mat + params.gamma_h * _dissipator_super(sh.tocsr(), ident)
    mat = mat + params.gamma_c * _dissipator_super(sc.tocsr(), ident)
    mat = sp.csr_matrix(mat)
    mat.eliminate_zeros()
    return Liouvillian(dims, mat, params)

