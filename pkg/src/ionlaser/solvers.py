"""Steady-state solver, master-equation integrator and operator propagation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (
    AmbiguityError,
    ConvergenceError,
    InvalidDimensionError,
    StateValidationError,
    StiffnessError,
)
from .lindblad import Liouvillian, unvec, vec
from .quantum_core import (
    SPIN_DIM,
    DensityMatrix,
    Operator,
    ground_vacuum,
    maximally_mixed,
)

log = logging.getLogger(__name__)

LEAK_FRACTION = 0.02
LEAK_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SolverOptions:
    residual_tol: float = 1e-9
    ambiguity_tol: float = 1e-6
    clip_tol: float = 1e-8
    rtol: float = 1e-8
    atol: float = 1e-10
    fallback_horizon: float = 2000.0
    leak_levels: Optional[int] = None
    method: str = "DOP853"


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    rho_ss: DensityMatrix
    residual: float
    null_dim_check: bool
    leak: float
    method: str = "direct"


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: Optional[list] = None
    expect: dict = field(default_factory=dict)
    trace_defects: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def max_trace_defect(self) -> float:
        return float(np.max(self.trace_defects)) if len(self.trace_defects) else 0.0


def default_leak_levels(fock_cutoff: int) -> int:
    return max(1, math.ceil(LEAK_FRACTION * fock_cutoff - 1e-12))


def truncation_leak(rho: DensityMatrix, k: int) -> float:
    """Population in the top ``k`` Fock levels, summed over the internal levels."""
    n = rho.fock_cutoff
    if not 0 < k < n:
        raise InvalidDimensionError(f"leak window k={k} must satisfy 0 < k < {n}")
    diag = np.real(np.diag(rho.matrix)).reshape(-1, n)
    return float(np.clip(diag[:, n - k:].sum(), 0.0, 1.0))


def _trace_row(d: int) -> np.ndarray:
    row = np.zeros(d * d)
    row[:: d + 1] = 1.0
    return row


def _bordered_solve(lmat: sp.csr_matrix, d: int, row: int) -> np.ndarray:
    # replace one equation of L v = 0 by Tr(unvec(v)) = 1
    size = d * d
    keep = np.ones(size)
    keep[row] = 0.0
    trace = sp.csr_matrix((np.ones(d), (np.full(d, row), np.arange(d) * (d + 1))), shape=(size, size))
    system = (sp.diags(keep) @ lmat + trace).tocsc()
    rhs = np.zeros(size, dtype=complex)
    rhs[row] = 1.0
    lu = spla.splu(system)
    return lu.solve(rhs)


def _residual(lmat: sp.csr_matrix, v: np.ndarray) -> float:
    return float(np.linalg.norm(lmat @ v) / np.linalg.norm(v))


def finalize_state(rho: np.ndarray, dims: tuple, clip_tol: float) -> DensityMatrix:
    """Hermitize, clip benign negative eigenvalues and renormalize."""
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    w, v = np.linalg.eigh(rho)
    if w[0] < -clip_tol:
        raise StateValidationError(f"steady state has eigenvalue {w[0]:.3e} below -{clip_tol:g}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        rho = (v * w) @ v.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
    return DensityMatrix(rho, dims)


def steady_state(L: Liouvillian, opts: SolverOptions = DEFAULT_OPTIONS) -> SteadyStateResult:
    """Unique zero-eigenvalue state of ``L``.

    Primary path is a sparse LU solve of ``L v = 0`` with one row replaced by the
    trace functional. A second solve with a different replaced row serves as the
    uniqueness probe. If factorization fails, the state is obtained by long-time
    integration from two different initial states instead.
    """
    d = L.dim
    dims = (SPIN_DIM, L.dims.fock_cutoff)
    lmat = L.matrix
    method = "direct"
    try:
        v1 = _bordered_solve(lmat, d, 0)
        v2 = _bordered_solve(lmat, d, (d - 1) * (d + 1))
        if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
            raise RuntimeError("non-finite solution")
    except RuntimeError as exc:
        log.info("direct steady-state solve failed (%s); integrating instead", exc)
        method = "integration"
        horizon = [0.0, opts.fallback_horizon]
        v1 = _integrate(lmat, vec(ground_vacuum(L.dims.fock_cutoff).matrix), horizon, opts)[-1]
        v2 = _integrate(lmat, vec(maximally_mixed(dims).matrix), horizon, opts)[-1]

    r1 = unvec(v1, d)
    r2 = unvec(v2, d)
    r1 = r1 / np.trace(r1)
    r2 = r2 / np.trace(r2)
    residual = _residual(lmat, vec(r1))
    # integration cannot beat its own local error control
    tol = opts.residual_tol if method == "direct" else max(opts.residual_tol, 10 * opts.rtol)
    if residual > tol or not math.isfinite(residual):
        raise ConvergenceError(f"steady state not reached by {method} solve", residual)
    spread = float(np.max(np.abs(r1 - r2)))
    if spread > opts.ambiguity_tol:
        raise AmbiguityError(
            f"independent {method} solves disagree by {spread:.3e}; null space looks degenerate"
        )
    rho = finalize_state(r1, dims, opts.clip_tol)
    k = opts.leak_levels or default_leak_levels(L.dims.fock_cutoff)
    return SteadyStateResult(rho, residual, True, truncation_leak(rho, k), method)


def _check_times(times: Sequence[float]) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("times must be non-negative and strictly ascending")
    return t


def _rk4_fixed(lmat, y0, times, max_steps=2_000_000):
    # classical RK4, stride well inside the stability region of the generator
    norm = spla.norm(lmat, 1)
    h_max = 1.0 / max(norm, 1e-300)
    out = [y0]
    y = y0.copy()
    steps = 0
    for t0, t1 in zip(times[:-1], times[1:]):
        n_sub = max(1, math.ceil((t1 - t0) / h_max))
        steps += n_sub
        if steps > max_steps:
            raise StiffnessError(f"fixed-stride fallback needs more than {max_steps} steps")
        h = (t1 - t0) / n_sub
        for _ in range(n_sub):
            k1 = lmat @ y
            k2 = lmat @ (y + 0.5 * h * k1)
            k3 = lmat @ (y + 0.5 * h * k2)
            k4 = lmat @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise StiffnessError("fixed-stride fallback produced non-finite values")
        out.append(y.copy())
    return np.array(out)


def _integrate(lmat, y0: np.ndarray, times: Sequence[float], opts: SolverOptions) -> np.ndarray:
    """Values of ``exp(L (t - t0)) y0`` at each requested time (rows)."""
    t = _check_times(times)
    y0 = np.asarray(y0, dtype=complex)
    if len(t) == 1:
        return y0[None, :].copy()
    sol = solve_ivp(
        lambda _t, y: lmat @ y,
        (t[0], t[-1]),
        y0,
        method=opts.method,
        t_eval=t,
        rtol=opts.rtol,
        atol=opts.atol,
    )
    if sol.success and sol.y.shape[1] == len(t) and np.all(np.isfinite(sol.y)):
        return sol.y.T
    log.warning("adaptive integration failed (%s); using fixed-stride RK4", sol.message)
    return _rk4_fixed(lmat, y0, t)


def evolve(
    L: Liouvillian,
    rho0: DensityMatrix,
    times: Sequence[float],
    opts: SolverOptions = DEFAULT_OPTIONS,
    e_ops: Optional[Mapping[str, Operator]] = None,
    store_states: bool = True,
) -> Trajectory:
    """Integrate the master equation from ``rho0`` (given at ``times[0]``)."""
    d = L.dim
    if rho0.dim != d:
        raise InvalidDimensionError(f"initial state dim {rho0.dim} != Liouvillian dim {d}")
    ys = _integrate(L.matrix, vec(rho0.matrix), times, opts)
    e_ops = dict(e_ops or {})
    mats = [unvec(y, d) for y in ys]
    expect = {
        name: np.array([np.real(np.sum(op.toarray() * m.T)) for m in mats]) for name, op in e_ops.items()
    }
    defects = np.array([abs(np.trace(m) - 1.0) for m in mats])
    states = [DensityMatrix(m, rho0.dims) for m in mats] if store_states else None
    return Trajectory(np.asarray(times, dtype=float), states, expect, defects)


def propagate_matrix(
    L: Liouvillian,
    x0,
    taus: Sequence[float],
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> list[Operator]:
    """``unvec(exp(L τ) vec(X0))`` for each delay; no trace normalization."""
    d = L.dim
    m0 = x0.toarray() if isinstance(x0, Operator) else np.asarray(x0, dtype=complex)
    if m0.shape != (d, d):
        raise InvalidDimensionError(f"operator shape {m0.shape} != ({d}, {d})")
    t = _check_times(taus)
    grid = t if t[0] == 0 else np.concatenate([[0.0], t])
    ys = _integrate(L.matrix, vec(m0), grid, opts)
    if grid is not t:
        ys = ys[1:]
    dims = (SPIN_DIM, L.dims.fock_cutoff)
    return [Operator(unvec(y, d).copy(), dims) for y in ys]
