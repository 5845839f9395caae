"""Phonon statistics, phase-space distributions and second-order correlations.

Quadratures follow ``x = (a + a†)/√2``, ``p = (a - a†)/(√2 i)`` with ħ = 1, so
a phase-space point maps to the complex amplitude ``α = (x + i p)/√2`` and the
vacuum Wigner function is ``exp(-x² - p²)/π``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import poisson

from .errors import DegenerateFitError, InvalidDimensionError, UndefinedCorrelationError
from .lindblad import Liouvillian
from .quantum_core import SPIN_DIM, DensityMatrix, annihilation, embed_fock, number
from .solvers import DEFAULT_OPTIONS, SolverOptions, propagate_matrix

MEAN_FLOOR = 1e-6
GRID_POINTS = 101


@dataclass(frozen=True)
class PhononDistribution:
    probs: np.ndarray
    mean: float
    second_moment: float

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2


@dataclass(frozen=True)
class PoissonFit:
    lam: float
    tv_distance: float


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # indexed [i_x, i_p]

    @property
    def dx(self) -> float:
        return float(self.x_axis[1] - self.x_axis[0]) if len(self.x_axis) > 1 else 1.0

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0]) if len(self.p_axis) > 1 else 1.0

    def integral(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)


@dataclass(frozen=True, eq=False)
class CharFuncGrid:
    alpha_re_axis: np.ndarray
    alpha_im_axis: np.ndarray
    values: np.ndarray  # indexed [i_re, i_im]
    accuracy_flag: Optional[np.ndarray] = None


@dataclass(frozen=True)
class G2Zero:
    """Zero-delay correlation: printed intensity-fluctuation form and normally-ordered form."""

    literal: float
    normally_ordered: float
    mean: float


@dataclass(frozen=True, eq=False)
class G2Result:
    taus: np.ndarray
    g2: np.ndarray
    g2_zero: float


def _phonon(rho: DensityMatrix) -> DensityMatrix:
    return partial_trace_internal(rho) if rho.is_composite else rho


def partial_trace_internal(rho: DensityMatrix) -> DensityMatrix:
    """Trace out the three internal levels."""
    if not rho.is_composite or rho.dims[0] != SPIN_DIM:
        raise InvalidDimensionError(f"expected composite dims (3, N), got {rho.dims}")
    n = rho.dims[1]
    red = np.einsum("iaib->ab", rho.matrix.reshape(SPIN_DIM, n, SPIN_DIM, n))
    return DensityMatrix(red, (n,))


def phonon_number_distribution(rho_ph: DensityMatrix) -> PhononDistribution:
    rho_ph = _phonon(rho_ph)
    probs = np.real(np.diag(rho_ph.matrix)).copy()
    n = np.arange(len(probs))
    return PhononDistribution(probs, float(probs @ n), float(probs @ n**2))


def poisson_fit(dist: PhononDistribution, floor: float = MEAN_FLOOR) -> PoissonFit:
    """Moment-matched Poisson law and its total-variation distance to ``dist``."""
    if dist.mean < floor:
        raise DegenerateFitError(f"mean phonon number {dist.mean:.3e} below floor {floor:g}")
    n = np.arange(len(dist.probs))
    ref = poisson.pmf(n, dist.mean)
    # Poisson mass beyond the cutoff counts as mismatch too
    tail = max(0.0, 1.0 - ref.sum())
    tv = 0.5 * (np.abs(dist.probs - ref).sum() + tail)
    return PoissonFit(dist.mean, float(tv))


def _displacement_trace(rho: np.ndarray, betas, parity: bool) -> np.ndarray:
    """``Σ_mn ρ_mn s_m <n|D(β)|m>`` for every β, with ``s_m = (-1)^m`` if ``parity``.

    Uses the untruncated matrix elements
    ``<j+k|D(β)|j> = e^{ikφ} f_j^k`` and ``<j|D(β)|j+k> = (-e^{-iφ})^k f_j^k`` with
    ``f_j^k = sqrt(j!/(j+k)!) |β|^k e^{-|β|²/2} L_j^k(|β|²)``, generated by the
    normalized three-term Laguerre recurrence along each diagonal ``k``. The
    recurrence runs on a rescaled copy with a separate log-magnitude so large
    displacements neither overflow nor underflow.
    """
    n_levels = rho.shape[0]
    b = np.asarray(betas, dtype=complex).ravel()
    x = np.abs(b) ** 2
    absb = np.sqrt(x)
    phase = np.where(absb > 0, b / np.where(absb > 0, absb, 1.0), 1.0)
    with np.errstate(divide="ignore"):
        log_x = np.log(x)
    signs = np.where(np.arange(n_levels) % 2, -1.0, 1.0) if parity else np.ones(n_levels)
    total = np.zeros(b.size, dtype=complex)
    for k in range(n_levels):
        if k == 0:
            log_f0 = -0.5 * x
        else:
            log_f0 = -0.5 * x + 0.5 * k * log_x - 0.5 * math.lgamma(k + 1)
        up = phase**k
        down = (-phase.conj()) ** k
        prev = np.zeros(b.size)
        cur = np.ones(b.size)
        scale = log_f0
        for j in range(n_levels - k):
            f = cur * np.exp(scale)
            term = rho[j, j + k] * signs[j] * up
            if k:
                term = term + rho[j + k, j] * signs[j + k] * down
            total += term * f
            nxt = ((2 * j + 1 + k - x) * cur - math.sqrt(j * (j + k)) * prev) / math.sqrt((j + 1) * (j + k + 1))
            prev, cur = cur, nxt
            big = np.abs(cur) > 1e100
            if np.any(big):
                shrink = np.where(big, 1e-100, 1.0)
                cur = cur * shrink
                prev = prev * shrink
                scale = scale - np.log(shrink)
    return total.reshape(np.shape(betas))


def wigner_points(rho_ph: DensityMatrix, x, p) -> np.ndarray:
    """Wigner function at arbitrary (broadcast) phase-space points."""
    rho = _phonon(rho_ph).matrix
    x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
    beta = np.sqrt(2.0) * (x + 1j * p)  # 2α
    val = _displacement_trace(rho, beta, parity=True)
    return np.real(val) / np.pi


def default_axis(mean_n: float, points: int = GRID_POINTS) -> np.ndarray:
    radius = 1.2 * (math.sqrt(2.0 * max(mean_n, 0.0)) + 3.0)
    return np.linspace(-radius, radius, points)


def wigner(rho_ph: DensityMatrix, x_axis=None, p_axis=None) -> WignerGrid:
    """Wigner function on the tensor grid ``x_axis × p_axis``.

    Exact for the truncated state: ``W = Tr[ρ D(2α) Π]/π`` with analytic
    displacement matrix elements and parity ``Π``.
    """
    rho_ph = _phonon(rho_ph)
    if x_axis is None or p_axis is None:
        axis = default_axis(phonon_number_distribution(rho_ph).mean)
        x_axis = axis if x_axis is None else x_axis
        p_axis = axis if p_axis is None else p_axis
    x_axis = np.asarray(x_axis, float)
    p_axis = np.asarray(p_axis, float)
    xx, pp = np.meshgrid(x_axis, p_axis, indexing="ij")
    beta = np.sqrt(2.0) * (xx + 1j * pp)
    val = _displacement_trace(rho_ph.matrix, beta, parity=True) / np.pi
    return WignerGrid(x_axis, p_axis, np.real(val))


def characteristic_function(rho_ph: DensityMatrix, re_axis=None, im_axis=None) -> CharFuncGrid:
    """``χ(α) = Tr[ρ D(α)]`` on the grid ``re_axis × im_axis``.

    Cells with ``|α|² ≥ N`` are flagged: there the displaced state leaves the
    support the cutoff was chosen for.
    """
    rho_ph = _phonon(rho_ph)
    if re_axis is None or im_axis is None:
        axis = default_axis(phonon_number_distribution(rho_ph).mean)
        re_axis = axis if re_axis is None else re_axis
        im_axis = axis if im_axis is None else im_axis
    re_axis = np.asarray(re_axis, float)
    im_axis = np.asarray(im_axis, float)
    ar, ai = np.meshgrid(re_axis, im_axis, indexing="ij")
    alpha = ar + 1j * ai
    chi = _displacement_trace(rho_ph.matrix, alpha, parity=False)
    flag = np.abs(alpha) ** 2 >= rho_ph.fock_cutoff
    return CharFuncGrid(re_axis, im_axis, chi, flag)


def radial_profile(grid: WignerGrid, n_bins: Optional[int] = None):
    """Azimuthal average of a Wigner grid in radial bins of one grid step.

    Returns ``(bin_centers, mean_values)``; empty bins are dropped.
    """
    xx, pp = np.meshgrid(grid.x_axis, grid.p_axis, indexing="ij")
    r = np.hypot(xx, pp).ravel()
    step = min(abs(grid.dx), abs(grid.dp))
    r_max = min(np.abs(grid.x_axis).max(), np.abs(grid.p_axis).max())
    if n_bins is None:
        n_bins = max(2, int(r_max / step))
    edges = np.linspace(0.0, r_max, n_bins + 1)
    idx = np.digitize(r, edges) - 1
    vals = grid.values.ravel()
    centers, means = [], []
    for b in range(n_bins):
        sel = idx == b
        if np.any(sel):
            centers.append(float(r[sel].mean()))
            means.append(float(vals[sel].mean()))
    return np.array(centers), np.array(means)


def has_ring(grid: WignerGrid) -> bool:
    """Radial profile peaks away from the origin and has a local minimum there."""
    _, prof = radial_profile(grid)
    return len(prof) > 2 and int(np.argmax(prof)) > 0 and prof[0] < prof[1]


def azimuthal_asymmetry(rho_ph: DensityMatrix, r_max: float, n_radii: int = 40, n_angles: int = 64) -> float:
    """RMS deviation of W on circles from its circle average, relative to max |W|."""
    radii = np.linspace(0.0, r_max, n_radii)
    theta = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    rr, tt = np.meshgrid(radii, theta, indexing="ij")
    w = wigner_points(rho_ph, rr * np.cos(tt), rr * np.sin(tt))
    dev = w - w.mean(axis=1, keepdims=True)
    return float(np.sqrt(np.mean(dev**2)) / np.max(np.abs(w)))


def g2_zero(rho_ph: DensityMatrix, floor: float = MEAN_FLOOR) -> G2Zero:
    """Zero-delay g2 in both forms.

    ``literal = (<n²> - <n>²)/<n>²`` and ``normally_ordered = (<n²> - <n>)/<n>²``.
    """
    dist = phonon_number_distribution(rho_ph)
    m = dist.mean
    if m <= floor:
        raise UndefinedCorrelationError(f"mean phonon number {m:.3e} at or below floor {floor:g}")
    m2 = dist.second_moment
    return G2Zero((m2 - m * m) / (m * m), (m2 - m) / (m * m), m)


def g2_tau(
    rho_ss: DensityMatrix,
    L: Liouvillian,
    taus: Sequence[float],
    floor: float = MEAN_FLOOR,
    opts: SolverOptions = DEFAULT_OPTIONS,
    gamma_h: Optional[float] = None,
) -> G2Result:
    """Stationary ``g2(τ)`` via the quantum regression theorem.

    ``taus`` are in units of ``1/γ_h``. The propagated operator is ``a ρ a†`` and
    the normalization uses the steady-state ``<n>`` at both times.
    """
    if not rho_ss.is_composite:
        raise InvalidDimensionError("g2_tau needs the composite steady state")
    n = rho_ss.fock_cutoff
    a = embed_fock(annihilation(n)).toarray()
    num = embed_fock(number(n)).toarray()
    mean = float(np.real(np.sum(num * rho_ss.matrix.T)))
    if mean <= floor:
        raise UndefinedCorrelationError(f"mean phonon number {mean:.3e} at or below floor {floor:g}")
    if gamma_h is None:
        gamma_h = L.params.gamma_h if L.params is not None else 1.0
    taus = np.asarray(taus, float)
    x0 = a @ rho_ss.matrix @ a.conj().T
    xs = propagate_matrix(L, x0, taus / gamma_h, opts)
    g2 = np.array([np.real(np.sum(num * x.toarray().T)) for x in xs]) / mean**2
    dist = phonon_number_distribution(rho_ss)
    g0 = (dist.second_moment - dist.mean) / dist.mean**2
    return G2Result(taus, g2, float(g0))
