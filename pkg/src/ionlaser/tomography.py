"""Characteristic-function readout and Fourier reconstruction of the Wigner function.

After a carrier rotation by θ and a displacement α, the spin readout gives
``<Z> = cos θ Re χ(α) + sin θ Im χ(α)``; θ = 0 yields the real part and
θ = π/2 the imaginary part. The Wigner function follows from

    W(x, p) = 1/(2π²) ∫ d²α χ(α) exp(i√2 (p Re α - x Im α)),

which maps the vacuum ``χ = exp(-|α|²/2)`` onto ``exp(-x² - p²)/π``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import AliasingWarning, ConfigError, ProtocolWarning, TruncationWarning
from .observables import (
    CharFuncGrid,
    WignerGrid,
    _displacement_trace,
    _phonon,
    characteristic_function,
    default_axis,
    phonon_number_distribution,
)
from .quantum_core import DensityMatrix, Operator, annihilation

PROTOCOL_THETAS = (0.0, math.pi / 2)


def displacement(alpha: complex, fock_cutoff: int) -> Operator:
    """``exp(α a† - α* a)`` exponentiated on the truncated Fock basis."""
    a = annihilation(fock_cutoff).toarray()
    if abs(alpha) ** 2 >= fock_cutoff / 4:
        warnings.warn(
            f"|alpha|^2={abs(alpha) ** 2:.3g} is large for cutoff {fock_cutoff}; "
            "truncated displacement is inaccurate",
            TruncationWarning,
            stacklevel=2,
        )
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return Operator(expm(gen), (fock_cutoff,))


def measure_Z(rho_ph: DensityMatrix, alpha: complex, theta: float) -> float:
    """Expected spin readout ``cos θ Re χ(α) + sin θ Im χ(α)``."""
    if not any(math.isclose(theta, t, abs_tol=1e-12) for t in PROTOCOL_THETAS):
        warnings.warn(f"theta={theta} is not one of the protocol angles", ProtocolWarning, stacklevel=2)
    chi = complex(_displacement_trace(_phonon(rho_ph).matrix, np.array([alpha]), parity=False)[0])
    return math.cos(theta) * chi.real + math.sin(theta) * chi.imag


@dataclass(frozen=True, eq=False)
class TomographyPlan:
    alpha_re_axis: np.ndarray
    alpha_im_axis: np.ndarray
    shots: int = 0
    seed: int = 0
    thetas: tuple = PROTOCOL_THETAS
    symmetrize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha_re_axis", np.asarray(self.alpha_re_axis, float))
        object.__setattr__(self, "alpha_im_axis", np.asarray(self.alpha_im_axis, float))
        if tuple(self.thetas) != PROTOCOL_THETAS:
            raise ConfigError("thetas", "the readout protocol uses exactly (0, pi/2)")
        if self.shots < 0:
            raise ConfigError("shots", "must be >= 0")
        for name in ("alpha_re_axis", "alpha_im_axis"):
            axis = getattr(self, name)
            if axis.ndim != 1 or len(axis) < 1 or np.any(np.diff(axis) <= 0):
                raise ConfigError(name, "must be a non-empty ascending grid")
            if len(axis) > 2 and not np.allclose(np.diff(axis), axis[1] - axis[0], rtol=1e-9, atol=0):
                raise ConfigError(name, "must be uniformly spaced")

    @classmethod
    def for_mean(cls, mean_n: float, points: int = 101, **kw) -> TomographyPlan:
        """Square α-grid wide enough for the χ of a state with this ⟨n⟩."""
        radius = 1.5 * (math.sqrt(2.0 * max(mean_n, 0.0)) + 3.0)
        axis = np.linspace(-radius, radius, points)
        return cls(axis, axis, **kw)


@dataclass(frozen=True, eq=False)
class TomogramResult:
    chi_measured: CharFuncGrid
    wigner_reconstructed: WignerGrid
    shot_metadata: dict = field(default_factory=dict)


def _sample(z: np.ndarray, shots: int, seed: int, setting: int) -> np.ndarray:
    """Shot-noise estimate of each expectation; one derived stream per grid cell."""
    p = np.clip(0.5 * (1.0 + z.ravel()), 0.0, 1.0)
    est = np.empty_like(p)
    for idx, prob in enumerate(p):
        rng = np.random.default_rng([seed, setting, idx])
        est[idx] = 2.0 * rng.binomial(shots, prob) / shots - 1.0
    return est.reshape(z.shape)


def _hermitian_average(chi: np.ndarray, re_axis, im_axis) -> np.ndarray:
    if not (np.allclose(re_axis, -re_axis[::-1]) and np.allclose(im_axis, -im_axis[::-1])):
        raise ConfigError("alpha grid", "symmetrization needs grids symmetric about 0")
    return 0.5 * (chi + np.conj(chi[::-1, ::-1]))


def reconstruct_wigner(chi: CharFuncGrid, x_axis, p_axis) -> WignerGrid:
    """Discrete 2-D Fourier transform of χ onto the requested phase-space grid."""
    ar, ai = chi.alpha_re_axis, chi.alpha_im_axis
    d_re = ar[1] - ar[0] if len(ar) > 1 else 1.0
    d_im = ai[1] - ai[0] if len(ai) > 1 else 1.0
    x_axis = np.asarray(x_axis, float)
    p_axis = np.asarray(p_axis, float)
    limit = math.pi / (math.sqrt(2.0) * max(d_re, d_im))
    if max(np.abs(x_axis).max(), np.abs(p_axis).max()) > limit:
        warnings.warn(
            f"phase-space window exceeds alias-free range {limit:.3g} of the alpha grid",
            AliasingWarning,
            stacklevel=2,
        )
    s2 = math.sqrt(2.0)
    kern_p = np.exp(1j * s2 * np.outer(p_axis, ar))  # [p, re]
    kern_x = np.exp(-1j * s2 * np.outer(x_axis, ai))  # [x, im]
    w = kern_x @ chi.values.T @ kern_p.T  # [x, p]
    w = np.real(w) * d_re * d_im / (2.0 * math.pi**2)
    return WignerGrid(x_axis, p_axis, w)


def run_tomography(rho_ph: DensityMatrix, plan: TomographyPlan, x_axis=None, p_axis=None) -> TomogramResult:
    """Simulated two-setting χ measurement followed by Wigner reconstruction."""
    rho_ph = _phonon(rho_ph)
    exact = characteristic_function(rho_ph, plan.alpha_re_axis, plan.alpha_im_axis)
    th_re, th_im = plan.thetas
    z_re = math.cos(th_re) * exact.values.real + math.sin(th_re) * exact.values.imag
    z_im = math.cos(th_im) * exact.values.real + math.sin(th_im) * exact.values.imag
    if plan.shots > 0:
        z_re = _sample(z_re, plan.shots, plan.seed, 0)
        z_im = _sample(z_im, plan.shots, plan.seed, 1)
    chi = z_re + 1j * z_im
    if plan.symmetrize:
        chi = _hermitian_average(chi, plan.alpha_re_axis, plan.alpha_im_axis)
    measured = CharFuncGrid(plan.alpha_re_axis, plan.alpha_im_axis, chi, exact.accuracy_flag)
    if x_axis is None or p_axis is None:
        axis = default_axis(phonon_number_distribution(rho_ph).mean)
        x_axis = axis if x_axis is None else x_axis
        p_axis = axis if p_axis is None else p_axis
    recon = reconstruct_wigner(measured, x_axis, p_axis)
    meta = {"shots": int(plan.shots), "seed": int(plan.seed), "symmetrize": bool(plan.symmetrize)}
    return TomogramResult(measured, recon, meta)
