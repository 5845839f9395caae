"""Independent reference implementations used by the tests.

Nothing here imports the package: operators are rebuilt from np.kron and the
superoperator uses row-major vectorization, unlike the production path.
"""
import math

import numpy as np
from numpy.polynomial.hermite import hermval
from scipy.special import gammaln


def ladder(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


def ket_bra(i, j, d=3):
    m = np.zeros((d, d), complex)
    m[i, j] = 1.0
    return m


def model_ops(g_h, g_c, n):
    """Hamiltonian and collapse operators, spin factor first."""
    a = np.kron(np.eye(3), ladder(n))
    s_h = np.kron(ket_bra(0, 1), np.eye(n))
    s_c = np.kron(ket_bra(0, 2), np.eye(n))
    ad = a.conj().T
    h = g_h * (ad @ s_h.conj().T + a @ s_h) + g_c * (a @ s_c.conj().T + ad @ s_c)
    return h, s_h, s_c


def rhs(rho, g_h, g_c, gamma_h, gamma_c, n):
    """Master-equation right-hand side evaluated directly on a matrix."""
    h, s_h, s_c = model_ops(g_h, g_c, n)
    out = -1j * (h @ rho - rho @ h)
    for gamma, c in ((gamma_h, s_h), (gamma_c, s_c)):
        cd = c.conj().T
        out = out + gamma * (c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c))
    return out


def dense_superop_rowmajor(g_h, g_c, gamma_h, gamma_c, n):
    """Superoperator acting on row-major vec(ρ): vec(AρB) = (A ⊗ Bᵀ) vec(ρ)."""
    h, s_h, s_c = model_ops(g_h, g_c, n)
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for gamma, c in ((gamma_h, s_h), (gamma_c, s_c)):
        cd = c.conj().T
        cdc = cd @ c
        sup = sup + gamma * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))
    return sup


def steady_state_eig(g_h, g_c, gamma_h, gamma_c, n):
    """Null vector of the dense superoperator from a full eigendecomposition."""
    sup = dense_superop_rowmajor(g_h, g_c, gamma_h, gamma_c, n)
    w, v = np.linalg.eig(sup)
    k = int(np.argmin(np.abs(w)))
    d = 3 * n
    rho = v[:, k].reshape(d, d)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T), np.sort(np.abs(w))[:2]


def hermite_function(k, x):
    """Normalized oscillator eigenfunction ψ_k(x)."""
    c = np.zeros(k + 1)
    c[k] = 1.0
    log_norm = -0.5 * (k * math.log(2.0) + gammaln(k + 1) + 0.5 * math.log(math.pi))
    return np.exp(log_norm - 0.5 * x**2) * hermval(x, c)


def wigner_quadrature(rho, x, p, y_max=9.0, n_y=1201):
    """(1/π) ∫ ⟨x-y|ρ|x+y⟩ e^{2ipy} dy by the trapezoid rule, for a Fock-basis ρ."""
    n = rho.shape[0]
    y = np.linspace(-y_max, y_max, n_y)
    psi_minus = np.array([hermite_function(k, x - y) for k in range(n)])
    psi_plus = np.array([hermite_function(k, x + y) for k in range(n)])
    kernel = np.einsum("my,mn,ny->y", psi_minus, rho, psi_plus)
    return float(np.real(np.trapezoid(kernel * np.exp(2j * p * y), y)) / math.pi)


def thermal_probs(mean, n):
    k = np.arange(n)
    return (mean ** k) / (1.0 + mean) ** (k + 1)


def coherent_ket(beta, n):
    k = np.arange(n)
    log_amp = -0.5 * abs(beta) ** 2 - 0.5 * gammaln(k + 1)
    return np.exp(log_amp) * beta ** k


def vacuum_wigner(x, p):
    return np.exp(-x**2 - p**2) / math.pi


def coherent_wigner(x, p, beta):
    x0, p0 = math.sqrt(2) * beta.real, math.sqrt(2) * beta.imag
    return np.exp(-(x - x0) ** 2 - (p - p0) ** 2) / math.pi


def coherent_chi(alpha, beta):
    return np.exp(-0.5 * abs(alpha) ** 2 + alpha * np.conj(beta) - np.conj(alpha) * beta)
