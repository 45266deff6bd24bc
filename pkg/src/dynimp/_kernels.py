"""Numba kernels for the matrix-free lattice Hamiltonian.

H = diag + sum_l c_l X_l, where X_l flips the two spins of link l, i.e. maps
basis index b to b ^ mask_l.  Each output amplitude is written by exactly one
loop iteration, so results do not depend on how the loop is partitioned.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def apply_h_kernel(diag, masks, coups, psi, out):
    dim = psi.shape[0]
    n_links = masks.shape[0]
    for b in range(dim):
        acc = diag[b] * psi[b]
        for l in range(n_links):
            acc += coups[l] * psi[b ^ masks[l]]
        out[b] = acc
    return out


@njit(cache=True)
def _tridiag_expm_e1(alpha, beta, m, dt):
    """Return exp(-i T dt) e_1 for the m x m Lanczos tridiagonal T."""
    t = np.zeros((m, m))
    for k in range(m):
        t[k, k] = alpha[k]
        if k + 1 < m:
            t[k, k + 1] = beta[k]
            t[k + 1, k] = beta[k]
    lam, q = np.linalg.eigh(t)
    coef = np.empty(m, dtype=np.complex128)
    for k in range(m):
        coef[k] = np.exp(-1j * lam[k] * dt) * q[0, k]
    return q.astype(np.complex128) @ coef


@njit(cache=True)
def lanczos_expm_step(diag, masks, coups, psi, dt, m_max, tol, m_check=1):
    """One Krylov step psi -> exp(-i H dt) psi.

    Returns ``(result, error_estimate, krylov_size)``.  The error estimate is
    the a-posteriori bound beta_m |(exp(-i T dt) e_1)_m| times the input norm;
    it is evaluated from Krylov size ``m_check`` onwards.  Plain three-term
    Lanczos: for the short recurrences used here the loss of orthogonality
    stays far below the requested tolerance.
    """
    dim = psi.shape[0]
    norm0 = np.linalg.norm(psi)
    if norm0 == 0.0:
        return psi.copy(), 0.0, 0
    basis = np.empty((m_max + 1, dim), dtype=np.complex128)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    basis[0] = psi / norm0
    w = np.empty(dim, dtype=np.complex128)
    coef = np.zeros(1, dtype=np.complex128)
    err = np.inf
    size = 0
    for j in range(m_max):
        apply_h_kernel(diag, masks, coups, basis[j], w)
        a = np.vdot(basis[j], w).real
        alpha[j] = a
        if j > 0:
            bprev = beta[j - 1]
            for i in range(dim):
                w[i] -= a * basis[j, i] + bprev * basis[j - 1, i]
        else:
            for i in range(dim):
                w[i] -= a * basis[j, i]
        b = np.linalg.norm(w)
        beta[j] = b
        size = j + 1
        breakdown = b < 1e-14 * (1.0 + np.abs(a))
        if size >= m_check or breakdown or size == m_max:
            coef = _tridiag_expm_e1(alpha, beta, size, dt)
            err = 0.0 if breakdown else b * np.abs(coef[size - 1]) * norm0
            if err < tol:
                break
        if size < m_max:
            basis[j + 1] = w / b
    out = coef @ basis[:size]
    return out * norm0, err, size
