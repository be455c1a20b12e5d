"""Lanczos approximation of exp(-i*tau*H) v for Hermitian H."""
from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal


def expm_lanczos(matvec, v, tau, tol=1e-12, m_max=48):
    """Apply ``exp(-1j * tau * H)`` to ``v`` using a Lanczos basis.

    The basis is kept orthonormal by full reorthogonalization, so the result
    has the norm of ``v`` to rounding. If ``m_max`` Krylov vectors do not
    reach ``tol`` the interval is split in halves.

    Returns the propagated vector and the number of matvecs used.
    """
    beta0 = np.linalg.norm(v)
    if beta0 == 0.0:
        return np.zeros_like(v), 0
    n = v.shape[0]
    m_cap = min(m_max, n)
    V = np.empty((m_cap + 1, n), dtype=complex)
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)
    V[0] = v / beta0
    for j in range(m_cap):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w -= alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        m = j + 1
        happy = beta[j] < 1e-13 * max(1.0, np.abs(alpha[:m]).max())
        # the error estimate is only worth computing once the space can resolve tau*|H|
        if happy or m == m_cap or (m >= 6 and m % 3 == 0):
            evals, evecs = eigh_tridiagonal(alpha[:m], beta[: m - 1])
            coef = evecs @ (np.exp(-1j * tau * evals) * evecs[0])
            if happy or beta[j] * abs(coef[-1]) < tol or m == n:
                return beta0 * (coef @ V[:m]), m
        V[j + 1] = w / beta[j]
    half, c1 = expm_lanczos(matvec, v, tau / 2, tol / 2, m_max)
    out, c2 = expm_lanczos(matvec, half, tau / 2, tol / 2, m_max)
    return out, m_cap + c1 + c2
