"""Lanczos approximation of ``exp(-i t H) v`` for Hermitian ``H``."""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal


class KrylovConvergenceError(RuntimeError):
    pass


def _expm_tridiagonal_e1(alpha, beta, t):
    """``exp(-i t T) e_1`` for the symmetric tridiagonal ``T``."""
    if len(alpha) == 1:
        return np.array([np.exp(-1j * t * alpha[0])])
    w, Q = eigh_tridiagonal(alpha, beta)
    return Q @ (np.exp(-1j * t * w) * Q[0, :])


def _lanczos_step(matvec, v, t, tol, max_dim):
    """One Krylov projection; returns (result, converged)."""
    beta0 = np.linalg.norm(v)
    if beta0 == 0.0:
        return np.zeros_like(v, dtype=complex), True
    n = v.shape[0]
    m_cap = min(max_dim, n)
    Q = np.empty((m_cap + 1, n), dtype=complex)
    Q[0] = v / beta0
    alpha, beta = [], []
    for j in range(m_cap):
        w = matvec(Q[j])
        a = np.vdot(Q[j], w).real
        w = w - a * Q[j]
        if j > 0:
            w -= beta[-1] * Q[j - 1]
        # Full reorthogonalization, done twice for stability.
        for _ in range(2):
            w -= Q[: j + 1].T @ (Q[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        alpha.append(a)
        y = _expm_tridiagonal_e1(np.array(alpha), np.array(beta), t)
        # Standard a-posteriori estimate: size of the truncated coupling.
        err = b * abs(y[-1])
        if err <= tol or b <= 1e-14 * max(1.0, abs(a)):
            return beta0 * (Q[: j + 1].T @ y), True
        beta.append(b)
        Q[j + 1] = w / b
    return beta0 * (Q[:m_cap].T @ y), False


def expm_multiply_hermitian(
    matvec: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    t: float,
    tol: float = 1e-12,
    max_dim: int = 64,
    max_splits: int = 20,
) -> np.ndarray:
    """Apply ``exp(-i t H)`` to ``v`` using only products with ``H``.

    If the Krylov space of dimension ``max_dim`` does not reach ``tol``
    (relative to ``|v|``), the interval is split in half and each half is
    restarted from the current vector, down to ``t / 2**max_splits``.
    """
    v = np.asarray(v, dtype=complex)
    scale = np.linalg.norm(v)
    if scale == 0.0:
        return np.zeros_like(v)
    pending = [(t, 0)]
    out = v
    while pending:
        dt, depth = pending.pop()
        result, ok = _lanczos_step(matvec, out, dt, tol * scale, max_dim)
        if ok:
            out = result
            continue
        if depth >= max_splits:
            raise KrylovConvergenceError(f"Lanczos did not converge for t={t}")
        pending.extend([(dt / 2, depth + 1), (dt / 2, depth + 1)])
    return out
