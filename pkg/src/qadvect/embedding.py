"""Hermitian embedding of a non-unitary step matrix and one evolution step.

With ``H = [[0, iA], [-iA^dagger, 0]]`` the evolution ``exp(-i H theta)`` maps
``[0; phi]`` (ancilla in state 1) to ``[Atilde phi; Itilde phi]`` where, for
``A = U diag(s) V^dagger``,

    Atilde = U diag(sin(s theta)) V^dagger
    Itilde = V diag(cos(s theta)) V^dagger

The top half is the successful time step, the bottom half the state left
behind when postselection on the ancilla fails.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .krylov import expm_multiply_hermitian
from .operator import SparseOperator

DENSE_LIMIT = 4096


class Backend(enum.Enum):
    DENSE = "dense"
    KRYLOV = "krylov"


def hamiltonian(A: SparseOperator) -> sp.csr_matrix:
    """The ``2N x 2N`` Hermitian generator, ancilla-major (index ``a*N + m``)."""
    M = A.matrix.astype(complex)
    return sp.bmat([[None, 1j * M], [-1j * M.conj().T, None]], format="csr")


@dataclass(frozen=True)
class StepResult:
    top: np.ndarray
    bottom: np.ndarray

    @property
    def p_success(self) -> float:
        return float(np.vdot(self.top, self.top).real)

    @property
    def p_failure(self) -> float:
        return float(np.vdot(self.bottom, self.bottom).real)


@dataclass(frozen=True)
class HermitianEmbedding:
    operator: SparseOperator
    theta: float
    backend: Backend
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.operator.n

    @property
    def singular_values(self) -> np.ndarray:
        self._require_dense()
        return self._cache["s"]

    @property
    def tilde_a(self) -> np.ndarray:
        """Dense success block ``U sin(S theta) V^dagger``."""
        self._require_dense()
        return self._cache["tilde_a"]

    @property
    def tilde_i(self) -> np.ndarray:
        """Dense failure block ``V cos(S theta) V^dagger``."""
        self._require_dense()
        return self._cache["tilde_i"]

    def _require_dense(self):
        if self.backend is not Backend.DENSE:
            raise ValueError("operation needs the dense SVD backend")

    def _hmatvec(self, y: np.ndarray) -> np.ndarray:
        n = self.n
        A, At = self._cache["A"], self._cache["At"]
        out = np.empty_like(y)
        out[:n] = 1j * (A @ y[n:])
        out[n:] = -1j * (At @ y[:n])
        return out


def embed(A: SparseOperator, theta: float = np.pi / 2, backend: Backend | str = Backend.DENSE) -> HermitianEmbedding:
    backend = Backend(backend)
    if not 0.0 < theta <= np.pi / 2 + 1e-15:
        raise ValueError(f"theta must lie in (0, pi/2], got {theta}")
    emb = HermitianEmbedding(A, float(theta), backend)
    cache = emb._cache
    if backend is Backend.DENSE:
        if A.n > DENSE_LIMIT:
            raise ValueError(f"dense backend limited to N <= {DENSE_LIMIT}, got {A.n}")
        dense = A.toarray()
        try:
            U, s, Vh = scipy.linalg.svd(dense, lapack_driver="gesdd", check_finite=True)
        except np.linalg.LinAlgError:
            try:
                U, s, Vh = scipy.linalg.svd(dense, lapack_driver="gesvd")
            except np.linalg.LinAlgError as exc:
                raise RuntimeError("SVD of the step operator failed") from exc
        # Frobenius norm bounds the spectral norm of the residual from above.
        resid = np.linalg.norm((U * s) @ Vh - dense)
        if resid > 1e-10 * max(s[0], 1e-300):
            raise RuntimeError(f"SVD reconstruction error {resid:.3g} too large")
        V = Vh.conj().T
        cache["s"] = s
        cache["tilde_a"] = (U * np.sin(s * theta)) @ Vh
        cache["tilde_i"] = (V * np.cos(s * theta)) @ Vh
    else:
        cache["A"] = A.matrix
        cache["At"] = A.matrix.conj().T.tocsr()
    if A.n <= 256:
        H = hamiltonian(A)
        if abs(H - H.conj().T).max() != 0.0:
            raise RuntimeError("embedded Hamiltonian is not Hermitian")
    return emb


def _strip_phase(x: np.ndarray, real_input: bool) -> np.ndarray:
    # exp(-iH theta) = exp([[0, A theta], [-A^T theta, 0]]) is real for real A,
    # so the raw output already carries a trivial phase; drop round-off only.
    if real_input and np.iscomplexobj(x):
        return x.real.copy()
    return x


def apply_step(emb: HermitianEmbedding, phi: np.ndarray) -> StepResult:
    phi = np.asarray(phi)
    if phi.shape != (emb.n,):
        raise ValueError(f"state has shape {phi.shape}, embedding expects ({emb.n},)")
    norm = np.linalg.norm(phi)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"input state is not normalized (|phi| = {norm!r})")
    if emb.backend is Backend.DENSE:
        return StepResult(emb.tilde_a @ phi, emb.tilde_i @ phi)
    n = emb.n
    ext = np.zeros(2 * n, dtype=complex)
    ext[n:] = phi
    out = expm_multiply_hermitian(emb._hmatvec, ext, emb.theta)
    real_input = not np.iscomplexobj(phi) and not np.iscomplexobj(emb.operator.data)
    return StepResult(_strip_phase(out[:n], real_input), _strip_phase(out[n:], real_input))


def tilde_singular_values(emb: HermitianEmbedding) -> np.ndarray:
    """Singular values of the success block, ``|sin(s_i theta)|``, descending."""
    return np.sort(np.abs(np.sin(emb.singular_values * emb.theta)))[::-1]
