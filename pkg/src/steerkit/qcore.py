"""Complex-matrix kernel and two-qutrit state algebra.

States are plain ``numpy`` arrays of dtype ``complex128``; a two-qutrit
density matrix is 9x9 with the row index ``3*i + j`` for ``|i>_A |j>_B``.

Gell-Mann ordering used throughout the package (fixed, global)::

    delta[1..3]  symmetric off-diagonal      (01), (02), (12)
    delta[4..6]  antisymmetric off-diagonal  (01), (02), (12)
    delta[7]     diag(1, -1, 0)
    delta[8]     diag(1, 1, -2) / sqrt(3)

with ``delta[0] = I_3`` for the block matrix ``Phi``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidState, NearSingular, NoConvergence, NonHermitian

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


def _gell_mann() -> np.ndarray:
    g = np.zeros((9, 3, 3), dtype=np.complex128)
    g[0] = np.eye(3)
    pairs = [(0, 1), (0, 2), (1, 2)]
    for k, (i, j) in enumerate(pairs):
        g[1 + k, i, j] = g[1 + k, j, i] = 1.0
        g[4 + k, i, j] = -1j
        g[4 + k, j, i] = 1j
    g[7] = np.diag([1.0, -1.0, 0.0])
    g[8] = np.diag([1.0, 1.0, -2.0]) / np.sqrt(3.0)
    g.setflags(write=False)
    return g


GELL_MANN = _gell_mann()
"""``GELL_MANN[0]`` is the identity; ``GELL_MANN[1:]`` are the eight generators."""

HERM_BASIS = np.concatenate([GELL_MANN[:1] / np.sqrt(3.0), GELL_MANN[1:] / np.sqrt(2.0)])
"""Hilbert-Schmidt orthonormal basis of 3x3 Hermitian matrices (identity first)."""
HERM_BASIS.setflags(write=False)


def is_hermitian(h: np.ndarray, tol: float = HERM_TOL) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and np.max(np.abs(h - h.conj().T), initial=0.0) <= tol


def check_density(rho: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Validate a density matrix and return it as ``complex128``.

    Raises ``InvalidState`` on a wrong shape, non-finite entries, or a
    violated Hermiticity / trace / positivity invariant.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidState(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise InvalidState(f"expected dimension {dim}, got {rho.shape[0]}")
    if not np.all(np.isfinite(rho)):
        raise InvalidState("density matrix has non-finite entries")
    if not is_hermitian(rho):
        raise InvalidState("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise InvalidState(f"trace {np.trace(rho).real!r} differs from 1")
    if np.linalg.eigvalsh(rho)[0] < -PSD_TOL:
        raise InvalidState("density matrix is not positive semidefinite")
    return rho


def hermitian_eig(h: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of ``h``."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NonHermitian(f"matrix must be square, got shape {h.shape}")
    if np.max(np.abs(h - h.conj().T), initial=0.0) > tol:
        raise NonHermitian("matrix is not Hermitian")
    try:
        w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return w, v


def svd_real(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD ``a = o1 @ diag(s) @ o2.T`` with a reproducible sign convention.

    Singular values come back descending. Each column of ``o1`` is flipped
    so that its largest-magnitude entry is positive (first such entry on
    ties); the matching column of ``o2`` is flipped with it.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NoConvergence("non-finite entries")
    try:
        u, s, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    o2 = vt.T.copy()
    absu = np.abs(u)
    # ties within rounding resolve to the lowest index
    lead = np.argmax(absu >= absu.max(axis=0, keepdims=True) - 1e-12, axis=0)
    signs = np.sign(u[lead, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, s, o2 * signs


def inv_sqrt_psd(rho: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Hermitian ``X`` with ``X @ rho @ X = I``; raises ``NearSingular`` below ``eps``."""
    w, v = hermitian_eig(rho)
    if w[0] <= eps:
        raise NearSingular(f"minimum eigenvalue {w[0]:.3e} <= {eps:.1e}")
    return (v / np.sqrt(w)) @ v.conj().T


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def partial_trace_a(rho: np.ndarray) -> np.ndarray:
    """Trace out the first qutrit (Alice), leaving Bob's 3x3 marginal."""
    return np.einsum("ijik->jk", np.asarray(rho).reshape(3, 3, 3, 3))


def partial_trace_b(rho: np.ndarray) -> np.ndarray:
    """Trace out the second qutrit (Bob), leaving Alice's 3x3 marginal."""
    return np.einsum("ijkj->ik", np.asarray(rho).reshape(3, 3, 3, 3))


def partial_transpose_b(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(3, 3, 3, 3).transpose(0, 3, 2, 1).reshape(9, 9)


def swap_parties(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(3, 3, 3, 3).transpose(1, 0, 3, 2).reshape(9, 9)


@dataclass(frozen=True)
class BlochRep:
    """Gell-Mann decomposition of a two-qutrit state.

    ``a[i] = Tr(rho d_i x I)``, ``b[j] = Tr(rho I x d_j)`` and
    ``T[i, j] = Tr(rho d_i x d_j)`` for the eight generators.
    """

    a: np.ndarray
    b: np.ndarray
    T: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        """The 9x9 block matrix ``[[1, b^T], [a, T]]``."""
        out = np.empty((9, 9))
        out[0, 0] = 1.0
        out[0, 1:] = self.b
        out[1:, 0] = self.a
        out[1:, 1:] = self.T
        return out

    def reconstruct(self) -> np.ndarray:
        g = GELL_MANN[1:]
        eye = np.eye(3)
        rho = np.eye(9, dtype=np.complex128) / 9.0
        rho += np.einsum("i,iab,cd->acbd", self.a, g, eye).reshape(9, 9) / 6.0
        rho += np.einsum("j,cd,jab->cadb", self.b, eye, g).reshape(9, 9) / 6.0
        rho += np.einsum("ij,iab,jcd->acbd", self.T, g, g).reshape(9, 9) / 4.0
        return rho


def bloch_decompose(rho: np.ndarray) -> BlochRep:
    rho = np.asarray(rho, dtype=np.complex128)
    r = rho.reshape(3, 3, 3, 3)
    # Phi_ij = Tr(rho d_i x d_j) with d_0 = I
    phi = np.einsum("acbd,iba,jdc->ij", r, GELL_MANN, GELL_MANN).real
    return BlochRep(a=phi[1:, 0].copy(), b=phi[0, 1:].copy(), T=phi[1:, 1:].copy())


def herm_to_vec(h: np.ndarray) -> np.ndarray:
    """Real coordinates of Hermitian matrices (shape ``(..., 3, 3)``) in ``HERM_BASIS``."""
    return np.einsum("kji,...ij->...k", HERM_BASIS, h).real


def vec_to_herm(x: np.ndarray) -> np.ndarray:
    return np.einsum("...k,kij->...ij", x, HERM_BASIS)


def haar_unitary(rng: np.random.Generator, d: int = 3) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
