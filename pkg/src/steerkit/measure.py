"""Alice's measurements and the assemblages they steer on Bob's side.

A measurement is a ``(3, 3, 3)`` complex array of rank-1 projectors indexed by
outcome. For spin-1 measurements ``n . S`` the outcome order is eigenvalue
``-1, 0, +1``. An assemblage is a ``(m, 3, 3, 3)`` array ``sigma[x, a]``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum

OUTCOMES = (-1, 0, 1)

_R2 = np.sqrt(2.0)
S_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.complex128) / _R2
S_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=np.complex128) / _R2
# eigenvalues of n.S are -1, 0, 1 only with S_z = diag(1, 0, -1)
S_Z = np.diag([1.0, 0.0, -1.0]).astype(np.complex128)
for _s in (S_X, S_Y, S_Z):
    _s.setflags(write=False)


def spin_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return S_X.copy(), S_Y.copy(), S_Z.copy()


@dataclass(frozen=True)
class Direction:
    theta: float
    phi: float

    @property
    def vector(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])


def measurement_from_direction(d: Direction) -> np.ndarray:
    """Eigenprojectors of ``n . S`` for eigenvalues ``-1, 0, +1`` (in that order)."""
    n = d.vector
    op = n[0] * S_X + n[1] * S_Y + n[2] * S_Z
    w, v = np.linalg.eigh(op)
    if np.min(np.diff(w)) < 1e-6:
        raise DegenerateSpectrum(f"spectrum {w} of n.S is degenerate")
    return np.einsum("ia,ja->aij", v, v.conj())


def sample_directions(rng: np.random.Generator, m: int) -> list[Direction]:
    """``m`` i.i.d. directions, uniform on the unit sphere."""
    if m < 1:
        raise ValueError("m must be >= 1")
    cos_t = rng.uniform(-1.0, 1.0, size=m)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=m)
    return [Direction(float(np.arccos(c)), float(f)) for c, f in zip(cos_t, phi)]


def random_spin_measurements(rng: np.random.Generator, m: int) -> np.ndarray:
    return np.stack([measurement_from_direction(d) for d in sample_directions(rng, m)])


def mub_bases() -> np.ndarray:
    """The four qutrit MUBs as ``(4, 3, 3)``: ``bases[k][:, j]`` is vector ``j`` of basis ``k``.

    Basis 0 is computational; basis ``k = 1, 2, 3`` has components
    ``w**((k - 1) * n**2 + j * n) / sqrt(3)`` with ``w = exp(2 pi i / 3)``.
    """
    w = np.exp(2j * np.pi / 3.0)
    out = np.zeros((4, 3, 3), dtype=np.complex128)
    out[0] = np.eye(3)
    n = np.arange(3)
    for k in range(3):
        for j in range(3):
            out[k + 1][:, j] = w ** ((k * n * n + j * n) % 3) / np.sqrt(3.0)
    return out


def mub_measurements() -> np.ndarray:
    """Projective measurements onto the four MUBs, shape ``(4, 3, 3, 3)``."""
    b = mub_bases()
    return np.einsum("kia,kja->kaij", b, b.conj())


def build_assemblage(rho: np.ndarray, measurements: np.ndarray) -> np.ndarray:
    """``sigma[x, a] = Tr_A[(M_{a|x} x I) rho]`` for every setting and outcome."""
    r = np.asarray(rho, dtype=np.complex128).reshape(3, 3, 3, 3)
    ms = np.asarray(measurements, dtype=np.complex128)
    # sigma_{jl} = sum_{ik} M_{ki} rho_{(i j),(k l)}
    sig = np.einsum("xaki,ijkl->xajl", ms, r)
    return 0.5 * (sig + np.conj(np.swapaxes(sig, -1, -2)))


def check_assemblage(sigma: np.ndarray, tol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``sigma`` is a normalised no-signalling assemblage."""
    sigma = np.asarray(sigma)
    if sigma.ndim != 4 or sigma.shape[1:] != (3, 3, 3):
        raise ValueError(f"assemblage must have shape (m, 3, 3, 3), got {sigma.shape}")
    marg = sigma.sum(axis=1)
    if np.max(np.abs(marg - marg[0])) > tol:
        raise ValueError("assemblage is signalling: Bob's marginal depends on x")
    if abs(np.trace(marg[0]).real - 1.0) > tol:
        raise ValueError("assemblage is not normalised")
    if np.min(np.linalg.eigvalsh(sigma)) < -tol:
        raise ValueError("assemblage member is not positive semidefinite")


def bob_marginal(sigma: np.ndarray) -> np.ndarray:
    return np.asarray(sigma)[0].sum(axis=0)
