"""Constructors and samplers for the two-qutrit state families.

Randomness always comes from an explicit ``numpy.random.Generator``
(PCG64). Per-item generators are derived from a master seed with
:func:`item_rng`, so a parallel map over item indices is reproducible
regardless of worker count.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import qcore
from .errors import ParamOutOfRange

PSI_PLUS = np.zeros(9, dtype=np.complex128)
PSI_PLUS[[0, 4, 8]] = 1.0 / np.sqrt(3.0)
PSI_PLUS.setflags(write=False)

SWAP = np.zeros((9, 9))
for _i in range(3):
    for _j in range(3):
        SWAP[3 * _j + _i, 3 * _i + _j] = 1.0
SWAP.setflags(write=False)
SYM_PROJ = (np.eye(9) + SWAP) / 2.0
ANTISYM_PROJ = (np.eye(9) - SWAP) / 2.0


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def item_rng(master_seed: int, index: int, stream: int = 0, *sub: int) -> np.random.Generator:
    """Generator for item ``index`` of a run seeded by ``master_seed``.

    The counter scheme is ``SeedSequence(master_seed, spawn_key=(stream, index, *sub))``;
    distinct keys give independent streams.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(stream, index, *sub))
    return np.random.Generator(np.random.PCG64(ss))


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return np.outer(psi, psi.conj())


def random_density(rng: np.random.Generator, rank: int | None = None, dim: int = 9) -> np.ndarray:
    """``H / Tr H`` with ``H = G G^dagger`` and ``G = M + iN`` (i.i.d. standard normal).

    ``G`` is ``dim x rank``; the default square case (``rank = dim``) is the Hilbert-Schmidt
    measure, smaller ``rank`` gives the induced measure of that rank.
    """
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ParamOutOfRange(f"rank={rank} outside 1..{dim}")
    while True:
        g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
        h = g @ g.conj().T
        tr = np.trace(h).real
        if tr > 0:
            rho = h / tr
            return 0.5 * (rho + rho.conj().T)


def random_pure(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def isotropic(eta: float) -> np.ndarray:
    """``eta |psi+><psi+| + (1 - eta) I/9``."""
    if not 0.0 <= eta <= 1.0:
        raise ParamOutOfRange(f"eta={eta} outside [0, 1]")
    return eta * projector(PSI_PLUS) + (1.0 - eta) * np.eye(9) / 9.0


def isotropic_threshold() -> float:
    """Exact steering threshold ``(H_3 - 1)/2`` for qutrit isotropic states."""
    h3 = sum(Fraction(1, i) for i in range(1, 4))
    return float((h3 - 1) / 2)


def werner(p: float) -> np.ndarray:
    """``p * Pi_-/3 + (1 - p) * Pi_+/6``, the U x U-invariant qutrit family.

    ``p`` is the weight of the antisymmetric subspace; the state is
    separable iff ``p <= 1/2``.
    """
    if not 0.0 <= p <= 1.0:
        raise ParamOutOfRange(f"p={p} outside [0, 1]")
    return (p * ANTISYM_PROJ / 3.0 + (1.0 - p) * SYM_PROJ / 6.0).astype(np.complex128)


def pure_entangled(rng: np.random.Generator, min_mixedness: float = 1e-8) -> np.ndarray:
    """Random pure state whose marginal purity is below ``1 - min_mixedness``."""
    while True:
        psi = random_pure(rng, 9)
        rho = projector(psi)
        ra = qcore.partial_trace_b(rho)
        if np.trace(ra @ ra).real < 1.0 - min_mixedness:
            return rho


def product_pure(rng: np.random.Generator) -> np.ndarray:
    return projector(np.kron(random_pure(rng, 3), random_pure(rng, 3)))


def separable_mixed(rng: np.random.Generator, terms: int = 10) -> np.ndarray:
    """Convex mixture of ``terms`` product pure states with Dirichlet(1) weights."""
    if terms < 1:
        raise ParamOutOfRange("terms must be >= 1")
    w = rng.dirichlet(np.ones(terms))
    rho = np.zeros((9, 9), dtype=np.complex128)
    for wk in w:
        rho += wk * product_pure(rng)
    return rho


@dataclass(frozen=True)
class PartialEntParam:
    p: float
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ParamOutOfRange(f"p={self.p} outside [0, 1]")
        if not 0.0 <= self.theta <= np.pi / 4 + 1e-12:
            raise ParamOutOfRange(f"theta={self.theta} outside [0, pi/4]")
        if not 0.0 <= self.phi <= np.pi / 2 + 1e-12:
            raise ParamOutOfRange(f"phi={self.phi} outside [0, pi/2]")

    @property
    def coefficients(self) -> np.ndarray:
        t, f = self.theta, self.phi
        return np.array([np.cos(t) * np.sin(f), np.sin(t) * np.sin(f), np.cos(f)])


def partial_entangled_vector(theta: float, phi: float) -> np.ndarray:
    c = PartialEntParam(1.0, theta, phi).coefficients
    psi = np.zeros(9, dtype=np.complex128)
    psi[[0, 4, 8]] = c
    return psi


def partial_entangled(param: PartialEntParam) -> np.ndarray:
    """``p |psi><psi| + (1 - p) rho_A x I/3`` with ``rho_A`` Alice's marginal of ``psi``."""
    psi = projector(partial_entangled_vector(param.theta, param.phi))
    rho_a = qcore.partial_trace_b(psi)
    return param.p * psi + (1.0 - param.p) * np.kron(rho_a, np.eye(3) / 3.0)
