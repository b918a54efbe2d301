"""Primal-dual interior-point method for SDPs over products of 3x3 Hermitian cones.

Standard form::

    minimise   <c, x>        subject to  A(x) = b,  X_k >= 0
    maximise   <b, y>        subject to  Z_k = C_k - A^T(y)_k >= 0

Every block ``X_k`` is a 3x3 Hermitian matrix carried as 9 real coordinates
in :data:`steerkit.qcore.HERM_BASIS`. The operator ``A`` is supplied by a
problem object (see :class:`BlockProblem`), which also assembles the Schur
complement ``A W A^T`` for block-diagonal scalings; the solver never forms
``A`` densely. Search directions are Nesterov-Todd with a Mehrotra-style
centering heuristic.
"""
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
import scipy.linalg

from ..qcore import HERM_BASIS, herm_to_vec, vec_to_herm


class BlockProblem(Protocol):
    nblocks: int
    c: np.ndarray  # (nblocks, 9)
    b: np.ndarray  # (nrows,)

    def A(self, x: np.ndarray) -> np.ndarray: ...

    def AT(self, y: np.ndarray) -> np.ndarray: ...

    def schur(self, g: np.ndarray) -> np.ndarray: ...


@dataclass
class IpmState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    iteration: int = 0
    pobj: float = np.nan
    dobj: float = np.nan
    pinf: float = np.inf
    dinf: float = np.inf
    gap: float = np.inf


@dataclass
class IpmResult:
    state: IpmState
    status: str  # "optimal" | "stopped" | "max_iter" | "numerical"
    history: list = field(default_factory=list)


def _sym(h):
    return 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))


def _psd_sqrt_and_isqrt(h):
    w, v = np.linalg.eigh(h)
    w = np.maximum(w, 1e-300)
    sw = np.sqrt(w)
    vh = np.conj(np.swapaxes(v, -1, -2))
    return (v * sw[..., None, :]) @ vh, (v / sw[..., None, :]) @ vh


def nt_scaling(xm: np.ndarray, zm: np.ndarray) -> np.ndarray:
    """Batched NT scaling point ``W`` with ``W Z W = X``."""
    xh, _ = _psd_sqrt_and_isqrt(xm)
    mid = _sym(xh @ zm @ xh)
    _, mid_isqrt = _psd_sqrt_and_isqrt(mid)
    return _sym(xh @ mid_isqrt @ xh)


def scaling_gram(w: np.ndarray) -> np.ndarray:
    """Real 9x9 matrices of ``H -> W H W`` in the orthonormal Hermitian basis."""
    wb = np.einsum("nij,kjl->nkil", w, HERM_BASIS)
    return np.einsum("nkij,nlji->nkl", wb, wb).real


def max_step(xm: np.ndarray, dxm: np.ndarray) -> float:
    """Largest ``alpha`` keeping every ``X + alpha dX`` positive semidefinite."""
    _, xis = _psd_sqrt_and_isqrt(xm)
    with np.errstate(over="ignore", invalid="ignore"):
        m = _sym(xis @ dxm @ xis)
    if not np.all(np.isfinite(m)):
        raise np.linalg.LinAlgError("step-length matrix is not finite")
    lam = np.linalg.eigvalsh(m)[..., 0]
    lmin = float(lam.min())
    return np.inf if lmin >= 0 else -1.0 / lmin


def _solve_psd(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.T)
    try:
        cf = scipy.linalg.cho_factor(m, check_finite=False)
        return scipy.linalg.cho_solve(cf, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.lstsq(m, rhs, check_finite=False)[0]


def solve(
    problem: BlockProblem,
    x0: np.ndarray | None = None,
    tol: float = 1e-9,
    max_iter: int = 80,
    step_frac: float = 0.95,
    monitor: Callable[[IpmState], bool] | None = None,
) -> IpmResult:
    """Run the interior-point iteration.

    ``monitor`` is called after every iteration with the current state; a
    truthy return value stops the solve early with status ``"stopped"``.
    """
    nb = problem.nblocks
    n = 3 * nb
    c, b = problem.c, problem.b
    if x0 is None:
        x0 = np.tile(herm_to_vec(np.eye(3)), (nb, 1))
    x = np.array(x0, dtype=np.float64)
    y = np.zeros_like(b, dtype=np.float64)
    z = np.tile(herm_to_vec(np.eye(3)), (nb, 1))
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.linalg.norm(c)
    state = IpmState(x=x, y=y, z=z)
    history = []

    for it in range(1, max_iter + 1):
        xm, zm = vec_to_herm(x), vec_to_herm(z)
        rp = b - problem.A(x)
        rd = c - z - problem.AT(y)
        gap = float(np.sum(x * z))
        mu = gap / n
        pobj, dobj = float(np.sum(c * x)), float(b @ y)
        state.pobj, state.dobj = pobj, dobj
        state.pinf = float(np.linalg.norm(rp) / bnorm)
        state.dinf = float(np.linalg.norm(rd) / cnorm)
        state.gap = gap
        history.append((pobj, dobj, state.pinf, state.dinf, gap))
        scale = 1.0 + abs(pobj) + abs(dobj)
        if state.pinf < tol and state.dinf < tol and gap / scale < tol:
            return IpmResult(state, "optimal", history)

        try:
            w = nt_scaling(xm, zm)
            g = scaling_gram(w)
            mat = problem.schur(g)
            zinv = np.linalg.inv(zm)
        except np.linalg.LinAlgError:
            return IpmResult(state, "numerical", history)
        w_rd_w = herm_to_vec(w @ vec_to_herm(rd) @ w)

        def direction(sigma):
            rc = herm_to_vec(sigma * mu * zinv - xm)
            rhs = rp - problem.A(rc) + problem.A(w_rd_w)
            dy = _solve_psd(mat, rhs)
            dz = rd - problem.AT(dy)
            dx = rc - herm_to_vec(w @ vec_to_herm(dz) @ w)
            return dx, dy, dz

        try:
            dx, dy, dz = direction(0.0)
            ap = min(1.0, max_step(xm, vec_to_herm(dx)))
            ad = min(1.0, max_step(zm, vec_to_herm(dz)))
            mu_aff = float(np.sum((x + ap * dx) * (z + ad * dz))) / n
            sigma = min(1.0, max(0.0, mu_aff / mu) ** 3) if mu > 0 else 0.0
            dx, dy, dz = direction(sigma)
            if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
                return IpmResult(state, "numerical", history)
            ap = min(1.0, step_frac * max_step(xm, vec_to_herm(dx)))
            ad = min(1.0, step_frac * max_step(zm, vec_to_herm(dz)))
        except np.linalg.LinAlgError:
            return IpmResult(state, "numerical", history)
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz
        state.x, state.y, state.z, state.iteration = x, y, z, it
        if monitor is not None and monitor(state):
            return IpmResult(state, "stopped", history)
    return IpmResult(state, "max_iter", history)
