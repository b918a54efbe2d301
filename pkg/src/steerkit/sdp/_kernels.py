"""Hot loops of the block-SDP solver.

``marginal_gram`` accumulates, for every pair of row blocks ``(p, q)``, the
sum of the per-strategy 9x9 scaling matrices over the strategies that hit
both rows. It dominates an interior-point iteration for m >= 5. The numba
version loops once over strategies; the numpy version turns the one-hot
incidence into a pair-incidence matrix and does a single GEMM.
"""
import numpy as np

from .._accel import HAVE_NUMBA, njit


@njit(cache=True)
def _marginal_gram_nb(rows, g, nrow):
    nlam, m = rows.shape
    out = np.zeros((nrow, 9, nrow, 9))
    for lam in range(nlam):
        for x in range(m):
            p = rows[lam, x]
            for y in range(m):
                q = rows[lam, y]
                for k in range(9):
                    for l in range(9):
                        out[p, k, q, l] += g[lam, k, l]
    return out


def _pair_incidence(rows: np.ndarray, nrow: int) -> np.ndarray:
    nlam, m = rows.shape
    pairs = (rows[:, :, None] * nrow + rows[:, None, :]).reshape(nlam, m * m)
    inc = np.zeros((nlam, nrow * nrow))
    np.put_along_axis(inc, pairs, 1.0, axis=1)
    return inc


_PAIR_CACHE: dict = {}


def _marginal_gram_np(rows, g, nrow):
    key = (rows.shape, nrow, rows.tobytes())
    inc = _PAIR_CACHE.get(key)
    if inc is None:
        inc = _pair_incidence(rows, nrow)
        if len(_PAIR_CACHE) > 16:
            _PAIR_CACHE.clear()
        _PAIR_CACHE[key] = inc
    acc = inc.T @ g.reshape(g.shape[0], 81)
    return acc.reshape(nrow, nrow, 9, 9).transpose(0, 2, 1, 3).copy()


def marginal_gram(rows: np.ndarray, g: np.ndarray, nrow: int, use_numba: bool | None = None) -> np.ndarray:
    """``out[p, :, q, :] = sum over lam with p, q in rows[lam] of g[lam]``.

    ``rows[lam, x]`` is the row block strategy ``lam`` activates for setting
    ``x``. Returns shape ``(nrow, 9, nrow, 9)``.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if use_numba:
        return _marginal_gram_nb(rows, g, nrow)
    return _marginal_gram_np(rows, g, nrow)


@njit(cache=True)
def _scatter_rows_nb(rows, x, nrow):
    nlam, m = rows.shape
    out = np.zeros((nrow, x.shape[1]))
    for lam in range(nlam):
        for j in range(m):
            out[rows[lam, j]] += x[lam]
    return out


def scatter_rows(rows: np.ndarray, x: np.ndarray, nrow: int, use_numba: bool | None = None) -> np.ndarray:
    """``out[p] = sum over lam hitting p of x[lam]`` (the adjoint of :func:`gather_rows`)."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _scatter_rows_nb(np.ascontiguousarray(rows, dtype=np.int64), np.ascontiguousarray(x, dtype=np.float64), nrow)
    out = np.zeros((nrow, x.shape[1]))
    for j in range(rows.shape[1]):
        np.add.at(out, rows[:, j], x)
    return out


def gather_rows(rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``out[lam] = sum_x y[rows[lam, x]]``."""
    return y[rows].sum(axis=1)
