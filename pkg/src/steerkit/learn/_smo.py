"""Sequential minimal optimisation for the C-SVM dual.

Solves ``min 1/2 a^T Q a - e^T a`` s.t. ``0 <= a <= C``, ``y^T a = 0``,
``Q = (y y^T) * K``, with second-order working-set selection (the WSS2
rule of Fan, Chen and Lin). The numba kernel and the numpy fallback run
the same iteration and agree to rounding.
"""
import numpy as np

from .._accel import HAVE_NUMBA, njit

TAU = 1e-12


@njit(cache=True)
def _smo_nb(K, y, C, eps, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    while it < max_iter:
        # i: maximal violating index from I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * grad[t]
                if v > gmax:
                    gmax = v
                    i = t
        # j: second-order choice from I_low
        gmin = np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * grad[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0:
                        a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if a <= 0:
                            a = TAU
                        o = -(b * b) / a
                        if o <= obj_min:
                            obj_min = o
                            j = t
        if i < 0 or j < 0 or gmax - gmin < eps:
            break
        it += 1
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0:
            a = TAU
        yi, yj = y[i], y[j]
        b = -yi * grad[i] + yj * grad[j]
        old_i, old_j = alpha[i], alpha[j]
        ai = old_i + yi * b / a
        # project back onto the feasible segment keeping y_i a_i + y_j a_j fixed
        s = yi * old_i + yj * old_j
        ai = min(max(ai, 0.0), C)
        aj = yj * (s - yi * ai)
        if aj < 0.0:
            aj = 0.0
            ai = yi * (s - yj * aj)
        elif aj > C:
            aj = C
            ai = yi * (s - yj * aj)
        di = ai - old_i
        dj = aj - old_j
        alpha[i] = ai
        alpha[j] = aj
        for t in range(n):
            grad[t] += y[t] * (yi * K[t, i] * di + yj * K[t, j] * dj)
    return alpha, grad, it


def _smo_np(K, y, C, eps, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K).copy()
    it = 0
    while it < max_iter:
        v = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        vu = np.where(up, v, -np.inf)
        i = int(np.argmax(vu))
        gmax = vu[i]
        gmin = np.min(np.where(low, v, np.inf))
        if gmax - gmin < eps:
            break
        b = gmax - v
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a <= 0, TAU, a)
        cand = low & (b > 0)
        if not cand.any():
            break
        obj = np.where(cand, -(b * b) / a, np.inf)
        # the scalar loop keeps the last index among ties
        j = n - 1 - int(np.argmin(obj[::-1]))
        it += 1
        aij = a[j]
        yi, yj = y[i], y[j]
        bb = -yi * grad[i] + yj * grad[j]
        old_i, old_j = alpha[i], alpha[j]
        s = yi * old_i + yj * old_j
        ai = min(max(old_i + yi * bb / aij, 0.0), C)
        aj = yj * (s - yi * ai)
        if aj < 0.0:
            aj = 0.0
            ai = yi * (s - yj * aj)
        elif aj > C:
            aj = C
            ai = yi * (s - yj * aj)
        di, dj = ai - old_i, aj - old_j
        alpha[i], alpha[j] = ai, aj
        grad += y * (yi * K[:, i] * di + yj * K[:, j] * dj)
    return alpha, grad, it


def smo(K: np.ndarray, y: np.ndarray, C: float, eps: float = 1e-3, max_iter: int | None = None,
        use_numba: bool | None = None):
    """Return ``(alpha, bias, iterations)`` for kernel matrix ``K`` and labels ``y`` in {-1, 1}.

    The decision function is ``sum_i alpha_i y_i K(x_i, x) + bias``.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if max_iter is None:
        max_iter = max(10_000_000, 100 * len(y))
    fn = _smo_nb if use_numba else _smo_np
    alpha, grad, it = fn(K, y, float(C), float(eps), int(max_iter))
    return alpha, _bias(alpha, grad, y, C), int(it)


def _bias(alpha, grad, y, C):
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        ub = np.min(yg[low]) if low.any() else np.inf
        lb = np.max(yg[up]) if up.any() else -np.inf
        if not np.isfinite(ub):
            ub = lb
        if not np.isfinite(lb):
            lb = ub
        rho = 0.5 * (ub + lb) if np.isfinite(ub) else 0.0
    return -rho
