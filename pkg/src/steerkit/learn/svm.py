"""Soft-margin Gaussian-kernel SVM with grid search over ``(C, gamma)``."""
import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.spatial.distance import cdist

from . import common
from ._smo import smo

log = logging.getLogger(__name__)

DEFAULT_C_GRID = tuple(2.0 ** k for k in range(-3, 8))
DEFAULT_GAMMA_GRID = tuple(2.0 ** k for k in range(-7, 4))


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


class SvmModel(common.Model):
    family = "svm"

    def __init__(self, feature_kind, scaler, support, coef, bias, gamma, C):
        super().__init__(feature_kind, scaler)
        self.support = np.asarray(support, dtype=np.float64)
        self.coef = np.asarray(coef, dtype=np.float64)  # alpha_i * y_i
        self.bias = float(bias)
        self.gamma = float(gamma)
        self.C = float(C)

    def decision(self, X):
        Z = self.scaler.transform(X)
        if len(self.coef) == 0:
            return np.full(len(Z), self.bias)
        return rbf_kernel(Z, self.support, self.gamma) @ self.coef + self.bias

    def params_json(self):
        return {"support": self.support.tolist(), "coef": self.coef.tolist(), "bias": self.bias,
                "gamma": self.gamma, "C": self.C}

    @classmethod
    def from_json(cls, d):
        p = d["params"]
        k = len(d["standardization"]["mean"])
        return cls(d["feature_kind"], common.Standardizer.from_json(d["standardization"]),
                   np.asarray(p["support"], dtype=np.float64).reshape(-1, k), p["coef"], p["bias"],
                   p["gamma"], p["C"])

    def kkt_residual(self) -> float:
        """``|sum_i alpha_i y_i|``; zero for a feasible dual point."""
        return float(abs(self.coef.sum()))


def fit_svm(Z: np.ndarray, y: np.ndarray, C: float, gamma: float, K: np.ndarray | None = None):
    """Fit on already-standardised rows; returns ``(support, coef, bias)``."""
    if K is None:
        K = rbf_kernel(Z, Z, gamma)
    alpha, bias, _ = smo(K, y, C)
    sv = alpha > 0
    return Z[sv], alpha[sv] * y[sv], bias


def _cv_for_gamma(args):
    Z, y, gamma, c_grid, folds = args
    K = rbf_kernel(Z, Z, gamma)
    out = []
    for C in c_grid:
        accs = []
        for tr, va in folds:
            alpha, bias, _ = smo(K[np.ix_(tr, tr)], y[tr], C)
            f = K[np.ix_(va, tr)] @ (alpha * y[tr]) + bias
            accs.append(common.accuracy(y[va], np.where(f >= 0, 1, -1)))
        out.append(float(np.mean(accs)))
    return out


def train_svm(
    train,
    c_grid=DEFAULT_C_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    folds: int = 5,
    seed: int = 0,
    workers: int = 1,
):
    """Grid-searched SVM; returns ``(SvmModel, EvalReport)``.

    The selected pair maximises the mean ``folds``-fold CV accuracy; ties go
    to the first pair in (C, gamma) grid order.
    """
    y = np.asarray(train.y, dtype=np.int64)
    common.check_two_classes(y)
    scaler = common.Standardizer.fit(train.X)
    Z = scaler.transform(train.X)
    yf = y.astype(np.float64)
    fold_idx = common.stratified_folds(y, folds, seed)
    jobs = [(Z, yf, g, tuple(c_grid), fold_idx) for g in gamma_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            by_gamma = list(pool.map(_cv_for_gamma, jobs))
    else:
        by_gamma = [_cv_for_gamma(j) for j in jobs]
    grid = np.array(by_gamma).T  # (C, gamma)
    ci, gi = np.unravel_index(int(np.argmax(grid)), grid.shape)
    C, gamma = float(c_grid[ci]), float(gamma_grid[gi])
    support, coef, bias = fit_svm(Z, yf, C, gamma)
    model = SvmModel(train.kind, scaler, support, coef, bias, gamma, C)
    log.info("svm: C=%g gamma=%g cv=%.4f support=%d", C, gamma, grid[ci, gi], len(coef))
    report = common.EvalReport(
        family="svm", feature_kind=train.kind, cv_accuracy=float(grid[ci, gi]),
        train_accuracy=common.accuracy(y, model.predict_rows(train.X)),
        hyperparameters={"C": C, "gamma": gamma, "folds": folds, "seed": seed,
                         "c_grid": list(map(float, c_grid)), "gamma_grid": list(map(float, gamma_grid)),
                         "standardized": True},
        notes={"cv_grid": grid.tolist(), "n_support": int(len(coef)), "kkt_residual": model.kkt_residual()},
    )
    return model, report
