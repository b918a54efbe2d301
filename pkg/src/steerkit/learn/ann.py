"""Two-hidden-layer ReLU network trained by full-batch gradient descent.

The output is a single sigmoid unit with binary cross-entropy; labels in
{-1, +1} are mapped to {0, 1} internally. Weights use He initialisation.
"""
import logging

import numpy as np

from . import common
from ..errors import DivergedLoss

log = logging.getLogger(__name__)

HIDDEN = {"f1": (64, 32), "f2": (32, 16)}


def init_params(sizes, rng: np.random.Generator) -> list:
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params, X):
    """Return ``(logits, cache)``; the cache holds pre- and post-activations."""
    acts = [X]
    pre = []
    h = X
    for layer, (W, b) in enumerate(params):
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0) if layer < len(params) - 1 else z
        acts.append(h)
    return pre[-1][:, 0], (acts, pre)


def bce_from_logits(z, t):
    # log(1 + e^z) - t z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - t * z))


def loss_and_grads(params, X, t):
    z, (acts, pre) = forward(params, X)
    loss = bce_from_logits(z, t)
    n = X.shape[0]
    p = 0.5 * (1.0 + np.tanh(0.5 * z))  # sigmoid without overflow
    delta = ((p - t) / n)[:, None]
    grads = [None] * len(params)
    for layer in range(len(params) - 1, -1, -1):
        W, _ = params[layer]
        grads[layer] = (acts[layer].T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ W.T) * (pre[layer - 1] > 0)
    return loss, grads


def numerical_grads(params, X, t, h: float = 1e-6):
    """Central finite differences of the mean BCE w.r.t. every parameter."""
    out = []
    for W, b in params:
        gs = []
        for arr in (W, b):
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                old = arr[ix]
                arr[ix] = old + h
                lp = bce_from_logits(forward(params, X)[0], t)
                arr[ix] = old - h
                lm = bce_from_logits(forward(params, X)[0], t)
                arr[ix] = old
                g[ix] = (lp - lm) / (2 * h)
            gs.append(g)
        out.append(tuple(gs))
    return out


def gradient_check(params, X, t, h: float = 1e-6) -> float:
    """Largest per-layer relative error ``|g - g_fd| / max(|g| + |g_fd|, tiny)``."""
    _, ana = loss_and_grads(params, X, t)
    num = numerical_grads(params, X, t, h)
    worst = 0.0
    for (ga, gb), (na, nb) in zip(ana, num):
        for a, n in ((ga, na), (gb, nb)):
            denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
            worst = max(worst, float(np.linalg.norm(a - n) / denom))
    return worst


def gd_train(params, X, t, epochs: int, lr: float):
    """Plain full-batch gradient descent; raises DivergedLoss on a non-finite loss."""
    params = [(W.copy(), b.copy()) for W, b in params]
    loss = np.nan
    for ep in range(epochs):
        loss, grads = loss_and_grads(params, X, t)
        if not np.isfinite(loss):
            raise DivergedLoss(f"loss is {loss} at epoch {ep} (lr={lr})")
        params = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(params, grads)]
    loss = bce_from_logits(forward(params, X)[0], t)
    if not np.isfinite(loss) or not all(np.all(np.isfinite(W)) for W, _ in params):
        raise DivergedLoss(f"non-finite parameters after {epochs} epochs (lr={lr})")
    return params, float(loss)


class AnnModel(common.Model):
    family = "ann"

    def __init__(self, feature_kind, scaler, params):
        super().__init__(feature_kind, scaler)
        self.params = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64)) for W, b in params]
        for (W1, _), (W2, _) in zip(self.params[:-1], self.params[1:]):
            if W1.shape[1] != W2.shape[0]:
                raise ValueError("layer shapes do not chain")

    @property
    def sizes(self):
        return [self.params[0][0].shape[0]] + [W.shape[1] for W, _ in self.params]

    def decision(self, X):
        return forward(self.params, self.scaler.transform(X))[0]

    def params_json(self):
        return {"sizes": self.sizes, "weights": [W.tolist() for W, _ in self.params],
                "biases": [b.tolist() for _, b in self.params]}

    @classmethod
    def from_json(cls, d):
        p = d["params"]
        return cls(d["feature_kind"], common.Standardizer.from_json(d["standardization"]),
                   list(zip(p["weights"], p["biases"])))


def _fit(X, y, kind, hidden, epochs, lr, rng, max_retries=3):
    scaler = common.Standardizer.fit(X)
    Z = scaler.transform(X)
    t = (y > 0).astype(np.float64)
    init = init_params([Z.shape[1], *hidden, 1], rng)
    for attempt in range(max_retries + 1):
        try:
            params, loss = gd_train(init, Z, t, epochs, lr)
            return AnnModel(kind, scaler, params), loss, lr
        except DivergedLoss as exc:
            if attempt == max_retries:
                raise
            log.warning("ann: %s; retrying with lr=%g", exc, lr / 10)
            lr /= 10
    raise AssertionError("unreachable")  # pragma: no cover


def train_ann(train, epochs: int = 1000, lr: float = 0.1, folds: int = 5, seed: int = 0,
              hidden: tuple | None = None):
    """Returns ``(AnnModel, EvalReport)``; CV uses the same recipe per fold."""
    y = np.asarray(train.y, dtype=np.int64)
    common.check_two_classes(y)
    hidden = tuple(hidden or HIDDEN[train.kind])
    accs = []
    for f, (tr, va) in enumerate(common.stratified_folds(y, folds, seed)):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(3, f))))
        m, _, _ = _fit(train.X[tr], y[tr], train.kind, hidden, epochs, lr, rng)
        accs.append(common.accuracy(y[va], m.predict_rows(train.X[va])))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(3, folds))))
    model, loss, used_lr = _fit(train.X, y, train.kind, hidden, epochs, lr, rng)
    report = common.EvalReport(
        family="ann", feature_kind=train.kind, cv_accuracy=float(np.mean(accs)),
        train_accuracy=common.accuracy(y, model.predict_rows(train.X)),
        hyperparameters={"epochs": epochs, "lr": lr, "lr_used": used_lr, "hidden": list(hidden),
                         "folds": folds, "seed": seed, "standardized": True},
        notes={"final_loss": loss, "fold_accuracies": accs},
    )
    return model, report
