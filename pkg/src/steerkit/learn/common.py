"""Shared plumbing for the classifiers: splits, folds, scaling, reports, model files."""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import features
from ..errors import DegenerateData, FeatureKindMismatch, SchemaMismatch

SCHEMA_VERSION = 1


def check_two_classes(y: np.ndarray) -> None:
    labels = set(np.unique(y).tolist())
    if labels != {-1, 1}:
        raise DegenerateData(f"need both classes -1 and 1, got {sorted(labels)}")


def train_test_split(y: np.ndarray, seed: int, test_fraction: float = 1.0 / 6.0):
    """Stratified split; returns ``(train_idx, test_idx)`` in ascending order."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1,))))
    train, test = [], []
    for lab in (-1, 1):
        idx = np.flatnonzero(y == lab)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> list:
    """List of ``(train_idx, val_idx)`` pairs; class proportions kept per fold."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2,))))
    assign = np.empty(len(y), dtype=np.int64)
    for lab in np.unique(y):
        idx = np.flatnonzero(y == lab)
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = np.arange(len(idx)) % folds
    out = []
    for f in range(folds):
        out.append((np.flatnonzero(assign != f), np.flatnonzero(assign == f)))
    return out


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        # constant columns (e.g. the zero Bloch block of isotropic states) stay unscaled
        return cls(mean, np.where(sd > 1e-12, sd, 1.0))

    @classmethod
    def identity(cls, k: int) -> "Standardizer":
        return cls(np.zeros(k), np.ones(k))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true)
    return float(np.mean(y_true == np.asarray(y_pred))) if len(y_true) else float("nan")


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> list:
    """2x2 counts, rows = true label, columns = predicted label, order (-1, +1)."""
    out = [[0, 0], [0, 0]]
    for t, p in zip(np.asarray(y_true).tolist(), np.asarray(y_pred).tolist()):
        out[(t + 1) // 2][(p + 1) // 2] += 1
    return out


@dataclass
class EvalReport:
    family: str
    feature_kind: str
    cv_accuracy: float | None = None
    test_accuracy: float | None = None
    train_accuracy: float | None = None
    generalization: dict = field(default_factory=dict)
    confusion: list | None = None
    n_test: int = 0
    hyperparameters: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


class Model:
    """Base class: a trained classifier with a feature kind and a scaler."""

    family = "base"

    def __init__(self, feature_kind: str, scaler: Standardizer):
        if feature_kind not in features.KINDS:
            raise ValueError(f"unknown feature kind {feature_kind!r}")
        self.feature_kind = feature_kind
        self.scaler = scaler

    def decision(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_rows(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != features.KINDS[self.feature_kind]:
            raise FeatureKindMismatch(
                f"model expects {features.KINDS[self.feature_kind]} {self.feature_kind} features, got {X.shape[1]}"
            )
        return np.where(self.decision(X) >= 0.0, 1, -1).astype(np.int64)

    def params_json(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family,
            "feature_kind": self.feature_kind,
            "standardization": self.scaler.to_json(),
            "params": self.params_json(),
        }


def check_kind(model: Model, kind: str) -> None:
    if kind != model.feature_kind:
        raise FeatureKindMismatch(f"model trained on {model.feature_kind}, data is {kind}")


def evaluate(model: Model, ds) -> dict:
    """Accuracy and confusion matrix of ``model`` on a labeled dataset."""
    check_kind(model, ds.kind)
    pred = model.predict_rows(ds.X)
    return {"accuracy": accuracy(ds.y, pred), "confusion": confusion(ds.y, pred), "n": len(ds.y)}


def predict(model: Model, fv) -> int:
    """Label of a single :class:`~steerkit.features.FeatureVector`."""
    check_kind(model, fv.kind)
    return int(model.predict_rows(fv.values[None, :])[0])


def save_model(model: Model, path) -> None:
    Path(path).write_text(json.dumps(model.to_json(), sort_keys=True) + "\n")


def load_model(path) -> Model:
    from . import ann, boost, svm

    d = json.loads(Path(path).read_text())
    if d.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(f"{path}: model schema {d.get('schema_version')} != {SCHEMA_VERSION}")
    loaders = {"svm": svm.SvmModel, "ann": ann.AnnModel, "boost": boost.BoostModel}
    fam = d.get("family")
    if fam not in loaders:
        raise SchemaMismatch(f"{path}: unknown model family {fam!r}")
    return loaders[fam].from_json(d)
