"""Feature encodings of two-qutrit states.

``F1`` (80 reals) is the full density matrix: the first eight diagonal
entries, then real and imaginary parts of the 36 strictly-lower entries in
row-major order. ``F2`` (16 reals) is built from the Bob-filtered state
``rho~ = (I x rho_B^-1/2) rho (I x rho_B^-1/2) / norm``: the eight squared
singular values of its correlation matrix (descending), followed by Alice's
Bloch vector rotated into the singular frame.
"""
from dataclasses import dataclass, field

import numpy as np

from . import qcore
from .errors import FilterSingular, NearSingular

F1_LEN = 80
F2_LEN = 16
KINDS = {"f1": F1_LEN, "f2": F2_LEN}

_LOWER_I, _LOWER_J = np.tril_indices(9, k=-1)


@dataclass
class FeatureVector:
    kind: str
    values: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (KINDS[self.kind],):
            raise ValueError(f"{self.kind} needs {KINDS[self.kind]} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")


def f1_values(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    low = rho[_LOWER_I, _LOWER_J]
    reim = np.empty(72)
    reim[0::2] = low.real
    reim[1::2] = low.imag
    return np.concatenate([np.diag(rho).real[:8], reim])


def f1_to_density(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`f1_values` (the last diagonal entry comes from unit trace)."""
    v = np.asarray(values, dtype=np.float64)
    rho = np.zeros((9, 9), dtype=np.complex128)
    diag = np.append(v[:8], 1.0 - v[:8].sum())
    rho[np.arange(9), np.arange(9)] = diag
    low = v[8::2] + 1j * v[9::2]
    rho[_LOWER_I, _LOWER_J] = low
    rho[_LOWER_J, _LOWER_I] = low.conj()
    return rho


def extract_f1(rho: np.ndarray, source: dict | None = None) -> FeatureVector:
    return FeatureVector("f1", f1_values(rho), dict(source or {}))


def filter_bob(rho: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """One-way local filter on Bob that flattens his marginal to ``I/3``."""
    try:
        x = qcore.inv_sqrt_psd(qcore.partial_trace_a(rho), eps=eps)
    except NearSingular as exc:
        raise FilterSingular(str(exc)) from exc
    op = np.kron(np.eye(3), x)
    out = op @ rho @ op
    out = out / np.trace(out).real
    return 0.5 * (out + out.conj().T)


def f2_parts(rho: np.ndarray, eps: float = 1e-8) -> dict:
    """Intermediate quantities of the F2 pipeline (filtered state, SVD factors)."""
    filt = filter_bob(rho, eps=eps)
    rep = qcore.bloch_decompose(filt)
    if np.max(np.abs(rep.b)) > 1e-8:
        raise FilterSingular(f"filtered Bob vector not zero (max {np.max(np.abs(rep.b)):.2e})")
    o1, s, o2 = qcore.svd_real(rep.T)
    # rotating Alice by o1^T makes the correlation block o1^T T o2 = diag(s)
    a_rot = o1.T @ rep.a
    return {"filtered": filt, "bloch": rep, "o1": o1, "s": s, "o2": o2, "a_rot": a_rot}


def f2_values(rho: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    parts = f2_parts(rho, eps=eps)
    return np.concatenate([parts["s"] ** 2, parts["a_rot"]])


def extract_f2(rho: np.ndarray, source: dict | None = None, eps: float = 1e-8) -> FeatureVector:
    return FeatureVector("f2", f2_values(rho, eps=eps), dict(source or {}))


def extract(rho: np.ndarray, kind: str, source: dict | None = None) -> FeatureVector:
    if kind == "f1":
        return extract_f1(rho, source)
    if kind == "f2":
        return extract_f2(rho, source)
    raise ValueError(f"unknown feature kind {kind!r}")
