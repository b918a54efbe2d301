"""Steering-bound sweeps for isotropic and partially entangled states.

A bound is the smallest grid value from which a predictor outputs
"steerable" (-1) on ``window`` consecutive grid points. Predictors that
never flip report the sentinel 1.0. The SDP and steering-weight predictors
are monotone in the mixing parameter (the noise part is unsteerable, and
the LHS set is convex), so their bounds are found by bisection over the
grid instead of a full scan.
"""
import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import families, features, measure
from .datasets import partial_label
from .errors import NoFlipFound
from .sdp import steering

log = logging.getLogger(__name__)

SENTINEL = 1.0
THEORY = families.isotropic_threshold()
STREAM_SWEEP = 40
METHODS = ("SVM", "ANN", "BOOST", "SDP", "THEORY")


@dataclass
class BoundCurve:
    """Bound per value of the independent variable (``m`` for isotropic sweeps)."""

    method: str
    grid: list
    bounds: list
    window: int = 3
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.grid) != len(self.bounds):
            raise ValueError("grid and bounds differ in length")
        if any(b <= a for a, b in zip(self.grid[:-1], self.grid[1:])):
            raise ValueError("grid must be strictly increasing")


@dataclass
class BoundSurface:
    method: str
    theta: list
    phi: list
    bounds: np.ndarray  # (len(theta), len(phi))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(len(self.theta), len(self.phi))


def param_grid(step: float) -> np.ndarray:
    n = int(round(1.0 / step))
    if not math.isclose(n * step, 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("grid step must divide 1")
    return np.round(np.arange(n + 1) * step, 12)


def first_window(labels, grid, window: int) -> float:
    """Smallest ``grid[i]`` with ``labels[i:i+window]`` all -1; raises NoFlipFound."""
    run = 0
    for i, lab in enumerate(labels):
        run = run + 1 if lab == -1 else 0
        if run >= window:
            return float(grid[i - window + 1])
    raise NoFlipFound("predictor never outputs steerable for a full window")


def bound_or_sentinel(labels, grid, window: int) -> float:
    try:
        return first_window(labels, grid, window)
    except NoFlipFound:
        return SENTINEL


def monotone_bound(label_at, grid, window: int) -> float:
    """Bisection version of :func:`first_window` for predictors monotone in the parameter.

    ``label_at(i)`` labels ``grid[i]``; for a monotone predictor the first
    steerable index opens a run to the end of the grid, so the window only
    fails if that index is among the last ``window - 1`` points.
    """
    n = len(grid)
    if label_at(n - 1) != -1:
        return SENTINEL
    lo, hi = -1, n - 1  # label(lo) = +1 (virtual), label(hi) = -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if label_at(mid) == -1:
            hi = mid
        else:
            lo = mid
    return float(grid[hi]) if hi <= n - window else SENTINEL


def model_isotropic_labels(model, grid) -> np.ndarray:
    X = np.stack([features.extract(families.isotropic(float(e)), model.feature_kind).values for e in grid])
    return model.predict_rows(X)


def _sweep_trial_measurements(seed, m):
    def draw(k):
        return measure.random_spin_measurements(families.item_rng(seed, m, STREAM_SWEEP, k), m)

    return draw


def sdp_isotropic_bound(m: int, trials: int, seed: int, grid_step: float = 0.01, window: int = 3,
                        tol: float = steering.DEFAULT_TOL) -> float:
    """SDP bound with the same ``trials`` measurement draws at every grid point."""
    grid = param_grid(grid_step)
    draw = _sweep_trial_measurements(seed, m)

    def label_at(i):
        return steering.sdp_label(families.isotropic(float(grid[i])), m, trials, None, tol=tol,
                                  measurements=draw).label

    return monotone_bound(label_at, grid, window)


def _sdp_job(args):
    return sdp_isotropic_bound(*args)


def sweep_isotropic(
    models: dict | None = None,
    m_range=range(3, 8),
    grid_step: float = 0.01,
    window: int = 3,
    sdp_trials: int | None = 20,
    seed: int = 0,
    workers: int = 1,
) -> list:
    """Bound curves over ``m`` for each method.

    ``models`` maps a method tag (``"SVM"``, ``"ANN"``, ``"BOOST"``) to a dict
    ``{m: model}`` of F2 classifiers; ``sdp_trials=None`` skips the SDP
    curve. The THEORY curve is always emitted as a single constant row.
    """
    m_list = list(m_range)
    grid = param_grid(grid_step)
    curves = []
    for method in ("SVM", "ANN", "BOOST"):
        per_m = (models or {}).get(method)
        if not per_m:
            continue
        bounds = []
        for m in m_list:
            model = per_m[m]
            if model.feature_kind != "f2":
                log.warning("%s model for m=%d uses %s, the isotropic sweep expects f2", method, m,
                            model.feature_kind)
            bounds.append(bound_or_sentinel(model_isotropic_labels(model, grid), grid, window))
        curves.append(BoundCurve(method, m_list, bounds, window, {"grid_step": grid_step}))
    if sdp_trials is not None:
        jobs = [(m, sdp_trials, seed, grid_step, window) for m in m_list]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                bounds = list(pool.map(_sdp_job, jobs))
        else:
            bounds = [_sdp_job(j) for j in jobs]
        curves.append(BoundCurve("SDP", m_list, bounds, window,
                                 {"grid_step": grid_step, "trials": sdp_trials, "seed": seed}))
    curves.append(BoundCurve("THEORY", [], [], window, {"constant": THEORY}))
    return curves


def sw_partial_bound(theta: float, phi: float, p_resolution: float = 0.01, window: int = 3) -> float:
    grid = param_grid(p_resolution)
    return monotone_bound(lambda i: partial_label(float(grid[i]), theta, phi)[0], grid, window)


def _sw_cell(args):
    return sw_partial_bound(*args)


def model_partial_bound(model, theta: float, phi: float, p_resolution: float = 0.01, window: int = 3) -> float:
    grid = param_grid(p_resolution)
    X = np.stack([
        features.extract(families.partial_entangled(families.PartialEntParam(float(p), theta, phi)),
                         model.feature_kind).values
        for p in grid
    ])
    return bound_or_sentinel(model.predict_rows(X), grid, window)


def sweep_partial(model, theta_grid, phi_grid, p_resolution: float = 0.01, window: int = 3,
                  method: str | None = None, workers: int = 1) -> BoundSurface:
    """Bound surface over ``(theta, phi)``; ``model=None`` gives the four-MUB steering-weight reference."""
    theta_grid = [float(t) for t in theta_grid]
    phi_grid = [float(f) for f in phi_grid]
    cells = [(t, f) for t in theta_grid for f in phi_grid]
    if model is None:
        jobs = [(t, f, p_resolution, window) for t, f in cells]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                vals = list(pool.map(_sw_cell, jobs))
        else:
            vals = [_sw_cell(j) for j in jobs]
        method = method or "SW"
    else:
        if model.feature_kind != "f1":
            log.warning("partial sweep expects an f1 model, got %s", model.feature_kind)
        vals = [model_partial_bound(model, t, f, p_resolution, window) for t, f in cells]
        method = method or model.family.upper()
    return BoundSurface(method, theta_grid, phi_grid, np.array(vals),
                        {"p_resolution": p_resolution, "window": window})


# ----------------------------------------------------------------------------
# plot data


CURVE_HEADER = ["method", "m", "bound"]
SURFACE_HEADER = ["method", "theta", "phi", "bound"]


def _f(v) -> str:
    return repr(float(v))


def emit_plot_data(items, path) -> None:
    """Write curves (``method,m,bound``) or surfaces (``method,theta,phi,bound``).

    The THEORY curve is one row with an empty ``m``. Floats use the shortest
    round-trip representation, so reloading is lossless.
    """
    items = list(items)
    if items and isinstance(items[0], BoundSurface):
        header, rows = SURFACE_HEADER, []
        for s in items:
            for i, t in enumerate(s.theta):
                for j, f in enumerate(s.phi):
                    rows.append([s.method, _f(t), _f(f), _f(s.bounds[i, j])])
    else:
        header, rows = CURVE_HEADER, []
        for c in items:
            if c.method == "THEORY":
                rows.append([c.method, "", _f(c.meta.get("constant", THEORY))])
            for m, b in zip(c.grid, c.bounds):
                rows.append([c.method, str(int(m)), _f(b)])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def load_plot_data(path) -> list:
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    header, body = rows[0], rows[1:]
    out: dict = {}
    if header == SURFACE_HEADER:
        for method, t, f, b in body:
            out.setdefault(method, []).append((float(t), float(f), float(b)))
        surfaces = []
        for method, cells in out.items():
            theta = sorted({c[0] for c in cells})
            phi = sorted({c[1] for c in cells})
            vals = np.full((len(theta), len(phi)), np.nan)
            for t, f, b in cells:
                vals[theta.index(t), phi.index(f)] = b
            surfaces.append(BoundSurface(method, theta, phi, vals))
        return surfaces
    if header != CURVE_HEADER:
        raise ValueError(f"unrecognised plot-data header {header}")
    curves = []
    for method, m, b in body:
        if method not in out:
            out[method] = {"grid": [], "bounds": [], "constant": None}
        if m == "":
            out[method]["constant"] = float(b)
        else:
            out[method]["grid"].append(int(m))
            out[method]["bounds"].append(float(b))
    for method, d in out.items():
        meta = {} if d["constant"] is None else {"constant": d["constant"]}
        curves.append(BoundCurve(method, d["grid"], d["bounds"], meta=meta))
    return curves
