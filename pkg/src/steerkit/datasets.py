"""Labeled dataset generation and persistence.

Every generator is a deterministic map over item indices: item ``i`` draws
from ``item_rng(master_seed, i, stream)`` and results are consumed in index
order, so the output does not depend on the number of workers.

On disk a dataset ``name.csv`` (header ``f0,...,f{k-1},label``) has a JSON
sidecar ``name.meta.json`` and, when states are kept, a state cache
``name.states.csv`` (81 interleaved ``re``/``im`` column pairs) with its own
sidecar ``name.states.meta.json``.
"""
import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import families, features, measure, qcore
from .errors import ChecksumMismatch, ClassGenerationFailed, FilterSingular, SchemaMismatch, SolverStalled
from .sdp import steering

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
PARTIAL_MUB_REFERENCE_P = 0.4818
SW_POSITIVE = 1e-6

STREAM_RANDOM = 0
STREAM_ISOTROPIC = 1
STREAM_PARTIAL = 2
ACCURATE_CLASSES = (
    # (name, label)
    ("entangled_pure", -1),
    ("isotropic_steerable", -1),
    ("werner_steerable", -1),
    ("random_steerable", -1),
    ("product_pure", 1),
    ("separable_mixed", 1),
    ("werner_unsteerable", 1),
    ("isotropic_unsteerable", 1),
)


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)
    states: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, features.KINDS[self.kind])
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.y.shape != (self.X.shape[0],):
            raise SchemaMismatch("label count does not match row count")
        if not np.all(np.isin(self.y, (-1, 1))):
            raise SchemaMismatch("labels must be -1 or 1")

    def __len__(self):
        return len(self.y)

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def counts(self) -> dict:
        return {"-1": int(np.sum(self.y == -1)), "1": int(np.sum(self.y == 1))}

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(
            self.X[idx], self.y[idx], self.kind, dict(self.meta),
            [self.provenance[i] for i in idx] if self.provenance else [],
            None if self.states is None else self.states[idx],
        )

    def with_kind(self, kind: str, drop_singular: bool = False) -> "LabeledDataset":
        """Re-extract features from the state cache (labels are shared).

        F2 needs an invertible Bob marginal; with ``drop_singular`` rows
        where the filter fails are dropped (and counted in ``meta``),
        otherwise ``FilterSingular`` propagates.
        """
        if self.states is None:
            raise SchemaMismatch("dataset has no state cache")
        keep, rows = [], []
        for i, s in enumerate(self.states):
            try:
                rows.append(features.extract(s, kind).values)
            except FilterSingular:
                if not drop_singular:
                    raise
                continue
            keep.append(i)
        keep = np.asarray(keep, dtype=np.int64)
        X = np.stack(rows) if rows else np.zeros((0, features.KINDS[kind]))
        meta = dict(self.meta, feature_kind=kind, k=features.KINDS[kind])
        if len(keep) < len(self):
            meta["dropped_singular"] = int(len(self) - len(keep))
        prov = [self.provenance[i] for i in keep] if self.provenance else []
        ds = LabeledDataset(X, self.y[keep], kind, meta, prov, self.states[keep])
        ds.meta["counts"] = ds.counts()
        return ds

    def feature_std(self) -> np.ndarray:
        return self.X.std(axis=0)


def _finish(rows, kind, meta) -> LabeledDataset:
    X = np.stack([r["x"] for r in rows]) if rows else np.zeros((0, features.KINDS[kind]))
    y = np.array([r["label"] for r in rows], dtype=np.int64)
    states = np.stack([r["state"] for r in rows]) if rows else np.zeros((0, 9, 9), dtype=np.complex128)
    prov = [r["prov"] for r in rows]
    ds = LabeledDataset(X, y, kind, meta, prov, states)
    ds.meta.update(feature_kind=kind, k=ds.k, counts=ds.counts(), format_version=FORMAT_VERSION)
    return ds


def _try_features(rho, kind):
    try:
        return features.extract(rho, kind).values
    except FilterSingular:
        return None


def _parallel_map(fn, args, workers: int):
    if workers <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))


def _collect(fn, make_args, need: dict, workers: int, chunk: int, max_draws: int | None):
    """Consume ``fn(make_args(i))`` in index order until every label quota is met."""
    have = {k: 0 for k in need}
    rows = []
    i = 0
    stats = {"draws": 0, "excluded": 0, "stalled": 0}
    while any(have[k] < need[k] for k in need):
        if max_draws is not None and i >= max_draws:
            raise ClassGenerationFailed(
                f"draw budget {max_draws} exhausted with counts {have} (targets {need})"
            )
        n = chunk if max_draws is None else min(chunk, max_draws - i)
        results = _parallel_map(fn, [make_args(j) for j in range(i, i + n)], workers)
        for r in results:
            stats["draws"] += 1
            stats["stalled"] += r.get("stalled", 0) if r else 0
            if r is None or r.get("x") is None:
                stats["excluded"] += 1
                continue
            lab = r["label"]
            if have[lab] < need[lab]:
                have[lab] += 1
                rows.append(r)
            if all(have[k] >= need[k] for k in need):
                break
        i += n
    return rows, stats


# ----------------------------------------------------------------------------
# SDP-labeled random states


def _random_item(args):
    seed, index, m, trials, tol, kind, rank = args
    rng = families.item_rng(seed, index, STREAM_RANDOM)
    rho = families.random_density(rng, rank=rank)
    res = steering.sdp_label(rho, m, trials, rng, tol=tol)
    return {
        "x": _try_features(rho, kind),
        "label": res.label,
        "state": rho,
        "stalled": res.stalled,
        "prov": {"family": "random", "index": index, "rank": rank, "m": m,
                 "trials_run": res.trials_run, "steerable_trial": res.steerable_trial},
    }


def gen_random_sdp(
    m: int,
    pos_target: int,
    neg_target: int,
    master_seed: int,
    feature_kind: str,
    trials: int = 100,
    tol: float = steering.DEFAULT_TOL,
    rank: int = 9,
    workers: int = 1,
    max_draws: int | None = None,
    chunk: int = 64,
) -> LabeledDataset:
    """Random states labeled by :func:`steering.sdp_label`, balanced by discard.

    ``rank`` is the Ginibre column count (9 is the full-rank construction).
    ``max_draws`` bounds the run; exceeding it raises ``ClassGenerationFailed``.
    """
    if not 3 <= m <= 7:
        raise ValueError("m must be in 3..7")
    if pos_target < 1 or neg_target < 1:
        raise ValueError("targets must be >= 1")
    rows, stats = _collect(
        _random_item,
        lambda i: (master_seed, i, m, trials, tol, feature_kind, rank),
        {1: pos_target, -1: neg_target},
        workers, chunk, max_draws,
    )
    meta = {
        "source": "random_sdp", "m": m, "master_seed": master_seed, "solver_tol": tol,
        "labeling_rule": f"sdp_label/spin1/trials={trials}", "trials": trials, "rank": rank,
        "generation": stats,
    }
    return _finish(rows, feature_kind, meta)


# ----------------------------------------------------------------------------
# validated Werner ranges


@lru_cache(maxsize=None)
def werner_ranges(seed: int = 2024, m: int = 5, draws: int = 6, step: float = 0.01) -> dict:
    """Parameter ranges used for Werner labels, each backed by a proof.

    Unsteerable: ``p <= 1/2`` (separable, hence unsteerable). Steerable:
    ``[p0, 1]`` where a single witness, found by SDP at ``p0`` for a fixed
    spin-1 measurement set, is negative at both ends; the witness value is
    affine in ``p`` so it certifies the whole interval.
    """
    rng = families.make_rng(seed)
    best = None
    for _ in range(draws):
        ms = measure.random_spin_measurements(rng, m)
        table = steering.enumerate_strategies(m)

        def cert_at(p):
            sig = measure.build_assemblage(families.werner(p), ms)
            try:
                v = steering.lhs_feasibility(sig)
            except Exception:  # stalled solves simply do not certify
                return None
            return v.certificate if v.steerable else None

        if cert_at(1.0) is None:
            continue
        lo, hi = 0.5, 1.0
        while hi - lo > step:
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if cert_at(mid) is not None else (mid, hi)
        p0 = float(np.ceil(hi / step) * step)
        cert = cert_at(p0)
        if cert is None:
            continue
        sig1 = measure.build_assemblage(families.werner(1.0), ms)
        v1 = float(np.einsum("xaij,xaji->", cert.F, sig1).real)
        ok = steering.verify_certificate(cert, measure.build_assemblage(families.werner(p0), ms), table)
        if ok and v1 < -steering.NEGATIVE_GUARD and (best is None or p0 < best["steerable"][0]):
            best = {"steerable": (p0, 1.0), "witness_value_at_p0": cert.value, "witness_value_at_1": v1,
                    "measurements": ms, "witness": cert.F}
    if best is None:
        raise ClassGenerationFailed("no validated steerable Werner range found")
    best["unsteerable"] = (0.0, 0.5)
    return best


# ----------------------------------------------------------------------------
# accurately labeled families


def _accurate_item(args):
    seed, cls, index, kind, random_m, trials = args
    name, label = ACCURATE_CLASSES[cls]
    rng = families.item_rng(seed, index, 100 + cls)
    prov = {"family": name, "index": index}
    stalled = 0
    thr = families.isotropic_threshold()
    if name == "entangled_pure":
        rho = families.pure_entangled(rng)
    elif name == "product_pure":
        rho = families.product_pure(rng)
    elif name == "separable_mixed":
        rho = families.separable_mixed(rng, 10)
    elif name in ("isotropic_steerable", "isotropic_unsteerable"):
        while True:
            eta = rng.uniform(thr, 1.0) if label == -1 else rng.uniform(0.0, thr)
            if label == 1 or eta > thr:
                break
        rho = families.isotropic(eta)
        prov["eta"] = float(eta)
    elif name in ("werner_steerable", "werner_unsteerable"):
        rng_range = werner_ranges()["steerable" if label == -1 else "unsteerable"]
        p = rng.uniform(*rng_range)
        rho = families.werner(p)
        prov["p"] = float(p)
    elif name == "random_steerable":
        # low-rank induced states: full-rank draws are almost never certified
        rank = int(rng.integers(2, 5))
        attempt = 0
        while True:
            rho = families.random_density(rng, rank=rank)
            res = steering.sdp_label(rho, random_m, trials, None,
                                     measurements=_trial_measurements(seed, index, cls, attempt, random_m))
            stalled += res.stalled
            if res.label == -1:
                break
            attempt += 1
        prov.update(rank=rank, m=random_m, attempt=attempt, steerable_trial=res.steerable_trial)
    else:  # pragma: no cover
        raise ValueError(name)
    return {"x": _try_features(rho, kind), "label": label, "state": rho, "prov": prov, "stalled": stalled}


def _trial_measurements(seed, index, cls, attempt, m):
    def draw(k):
        return measure.random_spin_measurements(families.item_rng(seed, index, 200 + cls, attempt, k), m)

    return draw


def gen_accurate(
    master_seed: int,
    per_class: int,
    feature_kind: str,
    random_m: int = 3,
    trials: int = 100,
    workers: int = 1,
) -> LabeledDataset:
    """Eight theory-labeled classes, ``per_class`` rows each."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rows = []
    excluded = 0
    for cls in range(len(ACCURATE_CLASSES)):
        got = 0
        start = 0
        while got < per_class:
            need = per_class - got
            batch = _parallel_map(
                _accurate_item,
                [(master_seed, cls, i, feature_kind, random_m, trials) for i in range(start, start + need)],
                workers,
            )
            start += need
            for r in batch:
                if r["x"] is None:
                    excluded += 1
                    continue
                rows.append(r)
                got += 1
            if start - got > max(100, 10 * per_class):
                # e.g. product_pure under F2: Bob's marginal is always rank 1
                name = ACCURATE_CLASSES[cls][0]
                raise ClassGenerationFailed(
                    f"class {name}: {start - got} of {start} draws have no {feature_kind} features; "
                    f"generate with f1 or drop the class")
    wr = werner_ranges()
    meta = {
        "source": "accurate", "m": "accurate", "master_seed": master_seed,
        "solver_tol": steering.DEFAULT_TOL,
        "labeling_rule": "theory/accurate-v1",
        "classes": [c for c, _ in ACCURATE_CLASSES], "per_class": per_class,
        "werner_steerable_range": list(wr["steerable"]), "werner_unsteerable_range": list(wr["unsteerable"]),
        "random_steerable": {"m": random_m, "trials": trials},
        "generation": {"excluded": excluded},
    }
    return _finish(rows, feature_kind, meta)


def accurate_label_from_provenance(prov: dict, state: np.ndarray, master_seed: int) -> int:
    """Re-derive an accurate label from the recorded family, parameters and state."""
    fam = prov["family"]
    thr = families.isotropic_threshold()
    if fam in ("isotropic_steerable", "isotropic_unsteerable"):
        return -1 if prov["eta"] > thr else 1
    if fam in ("werner_steerable", "werner_unsteerable"):
        wr = werner_ranges()
        if wr["steerable"][0] <= prov["p"] <= 1.0:
            return -1
        if prov["p"] <= wr["unsteerable"][1]:
            return 1
        raise ValueError(f"Werner p={prov['p']} outside both validated ranges")
    if fam == "entangled_pure":
        r = qcore.partial_trace_b(state)
        return -1 if np.trace(r @ r).real < 1.0 - 1e-8 else 1
    if fam == "product_pure":
        r = qcore.partial_trace_b(state)
        return 1 if np.trace(r @ r).real > 1.0 - 1e-8 else -1
    if fam == "separable_mixed":
        # PPT is necessary for separability; a product-mixture must pass it
        return 1 if np.linalg.eigvalsh(qcore.partial_transpose_b(state))[0] > -1e-10 else -1
    if fam == "random_steerable":
        cls = [c for c, _ in ACCURATE_CLASSES].index(fam)
        draw = _trial_measurements(master_seed, prov["index"], cls, prov["attempt"], prov["m"])
        sigma = measure.build_assemblage(state, draw(prov["steerable_trial"]))
        return -1 if steering.lhs_feasibility(sigma).steerable else 1
    raise ValueError(f"unknown family {fam!r}")


# ----------------------------------------------------------------------------
# generalisation test sets


def _isotropic_item(args):
    seed, index, kind, label = args
    rng = families.item_rng(seed, index, STREAM_ISOTROPIC if label == 1 else STREAM_ISOTROPIC + 10)
    thr = families.isotropic_threshold()
    while True:
        eta = rng.uniform(0.0, thr) if label == 1 else rng.uniform(thr, 1.0)
        if label == 1 or eta > thr:
            break
    rho = families.isotropic(eta)
    return {"x": _try_features(rho, kind), "label": label, "state": rho, "prov": {"family": "isotropic", "eta": float(eta)}}


def gen_isotropic_testset(n_each: int, seed: int, feature_kind: str, workers: int = 1) -> LabeledDataset:
    """Isotropic states with exact labels: ``eta`` uniform on ``[0, 5/12]`` (+1) and ``(5/12, 1]`` (-1)."""
    if n_each < 1:
        raise ValueError("n_each must be >= 1")
    args = [(seed, i, feature_kind, 1) for i in range(n_each)] + [(seed, i, feature_kind, -1) for i in range(n_each)]
    rows = _parallel_map(_isotropic_item, args, workers)
    meta = {"source": "isotropic", "m": "exact", "master_seed": seed, "solver_tol": None,
            "labeling_rule": "isotropic/exact-threshold"}
    return _finish(rows, feature_kind, meta)


def partial_label(p: float, theta: float, phi: float) -> tuple[int, float | None]:
    """-1 iff the four-MUB steering weight exceeds ``SW_POSITIVE``.

    Nearly product states give assemblage members with traces around
    1e-8, where the weight solve can stall. In that case the label falls
    back to the verified LHS test on the same assemblage (a verified LHS
    decomposition means the weight is exactly zero) and the returned
    weight is ``None``.
    """
    rho = families.partial_entangled(families.PartialEntParam(p, theta, phi))
    sig = measure.build_assemblage(rho, measure.mub_measurements())
    try:
        sw = steering.steering_weight(sig)
    except SolverStalled:
        verdict = steering.lhs_feasibility(sig)
        log.info("steering weight stalled at p=%.6g theta=%.6g phi=%.6g; LHS test says %s", p, theta, phi,
                 verdict.kind)
        return (-1 if verdict.steerable else 1), None
    return (-1 if sw > SW_POSITIVE else 1), sw


def _partial_item(args):
    seed, index, kind = args
    rng = families.item_rng(seed, index, STREAM_PARTIAL)
    p = rng.uniform(0.0, 1.0)
    theta = rng.uniform(0.0, np.pi / 4)
    phi = rng.uniform(0.0, np.pi / 2)
    rho = families.partial_entangled(families.PartialEntParam(p, theta, phi))
    prov = {"family": "partial", "index": index, "p": p, "theta": theta, "phi": phi}
    try:
        label, sw = partial_label(p, theta, phi)
    except SolverStalled:
        return {"x": None, "label": 1, "state": rho, "prov": prov, "stalled": 1}
    prov.update(sw=sw, label_source="steering_weight" if sw is not None else "lhs_test")
    return {"x": _try_features(rho, kind), "label": label, "state": rho, "prov": prov}


def gen_partial_testset(
    n_each: int, seed: int, feature_kind: str, workers: int = 1, max_draws: int | None = None, chunk: int = 64
) -> LabeledDataset:
    """Partially entangled states labeled by the four-MUB steering weight."""
    if n_each < 1:
        raise ValueError("n_each must be >= 1")
    rows, stats = _collect(
        _partial_item, lambda i: (seed, i, feature_kind), {1: n_each, -1: n_each}, workers, chunk, max_draws
    )
    low_p_steerable = sum(1 for r in rows if r["prov"]["p"] < PARTIAL_MUB_REFERENCE_P and r["label"] == -1)
    if low_p_steerable:
        log.warning("%d partially entangled rows with p < %.4f labeled steerable", low_p_steerable,
                    PARTIAL_MUB_REFERENCE_P)
    meta = {"source": "partial", "m": 4, "master_seed": seed, "solver_tol": steering.DEFAULT_TOL,
            "labeling_rule": f"steering_weight/mub4/sw>{SW_POSITIVE:g}",
            "low_p_steerable": low_p_steerable, "generation": stats}
    return _finish(rows, feature_kind, meta)


# ----------------------------------------------------------------------------
# persistence


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name[: -len(path.suffix)] + ".meta.json") if path.suffix else Path(str(path) + ".meta.json")


def _states_path(path: Path) -> Path:
    return path.with_name(path.stem + ".states.csv")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def save_states(states: np.ndarray, path, extra: dict | None = None) -> None:
    path = Path(path)
    header = [f"{p}{i}" for i in range(81) for p in ("re", "im")]
    rows = []
    for s in np.asarray(states).reshape(-1, 81):
        inter = np.empty(162)
        inter[0::2] = s.real
        inter[1::2] = s.imag
        rows.append([_fmt(v) for v in inter])
    data = _csv_bytes(header, rows)
    path.write_bytes(data)
    meta = {"kind": "states", "n": len(rows), "checksum": _sha256(data), "format_version": FORMAT_VERSION}
    meta.update(extra or {})
    _write_json(_meta_path(path), meta)


def load_states(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    rows = list(csv.reader(io.StringIO(data.decode())))
    if not rows or len(rows[0]) != 162:
        raise SchemaMismatch(f"{path}: state cache needs 162 columns")
    body = rows[1:]
    if any(len(r) != 162 for r in body):
        raise SchemaMismatch(f"{path}: ragged or truncated state row")
    meta_p = _meta_path(path)
    if meta_p.exists():
        meta = json.loads(meta_p.read_text())
        if meta.get("n") != len(body):
            raise SchemaMismatch(f"{path}: row count {len(body)} != {meta.get('n')}")
        if meta.get("checksum") != _sha256(data):
            raise ChecksumMismatch(f"{path}: checksum mismatch")
    try:
        arr = np.array(body, dtype=np.float64)
    except ValueError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from exc
    return (arr[:, 0::2] + 1j * arr[:, 1::2]).reshape(-1, 9, 9)


def save(ds: LabeledDataset, path, with_states: bool = True) -> None:
    path = Path(path)
    header = [f"f{i}" for i in range(ds.k)] + ["label"]
    rows = [[_fmt(v) for v in x] + [str(int(lab))] for x, lab in zip(ds.X, ds.y)]
    data = _csv_bytes(header, rows)
    path.write_bytes(data)
    meta = dict(ds.meta)
    meta.update(feature_kind=ds.kind, k=ds.k, counts=ds.counts(), n=len(ds), checksum=_sha256(data),
                format_version=FORMAT_VERSION, provenance=ds.provenance)
    _write_json(_meta_path(path), meta)
    if with_states and ds.states is not None:
        save_states(ds.states, _states_path(path), {"dataset": path.name})


def load(path) -> LabeledDataset:
    path = Path(path)
    meta_p = _meta_path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if not meta_p.exists():
        raise SchemaMismatch(f"missing sidecar {meta_p}")
    meta = json.loads(meta_p.read_text())
    data = path.read_bytes()
    rows = list(csv.reader(io.StringIO(data.decode())))
    if not rows:
        raise SchemaMismatch(f"{path}: empty file")
    header = rows[0]
    kind = meta.get("feature_kind")
    if kind not in features.KINDS:
        raise SchemaMismatch(f"{path}: unknown feature kind {kind!r}")
    k = features.KINDS[kind]
    if header != [f"f{i}" for i in range(k)] + ["label"] or meta.get("k") != k:
        raise SchemaMismatch(f"{path}: header does not match feature kind {kind} (k={k})")
    body = rows[1:]
    if any(len(r) != k + 1 for r in body) or len(body) != meta.get("n"):
        raise SchemaMismatch(f"{path}: truncated or ragged rows")
    if meta.get("checksum") != _sha256(data):
        raise ChecksumMismatch(f"{path}: checksum mismatch")
    try:
        arr = np.array(body, dtype=np.float64)
    except ValueError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from exc
    y = arr[:, -1].astype(np.int64)
    prov = meta.pop("provenance", [])
    for key in ("n", "checksum"):
        meta.pop(key, None)
    states = load_states(_states_path(path)) if _states_path(path).exists() else None
    ds = LabeledDataset(arr[:, :-1], y, kind, meta, prov, states)
    if ds.counts() != meta.get("counts"):
        raise SchemaMismatch(f"{path}: class counts {ds.counts()} != sidecar {meta.get('counts')}")
    return ds


def file_checksum(path) -> str:
    return _sha256(Path(path).read_bytes())


def default_workers() -> int:
    return int(os.environ.get("STEERKIT_WORKERS", "1"))
