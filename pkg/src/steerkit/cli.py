"""Command-line front end: ``steerkit {gen-data,train,eval,sweep,detect}``.

Each run takes an optional JSON config (``--config``) whose keys mirror the
long flags; explicit flags override config values. Every run writes a
manifest next to its main output with the resolved config, library
versions, wall time and output checksums. Exit codes come from the
exception classes in :mod:`steerkit.errors`.
"""
import argparse
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _accel, bounds, datasets, families, features, learn, measure
from .errors import ConfigInvalid, InputMissing, SteerkitError
from .sdp import steering

log = logging.getLogger("steerkit")

STREAM_DETECT = 50


# ----------------------------------------------------------------------------
# config handling


def _csv_floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _csv_ints(s):
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).split(",") if v.strip()]


def _csv_strs(s):
    if isinstance(s, (list, tuple)):
        return [str(v) for v in s]
    return [v for v in str(s).split(",") if v.strip()]


# name -> (type, default, help). ``None`` default means "required or optional by command".
COMMON = {
    "seed": (int, 0, "master seed"),
    "workers": (int, None, "worker processes (default: $STEERKIT_WORKERS or 1)"),
    "manifest": (str, None, "manifest path (default: <out>.manifest.json)"),
}
SPECS = {
    "gen-data": {
        "source": (str, "random", "random | accurate | isotropic | partial"),
        "m": (int, 3, "measurement settings for SDP labels (random source)"),
        "pos": (int, None, "rows labeled +1 (random source)"),
        "neg": (int, None, "rows labeled -1 (random source)"),
        "per_class": (int, None, "rows per class (accurate source)"),
        "n_each": (int, None, "rows per label (isotropic / partial sources)"),
        "feature": (str, "f2", "feature kind: f1 | f2"),
        "trials": (int, 100, "measurement draws per state for SDP labels"),
        "tol": (float, steering.DEFAULT_TOL, "certificate tolerance"),
        "rank": (int, 9, "Ginibre rank of random states (9 = full rank)"),
        "max_draws": (int, None, "draw budget for rejection sampling"),
        "out": (str, "dataset.csv", "output CSV path"),
    },
    "train": {
        "data": (str, None, "training dataset CSV"),
        "model": (str, "svm", "svm | ann | boost"),
        "feature": (str, None, "re-extract this feature kind from the state cache"),
        "folds": (int, 5, "cross-validation folds"),
        "test_fraction": (float, 1.0 / 6.0, "held-out test fraction"),
        "c_grid": (_csv_floats, None, "comma-separated C values (svm)"),
        "gamma_grid": (_csv_floats, None, "comma-separated gamma values (svm)"),
        "epochs": (int, 1000, "training epochs (ann)"),
        "lr": (float, 0.1, "learning rate (ann)"),
        "stages": (int, 200, "boosting stages (boost)"),
        "max_depth": (int, 3, "tree depth (boost)"),
        "general": (_csv_strs, None, "comma-separated generalisation dataset CSVs"),
        "out": (str, "model.json", "model output path"),
        "report": (str, None, "report path (default: <out>.report.json)"),
    },
    "eval": {
        "model_file": (str, None, "model JSON"),
        "data": (_csv_strs, None, "comma-separated dataset CSVs"),
        "out": (str, "eval.json", "report output path"),
    },
    "sweep": {
        "kind": (str, "isotropic", "isotropic | partial"),
        "models": (str, None, "JSON file mapping method -> {m: model path} (isotropic) or a model path (partial)"),
        "m_range": (_csv_ints, [3, 4, 5, 6, 7], "comma-separated m values (isotropic)"),
        "sdp_trials": (int, 20, "measurement draws per grid point for the SDP curve; 0 skips it"),
        "grid_step": (float, 0.01, "parameter grid step"),
        "window": (int, 3, "consecutive steerable points required"),
        "theta": (_csv_floats, None, "comma-separated theta values (partial)"),
        "phi": (_csv_floats, None, "comma-separated phi values (partial)"),
        "out": (str, "bounds.csv", "plot-data CSV path"),
    },
    "detect": {
        "state": (str, None, "state-cache CSV (81 re/im column pairs per row)"),
        "row": (int, None, "only this row (default: all rows)"),
        "method": (str, "sdp", "sdp | model"),
        "model_file": (str, None, "model JSON for --method model"),
        "m": (int, 3, "measurement settings"),
        "trials": (int, 100, "measurement draws"),
        "tol": (float, steering.DEFAULT_TOL, "certificate tolerance"),
        "out": (str, "verdict.json", "verdict JSON path"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steerkit", description="Qutrit steering detection and classification.")
    p.add_argument("--version", action="version", version=f"steerkit {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, spec in SPECS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="JSON config file; flags override its keys")
        for name, (typ, default, help_) in {**spec, **COMMON}.items():
            flag = "--" + name.replace("_", "-")
            shown = "" if default is None else f" [default: {default}]"
            # flags default to None so that "not given" is distinguishable from a value
            sp.add_argument(flag, dest=name, type=typ, default=None, help=help_ + shown)
    return p


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags and validate."""
    spec = {**SPECS[command], **COMMON}
    cfg = {k: v[1] for k, v in spec.items()}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise InputMissing(f"config file {path} not found")
        try:
            file_cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigInvalid(f"{path}: top level must be an object")
        unknown = sorted(set(file_cfg) - set(spec) - {"command"})
        if unknown:
            raise ConfigInvalid(f"unknown config keys for {command}: {unknown}")
        if file_cfg.get("command", command) != command:
            raise ConfigInvalid(f"config is for {file_cfg['command']!r}, not {command!r}")
        for k, v in file_cfg.items():
            if k == "command" or v is None:
                continue
            try:
                cfg[k] = spec[k][0](v)
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(f"config key {k}: {exc}") from exc
    for k in spec:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["workers"] is None:
        try:
            cfg["workers"] = datasets.default_workers()
        except ValueError as exc:
            raise ConfigInvalid(f"STEERKIT_WORKERS: {exc}") from exc
    _validate(command, cfg)
    return cfg


def _need(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigInvalid("missing required parameter(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _check(cond, msg):
    if not cond:
        raise ConfigInvalid(msg)


def _validate(command, cfg):
    _check(cfg["workers"] >= 1, "workers must be >= 1")
    if command == "gen-data":
        _check(cfg["source"] in ("random", "accurate", "isotropic", "partial"), f"unknown source {cfg['source']!r}")
        _check(cfg["feature"] in features.KINDS, f"unknown feature kind {cfg['feature']!r}")
        _check(cfg["trials"] >= 1, "trials must be >= 1")
        _check(1 <= cfg["rank"] <= 9, "rank must be in 1..9")
        _check(cfg["tol"] > 0, "tol must be positive")
        if cfg["source"] == "random":
            _need(cfg, "pos", "neg")
            _check(3 <= cfg["m"] <= 7, "m must be in 3..7")
            _check(cfg["pos"] >= 1 and cfg["neg"] >= 1, "pos and neg must be >= 1")
        elif cfg["source"] == "accurate":
            _need(cfg, "per_class")
            _check(cfg["per_class"] >= 1, "per_class must be >= 1")
        else:
            _need(cfg, "n_each")
            _check(cfg["n_each"] >= 1, "n_each must be >= 1")
        if cfg["max_draws"] is not None:
            _check(cfg["max_draws"] >= 1, "max_draws must be >= 1")
    elif command == "train":
        _need(cfg, "data")
        _check(cfg["model"] in learn.TRAINERS, f"unknown model {cfg['model']!r}")
        _check(cfg["feature"] is None or cfg["feature"] in features.KINDS, f"unknown feature kind {cfg['feature']!r}")
        _check(cfg["folds"] >= 2, "folds must be >= 2")
        _check(0.0 < cfg["test_fraction"] < 1.0, "test_fraction must be in (0, 1)")
        _check(cfg["epochs"] >= 1 and cfg["lr"] > 0, "epochs >= 1 and lr > 0 required")
        _check(cfg["stages"] >= 1 and cfg["max_depth"] >= 1, "stages and max_depth must be >= 1")
        for g in ("c_grid", "gamma_grid"):
            _check(cfg[g] is None or (cfg[g] and all(v > 0 for v in cfg[g])), f"{g} values must be positive")
    elif command == "eval":
        _need(cfg, "model_file", "data")
    elif command == "sweep":
        _check(cfg["kind"] in ("isotropic", "partial"), f"unknown sweep kind {cfg['kind']!r}")
        _check(cfg["window"] >= 1, "window must be >= 1")
        _check(0 < cfg["grid_step"] <= 0.5, "grid_step must be in (0, 0.5]")
        n = round(1.0 / cfg["grid_step"])
        _check(math.isclose(n * cfg["grid_step"], 1.0, abs_tol=1e-12), "grid_step must divide 1")
        if cfg["kind"] == "isotropic":
            _check(all(3 <= m <= 7 for m in cfg["m_range"]), "m values must be in 3..7")
            _check(cfg["sdp_trials"] >= 0, "sdp_trials must be >= 0")
        else:
            _need(cfg, "theta", "phi")
    elif command == "detect":
        _need(cfg, "state")
        _check(cfg["method"] in ("sdp", "model"), f"unknown method {cfg['method']!r}")
        if cfg["method"] == "model":
            _need(cfg, "model_file")
        _check(3 <= cfg["m"] <= steering.MAX_SETTINGS, f"m must be in 3..{steering.MAX_SETTINGS}")
        _check(cfg["trials"] >= 1, "trials must be >= 1")


def _input(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise InputMissing(f"input file {p} not found")
    return p


def _load_dataset(path) -> "datasets.LabeledDataset":
    return datasets.load(_input(path))


# ----------------------------------------------------------------------------
# commands


def cmd_gen_data(cfg) -> list:
    src, kind, seed, w = cfg["source"], cfg["feature"], cfg["seed"], cfg["workers"]
    if src == "random":
        ds = datasets.gen_random_sdp(cfg["m"], cfg["pos"], cfg["neg"], seed, kind, trials=cfg["trials"],
                                     tol=cfg["tol"], rank=cfg["rank"], workers=w, max_draws=cfg["max_draws"])
    elif src == "accurate":
        ds = datasets.gen_accurate(seed, cfg["per_class"], kind, trials=cfg["trials"], workers=w)
    elif src == "isotropic":
        ds = datasets.gen_isotropic_testset(cfg["n_each"], seed, kind, workers=w)
    else:
        ds = datasets.gen_partial_testset(cfg["n_each"], seed, kind, workers=w, max_draws=cfg["max_draws"])
    out = Path(cfg["out"])
    datasets.save(ds, out)
    log.info("wrote %s (%s)", out, ds.counts())
    print(json.dumps({"out": str(out), "counts": ds.counts(), "n": len(ds)}))
    return [out, datasets._meta_path(out), datasets._states_path(out), datasets._meta_path(datasets._states_path(out))]


def _report_path(cfg) -> Path:
    if cfg["report"]:
        return Path(cfg["report"])
    out = Path(cfg["out"])
    return out.with_name(out.stem + ".report.json")


def cmd_train(cfg) -> list:
    ds = _load_dataset(cfg["data"])
    if cfg["feature"] and cfg["feature"] != ds.kind:
        ds = ds.with_kind(cfg["feature"], drop_singular=True)
    general = {}
    for g in cfg["general"] or []:
        gd = _load_dataset(g)
        if gd.kind != ds.kind:
            gd = gd.with_kind(ds.kind, drop_singular=True)
        general[Path(g).stem] = gd
    tr, te = learn.train_test_split(ds.y, cfg["seed"], cfg["test_fraction"])
    train, test = ds.subset(tr), ds.subset(te)
    fam = cfg["model"]
    if fam == "svm":
        kw = {"folds": cfg["folds"], "seed": cfg["seed"], "workers": cfg["workers"]}
        if cfg["c_grid"]:
            kw["c_grid"] = cfg["c_grid"]
        if cfg["gamma_grid"]:
            kw["gamma_grid"] = cfg["gamma_grid"]
        model, report = learn.train_svm(train, **kw)
    elif fam == "ann":
        model, report = learn.train_ann(train, epochs=cfg["epochs"], lr=cfg["lr"], folds=cfg["folds"], seed=cfg["seed"])
    else:
        model, report = learn.train_boost(train, stages=cfg["stages"], max_depth=cfg["max_depth"],
                                          folds=cfg["folds"], seed=cfg["seed"])
    learn.finish_report(model, report, test, general)
    report.notes["n_train"] = len(train)
    out, rep = Path(cfg["out"]), _report_path(cfg)
    learn.save_model(model, out)
    rep.write_text(report.dumps())
    print(json.dumps({"cv": report.cv_accuracy, "test": report.test_accuracy, **report.generalization}))
    return [out, rep]


def cmd_eval(cfg) -> list:
    model = learn.load_model(_input(cfg["model_file"]))
    results = {}
    for path in cfg["data"]:
        ds = _load_dataset(path)
        if ds.kind != model.feature_kind and ds.states is not None:
            ds = ds.with_kind(model.feature_kind, drop_singular=True)
        results[Path(path).stem] = learn.evaluate(model, ds)
    out = Path(cfg["out"])
    out.write_text(json.dumps({"family": model.family, "feature_kind": model.feature_kind, "results": results},
                              indent=2, sort_keys=True) + "\n")
    print(json.dumps({k: v["accuracy"] for k, v in results.items()}))
    return [out]


def cmd_sweep(cfg) -> list:
    out = Path(cfg["out"])
    if cfg["kind"] == "isotropic":
        models = {}
        if cfg["models"]:
            spec = json.loads(_input(cfg["models"]).read_text())
            for method, per_m in spec.items():
                if method not in ("SVM", "ANN", "BOOST"):
                    raise ConfigInvalid(f"unknown sweep method {method!r}")
                models[method] = {int(m): learn.load_model(_input(p)) for m, p in per_m.items()}
                missing = set(cfg["m_range"]) - set(models[method])
                if missing:
                    raise ConfigInvalid(f"{method}: no model for m in {sorted(missing)}")
        curves = bounds.sweep_isotropic(models, cfg["m_range"], cfg["grid_step"], cfg["window"],
                                        cfg["sdp_trials"] or None, cfg["seed"], cfg["workers"])
        bounds.emit_plot_data(curves, out)
        summary = {c.method: dict(zip(map(str, c.grid), c.bounds)) or c.meta.get("constant") for c in curves}
    else:
        model = learn.load_model(_input(cfg["models"])) if cfg["models"] else None
        surf = bounds.sweep_partial(model, cfg["theta"], cfg["phi"], cfg["grid_step"], cfg["window"],
                                    workers=cfg["workers"])
        bounds.emit_plot_data([surf], out)
        summary = {surf.method: surf.bounds.tolist()}
    print(json.dumps(summary))
    return [out]


def cmd_detect(cfg) -> list:
    states = datasets.load_states(_input(cfg["state"]))
    rows = range(len(states)) if cfg["row"] is None else [cfg["row"]]
    if cfg["row"] is not None and not 0 <= cfg["row"] < len(states):
        raise ConfigInvalid(f"row {cfg['row']} outside 0..{len(states) - 1}")
    model = learn.load_model(_input(cfg["model_file"])) if cfg["method"] == "model" else None
    verdicts = []
    for i in rows:
        rho = states[i]
        if model is None:
            m, seed = cfg["m"], cfg["seed"]

            def draw(k, i=i, m=m, seed=seed):
                return measure.random_spin_measurements(families.item_rng(seed, i, STREAM_DETECT, k), m)

            res = steering.sdp_label(rho, m, cfg["trials"], None, tol=cfg["tol"], measurements=draw)
            entry = {"row": i, "method": "sdp", "label": res.label,
                     "verdict": steering.STEERABLE if res.label == -1 else steering.NO_CERTIFICATE,
                     "trials_run": res.trials_run, "stalled": res.stalled, "steerable_trial": res.steerable_trial}
            if res.verdict is not None:
                entry["certificate"] = res.verdict.summary()
        else:
            label = learn.predict(model, features.extract(rho, model.feature_kind))
            entry = {"row": i, "method": f"model:{model.family}", "label": label,
                     "verdict": "STEERABLE (predicted)" if label == -1 else "UNSTEERABLE (predicted)"}
        verdicts.append(entry)
        print(json.dumps(entry, default=_jsonable))
    out = Path(cfg["out"])
    out.write_text(json.dumps({"verdicts": verdicts}, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return [out]


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "detect": cmd_detect}


def _versions() -> dict:
    import numba
    import scipy

    return {"steerkit": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "backend": _accel.backend()}


def write_manifest(command, cfg, outputs, wall, path) -> None:
    files = {}
    for p in outputs:
        p = Path(p)
        if p.exists():
            files[str(p)] = datasets.file_checksum(p)
    manifest = {"command": command, "config": cfg, "seed": cfg.get("seed"), "versions": _versions(),
                "wall_time_s": wall, "outputs": files, "argv": sys.argv[1:]}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        for key in ("out", "report", "manifest"):
            if cfg.get(key):
                Path(cfg[key]).parent.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        outputs = COMMANDS[args.command](cfg)
        wall = time.perf_counter() - t0
        out = Path(cfg["out"])
        mpath = cfg["manifest"] or out.with_name(out.stem + ".manifest.json")
        write_manifest(args.command, cfg, outputs, wall, mpath)
    except SteerkitError as exc:
        print(f"steerkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"steerkit: InputMissing: {exc}", file=sys.stderr)
        return InputMissing.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
