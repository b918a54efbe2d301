"""Acceptance suite: one test (and one summary line) per criterion.

Run ``pytest -v tests/test_acceptance.py``; the terminal summary lists
``CRITERION n: PASS|FAIL - detail``. Several criteria are compute-heavy
(minutes each); all of them run by default.
"""
import json
import time

import numpy as np
import pytest
from conftest import record

from steerkit import bounds, cli, datasets, families, features, learn, measure, qcore
from steerkit.errors import ClassGenerationFailed
from steerkit.learn import ann, boost
from steerkit.sdp import steering

TOL = steering.DEFAULT_TOL
THRESHOLD = 5 / 12

# every verdict produced by criteria 1 and 2, re-checked in criterion 3
VERDICTS: list = []


def _trial_sets(seed, m, n):
    return [measure.random_spin_measurements(families.item_rng(seed, m, 900, k), m) for k in range(n)]


# 1 -------------------------------------------------------------------------


def test_criterion_01_threshold_soundness():
    etas = np.round(np.arange(0, 0.4001, 0.05), 2)
    steerable = []
    solves = 0
    t0 = time.perf_counter()
    for m in (3, 4):
        for k, ms in enumerate(_trial_sets(1, m, 20)):
            for eta in etas:
                sig = measure.build_assemblage(families.isotropic(float(eta)), ms)
                v = steering.lhs_feasibility(sig, tol=TOL)
                VERDICTS.append((v, sig, m))
                solves += 1
                if v.steerable:
                    steerable.append((m, k, float(eta)))
    ok = not steerable
    record(1, ok, f"{solves} solves (eta 0..0.40, m=3,4, 20 trials), STEERABLE verdicts: {len(steerable)} "
                  f"({time.perf_counter() - t0:.0f}s)")
    assert ok, steerable


# 2 -------------------------------------------------------------------------


def test_criterion_02_detection_power():
    results = {}
    for eta in (0.9, 1.0):
        for seed in range(5):
            rng = families.make_rng(1000 + seed)
            found = None
            for k in range(100):
                sig = measure.build_assemblage(families.isotropic(eta), measure.random_spin_measurements(rng, 3))
                v = steering.lhs_feasibility(sig, tol=TOL)
                VERDICTS.append((v, sig, 3))
                if v.steerable and steering.verify_certificate(v.certificate, sig, steering.enumerate_strategies(3)):
                    found = k + 1
                    break
            results[(eta, seed)] = found
    ok = all(r is not None for r in results.values())
    trials = {f"eta={e},seed={s}": r for (e, s), r in results.items()}
    record(2, ok, f"verified STEERABLE on {sum(r is not None for r in results.values())}/10 (eta, seed) pairs; "
                  f"trials needed: {sorted(set(trials.values()), key=lambda x: (x is None, x))}")
    assert ok, trials


# 3 -------------------------------------------------------------------------


def test_criterion_03_certificate_integrity():
    pool = list(VERDICTS)
    # an independent mixed sample so the criterion also stands alone
    rng = families.make_rng(33)
    for i in range(40):
        rank = (2, 3, 9)[i % 3]
        m = (3, 4)[i % 2]
        rho = families.random_density(rng, rank=rank)
        sig = measure.build_assemblage(rho, measure.random_spin_measurements(rng, m))
        pool.append((steering.lhs_feasibility(sig, tol=TOL), sig, m))
    bad_w, bad_d, n_w, n_d = 0, 0, 0, 0
    max_resid = 0.0
    for v, sig, m in pool:
        table = steering.enumerate_strategies(m)
        if v.steerable:
            n_w += 1
            f = v.certificate.F
            sums = sum(f[x][table.outcome[:, x]] for x in range(m))
            value = float(np.einsum("xaij,xaji->", f, sig).real)
            if not (np.linalg.eigvalsh(sums).min() >= -1e-7 and value < -1e-6):
                bad_w += 1
        else:
            n_d += 1
            s = v.decomposition.sigma_lambda
            recon = np.stack([[s[table.outcome[:, x] == a].sum(0) for a in range(3)] for x in range(m)])
            resid = float(np.max(np.abs(recon - sig)))
            max_resid = max(max_resid, resid)
            if resid > 1e-7 or np.linalg.eigvalsh(s).min() < -1e-7:
                bad_d += 1
    ok = bad_w == 0 and bad_d == 0 and n_w > 0 and n_d > 0
    record(3, ok, f"{n_w} witnesses ({bad_w} failing), {n_d} LHS decompositions ({bad_d} failing), "
                  f"max LHS residual {max_resid:.1e}")
    assert ok


# 4 -------------------------------------------------------------------------


def test_criterion_04_f2_analytic():
    err_iso = 0.0
    for eta in (0.0, 0.3, 0.75, 1.0):
        v = features.extract_f2(families.isotropic(eta)).values
        target = np.r_[np.full(8, 4 * eta**2 / 9), np.zeros(8)]
        err_iso = max(err_iso, float(np.max(np.abs(v - target))))
    rng = families.make_rng(4)
    rho = families.random_density(rng)
    base = features.f2_values(rho)[:8]
    err_lu = 0.0
    for _ in range(100):
        u = np.kron(qcore.haar_unitary(rng), qcore.haar_unitary(rng))
        err_lu = max(err_lu, float(np.max(np.abs(features.f2_values(u @ rho @ u.conj().T)[:8] - base))))
    ok = err_iso <= 1e-8 and err_lu <= 1e-8
    record(4, ok, f"isotropic max error {err_iso:.1e}, local-unitary max deviation {err_lu:.1e} (100 pairs)")
    assert ok


# 5 -------------------------------------------------------------------------


def test_criterion_05_f1_bijective():
    rng = families.make_rng(5)
    err = 0.0
    for i in range(1000):
        rho = families.random_density(rng, rank=1 + i % 9)
        err = max(err, float(np.max(np.abs(features.f1_to_density(features.f1_values(rho)) - rho))))
    ok = err <= 1e-12
    record(5, ok, f"max round-trip error {err:.1e} over 1000 states")
    assert ok


# 6 -------------------------------------------------------------------------

# 25 trials per state at m=3, as the criterion prescribes. The draw budget
# makes this a bounded pilot: its observed yield of certified states decides
# whether 1000 steerable rows are reachable within the one-hour envelope.
C6_TRIALS = 25
C6_MAX_DRAWS = 600


def test_criterion_06_table_bands():
    t0 = time.perf_counter()
    try:
        ds = datasets.gen_random_sdp(3, 1000, 1000, 6, "f1", trials=C6_TRIALS, max_draws=C6_MAX_DRAWS)
    except ClassGenerationFailed as exc:
        record(6, False, f"SDP-labeled random full-rank states at m=3, {C6_TRIALS} trials: {exc} "
                         f"({time.perf_counter() - t0:.0f}s); see the decisions ledger")
        pytest.fail(str(exc))
    assert ds.meta["trials"] == C6_TRIALS
    tr, te = learn.train_test_split(ds.y, 6)
    train, test = ds.subset(tr), ds.subset(te)
    iso = datasets.gen_isotropic_testset(250, 60, "f2")
    svm1, r1 = learn.train_svm(train, seed=6)
    learn.finish_report(svm1, r1, test)
    train2, test2 = train.with_kind("f2", drop_singular=True), test.with_kind("f2", drop_singular=True)
    svm2, r2 = learn.train_svm(train2, seed=6)
    learn.finish_report(svm2, r2, test2, {"isotropic": iso})
    bst, r3 = learn.train_boost(train2, seed=6)
    learn.finish_report(bst, r3, test2, {"isotropic": iso})
    checks = {
        "svm/f1 test >= 0.80": r1.test_accuracy >= 0.80,
        "svm/f2 test >= 0.85": r2.test_accuracy >= 0.85,
        "svm/f2 isotropic >= 0.82": r2.generalization["isotropic"] >= 0.82,
        "boost/f2 isotropic >= 0.85": r3.generalization["isotropic"] >= 0.85,
    }
    wall = time.perf_counter() - t0
    ok = all(checks.values()) and wall < 3600
    record(6, ok, f"{checks}, wall {wall:.0f}s")
    assert ok


# 7 -------------------------------------------------------------------------


def test_criterion_07_accurate_labels():
    t0 = time.perf_counter()
    ds = datasets.gen_accurate(7, 500, "f1", trials=100)
    partial = datasets.gen_partial_testset(250, 70, "f1")
    tr, te = learn.train_test_split(ds.y, 7)
    train, test = ds.subset(tr), ds.subset(te)
    acc = {}
    gen = None
    for fam, trainer in learn.TRAINERS.items():
        model, rep = trainer(train, seed=7)
        learn.finish_report(model, rep, test, {"partial": partial})
        acc[fam] = rep.test_accuracy
        if fam == "ann":
            gen = rep.generalization["partial"]
    ok = all(a >= 0.93 for a in acc.values()) and gen >= 0.90
    record(7, ok, "test accuracy " + ", ".join(f"{k}={v:.3f}" for k, v in acc.items())
           + f"; ANN partially-entangled accuracy {gen:.3f} ({time.perf_counter() - t0:.0f}s)")
    assert ok


# 8 -------------------------------------------------------------------------


def test_criterion_08_ann_gradients():
    worst = 0.0
    for c in range(20):
        rng = np.random.default_rng(800 + c)
        k, h1, h2 = (int(v) for v in rng.integers(2, 12, size=3))
        params = [(W, 0.1 * rng.standard_normal(b.shape)) for W, b in ann.init_params([k, h1, h2, 1], rng)]
        X = rng.standard_normal((10, k))
        t = (rng.random(10) > 0.5).astype(float)
        worst = max(worst, ann.gradient_check(params, X, t))
    ok = worst < 1e-5
    record(8, ok, f"worst per-layer relative error {worst:.1e} over 20 configurations")
    assert ok


# 9 -------------------------------------------------------------------------


def test_criterion_09_boosting_property():
    increases = []
    max_eps = 0.0
    for s in range(10):
        rng = np.random.default_rng(900 + s)
        n, k = 200, 4
        X = rng.standard_normal((n, k))
        w = rng.standard_normal(k)
        y = np.where(X @ w + 0.5 * np.sin(3 * X[:, 0]) + 0.3 * rng.standard_normal(n) > 0, 1, -1)
        _, trace = boost.fit_boost(X, y, "f2", stages=200, max_depth=3)
        err = np.array(trace["train_error"])
        increases.append(int(np.sum(np.diff(err) > 0)))
        max_eps = max(max_eps, max(trace["eps"]))
    ok = all(i == 0 for i in increases) and max_eps < 0.5
    record(9, ok, f"stages with a training-error increase per dataset: {increases}; "
                  f"max accepted weighted error {max_eps:.3f}")
    assert ok


# 10 ------------------------------------------------------------------------

C10_TRIALS = 10


def test_criterion_10_isotropic_sweep(tmp_path):
    t0 = time.perf_counter()
    curves = bounds.sweep_isotropic(None, range(3, 8), 0.01, 3, sdp_trials=C10_TRIALS, seed=10)
    sdp = next(c for c in curves if c.method == "SDP")
    theory = next(c for c in curves if c.method == "THEORY")
    path = tmp_path / "fig9.csv"
    bounds.emit_plot_data(curves, path)
    back = bounds.load_plot_data(path)
    rt = [(c.method, c.grid, c.bounds, c.meta.get("constant")) for c in back] == \
         [(c.method, c.grid, c.bounds, c.meta.get("constant")) for c in curves]
    in_band = all(THRESHOLD - 0.01 <= b < 1.0 for b in sdp.bounds)
    ok = in_band and theory.meta["constant"] == THRESHOLD and rt
    record(10, ok, f"SDP bounds {dict(zip(sdp.grid, sdp.bounds))} ({C10_TRIALS} trials), THEORY "
                   f"{theory.meta['constant']:.6f}, round-trip {rt} ({time.perf_counter() - t0:.0f}s)")
    assert ok


# 11 ------------------------------------------------------------------------


def _run(argv):
    code = cli.main([str(a) for a in argv])
    assert code == 0, argv


def _outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if "manifest" not in p.name}


def test_criterion_11_determinism(tmp_path):
    runs = {}
    for tag, workers in (("a", 1), ("b", 1), ("c", 4)):
        d = tmp_path / tag
        d.mkdir()
        _run(["gen-data", "--source", "random", "--m", 3, "--pos", 5, "--neg", 5, "--rank", 4, "--trials", 10,
              "--seed", 7, "--feature", "f2", "--workers", workers, "--out", d / "rand.csv"])
        _run(["gen-data", "--source", "accurate", "--per-class", 4, "--trials", 25, "--seed", 7, "--feature", "f1",
              "--workers", workers, "--out", d / "acc.csv"])
        _run(["train", "--data", d / "acc.csv", "--model", "svm", "--c-grid", "1,4", "--gamma-grid", "0.25,1",
              "--seed", 3, "--workers", workers, "--out", d / "svm.json"])
        _run(["train", "--data", d / "acc.csv", "--model", "boost", "--stages", 20, "--seed", 3,
              "--workers", workers, "--out", d / "boost.json"])
        _run(["sweep", "--m-range", "3,4", "--sdp-trials", 5, "--seed", 5, "--workers", workers,
              "--out", d / "bounds.csv"])
        runs[tag] = _outputs(d)
    same_runs = runs["a"] == runs["b"]
    same_workers = runs["a"] == runs["c"]
    ok = same_runs and same_workers and len(runs["a"]) >= 10
    record(11, ok, f"{len(runs['a'])} output files; identical across invocations: {same_runs}, "
                   f"across workers 1/4: {same_workers}")
    assert ok
