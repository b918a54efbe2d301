import numpy as np
import pytest

from steerkit import families, measure
from steerkit.errors import SolverStalled, TooManySettings
from steerkit.sdp import _kernels, ipm, steering

cp = pytest.importorskip("cvxpy")


def _oracle_margin(sig):
    """Independent cvxpy model of the LHS margin: max t s.t. sigma_lam >= t I/(3N)."""
    m = sig.shape[0]
    tab = steering.enumerate_strategies(m)
    n = tab.n
    X = [cp.Variable((3, 3), hermitian=True) for _ in range(n)]
    t = cp.Variable()
    cons = [X[l] - t * np.eye(3) / (3 * n) >> 0 for l in range(n)]
    for x in range(m):
        # one outcome per setting is implied by normalisation and no-signalling
        for a in range(3) if x == 0 else range(2):
            cons.append(sum(X[l] for l in range(n) if tab.outcome[l, x] == a) == sig[x, a])
    cp.Problem(cp.Maximize(t), cons).solve(solver="CLARABEL")
    return float(t.value)


def _oracle_weight(sig):
    m = sig.shape[0]
    tab = steering.enumerate_strategies(m)
    X = [cp.Variable((3, 3), hermitian=True) for _ in range(tab.n)]
    cons = [x >> 0 for x in X]
    for x in range(m):
        for a in range(3):
            cons.append(sig[x, a] - sum(X[l] for l in range(tab.n) if tab.outcome[l, x] == a) >> 0)
    p = cp.Problem(cp.Maximize(cp.real(sum(cp.trace(x) for x in X))), cons)
    p.solve(solver="CLARABEL")
    return 1.0 - float(p.value)


def test_strategy_table():
    tab = steering.enumerate_strategies(3)
    assert tab.n == 27
    assert len({tuple(r) for r in tab.outcome}) == 27
    assert np.all(tab.rows == tab.outcome + 3 * np.arange(3))
    with pytest.raises(TooManySettings):
        steering.enumerate_strategies(steering.MAX_SETTINGS + 1)


@pytest.mark.parametrize("seed,m,rank", [(1, 2, 9), (2, 3, 9), (3, 3, 2), (4, 4, 3)])
def test_lhs_margin_matches_oracle(seed, m, rank):
    rng = families.make_rng(seed)
    rho = families.random_density(rng, rank=rank)
    sig = measure.build_assemblage(rho, measure.random_spin_measurements(rng, m))
    v = steering.lhs_feasibility(sig, early_stop=False)
    assert v.stats["t_upper"] == pytest.approx(_oracle_margin(sig), abs=1e-6)


@pytest.mark.parametrize("rho_fn", [lambda: families.isotropic(1.0), lambda: families.isotropic(0.3),
                                    lambda: families.partial_entangled(families.PartialEntParam(0.7, 0.3, 1.0))])
def test_steering_weight_matches_oracle(rho_fn):
    sig = measure.build_assemblage(rho_fn(), measure.mub_measurements()[:3])
    assert steering.steering_weight(sig) == pytest.approx(_oracle_weight(sig), abs=1e-6)


def test_steerable_certificate_verifies():
    rng = families.make_rng(0)
    sig = measure.build_assemblage(families.isotropic(1.0), measure.random_spin_measurements(rng, 3))
    v = steering.lhs_feasibility(sig)
    assert v.kind == steering.STEERABLE
    tab = steering.enumerate_strategies(3)
    assert steering.verify_certificate(v.certificate, sig, tab)
    # a tampered witness is rejected
    bad = steering.DualCertificate(F=v.certificate.F.copy(), value=v.certificate.value)
    bad.F[0, 0] -= 0.5 * np.eye(3)
    assert not steering.verify_certificate(bad, sig, tab)
    # the witness is not a witness for an unsteerable assemblage
    sig0 = measure.build_assemblage(families.isotropic(0.2), measure.random_spin_measurements(rng, 3))
    assert not steering.verify_certificate(v.certificate, sig0, tab)


def test_lhs_decomposition_verifies(rng):
    sig = measure.build_assemblage(families.isotropic(0.35), measure.random_spin_measurements(rng, 4))
    v = steering.lhs_feasibility(sig)
    assert v.kind == steering.NO_CERTIFICATE
    assert v.decomposition.margin > 0
    assert steering.verify_certificate(v.decomposition, sig, steering.enumerate_strategies(4))


def test_separable_werner_never_certified(rng):
    for _ in range(5):
        sig = measure.build_assemblage(families.werner(0.5), measure.random_spin_measurements(rng, 5))
        assert not steering.lhs_feasibility(sig).steerable


def test_sdp_label_and_log(rng, tmp_path):
    path = tmp_path / "log.jsonl"
    with open(path, "w") as fh:
        res = steering.sdp_label(families.isotropic(0.95), 3, 20, rng, log_file=fh, seed_tag=1)
    assert res.label == -1 and res.verdict.steerable
    assert len(path.read_text().splitlines()) == res.trials_run


def test_sdp_label_deterministic_with_measurement_callable():
    def draw(k):
        return measure.random_spin_measurements(families.item_rng(3, k), 3)

    a = steering.sdp_label(families.isotropic(0.6), 3, 5, None, measurements=draw)
    b = steering.sdp_label(families.isotropic(0.6), 3, 5, None, measurements=draw)
    assert (a.label, a.trials_run, a.value) == (b.label, b.trials_run, b.value)


def test_max_entangled_mub_weight_reference():
    # four-MUB steering weight of the partially entangled family switches on near p = 0.4818
    t, f = np.pi / 4, np.arccos(1 / np.sqrt(3))
    ms = measure.mub_measurements()
    lo = measure.build_assemblage(families.partial_entangled(families.PartialEntParam(0.48, t, f)), ms)
    hi = measure.build_assemblage(families.partial_entangled(families.PartialEntParam(0.49, t, f)), ms)
    assert steering.steering_weight(lo) < 1e-6
    assert steering.steering_weight(hi) > 1e-3


def test_marginal_gram_backends_agree(rng):
    tab = steering.enumerate_strategies(4)
    g = rng.standard_normal((tab.n, 9, 9))
    a = _kernels.marginal_gram(tab.rows, g, 12, use_numba=True)
    b = _kernels.marginal_gram(tab.rows, g, 12, use_numba=False)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_scaling_gram_matches_definition(rng):
    h = rng.standard_normal((2, 3, 3)) + 1j * rng.standard_normal((2, 3, 3))
    w = h @ np.conj(np.swapaxes(h, 1, 2))
    g = ipm.scaling_gram(w)
    from steerkit.qcore import HERM_BASIS
    ref = np.einsum("kab,nbc,lcd,nda->nkl", HERM_BASIS, w, HERM_BASIS, w).real
    np.testing.assert_allclose(g, ref, atol=1e-12)


def test_stalled_solve_raises(monkeypatch):
    sig = measure.build_assemblage(families.isotropic(0.5), measure.mub_measurements()[:3])
    monkeypatch.setattr(steering, "verify_certificate", lambda *a, **k: False)
    with pytest.raises(SolverStalled):
        steering.lhs_feasibility(sig)
