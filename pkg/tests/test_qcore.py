import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerkit import families, qcore
from steerkit.errors import InvalidState, NearSingular, NonHermitian


def test_gell_mann_orthonormal():
    g = qcore.GELL_MANN[1:]
    gram = np.einsum("iab,jba->ij", g, g).real
    np.testing.assert_allclose(gram, 2 * np.eye(8), atol=1e-14)
    assert np.allclose(np.trace(g, axis1=1, axis2=2), 0)
    for m in g:
        assert qcore.is_hermitian(m)
    np.testing.assert_allclose(qcore.GELL_MANN[0], np.eye(3))


def test_herm_basis_round_trip(rng):
    h = rng.standard_normal((5, 3, 3)) + 1j * rng.standard_normal((5, 3, 3))
    h = h + np.conj(np.swapaxes(h, 1, 2))
    np.testing.assert_allclose(qcore.vec_to_herm(qcore.herm_to_vec(h)), h, atol=1e-13)


def test_partial_traces_against_kron(rng):
    a = families.random_density(rng, dim=3)
    b = families.random_density(rng, dim=3)
    rho = np.kron(a, b)
    np.testing.assert_allclose(qcore.partial_trace_b(rho), a, atol=1e-14)
    np.testing.assert_allclose(qcore.partial_trace_a(rho), b, atol=1e-14)
    np.testing.assert_allclose(qcore.swap_parties(rho), np.kron(b, a), atol=1e-14)
    np.testing.assert_allclose(qcore.partial_transpose_b(rho), np.kron(a, b.T), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_bloch_round_trip(seed, rank):
    rho = families.random_density(families.make_rng(seed), rank=rank)
    rep = qcore.bloch_decompose(rho)
    np.testing.assert_allclose(rep.reconstruct(), rho, atol=1e-13)
    assert rep.phi[0, 0] == 1.0


def test_bloch_of_maximally_mixed_is_zero():
    rep = qcore.bloch_decompose(np.eye(9) / 9)
    assert np.allclose(rep.a, 0) and np.allclose(rep.b, 0) and np.allclose(rep.T, 0)


def test_check_density_rejects():
    with pytest.raises(InvalidState):
        qcore.check_density(np.eye(9))
    with pytest.raises(InvalidState):
        qcore.check_density(np.diag([1.5, -0.5, 0, 0, 0, 0, 0, 0, 0]))
    bad = np.eye(9, dtype=complex) / 9
    bad[0, 1] = 0.01
    with pytest.raises(InvalidState):
        qcore.check_density(bad)
    qcore.check_density(np.eye(9) / 9)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitian):
        qcore.hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_inv_sqrt_psd(rng):
    rho = families.random_density(rng, dim=3)
    x = qcore.inv_sqrt_psd(rho)
    np.testing.assert_allclose(x @ rho @ x, np.eye(3), atol=1e-10)
    with pytest.raises(NearSingular):
        qcore.inv_sqrt_psd(np.diag([0.5, 0.5, 0.0]))


def test_svd_real_sign_convention(rng):
    a = rng.standard_normal((8, 8))
    o1, s, o2 = qcore.svd_real(a)
    np.testing.assert_allclose(o1 @ np.diag(s) @ o2.T, a, atol=1e-12)
    assert np.all(np.diff(s) <= 0)
    lead = np.argmax(np.abs(o1), axis=0)
    assert np.all(o1[lead, np.arange(8)] > 0)
    # flipping the input sign flips o1 columns back to the same convention
    o1b, _, o2b = qcore.svd_real(-a)
    np.testing.assert_allclose(o1b, o1, atol=1e-12)
    np.testing.assert_allclose(o2b, -o2, atol=1e-12)


def test_haar_unitary(rng):
    u = qcore.haar_unitary(rng)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(3), atol=1e-13)
