import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerkit import families, features, qcore
from steerkit.errors import FilterSingular


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_f1_round_trip(seed, rank):
    rho = families.random_density(families.make_rng(seed), rank=rank)
    fv = features.extract_f1(rho)
    assert fv.values.shape == (80,)
    np.testing.assert_allclose(features.f1_to_density(fv.values), rho, atol=1e-12)


def test_f1_layout():
    rho = np.zeros((9, 9), dtype=complex)
    rho[np.arange(9), np.arange(9)] = np.arange(1, 10) / 45
    rho[1, 0] = 0.01 + 0.02j
    rho[0, 1] = np.conj(rho[1, 0])
    v = features.f1_values(rho)
    np.testing.assert_allclose(v[:8], np.arange(1, 9) / 45)
    assert v[8] == pytest.approx(0.01) and v[9] == pytest.approx(0.02)


@pytest.mark.parametrize("eta", [0.0, 0.3, 0.75, 1.0])
def test_f2_isotropic(eta):
    v = features.extract_f2(families.isotropic(eta)).values
    np.testing.assert_allclose(v[:8], 4 * eta**2 / 9, atol=1e-8)
    np.testing.assert_allclose(v[8:], 0, atol=1e-8)


def test_f2_local_unitary_invariance(rng):
    rho = families.random_density(rng)
    base = features.f2_values(rho)[:8]
    for _ in range(10):
        u = np.kron(qcore.haar_unitary(rng), qcore.haar_unitary(rng))
        np.testing.assert_allclose(features.f2_values(u @ rho @ u.conj().T)[:8], base, atol=1e-8)


def test_f2_rotation_diagonalises(rng):
    parts = features.f2_parts(families.random_density(rng))
    t = parts["bloch"].T
    np.testing.assert_allclose(parts["o1"].T @ t @ parts["o2"], np.diag(parts["s"]), atol=1e-12)
    # the rotated Alice vector has the norm of the original
    assert np.linalg.norm(parts["a_rot"]) == pytest.approx(np.linalg.norm(parts["bloch"].a))


def test_filter_flattens_bob(rng):
    filt = features.filter_bob(families.random_density(rng))
    np.testing.assert_allclose(qcore.partial_trace_a(filt), np.eye(3) / 3, atol=1e-12)


def test_filter_singular():
    rho = families.projector(np.kron([1, 0, 0], [1, 0, 0]))
    with pytest.raises(FilterSingular):
        features.extract_f2(rho)


def test_feature_vector_validation():
    with pytest.raises(ValueError):
        features.FeatureVector("f2", np.zeros(15))
    with pytest.raises(ValueError):
        features.FeatureVector("f3", np.zeros(16))
    with pytest.raises(ValueError):
        features.FeatureVector("f2", np.full(16, np.nan))
