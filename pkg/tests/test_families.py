from fractions import Fraction

import numpy as np
import pytest

from steerkit import families, qcore
from steerkit.errors import ParamOutOfRange


def test_isotropic_threshold_is_five_twelfths():
    assert families.isotropic_threshold() == float(Fraction(5, 12))


@pytest.mark.parametrize("eta", [0.0, 0.3, 5 / 12, 1.0])
def test_isotropic_valid(eta):
    rho = qcore.check_density(families.isotropic(eta))
    overlap = families.PSI_PLUS.conj() @ rho @ families.PSI_PLUS
    assert overlap.real == pytest.approx(eta + (1 - eta) / 9)


def test_isotropic_range():
    with pytest.raises(ParamOutOfRange):
        families.isotropic(1.1)


@pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.9, 1.0])
def test_werner(p):
    rho = qcore.check_density(families.werner(p))
    # weight on the antisymmetric subspace
    assert np.trace(families.ANTISYM_PROJ @ rho).real == pytest.approx(p)
    # invariant under U x U
    u = qcore.haar_unitary(families.make_rng(1))
    uu = np.kron(u, u)
    np.testing.assert_allclose(uu @ rho @ uu.conj().T, rho, atol=1e-13)
    # PPT iff p <= 1/2 (Werner separability criterion)
    ppt = np.linalg.eigvalsh(qcore.partial_transpose_b(rho))[0] >= -1e-12
    assert ppt == (p <= 0.5)


@pytest.mark.parametrize("rank", [1, 2, 4, 9])
def test_random_density_rank(rng, rank):
    rho = qcore.check_density(families.random_density(rng, rank=rank))
    w = np.linalg.eigvalsh(rho)
    assert np.sum(w > 1e-12) == rank


def test_random_density_bad_rank(rng):
    with pytest.raises(ParamOutOfRange):
        families.random_density(rng, rank=10)


def test_item_rng_independent_of_order():
    a = families.item_rng(7, 3).standard_normal(4)
    families.item_rng(7, 2).standard_normal(10)
    b = families.item_rng(7, 3).standard_normal(4)
    c = families.item_rng(7, 3, 1).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_pure_and_product(rng):
    ent = families.pure_entangled(rng)
    ra = qcore.partial_trace_b(ent)
    assert np.trace(ra @ ra).real < 1 - 1e-8
    prod = families.product_pure(rng)
    rb = qcore.partial_trace_b(prod)
    assert np.trace(rb @ rb).real == pytest.approx(1.0)


def test_separable_mixed_is_ppt(rng):
    rho = qcore.check_density(families.separable_mixed(rng, 10))
    assert np.linalg.eigvalsh(qcore.partial_transpose_b(rho))[0] > -1e-12


def test_partial_entangled():
    t, f = np.pi / 4, np.arccos(1 / np.sqrt(3))
    rho = families.partial_entangled(families.PartialEntParam(1.0, t, f))
    np.testing.assert_allclose(rho, families.isotropic(1.0), atol=1e-12)
    rho = families.partial_entangled(families.PartialEntParam(0.3, 0.2, 0.7))
    qcore.check_density(rho)
    # the noise term keeps Alice's marginal
    psi = families.projector(families.partial_entangled_vector(0.2, 0.7))
    np.testing.assert_allclose(qcore.partial_trace_b(rho), qcore.partial_trace_b(psi), atol=1e-13)
    with pytest.raises(ParamOutOfRange):
        families.PartialEntParam(0.5, 1.0, 0.2)
