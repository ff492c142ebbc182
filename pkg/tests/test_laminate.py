import numpy as np
import pytest

from rank3cell.laminate import (
    DegenerateLaminateError, LoadSet, MaterialPair, MomentVector, StressCase, complementary_energy,
    effective_compliance, from_xi_coords, isotropic_compliance, layer_moment_matrix, moment_feasibility,
    moment_matrix, to_xi_coords, toeplitz_determinant,
)

from conftest import random_layers

S2 = np.sqrt(2.0)


@pytest.mark.parametrize("sigma, expected", [
    (StressCase(1, 1, 0), (0, 0, S2)),
    (StressCase(-1, 1, 0), (-S2, 0, 0)),
    (StressCase(0, 0, 1), (0, S2, 0)),
])
def test_xi_coordinates(sigma, expected):
    assert np.allclose(to_xi_coords(sigma), expected, atol=1e-15)


def test_xi_is_an_isometry_and_invertible(rng):
    s = rng.normal(size=(50, 3))
    x = to_xi_coords(s)
    frob = s[:, 0] ** 2 + s[:, 1] ** 2 + 2 * s[:, 2] ** 2
    assert np.allclose(np.sum(x ** 2, axis=1), frob, atol=1e-14)
    assert np.allclose(from_xi_coords(x), s, atol=1e-14)


def test_isotropic_compliance_values():
    # nu = 0: shear modulus and bulk modulus are both 1/2, so every entry is 1/(2 * 1/2)
    assert np.allclose(isotropic_compliance(1.0, 0.0), np.eye(3))
    assert np.allclose(isotropic_compliance(1.0, 0.3), np.diag([1.3, 1.3, 0.7]))
    with pytest.raises(ValueError):
        isotropic_compliance(0.0, 0.3)


def test_material_defaults_and_validation():
    m = MaterialPair()
    assert m.e_minus == pytest.approx(1e-9)
    for bad in (dict(e_plus=-1), dict(nu=0.5), dict(f=0.0), dict(f=1.2)):
        with pytest.raises(ValueError):
            MaterialPair(**bad)


def test_loadset_normalizes_weights():
    loads = LoadSet([StressCase(1, 0, 0, 2.0), StressCase(0, 1, 0, 6.0)])
    assert np.allclose(loads.weights, [0.25, 0.75])
    with pytest.raises(ValueError):
        LoadSet([StressCase(1, 0, 0, 0.3)], normalize=False)
    with pytest.raises(ValueError):
        LoadSet([])


def test_moment_matrix_examples():
    assert np.allclose(moment_matrix(MomentVector(0, 0, 0, 0)), 0.25 * np.diag([1, 1, 2]))
    assert np.allclose(moment_matrix(MomentVector(1, 0, 1, 0)),
                       0.25 * np.array([[2, 0, -2], [0, 0, 0], [-2, 0, 2]]))


def test_moment_matrix_matches_dyadic_assembly(rng, triangulated_laminate):
    lam = triangulated_laminate
    assert np.allclose(moment_matrix(lam.moments), layer_moment_matrix(lam.p, lam.theta), atol=1e-12)
    for _ in range(50):
        p, th = random_layers(rng)
        assert np.allclose(moment_matrix(MomentVector.from_layers(p, th)), layer_moment_matrix(p, th),
                           atol=1e-12)


def test_feasibility_residuals():
    assert np.allclose(moment_feasibility((0, 0, 0, 0)), [-1, -1, -1])
    assert np.allclose(moment_feasibility((1, 0, 1, 0)), [0, 0, 0], atol=1e-15)
    assert np.allclose(moment_feasibility((0.9, 0, 0, 0)), [-0.19, -1, 0.62])
    for corner in [(1, 0, 1, 0), (-1, 0, 1, 0), (0, 1, -1, 0), (0, -1, -1, 0)]:
        assert MomentVector(*corner).is_feasible(1e-12)


def test_layer_moments_are_feasible(rng):
    for _ in range(200):
        m = MomentVector.from_layers(*random_layers(rng))
        assert m.is_feasible(1e-10)
        assert toeplitz_determinant(m.as_array()) >= -1e-12


def test_effective_compliance_limits(mat):
    m = MomentVector(0.2, -0.1, 0.3, 0.1)
    full = mat.with_fraction(1.0)
    assert np.array_equal(effective_compliance(m, full), full.compliance_plus)
    ch = effective_compliance(m, mat)
    assert np.allclose(ch, ch.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(ch - mat.compliance_plus)) >= -1e-12


def test_rank1_energy_along_layers(mat):
    # stiff layers along x (normal angle pi/2) under s11 = 1 carry the load in parallel
    m = MomentVector.from_layers([1.0], [np.pi / 2])
    loads = LoadSet([StressCase(1, 0, 0)])
    assert complementary_energy(m, loads, mat) == pytest.approx(0.5 / mat.f, rel=1e-6)


def test_energy_examples(mat):
    loads = LoadSet([StressCase(1, 1, 0)])
    assert complementary_energy((0, 0, 0, 0), loads, mat.with_fraction(1.0)) == pytest.approx(0.7)
    zero = LoadSet([StressCase(0, 0, 0)])
    assert complementary_energy((0.1, 0, 0, 0), zero, mat) == 0.0
    m = (0.3, 0.1, -0.2, 0.05)
    assert complementary_energy(m, loads.scaled(2.0), mat) == pytest.approx(4 * complementary_energy(m, loads, mat))


def test_energy_non_increasing_in_fraction(rng):
    loads = LoadSet([StressCase(1, 0, 0.3, 1), StressCase(-0.2, 1, 0, 2)])
    for _ in range(10):
        m = MomentVector.from_layers(*random_layers(rng, 3))
        e = [complementary_energy(m, loads, MaterialPair(f=f)) for f in np.linspace(0.05, 1.0, 20)]
        assert np.all(np.diff(e) <= 1e-12)


def test_singular_inner_matrix_detected():
    mat = MaterialPair(e_plus=1.0, e_minus=1.0, f=0.5)
    with pytest.raises(DegenerateLaminateError):
        effective_compliance((0, 0, 0, 0), mat)
