import numpy as np
import pytest

from rank3cell.laminate import LoadSet, MaterialPair, MomentVector, StressCase, complementary_energy
from rank3cell.moments import _EnergyModel, grid_search_oracle, optimize_moments
from rank3cell.reconstruct import rotate_moments

from conftest import random_layers


def random_loads(rng, n=None):
    n = n or int(rng.integers(1, 5))
    return LoadSet([StressCase(*rng.normal(size=3), rng.uniform(0.1, 1.0)) for _ in range(n)])


def test_uniaxial_load_gives_aligned_rank1(mat):
    # normal angles: layers along x have normal pi/2, i.e. m = (-1, 0, 1, 0)
    sol = optimize_moments(LoadSet([StressCase(1, 0, 0)]), mat)
    assert np.allclose(sol.m.as_array(), [-1, 0, 1, 0], atol=1e-4)
    assert sol.energy == pytest.approx(0.5 / mat.f, rel=1e-4)
    assert grid_search_oracle(LoadSet([StressCase(1, 0, 0)]), mat, 0.5).m.as_array() == pytest.approx([-1, 0, 1, 0])


def test_hydrostatic_load_is_symmetric(mat):
    sol = optimize_moments(LoadSet([StressCase(1, 1, 0)]), mat)
    assert abs(sol.m.m1) < 1e-6 and abs(sol.m.m2) < 1e-6


def test_zero_loads_return_origin(mat):
    sol = optimize_moments(LoadSet([StressCase(0, 0, 0)]), mat)
    assert sol.converged and sol.energy == 0.0 and np.all(sol.m.as_array() == 0)


def test_solution_invariants(rng, mat):
    probes = [(1, 0, 1, 0), (-1, 0, 1, 0), (0, 1, -1, 0), (0, -1, -1, 0), (0, 0, 0, 0)]
    for _ in range(10):
        loads = random_loads(rng)
        sol = optimize_moments(loads, mat)
        assert sol.converged
        assert sol.m.is_feasible(1e-8)
        assert sol.energy == pytest.approx(complementary_energy(sol.m, loads, mat), rel=1e-12)
        for q in probes:
            assert sol.energy <= complementary_energy(q, loads, mat) + 1e-12


def test_rotating_loads_rotates_moments(rng, mat):
    loads = random_loads(rng, 3)
    phi = 0.37
    a = optimize_moments(loads, mat)
    b = optimize_moments(loads.rotated(phi), mat)
    assert b.energy == pytest.approx(a.energy, rel=1e-8)
    # a frame rotated by phi shifts every normal angle by phi, i.e. rotate_moments by phi
    rm = rotate_moments(a.m, phi, check=False)
    expected = [rm.mt1, rm.mt2, rm.mt3, rm.mt4]
    assert np.allclose(b.m.as_array(), expected, atol=1e-4)


def test_weight_scaling_leaves_argmin(rng, mat):
    loads = random_loads(rng, 3)
    scaled = LoadSet([StressCase(c.s11, c.s22, c.s12, 7.0 * c.weight) for c in loads])
    assert np.allclose(optimize_moments(loads, mat).m.as_array(), optimize_moments(scaled, mat).m.as_array(),
                       atol=1e-6)


def test_energy_is_convex_in_moments(rng, mat):
    loads = random_loads(rng, 3)
    for _ in range(100):
        ma = MomentVector.from_layers(*random_layers(rng)).as_array()
        mb = MomentVector.from_layers(*random_layers(rng)).as_array()
        mid = complementary_energy(0.5 * (ma + mb), loads, mat)
        assert mid <= 0.5 * complementary_energy(ma, loads, mat) + 0.5 * complementary_energy(mb, loads, mat) + 1e-10


def test_analytic_gradient_matches_finite_differences(rng, mat):
    loads = random_loads(rng, 3)
    model = _EnergyModel(loads, mat)
    m = MomentVector.from_layers(*random_layers(rng, 4)).as_array() * 0.8
    _, g, H = model.derivatives(m)
    h = 1e-6
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        fd = (model.value(m + e) - model.value(m - e)) / (2 * h)
        assert fd == pytest.approx(g[k], rel=1e-6, abs=1e-10)
        gd = (model.derivatives(m + e)[1] - model.derivatives(m - e)[1]) / (2 * h)
        assert np.allclose(gd, H[k], rtol=1e-5, atol=1e-8)


def test_oracle_refinement_is_monotone(rng, mat):
    loads = random_loads(rng, 2)
    coarse = grid_search_oracle(loads, mat, 0.05)
    fine = grid_search_oracle(loads, mat, 0.025)
    assert fine.energy <= coarse.energy + 1e-15
    with pytest.raises(ValueError):
        grid_search_oracle(loads, mat, 1e-4)


@pytest.mark.parametrize("f", [0.2, 0.5])
def test_optimizer_beats_coarse_lattice(rng, f):
    mat = MaterialPair(f=f)
    for _ in range(5):
        loads = random_loads(rng)
        sol = optimize_moments(loads, mat)
        assert sol.energy <= grid_search_oracle(loads, mat, 0.02).energy + 1e-12
