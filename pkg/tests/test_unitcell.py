import numpy as np
import pytest

from rank3cell.reconstruct import Rank3Laminate
from rank3cell.unitcell import (
    DegenerateGeometryError, DensityField, ParallelogramCell, build_cell, layer_spacings, map_laminate,
    measure_volume, project_density, sample_density, width_bisection,
)


def test_hexagonal_spacings():
    l1, l2, l3, area = layer_spacings([np.pi / 3, -np.pi / 3, 0.0])
    assert np.allclose([l1, l2, l3], 1.0) and area == pytest.approx(2 / np.sqrt(3))


def test_triangulated_spacings_and_swap():
    theta = [np.pi / 3, -np.pi / 6, np.pi / 6]
    l1, l2, _, area = layer_spacings(theta)
    assert l1 == pytest.approx(0.5 * (1 / np.sqrt(3) + np.sqrt(3)))
    s1, s2, _, sarea = layer_spacings([theta[1], theta[0], theta[2]])
    assert (s1, s2, sarea) == pytest.approx((l2, l1, area))


def test_parallel_layers_rejected():
    with pytest.raises(DegenerateGeometryError):
        layer_spacings([0.3, 0.3 + 1e-6, 1.0])


def _check_cell(cell):
    assert cell.area == pytest.approx(1.0, abs=1e-12)
    k = cell.crossing_numbers()
    assert np.allclose(k, np.rint(k), atol=1e-9)


def test_hexagonal_cell_has_one_line_per_family():
    cell = build_cell(Rank3Laminate.from_layers([1 / 3] * 3, [np.pi / 3, -np.pi / 3, 0.0], 0.5))
    _check_cell(cell)
    assert cell.lines_per_cell() == [1, 1, 1]


def test_rank1_and_rank2_cells():
    one = build_cell(Rank3Laminate.from_layers([1, 0, 0], [0, 0, 0], 0.5))
    _check_cell(one)
    assert one.lambda_tilde == pytest.approx([1.0])
    two = build_cell(Rank3Laminate.from_layers([0.5, 0.5, 0], [0, np.pi / 2, 0], 0.5))
    _check_cell(two)
    assert two.lambda_tilde == pytest.approx([1.0, 1.0])
    assert abs(abs(np.dot(two.a1, two.a2))) < 1e-12


def test_random_cells_are_periodic(rng):
    for _ in range(50):
        p = rng.dirichlet(np.ones(3))
        lam = Rank3Laminate.from_layers(p, rng.uniform(-np.pi / 2, np.pi / 2, 3), 0.5)
        try:
            cells = build_cell(lam), build_cell(lam, reduce=False)
        except DegenerateGeometryError:
            continue
        for cell in cells:
            _check_cell(cell)


def test_field_is_periodic(triangulated_laminate):
    cell = build_cell(triangulated_laminate)
    _, w, _ = width_bisection(triangulated_laminate, cell, quad=256)
    rng = np.random.default_rng(0)
    u, v = rng.uniform(0, 1, (2, 500))
    base = sample_density(cell, w, u, v)
    assert np.array_equal(base, sample_density(cell, w, u + 1, v))
    assert np.array_equal(base, sample_density(cell, w, u, v + 1))


def test_single_layer_bisection():
    lam = Rank3Laminate.from_layers([0, 0, 1], [0, 0, 0.4], 0.3)
    cell = build_cell(lam)
    psi, w, vol = width_bisection(lam, cell)
    assert psi == pytest.approx(0.3, abs=2e-4) and vol == pytest.approx(0.3, abs=1e-4)


def test_bisection_hits_fraction(triangulated_laminate):
    cell = build_cell(triangulated_laminate)
    psi, w, vol = width_bisection(triangulated_laminate, cell)
    assert psi >= triangulated_laminate.f
    assert vol == pytest.approx(0.7, abs=1e-4)
    # independent check at a finer sampling
    g = (np.arange(2048) + 0.5) / 2048
    u, v = np.meshgrid(g, g)
    assert sample_density(cell, w, u, v).mean() == pytest.approx(0.7, abs=5e-4)


def test_volume_monotone_in_psi(triangulated_laminate):
    cell = build_cell(triangulated_laminate)
    g = (np.arange(256) + 0.5) / 256
    u, v = np.meshgrid(g, g)
    vols = [sample_density(cell, np.minimum(psi * cell.weights, 1), u, v).mean() for psi in np.linspace(0, 2, 30)]
    assert np.all(np.diff(vols) >= 0)


def test_projection_extremes(triangulated_laminate):
    cell = build_cell(triangulated_laminate)
    assert np.all(project_density(cell, np.zeros(3), 20, 20).rho == 0)
    assert np.all(project_density(cell, np.array([0.1, 1.0, 0.2]), 20, 20).rho == 1)


def test_projected_reference_field(triangulated_laminate):
    cell, _, _, fld = map_laminate(triangulated_laminate, 200, 200)
    assert fld.rho.shape == (200, 200)
    assert measure_volume(fld) == pytest.approx(0.7, abs=2e-3)
    assert len(cell.weights) == 3


def test_mesh_convergence_of_volume(triangulated_laminate):
    cell = build_cell(triangulated_laminate)
    _, w, vol = width_bisection(triangulated_laminate, cell)
    errs = [abs(project_density(cell, w, n, n, 1).volume - vol) for n in (50, 100, 200, 400)]
    assert errs[-1] < 5e-3 and errs[-1] <= errs[0]


def test_density_field_validation():
    with pytest.raises(ValueError):
        DensityField(np.full((3, 3), 1.5))
    with pytest.raises(ValueError):
        DensityField(np.zeros(4))
    assert DensityField(np.full((4, 4), 0.5)).volume == 0.5
    assert ParallelogramCell.unit_square().area == 1.0
