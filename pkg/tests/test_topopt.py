import numpy as np
import pytest

from rank3cell.homogenize import PeriodicMesh
from rank3cell.laminate import LoadSet, MaterialPair, StressCase
from rank3cell.topopt import (
    DesignProblem, PeriodicFilter, TopOptConfig, heaviside_projection, optimize, starting_guess,
)
from rank3cell.unitcell import ParallelogramCell, build_cell

LOADS = LoadSet([StressCase(1, 0, 0, 0.5), StressCase(0, 1, 0, 0.5)])


def small_config(**kw):
    base = dict(f=0.5, R=0.1, nx=24, ny=24, max_iter=400, beta_interval=25, cap_iterations=25)
    base.update(kw)
    return TopOptConfig(**base)


@pytest.fixture(scope="module")
def small_run():
    cfg = small_config()
    mat = MaterialPair(f=cfg.f)
    return cfg, optimize(starting_guess("random", cfg), LOADS, mat, cfg)


@pytest.mark.parametrize("sheared", [False, True])
def test_filter_properties(rng, triangulated_laminate, sheared):
    cell = build_cell(triangulated_laminate) if sheared else ParallelogramCell.unit_square()
    filt = PeriodicFilter(PeriodicMesh(30, 30, cell), 0.08)
    assert np.allclose(filt(np.full((30, 30), 0.37)), 0.37, atol=1e-14)
    x, y = rng.uniform(0, 1, (2, 30, 30))
    assert filt(x).mean() == pytest.approx(x.mean(), abs=1e-12)
    assert np.sum(filt(x) * y) == pytest.approx(np.sum(x * filt.transpose(y)), rel=1e-12)
    assert np.sum(filt(x) * y) == pytest.approx(np.sum(x * filt(y)), rel=1e-12)


def test_filter_wraps_corner_element():
    filt = PeriodicFilter(PeriodicMesh(20, 20), 0.12)
    x = np.zeros((20, 20))
    x[0, 0] = 1.0
    out = filt(x)
    assert out[0, 0] == out.max()
    assert out[0, 1] == pytest.approx(out[0, -1]) and out[1, 0] == pytest.approx(out[-1, 0])
    assert out[1, 1] == pytest.approx(out[-1, -1]) and out[-1, 1] == pytest.approx(out[1, -1])


def test_projection_values():
    r = np.linspace(0, 1, 11)
    assert np.allclose(heaviside_projection(r, 0.0)[0], r)
    for beta in (1.0, 8.0, 64.0):
        v, d = heaviside_projection(np.array([0.0, 1.0]), beta)
        assert v == pytest.approx([0.0, 1.0], abs=1e-15)
        assert np.all(np.diff(heaviside_projection(r, beta)[0]) >= 0)
    assert heaviside_projection(0.1, 64.0)[0] == pytest.approx(1 - np.exp(-6.4) + 0.1 * np.exp(-64), rel=1e-12)
    assert float(heaviside_projection(0.1, 64.0)[0]) == pytest.approx(0.99834, abs=1e-5)
    h = 1e-7
    for beta in (1.0, 16.0):
        fd = (heaviside_projection(0.3 + h, beta)[0] - heaviside_projection(0.3 - h, beta)[0]) / (2 * h)
        assert fd == pytest.approx(heaviside_projection(0.3, beta)[1], rel=1e-6)
    with pytest.raises(ValueError):
        heaviside_projection(0.5, -1.0)


def test_homogeneous_guess():
    cfg = TopOptConfig(f=0.5, R=0.05, nx=200, ny=200)
    st = starting_guess("homogeneous", cfg)
    c = PeriodicMesh(200, 200).centroids()
    hole = (np.linalg.norm(c - 0.5, axis=1) <= 0.05).reshape(200, 200)
    assert np.all(st.rho[hole] == 0) and np.all(st.rho[~hole] == 0.5)


def test_random_guess_is_seeded_and_bounded():
    cfg = TopOptConfig(f=0.3, R=0.05, nx=50, ny=50, seed=7)
    a, b = starting_guess("random", cfg), starting_guess("random", cfg)
    assert np.array_equal(a.rho, b.rho)
    assert a.rho.min() >= 0 and a.rho.max() <= 0.6
    other = starting_guess("random", TopOptConfig(f=0.3, R=0.05, nx=50, ny=50, seed=8))
    assert not np.array_equal(a.rho, other.rho)


def test_mapped_guess(triangulated_laminate):
    cfg = TopOptConfig(f=0.7, R=0.025, nx=100, ny=100)
    st = starting_guess("mapped", cfg, triangulated_laminate)
    assert np.mean(st.rho) == pytest.approx(0.7, abs=2e-3)
    with pytest.raises(ValueError):
        starting_guess("mapped", cfg)
    with pytest.raises(ValueError):
        starting_guess("checkerboard", cfg)


def test_config_validation():
    for bad in (dict(f=1.0), dict(max_iter=0), dict(R=0.005, nx=100, ny=100)):
        with pytest.raises(ValueError):
            TopOptConfig(**bad)


@pytest.mark.parametrize("beta", [1.0, 8.0])
def test_chain_rule_gradient(rng, triangulated_laminate, beta):
    cfg = TopOptConfig(f=0.5, R=0.08, nx=20, ny=20)
    mat = MaterialPair(f=0.5)
    loads = LoadSet([StressCase(1, 0, 0.2, 0.6), StressCase(-0.3, 1, 0, 0.4)])
    problem = DesignProblem(build_cell(triangulated_laminate), loads, mat, cfg)
    rho = rng.uniform(0.1, 0.9, (20, 20))
    obj, grad, vol, dvol, _, _ = problem.evaluate(rho, beta)
    h = 1e-6
    for k in rng.choice(rho.size, 20, replace=False):
        up, dn = rho.copy(), rho.copy()
        up.flat[k] += h
        dn.flat[k] -= h
        fd = (problem.evaluate(up, beta)[0] - problem.evaluate(dn, beta)[0]) / (2 * h)
        assert fd == pytest.approx(grad.flat[k], rel=1e-4)
        fdv = (problem.volume(up, beta) - problem.volume(dn, beta)) / (2 * h)
        assert fdv == pytest.approx(dvol.flat[k], rel=1e-5, abs=1e-12)


def test_small_run_reaches_cap_and_volume(small_run):
    cfg, final = small_run
    h = final.history
    assert final.beta == cfg.beta_cap
    assert final.volume <= cfg.f + 1e-3
    assert final.objective == h[-1].objective
    assert len(h) < cfg.max_iter and h[-1].change < cfg.conv_tol


def test_small_run_is_mostly_monotone(small_run):
    _, final = small_run
    h = final.history
    steps = [(a, b) for a, b in zip(h, h[1:]) if a.beta == b.beta]
    ok = sum(b.objective <= a.objective * (1 + 1e-9) for a, b in steps)
    assert ok >= 0.9 * len(steps)


def test_converged_design_is_a_fixed_point(small_run):
    cfg, final = small_run
    restart = starting_guess("random", cfg)
    restart.rho, restart.beta = final.rho.copy(), cfg.beta_cap
    again = optimize(restart, LOADS, MaterialPair(f=cfg.f), cfg)
    assert len(again.history) <= cfg.cap_iterations + 5
    assert again.history[-1].change < cfg.conv_tol
    assert again.objective == pytest.approx(final.objective, rel=0.02)


def test_runs_are_deterministic():
    cfg = small_config(max_iter=40)
    mat = MaterialPair(f=cfg.f)
    a = optimize(starting_guess("random", cfg), LOADS, mat, cfg)
    b = optimize(starting_guess("random", cfg), LOADS, mat, cfg)
    assert np.allclose([r.objective for r in a.history], [r.objective for r in b.history], rtol=1e-12, atol=0)
