import numpy as np
import pytest

from rank3cell.mma import MMAOptions, MMAState, mma_update


def test_one_variable_quadratic():
    state = MMAState(1)
    x = np.array([0.8])
    for _ in range(50):
        x = mma_update(state, x, (x[0] - 0.3) ** 2, 2 * (x - 0.3), [], np.zeros((0, 1))).x
    assert x[0] == pytest.approx(0.3, abs=1e-6)


def test_zero_gradient_keeps_design():
    # designs at least one move limit away from the bounds; closer to a bound the
    # subproblem's barrier term is one-sided and shifts x by O(epsimin / raa0)
    state = MMAState(5)
    x = np.linspace(0.2, 0.8, 5)
    step = mma_update(state, x, 0.0, np.zeros(5), [], np.zeros((0, 5)))
    assert np.allclose(step.x, x, atol=1e-12) and not step.fallback


def test_linear_objective_with_volume_constraint():
    # every design with mean f is optimal; from a uniform start the iterates stay uniform
    n, f = 20, 0.3
    state = MMAState(n)
    x = np.full(n, 0.7)
    for _ in range(100):
        x = mma_update(state, x, -x.sum(), -np.ones(n), [x.mean() - f], np.ones((1, n)) / n).x
    assert np.max(np.abs(x - f)) <= 1e-6


def test_steps_respect_move_limit_and_bounds(rng):
    n = 30
    state = MMAState(n, options=MMAOptions(move=0.1))
    x = rng.uniform(0, 1, n)
    g = rng.normal(size=n)
    new = mma_update(state, x, 1.0, g, [x.mean() - 0.5], np.ones((1, n)) / n).x
    assert np.all(np.abs(new - x) <= 0.1 + 1e-12)
    assert np.all((new >= 0) & (new <= 1))


def test_conservative_constraint_resolve():
    # a strongly nonlinear constraint: the linearized step would overshoot it
    n = 10
    state = MMAState(n)
    x = np.full(n, 0.2)

    def con(z):
        return [np.mean(z ** 4) / 0.3 ** 4 - 1.0]

    for _ in range(60):
        g = 4 * x ** 3 / n / 0.3 ** 4
        x = mma_update(state, x, -x.sum(), -np.ones(n), con(x), g[None, :], constraints=con).x
        assert con(x)[0] <= 1e-6
    assert np.allclose(x, 0.3, atol=1e-4)


def test_constrained_quadratic():
    # min sum (x - 0.9)^2  s.t.  mean(x) <= 0.5  ->  x = 0.5
    n = 8
    state = MMAState(n)
    x = np.linspace(0.2, 0.8, n)
    for _ in range(100):
        x = mma_update(state, x, np.sum((x - 0.9) ** 2), 2 * (x - 0.9), [x.mean() - 0.5],
                       np.ones((1, n)) / n).x
    assert np.allclose(x, 0.5, atol=1e-5)
