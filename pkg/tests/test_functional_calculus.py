import numpy as np
import pytest

from pathgames import functional_calculus as fc
from pathgames.path_space import Grid, Path, PathError

from conftest import random_walk


def _time_functional():
    return fc.FunctionalHandle(eval=lambda p: p.t, name="time")


def test_horizontal_derivative_of_time_is_one(grid, rng):
    p = random_walk(rng, grid, d=2, end=5)
    f = _time_functional()
    assert fc.horizontal_derivative(f, p) == pytest.approx(1.0, abs=1e-12)
    assert fc.horizontal_derivative(f, p, h=4 * grid.step, richardson=True) == pytest.approx(1.0, abs=1e-12)


def test_horizontal_derivative_rejects_off_grid_and_horizon(grid, rng):
    p = random_walk(rng, grid, end=grid.n_steps)
    with pytest.raises(PathError):
        fc.horizontal_derivative(_time_functional(), p)
    q = random_walk(rng, grid, end=3)
    with pytest.raises(PathError):
        fc.horizontal_derivative(_time_functional(), q, h=0.3 * grid.step)


def test_flat_extension_leaves_terminal_functionals_fixed(grid, rng):
    p = random_walk(rng, grid, d=2, end=7)
    for f in (fc.terminal_linear([1.0, -2.0]), fc.terminal_quadratic()):
        assert fc.horizontal_derivative(f, p) == 0.0


def test_riemann_sum_horizontal_derivative(grid, rng):
    # extending flat by one step adds step * x(t) to the trapezoid sum
    p = random_walk(rng, grid, end=6)
    dt = fc.horizontal_derivative(fc.running_integral(), p)
    assert dt == pytest.approx(p.terminal[0], abs=1e-12)
    # the integral ignores the last value up to a half step
    g = fc.vertical_gradient(fc.running_integral(), p)
    assert abs(g[0]) <= grid.step


@pytest.mark.parametrize("d", [1, 2, 3])
def test_linear_gradient_exact(d, grid, rng):
    a = rng.normal(size=d)
    f = fc.without_derivatives(fc.terminal_linear(a))
    p = random_walk(rng, grid, d=d, end=9)
    np.testing.assert_allclose(fc.vertical_gradient(f, p), a, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(fc.vertical_hessian(f, p), 0.0, atol=1e-4)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_quadratic_hessian_is_2I(d, grid, rng):
    f = fc.without_derivatives(fc.terminal_quadratic())
    p = random_walk(rng, grid, d=d, end=4)
    np.testing.assert_allclose(fc.vertical_hessian(f, p), 2 * np.eye(d), atol=1e-4)
    np.testing.assert_allclose(fc.vertical_gradient(f, p), 2 * p.terminal, rtol=1e-8)


def test_supplied_and_numeric_derivatives_agree(rng):
    grid = Grid(0.0, 1.0, 12)
    f = fc.gauge_functional(2)
    g = fc.without_derivatives(f)
    for _ in range(10):
        p = random_walk(rng, grid, d=2, end=8)
        _, dx, dxx = fc.derivatives(f, p)
        _, ndx, ndxx = fc.derivatives(g, p)
        np.testing.assert_allclose(ndx, dx, rtol=1e-5, atol=1e-6 * (1 + abs(f(p))))
        np.testing.assert_allclose(ndxx, dxx, rtol=1e-3, atol=1e-3 * (1 + abs(f(p))))


def test_vertical_eps_must_be_positive(grid, rng):
    p = random_walk(rng, grid)
    with pytest.raises(ValueError):
        fc.vertical_gradient(fc.terminal_quadratic(), p, eps=0.0)


def test_ito_residual_linear_is_zero(grid, rng):
    f = fc.terminal_linear([0.5, -1.5])
    x = random_walk(rng, grid, d=2)
    n = grid.n_steps
    res = fc.ito_residual(f, x, [np.zeros(2)] * n, [np.eye(2)] * n)
    assert res == pytest.approx(0.0, abs=1e-12)


def test_ito_residual_quadratic_matches_hand_computation(grid, rng):
    # for |x|^2 the local remainder is |dX|^2 - h per step in d = 1
    x = random_walk(rng, grid, d=1)
    n = grid.n_steps
    res = fc.ito_residual(fc.terminal_quadratic(), x, [np.zeros(1)] * n, [np.eye(1)] * n)
    dX = np.diff(x.values[:, 0])
    assert res == pytest.approx(float(np.sum(dX**2) - n * grid.step), abs=1e-12)


def test_ito_bundle_agrees_with_per_path(grid, rng):
    vals = np.stack([random_walk(rng, grid, d=2).values for _ in range(5)])
    n = grid.n_steps
    for f in (fc.terminal_quadratic(), fc.gauge_functional(3)):
        bulk = fc.ito_residual_bundle(f, vals, grid, np.eye(2), start_index=3)
        single = [
            fc.ito_residual(f, Path(grid, v), [np.zeros(2)] * (n - 3), [np.eye(2)] * (n - 3), start_index=3)
            for v in vals
        ]
        np.testing.assert_allclose(bulk, single, rtol=1e-10, atol=1e-12)


def test_ito_residual_checks_layout(grid, rng):
    x = random_walk(rng, grid)
    with pytest.raises(ValueError):
        fc.ito_residual(fc.terminal_quadratic(), x, [np.zeros(1)], [np.eye(1)])


def test_ito_convergence_is_chunk_invariant():
    a = fc.ito_convergence(["terminal-quadratic"], 300, seed=5, levels=(4, 6), chunk=300)
    b = fc.ito_convergence(["terminal-quadratic"], 300, seed=5, levels=(4, 6), chunk=70)
    assert a == b
    # quadratic variation error shrinks like sqrt(h)
    rms = a["terminal-quadratic"]["rms"]
    assert rms[1] < rms[0]
