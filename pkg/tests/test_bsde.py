import json

import numpy as np
import pytest

from pathgames import bsde
from pathgames.dynamics import SdeCoefficients, simulate
from pathgames.path_space import Grid, Path

BM = SdeCoefficients(
    lambda t, h, u, v: np.zeros((h.shape[0], 1)),
    lambda t, h, u, v: np.ones((h.shape[0], 1, 1)),
    1,
)


def _bundle(n_steps=16, n=4000, x0=0.0, seed=1):
    return simulate(BM, Path(Grid(0.0, 1.0, n_steps), [[x0]]), None, None, n, seed)


def _const_driver(c, phi, lip=0.0):
    return bsde.BsdeDriver(lambda t, h, y, z, u, v: np.full(h.shape[0], c), phi, lip)


def _linear_driver(r, phi):
    return bsde.BsdeDriver(lambda t, h, y, z, u, v: r * y, phi, abs(r))


def test_zero_driver_constant_payoff_is_exact():
    sol = bsde.solve(bsde.zero_driver(lambda h: np.full(h.shape[0], 7.0)), _bundle())
    assert sol.y0 == 7.0
    assert sol.stderr == 0.0


def test_constant_driver_constant_payoff():
    sol = bsde.solve(_const_driver(0.25, lambda h: np.full(h.shape[0], 1.0)), _bundle())
    assert sol.y0 == pytest.approx(1.25, abs=1e-13)


def test_constant_driver_quadratic_payoff_within_3_se():
    sol = bsde.solve(_const_driver(0.5, lambda h: h[:, -1, 0] ** 2), _bundle(n=20000, seed=3))
    # E[W_1^2] + 0.5
    assert abs(sol.y0 - 1.5) < 3 * sol.stderr
    assert sol.stderr > 0


def test_zero_driver_constant_basis_is_sample_mean():
    b = _bundle(n=500, x0=0.2)
    phi = lambda h: np.abs(h[:, -1, 0])
    sol = bsde.solve(bsde.zero_driver(phi), b, basis=bsde.RegressionBasis("constant"))
    assert sol.y0 == pytest.approx(float(np.mean(phi(b.values))), rel=1e-12)


@pytest.mark.parametrize("n_steps", [16, 64])
def test_linear_driver_bias_is_order_step(n_steps):
    r, K = 0.5, 2.0
    sol = bsde.solve(_linear_driver(r, lambda h: np.full(h.shape[0], K)), _bundle(n_steps, n=200))
    exact = K * np.exp(r)
    h = 1.0 / n_steps
    # the Euler recursion compounds (1 + r h) per step; its defect is below K r^2 e^r h
    assert abs(sol.y0 - exact) <= K * r**2 * np.exp(r) * h


def test_linear_driver_bias_shrinks():
    r, K = 0.5, 2.0
    errs = []
    for n in (16, 64):
        sol = bsde.solve(_linear_driver(r, lambda h: np.full(h.shape[0], K)), _bundle(n, n=200))
        errs.append(abs(sol.y0 - K * np.exp(r)))
    assert errs[1] < errs[0] / 3


def test_linear_driver_stochastic_payoff():
    r = 0.5
    sol = bsde.solve(_linear_driver(r, lambda h: h[:, -1, 0] + 1.0), _bundle(32, n=20000, x0=0.3, seed=9))
    exact = 1.3 * np.exp(r)
    h = 1.0 / 32
    assert abs(sol.y0 - exact) < 3 * sol.stderr + 1.3 * r**2 * np.exp(r) * h


def test_comparison_is_monotone():
    b = _bundle(n=3000, seed=4)
    lo = lambda h: h[:, -1, 0]
    hi = lambda h: h[:, -1, 0] + 0.1 * np.abs(h[:, -1, 0])
    y_lo = bsde.solve(_linear_driver(0.3, lo), b).y0
    y_hi = bsde.solve(_linear_driver(0.3, hi), b).y0
    assert y_lo <= y_hi


def test_step_check():
    with pytest.raises(ValueError, match="L\\*h"):
        bsde.solve(_const_driver(0.0, lambda h: h[:, -1, 0], lip=10.0), _bundle())
    bsde.check_step(_const_driver(0.0, None, lip=7.9), 1 / 16)


def test_non_finite_values_abort():
    with pytest.raises(FloatingPointError):
        bsde.solve(bsde.zero_driver(lambda h: np.full(h.shape[0], np.nan)), _bundle(n=200))
    bad = bsde.BsdeDriver(lambda t, h, y, z, u, v: np.log(y - 10.0), lambda h: h[:, -1, 0])
    with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError):
        bsde.solve(bad, _bundle(n=200))


def test_too_many_features():
    with pytest.raises(ValueError, match="features"):
        bsde.solve(bsde.zero_driver(lambda h: h[:, -1, 0]), _bundle(n=40))


def test_collinear_features_flag_ridge():
    # one step after a fixed start the running average is a function of the current value
    sol = bsde.solve(bsde.zero_driver(lambda h: h[:, -1, 0] ** 2), _bundle(n=2000))
    assert sol.flags["ridge_fallback"]
    assert 1 in sol.flags["ridge_fallback_steps"]


def test_fit_basics():
    rng = np.random.default_rng(0)
    x = rng.normal(size=200)
    A = np.column_stack([np.ones(200), x, np.zeros(200)])
    res = bsde.fit(A, 3.0 + 2.0 * x)
    np.testing.assert_allclose(res.coef, [3.0, 2.0, 0.0], atol=1e-12)
    assert not res.ridge_used
    const = bsde.fit(A, np.full(200, 4.5))
    assert np.all(const.fitted == 4.5)
    dup = bsde.fit(np.column_stack([np.ones(200), x, x]), x)
    assert dup.ridge_used
    np.testing.assert_allclose(dup.fitted, x, atol=1e-6)


def test_hat_basis_interpolates():
    knots = np.array([-1.0, 0.0, 2.0])
    H = bsde._hats(np.array([-2.0, -0.5, 1.0, 3.0]), knots)
    np.testing.assert_allclose(H.sum(axis=1), 1.0)
    np.testing.assert_allclose(H @ knots, [-1.0, -0.5, 1.0, 2.0])


def test_path_stats_advance_matches_recompute():
    rng = np.random.default_rng(1)
    hist = rng.normal(size=(6, 5, 2))
    a = bsde.PathStats.of(hist[:, :4]).advance(hist[:, 4])
    b = bsde.PathStats.of(hist)
    for name in ("current", "run_max", "run_avg"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name))


def test_json_round_trip_and_evaluate():
    b = _bundle(n=1000, seed=5)
    sol = bsde.solve(bsde.zero_driver(lambda h: h[:, -1, 0] ** 2), b)
    back = bsde.BsdeSolution.from_json_dict(json.loads(sol.to_json()))
    assert back.y0 == sol.y0 and back.flags == sol.flags
    k = 10
    np.testing.assert_array_equal(back.evaluate(k, b.values[:, : k + 1]), sol.evaluate(k, b.values[:, : k + 1]))
    # E[W_1^2 | F_k] = W_k^2 + (1 - t_k); the quadratic feature captures it
    t = b.grid.times[k]
    fitted = sol.evaluate(k, b.values[:, : k + 1])
    assert np.sqrt(np.mean((fitted - (b.values[:, k, 0] ** 2 + 1 - t)) ** 2)) < 0.1
    with pytest.raises(ValueError):
        sol.evaluate(sol.end_index, b.values)


def test_backward_semigroup_constant_driver():
    x0 = Path(Grid(0.0, 1.0, 16), [[0.0]])
    val, se, _ = bsde.backward_semigroup(
        _const_driver(1.0, None), BM, x0, None, None, 0.25, lambda h: h[:, -1, 0], 4000, seed=2,
    )
    assert abs(val - 0.25) < 3 * se + 1e-12
    with pytest.raises(ValueError):
        bsde.backward_semigroup(_const_driver(1.0, None), BM, x0, None, None, 0.0, lambda h: h[:, -1, 0], 10, 0)
