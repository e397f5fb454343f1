import json

import numpy as np
import pytest

from pathgames import catalog, game
from pathgames.bsde import BsdeDriver
from pathgames.dynamics import SdeCoefficients
from pathgames.path_space import Grid, Path

GRID = Grid(0.0, 1.0, 8)


def _random_lq(rng):
    """d = 2 linear-quadratic data plus an independent Hamiltonian evaluator."""
    A, B, C = rng.normal(size=(2, 2)), rng.normal(size=2), rng.normal(size=2)
    S = rng.normal(size=(2, 2))
    Q = rng.normal(size=(2, 2))
    Q = Q + Q.T
    a, c1, c2 = rng.normal(size=3)
    k = rng.normal(size=2)
    coeffs = SdeCoefficients(
        lambda t, h, u, v: h[:, -1] @ A.T + np.asarray(u) * B + np.asarray(v) * C,
        lambda t, h, u, v: np.broadcast_to(S, (h.shape[0], 2, 2)),
        2,
    )
    driver = BsdeDriver(
        lambda t, h, y, z, u, v: (
            np.einsum("si,ij,sj->s", h[:, -1], Q, h[:, -1]) + a * y + z @ k + c1 * u**2 - c2 * v**2
        ),
        lambda h: h[:, -1, 0],
    )
    spec = game.GameSpec(coeffs, driver, (-1.0, 0.0, 1.0), (-0.5, 0.5), GRID)

    def direct(x, r, p, M, u, v):
        b = A @ x + u * B + v * C
        sst = S @ S.T
        total = p @ b
        total += 0.5 * sum(M[i, j] * sst[j, i] for i in range(2) for j in range(2))
        total += x @ Q @ x + a * r + (S.T @ p) @ k + c1 * u * u - c2 * v * v
        return total

    return spec, direct


def test_random_lq_hamiltonian_against_direct_formula(rng):
    for _ in range(20):
        spec, direct = _random_lq(rng)
        x = rng.normal(size=2)
        p = Path(GRID, np.vstack([rng.normal(size=(3, 2)), x]))
        r = float(rng.normal())
        g = rng.normal(size=2)
        M = rng.normal(size=(2, 2))
        M = M + M.T
        H = game.hamiltonian_matrix(spec, p, r, g, M)
        for i, u in enumerate(spec.u_grid):
            for j, v in enumerate(spec.v_grid):
                expected = direct(x, r, g, M, u, v)
                assert H[i, j] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_trivial_hamiltonian():
    spec = catalog.get("driftless-brownian").make({"dim": 2})["spec"]
    p = Path(spec.grid, [[0.1, 0.2]])
    hess = np.array([[1.0, 0.5], [0.5, 3.0]])
    assert game.hamiltonian_minus(spec, p, 0.0, [5.0, -1.0], hess) == pytest.approx(2.0)
    assert game.hamiltonian_plus(spec, p, 0.0, [5.0, -1.0], hess) == pytest.approx(2.0)


def test_minimax_ordering_and_bilinear_gap(rng):
    spec = catalog.get("bilinear-2x2").make()["spec"]
    samples = []
    for _ in range(200):
        p = Path(spec.grid, rng.normal(size=(3, 1)))
        samples.append((p, float(rng.normal()), rng.normal(size=1), rng.normal(size=(1, 1))))
    rep = game.isaacs_check(spec, samples)
    assert rep["ordering_holds"]
    assert not rep["holds"]
    assert rep["min_gap"] > 0
    for p, r, g, M in samples[:20]:
        gap = game.hamiltonian_plus(spec, p, r, g, M) - game.hamiltonian_minus(spec, p, r, g, M)
        assert gap == pytest.approx(2 * abs(g[0]), rel=1e-12)


def test_separable_game_satisfies_isaacs(rng):
    spec = catalog.get("separable-lq").make()["spec"]
    samples = [
        (Path(spec.grid, rng.normal(size=(2, 1))), 0.0, rng.normal(size=1), rng.normal(size=(1, 1)))
        for _ in range(100)
    ]
    rep = game.isaacs_check(spec, samples, tol=1e-12)
    assert rep["holds"] and rep["ordering_holds"]


def test_random_lq_ordering(rng):
    for _ in range(20):
        spec, _ = _random_lq(rng)
        samples = [
            (Path(GRID, rng.normal(size=(2, 2))), float(rng.normal()), rng.normal(size=2), np.eye(2))
            for _ in range(10)
        ]
        assert game.isaacs_check(spec, samples)["ordering_holds"]


def test_monotone_in_hessian(rng):
    spec, _ = _random_lq(rng)
    p = Path(GRID, rng.normal(size=(2, 2)))
    g = rng.normal(size=2)
    M = rng.normal(size=(2, 2))
    M = M + M.T
    psd = rng.normal(size=(2, 2))
    bigger = M + psd @ psd.T
    for H in (game.hamiltonian_minus, game.hamiltonian_plus):
        assert H(spec, p, 0.3, g, M) <= H(spec, p, 0.3, g, bigger)


def test_empty_control_grid_rejected():
    spec = catalog.get("bilinear-2x2").make()["spec"]
    with pytest.raises(ValueError):
        game.GameSpec(spec.coeffs, spec.driver, (), (0.0,), spec.grid)


def test_driftless_linear_value_is_initial_point():
    made = catalog.get("driftless-brownian").make({"x0": 0.3, "n_steps": 16})
    est, fld = game.value(made["spec"], made["initial"], "lower", 4000, seed=3)
    assert abs(est - 0.3) < 3 * fld.stderr
    assert fld.stderr > 0


def test_bang_bang_matches_enumeration():
    made = catalog.get("bang-bang").make()
    brute = catalog.bang_bang_brute_force(8, 1.0, 0.3)
    for kind in ("lower", "upper"):
        est, _ = game.value(made["spec"], made["initial"], kind, 2000, seed=1)
        assert est == pytest.approx(brute, abs=1e-8)


def test_brute_force_oracle_small_cases():
    assert catalog.bang_bang_brute_force(2, 1.0, 0.0) == 0.0
    assert catalog.bang_bang_brute_force(1, 1.0, 0.3) == pytest.approx(-0.7)
    assert catalog.bang_bang_brute_force(4, 1.0, 0.3) == pytest.approx(-0.2)


def test_lq_lower_close_to_upper():
    made = catalog.get("separable-lq").make({"n_steps": 8})
    lo, flo = game.value(made["spec"], made["initial"], "lower", 4000, seed=5)
    hi, fhi = game.value(made["spec"], made["initial"], "upper", 4000, seed=5)
    assert abs(lo - hi) < 3 * np.hypot(flo.stderr, fhi.stderr)


def test_value_deterministic_and_jobs_invariant():
    made = catalog.get("separable-lq").make({"n_steps": 4})
    a, fa = game.value(made["spec"], made["initial"], "lower", 500, seed=2)
    b, fb = game.value(made["spec"], made["initial"], "lower", 500, seed=2, jobs=3)
    assert a == b
    assert fa.to_json() == fb.to_json()


def test_tie_break_prefers_lowest_index():
    # u has no effect, so every u ties and the field must equal the single-u game
    made = catalog.get("driftless-brownian").make({"n_steps": 4, "payoff": "abs"})
    spec = made["spec"]
    tied = game.GameSpec(spec.coeffs, spec.driver, (0.0, 1.0, 2.0), spec.v_grid, spec.grid)
    a, fa = game.value(spec, made["initial"], "lower", 400, seed=4)
    b, fb = game.value(tied, made["initial"], "lower", 400, seed=4)
    assert a == b
    np.testing.assert_array_equal(fa.table, fb.table)


def test_value_field_round_trip():
    made = catalog.get("separable-lq").make({"n_steps": 4})
    _, fld = game.value(made["spec"], made["initial"], "upper", 300, seed=1)
    back = game.ValueField.from_json_dict(json.loads(fld.to_json()))
    assert back.value == fld.value and back.kind == "upper"
    hist = np.zeros((3, 3, 1))
    np.testing.assert_array_equal(back.evaluate(2, hist), fld.evaluate(2, hist))
    with pytest.raises(ValueError):
        fld.evaluate(fld.end_index, hist)
    assert len(fld.table_rows()) > 0


def test_bad_kind():
    made = catalog.get("separable-lq").make({"n_steps": 4})
    with pytest.raises(ValueError):
        game.value(made["spec"], made["initial"], "middle", 100)


@pytest.mark.parametrize("entry,params", [("separable-lq", {"n_steps": 8}), ("driftless-brownian", {"n_steps": 8})])
def test_dpp_consistency(entry, params):
    made = catalog.get(entry).make(params)
    rep = game.dpp_consistency(made["spec"], made["initial"], 0.25, "lower", 3000, seed=6)
    assert rep["ok"], rep
    with pytest.raises(ValueError):
        game.dpp_consistency(made["spec"], made["initial"], 0.1, "lower", 100, seed=6)
