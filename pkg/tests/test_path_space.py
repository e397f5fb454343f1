import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pathgames.path_space import (
    Grid, Path, PathError, align, dist_dinfty, flat_extend, resample, sup_norm,
)

from conftest import random_walk

GRID = Grid(0.0, 1.0, 10)


def test_grid_basics():
    g = Grid(0.5, 2.5, 4)
    assert g.step == 0.5
    np.testing.assert_allclose(g.times, [0.5, 1.0, 1.5, 2.0, 2.5])
    assert g.index_of(1.5) == 2
    assert Grid.from_dict(g.to_dict()) == g


@pytest.mark.parametrize("args", [(0.0, 0.0, 4), (1.0, 0.5, 4), (0.0, 1.0, 0), (-1.0, 1.0, 3),
                                  (0.0, np.inf, 2)])
def test_grid_rejects_invalid(args):
    with pytest.raises(PathError):
        Grid(*args)


@pytest.mark.parametrize("t", [0.05, 0.33, -0.1, 1.1])
def test_index_of_rejects_off_grid(t):
    with pytest.raises(PathError):
        GRID.index_of(t)


def test_path_validation():
    with pytest.raises(PathError):
        Path(GRID, np.zeros((3, 1)), end_index=5)
    with pytest.raises(PathError):
        Path(GRID, [0.0, np.nan])
    with pytest.raises(PathError):
        Path(GRID, np.zeros(12))
    p = Path(GRID, [1.0, 2.0])
    assert p.dim == 1 and p.end_index == 1 and p.t == pytest.approx(0.1)
    with pytest.raises(AttributeError):
        p.end_index = 3
    with pytest.raises(ValueError):
        p.values[0, 0] = 5.0


def test_sup_norm_examples():
    assert sup_norm(Path.constant(GRID, [0.0, 0.0])) == 0.0
    assert sup_norm(Path.constant(GRID, [2.0, 0.0])) == 2.0
    g = Grid(0.0, 1.0, 100)
    p = Path.from_function(g, lambda t: np.sin(2 * np.pi * t))
    oracle = max(abs(np.sin(2 * np.pi * k / 100)) for k in range(101))
    assert sup_norm(p) == pytest.approx(oracle, rel=1e-15)


def test_flat_extend_examples(rng):
    p = random_walk(rng, GRID, 2, end=4)
    assert flat_extend(p, p.t) == p
    c = Path.constant(GRID, [1.5], end_index=3)
    assert flat_extend(c, 1.0) == Path.constant(GRID, [1.5])
    q = flat_extend(p, GRID.time(9))
    assert q.end_index == 9
    np.testing.assert_array_equal(q.values[:5], p.values)
    np.testing.assert_array_equal(q.values[5:], np.tile(p.terminal, (5, 1)))
    assert dist_dinfty(p, q) == pytest.approx(q.t - p.t)


def test_flat_extend_rejects():
    p = Path(GRID, np.zeros((5, 1)))
    with pytest.raises(PathError):
        flat_extend(p, 0.2)
    with pytest.raises(PathError):
        flat_extend(p, 0.55)


def test_dinfty_examples():
    p = Path.constant(Grid(0.0, 1.0, 10), [0.0])
    q = Path.constant(Grid(0.0, 2.0, 20), [1.0])
    assert dist_dinfty(p, q) == pytest.approx(2.0)
    assert dist_dinfty(p, p) == 0.0
    with pytest.raises(PathError):
        dist_dinfty(p, Path.constant(GRID, [0.0, 0.0]))


def test_triangle_inequality_random_triples(rng):
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        a, b, c = (random_walk(rng, GRID, d, end=int(rng.integers(0, 11))) for _ in range(3))
        assert dist_dinfty(a, c) <= dist_dinfty(a, b) + dist_dinfty(b, c) + 1e-12


path_values = st.integers(0, 10).flatmap(
    lambda e: arrays(np.float64, (e + 1, 2), elements=st.floats(-1e3, 1e3))
)


@settings(max_examples=200, deadline=None)
@given(path_values, path_values)
def test_dinfty_symmetric_nonnegative(a, b):
    p, q = Path(GRID, a), Path(GRID, b)
    d1, d2 = dist_dinfty(p, q), dist_dinfty(q, p)
    assert d1 == d2 >= 0
    x, y = align(p, q)
    assert (d1 == 0) == (p.end_index == q.end_index and np.array_equal(x, y))


@settings(max_examples=200, deadline=None)
@given(path_values, st.integers(0, 10))
def test_flat_extend_idempotent_and_norm_preserving(a, k):
    p = Path(GRID, a)
    s = GRID.time(max(k, p.end_index))
    q = flat_extend(p, s)
    assert flat_extend(q, s) == q
    assert sup_norm(q) == sup_norm(p)


def test_arithmetic_aligns(rng):
    p = random_walk(rng, GRID, 1, end=3)
    q = random_walk(rng, GRID, 1, end=7)
    diff = p - q
    assert diff.end_index == 7
    np.testing.assert_array_equal(diff.values, flat_extend(p, q.t).values - q.values)
    np.testing.assert_allclose(((p + q) - q).values, flat_extend(p, q.t).values, atol=1e-15)
    assert (-p).values[0, 0] == -p.values[0, 0]


def test_prefix_and_with_terminal(rng):
    p = random_walk(rng, GRID, 2)
    assert p.prefix(4).end_index == 4
    bumped = p.with_terminal([9.0, 9.0])
    np.testing.assert_array_equal(bumped.values[:-1], p.values[:-1])
    assert bumped.terminal.tolist() == [9.0, 9.0]
    with pytest.raises(PathError):
        p.prefix(11)


def test_json_and_csv_round_trip(rng):
    p = random_walk(rng, GRID, 3, end=6)
    assert Path.from_json(p.to_json()) == p
    data = json.loads(p.to_json())
    assert set(data) == {"grid", "end_index", "values"}
    assert data["grid"] == {"t0": 0.0, "T": 1.0, "n": 10}
    text = p.to_csv()
    assert text.splitlines()[0] == "time,x1,x2,x3"
    assert Path.from_csv(text, GRID) == p


def test_csv_rejects_bad_header():
    with pytest.raises(PathError):
        Path.from_csv("t,x1\n0,1\n0.1,2\n")


def test_resample_linear():
    coarse = Grid(0.0, 1.0, 4)
    fine = Grid(0.0, 1.0, 8)
    p = Path.from_function(coarse, lambda t: 2.0 * t + 1.0)
    r = resample(p, fine)
    np.testing.assert_allclose(r.values[:, 0], 2.0 * fine.times + 1.0)
    partial = resample(Path(coarse, [0.0, 1.0, 2.0]), Grid(0.0, 1.0, 3))
    assert partial.end_index == 1
