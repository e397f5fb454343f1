import numpy as np

from pathgames import rng


def test_streams_depend_on_sample_id_only():
    whole = rng.standard_normals(5, 10, (3, 2))
    tail = rng.standard_normals(5, 4, (3, 2), first_sample=6)
    np.testing.assert_array_equal(whole[6:], tail)


def test_purposes_and_seeds_are_distinct():
    a = rng.standard_normals(1, 4, 8, "a")
    b = rng.standard_normals(1, 4, 8, "b")
    c = rng.standard_normals(2, 4, 8, "a")
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_child_seed_deterministic():
    assert rng.child_seed(3, "x") == rng.child_seed(3, "x")
    assert rng.child_seed(3, "x") != rng.child_seed(3, "y")
    assert 0 <= rng.child_seed(2**64 - 1, "z") < 2**64


def test_normals_look_standard():
    z = rng.standard_normals(0, 20000, 1).ravel()
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 0.05
