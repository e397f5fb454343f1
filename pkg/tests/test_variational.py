import json

import numpy as np
import pytest

from pathgames import variational as va
from pathgames.path_space import Grid, Path

from conftest import random_walk

GRID = Grid(0.0, 1.0, 8)


def _domain(rng, n, ends=(2, 5, 8)):
    return va.FiniteDomain(tuple(random_walk(rng, GRID, end=int(rng.choice(ends))) for _ in range(n)))


def _sup_sq(p):
    return float(np.einsum("kd,kd->k", p.values, p.values).max())


def test_constant_functional_keeps_start(rng):
    dom = _domain(rng, 30)
    # all points of the latest end time tie; lambda(start, .) > 0 elsewhere breaks the tie
    start = max(range(len(dom)), key=lambda i: (dom.points[i].end_index, -i))
    res = va.ebp_maximize(lambda p: 1.0, dom, start, 0.1, 1.0)
    assert res.anchor == dom.points[start]
    assert res.iterations == 0
    assert va.verify_ebp(res, lambda p: 1.0, dom)["passed"]


def test_unique_maximizer_is_found(rng):
    dom = _domain(rng, 40, ends=(8,))
    f = lambda p: -_sup_sq(p) - float(p.terminal @ p.terminal)
    vals = [f(p) for p in dom]
    best = int(np.argmax(vals))
    res = va.ebp_maximize(f, dom, best, 1e-3, 1.0)
    assert res.anchor == dom.points[best]
    assert va.verify_ebp(res, f, dom)["passed"]


def test_two_hundred_point_domain(rng):
    dom = _domain(rng, 200)
    f = lambda p: float(p.terminal[0]) - 0.3 * _sup_sq(p) + p.t
    vals = np.array([f(p) for p in dom])
    near = np.flatnonzero(vals >= vals.max() - 0.1)
    res = va.ebp_maximize(f, dom, int(near[-1]), 0.1, 1.0)
    check = va.verify_ebp(res, f, dom)
    assert check["passed"], check
    assert res.info["lambda_start_anchor"] <= 0.1 + 1e-12
    assert res.info["dinfty_start_anchor"] <= res.info["dinfty_bound"] + 1e-12


def test_corrupted_anchor_gives_witness(rng):
    dom = _domain(rng, 60, ends=(8,))
    f = lambda p: float(p.terminal[0])
    vals = np.array([f(p) for p in dom])
    res = va.ebp_maximize(f, dom, int(np.argmax(vals)), 0.5, 1.0)
    worst = int(np.argmin(vals))
    bad = va.EbpResult(dom.points[worst], res.centers, res.epsilon, res.delta0)
    check = va.verify_ebp(bad, f, dom)
    assert not check["iii"]["holds"]
    assert check["iii"]["witness"] is not None
    assert not check["passed"]


def test_non_canonical_weights_flagged(rng):
    dom = _domain(rng, 40)
    f = lambda p: float(p.terminal[0])
    vals = np.array([f(p) for p in dom])
    res = va.ebp_maximize(f, dom, int(np.argmax(vals)), 0.5, 1.0)
    thirds = [(c, res.delta0 / 3.0**i) for i, (c, _) in enumerate(res.centers)]
    if len(thirds) == 1:
        thirds.append((res.anchor, res.delta0 / 3.0))
    check = va.verify_ebp(va.EbpResult(res.anchor, thirds, res.epsilon, res.delta0), f, dom)
    assert not check["canonical_weights"]
    assert not check["passed"]


def test_precondition_error_reports_sup(rng):
    dom = _domain(rng, 20)
    f = lambda p: float(p.terminal[0])
    vals = np.array([f(p) for p in dom])
    with pytest.raises(va.EbpPreconditionError) as err:
        va.ebp_maximize(f, dom, int(np.argmin(vals)), 1e-6 * (np.ptp(vals) + 1), 1.0)
    assert err.value.true_sup == pytest.approx(vals.max())


@pytest.mark.parametrize("eps,delta0", [(0.0, 1.0), (0.1, -1.0)])
def test_bad_parameters(rng, eps, delta0):
    dom = _domain(rng, 5)
    with pytest.raises(ValueError):
        va.ebp_maximize(lambda p: 0.0, dom, 0, eps, delta0)


def test_json_round_trip(rng):
    dom = _domain(rng, 50)
    f = lambda p: float(p.terminal[0]) - _sup_sq(p)
    vals = np.array([f(p) for p in dom])
    res = va.ebp_maximize(f, dom, int(np.argmax(vals)), 0.2, 0.5)
    back = va.EbpResult.from_json_dict(res.to_json_dict())
    assert back.anchor == res.anchor
    assert [w for _, w in back.centers] == [w for _, w in res.centers]
    assert va.verify_ebp(back, f, dom) == va.verify_ebp(res, f, dom)
    assert va.EbpResult.from_json_dict(json.loads(res.to_json())).epsilon == res.epsilon


def test_mutations_are_all_detected(rng):
    dom = _domain(rng, 80)
    f = lambda p: float(p.terminal[0]) - 0.5 * _sup_sq(p)
    vals = np.array([f(p) for p in dom])
    start = int(np.flatnonzero(vals >= vals.max() - 0.3)[0])
    res = va.ebp_maximize(f, dom, start, 0.3, 0.05)
    lam = va.gauge_lambda()
    muts = va.mutations(res, dom, lam)
    assert muts
    for kind, bad in muts:
        assert not va.verify_ebp(bad, f, dom, lam)["passed"], kind


def test_small_study():
    out = va.ebp_study(5, 60, seed=11, min_paths=20)
    assert out["all_certified"]
    assert out["all_mutations_detected"]
    assert len(out["rows"]) == 5
