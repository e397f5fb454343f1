"""Smooth gauge functionals of order ``m`` and their pathwise derivatives.

For a stopped path with sup norm ``s`` and terminal value ``x``::

    ups(p) = (s^2m - |x|^2m)^3 / s^4m + 3 |x|^2m        (0 for the zero path)

All formulas are evaluated through the ratio ``r = (|x| / s)^2m`` in
``[0, 1]``, which is algebraically identical and keeps tiny nonzero paths
free of underflow-induced NaNs.  ``ups(p)`` is insensitive to flat extension,
so its horizontal derivative vanishes.

The gauge distance between two paths is ``ups`` of their aligned difference
plus the squared gap between their end times.
"""
import json

import numpy as np

from . import _kernels
from .path_space import _check_pair, align, sup_norm

DEFAULT_ORDER = 3

# Relative slack for inequalities between separately rounded quantities
# (vector norms against closed-form magnitudes); a few ulps.
FP_SLACK = 16 * np.finfo(float).eps


def _order(m):
    if int(m) != m or m < 2:
        raise ValueError(f"gauge order must be an integer >= 2, got {m}")
    return int(m)


def _terms_of(p, m):
    sq = np.einsum("kd,kd->k", p.values, p.values)
    ups, grad, hess = _kernels.upsilon_terms(sq.max(), p.terminal, _order(m))
    return float(ups[0]), grad[0], hess[0]


def upsilon(p, m=DEFAULT_ORDER):
    """Gauge value of a single path."""
    return _terms_of(p, m)[0]


def upsilon_grad(p, m=DEFAULT_ORDER):
    """Vertical gradient (closed form), a ``d``-vector."""
    return _terms_of(p, m)[1]


def upsilon_hess(p, m=DEFAULT_ORDER):
    """Vertical Hessian (closed form), a symmetric ``d x d`` matrix."""
    return _terms_of(p, m)[2]


def upsilon_all(p, m=DEFAULT_ORDER):
    """``(value, gradient, hessian)`` in one pass."""
    return _terms_of(p, m)


def upsilon0(p, q, m=DEFAULT_ORDER):
    """Gauge of the difference of ``p`` and ``q`` after flat extension to the later time."""
    a, b = align(p, q)
    diff = a - b
    sq = np.einsum("kd,kd->k", diff, diff)
    return float(_kernels.upsilon_terms(sq.max(), diff[-1], _order(m))[0][0])


def upsilon_bar0(p, q, m=DEFAULT_ORDER):
    """Gauge distance: :func:`upsilon0` plus the squared end-time gap."""
    _check_pair(p, q)
    return upsilon0(p, q, m) + (p.t - q.t) ** 2


def upsilon_bar0_to_many(center, paths, m=DEFAULT_ORDER):
    """Gauge distance from ``center`` to each path in ``paths`` (batched kernel)."""
    if not paths:
        return np.zeros(0)
    for q in paths:
        _check_pair(center, q)
    length = max(max(q.end_index for q in paths), center.end_index) + 1
    stack = np.zeros((len(paths), length, center.dim))
    for i, q in enumerate(paths):
        stack[i, : q.end_index + 1] = q.values
    ends = np.array([q.end_index for q in paths], dtype=np.int64)
    return _kernels.upsilon_bar0_many(
        center.values, center.end_index, stack, ends, _order(m), center.grid.step
    )


def upsilon_along(values, m=DEFAULT_ORDER):
    """Gauge value, gradient and Hessian at every prefix of a bundle.

    ``values`` has shape ``(S, L, d)``; returns arrays of shapes ``(S, L)``,
    ``(S, L, d)`` and ``(S, L, d, d)``.
    """
    return _kernels.upsilon_prefixes(values, _order(m))


def gauge_dinfty_bound(bar0, m=DEFAULT_ORDER):
    """Upper bound on ``d_inf`` implied by a gauge distance ``bar0``.

    From ``||diff||_0^2m <= ups`` and ``|t - s|^2 <= bar0``.
    """
    bar0 = max(float(bar0), 0.0)
    return bar0 ** (1.0 / (2 * m)) + np.sqrt(bar0)


def _leq(lhs, rhs):
    return lhs <= rhs + FP_SLACK * abs(rhs)


def check_gauge_bounds(p, m=DEFAULT_ORDER, q=None):
    """Check the derivative estimates and the two-sided bound at ``p``.

    Returns ``{bound_name: {"holds", "violations", "slack"}}`` where ``slack``
    is ``rhs - lhs`` (nonnegative when the bound holds).  The root
    subadditivity check needs a second path ``q`` and is skipped without one.
    """
    m = _order(m)
    ups, grad, hess = upsilon_all(p, m)
    x = float(np.linalg.norm(p.terminal))
    s2m = sup_norm(p) ** (2 * m)
    checks = {
        "lower": (s2m, ups),
        "upper": (ups, 3.0 * s2m),
        "grad": (float(np.linalg.norm(grad)), 6.0 * m * x ** (2 * m - 1)),
        "hess": (float(np.linalg.norm(hess, 2)), 6.0 * m * (6.0 * m - 1.0) * x ** (2 * m - 2)),
    }
    report = {}
    for name, (lhs, rhs) in checks.items():
        ok = bool(_leq(lhs, rhs))
        report[name] = {"holds": ok, "violations": int(not ok), "slack": float(rhs - lhs)}
    if q is not None:
        lhs = upsilon(p + q, m) ** (1.0 / (2 * m))
        rhs = ups ** (1.0 / (2 * m)) + upsilon(q, m) ** (1.0 / (2 * m))
        ok = bool(_leq(lhs, rhs))
        report["subadditive"] = {"holds": ok, "violations": int(not ok), "slack": float(rhs - lhs)}
    return report


def sweep_gauge_bounds(n_paths, dims=(1, 2, 3), orders=(2, 3, 4), n_steps=20, seed=0):
    """Random sweep of :func:`check_gauge_bounds` over dimensions and orders.

    Paths are random walks with random scale, random constant paths and
    zero paths, each paired with an independent partner for subadditivity.
    Returns ``{bound_name: {"violations", "max_slack", "min_slack", "n"}}``.
    """
    from .path_space import Grid, Path
    from .rng import generator

    rng = generator(seed, "gauge-sweep")
    grid = Grid(0.0, 1.0, n_steps)
    totals = {}
    for i in range(n_paths):
        d = dims[i % len(dims)]
        m = orders[(i // len(dims)) % len(orders)]
        end = int(rng.integers(0, n_steps + 1))
        p, q = (_random_path(rng, grid, d, end, i) for _ in range(2))
        for name, r in check_gauge_bounds(p, m, q).items():
            agg = totals.setdefault(
                name, {"violations": 0, "max_slack": -np.inf, "min_slack": np.inf, "n": 0}
            )
            agg["violations"] += r["violations"]
            agg["max_slack"] = max(agg["max_slack"], r["slack"])
            agg["min_slack"] = min(agg["min_slack"], r["slack"])
            agg["n"] += 1
    return totals


def _random_path(rng, grid, d, end, i):
    from .path_space import Path

    kind = i % 10
    if kind == 0:
        return Path(grid, np.zeros((end + 1, d)), end)
    scale = float(np.exp(rng.uniform(-2.0, 1.0)))
    if kind == 1:
        return Path.constant(grid, rng.normal(size=d) * scale, end)
    steps = rng.normal(size=(end + 1, d)) * scale / np.sqrt(grid.n_steps)
    return Path(grid, np.cumsum(steps, axis=0), end)


def bounds_report_json(report):
    return json.dumps(report, indent=2, sort_keys=True)
