"""Dupire (pathwise) derivatives of non-anticipative functionals.

The horizontal derivative is a one-sided difference along the flat
extension; vertical derivatives bump only the last grid value.  The
functional Itô residual accumulates the local Itô expansion step by step
along a sampled path and returns what is left over at the end.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import gauge
from .path_space import Path, PathError, flat_extend, sup_norm


@dataclass(frozen=True)
class FunctionalHandle:
    """A non-anticipative functional with optional supplied derivatives.

    ``eval(path) -> float``.  ``dt``, ``dx`` and ``dxx`` take a path and
    return the horizontal derivative, the vertical gradient (``d``-vector) and
    the vertical Hessian (``d x d``).  When present they take precedence over
    numerical differences.

    ``along`` is an optional vectorized evaluator: given a bundle
    ``values`` of shape ``(S, L, d)`` and the grid, it returns a dict with
    arrays ``value (S, L)``, ``dt (S, L)``, ``dx (S, L, d)``, ``dxx (S, L, d, d)``
    at every prefix.  It is only used for bulk residual sweeps and must agree
    with the per-path evaluation.

    Callables must be reentrant.  ``tags`` is free-form metadata (growth
    degree, semicontinuity class).
    """

    eval: Callable[[Path], float]
    dt: Optional[Callable] = None
    dx: Optional[Callable] = None
    dxx: Optional[Callable] = None
    along: Optional[Callable] = None
    growth_degree: Optional[int] = None
    name: str = "f"
    tags: dict = field(default_factory=dict)

    def __call__(self, p):
        return float(self.eval(p))

    @property
    def smooth(self):
        return self.dt is not None and self.dx is not None and self.dxx is not None


def default_eps(p):
    return 1e-5 * (1.0 + sup_norm(p))


def horizontal_derivative(f, p, h=None, richardson=False):
    """``(f(p flat-extended by h) - f(p)) / h``.

    ``h`` defaults to one grid step and must be a positive multiple of it.
    With ``richardson=True`` the estimates at ``h`` and ``h/2`` (when ``h``
    spans an even number of steps) or ``2h`` and ``h`` are combined as
    ``2 D(h_small) - D(h_big)``.
    """
    step = p.grid.step
    n = 1 if h is None else h / step
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
        raise PathError(f"h={h} must be a positive multiple of the grid step {step}")
    if p.end_index + k > p.grid.n_steps:
        raise PathError(f"cannot extend the path at t={p.t} by {k} steps within T={p.grid.T}")
    base = f(p)

    def diff(steps):
        q = flat_extend(p, p.grid.time(p.end_index + steps))
        return (f(q) - base) / (steps * step)

    if not richardson:
        return diff(k)
    if k % 2 == 0:
        return 2.0 * diff(k // 2) - diff(k)
    if p.end_index + 2 * k > p.grid.n_steps:
        raise PathError("not enough room on the grid for Richardson refinement")
    return 2.0 * diff(k) - diff(2 * k)


def vertical_gradient(f, p, eps=None):
    """Central differences in the terminal value only."""
    eps = default_eps(p) if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = p.terminal
    grad = np.empty(p.dim)
    for i in range(p.dim):
        e = np.zeros(p.dim)
        e[i] = eps
        grad[i] = (f(p.with_terminal(x + e)) - f(p.with_terminal(x - e))) / (2.0 * eps)
    return grad


def vertical_hessian(f, p, eps=None):
    """Second-order central differences in the terminal value, symmetrized."""
    eps = default_eps(p) if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = p.dim
    x = p.terminal
    f0 = f(p)
    hess = np.empty((d, d))
    basis = np.eye(d) * eps

    def fx(shift):
        return f(p.with_terminal(x + shift))

    for i in range(d):
        hess[i, i] = (fx(basis[i]) - 2.0 * f0 + fx(-basis[i])) / eps**2
        for j in range(i + 1, d):
            val = (
                fx(basis[i] + basis[j]) - fx(basis[i] - basis[j])
                - fx(-basis[i] + basis[j]) + fx(-basis[i] - basis[j])
            ) / (4.0 * eps**2)
            hess[i, j] = hess[j, i] = val
    return 0.5 * (hess + hess.T)


def derivatives(f, p, eps=None, need_dt=True):
    """``(dt, dx, dxx)`` at ``p``, preferring supplied derivatives."""
    dt = None
    if need_dt:
        dt = f.dt(p) if f.dt is not None else horizontal_derivative(f, p)
    dx = np.asarray(f.dx(p), dtype=float) if f.dx is not None else vertical_gradient(f, p, eps)
    dxx = np.asarray(f.dxx(p), dtype=float) if f.dxx is not None else vertical_hessian(f, p, eps)
    return dt, np.atleast_1d(dx), np.atleast_2d(dxx)


def _check_coefficients(x, drift, diffusion, start_index):
    n_incr = x.end_index - start_index
    if n_incr < 0:
        raise ValueError("start_index beyond the end of the sample")
    if len(drift) != n_incr or len(diffusion) != n_incr:
        raise ValueError(
            f"need {n_incr} drift/diffusion entries, got {len(drift)} and {len(diffusion)}"
        )


def ito_residual(f, x, drift, diffusion, start_index=0, eps=None):
    """Terminal residual of the functional Itô expansion along one sample.

    Parameters
    ----------
    f : FunctionalHandle
    x : Path
        Sample of the semimartingale on the full horizon.
    drift, diffusion : sequences
        Per-step drift vectors (``d``) and diffusion matrices (``d x n``) for
        the steps ``start_index .. end - 1``.  The drift is not needed by the
        expansion (the actual increments carry it) but fixes the step layout.
    start_index : int
        Grid index of the initial time.

    Returns
    -------
    float
        ``f(X_T) - f(X_t) - sum_k [dt f dl + dx f . dX + 1/2 tr(dxx f a) dl]``,
        accumulated as a sum of per-step remainders.
    """
    _check_coefficients(x, drift, diffusion, start_index)
    dl = x.grid.step
    total = 0.0
    prev = x.prefix(start_index)
    f_prev = f(prev)
    for j, k in enumerate(range(start_index, x.end_index)):
        dt, dx, dxx = derivatives(f, prev, eps)
        nxt = x.prefix(k + 1)
        f_next = f(nxt)
        sig = np.atleast_2d(np.asarray(diffusion[j], dtype=float))
        if sig.shape[0] != x.dim:
            sig = sig.reshape(x.dim, -1)
        dX = x.values[k + 1] - x.values[k]
        total += (f_next - f_prev) - (
            dt * dl + float(dx @ dX) + 0.5 * float(np.trace(dxx @ sig @ sig.T)) * dl
        )
        prev, f_prev = nxt, f_next
    return total


def ito_residual_bundle(f, values, grid, diffusion, start_index=0):
    """Vectorized :func:`ito_residual` over a bundle using ``f.along``.

    ``values`` has shape ``(S, L, d)``; ``diffusion`` is either one ``d x n``
    matrix used at every step or an array ``(S, L - 1 - start_index, d, n)``.
    Returns the ``S`` terminal residuals.
    """
    if f.along is None:
        raise ValueError(f"functional {f.name!r} has no vectorized evaluator")
    values = np.asarray(values, dtype=float)
    s, l, d = values.shape
    out = f.along(values, grid)
    dl = grid.step
    sl = slice(start_index, l - 1)
    dX = np.diff(values[:, start_index:], axis=1)
    sig = np.asarray(diffusion, dtype=float)
    if sig.ndim == 2:
        a = sig @ sig.T
        trace_term = np.einsum("skij,ji->sk", out["dxx"][:, sl], a)
    else:
        a = np.einsum("skin,skjn->skij", sig, sig)
        trace_term = np.einsum("skij,skji->sk", out["dxx"][:, sl], a)
    df = np.diff(out["value"][:, start_index:], axis=1)
    local = df - (
        out["dt"][:, sl] * dl
        + np.einsum("skd,skd->sk", out["dx"][:, sl], dX)
        + 0.5 * trace_term * dl
    )
    return local.sum(axis=1)


# -- stock functionals ---------------------------------------------------


def terminal_linear(a):
    """``f(p) = a . p(t)`` with exact derivatives."""
    a = np.atleast_1d(np.asarray(a, dtype=float))

    def along(values, grid):
        s, l, d = values.shape
        return {
            "value": values @ a,
            "dt": np.zeros((s, l)),
            "dx": np.broadcast_to(a, (s, l, d)),
            "dxx": np.zeros((s, l, d, d)),
        }

    return FunctionalHandle(
        eval=lambda p: float(p.terminal @ a),
        dt=lambda p: 0.0,
        dx=lambda p: a.copy(),
        dxx=lambda p: np.zeros((a.size, a.size)),
        along=along,
        growth_degree=1,
        name="terminal-linear",
    )


def terminal_quadratic():
    """``f(p) = |p(t)|^2``."""

    def along(values, grid):
        s, l, d = values.shape
        return {
            "value": np.einsum("sld,sld->sl", values, values),
            "dt": np.zeros((s, l)),
            "dx": 2.0 * values,
            "dxx": np.broadcast_to(2.0 * np.eye(d), (s, l, d, d)),
        }

    return FunctionalHandle(
        eval=lambda p: float(p.terminal @ p.terminal),
        dt=lambda p: 0.0,
        dx=lambda p: 2.0 * p.terminal,
        dxx=lambda p: 2.0 * np.eye(p.dim),
        along=along,
        growth_degree=2,
        name="terminal-quadratic",
    )


def gauge_functional(m=gauge.DEFAULT_ORDER):
    """The gauge of order ``m`` with its closed-form derivatives."""

    def along(values, grid):
        ups, grad, hess = gauge.upsilon_along(values, m)
        return {"value": ups, "dt": np.zeros_like(ups), "dx": grad, "dxx": hess}

    return FunctionalHandle(
        eval=lambda p: gauge.upsilon(p, m),
        dt=lambda p: 0.0,
        dx=lambda p: gauge.upsilon_grad(p, m),
        dxx=lambda p: gauge.upsilon_hess(p, m),
        along=along,
        growth_degree=2 * m,
        name=f"gauge-{m}",
    )


def running_integral():
    """Trapezoidal integral of the first component over ``[t0, t]``."""

    def ev(p):
        v = p.values[:, 0]
        if v.size < 2:
            return 0.0
        return float(p.grid.step * (v.sum() - 0.5 * (v[0] + v[-1])))

    return FunctionalHandle(eval=ev, growth_degree=1, name="riemann-sum")


def without_derivatives(f):
    """Copy of ``f`` that forces numerical derivatives."""
    return FunctionalHandle(eval=f.eval, growth_degree=f.growth_degree, name=f.name + "-numeric")


STOCK = {
    "terminal-linear": lambda d: terminal_linear(np.ones(d)),
    "terminal-quadratic": lambda d: terminal_quadratic(),
    "gauge": lambda d: gauge_functional(),
}


def ito_convergence(names, n_samples, seed, levels=(8, 10), dim=1, T=1.0, chunk=2000):
    """RMS Itô residual along Brownian samples at steps ``T / 2**level``.

    Returns ``{name: {"rms": [...], "max_abs": [...]}}`` with one entry per
    level, plus ``"levels"``.  Samples are processed in chunks to bound
    memory; the result does not depend on ``chunk``.
    """
    from . import rng as _rng
    from .path_space import Grid

    out = {"levels": list(levels)}
    funcs = {name: STOCK[name](dim) for name in names}
    sums = {name: np.zeros(len(levels)) for name in names}
    peaks = {name: np.zeros(len(levels)) for name in names}
    for li, lev in enumerate(levels):
        n = 2**lev
        grid = Grid(0.0, T, n)
        for lo in range(0, n_samples, chunk):
            size = min(chunk, n_samples - lo)
            z = _rng.standard_normals(seed, size, (n, dim), f"ito-{lev}", first_sample=lo)
            values = np.zeros((size, n + 1, dim))
            values[:, 1:] = np.cumsum(np.sqrt(grid.step) * z, axis=1)
            for name, f in funcs.items():
                res = ito_residual_bundle(f, values, grid, np.eye(dim))
                sums[name][li] += float(np.sum(res**2))
                peaks[name][li] = max(peaks[name][li], float(np.max(np.abs(res))))
    for name in names:
        out[name] = {
            "rms": [float(np.sqrt(s / n_samples)) for s in sums[name]],
            "max_abs": peaks[name].tolist(),
        }
    return out
