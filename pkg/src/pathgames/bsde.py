"""Least-squares Monte Carlo for the BSDE payoff and its backward semigroup.

Sign convention: ``dY = -q ds + Z dW`` with ``Y_T = phi(X_T)``, so a constant
driver ``c`` adds ``c (T - t)`` and ``q = r y`` grows the terminal value by
``exp(r (T - t))``.

Conditional expectations are regressions on path features.  The default
features at grid index ``k`` are: a constant, the current value, the running
maximum and running average of each component, and the pairwise products of
the current components.
"""
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import simulate


@dataclass(frozen=True)
class BsdeDriver:
    """Driver ``q(t, hist, y, z, u, v) -> (S,)`` and terminal ``phi(hist) -> (S,)``."""

    q: Callable
    phi: Callable
    lipschitz: float = 0.0
    name: str = "driver"


def zero_driver(phi, name="zero"):
    return BsdeDriver(lambda t, hist, y, z, u, v: np.zeros(hist.shape[0]), phi, 0.0, name)


# -- features ---------------------------------------------------------------


@dataclass
class PathStats:
    """Running statistics of a bundle at one grid index.

    ``current``, ``run_max``, ``run_avg`` all have shape ``(S, d)``;
    ``count`` is the number of grid points seen.
    """

    current: np.ndarray
    run_max: np.ndarray
    run_avg: np.ndarray
    count: int

    @classmethod
    def of(cls, hist):
        return cls(hist[:, -1], hist.max(axis=1), hist.mean(axis=1), hist.shape[1])

    def advance(self, new):
        """Statistics after appending ``new`` (shape ``(S, d)``) to every path."""
        new = np.asarray(new, dtype=float)
        c = self.count
        return PathStats(
            new, np.maximum(self.run_max, new), (self.run_avg * c + new) / (c + 1), c + 1
        )


@dataclass(frozen=True)
class RegressionBasis:
    """Feature map for the regressions.

    ``kind`` is ``"path"`` (default features), ``"constant"`` or ``"hat"``
    (piecewise-linear hats in the first component at the given ``knots`` plus
    a constant; for low-dimensional problems with kinks).
    """

    kind: str = "path"
    ridge: float = 1e-8
    knots: tuple = ()

    def n_features(self, d):
        if self.kind == "constant":
            return 1
        if self.kind == "hat":
            return 1 + len(self.knots)
        return 1 + 3 * d + d * (d + 1) // 2

    def design(self, stats):
        x = stats.current
        s, d = x.shape
        if self.kind == "constant":
            return np.ones((s, 1))
        if self.kind == "hat":
            return np.column_stack([np.ones(s), _hats(x[:, 0], np.asarray(self.knots, dtype=float))])
        cols = [np.ones((s, 1)), x, stats.run_max, stats.run_avg]
        iu, ju = np.triu_indices(d)
        cols.append(x[:, iu] * x[:, ju])
        return np.hstack(cols)

    def to_dict(self):
        return {"kind": self.kind, "ridge": self.ridge, "knots": list(self.knots)}

    @classmethod
    def from_dict(cls, data):
        return cls(data.get("kind", "path"), float(data.get("ridge", 1e-8)), tuple(data.get("knots", ())))


def _hats(x, knots):
    """Piecewise-linear interpolation basis at ``knots`` (flat beyond the ends)."""
    k = len(knots)
    out = np.zeros((x.size, k))
    xc = np.clip(x, knots[0], knots[-1])
    j = np.clip(np.searchsorted(knots, xc, side="right") - 1, 0, k - 2)
    left, right = knots[j], knots[j + 1]
    w = (xc - left) / (right - left)
    rows = np.arange(x.size)
    out[rows, j] = 1.0 - w
    out[rows, j + 1] += w
    return out


@dataclass
class FitResult:
    coef: np.ndarray
    fitted: np.ndarray
    ridge_used: bool


def fit(A, y, ridge=1e-8):
    """Least-squares regression of ``y`` (``(S,)`` or ``(S, k)``) on ``A``.

    Zero-variance feature columns other than the constant are dropped.
    Constant targets are reproduced exactly.  A remaining rank deficiency
    switches to a ridge solve, reported in ``ridge_used``.
    """
    y = np.asarray(y, dtype=float)
    vec = y.ndim == 1
    Y = y[:, None] if vec else y
    s, f = A.shape
    coef = np.zeros((f, Y.shape[1]))
    fitted = np.empty_like(Y)
    const_cols = np.ptp(Y, axis=0) == 0
    if np.all(const_cols):
        coef[0] = Y[0]
        fitted[:] = Y[0]
        return FitResult(coef[:, 0] if vec else coef, fitted[:, 0] if vec else fitted, False)

    spread = np.ptp(A, axis=0)
    keep = spread > 1e-12 * (1.0 + np.abs(A).max(axis=0))
    keep[0] = True
    Ak = A[:, keep]
    ridge_used = False
    rank = np.linalg.matrix_rank(Ak)
    if rank == Ak.shape[1]:
        ck, *_ = np.linalg.lstsq(Ak, Y, rcond=None)
    else:
        ridge_used = True
        G = Ak.T @ Ak
        lam = ridge * max(np.trace(G) / G.shape[0], 1.0)
        ck = np.linalg.solve(G + lam * np.eye(G.shape[0]), Ak.T @ Y)
    coef[keep] = ck
    fitted = Ak @ ck
    fitted[:, const_cols] = Y[0, const_cols]
    coef[:, const_cols] = 0.0
    coef[0, const_cols] = Y[0, const_cols]
    if vec:
        return FitResult(coef[:, 0], fitted[:, 0], ridge_used)
    return FitResult(coef, fitted, ridge_used)


# -- solution ---------------------------------------------------------------


@dataclass
class BsdeSolution:
    """Output of :func:`solve`.

    ``y_surfaces[j]`` and ``z_surfaces[j]`` are the regression coefficients at
    grid index ``start_index + j``.
    """

    y0: float
    stderr: float
    y_surfaces: list
    z_surfaces: list
    start_index: int
    end_index: int
    basis: RegressionBasis
    n_samples: int
    flags: dict = field(default_factory=dict)

    def surface_at(self, k):
        return self.y_surfaces[k - self.start_index]

    def evaluate(self, k, hist):
        """Fitted ``Y`` at grid index ``k`` on histories ``hist`` (``(S, k + 1, d)``)."""
        if k == self.end_index:
            raise ValueError("the terminal surface is the terminal data itself")
        A = self.basis.design(PathStats.of(np.asarray(hist, dtype=float)))
        return A @ self.surface_at(k)

    def to_json_dict(self):
        return {
            "y0": self.y0,
            "stderr": self.stderr,
            "start_index": self.start_index,
            "end_index": self.end_index,
            "n_samples": self.n_samples,
            "basis": self.basis.to_dict(),
            "y_surfaces": [np.asarray(c).tolist() for c in self.y_surfaces],
            "z_surfaces": [np.asarray(c).tolist() for c in self.z_surfaces],
            "flags": self.flags,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            y0=float(data["y0"]),
            stderr=float(data["stderr"]),
            y_surfaces=[np.array(c) for c in data["y_surfaces"]],
            z_surfaces=[np.array(c) for c in data["z_surfaces"]],
            start_index=int(data["start_index"]),
            end_index=int(data["end_index"]),
            basis=RegressionBasis.from_dict(data["basis"]),
            n_samples=int(data["n_samples"]),
            flags=dict(data.get("flags", {})),
        )


def _controls(c, n):
    from .dynamics import _as_controls

    return _as_controls(c, n)


def check_step(driver, h):
    if driver.lipschitz * h >= 0.5:
        raise ValueError(
            f"driver Lipschitz hint {driver.lipschitz} with step {h} violates L*h < 0.5"
        )


def solve(driver, bundle, u=None, v=None, basis=None, terminal=None, end_index=None, picard=1):
    """Backward least-squares recursion on a simulated bundle.

    Parameters
    ----------
    driver : BsdeDriver
    bundle : PathBundle
        Simulated under the same controls ``u, v``.
    u, v : ControlSequence, scalar or None
    basis : RegressionBasis, optional
    terminal : array, optional
        Terminal values ``(S,)`` at ``end_index``; defaults to ``phi`` of the
        full paths.
    end_index : int, optional
        Terminal grid index (default: the bundle's last index).
    picard : int
        Number of corrections of the implicit ``q(Y_k)`` dependence.

    Returns
    -------
    BsdeSolution
    """
    basis = RegressionBasis() if basis is None else basis
    grid = bundle.grid
    h = grid.step
    check_step(driver, h)
    start = bundle.start_index
    end = bundle.end_index if end_index is None else int(end_index)
    X = bundle.values
    s = X.shape[0]
    if basis.n_features(bundle.dim) > max(1, s // 10):
        raise ValueError("too many features for the sample count (need S >= 10 * features)")
    uu, vv = _controls(u, end - start), _controls(v, end - start)
    if terminal is None:
        Y = np.asarray(driver.phi(X[:, : end + 1]), dtype=float)
    else:
        Y = np.asarray(terminal, dtype=float)
    if not np.all(np.isfinite(Y)):
        raise FloatingPointError("non-finite terminal values")
    dW = bundle.dW()
    times = grid.times
    y_surf, z_surf = [None] * (end - start), [None] * (end - start)
    ridge_steps = []
    realized = Y.copy()
    for k in range(end - 1, start - 1, -1):
        hist = X[:, : k + 1]
        A = basis.design(PathStats.of(hist)) if k > start else np.ones((s, 1))
        uk, vk = uu[k - start], vv[k - start]
        zf = fit(A, Y[:, None] * dW[:, k] / h, basis.ridge)
        Z = zf.fitted
        ef = fit(A, Y, basis.ridge)
        y_pred = fit(A, Y + _q(driver, times[k], hist, Y, Z, uk, vk) * h, basis.ridge).fitted
        for _ in range(picard):
            qh = _q(driver, times[k], hist, y_pred, Z, uk, vk) * h
            y_pred = ef.fitted + qh
        if picard < 1:
            qh = y_pred - ef.fitted
        realized += qh
        yf = fit(A, y_pred, basis.ridge)
        if zf.ridge_used or ef.ridge_used or yf.ridge_used:
            ridge_steps.append(k)
        y_surf[k - start] = _pad(yf.coef, A.shape[1], basis.n_features(bundle.dim))
        z_surf[k - start] = _pad(zf.coef, A.shape[1], basis.n_features(bundle.dim))
        Y = y_pred
    y0 = float(Y[0]) if np.ptp(Y) == 0 else float(Y.mean())
    # pathwise realized cost: terminal value plus the accumulated driver
    se = float(np.std(realized) / np.sqrt(s))
    return BsdeSolution(
        y0=y0,
        stderr=se,
        y_surfaces=y_surf,
        z_surfaces=z_surf,
        start_index=start,
        end_index=end,
        basis=basis,
        n_samples=s,
        flags={"ridge_fallback_steps": sorted(ridge_steps), "ridge_fallback": bool(ridge_steps)},
    )


def _pad(coef, have, want):
    coef = np.asarray(coef)
    if have == want:
        return coef
    out = np.zeros((want,) + coef.shape[1:])
    out[:have] = coef
    return out


def _q(driver, t, hist, y, z, u, v):
    out = np.asarray(driver.q(t, hist, y, z, u, v), dtype=float)
    out = np.broadcast_to(out, y.shape)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite driver value at t={t:.6g}")
    return out


def backward_semigroup(driver, coeffs, initial, u, v, delta, eta, n_samples, seed,
                       basis=None, noise=None):
    """``G_{t, t + delta}[eta(X_{t + delta})]`` by simulation and regression.

    ``eta`` maps histories ``(S, k + 1, d)`` at ``t + delta`` to ``(S,)``;
    ``u, v`` cover the steps in ``[t, t + delta)``.  Returns
    ``(value, stderr, solution)``.
    """
    grid = initial.grid
    k_end = grid.index_of(initial.t + delta)
    if delta <= 0 or k_end <= initial.end_index:
        raise ValueError("delta must be at least one grid step")
    bundle = simulate(coeffs, initial, u, v, n_samples, seed, end_index=k_end, noise=noise)
    term = np.asarray(eta(bundle.values), dtype=float)
    sol = solve(driver, bundle, u, v, basis, terminal=term, end_index=k_end)
    return sol.y0, sol.stderr, sol
