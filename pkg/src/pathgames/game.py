"""Hamiltonians over finite control grids and DPP-based game values.

Player ``u`` maximizes the payoff, player ``v`` minimizes it.  Strategies
are step-local: at each grid step the responding player sees the
opponent's current action.  The lower value uses ``max_u min_v`` of the
one-step backward semigroup and the upper value ``min_v max_u``.  Ties are
broken by the lowest grid index.

The one-step semigroup is a single explicit BSDE step,
``G = E[V_{k+1}] + q dt``, with the conditional expectation regressed on
path features of the training bundle.  The training bundle is simulated
under uniformly random (exploratory) controls so that the states reached
under every policy are covered.
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng as _rng
from .bsde import BsdeDriver, PathStats, RegressionBasis, check_step, fit
from .dynamics import SdeCoefficients, _euler, noise_for
from .path_space import Grid, Path, PathError, flat_extend


@dataclass(frozen=True)
class GameSpec:
    """Coefficients, payoff and finite control grids of a game."""

    coeffs: SdeCoefficients
    driver: BsdeDriver
    u_grid: tuple
    v_grid: tuple
    grid: Grid
    name: str = "game"
    basis: RegressionBasis = field(default_factory=RegressionBasis)

    def __post_init__(self):
        if not self.u_grid or not self.v_grid:
            raise ValueError("control grids must be nonempty")
        object.__setattr__(self, "u_grid", tuple(self.u_grid))
        object.__setattr__(self, "v_grid", tuple(self.v_grid))

    @property
    def horizon(self):
        return self.grid.T


# -- Hamiltonians -------------------------------------------------------------


def hamiltonian(spec, p, r, grad, hess, u, v):
    """``<grad, b> + 1/2 tr(hess sigma sigma^T) + q(p, r, sigma^T grad, u, v)``."""
    hist = p.values[None]
    t = p.t
    grad = np.atleast_1d(np.asarray(grad, dtype=float))
    hess = np.atleast_2d(np.asarray(hess, dtype=float))
    b = np.broadcast_to(np.asarray(spec.coeffs.b(t, hist, u, v), dtype=float), (1, p.dim))[0]
    sig = np.broadcast_to(
        np.asarray(spec.coeffs.sigma(t, hist, u, v), dtype=float), (1, p.dim, spec.coeffs.noise_dim)
    )[0]
    z = sig.T @ grad
    q = np.asarray(spec.driver.q(t, hist, np.array([float(r)]), z[None], u, v), dtype=float)
    return float(grad @ b + 0.5 * np.trace(hess @ sig @ sig.T) + q.reshape(-1)[0])


def hamiltonian_matrix(spec, p, r, grad, hess):
    """``H`` at every grid pair: rows ``u``, columns ``v``."""
    return np.array(
        [[hamiltonian(spec, p, r, grad, hess, u, v) for v in spec.v_grid] for u in spec.u_grid]
    )


def hamiltonian_minus(spec, p, r, grad, hess):
    """``max_u min_v H``."""
    return float(hamiltonian_matrix(spec, p, r, grad, hess).min(axis=1).max())


def hamiltonian_plus(spec, p, r, grad, hess):
    """``min_v max_u H``."""
    return float(hamiltonian_matrix(spec, p, r, grad, hess).max(axis=0).min())


def isaacs_check(spec, samples, tol=1e-10):
    """Largest ``H+ - H-`` over ``samples`` of ``(path, r, grad, hess)``."""
    gaps = []
    for p, r, grad, hess in samples:
        m = hamiltonian_matrix(spec, p, r, grad, hess)
        gaps.append(float(m.max(axis=0).min() - m.min(axis=1).max()))
    gaps = np.array(gaps)
    worst = float(gaps.max()) if gaps.size else 0.0
    return {
        "n_samples": int(gaps.size),
        "max_gap": worst,
        "mean_gap": float(gaps.mean()) if gaps.size else 0.0,
        "min_gap": float(gaps.min()) if gaps.size else 0.0,
        "ordering_holds": bool(np.all(gaps >= 0.0)),
        "holds": bool(worst <= tol),
        "tolerance": tol,
    }


# -- value fields -------------------------------------------------------------


@dataclass
class ValueField:
    """Regression surfaces of the lower or upper value.

    ``surfaces[j]`` holds the coefficients at grid index ``start_index + j``;
    at ``end_index`` the field is the terminal data itself.  ``table`` keeps
    the fitted values at every step for the first few training samples.
    """

    kind: str
    grid: Grid
    start_index: int
    end_index: int
    basis: RegressionBasis
    surfaces: list
    value: float
    stderr: float
    table: np.ndarray
    flags: dict = field(default_factory=dict)

    def evaluate(self, k, hist):
        if not self.start_index <= k < self.end_index:
            raise ValueError(f"no surface at index {k}")
        A = self.basis.design(PathStats.of(np.asarray(hist, dtype=float)))
        return A @ self.surfaces[k - self.start_index]

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "grid": self.grid.to_dict(),
            "start_index": self.start_index,
            "end_index": self.end_index,
            "basis": self.basis.to_dict(),
            "surfaces": [np.asarray(c).tolist() for c in self.surfaces],
            "value": self.value,
            "stderr": self.stderr,
            "flags": self.flags,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            kind=data["kind"],
            grid=Grid.from_dict(data["grid"]),
            start_index=int(data["start_index"]),
            end_index=int(data["end_index"]),
            basis=RegressionBasis.from_dict(data["basis"]),
            surfaces=[np.array(c) for c in data["surfaces"]],
            value=float(data["value"]),
            stderr=float(data["stderr"]),
            table=np.zeros((0, 0)),
            flags=dict(data.get("flags", {})),
        )

    def table_rows(self):
        """``(time, point id, value)`` rows of the stored table."""
        times = self.grid.times
        rows = []
        for j in range(self.table.shape[0]):
            for i in range(self.table.shape[1]):
                rows.append((float(times[self.start_index + j]), i, float(self.table[j, i])))
        return rows


def _control_array(grid_values):
    arr = np.asarray(grid_values, dtype=float)
    return arr


def training_bundle(spec, initial, n_samples, seed, end_index=None):
    """Paths under uniformly random grid controls, plus their noise."""
    grid = spec.grid
    start = initial.end_index
    end = grid.n_steps if end_index is None else int(end_index)
    if not start < end <= grid.n_steps:
        raise PathError(f"end index {end} must lie in ({start}, {grid.n_steps}]")
    U, V = _control_array(spec.u_grid), _control_array(spec.v_grid)
    gen = _rng.generator(seed, "explore")
    ui = gen.integers(0, len(U), size=(end - start, n_samples))
    vi = gen.integers(0, len(V), size=(end - start, n_samples))
    noise = noise_for(seed, n_samples, grid.n_steps, spec.coeffs.noise_dim)
    values = np.empty((n_samples, end + 1, initial.dim))
    values[:, : start + 1] = initial.values
    _euler(spec.coeffs, grid, values, noise, start, end, list(U[ui]), list(V[vi]))
    return values, noise


def _step_state(spec, t, hist, u, v, dw, h):
    s, _, d = hist.shape
    b = np.broadcast_to(np.asarray(spec.coeffs.b(t, hist, u, v), dtype=float), (s, d))
    sig = np.broadcast_to(
        np.asarray(spec.coeffs.sigma(t, hist, u, v), dtype=float), (s, d, spec.coeffs.noise_dim)
    )
    out = hist[:, -1] + b * h + np.einsum("sdn,sn->sd", sig, dw)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite state at t={t:.6g}")
    return out


def value(spec, initial, kind="lower", n_samples=4096, seed=0, end_index=None,
          terminal=None, jobs=1):
    """Lower or upper value at ``initial`` by backward induction.

    Parameters
    ----------
    spec : GameSpec
    initial : Path
    kind : {"lower", "upper"}
    n_samples, seed : int
    end_index : int, optional
        Terminal grid index (default: the horizon).
    terminal : callable, optional
        Terminal data on full histories ``(S, end + 1, d) -> (S,)``;
        defaults to the payoff ``phi``.
    jobs : int
        Threads for the per-control-pair evaluations.

    Returns
    -------
    (float, ValueField)
    """
    if kind not in ("lower", "upper"):
        raise ValueError("kind must be 'lower' or 'upper'")
    grid = spec.grid
    h = grid.step
    check_step(spec.driver, h)
    start = initial.end_index
    end = grid.n_steps if end_index is None else int(end_index)
    basis = spec.basis
    if basis.n_features(initial.dim) > max(1, n_samples // 10):
        raise ValueError("too many features for the sample count (need S >= 10 * features)")
    X, noise = training_bundle(spec, initial, n_samples, seed, end)
    dW = np.sqrt(h) * noise
    term = spec.driver.phi if terminal is None else terminal
    times = grid.times
    pairs = [(i, j) for i in range(len(spec.u_grid)) for j in range(len(spec.v_grid))]
    n_table = min(16, n_samples)

    surfaces = [None] * (end - start)
    table = np.zeros((end - start, n_table))
    ridge_steps = set()
    noise_var = 0.0
    for k in range(end - 1, start - 1, -1):
        hist = X[:, : k + 1]
        stats = PathStats.of(hist)
        A = basis.design(stats) if k > start else np.ones((n_samples, 1))
        dwk = dW[:, k]
        t = times[k]

        def one_pair(ij, k=k, hist=hist, stats=stats, A=A, dwk=dwk, t=t):
            u, v = spec.u_grid[ij[0]], spec.v_grid[ij[1]]
            xn = _step_state(spec, t, hist, u, v, dwk, h)
            if k + 1 == end:
                cont = np.asarray(term(np.concatenate([hist, xn[:, None]], axis=1)), dtype=float)
            else:
                cont = basis.design(stats.advance(xn)) @ surfaces[k + 1 - start]
            ef = fit(A, cont, basis.ridge)
            zf = fit(A, cont[:, None] * dwk / h, basis.ridge)
            q = np.broadcast_to(
                np.asarray(spec.driver.q(t, hist, ef.fitted, zf.fitted, u, v), dtype=float),
                (n_samples,),
            )
            if not np.all(np.isfinite(q)):
                raise FloatingPointError(f"non-finite driver value at t={t:.6g}")
            return ef.fitted + q * h, cont - ef.fitted, ef.ridge_used or zf.ridge_used

        if jobs > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(one_pair, pairs))
        else:
            results = [one_pair(ij) for ij in pairs]
        nu, nv = len(spec.u_grid), len(spec.v_grid)
        G = np.stack([r[0] for r in results]).reshape(nu, nv, n_samples)
        resid = np.stack([r[1] for r in results]).reshape(nu, nv, n_samples)
        if any(r[2] for r in results):
            ridge_steps.add(k)
        cols = np.arange(n_samples)
        if kind == "lower":
            inner = G.min(axis=1)
            i_sel = inner.argmax(axis=0)
            j_sel = G[i_sel, :, cols].argmin(axis=1)
            target = inner[i_sel, cols]
        else:
            inner = G.max(axis=0)
            j_sel = inner.argmin(axis=0)
            i_sel = G[:, j_sel, cols].argmax(axis=0)
            target = inner[j_sel, cols]
        noise_var += float(np.mean(resid[i_sel, j_sel, cols] ** 2))
        vf = fit(A, target, basis.ridge)
        if vf.ridge_used:
            ridge_steps.add(k)
        coef = np.zeros(basis.n_features(initial.dim)) if k == start else None
        if k == start:
            coef[0] = vf.coef[0]
        surfaces[k - start] = vf.coef if coef is None else coef
        table[k - start] = vf.fitted[:n_table]
    est = float(table[0, 0])
    field_ = ValueField(
        kind=kind,
        grid=grid,
        start_index=start,
        end_index=end,
        basis=basis,
        surfaces=surfaces,
        value=est,
        stderr=float(np.sqrt(noise_var / n_samples)),
        table=table,
        flags={"ridge_fallback_steps": sorted(ridge_steps), "ridge_fallback": bool(ridge_steps)},
    )
    return est, field_


def dpp_consistency(spec, initial, delta, kind="lower", n_samples=4096, seed=0, floor=1e-9):
    """Compare ``value(initial)`` with the one-step DPP recomposition.

    The recomposition solves the game on ``[t, t + delta]`` with a fresh
    seed and terminal data given by the value surface at ``t + delta``.
    ``ok`` when the discrepancy is below three combined standard errors
    (plus a floating-point ``floor``).
    """
    grid = spec.grid
    k_mid = grid.index_of(initial.t + delta)
    if k_mid <= initial.end_index or abs(grid.time(k_mid) - initial.t - delta) > 1e-9 * grid.step:
        raise ValueError("delta must be a positive multiple of the step")
    full, fld = value(spec, initial, kind, n_samples, seed)
    if k_mid == grid.n_steps:
        comp, cfld = value(spec, initial, kind, n_samples, _rng.child_seed(seed, "dpp"))
    else:
        comp, cfld = value(
            spec, initial, kind, n_samples, _rng.child_seed(seed, "dpp"),
            end_index=k_mid, terminal=lambda hist: fld.evaluate(k_mid, hist),
        )
    se = float(np.hypot(fld.stderr, cfld.stderr))
    disc = abs(full - comp)
    return {
        "kind": kind,
        "delta": float(delta),
        "full": full,
        "recomposed": comp,
        "discrepancy": disc,
        "stderr": se,
        "ok": bool(disc < 3.0 * se + floor),
    }


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def regularity_probe(spec, base, perturbations=(0.1, 0.01, 0.001), n_samples=4096, seed=0,
                     kind="lower", time_base=None, time_steps=(1, 2, 4, 8, 16)):
    """Empirical path-Lipschitz and time-Hölder behaviour of the value.

    Path leg: ``|V(base + eps e_1) - V(base)| / eps`` under common random
    numbers for each ``eps`` (shifting the whole path moves the sup norm by
    exactly ``eps``); ``ok`` when the largest ratio is within a factor 2 of
    the smallest.

    Time leg: for ``h`` equal to each number of ``time_steps`` before the
    horizon, ``|V(gamma_{T-h}) - phi(gamma_{T-h, T})|`` where the second
    term is the payoff of the flat extension; the fitted log-log exponent
    is reported.  The time leg uses the last value of ``time_base``
    (default ``base``) held constant up to ``T - h``.
    """
    perts = [float(e) for e in perturbations]
    if any(e <= 0 for e in perts):
        raise ValueError("perturbations must be positive (identical paths are excluded)")
    v0, _ = value(spec, base, kind, n_samples, seed)
    e1 = np.zeros(base.dim)
    e1[0] = 1.0
    ratios = []
    for e in perts:
        ve, _ = value(spec, base.shifted(e * e1), kind, n_samples, seed)
        ratios.append(abs(ve - v0) / e)
    pos = [r for r in ratios if r > 0]
    spread = max(pos) / min(pos) if len(pos) == len(ratios) else float("inf")

    grid = spec.grid
    tb = base if time_base is None else time_base
    x_last = tb.terminal
    hs, diffs = [], []
    for m in time_steps:
        k = grid.n_steps - int(m)
        if k < 0:
            continue
        p = Path(grid, np.tile(x_last, (k + 1, 1)))
        vt, _ = value(spec, p, kind, n_samples, seed)
        ext = flat_extend(p, grid.T)
        phi = float(np.asarray(spec.driver.phi(ext.values[None])).reshape(-1)[0])
        hs.append(m * grid.step)
        diffs.append(abs(vt - phi))
    time_report = {"h": hs, "differences": diffs}
    if len(hs) >= 2 and all(d > 0 for d in diffs):
        time_report["exponent"] = _loglog_slope(np.array(hs), np.array(diffs))
    else:
        time_report["exponent"] = None
    x0 = float(np.sqrt(np.max(np.einsum("kd,kd->k", base.values, base.values))))
    return {
        "value": v0,
        "lipschitz": {
            "perturbations": perts,
            "ratios": ratios,
            "spread": float(spread),
            "ok": bool(np.isfinite(spread) and spread <= 2.0),
        },
        "growth_ratio": abs(v0) / (1.0 + x0),
        "time": time_report,
    }
