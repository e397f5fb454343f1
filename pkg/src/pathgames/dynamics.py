"""Euler-Maruyama simulation of controlled path-dependent SDEs.

Coefficients are vectorized over samples: ``b(t, hist, u, v)`` receives the
history ``hist`` of shape ``(S, k + 1, d)`` (all grid values up to the current
time) and returns ``(S, d)``; ``sigma`` returns ``(S, d, n)``.  Controls
``u, v`` are scalars/vectors from the control grids, or per-sample arrays
when a feedback rule is in play.

Noise is drawn once per ``(sample, grid step)`` from per-sample counter-based
streams, so two initial conditions simulated with the same seed share their
Brownian increments exactly.
"""
import csv
import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng as _rng
from .path_space import Grid, Path, PathError


class SimulationError(RuntimeError):
    """A coefficient returned a non-finite value."""


@dataclass(frozen=True)
class SdeCoefficients:
    b: Callable
    sigma: Callable
    noise_dim: int
    lipschitz: float = 1.0
    name: str = "sde"


@dataclass(frozen=True)
class ControlSequence:
    """Per-step control values drawn from a finite grid."""

    values: tuple
    grid: tuple

    def __post_init__(self):
        vals = tuple(self.values)
        grid = tuple(self.grid)
        for v in vals:
            if not any(np.array_equal(np.asarray(v), np.asarray(g)) for g in grid):
                raise ValueError(f"control value {v!r} is not in the grid {grid!r}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "grid", grid)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    @classmethod
    def constant(cls, value, n_steps, grid=None):
        return cls((value,) * n_steps, (value,) if grid is None else grid)


def _as_controls(c, n_steps):
    if isinstance(c, ControlSequence):
        if len(c) != n_steps:
            raise ValueError(f"control sequence has {len(c)} steps, need {n_steps}")
        return c.values
    if c is None:
        return (0.0,) * n_steps
    return (c,) * n_steps


@dataclass
class PathBundle:
    """Full-horizon samples sharing one grid.

    ``values`` has shape ``(S, N + 1, d)``; samples agree with the initial
    path up to ``start_index``.  ``noise`` holds the standard normal draws
    ``(S, N, n)`` indexed by absolute grid step (rows before ``start_index``
    are unused); Brownian increments are ``sqrt(h) * noise``.
    """

    grid: Grid
    values: np.ndarray
    start_index: int
    seed: int
    noise: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[2]

    @property
    def end_index(self):
        return self.values.shape[1] - 1

    def dW(self):
        """Brownian increments ``(S, N, n)``."""
        return np.sqrt(self.grid.step) * self.noise

    def path(self, i, end_index=None):
        end = self.end_index if end_index is None else end_index
        return Path(self.grid, self.values[i, : end + 1], end)

    def __len__(self):
        return self.n_samples

    # -- persistence ----------------------------------------------------

    _MAGIC = b"PGB1"
    _HEAD = "<4sQQQQQdd"

    def to_bytes(self):
        s, l, d = self.values.shape
        head = struct.pack(
            self._HEAD, self._MAGIC, d, l - 1, s, int(self.seed) & ((1 << 64) - 1),
            self.start_index, self.grid.t0, self.grid.T,
        )
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        size = struct.calcsize(cls._HEAD)
        magic, d, steps, count, seed, start, t0, T = struct.unpack(cls._HEAD, data[:size])
        if magic != cls._MAGIC:
            raise ValueError("not a path bundle file")
        vals = np.frombuffer(data[size:], dtype="<f8")
        if vals.size != count * (steps + 1) * d:
            raise ValueError("truncated path bundle file")
        grid = Grid(t0, T, int(steps))
        return cls(grid, vals.reshape(count, steps + 1, d).copy(), int(start), int(seed))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sample", "time"] + [f"x{i + 1}" for i in range(self.dim)])
        times = self.grid.times
        for i in range(self.n_samples):
            for k, t in enumerate(times):
                writer.writerow([i, repr(float(t))] + [repr(float(x)) for x in self.values[i, k]])
        return buf.getvalue()


def noise_for(seed, n_samples, n_steps, noise_dim, first_sample=0):
    return _rng.standard_normals(seed, n_samples, (n_steps, noise_dim), "sde-noise", first_sample)


def _euler(coeffs, grid, values, noise, start, end, u, v):
    h = grid.step
    sq = np.sqrt(h)
    times = grid.times
    for k in range(start, end):
        hist = values[:, : k + 1]
        uk, vk = u[k - start], v[k - start]
        drift = np.asarray(coeffs.b(times[k], hist, uk, vk), dtype=float)
        vol = np.asarray(coeffs.sigma(times[k], hist, uk, vk), dtype=float)
        drift = np.broadcast_to(drift, values[:, k].shape)
        vol = np.broadcast_to(vol, (values.shape[0], values.shape[2], coeffs.noise_dim))
        if not (np.all(np.isfinite(drift)) and np.all(np.isfinite(vol))):
            raise SimulationError(f"non-finite coefficient at step {k} (t={times[k]:.6g})")
        values[:, k + 1] = values[:, k] + drift * h + sq * np.einsum("sdn,sn->sd", vol, noise[:, k])
    return values


def simulate(coeffs, initial, u, v, n_samples, seed, end_index=None, noise=None, jobs=1):
    """Simulate ``n_samples`` Euler-Maruyama paths started from ``initial``.

    Parameters
    ----------
    coeffs : SdeCoefficients
    initial : Path
        Initial history; its end time ``t`` must be before the horizon.
    u, v : ControlSequence, scalar or None
        Controls for the steps ``t .. end``; a scalar is held constant.
    n_samples, seed : int
    end_index : int, optional
        Last grid index to simulate to (default: the horizon).
    noise : array, optional
        Standard normals ``(S, N, n)`` to reuse (common random numbers).
    jobs : int
        Worker threads; results do not depend on it.

    Returns
    -------
    PathBundle
    """
    grid = initial.grid
    start = initial.end_index
    end = grid.n_steps if end_index is None else int(end_index)
    if start >= grid.n_steps:
        raise PathError("initial path is already at the horizon")
    if not start < end <= grid.n_steps:
        raise PathError(f"end_index {end} must lie in ({start}, {grid.n_steps}]")
    n_steps = end - start
    uu, vv = _as_controls(u, n_steps), _as_controls(v, n_steps)
    if noise is None:
        noise = noise_for(seed, n_samples, grid.n_steps, coeffs.noise_dim)
    noise = np.asarray(noise, dtype=float)
    if noise.shape[0] != n_samples or noise.shape[1] < end:
        raise ValueError(f"noise has shape {noise.shape}, need ({n_samples}, >={end}, n)")

    values = np.empty((n_samples, end + 1, initial.dim))
    values[:, : start + 1] = initial.values

    if jobs <= 1 or n_samples < 2 * jobs:
        _euler(coeffs, grid, values, noise, start, end, uu, vv)
    else:
        bounds = np.linspace(0, n_samples, jobs + 1).astype(int)

        def work(lo_hi):
            lo, hi = lo_hi
            _euler(coeffs, grid, values[lo:hi], noise[lo:hi], start, end, uu, vv)

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, zip(bounds[:-1], bounds[1:])))
    return PathBundle(grid, values, start, seed, noise)


def _sup_from(values, start, ref, end):
    """``sup_{start <= k <= end} |values[:, k] - ref|`` for each sample."""
    diff = values[:, start : end + 1] - ref
    return np.sqrt(np.einsum("skd,skd->sk", diff, diff).max(axis=1))


def _loglog_slope(x, y):
    lx, ly = np.log(x), np.log(y)
    return float(np.polyfit(lx, ly, 1)[0])


def moment_check(coeffs, initial, p, n_samples, seed, u=None, v=None,
                 perturbations=(0.1, 0.01, 0.001), min_window=4):
    """Empirical moment, scaling and stability estimates for the SDE.

    Reports

    * ``terminal``: ``E ||X_T||_0^p`` and the fitted ``C = E/(1 + ||x||_0^p)``;
    * ``increment``: ``E ||X_r - x_{t,r}||_0^p`` for windows ``r - t`` of
      ``min_window * 2**j`` steps, the log-log slope and its ratio to ``p/2``
      (``ok`` when the ratio lies in ``[0.8, 1.2]``);
    * ``stability``: ``E sup |X - X'|^p / ||x - x'||_0^p`` for initial paths
      shifted by each perturbation size under common noise, and the ratio of
      the largest to smallest value (``ok`` when below 2).
    """
    if p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2")
    base = simulate(coeffs, initial, u, v, n_samples, seed)
    X = base.values
    start, N = initial.end_index, initial.grid.n_steps
    h = initial.grid.step
    x_norm = float(np.sqrt(np.max(np.einsum("kd,kd->k", initial.values, initial.values))))

    full_sup = np.sqrt(np.einsum("skd,skd->sk", X, X).max(axis=1))
    term_moment = float(np.mean(full_sup**p))
    report = {
        "p": p,
        "n_samples": n_samples,
        "terminal": {
            "moment": term_moment,
            "stderr": float(np.std(full_sup**p) / np.sqrt(n_samples)),
            "C_hat": term_moment / (1.0 + x_norm**p),
            "finite": bool(np.isfinite(term_moment)),
        },
    }

    windows = []
    w = min_window
    while start + w <= N:
        windows.append(w)
        w *= 2
    incr = []
    ref = initial.values[-1]
    for w in windows:
        sup = _sup_from(X, start, ref, start + w)
        # the history before t is common to both paths and contributes nothing
        incr.append(float(np.mean(sup**p)))
    incr_report = {"windows": [w * h for w in windows], "moments": incr}
    if len(windows) >= 2 and all(m > 0 for m in incr):
        slope = _loglog_slope(np.array(windows) * h, np.array(incr))
        ratio = slope / (p / 2.0)
        incr_report.update(slope=slope, ratio=ratio, ok=bool(0.8 <= ratio <= 1.2))
    else:
        incr_report.update(slope=None, ratio=None, ok=all(m == 0 for m in incr))
    report["increment"] = incr_report

    ratios = []
    e1 = np.zeros(initial.dim)
    e1[0] = 1.0
    for eps in perturbations:
        moved = initial.shifted(eps * e1)
        alt = simulate(coeffs, moved, u, v, n_samples, seed, noise=base.noise)
        diff = alt.values[:, start:] - X[:, start:]
        sup = np.sqrt(np.einsum("skd,skd->sk", diff, diff).max(axis=1))
        ratios.append(float(np.mean(sup**p)) / eps**p)
    pos = [r for r in ratios if r > 0]
    spread = max(pos) / min(pos) if pos else 1.0
    report["stability"] = {
        "perturbations": list(perturbations),
        "ratios": ratios,
        "spread": float(spread),
        "ok": bool(np.all(np.isfinite(ratios)) and spread <= 2.0),
    }
    return report
