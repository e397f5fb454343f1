"""Discretized path space: uniform grids, stopped paths, sup norm and d_inf.

A :class:`Path` is a continuous path stopped at a grid time ``t``, stored as
its values at the grid points ``t0, t0 + h, ..., t``.  The sup norm is the
maximum over those grid values, so interior maxima between grid points are
not resolved.
"""
import csv
import io
import json
from dataclasses import dataclass

import numpy as np


# Relative (in units of the step) tolerance for treating a time as a grid point.
ON_GRID_TOL = 1e-6


class PathError(ValueError):
    """Invalid path construction or incompatible path operands."""


@dataclass(frozen=True)
class Grid:
    """Uniform time grid ``t0 < t0 + h < ... < T`` with ``n_steps`` steps."""

    t0: float
    T: float
    n_steps: int

    def __post_init__(self):
        if not np.isfinite(self.t0) or not np.isfinite(self.T):
            raise PathError("grid endpoints must be finite")
        if self.t0 < 0:
            raise PathError(f"t0 must be >= 0, got {self.t0}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise PathError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.T > self.t0:
            raise PathError(f"need T > t0, got t0={self.t0}, T={self.T}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def step(self):
        return (self.T - self.t0) / self.n_steps

    @property
    def times(self):
        return self.t0 + self.step * np.arange(self.n_steps + 1)

    def time(self, index):
        if not 0 <= index <= self.n_steps:
            raise PathError(f"index {index} outside grid 0..{self.n_steps}")
        return self.t0 + self.step * index

    def index_of(self, t):
        """Grid index of time ``t``.

        Times more than ``ON_GRID_TOL`` steps away from a grid point are
        rejected, as are times outside ``[t0, T]``.
        """
        k = (t - self.t0) / self.step
        idx = int(round(k))
        if abs(k - idx) > ON_GRID_TOL or not 0 <= idx <= self.n_steps:
            raise PathError(f"time {t} is not on the grid")
        return idx

    def compatible(self, other):
        """Same origin and step, so grid indices refer to the same times."""
        return np.isclose(self.t0, other.t0) and np.isclose(self.step, other.step)

    def to_dict(self):
        return {"t0": self.t0, "T": self.T, "n": self.n_steps}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["t0"]), float(data["T"]), int(data["n"]))


class Path:
    """A path stopped at grid index ``end_index``.

    ``values`` has shape ``(end_index + 1, dim)``; a 1-D array is read as a
    scalar path.  Instances are immutable.
    """

    __slots__ = ("grid", "end_index", "values")

    def __init__(self, grid, values, end_index=None):
        arr = np.array(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise PathError(f"values must be (n_points, dim), got shape {arr.shape}")
        if end_index is None:
            end_index = arr.shape[0] - 1
        if not 0 <= end_index <= grid.n_steps:
            raise PathError(f"end_index {end_index} outside grid 0..{grid.n_steps}")
        if arr.shape[0] != end_index + 1:
            raise PathError(f"expected {end_index + 1} values, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise PathError("path values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "end_index", int(end_index))
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Path is immutable")

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def t(self):
        """Current (end) time of the path."""
        return self.grid.time(self.end_index)

    @property
    def terminal(self):
        return self.values[-1]

    @property
    def times(self):
        return self.grid.times[: self.end_index + 1]

    def __eq__(self, other):
        if not isinstance(other, Path):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.end_index == other.end_index
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.grid, self.end_index, self.values.tobytes()))

    def __repr__(self):
        return f"Path(t={self.t:g}, dim={self.dim}, n_points={self.end_index + 1})"

    def with_terminal(self, value):
        """Same history with the last grid value replaced (a vertical bump)."""
        vals = self.values.copy()
        vals[-1] = value
        return Path(self.grid, vals, self.end_index)

    def prefix(self, index):
        """The path stopped at an earlier grid index."""
        if not 0 <= index <= self.end_index:
            raise PathError(f"prefix index {index} outside 0..{self.end_index}")
        return Path(self.grid, self.values[: index + 1], index)

    def __add__(self, other):
        a, b = align(self, other)
        return Path(_longer(self, other).grid, a + b)

    def __sub__(self, other):
        a, b = align(self, other)
        return Path(_longer(self, other).grid, a - b)

    def __neg__(self):
        return Path(self.grid, -self.values, self.end_index)

    def shifted(self, vector):
        """Add a constant vector to every value."""
        return Path(self.grid, self.values + np.asarray(vector, dtype=float), self.end_index)

    @classmethod
    def constant(cls, grid, value, end_index=None):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        end_index = grid.n_steps if end_index is None else end_index
        return cls(grid, np.tile(value, (end_index + 1, 1)), end_index)

    @classmethod
    def from_function(cls, grid, fn, end_index=None):
        """Sample ``fn(t)`` (scalar or vector valued) on the grid."""
        end_index = grid.n_steps if end_index is None else end_index
        vals = [np.atleast_1d(fn(t)) for t in grid.times[: end_index + 1]]
        return cls(grid, np.array(vals, dtype=float), end_index)

    # -- serialization -------------------------------------------------

    def to_json_dict(self):
        return {
            "grid": self.grid.to_dict(),
            "end_index": self.end_index,
            "values": self.values.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, data):
        return cls(Grid.from_dict(data["grid"]), data["values"], int(data["end_index"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_json_dict(json.loads(text))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time"] + [f"x{i + 1}" for i in range(self.dim)])
        for t, row in zip(self.times, self.values):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, grid=None):
        """Read the columnar CSV form.

        The grid is inferred from the time column (horizon = last time) unless
        given explicitly.
        """
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if not header or header[0] != "time" or header[1:] != [f"x{i + 1}" for i in range(len(header) - 1)]:
            raise PathError(f"bad CSV header {header!r}")
        data = np.array(body, dtype=float)
        times, vals = data[:, 0], data[:, 1:]
        if grid is None:
            if len(times) < 2:
                raise PathError("cannot infer a grid from a single row; pass grid=")
            grid = Grid(float(times[0]), float(times[-1]), len(times) - 1)
        for i, t in enumerate(times):
            if grid.index_of(t) != i:
                raise PathError(f"row {i} time {t} does not match the grid")
        return cls(grid, vals, len(times) - 1)


def _max_row_norm(values):
    """``max_k |values[k]|`` without under- or overflow in the squares."""
    scale = float(np.max(np.abs(values)))
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    v = values / scale
    return scale * float(np.sqrt(np.max(np.einsum("kd,kd->k", v, v))))


def sup_norm(p):
    """Maximum Euclidean norm over the grid values of ``p``."""
    return _max_row_norm(p.values)


def _aligned_values(p, end_index):
    idx = np.minimum(np.arange(end_index + 1), p.end_index)
    return p.values[idx]


def flat_extend(p, s):
    """Extend ``p`` to time ``s`` by holding its last value constant.

    ``s`` must be a grid time no earlier than ``p.t``.
    """
    idx = p.grid.index_of(s)
    if idx < p.end_index:
        raise PathError(f"cannot flat-extend a path at t={p.t} back to s={s}")
    if idx == p.end_index:
        return p
    return Path(p.grid, _aligned_values(p, idx), idx)


def _check_pair(p, q):
    if p.dim != q.dim:
        raise PathError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if not p.grid.compatible(q.grid):
        raise PathError("paths live on incompatible grids")


def _longer(p, q):
    return p if p.end_index >= q.end_index else q


def align(p, q):
    """Values of ``p`` and ``q`` flat-extended to the later end index."""
    _check_pair(p, q)
    end = max(p.end_index, q.end_index)
    return _aligned_values(p, end), _aligned_values(q, end)


def dist_dinfty(p, q):
    """``|t - s| + ||p_{t,t v s} - q_{s,t v s}||_0``."""
    a, b = align(p, q)
    return abs(p.t - q.t) + _max_row_norm(a - b)


def resample(p, grid):
    """Linear interpolation of ``p`` onto another grid (up to ``p``'s end time).

    A utility for comparing paths from different resolutions; not part of the
    metric.
    """
    # last grid point of the new grid not after p.t
    end = int(np.floor((min(p.t, grid.T) - grid.t0) / grid.step + ON_GRID_TOL))
    if end < 0:
        raise PathError("the path ends before the new grid starts")
    new_t = grid.times[: end + 1]
    cols = [np.interp(new_t, p.times, p.values[:, j]) for j in range(p.dim)]
    return Path(grid, np.column_stack(cols), end)
