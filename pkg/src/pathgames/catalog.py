"""Built-in coefficient sets and test problems with known oracles.

Each entry builds its objects from a small parameter dict so scenario files
can reference it by name.  Game entries return ``{"spec", "initial"}``;
the PDE entry returns ``{"generator", "candidate"}``.
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bsde import BsdeDriver, RegressionBasis
from .dynamics import SdeCoefficients
from .functional_calculus import FunctionalHandle
from .game import GameSpec
from .path_space import Grid, Path
from .viscosity import CandidateSolution, heat_generator


def _col(c):
    """Control value(s) as a column that broadcasts against ``(S, d)``."""
    return np.reshape(np.asarray(c, dtype=float), (-1, 1))


def _zeros_like_state(hist):
    return np.zeros((hist.shape[0], hist.shape[2]))


def _unit_sigma(hist):
    s, _, d = hist.shape
    return np.broadcast_to(np.eye(d), (s, d, d))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    oracle: str
    description: str
    defaults: dict
    build: Callable = field(repr=False, compare=False)

    def make(self, params=None):
        params = dict(params or {})
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise KeyError(f"unknown parameters for {self.name!r}: {sorted(unknown)}")
        merged = {**self.defaults, **params}
        return self.build(merged)

    def describe(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "oracle": self.oracle,
            "description": self.description,
            "defaults": self.defaults,
        }


def _grid(p):
    return Grid(float(p.get("t0", 0.0)), float(p["T"]), int(p["n_steps"]))


def _driftless(p):
    grid = _grid(p)
    d = int(p["dim"])
    coeffs = SdeCoefficients(
        lambda t, h, u, v: _zeros_like_state(h),
        lambda t, h, u, v: _unit_sigma(h),
        d, 0.0, "driftless",
    )
    a = np.ones(d)
    payoff = p["payoff"]
    if payoff == "linear":
        phi = lambda h: h[:, -1] @ a
    elif payoff == "abs":
        phi = lambda h: np.linalg.norm(h[:, -1], axis=1)
    else:
        raise ValueError(f"payoff must be 'linear' or 'abs', got {payoff!r}")
    driver = BsdeDriver(lambda t, h, y, z, u, v: np.zeros(h.shape[0]), phi, 0.0, f"zero/{payoff}")
    spec = GameSpec(coeffs, driver, (0.0,), (0.0,), grid, "driftless-brownian")
    x0 = np.full(d, float(p["x0"]))
    return {"spec": spec, "initial": Path(grid, x0[None])}


def _bang_bang(p):
    grid = _grid(p)
    n = grid.n_steps
    x0 = float(p["x0"])
    coeffs = SdeCoefficients(
        lambda t, h, u, v: np.broadcast_to(_col(u), (h.shape[0], 1)),
        lambda t, h, u, v: np.zeros((h.shape[0], 1, 1)),
        1, 0.0, "bang-bang",
    )
    driver = BsdeDriver(
        lambda t, h, y, z, u, v: np.zeros(h.shape[0]),
        lambda h: -np.abs(h[:, -1, 0]),
        0.0, "terminal-distance",
    )
    # every reachable state lies on x0 + j * step, so hats at those knots are exact
    knots = tuple(x0 + grid.step * j for j in range(-n, n + 1))
    spec = GameSpec(
        coeffs, driver, (-1.0, 1.0), (0.0,), grid, "bang-bang",
        RegressionBasis("hat", 1e-10, knots),
    )
    return {"spec": spec, "initial": Path(grid, np.array([[x0]]))}


def bang_bang_brute_force(n_steps, T, x0):
    """Best ``-|x(T)|`` over all ``2**n_steps`` sequences of ``u = +-1``."""
    step = T / n_steps
    signs = ((np.arange(2**n_steps)[:, None] >> np.arange(n_steps)) & 1) * 2 - 1
    finals = x0 + step * signs.sum(axis=1)
    return float(np.max(-np.abs(finals)))


def _separable_lq(p):
    grid = _grid(p)
    c = [float(x) for x in p["controls"]]
    coeffs = SdeCoefficients(
        lambda t, h, u, v: np.broadcast_to(_col(u) + _col(v), (h.shape[0], 1)),
        lambda t, h, u, v: np.ones((h.shape[0], 1, 1)),
        1, 0.0, "separable-lq",
    )

    def q(t, h, y, z, u, v):
        x = h[:, -1, 0]
        return -(x**2) - 0.5 * np.asarray(u, dtype=float) ** 2 + 0.5 * np.asarray(v, dtype=float) ** 2 + 0 * y

    driver = BsdeDriver(q, lambda h: -h[:, -1, 0] ** 2, 0.0, "lq")
    spec = GameSpec(coeffs, driver, tuple(c), tuple(c), grid, "separable-lq")
    return {"spec": spec, "initial": Path(grid, np.array([[float(p["x0"])]]))}


def _bilinear(p):
    grid = _grid(p)
    coeffs = SdeCoefficients(
        lambda t, h, u, v: np.broadcast_to(_col(u) * _col(v), (h.shape[0], 1)),
        lambda t, h, u, v: np.ones((h.shape[0], 1, 1)),
        1, 0.0, "bilinear",
    )
    driver = BsdeDriver(
        lambda t, h, y, z, u, v: np.zeros(h.shape[0]),
        lambda h: h[:, -1, 0],
        0.0, "linear-terminal",
    )
    spec = GameSpec(coeffs, driver, (-1.0, 1.0), (-1.0, 1.0), grid, "bilinear-2x2")
    return {"spec": spec, "initial": Path(grid, np.array([[float(p["x0"])]]))}


def heat_candidate(d=None):
    """``V = |x(t)|^2 + d (T - t)`` with exact derivatives."""

    def ev(p):
        x = p.terminal
        return float(x @ x + p.dim * (p.grid.T - p.t))

    handle = FunctionalHandle(
        eval=ev,
        dt=lambda p: -float(p.dim),
        dx=lambda p: 2.0 * p.terminal,
        dxx=lambda p: 2.0 * np.eye(p.dim),
        growth_degree=2,
        name="heat-exact",
    )
    phi = lambda p: float(p.terminal @ p.terminal)
    return CandidateSolution(handle, phi, "solution")


def _heat(p):
    return {"generator": heat_generator(), "candidate": heat_candidate(), "grid": _grid(p), "dim": int(p["dim"])}


CATALOG = {
    e.name: e
    for e in (
        CatalogEntry(
            "driftless-brownian", "game", "martingale / closed form",
            "b = 0, sigma = I, q = 0, singleton controls; payoff a.x(T) or |x(T)|.",
            {"T": 1.0, "n_steps": 32, "dim": 1, "x0": 0.0, "payoff": "linear"},
            _driftless,
        ),
        CatalogEntry(
            "bang-bang", "game", "exhaustive enumeration",
            "sigma = 0, b = u in {-1, 1}, q = 0, payoff -|x(T)|; hat basis on the reachable lattice.",
            {"T": 1.0, "n_steps": 8, "x0": 0.3},
            _bang_bang,
        ),
        CatalogEntry(
            "separable-lq", "game", "Isaacs condition (lower = upper)",
            "b = u + v, sigma = 1, q = -x^2 - u^2/2 + v^2/2, payoff -x(T)^2.",
            {"T": 1.0, "n_steps": 16, "x0": 0.5, "controls": [-0.5, 0.0, 0.5]},
            _separable_lq,
        ),
        CatalogEntry(
            "bilinear-2x2", "game", "2x2 matrix game (Hamiltonian gap 2|p|)",
            "b = u v with u, v in {-1, 1}, sigma = 1, q = 0, payoff x(T).",
            {"T": 1.0, "n_steps": 16, "x0": 0.0},
            _bilinear,
        ),
        CatalogEntry(
            "heat-exact", "ppde", "closed-form classical solution",
            "F = tr(hess)/2 with V = |x(t)|^2 + d (T - t).",
            {"T": 1.0, "n_steps": 32, "dim": 2},
            _heat,
        ),
    )
}


def get(name):
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; known: {sorted(CATALOG)}") from None


def listing():
    return [e.describe() for e in CATALOG.values()]
