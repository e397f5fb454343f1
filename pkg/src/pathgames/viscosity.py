"""Residual, consistency, comparison and stability checks for path-dependent PDEs.

The equation is ``dt V + F(gamma, V, dx V, dxx V) = 0`` with terminal data
``phi``.  A candidate is a subsolution when the residual is nonnegative and
``V <= phi`` at the horizon, a supersolution with the reverse signs.

Viscosity properties of non-smooth candidates are only probed through the
penalized test construction in :func:`penalized_test_probe`, which certifies
a maximizer of ``w`` minus a smooth gauge-penalized test functional on a
finite domain.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import gauge
from .functional_calculus import FunctionalHandle, derivatives
from .path_space import Path, PathError
from .variational import FiniteDomain, ebp_maximize, gauge_lambda, verify_ebp


class HypothesisError(ValueError):
    """A precondition of the comparison principle fails on the samples."""


@dataclass(frozen=True)
class GeneratorHandle:
    """Generator ``F(path, r, grad, hess) -> float`` with descriptive hints."""

    F: Callable
    nu: float = 0.0
    M_F: Optional[float] = None
    modulus: str = ""
    name: str = "F"

    def __call__(self, p, r, grad, hess):
        return float(self.F(p, r, np.atleast_1d(grad), np.atleast_2d(hess)))


@dataclass(frozen=True)
class CandidateSolution:
    """A functional with terminal data and a declared role."""

    handle: FunctionalHandle
    phi: Callable
    role: str = "solution"

    def __post_init__(self):
        if self.role not in ("solution", "subsolution", "supersolution"):
            raise ValueError(f"unknown role {self.role!r}")


def heat_generator():
    """``F = 1/2 tr(hess)``."""
    return GeneratorHandle(lambda p, r, g, h: 0.5 * np.trace(h), nu=0.0, M_F=1.0, name="half-trace")


def time_shifted(cand, c, role=None):
    """Candidate ``V + c (T - t)``; exact derivatives are shifted too."""
    f = cand.handle

    def ev(p):
        return f.eval(p) + c * (p.grid.T - p.t)

    dt = None if f.dt is None else (lambda p: f.dt(p) - c)
    handle = FunctionalHandle(
        eval=ev, dt=dt, dx=f.dx, dxx=f.dxx, growth_degree=f.growth_degree,
        name=f"{f.name}{c:+g}(T-t)",
    )
    return CandidateSolution(handle, cand.phi, role or cand.role)


def classical_residual(F, cand, p, eps=None):
    """``dt V + F(p, V, dx V, dxx V)`` at a path ending before the horizon."""
    if p.end_index >= p.grid.n_steps:
        raise PathError("the horizontal derivative is undefined at the horizon")
    f = cand.handle if isinstance(cand, CandidateSolution) else cand
    dt, dx, dxx = derivatives(f, p, eps)
    return float(dt + F(p, f(p), dx, dxx))


def _tol(f, value, tol):
    if tol is not None:
        return tol
    scale = 1e-8 if f.smooth else 1e-4
    return scale * (1.0 + abs(value))


def consistency_check(F, cand, samples, terminal_samples=(), tol=None):
    """Classify a smooth candidate by the signs of its residuals.

    Returns a report with ``role`` in ``{"solution", "subsolution",
    "supersolution", "neither"}``, the witnesses of positive and negative
    residuals, and the terminal check against ``phi``.
    """
    f = cand.handle
    res, tols = [], []
    for p in samples:
        r = classical_residual(F, cand, p)
        res.append(r)
        tols.append(_tol(f, f(p), tol))
    res, tols = np.array(res), np.array(tols)
    pos = np.flatnonzero(res > tols)
    neg = np.flatnonzero(res < -tols)
    if pos.size == 0 and neg.size == 0:
        role = "solution"
    elif neg.size == 0:
        role = "subsolution"
    elif pos.size == 0:
        role = "supersolution"
    else:
        role = "neither"

    term_gap = np.array([f(p) - float(cand.phi(p)) for p in terminal_samples])
    term_tol = np.array([_tol(f, float(cand.phi(p)), tol) for p in terminal_samples])
    if term_gap.size:
        term = {
            "n": int(term_gap.size),
            "max_gap": float(term_gap.max()),
            "min_gap": float(term_gap.min()),
            "le_phi": bool(np.all(term_gap <= term_tol)),
            "ge_phi": bool(np.all(term_gap >= -term_tol)),
        }
    else:
        term = {"n": 0, "max_gap": 0.0, "min_gap": 0.0, "le_phi": True, "ge_phi": True}
    terminal_ok = {
        "solution": term["le_phi"] and term["ge_phi"],
        "subsolution": term["le_phi"],
        "supersolution": term["ge_phi"],
        "neither": False,
    }[role]
    return {
        "role": role,
        "n_samples": int(res.size),
        "max_residual": float(res.max()) if res.size else 0.0,
        "min_residual": float(res.min()) if res.size else 0.0,
        "positive_witnesses": pos.tolist(),
        "negative_witnesses": neg.tolist(),
        "terminal": term,
        "terminal_ok": bool(terminal_ok),
        "matches_declared": bool(role == cand.role and terminal_ok),
    }


def _evaluator(w):
    if isinstance(w, CandidateSolution):
        return w.handle, w.phi
    return w, w


def comparison_harness(w1, w2, samples, terminal_samples=(), tol=1e-8):
    """Sampled points where the subsolution exceeds the supersolution.

    ``w1`` and ``w2`` are candidates or plain callables on paths.  ``tol``
    is a number or a callable ``tol(path) -> float``.  The terminal ordering
    ``w1 <= w2`` is a hypothesis: a violation raises :class:`HypothesisError`.

    Returns a list of ``{"index", "gap", "time", "path_csv"}`` dicts.
    """
    f1, phi1 = _evaluator(w1)
    f2, phi2 = _evaluator(w2)
    tol_at = tol if callable(tol) else (lambda p, _t=float(tol): _t)
    for i, p in enumerate(terminal_samples):
        gap = float(phi1(p)) - float(phi2(p))
        if gap > tol_at(p):
            raise HypothesisError(
                f"terminal ordering fails at terminal sample {i} (gap {gap:.3g})"
            )
    out = []
    for i, p in enumerate(samples):
        gap = float(f1(p)) - float(f2(p))
        if gap > tol_at(p):
            out.append({"index": i, "gap": gap, "time": p.t, "path_csv": p.to_csv()})
    return out


def stability_sweep(F_family, cand_family, F, cand, samples, schedule, tol=1e-8):
    """Uniform discrepancies of perturbed generators and candidates.

    For each ``eps`` in ``schedule`` reports
    ``sup |F_eps(x) - F(x)|`` at the target candidate's derivatives and
    ``sup |v_eps - v|`` over ``samples``.  The family is flagged as
    converging when the combined discrepancy is nonincreasing along the
    schedule and its last value is at most half of the first.
    ``limit_residual`` is the largest target residual.
    """
    f = cand.handle
    pts = []
    for p in samples:
        _, dx, dxx = derivatives(f, p, need_dt=False)
        pts.append((p, f(p), dx, dxx))
    rows = []
    for eps in schedule:
        Fe, ce = F_family(eps), cand_family(eps)
        fe = ce.handle if isinstance(ce, CandidateSolution) else ce
        dF = max(abs(Fe(p, r, g, h) - F(p, r, g, h)) for p, r, g, h in pts)
        dv = max(abs(fe(p) - r) for p, r, _, _ in pts)
        rows.append({"eps": float(eps), "F": float(dF), "v": float(dv), "total": float(max(dF, dv))})
    totals = [r["total"] for r in rows]
    nonincreasing = all(b <= a for a, b in zip(totals, totals[1:]))
    shrinks = totals[0] == 0.0 or totals[-1] <= 0.5 * totals[0]
    limit = max(abs(classical_residual(F, cand, p)) for p in samples)
    return {
        "rows": rows,
        "monotone": bool(nonincreasing),
        "converging": bool(nonincreasing and shrinks),
        "limit_residual": float(limit),
        "limit_ok": bool(limit <= tol),
    }


def _penalty_bounds(test, centers, m):
    """Gauge derivative bounds at ``test`` for each penalty center."""
    worst_g, worst_h, ok = 0.0, 0.0, True
    for c, _ in centers:
        diff = test - c
        x = float(np.linalg.norm(diff.terminal))
        _, g, h = gauge.upsilon_all(diff, m)
        gn, hn = float(np.linalg.norm(g)), float(np.linalg.norm(h, 2))
        gb, hb = 6 * m * x ** (2 * m - 1), 6 * m * (6 * m - 1) * x ** (2 * m - 2)
        ok &= gauge._leq(gn, gb) and gauge._leq(hn, hb)
        worst_g = max(worst_g, gn - gb)
        worst_h = max(worst_h, hn - hb)
    return {"holds": bool(ok), "grad_excess": worst_g, "hess_excess": worst_h}


def penalized_test_probe(w, anchor, domain, delta0=1.0, m=gauge.DEFAULT_ORDER):
    """Certified maximizer of ``w`` minus a gauge-penalized test functional.

    Over the domain points ending no earlier than ``anchor``, the base
    objective is ``Gamma = w - ubar0(., anchor)``.  The perturbed
    maximization starts at ``anchor`` with ``epsilon`` the (slightly
    inflated) gap ``sup Gamma - Gamma(anchor)``.  The returned test
    functional is ``ubar0(., anchor) + sum_i w_i ubar0(., c_i)`` shifted to
    touch ``w`` at the test point.

    Returns
    -------
    dict
        ``test_point``, ``ebp`` (the certificate), ``verification``,
        ``test_functional`` (anchor, centers, shift), ``penalty_at_test``
        and ``penalty_bounds``.
    """
    later = [p for p in domain if p.t >= anchor.t - 1e-12]
    if not any(p == anchor for p in later):
        later.append(anchor)
    sub = FiniteDomain(tuple(later))
    lam = gauge_lambda(m)
    wv = np.array([float(w(p)) for p in sub], dtype=float)
    base = wv - lam.many(anchor, sub.points)
    a_idx = sub.index(anchor)
    gap = float(base.max() - base[a_idx])
    eps = gap + 1e-12 * (1.0 + abs(float(base.max())))
    res = ebp_maximize(None, sub, a_idx, eps, delta0, lam, fvals=base)

    def gamma(p):
        return float(w(p)) - lam(anchor, p)

    check = verify_ebp(res, gamma, sub, lam, fvals=base)
    test = res.anchor
    pen = sum(wt * lam(c, test) for c, wt in res.centers)
    shift = float(w(test)) - lam(anchor, test) - pen
    return {
        "test_point": test,
        "test_index": res.anchor_index,
        "ebp": res,
        "verification": check,
        "test_functional": {
            "anchor": anchor.to_json_dict(),
            "centers": [{"path": c.to_json_dict(), "weight": wt} for c, wt in res.centers],
            "shift": shift,
            "order": m,
        },
        "penalty_at_test": float(pen),
        "penalty_bounds": _penalty_bounds(test, res.centers, m),
        "domain_size": len(sub),
    }
