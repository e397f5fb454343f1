"""Perturbed maximization on finite path domains with exact certification.

On a finite domain the Borwein-Preiss construction becomes an exact
algorithm: starting from an almost-maximizer, repeatedly move to the point
maximizing the current gauge-perturbed functional among the points that
weakly dominate the current one, adding that point as a new perturbation
center with weight ``delta0 / 2**i``.  Every run is certified by brute force
over the whole domain.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from . import gauge
from .path_space import Path


class EbpPreconditionError(ValueError):
    """The start point is not an epsilon-almost maximizer."""

    def __init__(self, message, true_sup):
        super().__init__(message)
        self.true_sup = true_sup


@dataclass(frozen=True)
class FiniteDomain:
    """A finite set of paths on one grid."""

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("domain must be nonempty")
        g, d = pts[0].grid, pts[0].dim
        for p in pts:
            if not g.compatible(p.grid) or p.dim != d:
                raise ValueError("domain paths must share grid and dimension")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def index(self, p):
        for i, q in enumerate(self.points):
            if q == p:
                return i
        raise ValueError("path not in domain")

    def later_than(self, t):
        """Indices of points whose end time is at least ``t``."""
        return [i for i, p in enumerate(self.points) if p.t >= t - 1e-12]


def gauge_lambda(m=gauge.DEFAULT_ORDER):
    """The default gauge-type function, with a batched form for speed."""

    def lam(p, q):
        return gauge.upsilon_bar0(p, q, m)

    lam.many = lambda c, pts: gauge.upsilon_bar0_to_many(c, list(pts), m)
    lam.order = m
    return lam


def _lam_many(lam, center, points):
    many = getattr(lam, "many", None)
    if many is not None:
        return np.asarray(many(center, points), dtype=float)
    return np.array([lam(center, p) for p in points])


@dataclass
class EbpResult:
    """Certified output of :func:`ebp_maximize`.

    ``centers`` holds ``(path, weight)`` pairs; the first center is the
    start point with weight ``delta0``.
    """

    anchor: Path
    centers: list
    epsilon: float
    delta0: float
    anchor_index: int = -1
    start_index: int = -1
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def weights(self):
        return [w for _, w in self.centers]

    def perturbation(self, lam, p):
        return sum(w * lam(c, p) for c, w in self.centers)

    def to_json_dict(self):
        return {
            "anchor": self.anchor.to_json_dict(),
            "anchor_index": self.anchor_index,
            "start_index": self.start_index,
            "epsilon": self.epsilon,
            "delta0": self.delta0,
            "iterations": self.iterations,
            "centers": [{"path": c.to_json_dict(), "weight": w} for c, w in self.centers],
            "info": self.info,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            anchor=Path.from_json_dict(data["anchor"]),
            centers=[(Path.from_json_dict(c["path"]), float(c["weight"])) for c in data["centers"]],
            epsilon=float(data["epsilon"]),
            delta0=float(data["delta0"]),
            anchor_index=int(data.get("anchor_index", -1)),
            start_index=int(data.get("start_index", -1)),
            iterations=int(data.get("iterations", 0)),
            info=dict(data.get("info", {})),
        )


def _values(f, domain):
    return np.array([f(p) for p in domain], dtype=float)


def ebp_maximize(f, domain, start, epsilon, delta0=1.0, lam=None, fvals=None):
    """Gauge-perturbed maximizer near an almost-maximizer ``start``.

    Parameters
    ----------
    f : callable
        Functional on paths (upper semicontinuity is automatic on a finite set).
    domain : FiniteDomain
    start : Path or int
        Almost-maximizer, given as a path in the domain or its index.
    epsilon, delta0 : float
        Positive; ``f(start) >= max f - epsilon`` is required.
    lam : callable, optional
        Gauge-type function ``lam(p, q)``; defaults to the order-3 gauge
        distance.
    fvals : array, optional
        Precomputed ``f`` on the domain.

    Returns
    -------
    EbpResult
    """
    if epsilon <= 0 or delta0 <= 0:
        raise ValueError("epsilon and delta0 must be positive")
    lam = gauge_lambda() if lam is None else lam
    pts = domain.points
    fv = _values(f, domain) if fvals is None else np.asarray(fvals, dtype=float)
    i0 = start if isinstance(start, (int, np.integer)) else domain.index(start)
    sup = float(fv.max())
    if fv[i0] < sup - epsilon:
        raise EbpPreconditionError(
            f"f(start)={fv[i0]:.6g} is below sup - epsilon = {sup - epsilon:.6g}", sup
        )

    current = int(i0)
    centers = [(pts[current], float(delta0))]
    perturbed = fv - delta0 * _lam_many(lam, pts[current], pts)
    iterations = 0
    while True:
        level = perturbed[current]
        mask = perturbed >= level
        mask[current] = False
        if not mask.any():
            break
        cand = np.flatnonzero(mask)
        nxt = int(cand[np.argmax(perturbed[cand])])  # argmax picks the lowest index on ties
        iterations += 1
        weight = delta0 / 2.0**iterations
        centers.append((pts[nxt], weight))
        perturbed = perturbed - weight * _lam_many(lam, pts[nxt], pts)
        current = nxt
        if iterations > len(pts):
            raise RuntimeError("perturbed maximization failed to terminate")

    anchor = pts[current]
    bar0 = lam(pts[i0], anchor)
    info = {
        "sup_f": sup,
        "f_start": float(fv[i0]),
        "f_anchor": float(fv[current]),
        "perturbed_anchor": float(perturbed[current]),
        "lambda_start_anchor": float(bar0),
    }
    m = getattr(lam, "order", None)
    if m is not None:
        from .path_space import dist_dinfty

        info["dinfty_start_anchor"] = dist_dinfty(pts[i0], anchor)
        info["dinfty_bound"] = float(gauge.gauge_dinfty_bound(epsilon / delta0, m))
    return EbpResult(
        anchor=anchor,
        centers=centers,
        epsilon=float(epsilon),
        delta0=float(delta0),
        anchor_index=current,
        start_index=int(i0),
        iterations=iterations,
        info=info,
    )


def verify_ebp(result, f, domain, lam=None, fvals=None, tol=0.0):
    """Brute-force check of the three certificate conditions.

    Condition (i): every center is gauge-close to the anchor,
    ``lam(c_i, anchor) <= epsilon / (2**i delta0)``.
    Condition (ii): ``f(anchor) - sum_i w_i lam(c_i, anchor) >= f(start)``.
    Condition (iii): every other domain point with end time no earlier than
    the anchor's has a strictly smaller perturbed value.

    The certificate is flagged non-canonical when the weights differ from
    ``delta0 / 2**i``.  ``tol`` is an optional absolute slack for (i)/(ii).
    """
    lam = gauge_lambda() if lam is None else lam
    pts = domain.points
    fv = _values(f, domain) if fvals is None else np.asarray(fvals, dtype=float)
    anchor = result.anchor
    start = result.centers[0][0]
    eps, d0 = result.epsilon, result.delta0

    ratios = []
    for i, (c, _) in enumerate(result.centers):
        ratios.append(lam(c, anchor) - eps / (2.0**i * d0))
    worst_i = max(ratios)
    cond_i = worst_i <= tol

    pen_anchor = sum(w * float(_lam_many(lam, c, [anchor])[0]) for c, w in result.centers)
    f_anchor = float(f(anchor))
    f_start = float(f(start))
    slack_ii = (f_anchor - pen_anchor) - f_start
    cond_ii = slack_ii >= -tol

    later = domain.later_than(anchor.t)
    perturbed = fv.copy()
    for c, w in result.centers:
        perturbed -= w * _lam_many(lam, c, pts)
    level = f_anchor - pen_anchor
    witness = None
    margin = np.inf
    for j in later:
        if pts[j] == anchor:
            continue
        gap = level - perturbed[j]
        if gap < margin:
            margin, witness = gap, j
    cond_iii = bool(margin > 0)

    canonical = all(
        np.isclose(w, d0 / 2.0**i, rtol=1e-12, atol=0.0) for i, (_, w) in enumerate(result.centers)
    )
    return {
        "i": {"holds": bool(cond_i), "worst_slack": float(-worst_i)},
        "ii": {"holds": bool(cond_ii), "slack": float(slack_ii)},
        "iii": {
            "holds": cond_iii,
            "margin": float(margin),
            "witness": None if cond_iii else int(witness),
            "n_checked": len(later) - 1,
        },
        "canonical_weights": bool(canonical),
        "passed": bool(cond_i and cond_ii and cond_iii and canonical),
    }


# -- randomized certification study ------------------------------------------


def random_domain(gen, n_paths, n_steps=16, dim=1, n_end_times=4):
    """Random-walk paths ending at a few shared grid indices."""
    from .path_space import Grid

    grid = Grid(0.0, 1.0, n_steps)
    ends = gen.choice(np.arange(n_steps + 1), size=min(n_end_times, n_steps + 1), replace=False)
    pts = []
    for _ in range(n_paths):
        e = int(gen.choice(ends))
        steps = 0.3 * gen.standard_normal((e, dim))
        vals = np.vstack([gen.standard_normal((1, dim)), steps]).cumsum(axis=0)
        pts.append(Path(grid, vals, e))
    return FiniteDomain(tuple(pts))


def random_functional(gen, dim):
    a = gen.standard_normal(dim)
    c = float(gen.standard_normal())

    def f(p):
        sq = np.einsum("kd,kd->k", p.values, p.values).max()
        return float(p.terminal @ a - 0.5 * sq + c * p.t)

    return f


def mutations(result, domain, lam):
    """Corrupted copies of a certificate that verification must reject.

    Always includes a rescaled weight.  Adds a swapped anchor (another point
    with the same end time, which the true anchor strictly dominates) and a
    shrunken ``epsilon`` (below the start-to-anchor gauge distance) when
    those are available.
    """
    out = []
    centers = list(result.centers)
    scaled = centers[:-1] + [(centers[-1][0], centers[-1][1] * 1.5)]
    out.append(("weight", EbpResult(result.anchor, scaled, result.epsilon, result.delta0)))
    same = [p for p in domain if p.end_index == result.anchor.end_index and p != result.anchor]
    if same:
        out.append(("anchor", EbpResult(same[0], centers, result.epsilon, result.delta0)))
    gap = lam(centers[0][0], result.anchor)
    if gap > 0:
        out.append(("epsilon", EbpResult(result.anchor, centers, 0.5 * gap * result.delta0, result.delta0)))
    return out


def ebp_study(n_domains, max_paths, seed, n_steps=16, dim=1, delta0=0.05, min_paths=50):
    """Run and certify the perturbed maximization on random domains.

    Returns a summary with per-domain rows; ``all_certified`` and
    ``all_mutations_detected`` are the headline flags.
    """
    from . import rng as _rng

    gen = _rng.generator(seed, "ebp-study")
    lam = gauge_lambda()
    rows = []
    for i in range(n_domains):
        n = int(gen.integers(min(min_paths, max_paths), max_paths + 1))
        dom = random_domain(gen, n, n_steps, dim)
        f = random_functional(gen, dim)
        fv = _values(f, dom)
        eps = float(gen.uniform(0.05, 0.5)) * (float(np.ptp(fv)) + 1e-12)
        near = np.flatnonzero(fv >= fv.max() - eps)
        start = int(gen.choice(near))
        res = ebp_maximize(f, dom, start, eps, delta0, lam, fvals=fv)
        check = verify_ebp(res, f, dom, lam, fvals=fv)
        detected = []
        for kind, bad in mutations(res, dom, lam):
            detected.append((kind, not verify_ebp(bad, f, dom, lam, fvals=fv)["passed"]))
        rows.append({
            "domain": i,
            "n_paths": n,
            "iterations": res.iterations,
            "certified": check["passed"],
            "margin_iii": check["iii"]["margin"],
            "mutations": len(detected),
            "mutations_detected": sum(d for _, d in detected),
            "undetected": [k for k, d in detected if not d],
        })
    return {
        "n_domains": n_domains,
        "rows": rows,
        "all_certified": all(r["certified"] for r in rows),
        "all_mutations_detected": all(r["mutations"] == r["mutations_detected"] for r in rows),
        "total_mutations": sum(r["mutations"] for r in rows),
    }
