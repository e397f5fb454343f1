"""Pure numpy implementations of the hot gauge kernels.

Every function here has a twin of the same name and signature in ``_core.pyx``.
Array arguments are float64 and C-contiguous; the dispatcher in ``__init__``
takes care of the conversion.
"""
import numpy as np


def running_sup_sq(values):
    """Running maximum of squared Euclidean norms, shape (S, L)."""
    sq = np.einsum("sld,sld->sl", values, values)
    return np.maximum.accumulate(sq, axis=1)


def upsilon_terms(sup_sq, term, m):
    """Closed-form gauge value, gradient and Hessian.

    Parameters
    ----------
    sup_sq : (K,) array
        Squared sup norm of each path.
    term : (K, d) array
        Terminal value of each path.
    m : int
        Gauge order, ``m >= 2``.

    Returns
    -------
    ups : (K,), grad : (K, d), hess : (K, d, d)
    """
    sup_sq = np.asarray(sup_sq, dtype=float)
    term = np.asarray(term, dtype=float)
    k, d = term.shape
    x2 = np.einsum("kd,kd->k", term, term)
    live = sup_sq > 0.0
    safe = np.where(live, sup_sq, 1.0)
    r = np.where(live, np.minimum(x2 / safe, 1.0) ** m, 0.0)
    one_r = 1.0 - r
    g = np.clip(one_r**3 + 3.0 * r, 1.0, 3.0)
    ups = np.where(live, sup_sq**m * g, 0.0)
    bracket = np.where(live, np.clip(1.0 - one_r * one_r, 0.0, 1.0), 0.0)

    pw1 = x2 ** (m - 1)
    pw2 = x2 ** (m - 2)
    grad = (6.0 * m * bracket * pw1)[:, None] * term
    outer_coef = 24.0 * m * m * one_r * r * pw2 + 12.0 * m * (m - 1) * bracket * pw2
    outer_coef = np.where(live, outer_coef, 0.0)
    diag_coef = 6.0 * m * bracket * pw1
    hess = outer_coef[:, None, None] * (term[:, :, None] * term[:, None, :])
    hess += diag_coef[:, None, None] * np.eye(d)[None, :, :]
    return ups, grad, hess


def upsilon_prefixes(values, m):
    """Gauge value and derivatives at every prefix of every path.

    ``values`` has shape (S, L, d); the prefix ending at index ``k`` is the
    path ``values[s, :k + 1]``.
    """
    s, l, d = values.shape
    sup_sq = running_sup_sq(values)
    ups, grad, hess = upsilon_terms(sup_sq.reshape(-1), values.reshape(-1, d), m)
    return ups.reshape(s, l), grad.reshape(s, l, d), hess.reshape(s, l, d, d)


def upsilon_bar0_many(center, center_end, points, point_ends, m, step):
    """Gauge distance from one path to many paths on a shared grid.

    ``center`` has shape (Lc, d) with valid rows ``0..center_end``;
    ``points`` has shape (P, L, d) and row ``p`` is valid up to
    ``point_ends[p]``.  Both are flat-extended to the later end time before
    differencing.
    """
    center = np.asarray(center, dtype=float)
    points = np.asarray(points, dtype=float)
    point_ends = np.asarray(point_ends, dtype=np.int64)
    n_pts, length, d = points.shape
    horizon = int(max(center_end, point_ends.max(initial=0)))
    idx = np.arange(horizon + 1)
    c_idx = np.minimum(idx, center_end)
    c_al = center[c_idx]
    p_idx = np.minimum(idx[None, :], point_ends[:, None])
    p_al = np.take_along_axis(points, p_idx[:, :, None], axis=1)
    diff = p_al - c_al[None, :, :]
    sq = np.einsum("pkd,pkd->pk", diff, diff)
    ends = np.maximum(point_ends, center_end)
    mask = idx[None, :] <= ends[:, None]
    sup_sq = np.where(mask, sq, 0.0).max(axis=1)
    term = diff[np.arange(n_pts), ends]
    ups, _, _ = upsilon_terms(sup_sq, term, m)
    gap = (point_ends - center_end) * step
    return ups + gap * gap
