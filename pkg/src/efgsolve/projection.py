"""Exact Euclidean projection onto a treeplex.

For every index ``i`` let ``g_i(s)`` be the optimal value of the projection
restricted to the subtree below ``i`` when ``z_i = s``.  Its derivative
``d_i(s) = s - v_i + sum_h lam_h(s)`` is piecewise linear and strictly
increasing, where ``lam_h(s)`` is the multiplier of simplex ``h`` when its
mass is ``s``: the inverse of ``lam -> sum_j d_j^{-1}(lam)`` (with
``d_j^{-1}`` clipped at 0).  All functions live on ``s`` in ``[0, 1]``, so they
are stored as breakpoint arrays and evaluated with ``np.interp``.  A
bottom-up pass builds them, a top-down pass reads off the projection.
"""

from __future__ import annotations

import numpy as np

from .treeplex import Treeplex

_UNIT = np.array([0.0, 1.0])


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Projection of ``v`` onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.flatnonzero(u * k - css >= 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_simplex_rows(V: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise simplex projection of a padded matrix; padded entries come back 0."""
    W = np.where(mask, V, -np.inf)
    U = -np.sort(-W, axis=1)
    valid = np.isfinite(U)
    css = np.cumsum(np.where(valid, U, 0.0), axis=1) - 1.0
    k = np.arange(1, V.shape[1] + 1)
    ok = valid & (U * k - css >= 0)
    rho = V.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
    theta = css[np.arange(len(V)), rho] / (rho + 1)
    return np.where(mask, np.maximum(V - theta[:, None], 0.0), 0.0)


def project_treeplex(t: Treeplex, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    lam_fn: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    members: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
    for h in reversed(t.topo_order):
        curves = []
        for j in t.simplex_indices(h):
            kids = t.children_of_index[j]
            if kids:
                grid = np.unique(np.concatenate([_UNIT] + [lam_fn[g][0] for g in kids]))
                grid = grid[grid <= 1.0]
                d = grid - v[j]
                for g in kids:
                    d += np.interp(grid, *lam_fn[g])
            else:
                grid = _UNIT
                d = grid - v[j]
            curves.append((d, grid))
        lams = np.unique(np.concatenate([d for d, _ in curves]))
        mass = np.zeros_like(lams)
        for d, grid in curves:
            mass += np.interp(lams, d, grid)
        k = int(np.searchsorted(mass, 1.0)) + 1
        lam_fn[h] = (mass[:k], lams[:k])
        members[h] = curves

    z = t.extend(np.zeros(t.dim))
    for h in t.topo_order:
        lam = np.interp(z[t.parents[h]], *lam_fn[h])
        for j, (d, grid) in zip(t.simplex_indices(h), members[h]):
            z[j] = np.interp(lam, d, grid)
    return z[:-1]
