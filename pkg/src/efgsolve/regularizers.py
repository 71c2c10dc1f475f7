"""The four regularizers over treeplexes: Bregman divergences and prox steps.

``prox_treeplex`` solves ``argmin_{z in Z} eta <z, f> + D(z, zhat)`` for

* ``vanilla_euclidean``  (1/2)||z||^2, an exact treeplex projection;
* ``vanilla_entropy``    sum z ln z, via Newton's method on the dual (one
  multiplier per simplex);
* ``dilated_euclidean`` and ``dilated_entropy``, the dilated versions with
  per-simplex weights alpha, via a bottom-up pass over the local simplex
  problems followed by top-down realization.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .projection import project_simplex, project_simplex_rows, project_treeplex
from .treeplex import Treeplex, behavioral_from_sequence, minimize_linear, realize

VANILLA_EUCLIDEAN = "vanilla_euclidean"
VANILLA_ENTROPY = "vanilla_entropy"
DILATED_EUCLIDEAN = "dilated_euclidean"
DILATED_ENTROPY = "dilated_entropy"
KINDS = (VANILLA_EUCLIDEAN, VANILLA_ENTROPY, DILATED_EUCLIDEAN, DILATED_ENTROPY)
ENTROPY_KINDS = (VANILLA_ENTROPY, DILATED_ENTROPY)
DILATED_KINDS = (DILATED_EUCLIDEAN, DILATED_ENTROPY)

FLOOR = 1e-300
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 200


class ProxError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Regularizer:
    """A regularizer kind plus its simplex weights.

    When ``alpha`` is None the dilated kinds use ``beta`` on every simplex,
    so one object serves any treeplex.
    """

    kind: str
    alpha: np.ndarray | None = None
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.alpha is not None and (np.asarray(self.alpha) <= 0).any():
            raise ValueError("alpha weights must be positive")

    @property
    def is_entropy(self) -> bool:
        return self.kind in ENTROPY_KINDS

    def weights(self, t: Treeplex) -> np.ndarray:
        if self.alpha is None:
            return default_alpha(self.kind, t, self.beta)
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.shape != (t.num_simplexes,):
            raise ValueError(f"alpha has shape {alpha.shape}, treeplex has {t.num_simplexes} simplexes")
        return alpha


@dataclass(frozen=True)
class ProxResult:
    strategy: np.ndarray
    behavioral: np.ndarray
    values: np.ndarray  # per-index recursion values L; for vanilla kinds this is f


def default_alpha(kind: str, t: Treeplex, beta: float = 1.0) -> np.ndarray:
    """Unweighted dilation: every simplex gets the same weight ``beta``.

    The guarantees that hold for step size eta then apply to ``eta / beta``.
    """
    return np.full(t.num_simplexes, float(beta))


# -- divergences ---------------------------------------------------------------

def _xlogy_ratio(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a * ln(a / b)`` with ``0 ln 0 = 0`` and ``+inf`` when a > 0 = b."""
    out = np.zeros_like(a)
    pos = a > 0
    with np.errstate(divide="ignore"):
        out[pos] = a[pos] * (np.log(a[pos]) - np.log(b[pos]))
    return out


def bregman(reg: Regularizer, t: Treeplex, z, zp) -> float:
    """``D(z, zp)``; ``inf`` for entropy kinds when zp misses the support of z."""
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    kind = reg.kind
    if kind == VANILLA_EUCLIDEAN:
        return 0.5 * float(np.sum((z - zp) ** 2))
    if kind == VANILLA_ENTROPY:
        return float(np.sum(_xlogy_ratio(z, zp) - z + zp))
    a = reg.weights(t)[t.simplex_of_index]
    q = behavioral_from_sequence(t, z)
    qp = behavioral_from_sequence(t, zp)
    if kind == DILATED_EUCLIDEAN:
        zpar = t.extend(z)[t.parent_of_index]
        return 0.5 * float(np.sum(a * zpar * (q - qp) ** 2))
    return float(np.sum(a * _xlogy_ratio(z, z / np.where(q > 0, q, 1.0) * qp)))


def regularizer_value(reg: Regularizer, t: Treeplex, z) -> float:
    z = np.asarray(z, dtype=float)
    if reg.kind == VANILLA_EUCLIDEAN:
        return 0.5 * float(z @ z)
    if reg.kind == VANILLA_ENTROPY:
        return float(np.sum(_xlogy_ratio(z, np.ones_like(z))))
    a = reg.weights(t)[t.simplex_of_index]
    q = behavioral_from_sequence(t, z)
    if reg.kind == DILATED_EUCLIDEAN:
        return 0.5 * float(np.sum(a * z * q))
    return float(np.sum(a * _xlogy_ratio(z, z / np.where(q > 0, q, 1.0))))


# -- simplex prox steps ----------------------------------------------------------

def prox_simplex_euclidean(qhat, load, weight: float, eta: float) -> np.ndarray:
    """``argmin_q eta <q, load> + (weight/2) ||q - qhat||^2`` over the simplex."""
    return project_simplex(np.asarray(qhat, dtype=float) - (eta / weight) * np.asarray(load, dtype=float))


def prox_simplex_entropy(qhat, load, weight: float, eta: float) -> np.ndarray:
    """``argmin_q eta <q, load> + weight KL(q, qhat)``; zeros of qhat stay zero."""
    qhat = np.asarray(qhat, dtype=float)
    with np.errstate(divide="ignore"):
        s = np.log(qhat) - (eta / weight) * np.asarray(load, dtype=float)
    top = s.max()
    if not np.isfinite(top):
        raise ProxError("entropy prox normalizer is not finite")
    e = np.exp(s - top)
    return e / e.sum()


# -- treeplex prox -------------------------------------------------------------------

def prox_treeplex(reg: Regularizer, t: Treeplex, zhat, f, eta: float) -> ProxResult:
    zhat = np.asarray(zhat, dtype=float)
    f = np.asarray(f, dtype=float)
    if zhat.shape != (t.dim,) or f.shape != (t.dim,):
        raise ValueError(f"expected vectors of length {t.dim}")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if reg.kind == DILATED_ENTROPY:
        return _prox_dilated(t, reg.weights(t), zhat, f, eta, entropy=True)
    if reg.kind == DILATED_EUCLIDEAN:
        return _prox_dilated(t, reg.weights(t), zhat, f, eta, entropy=False)
    if reg.kind == VANILLA_EUCLIDEAN:
        z = project_treeplex(t, zhat - eta * f)
        z = np.maximum(z, 0.0)
        return ProxResult(z, behavioral_from_sequence(t, z), f.copy())
    return _prox_vanilla_entropy(t, zhat, f, eta)


def _prox_dilated(t: Treeplex, alpha: np.ndarray, zhat, f, eta, entropy: bool) -> ProxResult:
    qhat = t.extend(behavioral_from_sequence(t, zhat))
    L = t.extend(f)
    q = np.empty(t.dim)
    if entropy:
        logq = np.log(np.maximum(qhat, FLOOR))
    for lvl in reversed(t.levels):
        a = alpha[lvl.simplexes]
        Lh = L[lvl.idx]
        if entropy:
            s = np.where(lvl.mask, logq[lvl.idx] - (eta / a)[:, None] * Lh, -np.inf)
            top = s.max(axis=1)
            e = np.exp(s - top[:, None])
            tot = e.sum(axis=1)
            qh = e / tot[:, None]
            contrib = -(a / eta) * (top + np.log(tot))
        else:
            qh_hat = np.where(lvl.mask, qhat[lvl.idx], 0.0)
            qh = project_simplex_rows(qh_hat - (eta / a)[:, None] * Lh, lvl.mask)
            Lh = np.where(lvl.mask, Lh, 0.0)
            contrib = (qh * Lh).sum(axis=1) + (a / (2 * eta)) * ((qh - qh_hat) ** 2).sum(axis=1)
        q[lvl.flat_idx] = qh[lvl.mask]
        np.add.at(L, lvl.parent, contrib)
    if entropy:
        np.maximum(q, FLOOR, out=q)
    z = realize(t, q)
    return ProxResult(z, q, L[:-1])


@lru_cache(maxsize=64)
def _constraints(t: Treeplex) -> tuple[np.ndarray, np.ndarray]:
    """Dense constraint matrix ``A`` and right-hand side ``b`` with ``A z = b``."""
    A = np.zeros((t.num_simplexes, t.dim))
    b = np.zeros(t.num_simplexes)
    for h in range(t.num_simplexes):
        A[h, t.simplex_indices(h)] = 1.0
        if t.parents[h] < t.dim:
            A[h, t.parents[h]] -= 1.0
        else:
            b[h] = 1.0
    return A, b


def _prox_vanilla_entropy(t: Treeplex, zhat, f, eta) -> ProxResult:
    # Dual: max_mu  sum(zhat - z(mu)) - b.mu  with  z(mu) = zhat * exp(-eta f - A^T mu)
    A, b = _constraints(t)
    base = np.log(np.maximum(zhat, FLOOR)) - eta * f
    mu = np.zeros(t.num_simplexes)

    def evaluate(mu):
        # trial steps may overflow; the line search rejects those
        with np.errstate(over="ignore", invalid="ignore"):
            z = np.exp(base - A.T @ mu)
            r = A @ z - b
        return z, -z.sum() - b @ mu, r

    z, dual, r = evaluate(mu)
    res = np.abs(r).max()
    for _ in range(NEWTON_MAX_ITER):
        if res <= NEWTON_TOL:
            break
        H = (A * z) @ A.T
        d = np.linalg.solve(H, r)
        slope = r @ d
        step = 1.0
        for _ in range(60):
            mu_new = mu + step * d
            z_new, dual_new, r_new = evaluate(mu_new)
            res_new = np.abs(r_new).max()
            # near the optimum dual increments fall below rounding, so a
            # halved residual also counts as progress
            if np.isfinite(dual_new) and (dual_new >= dual + 1e-4 * step * slope or res_new <= 0.5 * res):
                break
            step *= 0.5
        else:
            break  # no ascent possible at double precision
        mu, z, dual, r, res = mu_new, z_new, dual_new, r_new, res_new
    if res > 1e-10:
        raise ProxError(f"vanilla entropy dual solve stalled with residual {res:.3e}")
    # snap onto the treeplex; the correction is at the level of the residual
    q = np.maximum(behavioral_from_sequence(t, z), FLOOR)
    q /= t.segment_sums(q)[t.simplex_of_index]
    z = realize(t, q)
    return ProxResult(z, q, f.copy())


# -- optimality certificate --------------------------------------------------------

def objective_gradient(reg: Regularizer, t: Treeplex, zhat, f, eta, result: ProxResult) -> np.ndarray:
    """Gradient of ``eta <z, f> + D(z, zhat)`` at the prox output.

    For dilated kinds the gradient of the regularizer is taken through the
    behavioral strategies (the result's own for unreached simplexes), which
    selects a valid subgradient where parent masses vanish.
    """
    z = result.strategy
    if reg.kind == VANILLA_EUCLIDEAN:
        dpsi = z - zhat
    elif reg.kind == VANILLA_ENTROPY:
        dpsi = np.log(np.maximum(z, FLOOR)) - np.log(np.maximum(zhat, FLOOR))
    else:
        a = reg.weights(t)[t.simplex_of_index]
        q = result.behavioral
        qh = behavioral_from_sequence(t, zhat)
        if reg.kind == DILATED_ENTROPY:
            dpsi = a * (np.log(np.maximum(q, FLOOR)) - np.log(np.maximum(qh, FLOOR)))
        else:
            dpsi = a * (q - qh)
            sq = 0.5 * a * (q**2 - qh**2)
            child = np.zeros(t.dim + 1)
            np.add.at(child, t.parent_of_index, sq)
            dpsi -= child[:-1]
    return eta * np.asarray(f) + dpsi


def kkt_residual(reg: Regularizer, t: Treeplex, zhat, f, eta, result: ProxResult) -> float:
    """``<g, z*> - min_{z in Z} <g, z>`` for the objective gradient g; 0 at the optimum."""
    g = objective_gradient(reg, t, zhat, f, eta, result)
    best, _ = minimize_linear(t, g)
    return float(g @ result.strategy - best)
