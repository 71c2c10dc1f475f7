"""Optimistic online mirror descent over the joint treeplex.

One iteration, with ``F`` the payoff field and ``prox`` the regularizer's
argmin step::

    z_t       = prox(zhat_t, F(z_{t-1}))
    zhat_{t+1} = prox(zhat_t, F(z_t))

Both players move simultaneously; since the regularizer is separable across
players this is a single prox on the product treeplex.  The four named
algorithms differ only in the regularizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .games import Game, payoff_field
from .metrics import MetricsRecord, ReferenceEquilibrium, RunningAverage, duality_gap, theta
from .regularizers import Regularizer, bregman, prox_treeplex
from .treeplex import behavioral_from_sequence, uniform_strategy, validate_sequence

logger = logging.getLogger(__name__)

ALGORITHMS = {
    "vogda": "vanilla_euclidean",
    "vomwu": "vanilla_entropy",
    "dogda": "dilated_euclidean",
    "domwu": "dilated_entropy",
}


class StabilityError(AssertionError):
    pass


@dataclass(frozen=True)
class OomdState:
    z: np.ndarray  # played iterate z_t
    z_hat: np.ndarray  # secondary iterate zhat_{t+1}
    last_field: np.ndarray  # F(z_t)
    eta: float
    reg: Regularizer
    t: int = 0


def default_eta(game: Game) -> float:
    return 1.0 / (8 * game.P)


def init(game: Game, reg: Regularizer, eta: Optional[float] = None, start=None) -> OomdState:
    eta = default_eta(game) if eta is None else float(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if start is None:
        z0 = uniform_strategy(game.joint)
    else:
        z0 = np.asarray(start, dtype=float).copy()
        report = validate_sequence(game.joint, z0)
        if not report:
            raise ValueError(f"start strategy is not a valid sequence-form pair: {report}")
        if reg.is_entropy and (z0 <= 0).any():
            raise ValueError(f"{reg.kind} needs a strictly positive start")
    return OomdState(z0, z0.copy(), payoff_field(game, z0), eta, reg, 0)


def step(state: OomdState, game: Game, check_stability: bool = False) -> OomdState:
    t = game.joint
    played = prox_treeplex(state.reg, t, state.z_hat, state.last_field, state.eta)
    field_t = payoff_field(game, played.strategy)
    nxt = prox_treeplex(state.reg, t, state.z_hat, field_t, state.eta)
    if check_stability:
        lo, hi = stability_ratios(game, state.z_hat, played.strategy, nxt.strategy)
        if lo < 0.75 or hi > 4.0 / 3.0:
            raise StabilityError(f"t={state.t + 1}: behavioral ratio range [{lo:.6f}, {hi:.6f}]")
    return replace(state, z=played.strategy, z_hat=nxt.strategy, last_field=field_t, t=state.t + 1)


def stability_ratios(game: Game, z_hat, z, z_hat_next) -> tuple[float, float]:
    """Extremes of ``q_t / qhat_t`` and ``qhat_{t+1} / qhat_t`` over all indices."""
    t = game.joint
    qh = behavioral_from_sequence(t, z_hat)
    r = np.concatenate([behavioral_from_sequence(t, z) / qh, behavioral_from_sequence(t, z_hat_next) / qh])
    return float(r.min()), float(r.max())


@dataclass
class OomdConfig:
    algorithm: str = "domwu"
    eta: Optional[float] = None
    T: int = 1000
    metric_every: int = 1
    beta: float = 1.0
    averaging: str = "last"
    start: Optional[np.ndarray] = None
    reference: Optional[ReferenceEquilibrium] = None
    keep_iterates: bool = False
    check_stability: bool = False

    def regularizer(self) -> Regularizer:
        try:
            kind = ALGORITHMS[self.algorithm]
        except KeyError:
            raise ValueError(f"unknown optimistic algorithm {self.algorithm!r}") from None
        return Regularizer(kind, beta=self.beta)


@dataclass
class Trajectory:
    records: list[MetricsRecord]
    final: object  # the last algorithm state
    last: np.ndarray  # reported strategy pair at the final step
    iterates: dict[int, np.ndarray] = field(default_factory=dict)


def _record(game, reg, t, z_report, state, prev_z, reference) -> MetricsRecord:
    x, y = game.split(z_report)
    gap = duality_gap(game, x, y)
    if reference is None:
        return MetricsRecord(t, gap)
    zs = reference.z_star
    th = theta(reg, game.joint, zs, state.z_hat, prev_z)
    breg = bregman(reg, game.joint, zs, state.z_hat)
    flagged = not (np.isfinite(th) and np.isfinite(breg))
    return MetricsRecord(t, gap, float(np.linalg.norm(z_report - zs)), breg, th, flagged)


def run(game: Game, config: OomdConfig) -> Trajectory:
    if config.T < 1:
        raise ValueError("T must be at least 1")
    if config.metric_every < 1:
        raise ValueError("metric_every must be at least 1")
    reg = config.regularizer()
    state = init(game, reg, config.eta, config.start)
    avg = RunningAverage(game.P)

    def report(state):
        if config.averaging == "last" or state.t == 0:
            return state.z
        return avg.get(config.averaging)

    # before the first step zhat_1 = z_0, so the second Theta term vanishes
    records = [_record(game, reg, 0, report(state), state, state.z, config.reference)]
    iterates = {0: state.z.copy()} if config.keep_iterates else {}
    for _ in range(config.T):
        state = step(state, game, config.check_stability)
        avg.add(state.z)
        if state.t % config.metric_every == 0:
            z_rep = report(state)
            # state now holds zhat_{t+1} and z_t, i.e. the terms of Theta_{t+1}
            records.append(_record(game, reg, state.t, z_rep, state, state.z, config.reference))
            if config.keep_iterates:
                iterates[state.t] = z_rep.copy()
    logger.debug("oomd %s finished t=%d gap=%.3e", config.algorithm, state.t, records[-1].gap)
    return Trajectory(records, state, report(state), iterates)
