"""Counterfactual regret minimization and its regret-matching variants.

Each infoset runs a local regret minimizer over counterfactual losses:

    L_i  = l_i + sum over child simplexes g of <q_g, L_g>
    reg_j = <q_h, L_h> - L_j          for j in simplex h

``rm`` keeps the cumulative regret, ``rm+`` its running positive part, and the
optimistic variants add the latest instantaneous regret once more when
choosing the next play.  A simplex with no positive regret plays uniformly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .games import Game
from .metrics import MetricsRecord, ReferenceEquilibrium, duality_gap
from .oomd import Trajectory
from .treeplex import Treeplex, behavioral_from_sequence, realize, uniform_strategy, validate_sequence

logger = logging.getLogger(__name__)

VARIANTS = ("rm", "rm+", "opt-rm", "opt-rm+")
ALGORITHMS = {"cfr": "rm", "cfr+": "rm+", "opt-cfr": "opt-rm", "opt-cfr+": "opt-rm+"}
SCHEMES = ("simultaneous", "alternating")
AVERAGING = ("last", "uniform", "linear")


@dataclass(frozen=True)
class PlayerRegrets:
    regret: np.ndarray  # cumulative regret (clipped for the + variants)
    instant: np.ndarray  # regret of the most recent update
    q: np.ndarray  # behavioral strategy to play next
    z: np.ndarray  # its sequence form


@dataclass(frozen=True)
class RegretState:
    x: PlayerRegrets
    y: PlayerRegrets
    variant: str
    t: int  # completed iterations
    sum_uniform: np.ndarray  # sum of played joint iterates
    sum_linear: np.ndarray  # sum of tau * played joint iterate

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x.z, self.y.z])


def counterfactual_values(t: Treeplex, q: np.ndarray, loss: np.ndarray) -> np.ndarray:
    """Bottom-up counterfactual losses ``L`` for behavioral strategy ``q``."""
    L = t.extend(loss)
    L[-1] = 0.0
    qe = t.extend(q)
    for lvl in reversed(t.levels):
        contrib = np.where(lvl.mask, qe[lvl.idx] * L[lvl.idx], 0.0).sum(axis=1)
        np.add.at(L, lvl.parent, contrib)
    return L[:-1]


def regret_matching(t: Treeplex, weights: np.ndarray) -> np.ndarray:
    """Normalize the positive part per simplex; uniform where nothing is positive."""
    pos = np.maximum(weights, 0.0)
    tot = t.segment_sums(pos)[t.simplex_of_index]
    uniform = 1.0 / t.sizes[t.simplex_of_index]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, pos / np.where(tot > 0, tot, 1.0), uniform)


def regret_update(t: Treeplex, player: PlayerRegrets, loss: np.ndarray, variant: str) -> PlayerRegrets:
    """Feed one sequence-form loss vector to every local regret minimizer."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown regret variant {variant!r}")
    L = counterfactual_values(t, player.q, loss)
    ev = t.segment_sums(player.q * L)
    inst = ev[t.simplex_of_index] - L
    regret = player.regret + inst
    if variant.endswith("+"):
        regret = np.maximum(regret, 0.0)
    choose = regret + inst if variant.startswith("opt") else regret
    q = regret_matching(t, choose)
    return PlayerRegrets(regret, inst, q, realize(t, q))


def _fresh(t: Treeplex, z0: np.ndarray) -> PlayerRegrets:
    zeros = np.zeros(t.dim)
    return PlayerRegrets(zeros, zeros.copy(), behavioral_from_sequence(t, z0), z0.copy())


def init(game: Game, variant: str, start=None) -> RegretState:
    if variant not in VARIANTS:
        raise ValueError(f"unknown regret variant {variant!r}")
    if start is None:
        z0 = uniform_strategy(game.joint)
    else:
        z0 = np.asarray(start, dtype=float)
        report = validate_sequence(game.joint, z0)
        if not report:
            raise ValueError(f"start strategy is not a valid sequence-form pair: {report}")
    x0, y0 = game.split(z0)
    zeros = np.zeros(game.P)
    return RegretState(_fresh(game.x, x0), _fresh(game.y, y0), variant, 0, zeros, zeros.copy())


Hook = Callable[[RegretState, RegretState], None]


def cfr_step(state: RegretState, game: Game, scheme: str = "simultaneous", hook: Optional[Hook] = None) -> RegretState:
    """Play the current strategies, update regrets, and accumulate the averages.

    Under ``alternating`` the y player's loss is computed against x's updated
    strategy.  ``hook(before, after)`` is called once per iteration.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    played = state.z
    tau = state.t + 1
    x_new = regret_update(game.x, state.x, game.payoff @ state.y.z, state.variant)
    x_seen = x_new.z if scheme == "alternating" else state.x.z
    y_new = regret_update(game.y, state.y, -(game.payoff_t @ x_seen), state.variant)
    new = replace(
        state,
        x=x_new,
        y=y_new,
        t=tau,
        sum_uniform=state.sum_uniform + played,
        sum_linear=state.sum_linear + tau * played,
    )
    if hook is not None:
        hook(state, new)
    return new


def averaged_strategy(state: RegretState, scheme: str) -> np.ndarray:
    """Joint strategy reported under ``scheme`` (last, uniform or linear)."""
    if scheme == "last" or state.t == 0:
        return state.z
    if scheme == "uniform":
        return state.sum_uniform / state.t
    if scheme == "linear":
        return state.sum_linear * (2.0 / (state.t * (state.t + 1)))
    raise ValueError(f"unknown averaging scheme {scheme!r}")


@dataclass
class CfrConfig:
    algorithm: str = "cfr+"
    T: int = 1000
    metric_every: int = 1
    scheme: Optional[str] = None
    averaging: Optional[str] = None
    start: Optional[np.ndarray] = None
    reference: Optional[ReferenceEquilibrium] = None
    keep_iterates: bool = False

    @property
    def variant(self) -> str:
        try:
            return ALGORITHMS[self.algorithm]
        except KeyError:
            raise ValueError(f"unknown regret algorithm {self.algorithm!r}") from None

    def resolved_scheme(self) -> str:
        if self.scheme is not None:
            return self.scheme
        return "alternating" if self.variant.endswith("+") else "simultaneous"

    def resolved_averaging(self) -> str:
        if self.averaging is not None:
            return self.averaging
        return "linear" if self.variant.endswith("+") else "uniform"


def _record(game: Game, t: int, z: np.ndarray, reference) -> MetricsRecord:
    gap = duality_gap(game, *game.split(z))
    if reference is None:
        return MetricsRecord(t, gap)
    return MetricsRecord(t, gap, float(np.linalg.norm(z - reference.z_star)))


def run(game: Game, config: CfrConfig, hook: Optional[Hook] = None) -> Trajectory:
    if config.T < 1:
        raise ValueError("T must be at least 1")
    if config.metric_every < 1:
        raise ValueError("metric_every must be at least 1")
    scheme = config.resolved_scheme()
    averaging = config.resolved_averaging()
    if averaging not in AVERAGING:
        raise ValueError(f"unknown averaging scheme {averaging!r}")
    state = init(game, config.variant, config.start)
    records = [_record(game, 0, state.z, config.reference)]
    iterates = {0: state.z.copy()} if config.keep_iterates else {}
    for _ in range(config.T):
        state = cfr_step(state, game, scheme, hook)
        if state.t % config.metric_every == 0:
            z = averaged_strategy(state, averaging)
            records.append(_record(game, state.t, z, config.reference))
            if config.keep_iterates:
                iterates[state.t] = z.copy()
    logger.debug("%s finished t=%d gap=%.3e", config.algorithm, state.t, records[-1].gap)
    return Trajectory(records, state, averaged_strategy(state, averaging), iterates)
