"""Best responses, duality gap and distance diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .games import Game
from .regularizers import Regularizer, bregman
from .treeplex import Treeplex, minimize_linear

GAP_CLAMP = 1e-12


@dataclass(frozen=True)
class MetricsRecord:
    t: int
    gap: float
    l2_to_ref: Optional[float] = None
    bregman_to_ref: Optional[float] = None
    theta: Optional[float] = None
    flagged: bool = False  # an infinite divergence showed up


@dataclass(frozen=True)
class ReferenceEquilibrium:
    z_star: np.ndarray
    provenance: str  # analytic | long-run | external


def best_response(game: Game, side: str, opponent: np.ndarray) -> tuple[float, np.ndarray]:
    """Best response of ``side`` ('x' minimizes, 'y' maximizes) to the opponent plan."""
    if side == "x":
        return minimize_linear(game.x, game.payoff @ opponent)
    if side == "y":
        value, plan = minimize_linear(game.y, -(game.payoff_t @ opponent))
        return -value, plan
    raise ValueError(f"side must be 'x' or 'y', got {side!r}")


def duality_gap(game: Game, x: np.ndarray, y: np.ndarray) -> float:
    """``max_y' x^T G y' - min_x' x'^T G y``."""
    upper, _ = best_response(game, "y", x)
    lower, _ = best_response(game, "x", y)
    return upper - lower


def theta(reg: Regularizer, t: Treeplex, z_star, z_hat, z_prev) -> float:
    """``D(z*, zhat_t) + D(zhat_t, z_{t-1}) / 16``."""
    return bregman(reg, t, z_star, z_hat) + bregman(reg, t, z_hat, z_prev) / 16.0


def rps_reference(game: Game) -> ReferenceEquilibrium:
    return ReferenceEquilibrium(np.full(game.P, 1.0 / 3.0), "analytic")


class RunningAverage:
    """Uniform and linear (weight t) averages of a stream of iterates."""

    def __init__(self, dim: int):
        self.count = 0
        self.total = np.zeros(dim)
        self.weighted = np.zeros(dim)

    def add(self, z: np.ndarray) -> None:
        self.count += 1
        self.total += z
        self.weighted += self.count * z

    def uniform(self) -> np.ndarray:
        return self.total / self.count

    def linear(self) -> np.ndarray:
        return self.weighted * (2.0 / (self.count * (self.count + 1)))

    def get(self, scheme: str) -> np.ndarray:
        if scheme == "uniform":
            return self.uniform()
        if scheme == "linear":
            return self.linear()
        raise ValueError(f"unknown averaging scheme {scheme!r}")
