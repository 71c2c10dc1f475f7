"""Benchmark games in sequence form.

``G`` is the loss matrix of player x (x minimizes ``x^T G y``, y maximizes it).
Chance is folded into ``G``: an entry is the sum over deals of
``deal probability * x's loss at the terminal`` divided by ``scale``, the
largest absolute terminal payoff of the game.  With that scale every
``|(G y)_i|`` is bounded by the probability of the deals consistent with
sequence ``i``, so ``||F(z)||_inf <= 1`` on the whole strategy space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .treeplex import Treeplex, build_treeplex, format_treeplex, parse_treeplex, product

RPS_MATRIX = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


class GameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Game:
    x: Treeplex
    y: Treeplex
    payoff: sp.csr_matrix  # normalized G, shape (x.dim, y.dim)
    scale: float = 1.0
    name: str = "custom"
    payoff_t: sp.csr_matrix = field(init=False, repr=False)
    joint: Treeplex = field(init=False, repr=False)

    def __post_init__(self):
        G = sp.csr_matrix(self.payoff)
        if G.shape != (self.x.dim, self.y.dim):
            raise GameError(f"payoff shape {G.shape} does not match treeplexes ({self.x.dim}, {self.y.dim})")
        G.sort_indices()
        object.__setattr__(self, "payoff", G)
        object.__setattr__(self, "payoff_t", G.T.tocsr())
        object.__setattr__(self, "joint", product(self.x, self.y))

    @property
    def M(self) -> int:
        """Sequences of player x, counting the empty sequence."""
        return self.x.num_sequences

    @property
    def N(self) -> int:
        return self.y.num_sequences

    @property
    def P(self) -> int:
        """Length of a stored strategy pair; the Lipschitz constant of F."""
        return self.x.dim + self.y.dim

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return z[: self.x.dim], z[self.x.dim :]

    def value(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(x @ (self.payoff @ y))


def payoff_field(g: Game, z: np.ndarray) -> np.ndarray:
    """``F(z) = (G y, -G^T x)``."""
    z = np.asarray(z, dtype=float)
    if z.shape != (g.P,):
        raise GameError(f"dimension mismatch: expected ({g.P},), got {z.shape}")
    x, y = g.split(z)
    return np.concatenate([g.payoff @ y, -(g.payoff_t @ x)])


def build_matrix_game(A, name: str = "matrix") -> Game:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise GameError("payoff matrix is empty")
    m, n = A.shape
    top = np.abs(A).max()
    scale = float(top) if top > 0 else 1.0
    return Game(build_treeplex([(m, 0)]), build_treeplex([(n, 0)]), sp.csr_matrix(A / scale), scale, name)


def rock_paper_scissors() -> Game:
    return build_matrix_game(RPS_MATRIX, name="rps")


# -- poker ---------------------------------------------------------------------

@dataclass(frozen=True)
class PokerRules:
    """Limit poker with alternating first action by x in every round.

    Action letters: ``r`` bet/raise, ``c`` check/call, ``f`` fold.  The raise
    cap counts the opening bet.
    """

    ranks: str
    bets: tuple[float, ...]  # bet size per round
    max_raises: int
    ante: float
    deals: tuple[tuple[float, str, str, str], ...]  # (prob, x card, y card, public or "")

    @property
    def rounds(self) -> int:
        return len(self.bets)


def kuhn_rules() -> PokerRules:
    deals = tuple((1 / 6, a, b, "") for a, b in itertools.permutations("JQK", 2))
    return PokerRules("JQK", (1.0,), 1, 1.0, deals)


def leduc_rules() -> PokerRules:
    deals = []
    for a, b, c in itertools.product("JQK", repeat=3):
        pa = 2 / 6
        pb = (2 - (b == a)) / 5
        pc = (2 - (c == a) - (c == b)) / 4
        if pb > 0 and pc > 0:
            deals.append((pa * pb * pc, a, b, c))
    return PokerRules("JQK", (2.0, 4.0), 2, 1.0, tuple(deals))


def showdown(rules: PokerRules, xc: str, yc: str, pub: str) -> int:
    """+1 if x wins, -1 if y wins, 0 on a tie."""
    if pub:
        if xc == pub and yc != pub:
            return 1
        if yc == pub and xc != pub:
            return -1
    rx, ry = rules.ranks.index(xc), rules.ranks.index(yc)
    return (rx > ry) - (rx < ry)


def legal_actions(outstanding: bool, raises: int, max_raises: int) -> str:
    if outstanding:
        return ("r" if raises < max_raises else "") + "cf"
    return "rc"


def walk_poker(
    rules: PokerRules,
    deal: tuple[float, str, str, str],
    decision: Callable[[int, str, str, int | None], int],
    terminal: Callable[[int | None, int | None, float], None],
) -> None:
    """Depth-first traversal of one deal.

    ``decision(player, infoset_key, actions, parent_seq)`` returns the index of
    the infoset's first action; ``terminal(seq_x, seq_y, utility_x)`` is called
    at every leaf.  Sequence indices are ``None`` before a player's first move.
    """
    _, xc, yc, pub = deal
    cards = (xc, yc)

    def rec(rnd, past, h, contrib, seqs, raises):
        player = len(h) % 2
        outstanding = contrib[0] != contrib[1]
        actions = legal_actions(outstanding, raises, rules.max_raises)
        key = cards[player] + ("|" + pub if rnd > 0 else "") + ":" + "/".join(past + [h])
        start = decision(player, key, actions, seqs[player])
        for k, a in enumerate(actions):
            s = list(seqs)
            s[player] = start + k
            c = list(contrib)
            if a == "f":
                terminal(s[0], s[1], -c[0] if player == 0 else c[1])
                continue
            if a == "r":
                c[player] = c[1 - player] + rules.bets[rnd]
                rec(rnd, past, h + a, c, s, raises + 1)
                continue
            if outstanding or h.endswith("c"):  # call, or check behind
                c[player] = c[1 - player]
                if rnd + 1 < rules.rounds:
                    rec(rnd + 1, past + [h + a], "", c, s, 0)
                else:
                    terminal(s[0], s[1], showdown(rules, xc, yc, pub) * c[0])
            else:
                rec(rnd, past, h + a, c, s, raises)

    rec(0, [], "", [rules.ante, rules.ante], [None, None], 0)


def build_poker(rules: PokerRules, name: str) -> Game:
    trees = []
    for player in (0, 1):
        specs: list[tuple[int, int]] = []
        labels: list[str] = []
        starts: dict[str, int] = {}

        def decision(p, key, actions, parent):
            if p != player:
                return 0
            if key not in starts:
                starts[key] = len(labels)
                specs.append((len(actions), 0 if parent is None else parent + 1))
                labels.extend(key + a for a in actions)
            return starts[key]

        for deal in sorted(rules.deals, key=lambda d: (rules.ranks.index(d[1 + player]), d[1:])):
            walk_poker(rules, deal, decision, lambda *_: None)
        trees.append((build_treeplex(specs, labels), starts))

    (tx, sx), (ty, sy) = trees
    entries: dict[tuple[int, int], float] = {}
    scale = 0.0
    for deal in rules.deals:
        prob = deal[0]

        def decision(p, key, actions, parent):
            return (sx, sy)[p][key]

        def terminal(i, j, u):
            nonlocal scale
            if i is None or j is None:
                raise GameError("terminal reached before both players acted")
            scale = max(scale, abs(u))
            entries[(i, j)] = entries.get((i, j), 0.0) - prob * u

        walk_poker(rules, deal, decision, terminal)

    keys = sorted(k for k, v in entries.items() if v != 0.0)
    rows = np.array([k[0] for k in keys], dtype=int)
    cols = np.array([k[1] for k in keys], dtype=int)
    vals = np.array([entries[k] for k in keys]) / scale
    G = sp.csr_matrix((vals, (rows, cols)), shape=(tx.dim, ty.dim))
    return Game(tx, ty, G, scale, name)


def build_kuhn() -> Game:
    return build_poker(kuhn_rules(), "kuhn")


def build_leduc() -> Game:
    return build_poker(leduc_rules(), "leduc")


# -- custom game files -----------------------------------------------------------

def format_game(g: Game) -> str:
    coo = g.payoff.tocoo()
    order = np.lexsort((coo.col, coo.row))
    out = [f"{g.x.dim} {g.y.dim}\n", f"scale {g.scale!r}\n"]
    out += [f"{coo.row[k] + 1} {coo.col[k] + 1} {float(coo.data[k])!r}\n" for k in order]
    out += ["treeplex\n", format_treeplex(g.x), "treeplex\n", format_treeplex(g.y)]
    return "".join(out)


def parse_game(text: str, name: str = "custom") -> Game:
    """Parse the custom game format.

    Layout: a header ``M N`` (stored dimensions), an optional ``scale s`` line,
    1-based entries ``i j value``, then two blocks each opened by a line
    ``treeplex`` and holding ``action_count parent_index`` records.  Without a
    scale line the entries are divided by their largest magnitude.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GameError("empty game file")
    try:
        m, n = (int(v) for v in lines[0].split())
    except ValueError as e:
        raise GameError(f"bad header {lines[0]!r}") from e
    scale = None
    rows, cols, vals = [], [], []
    blocks: list[list[str]] = []
    for ln in lines[1:]:
        if ln == "treeplex":
            blocks.append([])
        elif blocks:
            blocks[-1].append(ln)
        elif ln.startswith("scale"):
            scale = float(ln.split()[1])
        else:
            i, j, v = ln.split()
            rows.append(int(i) - 1)
            cols.append(int(j) - 1)
            vals.append(float(v))
    if len(blocks) != 2:
        raise GameError(f"expected two treeplex blocks, found {len(blocks)}")
    tx, ty = parse_treeplex(blocks[0]), parse_treeplex(blocks[1])
    if (tx.dim, ty.dim) != (m, n):
        raise GameError(f"header says {m}x{n} but treeplexes have dimensions {tx.dim}x{ty.dim}")
    vals = np.array(vals)
    if scale is None:
        top = np.abs(vals).max() if len(vals) else 0.0
        scale = float(top) if top > 0 else 1.0
        vals = vals / scale
    G = sp.csr_matrix((vals, (np.array(rows, dtype=int), np.array(cols, dtype=int))), shape=(m, n))
    return Game(tx, ty, G, scale, name)


def load_game(path: str | Path) -> Game:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GameError(f"cannot read game file {path}: {exc.strerror}") from None
    return parse_game(text, name=f"custom:{path}")


def save_game(g: Game, path: str | Path) -> None:
    Path(path).write_text(format_game(g))


BUILTIN = {"rps": rock_paper_scissors, "kuhn": build_kuhn, "leduc": build_leduc}


def get_game(spec: str) -> Game:
    if spec.startswith("custom:"):
        return load_game(spec[len("custom:") :])
    try:
        return BUILTIN[spec]()
    except KeyError:
        raise GameError(f"unknown game {spec!r}; choose from {sorted(BUILTIN)} or custom:<path>") from None
