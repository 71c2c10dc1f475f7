"""Treeplex structure and sequence-form / behavioral conversions.

A treeplex is described by an ordered list of simplexes (information sets).
Each simplex owns a contiguous block of action indices and hangs below a
parent index, or below the virtual root.  In text files and in ``build_treeplex``
indices are 1-based and ``0`` denotes the root; internally everything is
0-based and the root is the sentinel slot ``dim`` of an extended vector whose
last entry is fixed to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TOL = 1e-9


class TreeplexError(ValueError):
    """Raised for malformed treeplex descriptions or strategy vectors."""


@dataclass(frozen=True)
class Level:
    """Simplexes sharing one depth, laid out as a padded matrix for batching."""

    simplexes: np.ndarray  # simplex ids, shape (n,)
    idx: np.ndarray  # padded index matrix, shape (n, kmax); pads point at the root slot
    mask: np.ndarray  # True on real entries
    parent: np.ndarray  # parent index per simplex (root slot for roots)
    flat_idx: np.ndarray  # idx[mask]
    flat_parent: np.ndarray  # parent index of every entry of flat_idx


@dataclass(frozen=True)
class ViolationReport:
    ok: bool
    negative: tuple[int, ...] = ()
    violated: tuple[tuple[int, float], ...] = ()  # (simplex id, residual)

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True, eq=False)
class Treeplex:
    starts: np.ndarray
    sizes: np.ndarray
    parents: np.ndarray  # 0-based parent index per simplex, ``dim`` for the root
    topo_order: tuple[int, ...]
    labels: tuple[str, ...] | None = None
    levels: tuple[Level, ...] = field(init=False, repr=False)
    parent_of_index: np.ndarray = field(init=False, repr=False)
    simplex_of_index: np.ndarray = field(init=False, repr=False)
    children_of_index: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    dim: int = field(init=False)
    uniform_weights: np.ndarray = field(init=False, repr=False)  # 1 / size of the owning simplex

    def __post_init__(self):
        dim = int(self.sizes.sum())
        object.__setattr__(self, "dim", dim)
        simplex_of_index = np.repeat(np.arange(len(self.sizes)), self.sizes)
        parent_of_index = self.parents[simplex_of_index]
        children: list[list[int]] = [[] for _ in range(dim)]
        for h in self.topo_order:
            p = int(self.parents[h])
            if p < dim:
                children[p].append(h)
        object.__setattr__(self, "simplex_of_index", simplex_of_index)
        object.__setattr__(self, "parent_of_index", parent_of_index)
        object.__setattr__(self, "children_of_index", tuple(tuple(c) for c in children))
        object.__setattr__(self, "levels", self._build_levels(dim))
        object.__setattr__(self, "uniform_weights", 1.0 / self.sizes[simplex_of_index])
        for arr in (self.starts, self.sizes, self.parents, simplex_of_index, parent_of_index, self.uniform_weights):
            arr.flags.writeable = False

    def _build_levels(self, dim: int) -> tuple[Level, ...]:
        depth = np.zeros(len(self.sizes), dtype=int)
        for h in self.topo_order:
            p = int(self.parents[h])
            depth[h] = 0 if p == dim else depth[self.simplex_of_index[p]] + 1
        levels = []
        for d in range(depth.max() + 1 if len(depth) else 0):
            hs = np.array([h for h in self.topo_order if depth[h] == d], dtype=int)
            kmax = int(self.sizes[hs].max())
            idx = np.full((len(hs), kmax), dim, dtype=int)
            mask = np.zeros((len(hs), kmax), dtype=bool)
            for r, h in enumerate(hs):
                k = self.sizes[h]
                idx[r, :k] = np.arange(self.starts[h], self.starts[h] + k)
                mask[r, :k] = True
            parent = self.parents[hs].astype(int)
            flat_idx = idx[mask]
            flat_parent = np.repeat(parent, self.sizes[hs])
            levels.append(Level(hs, idx, mask, parent, flat_idx, flat_parent))
        return tuple(levels)

    @property
    def num_simplexes(self) -> int:
        return len(self.sizes)

    @property
    def num_sequences(self) -> int:
        """Sequence count including the empty sequence."""
        return self.dim + 1

    @property
    def root(self) -> int:
        return self.dim

    def simplex_indices(self, h: int) -> range:
        return range(int(self.starts[h]), int(self.starts[h] + self.sizes[h]))

    def is_terminal(self, i: int) -> bool:
        return not self.children_of_index[i]

    def specs(self) -> list[tuple[int, int]]:
        """Description records ``(action_count, parent)`` with 1-based parents."""
        dim = self.dim
        return [(int(k), 0 if p == dim else int(p) + 1) for k, p in zip(self.sizes, self.parents)]

    def extend(self, z: np.ndarray) -> np.ndarray:
        """Append the root value 1."""
        out = np.empty(self.dim + 1)
        out[:-1] = z
        out[-1] = 1.0
        return out

    def segment_sums(self, z: np.ndarray) -> np.ndarray:
        return np.add.reduceat(z, self.starts) if self.num_simplexes else np.zeros(0)


def build_treeplex(simplex_specs: Iterable[Sequence[int]], labels: Sequence[str] | None = None) -> Treeplex:
    """Build a treeplex from ``(action_count, parent_index)`` records.

    Action indices are assigned contiguously in declaration order, starting at
    1.  ``parent_index`` is a 1-based index or 0 for the root.  Declaration
    order need not be topological; a parent chain that loops back is an error.
    """
    specs = [(int(k), int(p)) for k, p in simplex_specs]
    if not specs:
        raise TreeplexError("treeplex needs at least one simplex")
    sizes = np.array([k for k, _ in specs], dtype=int)
    if (sizes <= 0).any():
        raise TreeplexError(f"empty simplex at position {int(np.argmax(sizes <= 0))}")
    dim = int(sizes.sum())
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    owner = np.repeat(np.arange(len(sizes)), sizes)
    parents = np.empty(len(sizes), dtype=int)
    for h, (_, p) in enumerate(specs):
        if p < 0 or p > dim:
            raise TreeplexError(f"simplex {h}: parent index {p} out of range 0..{dim}")
        parents[h] = dim if p == 0 else p - 1

    # Kahn's algorithm over the simplex graph (edge: owner of parent -> child)
    indegree = np.array([0 if parents[h] == dim else 1 for h in range(len(sizes))])
    kids: list[list[int]] = [[] for _ in sizes]
    for h in range(len(sizes)):
        if parents[h] != dim:
            kids[owner[parents[h]]].append(h)
    ready = [h for h in range(len(sizes)) if indegree[h] == 0]
    order = []
    while ready:
        h = ready.pop(0)
        order.append(h)
        for c in kids[h]:
            indegree[c] -= 1
            if indegree[c] == 0:
                ready.append(c)
    if len(order) != len(sizes):
        stuck = sorted(set(range(len(sizes))) - set(order))
        raise TreeplexError(f"cycle detected among simplexes {stuck}")
    if labels is not None and len(labels) != dim:
        raise TreeplexError(f"expected {dim} labels, got {len(labels)}")
    return Treeplex(starts, sizes, parents, tuple(order), tuple(labels) if labels is not None else None)


def product(*parts: Treeplex) -> Treeplex:
    """Cartesian product: the parts' indices are concatenated in order."""
    specs: list[tuple[int, int]] = []
    labels: list[str] | None = [] if all(p.labels is not None for p in parts) else None
    offset = 0
    for part in parts:
        for k, p in part.specs():
            specs.append((k, 0 if p == 0 else p + offset))
        if labels is not None:
            labels.extend(part.labels)
        offset += part.dim
    return build_treeplex(specs, labels)


def _check_dim(t: Treeplex, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (t.dim,):
        raise TreeplexError(f"dimension mismatch: expected ({t.dim},), got {z.shape}")
    return z


def validate_sequence(t: Treeplex, z, tol: float = TOL) -> ViolationReport:
    z = _check_dim(t, z)
    negative = tuple(int(i) for i in np.flatnonzero(z < -tol))
    residual = t.segment_sums(z) - t.extend(z)[t.parents]
    bad = np.flatnonzero(np.abs(residual) > tol)
    violated = tuple((int(h), float(residual[h])) for h in bad)
    return ViolationReport(not negative and not violated, negative, violated)


def behavioral_from_sequence(t: Treeplex, z) -> np.ndarray:
    """Local action probabilities ``q_i = z_i / z_parent``; uniform where unreached."""
    z = _check_dim(t, z)
    zp = t.extend(z)[t.parent_of_index]
    reached = zp > 0
    if reached.all():
        return z / zp
    q = t.uniform_weights.copy()
    q[reached] = z[reached] / zp[reached]
    return q


def sequence_from_behavioral(t: Treeplex, q, tol: float = TOL) -> np.ndarray:
    q = _check_dim(t, q)
    bad = np.flatnonzero(np.abs(t.segment_sums(q) - 1.0) > tol)
    if len(bad):
        raise TreeplexError(f"behavioral rows do not sum to 1 at simplexes {bad.tolist()}")
    return realize(t, q)


def realize(t: Treeplex, q: np.ndarray) -> np.ndarray:
    """Top-down product of local probabilities, without validation."""
    z = np.empty(t.dim + 1)
    z[-1] = 1.0
    for lvl in t.levels:
        z[lvl.flat_idx] = q[lvl.flat_idx] * z[lvl.flat_parent]
    return z[:-1]


def uniform_strategy(t: Treeplex) -> np.ndarray:
    return realize(t, t.uniform_weights)


# -- text format --------------------------------------------------------------

def format_treeplex(t: Treeplex) -> str:
    return "".join(f"{k} {p}\n" for k, p in t.specs())


def parse_treeplex(lines: Iterable[str]) -> Treeplex:
    specs = []
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TreeplexError(f"line {n}: expected 'action_count parent_index', got {line!r}")
        specs.append((int(parts[0]), int(parts[1])))
    return build_treeplex(specs)


def load_treeplex(path: str | Path) -> Treeplex:
    return parse_treeplex(Path(path).read_text().splitlines())


def save_treeplex(t: Treeplex, path: str | Path) -> None:
    Path(path).write_text(format_treeplex(t))


def minimize_linear(t: Treeplex, c) -> tuple[float, np.ndarray]:
    """``min_{z in Z} <c, z>`` by bottom-up dynamic programming.

    Returns the value and a pure realization plan; ties go to the lowest index.
    """
    c = _check_dim(t, c)
    V = t.extend(c)
    V[-1] = 0.0
    q = np.zeros(t.dim)
    for lvl in reversed(t.levels):
        rows = np.where(lvl.mask, V[lvl.idx], np.inf)
        k = np.argmin(rows, axis=1)
        r = np.arange(len(rows))
        q[lvl.idx[r, k]] = 1.0
        np.add.at(V, lvl.parent, rows[r, k])
    return float(V[-1]), realize(t, q)
