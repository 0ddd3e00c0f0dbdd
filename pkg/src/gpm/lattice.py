"""Periodic L x L triangular lattice in axial coordinates.

Vertex ``v`` has coordinates ``(x, y) = (v % L, v // L)``. Its six neighbours
sit at the axial offsets ``NEIGHBOR_OFFSETS`` (reduced mod L), always listed in
that order. Row ``y = 0`` is the bottom row; columns are the sets of fixed
``x``.

Vertex sets are passed around either as boolean masks of length ``L*L`` or as
integer index arrays; every function here accepts both and returns sorted
``int64`` index arrays.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc

NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))
# positions in NEIGHBOR_OFFSETS of (1,0), (0,1), (-1,1): one direction per edge
FORWARD = (0, 2, 5)


@dataclass(frozen=True)
class TorusLattice:
    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 3:
            raise ValueError(f"side length must be an integer >= 3, got {self.L!r}")

    @property
    def n_vertices(self) -> int:
        return self.L * self.L

    @property
    def n_edges(self) -> int:
        return 3 * self.L * self.L

    def index(self, x: int, y: int) -> int:
        return (x % self.L) + self.L * (y % self.L)

    def coords(self, v: int) -> tuple[int, int]:
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex {v} out of range for L={self.L}")
        return v % self.L, v // self.L

    @cached_property
    def xy(self) -> np.ndarray:
        v = np.arange(self.n_vertices, dtype=np.int64)
        return np.stack([v % self.L, v // self.L], axis=1)

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """(L*L, 6) int64 array; row v lists the neighbours of v."""
        L = self.L
        x, y = self.xy[:, 0], self.xy[:, 1]
        cols = [((x + dx) % L) + L * ((y + dy) % L) for dx, dy in NEIGHBOR_OFFSETS]
        table = np.stack(cols, axis=1).astype(np.int64)
        table.setflags(write=False)
        return table

    @cached_property
    def edges(self) -> np.ndarray:
        """(3*L*L, 2) array of unordered edges; edge ``3*v + k`` joins v to its k-th forward neighbour."""
        nbr = self.neighbor_table
        u = np.repeat(np.arange(self.n_vertices, dtype=np.int64), 3)
        w = nbr[:, FORWARD].reshape(-1)
        e = np.stack([u, w], axis=1)
        e.setflags(write=False)
        return e

    @cached_property
    def adjacency(self) -> csr_matrix:
        n = self.n_vertices
        rows = np.repeat(np.arange(n), 6)
        return csr_matrix(
            (np.ones(6 * n, dtype=np.int8), (rows, self.neighbor_table.reshape(-1))),
            shape=(n, n),
        )

    def row(self, y: int) -> np.ndarray:
        return np.arange(self.L, dtype=np.int64) + self.L * (y % self.L)

    def column(self, x: int) -> np.ndarray:
        return (x % self.L) + self.L * np.arange(self.L, dtype=np.int64)


def neighbors(lat: TorusLattice, v: int) -> list[int]:
    """The six neighbours of ``v`` in ``NEIGHBOR_OFFSETS`` order."""
    if not 0 <= v < lat.n_vertices:
        raise IndexError(f"vertex {v} out of range for L={lat.L}")
    return [int(w) for w in lat.neighbor_table[v]]


def as_mask(lat: TorusLattice, s) -> np.ndarray:
    s = np.asarray(s)
    if s.dtype == bool:
        if s.shape != (lat.n_vertices,):
            raise ValueError("mask length does not match the lattice")
        return s
    mask = np.zeros(lat.n_vertices, dtype=bool)
    mask[s.astype(np.int64).reshape(-1)] = True
    return mask


def as_indices(lat: TorusLattice, s) -> np.ndarray:
    s = np.asarray(s)
    if s.dtype == bool:
        return np.flatnonzero(s).astype(np.int64)
    return np.unique(s.astype(np.int64).reshape(-1))


def connected_components(lat: TorusLattice, s) -> list[np.ndarray]:
    """Maximal connected subsets of ``s``, ordered by their smallest vertex."""
    idx = as_indices(lat, s)
    if idx.size == 0:
        return []
    sub = lat.adjacency[idx][:, idx]
    n, labels = _cc(sub, directed=False)
    comps = [idx[labels == k] for k in range(n)]
    comps.sort(key=lambda c: int(c[0]))
    return comps


def is_connected(lat: TorusLattice, s) -> bool:
    return len(connected_components(lat, s)) <= 1


def _lift(lat: TorusLattice, idx: np.ndarray):
    """BFS lift of a connected set to the universal cover.

    Returns ``(lifts, winds)`` where ``lifts`` maps vertex -> (X, Y) in Z^2 and
    ``winds`` is True when some vertex received two different lifts.
    """
    L = lat.L
    nbr = lat.neighbor_table
    member = as_mask(lat, idx)
    start = int(idx[0])
    lifts = {start: (start % L, start // L)}
    queue = deque([start])
    winds = False
    while queue:
        u = queue.popleft()
        X, Y = lifts[u]
        for k, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
            w = int(nbr[u, k])
            if not member[w]:
                continue
            cand = (X + dx, Y + dy)
            seen = lifts.get(w)
            if seen is None:
                lifts[w] = cand
                queue.append(w)
            elif seen != cand:
                winds = True
    return lifts, winds


def is_noncontractible(lat: TorusLattice, s) -> bool:
    """True iff the connected set ``s`` winds around the torus in some direction."""
    idx = as_indices(lat, s)
    if idx.size == 0:
        return False
    lifts, winds = _lift(lat, idx)
    if len(lifts) != idx.size:
        raise ValueError("is_noncontractible requires a connected vertex set")
    return winds


def winding_directions(lat: TorusLattice, s) -> tuple[bool, bool]:
    """Whether the connected set ``s`` winds horizontally / vertically.

    A closed walk with lift displacement (a*L, b*L) winds horizontally when
    a != 0 and vertically when b != 0.
    """
    idx = as_indices(lat, s)
    if idx.size == 0:
        return False, False
    lifts, _ = _lift(lat, idx)
    if len(lifts) != idx.size:
        raise ValueError("winding_directions requires a connected vertex set")
    nbr = lat.neighbor_table
    member = as_mask(lat, idx)
    horiz = vert = False
    for u, (X, Y) in lifts.items():
        for k, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
            w = int(nbr[u, k])
            if member[w]:
                WX, WY = lifts[w]
                horiz |= WX != X + dx
                vert |= WY != Y + dy
    return horiz, vert


def dilate(lat: TorusLattice, s, d: int = 1) -> np.ndarray:
    """Mask of all vertices within graph distance ``d`` of ``s``."""
    mask = as_mask(lat, s).copy()
    nbr = lat.neighbor_table
    for _ in range(d):
        mask[nbr[mask].reshape(-1)] = True
    return mask


def graph_distance_le(lat: TorusLattice, a, b, d: int) -> bool:
    """True iff some pair (u in a, w in b) is at lattice distance <= d."""
    if d not in (0, 1, 2):
        raise ValueError("d must be 0, 1 or 2")
    bm = as_mask(lat, b)
    if not bm.any():
        return False
    return bool((dilate(lat, a, d) & bm).any())


def holes(lat: TorusLattice, s) -> np.ndarray:
    """Vertices enclosed by a contractible connected set ``s``.

    The complement of a contractible set has one exterior component (the one
    winding around the torus); every other complement component is a hole.
    If no complement component winds (possible only on very small tori), the
    largest one is taken as the exterior.
    """
    idx = as_indices(lat, s)
    if idx.size == 0:
        return idx
    comps = connected_components(lat, ~as_mask(lat, idx))
    if len(comps) <= 1:
        return np.empty(0, dtype=np.int64)
    ext = None
    for k, c in enumerate(comps):
        if is_noncontractible(lat, c):
            ext = k
            break
    if ext is None:
        ext = max(range(len(comps)), key=lambda k: (comps[k].size, -int(comps[k][0])))
    rest = [c for k, c in enumerate(comps) if k != ext]
    return np.sort(np.concatenate(rest))
