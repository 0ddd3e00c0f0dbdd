"""Energy model: cost matrices, configurations, Hamiltonians and magnetization.

Colours are 1-based (``1..q``) everywhere in memory; on-disk snapshot files
use 0-based indices (see :mod:`gpm.io`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import TorusLattice

COUNT_EPS = 1e-9


class CostMatrix:
    """Symmetric q x q interaction matrix with zero diagonal and positive off-diagonal."""

    def __init__(self, entries, name: str | None = None):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("cost matrix must be a non-empty square matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("cost matrix entries must be finite")
        if not np.array_equal(a, a.T):
            raise ValueError("cost matrix must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("cost matrix diagonal must be zero")
        off = a[~np.eye(a.shape[0], dtype=bool)]
        if off.size and np.any(off <= 0):
            raise ValueError("cost matrix off-diagonal entries must be positive")
        a.setflags(write=False)
        self.entries = a
        self.name = name

    @property
    def q(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def a_min(self) -> float:
        off = self.entries[~np.eye(self.q, dtype=bool)]
        return float(off.min()) if off.size else 0.0

    @cached_property
    def a_max(self) -> float:
        off = self.entries[~np.eye(self.q, dtype=bool)]
        return float(off.max()) if off.size else 0.0

    @cached_property
    def is_integer(self) -> bool:
        return bool(np.all(self.entries == np.round(self.entries)))

    @cached_property
    def padded(self) -> np.ndarray:
        """(q+1, q+1) copy indexed directly by 1-based colours."""
        p = np.zeros((self.q + 1, self.q + 1))
        p[1:, 1:] = self.entries
        return p

    def __call__(self, i: int, j: int) -> float:
        return float(self.entries[i - 1, j - 1])

    def __eq__(self, other):
        return isinstance(other, CostMatrix) and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"CostMatrix(q={self.q}, name={self.name!r})"

    def to_json(self) -> dict:
        return {"q": self.q, "entries": self.entries.tolist()}

    @classmethod
    def from_json(cls, obj) -> "CostMatrix":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "q" not in obj or "entries" not in obj:
            raise ValueError('cost matrix JSON must be {"q": int, "entries": [[...]]}')
        m = cls(obj["entries"], name=obj.get("name"))
        if m.q != obj["q"]:
            raise ValueError(f"cost matrix declares q={obj['q']} but has {m.q} rows")
        return m


_FIG2 = {
    "fig2a": (2.0, [
        [0, 1, 2, 2, 4, 4, 4, 4, 4],
        [1, 0, 2, 2, 4, 4, 4, 4, 4],
        [2, 2, 0, 1, 4, 4, 4, 4, 4],
        [2, 2, 1, 0, 4, 4, 4, 4, 4],
        [4, 4, 4, 4, 0, 1, 2, 2, 4],
        [4, 4, 4, 4, 1, 0, 2, 2, 4],
        [4, 4, 4, 4, 2, 2, 0, 1, 4],
        [4, 4, 4, 4, 2, 2, 1, 0, 4],
        [4, 4, 4, 4, 4, 4, 4, 4, 0],
    ]),
    "fig2b": (1.0, [
        [0, 1, 2, 3, 4, 4, 4, 4, 2],
        [1, 0, 1, 2, 4, 4, 4, 4, 2],
        [2, 1, 0, 1, 4, 4, 4, 4, 2],
        [3, 2, 1, 0, 4, 4, 4, 4, 2],
        [4, 4, 4, 4, 0, 1, 2, 3, 2],
        [4, 4, 4, 4, 1, 0, 1, 2, 2],
        [4, 4, 4, 4, 2, 1, 0, 1, 2],
        [4, 4, 4, 4, 3, 2, 1, 0, 2],
        [2, 2, 2, 2, 2, 2, 2, 2, 0],
    ]),
    "fig2c": (1.0, [
        [0, 1, 3, 3, 2, 2, 2, 2, 3],
        [1, 0, 1, 3, 2, 2, 2, 2, 3],
        [3, 1, 0, 1, 2, 2, 2, 2, 3],
        [3, 3, 1, 0, 2, 2, 2, 2, 3],
        [2, 2, 2, 2, 0, 1, 3, 3, 3],
        [2, 2, 2, 2, 1, 0, 1, 3, 3],
        [2, 2, 2, 2, 3, 1, 0, 1, 3],
        [2, 2, 2, 2, 3, 3, 1, 0, 3],
        [3, 3, 3, 3, 3, 3, 3, 3, 0],
    ]),
    "fig2d": (2.0 / 3.0, [
        [0, 2, 2, 2, 2, 2, 2, 2, 5],
        [2, 0, 2, 4, 4, 4, 4, 2, 5],
        [2, 2, 0, 2, 4, 4, 4, 4, 5],
        [2, 4, 2, 0, 2, 4, 4, 4, 5],
        [2, 4, 4, 2, 0, 2, 4, 4, 5],
        [2, 4, 4, 4, 2, 0, 2, 4, 5],
        [2, 4, 4, 4, 4, 2, 0, 2, 5],
        [2, 2, 4, 4, 4, 4, 2, 0, 5],
        [5, 5, 5, 5, 5, 5, 5, 5, 0],
    ]),
}

BUILTIN_NAMES = ("potts", "ising", "blume_capel", "clock", "fig2a", "fig2b", "fig2c", "fig2d")


def builtin_fig2_integer(name: str) -> tuple[float, np.ndarray]:
    """The printed integer matrix of a figure-2 preset and its scalar prefactor."""
    factor, rows = _FIG2[name]
    return factor, np.array(rows, dtype=np.int64)


def builtin_matrix(name: str, q: int | None = None) -> CostMatrix:
    name = name.lower().replace("-", "_")
    if name == "potts":
        if q is None or q < 1:
            raise ValueError("potts needs q >= 1")
        return CostMatrix(1.0 - np.eye(q), name=f"potts{q}")
    if name == "ising":
        if q not in (None, 2):
            raise ValueError("ising is the q=2 Potts model")
        return CostMatrix(1.0 - np.eye(2), name="ising")
    if name == "blume_capel":
        if q not in (None, 3):
            raise ValueError("blume_capel is defined for q=3 only")
        i = np.arange(1, 4)
        return CostMatrix((i[:, None] - i[None, :]) ** 2, name="blume_capel")
    if name == "clock":
        if q is None or q < 1:
            raise ValueError("clock needs q >= 1")
        d = np.arange(q)[:, None] - np.arange(q)[None, :]
        a = 1.0 - np.cos(2.0 * math.pi * d / q)
        np.fill_diagonal(a, 0.0)
        return CostMatrix(a, name=f"clock{q}")
    if name in _FIG2:
        if q not in (None, 9):
            raise ValueError(f"{name} is a q=9 matrix")
        factor, rows = _FIG2[name]
        return CostMatrix(factor * np.array(rows, dtype=np.float64), name=name)
    raise ValueError(f"unknown cost matrix {name!r}; known: {', '.join(BUILTIN_NAMES)}")


@dataclass
class Configuration:
    """Assignment of a colour in ``1..q`` to each lattice vertex."""

    lattice: TorusLattice
    colors: np.ndarray
    q: int

    def __post_init__(self):
        c = np.ascontiguousarray(self.colors, dtype=np.int64).reshape(-1)
        if c.size != self.lattice.n_vertices:
            raise ValueError(f"expected {self.lattice.n_vertices} colours, got {c.size}")
        if c.size and (c.min() < 1 or c.max() > self.q):
            raise ValueError(f"colours must lie in [1, {self.q}]")
        self.colors = c

    @property
    def L(self) -> int:
        return self.lattice.L

    def copy(self) -> "Configuration":
        return Configuration(self.lattice, self.colors.copy(), self.q)

    def grid(self) -> np.ndarray:
        """Colours as an (L, L) array indexed ``[y, x]``."""
        return self.colors.reshape(self.L, self.L)

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.lattice == other.lattice
            and self.q == other.q
            and np.array_equal(self.colors, other.colors)
        )

    @classmethod
    def uniform(cls, lattice: TorusLattice, q: int, color: int = 1) -> "Configuration":
        return cls(lattice, np.full(lattice.n_vertices, color, dtype=np.int64), q)


class DensityVector(tuple):
    """Positive colour densities summing to one."""

    def __new__(cls, values):
        vals = tuple(float(v) for v in values)
        if not vals:
            raise ValueError("density vector must be non-empty")
        if any(not math.isfinite(v) or v <= 0 for v in vals):
            raise ValueError("density entries must be strictly positive")
        if abs(math.fsum(vals) - 1.0) > 1e-12:
            raise ValueError(f"density entries must sum to 1, got {math.fsum(vals)!r}")
        return super().__new__(cls, vals)

    @classmethod
    def proportional(cls, weights) -> "DensityVector":
        w = [float(x) for x in weights]
        total = math.fsum(w)
        return cls([x / total for x in w])

    @property
    def q(self) -> int:
        return len(self)


def _check_q(sigma: Configuration, A: CostMatrix):
    if sigma.q != A.q:
        raise ValueError(f"configuration has q={sigma.q} but cost matrix has q={A.q}")


def hamiltonian(sigma: Configuration, A: CostMatrix) -> float:
    """Sum of A over all unordered lattice edges."""
    _check_q(sigma, A)
    e = sigma.lattice.edges
    c = sigma.colors
    return float(A.padded[c[e[:, 0]], c[e[:, 1]]].sum())


def partition_cost(labels, A: CostMatrix, lattice: TorusLattice | None = None) -> float:
    """Hamiltonian of the configuration that colours each vertex by its part label."""
    if isinstance(labels, Configuration):
        return hamiltonian(labels, A)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if lattice is None:
        L = math.isqrt(labels.size)
        if L * L != labels.size:
            raise ValueError("labels length is not a perfect square; pass the lattice")
        lattice = TorusLattice(L)
    return hamiltonian(Configuration(lattice, labels, A.q), A)


def swap_delta(sigma: Configuration, A: CostMatrix, u: int, v: int) -> float:
    """Energy change from exchanging the colours of adjacent vertices u and v."""
    _check_q(sigma, A)
    nbr = sigma.lattice.neighbor_table
    if v not in nbr[u]:
        raise ValueError(f"vertices {u} and {v} are not adjacent")
    c = sigma.colors
    cu, cv = c[u], c[v]
    if cu == cv:
        return 0.0
    P = A.padded
    d = 0.0
    for w in nbr[u]:
        if w != v:
            d += P[cv, c[w]] - P[cu, c[w]]
    for w in nbr[v]:
        if w != u:
            d += P[cu, c[w]] - P[cv, c[w]]
    return float(d)


def recolor_delta(sigma: Configuration, A: CostMatrix, v: int, color: int) -> float:
    """Energy change from setting the colour of v to ``color``."""
    _check_q(sigma, A)
    if not 1 <= color <= sigma.q:
        raise ValueError(f"colour {color} outside [1, {sigma.q}]")
    c = sigma.colors
    old = c[v]
    if old == color:
        return 0.0
    nb = c[sigma.lattice.neighbor_table[v]]
    P = A.padded
    return float((P[color, nb] - P[old, nb]).sum())


def magnetization(sigma: Configuration) -> np.ndarray:
    """Per-colour vertex counts ``n_1..n_q``."""
    return np.bincount(sigma.colors, minlength=sigma.q + 1)[1:].astype(np.int64)


def counts_from_density(rho, L: int, require_all: bool = False) -> np.ndarray:
    """``n_k = floor(rho_k L^2)`` for k < q, remainder to colour q.

    A relative slack of 1e-9 absorbs float error so that e.g. 3969 / 21
    floors to 189 and not 188.
    """
    rho = rho if isinstance(rho, DensityVector) else DensityVector(rho)
    if L < 3:
        raise ValueError("side length must be >= 3")
    N = L * L
    n = np.empty(len(rho), dtype=np.int64)
    for k, r in enumerate(rho[:-1]):
        x = r * N
        n[k] = math.floor(x + COUNT_EPS * max(1.0, x))
    n[-1] = N - n[:-1].sum()
    if n[-1] < 0:
        raise ValueError("densities overflow the lattice")
    if require_all and np.any(n == 0):
        missing = [k + 1 for k in np.flatnonzero(n == 0)]
        raise ValueError(f"colours {missing} receive zero vertices at L={L}")
    return n


def bichromatic_edges(sigma: Configuration) -> int:
    e = sigma.lattice.edges
    c = sigma.colors
    return int(np.count_nonzero(c[e[:, 0]] != c[e[:, 1]]))


def rowfill(lattice: TorusLattice, counts) -> Configuration:
    """Colour vertices in index order (rows bottom to top, left to right): n_1 of colour 1, then n_2 of colour 2, ..."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.sum() != lattice.n_vertices or np.any(counts < 0):
        raise ValueError("counts must be nonnegative and sum to L^2")
    colors = np.repeat(np.arange(1, counts.size + 1, dtype=np.int64), counts)
    return Configuration(lattice, colors, int(counts.size))
