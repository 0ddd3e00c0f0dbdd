"""Shared fixtures and independent reference implementations (oracles) for the test-suite.

The oracles work directly on (x, y) coordinates with plain Python sets and
never call into the code they check.
"""

import itertools
from collections import deque

import numpy as np
import pytest

from gpm.lattice import TorusLattice
from gpm.model import Configuration

OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))


def nbrs_xy(L, x, y, Lx=None, Ly=None):
    Lx = Lx or L
    Ly = Ly or L
    return [((x + dx) % Lx, (y + dy) % Ly) for dx, dy in OFFSETS]


def oracle_neighbors(L, v):
    x, y = v % L, v // L
    return {a + L * b for a, b in nbrs_xy(L, x, y)}


def oracle_components(L, verts):
    """Breadth-first components of a vertex-index set."""
    left = set(int(v) for v in verts)
    out = []
    while left:
        s = min(left)
        comp, queue = {s}, deque([s])
        left.discard(s)
        while queue:
            u = queue.popleft()
            for w in oracle_neighbors(L, u):
                if w in left:
                    left.discard(w)
                    comp.add(w)
                    queue.append(w)
        out.append(comp)
    out.sort(key=min)
    return out


def oracle_winds(L, verts):
    """Contractibility via the doubled torus.

    A connected set whose cycles all have trivial class lifts to four disjoint
    copies on the 2L x 2L torus. Any non-trivial cycle class realised by a
    simple cycle is primitive, hence non-zero mod 2, and merges copies.
    """
    lifted = set()
    for v in verts:
        x, y = v % L, v // L
        for a in (0, 1):
            for b in (0, 1):
                lifted.add((x + a * L, y + b * L))
    seen, n = set(), 0
    for p in sorted(lifted):
        if p in seen:
            continue
        n += 1
        queue = deque([p])
        seen.add(p)
        while queue:
            cx, cy = queue.popleft()
            for w in nbrs_xy(L, cx, cy, 2 * L, 2 * L):
                if w in lifted and w not in seen:
                    seen.add(w)
                    queue.append(w)
    return n < 4


def oracle_distance(L, a, b):
    a, b = set(a), set(b)
    if not a or not b:
        return float("inf")
    dist = {v: 0 for v in a}
    queue = deque(a)
    while queue:
        u = queue.popleft()
        if u in b:
            return dist[u]
        for w in oracle_neighbors(L, u):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return float("inf")


def oracle_edges(L):
    """Unordered adjacent pairs by scanning all neighbour lists."""
    return {frozenset((u, w)) for u in range(L * L) for w in oracle_neighbors(L, u)}


def oracle_energy(L, colors, A):
    """Full Hamiltonian; A is a 0-based numpy matrix, colours 1-based."""
    return sum(A[colors[u] - 1, colors[w] - 1] for u, w in (tuple(e) for e in oracle_edges(L)))


def all_configs(L, q):
    lat = TorusLattice(L)
    for bits in itertools.product(range(1, q + 1), repeat=L * L):
        yield Configuration(lat, np.array(bits, dtype=np.int64), q)


def random_config(rng, L, q, style=None):
    """Random configuration: i.i.d. colours, or a patchy/noisy one for low-energy-like structure."""
    lat = TorusLattice(L)
    style = style if style is not None else rng.integers(0, 3)
    if style == 0:
        c = rng.integers(1, q + 1, L * L)
    else:
        c = np.full(L * L, int(rng.integers(1, q + 1)), dtype=np.int64)
        xy = lat.xy
        for _ in range(int(rng.integers(1, 5))):
            x0, y0 = rng.integers(0, L, 2)
            w, h = rng.integers(1, L + 1, 2)
            m = ((xy[:, 0] - x0) % L < w) & ((xy[:, 1] - y0) % L < h)
            c[m] = rng.integers(1, q + 1)
        p = rng.uniform(0, 0.2) if style == 1 else 0.0
        noise = rng.random(L * L) < p
        c[noise] = rng.integers(1, q + 1, int(noise.sum()))
    return Configuration(lat, c.astype(np.int64), q)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
