"""Kawasaki and Glauber Metropolis chains, run orchestration and exact Gibbs tables.

Proposals: Kawasaki picks one of the 3L^2 edges uniformly and swaps its
endpoint colours; Glauber picks a vertex and a colour (possibly the current
one) uniformly. Both accept with the Metropolis rule, so the chains satisfy
detailed balance w.r.t. ``exp(-beta H + h . n)`` (restricted to fixed
magnetization for Kawasaki, where the field term is constant).

Seeding: replica ``r`` of a run seeded with ``seed`` draws its dynamics from
``SeedSequence(seed, spawn_key=(r, 0))`` and its random initial state (if
any) from ``SeedSequence(seed, spawn_key=(r, 1))``, both through PCG64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import _kernels
from .lattice import TorusLattice
from .model import (
    Configuration,
    CostMatrix,
    counts_from_density,
    hamiltonian,
    magnetization,
    recolor_delta,
    swap_delta,
)

KAWASAKI = "kawasaki"
GLAUBER = "glauber"
MODES = (KAWASAKI, GLAUBER)

DRAW_BLOCK = 1 << 16
RESYNC_STEPS = 1_000_000
EXACT_GUARD = 10_000_000

_EMPTY_I = np.zeros(0, dtype=np.int64)
_EMPTY_C = np.zeros(0, dtype=np.int64)


def seed_sequence(seed: int, replica: int = 0, stream: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(replica), int(stream)))


def make_rng(seed: int, replica: int = 0, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, replica, stream)))


def sweep_length(L: int, mode: str) -> int:
    return 3 * L * L if mode == KAWASAKI else L * L


@dataclass
class ChainParams:
    beta: float
    A: CostMatrix
    L: int
    mode: str = KAWASAKI
    rho: tuple | None = None
    counts: tuple | None = None
    h: tuple | None = None
    steps: int = 0
    thin: int = 1
    seed: int = 0
    replica: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.beta >= 0 or not math.isfinite(self.beta):
            raise ValueError("beta must be a finite number >= 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.counts is None and self.rho is not None:
            self.counts = tuple(int(x) for x in counts_from_density(self.rho, self.L))
        if self.counts is not None:
            if len(self.counts) != self.A.q:
                raise ValueError("counts length must equal q")
            if sum(self.counts) != self.L * self.L or min(self.counts) < 0:
                raise ValueError(f"counts must be nonnegative and sum to L^2 = {self.L * self.L}")
        if self.h is not None:
            if len(self.h) != self.A.q or not all(math.isfinite(x) for x in self.h):
                raise ValueError("h must hold q finite values")
        if self.mode == KAWASAKI and self.counts is None:
            raise ValueError("kawasaki mode needs counts or rho")

    @property
    def sweep(self) -> int:
        return sweep_length(self.L, self.mode)


class ChainState:
    """Mutable chain: configuration, running energy/counts, RNG and draw buffer."""

    def __init__(self, sigma: Configuration, A: CostMatrix, beta: float, mode: str = KAWASAKI,
                 h=None, rng: np.random.Generator | None = None, seed: int = 0):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if sigma.q != A.q:
            raise ValueError("configuration and cost matrix disagree on q")
        self.sigma = sigma.copy()
        self.A = A
        self.beta = float(beta)
        self.mode = mode
        hp = np.zeros(A.q + 1)
        if h is not None:
            hp[1:] = np.asarray(h, dtype=np.float64)
        self.h = hp
        self.rng = rng if rng is not None else make_rng(seed)
        self.step = 0
        self.energy = hamiltonian(self.sigma, A)
        self.best_energy = self.energy
        self._counts = np.zeros(A.q + 1, dtype=np.int64)
        self._counts[1:] = magnetization(self.sigma)
        self._nbr = np.ascontiguousarray(sigma.lattice.neighbor_table)
        self._P = np.ascontiguousarray(A.padded)
        self._pos = DRAW_BLOCK
        self._since_resync = 0
        self._draws = None

    @property
    def counts(self) -> np.ndarray:
        return self._counts[1:].copy()

    @property
    def lattice(self) -> TorusLattice:
        return self.sigma.lattice

    def _refill(self):
        N = self.lattice.n_vertices
        if self.mode == KAWASAKI:
            self._draws = (
                self.rng.integers(0, 3 * N, size=DRAW_BLOCK, dtype=np.int64),
                self.rng.random(DRAW_BLOCK),
            )
        else:
            self._draws = (
                self.rng.integers(0, N, size=DRAW_BLOCK, dtype=np.int64),
                self.rng.integers(1, self.A.q + 1, size=DRAW_BLOCK, dtype=np.int64),
                self.rng.random(DRAW_BLOCK),
            )
        self._pos = 0

    def advance(self, n: int, hist: np.ndarray | None = None, pows: np.ndarray | None = None,
                best: np.ndarray | None = None) -> int:
        """Run ``n`` proposals; returns the number accepted.

        When ``hist`` is given, the code of the configuration after every step
        is tallied into it (see :func:`config_code`). When ``best`` is given
        (kawasaki only) it receives the lowest-energy configuration seen whose
        energy is below ``self.best_energy``.
        """
        track = hist is not None
        if track:
            code = int(config_code(self.sigma.colors, self.A.q))
        else:
            hist, pows, code = _EMPTY_I, _EMPTY_C, 0
        if best is None:
            best = _EMPTY_C
        elif self.mode != KAWASAKI:
            raise ValueError("best-seen tracking is only available for kawasaki")
        accepted = 0
        colors = self.sigma.colors
        while n > 0:
            if self._pos >= DRAW_BLOCK:
                self._refill()
            k = min(n, DRAW_BLOCK - self._pos)
            if not self.A.is_integer:
                k = min(k, RESYNC_STEPS - self._since_resync)
            if self.mode == KAWASAKI:
                ed, un = self._draws
                self.energy, acc, code, self.best_energy = _kernels.kawasaki_run(
                    colors, self._nbr, self._P, self.beta, ed, un, self._pos, k,
                    self.energy, hist, pows, code, best, self.best_energy)
            else:
                vd, cd, un = self._draws
                self.energy, acc, code = _kernels.glauber_run(
                    colors, self._nbr, self._P, self.beta, self.h, vd, cd, un,
                    self._pos, k, self.energy, self._counts, hist, pows, code)
            accepted += acc
            self._pos += k
            self.step += k
            n -= k
            if not self.A.is_integer:
                self._since_resync += k
                if self._since_resync >= RESYNC_STEPS:
                    self.resync()
        return accepted

    def resync(self):
        self.energy = hamiltonian(self.sigma, self.A)
        self._since_resync = 0


def kawasaki_step(state: ChainState) -> bool:
    if state.mode != KAWASAKI:
        raise ValueError("kawasaki_step needs a kawasaki-mode state")
    return state.advance(1) == 1


def glauber_step(state: ChainState) -> bool:
    if state.mode != GLAUBER:
        raise ValueError("glauber_step needs a glauber-mode state")
    return state.advance(1) == 1


def config_code(colors, q: int) -> int:
    """Integer code ``sum_v (c_v - 1) q^v`` of a configuration (vertex 0 least significant)."""
    c = np.asarray(colors, dtype=np.int64) - 1
    code = 0
    for d in c[::-1]:
        code = code * q + int(d)
    return code


def code_powers(q: int, n_vertices: int) -> np.ndarray:
    return np.array([q**v for v in range(n_vertices)], dtype=np.int64)


# ---------------------------------------------------------------------------
# run orchestration


@dataclass
class Sample:
    step: int
    sweep: float
    config: Configuration
    energy: float
    counts: np.ndarray
    boundary_size: int


def boundary_size(sigma: Configuration) -> int:
    c = sigma.colors
    return int(np.count_nonzero((c[sigma.lattice.neighbor_table] != c[:, None]).any(axis=1)))


def initial_configuration(params: ChainParams, init="canonical") -> Configuration:
    from .model import rowfill

    lat = TorusLattice(params.L)
    q = params.A.q
    if isinstance(init, Configuration):
        return init.copy()
    if init == "canonical":
        if params.counts is None:
            return Configuration.uniform(lat, q)
        return rowfill(lat, params.counts)
    if init == "random":
        rng = make_rng(params.seed, params.replica, stream=1)
        if params.mode == KAWASAKI:
            c = rowfill(lat, params.counts).colors
            return Configuration(lat, rng.permutation(c), q)
        return Configuration(lat, rng.integers(1, q + 1, size=lat.n_vertices), q)
    raise ValueError(f"unknown init {init!r}; use 'canonical', 'random' or a Configuration")


def run_chain(params: ChainParams, init="canonical") -> Iterator[Sample]:
    """Yield the initial state, then a snapshot every ``thin`` steps and at the end."""
    sigma = initial_configuration(params, init)
    if sigma.L != params.L or sigma.q != params.A.q:
        raise ValueError("initial configuration does not match L/q of the parameters")
    if params.mode == KAWASAKI and tuple(magnetization(sigma)) != tuple(params.counts):
        raise ValueError(
            f"initial magnetization {tuple(magnetization(sigma))} != counts {tuple(params.counts)}")
    state = ChainState(sigma, params.A, params.beta, params.mode, h=params.h,
                       rng=make_rng(params.seed, params.replica, 0))
    sw = params.sweep

    def snap():
        return Sample(state.step, state.step / sw, state.sigma.copy(), state.energy,
                      state.counts, boundary_size(state.sigma))

    yield snap()
    done = 0
    while done < params.steps:
        k = min(params.thin, params.steps - done)
        state.advance(k)
        done += k
        yield snap()


# ---------------------------------------------------------------------------
# exact enumeration


@dataclass
class GibbsTable:
    """Exact distribution over an enumerated configuration space."""

    L: int
    q: int
    support: np.ndarray  # (M, L*L) 1-based colours
    codes: np.ndarray  # (M,) sorted configuration codes
    probabilities: np.ndarray
    energies: np.ndarray = field(repr=False)

    def __len__(self):
        return self.codes.size

    def index(self, colors) -> int:
        code = config_code(colors, self.q)
        i = int(np.searchsorted(self.codes, code))
        if i >= self.codes.size or self.codes[i] != code:
            raise KeyError("configuration outside the table support")
        return i

    def probability(self, colors) -> float:
        try:
            return float(self.probabilities[self.index(colors)])
        except KeyError:
            return 0.0

    def tv_distance(self, hist: np.ndarray) -> float:
        """Total variation distance to an empirical histogram over all q^(L^2) codes."""
        hist = np.asarray(hist, dtype=np.float64)
        total = hist.sum()
        if total <= 0:
            raise ValueError("empty histogram")
        emp = hist / total
        on = emp[self.codes]
        off_mass = 1.0 - on.sum()
        return 0.5 * (float(np.abs(on - self.probabilities).sum()) + max(float(off_mass), 0.0))


def _all_configurations(q: int, N: int) -> np.ndarray:
    codes = np.arange(q**N, dtype=np.int64)
    out = np.empty((codes.size, N), dtype=np.int8)
    for v in range(N):
        out[:, v] = (codes // (q**v)) % q + 1
    return out


def _batch_energy(configs: np.ndarray, lat: TorusLattice, A: CostMatrix, chunk: int = 1 << 16) -> np.ndarray:
    e = lat.edges
    P = A.padded
    out = np.empty(configs.shape[0])
    for s in range(0, configs.shape[0], chunk):
        c = configs[s:s + chunk].astype(np.int64)
        out[s:s + chunk] = P[c[:, e[:, 0]], c[:, e[:, 1]]].sum(axis=1)
    return out


def exact_gibbs(L: int, A: CostMatrix, beta: float, counts=None, h=None) -> GibbsTable:
    """Enumerate the Gibbs distribution exactly.

    ``counts`` restricts to fixed magnetization; ``h`` adds the field weight
    ``exp(h . n(sigma))``. Refuses when ``q^(L^2)`` exceeds 10^7.
    """
    lat = TorusLattice(L)
    q, N = A.q, lat.n_vertices
    if q**N > EXACT_GUARD:
        raise ValueError(f"state space q^(L^2) = {q}^{N} exceeds the exact-enumeration bound {EXACT_GUARD}")
    if counts is not None and h is not None:
        raise ValueError("pass either counts or h, not both")
    configs = _all_configurations(q, N)
    codes = np.arange(q**N, dtype=np.int64)
    if counts is not None:
        counts = np.asarray(counts, dtype=np.int64)
        if counts.size != q or counts.sum() != N:
            raise ValueError("counts must have q entries summing to L^2")
        keep = np.ones(codes.size, dtype=bool)
        for k in range(1, q + 1):
            keep &= (configs == k).sum(axis=1) == counts[k - 1]
        configs, codes = configs[keep], codes[keep]
    energies = _batch_energy(configs, lat, A)
    logw = -beta * energies
    if h is not None:
        hv = np.asarray(h, dtype=np.float64)
        if hv.size != q:
            raise ValueError("h must have q entries")
        for k in range(1, q + 1):
            logw = logw + hv[k - 1] * (configs == k).sum(axis=1)
    logw -= logw.max()
    w = np.exp(logw)
    return GibbsTable(L, q, configs, codes, w / w.sum(), energies)


def tv_distance(p, r) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(r, dtype=float)).sum())


def empirical_histogram(state: ChainState, steps: int) -> np.ndarray:
    """Run ``steps`` proposals tallying every visited configuration code."""
    q, N = state.A.q, state.lattice.n_vertices
    if q**N > EXACT_GUARD:
        raise ValueError("histogram tracking only supported within the exact-enumeration bound")
    hist = np.zeros(q**N, dtype=np.int64)
    state.advance(steps, hist=hist, pows=code_powers(q, N))
    return hist


# ---------------------------------------------------------------------------
# analytic transition probabilities (tiny-scale verification)


def transition_probability(sigma: Configuration, tau: Configuration, A: CostMatrix, beta: float,
                           mode: str, h=None) -> float:
    """P(sigma -> tau) for a single proposal, for sigma != tau."""
    diff = np.flatnonzero(sigma.colors != tau.colors)
    N = sigma.lattice.n_vertices
    if mode == KAWASAKI:
        if diff.size != 2:
            return 0.0
        u, v = int(diff[0]), int(diff[1])
        if v not in sigma.lattice.neighbor_table[u]:
            return 0.0
        if sigma.colors[u] != tau.colors[v] or sigma.colors[v] != tau.colors[u]:
            return 0.0
        d = swap_delta(sigma, A, u, v)
        return min(1.0, math.exp(-beta * d)) / (3 * N)
    if mode == GLAUBER:
        if diff.size != 1:
            return 0.0
        v = int(diff[0])
        c = int(tau.colors[v])
        d = recolor_delta(sigma, A, v, c)
        hv = np.zeros(A.q) if h is None else np.asarray(h, dtype=float)
        log_acc = -beta * d + hv[c - 1] - hv[sigma.colors[v] - 1]
        return min(1.0, math.exp(log_acc)) / (N * A.q)
    raise ValueError(f"unknown mode {mode!r}")


def single_moves(sigma: Configuration, mode: str) -> Iterator[Configuration]:
    """All configurations differing from sigma by one non-trivial move."""
    c = sigma.colors
    if mode == KAWASAKI:
        for u, v in sigma.lattice.edges:
            if c[u] != c[v]:
                t = c.copy()
                t[u], t[v] = c[v], c[u]
                yield Configuration(sigma.lattice, t, sigma.q)
    else:
        for v in range(c.size):
            for k in range(1, sigma.q + 1):
                if k != c[v]:
                    t = c.copy()
                    t[v] = k
                    yield Configuration(sigma.lattice, t, sigma.q)
