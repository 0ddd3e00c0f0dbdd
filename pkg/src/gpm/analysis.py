"""Sorted-event checking, minimal cost subdivisions, region-size bounds and density adjustment."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bridging import build_bridge_system
from .contours import extract_contours
from .dynamics import EXACT_GUARD, KAWASAKI, ChainState, _all_configurations, _batch_energy, make_rng
from .lattice import TorusLattice
from .model import (
    Configuration,
    CostMatrix,
    DensityVector,
    counts_from_density,
    hamiltonian,
    magnetization,
    rowfill,
)

EXACT, ROWFILL, ANNEAL = "exact", "rowfill", "anneal"
METHODS = (EXACT, ROWFILL, ANNEAL)
BASELINE_KIND = {EXACT: "exact", ROWFILL: "constructive", ANNEAL: "annealed"}

STOCHASTIC_TOL = 1e-6
DENSITY_TOL = 1e-9
MIN_REGION = 9


# --------------------------------------------------------------- subdivisions

@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling: beta = min(beta_max, beta_start * factor**k) during the k-th block."""

    beta_start: float = 0.2
    beta_max: float = 4.0
    factor: float = 1.05
    block_sweeps: int = 10
    sweeps: int = 500

    def betas(self) -> list[float]:
        n_blocks = -(-self.sweeps // self.block_sweeps)
        return [min(self.beta_max, self.beta_start * self.factor**k) for k in range(n_blocks)]


def multinomial(counts) -> int:
    out, left = 1, int(sum(counts))
    for n in counts:
        out *= math.comb(left, int(n))
        left -= int(n)
    return out


def enumerate_fixed_counts(N: int, counts, chunk: int = 1 << 15):
    """Yield (m, N) int64 arrays covering every colouring with the given per-colour counts.

    Order: lexicographic in the chosen vertex subsets, colour 1 first.
    """
    counts = [int(c) for c in counts]
    q = len(counts)

    def rec(free: tuple, k: int):
        if k == q - 1:
            yield {q: free}
            return
        for pick in itertools.combinations(free, counts[k]):
            chosen = set(pick)
            rest = tuple(v for v in free if v not in chosen)
            for tail in rec(rest, k + 1):
                tail[k + 1] = pick
                yield tail

    buf = []
    for assign in rec(tuple(range(N)), 0):
        row = np.empty(N, dtype=np.int64)
        for color, verts in assign.items():
            row[list(verts)] = color
        buf.append(row)
        if len(buf) == chunk:
            yield np.array(buf)
            buf = []
    if buf:
        yield np.array(buf)


def _exact_subdivision(lat: TorusLattice, counts, A: CostMatrix) -> Configuration:
    size = multinomial(counts)
    if size > EXACT_GUARD:
        raise ValueError(f"fixed-count space has {size} states, above the exact bound {EXACT_GUARD}")
    best, best_e = None, math.inf
    for block in enumerate_fixed_counts(lat.n_vertices, counts):
        e = _batch_energy(block, lat, A)
        i = int(np.argmin(e))
        if e[i] < best_e:
            best_e, best = float(e[i]), block[i].copy()
    return Configuration(lat, best, A.q)


def anneal_subdivision(start: Configuration, A: CostMatrix, schedule: AnnealSchedule | None = None,
                       seed: int = 0) -> Configuration:
    """Kawasaki simulated annealing from ``start``; returns the lowest-energy configuration visited."""
    schedule = schedule or AnnealSchedule()
    state = ChainState(start, A, schedule.beta_start, KAWASAKI, rng=make_rng(seed, 0, 2))
    best = start.colors.copy()
    per_sweep = 3 * start.lattice.n_vertices
    remaining = schedule.sweeps
    for beta in schedule.betas():
        state.beta = beta
        k = min(schedule.block_sweeps, remaining)
        state.advance(k * per_sweep, best=best)
        remaining -= k
    return Configuration(start.lattice, best, A.q)


def minimal_cost_subdivision(L: int, rho, A: CostMatrix, method: str = ANNEAL,
                             schedule: AnnealSchedule | None = None, seed: int = 0,
                             counts=None) -> tuple[Configuration, float]:
    """Low-energy configuration with the colour counts implied by ``rho`` (or explicit ``counts``).

    exact: global minimiser by enumeration (first one in enumeration order).
    rowfill: colours laid down in vertex-index order, row by row.
    anneal: best state of a Kawasaki annealing run started from rowfill.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    lat = TorusLattice(L)
    if counts is None:
        counts = counts_from_density(rho, L)
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size != A.q:
        raise ValueError("density/counts length differs from the matrix size")
    if method == EXACT:
        sigma = _exact_subdivision(lat, counts, A)
    else:
        sigma = rowfill(lat, counts)
        if method == ANNEAL:
            sigma = anneal_subdivision(sigma, A, schedule, seed)
    return sigma, hamiltonian(sigma, A)


# --------------------------------------------------------------- sorted check

@dataclass
class SortedReport:
    passed: bool
    partition_sizes: list
    impurities: list
    partition_cost: float
    baseline_cost: float
    baseline_kind: str
    ratio: float
    alpha: float
    delta: float
    conservative: bool = False
    pure: bool = True
    labels: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("labels")
        if math.isinf(d["ratio"]):
            d["ratio"] = None
        return d


def bridged_partition(sigma: Configuration, delta: float, bs=None) -> np.ndarray:
    """Part label per vertex: complement components take their label, support vertices their own colour."""
    bs = bs or build_bridge_system(sigma, delta)
    out = sigma.colors.copy()
    for comp, lab in zip(bs.labeling.components, bs.labeling.labels):
        out[comp] = lab
    return out


def part_impurities(sigma: Configuration, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sizes, off-colour fraction) per part; empty parts have impurity 0."""
    q = sigma.q
    sizes = np.bincount(labels, minlength=q + 1)[1:]
    wrong = np.bincount(labels[sigma.colors != labels], minlength=q + 1)[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        imp = np.where(sizes > 0, wrong / np.maximum(sizes, 1), 0.0)
    return sizes, imp


def check_sorted(sigma: Configuration, A: CostMatrix, rho, alpha: float, delta: float,
                 baseline: str = ANNEAL, baseline_cost: float | None = None,
                 schedule: AnnealSchedule | None = None, seed: int = 0) -> SortedReport:
    """Test the bridging-induced partition against both Sorted(alpha, delta) conditions.

    ``baseline_cost`` may be passed to reuse a precomputed baseline of kind
    ``baseline``. Against the exact baseline a pass is a certificate, since a
    witness partition is exhibited. Rowfill and anneal only bound the true
    minimum from above, which makes the energy condition easier to meet; such
    reports are flagged ``conservative`` so the verdict can be audited.
    """
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if baseline not in METHODS:
        raise ValueError(f"baseline must be one of {METHODS}")
    if sigma.q != A.q:
        raise ValueError("configuration and cost matrix disagree on q")
    counts = counts_from_density(rho, sigma.L)
    if not np.array_equal(magnetization(sigma), counts):
        raise ValueError(f"configuration counts {magnetization(sigma).tolist()} differ from {counts.tolist()}")
    if baseline_cost is None:
        _, baseline_cost = minimal_cost_subdivision(sigma.L, rho, A, baseline, schedule, seed)
    labels = bridged_partition(sigma, delta)
    sizes, imp = part_impurities(sigma, labels)
    pure = bool(np.all(imp <= delta + 1e-12))
    cost = hamiltonian(Configuration(sigma.lattice, labels, sigma.q), A)
    if baseline_cost > 0:
        ratio = cost / baseline_cost
    else:
        ratio = 0.0 if cost == 0 else math.inf
    passed = pure and cost <= alpha * baseline_cost + 1e-9 * max(1.0, baseline_cost)
    return SortedReport(
        passed=bool(passed),
        partition_sizes=[int(s) for s in sizes],
        impurities=[float(x) for x in imp],
        partition_cost=float(cost),
        baseline_cost=float(baseline_cost),
        baseline_kind=BASELINE_KIND[baseline],
        ratio=float(ratio),
        alpha=float(alpha),
        delta=float(delta),
        conservative=baseline != EXACT,
        pure=pure,
        labels=labels,
    )


def brute_force_sorted(sigma: Configuration, A: CostMatrix, alpha: float, delta: float,
                       min_cost: float) -> bool:
    """Whether any partition of the vertices meets both Sorted conditions (exhaustive; tiny lattices)."""
    q, N = sigma.q, sigma.lattice.n_vertices
    if q**N > EXACT_GUARD:
        raise ValueError("too many partitions to enumerate")
    parts = _all_configurations(q, N)
    colors = sigma.colors[None, :]
    ok = np.ones(parts.shape[0], dtype=bool)
    for i in range(1, q + 1):
        in_i = parts == i
        ok &= (in_i & (colors != i)).sum(axis=1) <= delta * in_i.sum(axis=1) + 1e-12
    if not ok.any():
        return False
    e = _batch_energy(parts[ok], sigma.lattice, A)
    return bool(np.any(e <= alpha * min_cost + 1e-9 * max(1.0, min_cost)))


def corollary_bounds(report: SortedReport, rho, L: int) -> bool:
    """Region sizes of a passing report against the rounded density bounds (slack q on both sides)."""
    if not report.passed:
        raise ValueError("region-size bounds apply only to passing reports")
    lo, hi = region_size_bounds(rho, L, report.delta)
    sizes = np.asarray(report.partition_sizes, dtype=np.float64)
    return bool(np.all(sizes >= lo - 1e-9) and np.all(sizes <= hi + 1e-9))


def region_size_bounds(rho, L: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(rho if isinstance(rho, DensityVector) else DensityVector(rho), dtype=np.float64)
    q, N = r.size, L * L
    lo = (r - delta) / (1 - delta) * N - q
    hi = r / (1 - delta) * N + q
    return lo, hi


# --------------------------------------------------------------- densities

@dataclass
class ThetaMatrix:
    """theta[i, j]: fraction of colour i+1 inside regions labelled j+1 (0-based storage)."""

    theta: np.ndarray
    missing: tuple = ()
    mass: np.ndarray | None = None

    @property
    def q(self) -> int:
        return self.theta.shape[0]

    def validate(self):
        t = self.theta
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("theta must be square")
        if not np.all(np.isfinite(t)):
            raise ValueError("theta has missing or non-finite entries")
        if np.any(t < 0):
            raise ValueError("theta has negative entries")
        sums = t.sum(axis=0)
        if np.any(np.abs(sums - 1) > STOCHASTIC_TOL):
            raise ValueError(f"theta columns must sum to 1 (got {sums.tolist()})")
        diag = np.diag(t)
        off = sums - diag
        bad = np.flatnonzero(diag <= off)
        if bad.size:
            raise ValueError(f"theta is not strictly diagonally dominant in column(s) {(bad + 1).tolist()}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + [f"region_{j + 1}" for j in range(self.q)])
        for i in range(self.q):
            w.writerow([f"color_{i + 1}"] + [repr(float(x)) for x in self.theta[i]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ThetaMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        t = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
        missing = tuple(j + 1 for j in range(t.shape[1]) if np.isnan(t[:, j]).any())
        return cls(t, missing)


def estimate_theta(samples, delta: float, min_region: int = MIN_REGION, require_all: bool = True) -> ThetaMatrix:
    """Pool colour fractions inside bridged regions, by region label.

    Regions with fewer than ``min_region`` vertices are skipped. A label never
    observed raises (``require_all``) or yields a NaN column listed in ``missing``.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    q = samples[0].q
    mass = np.zeros((q, q), dtype=np.int64)
    for sigma in samples:
        bs = build_bridge_system(sigma, delta, extract_contours(sigma))
        for comp, lab in zip(bs.labeling.components, bs.labeling.labels):
            if lab is None or comp.size < min_region:
                continue
            mass[:, lab - 1] += np.bincount(sigma.colors[comp], minlength=q + 1)[1:]
    tot = mass.sum(axis=0)
    missing = tuple(int(j + 1) for j in np.flatnonzero(tot == 0))
    if missing and require_all:
        raise ValueError(f"no region labelled with colour(s) {list(missing)} was observed")
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(tot > 0, mass / np.maximum(tot, 1), np.nan)
    return ThetaMatrix(theta, missing, mass)


def adjusted_density(theta, rho) -> DensityVector:
    """Solve theta @ rho_star = rho after checking theta is stochastic and diagonally dominant."""
    th = theta if isinstance(theta, ThetaMatrix) else ThetaMatrix(np.asarray(theta, dtype=np.float64))
    th.validate()
    r = np.asarray(rho, dtype=np.float64)
    if r.size != th.q:
        raise ValueError("rho and theta sizes differ")
    star = np.linalg.solve(th.theta, r)
    if np.any(star <= 0):
        raise ValueError(
            f"adjusted density {star.tolist()} has a non-positive entry: rho lies outside "
            "the convex hull of theta's columns")
    if abs(star.sum() - 1) > DENSITY_TOL:
        raise ValueError(f"adjusted density sums to {star.sum()}, not 1")
    return DensityVector(star / star.sum())
