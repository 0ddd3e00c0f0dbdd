"""Acceptance criteria 1 to 12, each at its stated tolerance and time budget.

Every test prints one ``criterion N: PASS|FAIL ...`` line (also repeated in
the terminal summary) before asserting.
"""

import time

import numpy as np
import pytest

from gpm.analysis import (
    ThetaMatrix,
    adjusted_density,
    brute_force_sorted,
    check_sorted,
    corollary_bounds,
    enumerate_fixed_counts,
    minimal_cost_subdivision,
)
from gpm.bridging import build_bridge_system, verify_bridge_system
from gpm.cli import PRESETS
from gpm.contours import (
    check_compatibility,
    component_labels,
    contour_cost,
    extract_contours,
    reconstruct,
)
from gpm.dynamics import (
    GLAUBER,
    KAWASAKI,
    ChainParams,
    ChainState,
    empirical_histogram,
    exact_gibbs,
    initial_configuration,
    make_rng,
    single_moves,
    transition_probability,
)
from gpm.lattice import TorusLattice
from gpm.model import (
    Configuration,
    CostMatrix,
    DensityVector,
    bichromatic_edges,
    builtin_fig2_integer,
    builtin_matrix,
    counts_from_density,
    hamiltonian,
    recolor_delta,
    rowfill,
    swap_delta,
)

from conftest import ACCEPTANCE_LINES, all_configs, random_config

POTTS2 = builtin_matrix("potts", 2)
RHO45 = (4 / 9, 5 / 9)


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# ------------------------------------------------------------------ 1 to 3

def test_criterion_01_kawasaki_stationarity():
    t0 = time.perf_counter()
    table = exact_gibbs(3, POTTS2, 0.7, counts=(4, 5))
    st = ChainState(rowfill(TorusLattice(3), [4, 5]), POTTS2, 0.7, KAWASAKI, rng=make_rng(2024, 0, 0))
    tv = table.tv_distance(empirical_histogram(st, 10_000_000))
    dt = time.perf_counter() - t0
    report(1, len(table) == 126 and tv < 0.01 and dt < 60, f"states={len(table)} TV={tv:.5f} (<0.01) time={dt:.1f}s")


def test_criterion_02_glauber_field_stationarity():
    t0 = time.perf_counter()
    h = (0.0, 0.3)
    table = exact_gibbs(3, POTTS2, 0.5, h=h)
    st = ChainState(Configuration.uniform(TorusLattice(3), 2), POTTS2, 0.5, GLAUBER, h=h, rng=make_rng(2024, 0, 0))
    tv = table.tv_distance(empirical_histogram(st, 10_000_000))
    dt = time.perf_counter() - t0
    report(2, len(table) == 512 and tv < 0.01 and dt < 60, f"states={len(table)} TV={tv:.5f} (<0.01) time={dt:.1f}s")


def test_criterion_03_detailed_balance():
    worst, pairs = 0.0, 0
    for mode, h, beta in ((KAWASAKI, None, 0.7), (GLAUBER, (0.0, 0.3), 0.5)):
        table = exact_gibbs(3, POTTS2, beta, h=h)
        for s in all_configs(3, 2):
            ps = table.probability(s.colors)
            for m in single_moves(s, mode):
                fwd = ps * transition_probability(s, m, POTTS2, beta, mode, h)
                bwd = table.probability(m.colors) * transition_probability(m, s, POTTS2, beta, mode, h)
                worst = max(worst, abs(fwd - bwd))
                pairs += 1
    report(3, worst < 1e-12, f"pairs={pairs} max|flux imbalance|={worst:.2e} (<1e-12)")


# ------------------------------------------------------------------ 4

def _delta_matrices():
    out = [("potts4", builtin_matrix("potts", 4), 0.0), ("blume_capel", builtin_matrix("blume_capel"), 0.0)]
    for name in ("fig2a", "fig2b", "fig2c", "fig2d"):
        _, ints = builtin_fig2_integer(name)
        out.append((f"{name}-int", CostMatrix(ints), 0.0))
    out += [("clock6", builtin_matrix("clock", 6), 1e-9), ("fig2d", builtin_matrix("fig2d"), 1e-9)]
    return out


def test_criterion_04_incremental_energy():
    t0 = time.perf_counter()
    r = np.random.default_rng(4)
    L = 6
    lat = TorusLattice(L)
    nbr = lat.neighbor_table
    mats = _delta_matrices()
    per = -(-100_000 // (2 * len(mats)))
    worst_int, worst_rel, total = 0.0, 0.0, 0
    for name, A, rtol in mats:
        s = Configuration(lat, r.integers(1, A.q + 1, L * L), A.q)
        e = hamiltonian(s, A)
        for _ in range(per):
            u = int(r.integers(0, L * L))
            v = int(nbr[u, r.integers(0, 6)])
            d = swap_delta(s, A, u, v)
            s.colors[u], s.colors[v] = s.colors[v], s.colors[u]
            e2 = hamiltonian(s, A)
            c = int(r.integers(1, A.q + 1))
            d2 = recolor_delta(s, A, u, c)
            s.colors[u] = c
            e3 = hamiltonian(s, A)
            for got, full in ((d, e2 - e), (d2, e3 - e2)):
                if rtol == 0:
                    worst_int = max(worst_int, abs(got - full))
                else:
                    worst_rel = max(worst_rel, abs(got - full) / max(1.0, abs(full)))
            e = e3
            total += 2
    dt = time.perf_counter() - t0
    ok = total >= 100_000 and worst_int == 0 and worst_rel <= 1e-9 and dt < 30
    report(4, ok, f"deltas={total} integer max err={worst_int} float max rel err={worst_rel:.1e} time={dt:.1f}s")


# ------------------------------------------------------------------ 5

def _contour_invariant_failures(s, A):
    cs = extract_contours(s)
    hs, hg, size = hamiltonian(s, A), contour_cost(cs, A), cs.support_size()
    bad = []
    if hg > hs + 1e-9:
        bad.append("H(Gamma) > H(sigma)")
    if not (A.a_min / 2 * size - 1e-9 <= hg <= 3 * A.a_max * size + 1e-9):
        bad.append("cost/size sandwich")
    if any(len(g) < 7 for g in cs):
        bad.append("contour smaller than 7")
    if not check_compatibility(cs):
        bad.append("incompatible contours")
    lab = component_labels(s.lattice, cs.support_mask(), s)
    if not lab.consistent or not np.array_equal(reconstruct(cs, lab), s.colors):
        bad.append("reconstruction")
    return bad


def test_criterion_05_contour_invariants():
    t0 = time.perf_counter()
    fails = []
    for s in all_configs(3, 2):
        fails += _contour_invariant_failures(s, POTTS2)
    r = np.random.default_rng(5)
    mats = [builtin_matrix("potts", 4), builtin_matrix("clock", 4)]
    for k in range(10_000):
        fails += _contour_invariant_failures(random_config(r, 12, 4, style=k % 3), mats[k % 2])
    dt = time.perf_counter() - t0
    report(5, not fails and dt < 60, f"512 exhaustive + 10000 random, failures={len(fails)} time={dt:.1f}s")


# ------------------------------------------------------------------ 6

def test_criterion_06_bridge_systems():
    t0 = time.perf_counter()
    fails, built = [], 0
    for delta in (0.1, 0.3):
        for s in all_configs(3, 2):
            cs = extract_contours(s)
            bs = build_bridge_system(s, delta, cs, verify=False)
            fails += verify_bridge_system(s, bs, cs)
            built += 1
    r = np.random.default_rng(6)
    deltas = (0.05, 0.1, 0.3)
    for k in range(10_000):
        s = random_config(r, 12, 4, style=k % 3)
        cs = extract_contours(s)
        delta = deltas[k % 3]
        bs = build_bridge_system(s, delta, cs, verify=False)
        fails += verify_bridge_system(s, bs, cs)
        built += 1
    dt = time.perf_counter() - t0
    report(6, not fails and dt < 120, f"systems={built} property violations={len(fails)} time={dt:.1f}s")


# ------------------------------------------------------------------ 7 and 8 (tiny scale)

def _l3_reports(alpha, delta):
    _, hstar = minimal_cost_subdivision(3, RHO45, POTTS2, "exact")
    for block in enumerate_fixed_counts(9, [4, 5]):
        for c in block:
            s = Configuration(TorusLattice(3), c, 2)
            yield s, hstar, check_sorted(s, POTTS2, RHO45, alpha, delta, "exact", baseline_cost=hstar)


def test_criterion_07_checker_soundness():
    t0 = time.perf_counter()
    n = unsound = passes = 0
    for s, hstar, rep in _l3_reports(2.0, 0.25):
        n += 1
        passes += rep.passed
        if rep.passed and not brute_force_sorted(s, POTTS2, 2.0, 0.25, hstar):
            unsound += 1
    dt = time.perf_counter() - t0
    report(7, n == 126 and unsound == 0 and dt < 120, f"states={n} passes={passes} unsound={unsound} time={dt:.1f}s")


# ------------------------------------------------------------------ 9

def test_criterion_09_minimal_cost_subdivision():
    ex = minimal_cost_subdivision(3, RHO45, POTTS2, "exact")[1]
    an = minimal_cost_subdivision(3, RHO45, POTTS2, "anneal")[1]
    rf = minimal_cost_subdivision(3, RHO45, POTTS2, "rowfill")[1]
    r = np.random.default_rng(9)
    worst = -np.inf
    for _ in range(300):
        q = int(r.integers(1, 10))
        L = int(r.integers(3, 64))
        rho = DensityVector.proportional(r.random(q) + 1e-3)
        s = rowfill(TorusLattice(L), counts_from_density(rho, L))
        worst = max(worst, bichromatic_edges(s) - (8 + 2 * q) * L)
    ok = ex <= an <= rf and worst <= 0
    report(9, ok, f"exact={ex} <= anneal={an} <= rowfill={rf}; rowfill max excess over (8+2q)L={worst} (<=0)")


# ------------------------------------------------------------------ 10

def test_criterion_10_adjusted_density():
    r = np.random.default_rng(10)
    worst, trials = 0.0, 0
    ok = True
    for _ in range(2000):
        q = int(r.integers(2, 10))
        off = r.random((q, q))
        np.fill_diagonal(off, 0)
        off *= (0.1 * r.random(q)) / off.sum(axis=0)  # off-diagonal column mass <= 0.1
        theta = off + np.diag(1 - off.sum(axis=0))
        assert np.abs(theta - np.eye(q)).sum(axis=0).max() <= 0.2 + 1e-12
        w = r.dirichlet(np.ones(q)) * 0.9 + 0.1 / q
        rho = theta @ w
        star = np.asarray(adjusted_density(ThetaMatrix(theta), rho))
        worst = max(worst, float(np.abs(theta @ star - rho).max()))
        ok &= bool(np.all(star > 0)) and abs(star.sum() - 1) <= 1e-9
        trials += 1
    report(10, ok and worst <= 1e-9, f"trials={trials} max|theta rho* - rho|={worst:.1e} (<=1e-9), positive and normalised={ok}")


# ------------------------------------------------------------------ 11 and 8 (desk scale)

FIG1 = PRESETS["fig1"]
FIG1_RHO = DensityVector.proportional(FIG1["rho"])
FIG1_A = builtin_matrix(FIG1["matrix"], FIG1["q"])
REPLICAS = 8
SWEEPS = 20_000
ALPHA, DELTA = 3.0, 0.15


@pytest.fixture(scope="module")
def fig1_runs():
    t0 = time.perf_counter()
    L = FIG1["L"]
    _, base = minimal_cost_subdivision(L, FIG1_RHO, FIG1_A, "anneal")
    out = {}
    for beta in (0.2, 1.0):
        rows = []
        for rep in range(REPLICAS):
            p = ChainParams(beta=beta, A=FIG1_A, L=L, rho=FIG1_RHO, seed=11, replica=rep)
            st = ChainState(initial_configuration(p, "canonical"), FIG1_A, beta, KAWASAKI,
                            rng=make_rng(p.seed, rep, 0))
            st.advance(SWEEPS * p.sweep)
            s = st.sigma
            rows.append((s, extract_contours(s).support_size(),
                         check_sorted(s, FIG1_A, FIG1_RHO, ALPHA, DELTA, "anneal", baseline_cost=base)))
        out[beta] = rows
    return out, base, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_11_qualitative_phase_separation(fig1_runs):
    runs, base, dt = fig1_runs
    size = {b: float(np.mean([r[1] for r in rows])) for b, rows in runs.items()}
    frac = {b: float(np.mean([r[2].passed for r in rows])) for b, rows in runs.items()}
    ratio = {b: float(np.mean([r[2].ratio for r in rows])) for b, rows in runs.items()}
    ok = size[1.0] < size[0.2] and frac[1.0] > frac[0.2] and dt < 1800
    report(11, ok, f"mean|Gamma| b=0.2:{size[0.2]:.0f} b=1.0:{size[1.0]:.0f}; sorted fraction "
                   f"b=0.2:{frac[0.2]:.3f} b=1.0:{frac[1.0]:.3f}; mean ratio {ratio[0.2]:.2f}/{ratio[1.0]:.2f}; "
                   f"anneal baseline={base:.0f}; time={dt:.0f}s")


@pytest.mark.slow
def test_criterion_08_corollary_bounds(fig1_runs):
    tiny = violations = 0
    for alpha, delta in ((2.0, 0.25), (1.5, 0.2), (3.0, 0.1)):
        for _, _, rep in _l3_reports(alpha, delta):
            if rep.passed:
                tiny += 1
                violations += not corollary_bounds(rep, RHO45, 3)
    desk = 0
    for rows in fig1_runs[0].values():
        for _, _, rep in rows:
            if rep.passed:
                desk += 1
                violations += not corollary_bounds(rep, FIG1_RHO, FIG1["L"])
    report(8, violations == 0 and tiny > 0,
           f"passing reports checked: L=3 {tiny}, fig1 desk {desk}; violations={violations}")


# ------------------------------------------------------------------ 12

def test_criterion_12_preset_matrices():
    mats = {n: builtin_matrix(n) for n in ("fig2a", "fig2b", "fig2c", "fig2d")}
    valid = all(m.q == 9 and np.array_equal(m.padded[1:, 1:], m.padded[1:, 1:].T) for m in mats.values())
    a = mats["fig2a"](1, 5)
    d = mats["fig2d"](1, 9)
    ok = valid and a == 8 and abs(d - 10 / 3) < 1e-12
    report(12, ok, f"fig2a-d load and validate={valid}; A_2a(1,5)={a}; A_2d(1,9)={d:.6f} (10/3)")
