"""delta-bridge systems (B, S): bridging vertices plus a subset of a configuration's contours.

Construction: B starts as the bottom row (y = 0) and S as every contour
within distance 1 of it. The system is then grown to a fixpoint. Each round
first repairs closure (a contour of sigma lying in a complement component
and non-contractible there), then purity (a labelled component with more
than delta of its vertices off-label). A repair picks one column, adds its
intersection C with the offending component to B, and adds to S every
contour inside that component within distance 1 of C.

Tie-breaks: offending component = lowest minimal vertex; closure repair
column = lowest x met by the lowest-keyed offending contour; purity repair
column = lowest x whose intersection with the component is over-impure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .contours import (
    ComponentLabeling,
    Contour,
    ContourSet,
    component_labels,
    contour_dump,
    extract_contours,
)
from .lattice import TorusLattice, as_mask, dilate, holes, is_connected
from .model import Configuration, CostMatrix

TOL = 1e-9


class BridgeConstructionError(AssertionError):
    """A constructed bridge system failed its own verification."""


class Violation(NamedTuple):
    prop: int
    detail: str


@dataclass
class BridgeSystem:
    lattice: TorusLattice
    B: np.ndarray
    S: ContourSet
    delta: float
    labeling: ComponentLabeling
    iterations: int = 0

    def support_mask(self) -> np.ndarray:
        return self.S.support_mask()

    def dump(self, sigma: Configuration, A: CostMatrix | None = None) -> dict:
        comps = []
        for comp, lab in zip(self.labeling.components, self.labeling.labels):
            wrong = int(np.count_nonzero(sigma.colors[comp] != lab)) if lab is not None else None
            comps.append({
                "vertices": [int(v) for v in comp],
                "label": lab,
                "impurity": None if wrong is None else wrong / comp.size,
            })
        return {
            "bridges": [int(v) for v in self.B],
            "contours": contour_dump(self.S, A),
            "delta": self.delta,
            "components": comps,
        }


class _Holes:
    """Lazily computed hole sets of contractible contours."""

    def __init__(self, lat: TorusLattice):
        self.lat = lat
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, g: Contour) -> np.ndarray:
        h = self._cache.get(g.key)
        if h is None:
            h = holes(self.lat, g.support)
            self._cache[g.key] = h
        return h


def noncontractible_in(g: Contour, region_mask: np.ndarray, hole_of) -> bool:
    """Whether the contour (assumed inside the region) has a loop not contractible in the region.

    True when it winds around the torus, or when it encloses a vertex outside
    the region.
    """
    if not g.contractible:
        return True
    h = hole_of(g)
    return bool(h.size) and not bool(region_mask[h].all())


def _fallback_label(sigma: Configuration, B: np.ndarray) -> int | None:
    if B.size == 0:
        return None
    counts = np.bincount(sigma.colors[B], minlength=sigma.q + 1)
    return int(np.argmax(counts))


def _component_index(lat: TorusLattice, labeling: ComponentLabeling) -> np.ndarray:
    comp_of = np.full(lat.n_vertices, -1, dtype=np.int64)
    for k, comp in enumerate(labeling.components):
        comp_of[comp] = k
    return comp_of


def build_bridge_system(sigma: Configuration, delta: float, contours: ContourSet | None = None,
                        verify: bool = True) -> BridgeSystem:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    lat = sigma.lattice
    L = lat.L
    allc = contours if contours is not None else extract_contours(sigma)
    hole_of = _Holes(lat)

    B = np.zeros(lat.n_vertices, dtype=bool)
    B[lat.row(0)] = True
    near = dilate(lat, B, 1)
    in_S = np.array([bool(near[g.support].any()) for g in allc], dtype=bool)
    first = np.array([g.key for g in allc], dtype=np.int64)
    xs = lat.xy[:, 0]

    def absorb(comp: np.ndarray, comp_k: int, comp_of: np.ndarray, x: int) -> int:
        C = comp[xs[comp] == x]
        B[C] = True
        reach = dilate(lat, C, 1)
        added = 0
        for i, g in enumerate(allc):
            if not in_S[i] and comp_of[first[i]] == comp_k and reach[g.support].any():
                in_S[i] = True
                added += 1
        return added

    iterations = 0
    max_iter = lat.n_vertices + 1
    while True:
        smask = np.zeros(lat.n_vertices, dtype=bool)
        for i in np.flatnonzero(in_S):
            smask[allc.contours[i].support] = True
        labeling = component_labels(lat, smask, sigma, fallback=_fallback_label(sigma, np.flatnonzero(B)))
        comp_of = _component_index(lat, labeling)
        if iterations >= max_iter:
            raise BridgeConstructionError("bridge construction did not reach a fixpoint")

        action = None
        # closure repairs
        for k, comp in enumerate(labeling.components):
            region = np.zeros(lat.n_vertices, dtype=bool)
            region[comp] = True
            for i, g in enumerate(allc):
                if in_S[i] or comp_of[first[i]] != k:
                    continue
                if noncontractible_in(g, region, hole_of):
                    action = (comp, k, int(xs[g.support].min()))
                    break
            if action is None and labeling.labels[k] is None:
                raise BridgeConstructionError(f"component {k} is ill-labelled with no offending contour")
            if action is not None:
                break
        # purity repairs
        if action is None:
            for k, comp in enumerate(labeling.components):
                lab = labeling.labels[k]
                wrong = sigma.colors[comp] != lab
                if wrong.sum() <= delta * comp.size:
                    continue
                cx = xs[comp]
                for x in range(L):
                    sel = cx == x
                    nC = int(sel.sum())
                    if nC and wrong[sel].sum() > delta * nC:
                        action = (comp, k, x)
                        break
                if action is None:
                    raise BridgeConstructionError(f"no over-impure column in impure component {k}")
                break
        if action is None:
            break
        iterations += 1
        if absorb(action[0], action[1], comp_of, action[2]) == 0:
            raise BridgeConstructionError("bridging step added no contour")

    S = ContourSet(lat, [g for i, g in enumerate(allc) if in_S[i]], allc.source_hash)
    bs = BridgeSystem(lat, np.flatnonzero(B).astype(np.int64), S, float(delta), labeling, iterations)
    if verify:
        bad = verify_bridge_system(sigma, bs, contours=allc)
        if bad:
            raise BridgeConstructionError("; ".join(f"property {v.prop}: {v.detail}" for v in bad))
    return bs


def verify_bridge_system(sigma: Configuration, bs: BridgeSystem, contours: ContourSet | None = None) -> list[Violation]:
    """Recheck the four bridge-system properties from scratch; empty list means valid."""
    lat = sigma.lattice
    out: list[Violation] = []
    B = np.asarray(bs.B, dtype=np.int64)
    smask = bs.S.support_mask()
    s_size = int(smask.sum())

    union = smask.copy()
    union[B] = True
    if union.any() and not is_connected(lat, union):
        out.append(Violation(1, "B union S-bar is not connected"))

    if B.size > s_size / (2.0 * bs.delta) + lat.L + TOL:
        out.append(Violation(2, f"|B|={B.size} exceeds |S|/(2 delta) + L = {s_size / (2 * bs.delta) + lat.L:.3f}"))

    labeling = component_labels(lat, smask, sigma, fallback=_fallback_label(sigma, B))
    comp_of = _component_index(lat, labeling)
    allc = contours if contours is not None else extract_contours(sigma)
    hole_of = _Holes(lat)
    for k in labeling.flagged():
        out.append(Violation(3, f"component {k} has no well-defined label"))
    for g in allc:
        if smask[g.support].any():
            continue
        ks = np.unique(comp_of[g.support])
        if ks.size != 1 or ks[0] < 0:
            continue
        region = np.zeros(lat.n_vertices, dtype=bool)
        region[labeling.components[int(ks[0])]] = True
        if noncontractible_in(g, region, hole_of):
            out.append(Violation(3, f"contour at vertex {g.key} is non-contractible in component {int(ks[0])}"))

    for k, (comp, lab) in enumerate(zip(labeling.components, labeling.labels)):
        if lab is None:
            continue
        wrong = int(np.count_nonzero(sigma.colors[comp] != lab))
        if wrong > bs.delta * comp.size + TOL:
            out.append(Violation(4, f"component {k} (label {lab}) has {wrong}/{comp.size} off-label vertices"))
    return out


def hand_built(sigma: Configuration, B, S: ContourSet, delta: float) -> BridgeSystem:
    """Wrap an arbitrary (B, S) pair for verification."""
    lat = sigma.lattice
    B = np.flatnonzero(as_mask(lat, B)).astype(np.int64) if np.size(B) else np.zeros(0, dtype=np.int64)
    labeling = component_labels(lat, S.support_mask(), sigma, fallback=_fallback_label(sigma, B))
    return BridgeSystem(lat, B, S, float(delta), labeling, 0)
