"""Contours of a configuration: supports, assignments, costs and labels."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .lattice import TorusLattice, as_mask, connected_components, holes, is_noncontractible
from .model import Configuration, CostMatrix


@dataclass(frozen=True, eq=False)
class Contour:
    """Connected support with a colour per support vertex (``colors[i]`` belongs to ``support[i]``)."""

    support: np.ndarray
    colors: np.ndarray
    contractible: bool

    def __len__(self):
        return int(self.support.size)

    def __eq__(self, other):
        return (
            isinstance(other, Contour)
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.colors, other.colors)
        )

    def __hash__(self):
        return hash(self.support.tobytes())

    @property
    def key(self) -> int:
        """Smallest support vertex; identifies the contour within one configuration."""
        return int(self.support[0])


@dataclass
class ContourSet:
    lattice: TorusLattice
    contours: list = field(default_factory=list)
    source_hash: str | None = None

    def __len__(self):
        return len(self.contours)

    def __iter__(self):
        return iter(self.contours)

    def support_mask(self) -> np.ndarray:
        m = np.zeros(self.lattice.n_vertices, dtype=bool)
        for g in self.contours:
            m[g.support] = True
        return m

    def support_size(self) -> int:
        return int(sum(len(g) for g in self.contours))


@dataclass
class ComponentLabeling:
    """Components of the complement of a vertex set with their labels.

    ``labels[k]`` is None when component k is ill-labelled (its adjacent
    support vertices disagree, or it has none and is not monochromatic).
    """

    components: list
    labels: list
    adjacent_colors: list

    @property
    def consistent(self) -> bool:
        return all(lab is not None for lab in self.labels)

    def flagged(self) -> list[int]:
        return [k for k, lab in enumerate(self.labels) if lab is None]


def config_hash(sigma: Configuration) -> str:
    h = hashlib.sha256()
    h.update(f"{sigma.L} {sigma.q}\n".encode())
    h.update(sigma.colors.astype("<i8").tobytes())
    return h.hexdigest()


def boundary_mask(sigma: Configuration) -> np.ndarray:
    c = sigma.colors
    return (c[sigma.lattice.neighbor_table] != c[:, None]).any(axis=1)


def boundary_vertices(sigma: Configuration) -> np.ndarray:
    """Vertices incident to at least one bichromatic edge."""
    return np.flatnonzero(boundary_mask(sigma)).astype(np.int64)


def extract_contours(sigma: Configuration) -> ContourSet:
    lat = sigma.lattice
    out = []
    for comp in connected_components(lat, boundary_mask(sigma)):
        out.append(Contour(comp, sigma.colors[comp].copy(), not is_noncontractible(lat, comp)))
    return ContourSet(lat, out, config_hash(sigma))


def _single_cost(lat: TorusLattice, g: Contour, P: np.ndarray) -> float:
    col = np.zeros(lat.n_vertices, dtype=np.int64)
    col[g.support] = g.colors
    e = lat.edges
    inside = (col[e[:, 0]] > 0) & (col[e[:, 1]] > 0)
    return float(P[col[e[inside, 0]], col[e[inside, 1]]].sum())


def contour_cost(contours, A: CostMatrix) -> float:
    """Sum of A over edges of each contour's induced subgraph, using the contour's own colours."""
    if isinstance(contours, Contour):
        raise TypeError("pass a ContourSet; use contour_costs for single contours")
    if len(contours) == 0:
        return 0.0
    return float(sum(contour_costs(contours, A)))


def contour_costs(contours: ContourSet, A: CostMatrix) -> list[float]:
    P = A.padded
    return [_single_cost(contours.lattice, g, P) for g in contours]


def check_compatibility(contours: ContourSet) -> bool:
    """True iff every pair of supports is at lattice distance >= 2."""
    lat = contours.lattice
    owner = np.full(lat.n_vertices, -1, dtype=np.int64)
    nbr = lat.neighbor_table
    for k, g in enumerate(contours):
        if np.any(owner[g.support] >= 0):
            return False
        owner[g.support] = k
    for k, g in enumerate(contours):
        near = owner[nbr[g.support].reshape(-1)]
        if np.any((near >= 0) & (near != k)):
            return False
    return True


def component_labels(lat: TorusLattice, support, sigma: Configuration, fallback: int | None = None) -> ComponentLabeling:
    """Label each component of ``V \\ support`` by the colour of its adjacent support vertices.

    A component with no adjacent support vertex (only possible when the
    support is empty) is labelled by its colour if monochromatic, otherwise by
    ``fallback`` (None flags it).
    """
    smask = as_mask(lat, support)
    nbr = lat.neighbor_table
    comps = connected_components(lat, ~smask)
    labels, adjacent = [], []
    for comp in comps:
        near = nbr[comp].reshape(-1)
        near = np.unique(near[smask[near]])
        cols = np.unique(sigma.colors[near])
        adjacent.append(cols)
        if cols.size == 1:
            labels.append(int(cols[0]))
        elif cols.size == 0:
            own = np.unique(sigma.colors[comp])
            labels.append(int(own[0]) if own.size == 1 else fallback)
        else:
            labels.append(None)
    return ComponentLabeling(comps, labels, adjacent)


def contour_type(lat: TorusLattice, g: Contour) -> int | None:
    """Label of the exterior of a contractible contour; None when undefined."""
    if not g.contractible:
        return None
    smask = as_mask(lat, g.support)
    inner = as_mask(lat, holes(lat, g.support))
    ext = ~(smask | inner)
    if not ext.any():
        return None
    col = np.zeros(lat.n_vertices, dtype=np.int64)
    col[g.support] = g.colors
    touching = smask & ext[lat.neighbor_table].any(axis=1)
    cols = np.unique(col[touching])
    return int(cols[0]) if cols.size == 1 else None


def reconstruct(contours: ContourSet, labeling: ComponentLabeling) -> np.ndarray:
    """Colour array obtained by painting supports with their assignments and components with their labels."""
    out = np.zeros(contours.lattice.n_vertices, dtype=np.int64)
    for comp, lab in zip(labeling.components, labeling.labels):
        if lab is None:
            raise ValueError("cannot reconstruct from an ill-labelled component")
        out[comp] = lab
    for g in contours:
        out[g.support] = g.colors
    return out


def contour_dump(contours: ContourSet, A: CostMatrix | None = None) -> list[dict]:
    costs = contour_costs(contours, A) if A is not None else [None] * len(contours)
    return [
        {
            "support": [int(v) for v in g.support],
            "colors": [int(c) for c in g.colors],
            "contractible": bool(g.contractible),
            "cost": cost,
        }
        for g, cost in zip(contours, costs)
    ]


def contours_from_dump(lat: TorusLattice, items: list[dict]) -> ContourSet:
    out = []
    for it in items:
        sup = np.asarray(it["support"], dtype=np.int64)
        order = np.argsort(sup)
        out.append(Contour(sup[order], np.asarray(it["colors"], dtype=np.int64)[order], bool(it["contractible"])))
    return ContourSet(lat, out)


def subset(contours: ContourSet, keep) -> ContourSet:
    return ContourSet(contours.lattice, [g for g in contours if keep(g)], contours.source_hash)

