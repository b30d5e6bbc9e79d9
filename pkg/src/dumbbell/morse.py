"""Discrete critical points of vertex fields and Morse-count bounds.

A vertex is classified by the connectivity of its lower and upper links:
no lower neighbors makes a minimum, no upper neighbors a maximum, a
disconnected lower (upper) link a saddle counted with multiplicity
components - 1.  Exact ties are broken lexicographically by vertex id, the
deterministic stand-in for a generic perturbation, so plateaus cannot occur.
Only vertex value ORDER matters; coordinates are never read, which is why
the combinatorial periodic grids are valid inputs here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .mesh import Mesh

LABEL_EXCLUDED = -1
LABEL_REGULAR = 0
LABEL_MIN = 1
LABEL_MAX = 2
LABEL_SADDLE = 3

_LABEL_NAMES = {
    LABEL_EXCLUDED: "excluded",
    LABEL_REGULAR: "regular",
    LABEL_MIN: "minimum",
    LABEL_MAX: "maximum",
    LABEL_SADDLE: "saddle",
}


@dataclass
class CriticalReport:
    """Per-vertex classification plus index-wise counts over counted vertices.

    In 2d the counts are {0: minima, 1: saddle multiplicity, 2: maxima}; in
    3d the index-1 count comes from lower-link components and the index-2
    count from upper-link components (both reported, neither resolved
    further).  ``counted`` marks vertices whose entire star lies inside the
    requested region and off the domain boundary.
    """

    labels: np.ndarray
    lower_components: np.ndarray
    upper_components: np.ndarray
    counts: Dict[int, int]
    counted: np.ndarray
    dim: int

    @property
    def n_critical(self) -> int:
        return int(np.sum(self.counted & (self.labels != LABEL_REGULAR)))

    def euler_sum(self) -> int:
        """Alternating index sum, equals the Euler characteristic on closed inputs."""
        return int(sum((-1) ** i * c for i, c in self.counts.items()))


def _component_count(nodes, edges) -> int:
    if not nodes:
        return 0
    parent = {v: v for v in nodes}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(v) for v in nodes})


def classify_critical_points(
    mesh: Mesh,
    u: np.ndarray,
    region: Optional[np.ndarray] = None,
) -> CriticalReport:
    """Classify every vertex interior to ``region`` (a cell mask, default all).

    Counts cover vertices whose star is contained in the region; on meshes
    with boundary, vertices on it are excluded as well (their links are
    half-open, so extrema there are artifacts of truncation).
    """
    u = np.asarray(u, dtype=float)
    n = mesh.num_vertices
    if region is None:
        cell_ids = np.arange(mesh.num_cells)
        in_region_cells = np.ones(mesh.num_cells, dtype=bool)
    else:
        in_region_cells = np.asarray(region, dtype=bool)
        cell_ids = np.flatnonzero(in_region_cells)

    neighbor = [set() for _ in range(n)]
    link_edges = [[] for _ in range(n)]
    cells = mesh.cells[cell_ids]
    per = mesh.dim + 1
    for cell in cells:
        for i in range(per):
            v = int(cell[i])
            others = [int(cell[j]) for j in range(per) if j != i]
            neighbor[v].update(others)
            for a in range(len(others)):
                for b in range(a + 1, len(others)):
                    link_edges[v].append((others[a], others[b]))

    # vertices touched by cells outside the region have truncated stars
    star_ok = np.zeros(n, dtype=bool)
    star_ok[np.unique(cells)] = True
    if region is not None:
        outside = np.unique(mesh.cells[~in_region_cells])
        star_ok[outside] = False
    if not mesh.periodic:
        star_ok &= ~mesh.boundary_vertex_mask()

    def lower_than(w, v) -> bool:
        # lexicographic tie rule: equal values ordered by vertex id
        return (u[w], w) < (u[v], v)

    labels = np.full(n, LABEL_EXCLUDED, dtype=np.int8)
    lower_comp = np.zeros(n, dtype=np.int64)
    upper_comp = np.zeros(n, dtype=np.int64)

    for v in range(n):
        if not neighbor[v]:
            continue
        lower = {w for w in neighbor[v] if lower_than(w, v)}
        upper = neighbor[v] - lower
        if star_ok[v]:
            lower_edges = [(a, b) for a, b in link_edges[v] if a in lower and b in lower]
            upper_edges = [(a, b) for a, b in link_edges[v] if a in upper and b in upper]
            cl = _component_count(lower, lower_edges)
            cu = _component_count(upper, upper_edges)
            lower_comp[v] = cl
            upper_comp[v] = cu
            if cl == 0:
                labels[v] = LABEL_MIN
            elif cu == 0:
                labels[v] = LABEL_MAX
            elif cl > 1 or cu > 1:
                labels[v] = LABEL_SADDLE
            else:
                labels[v] = LABEL_REGULAR

    counted = labels != LABEL_EXCLUDED
    counts: Dict[int, int] = {i: 0 for i in range(mesh.dim + 1)}
    counts[0] = int(np.sum(labels == LABEL_MIN))
    counts[mesh.dim] = int(np.sum(labels == LABEL_MAX))
    # saddle multiplicity components - 1 per vertex; regular vertices add zero
    counts[1] = int(np.sum(np.maximum(lower_comp[counted] - 1, 0)))
    if mesh.dim >= 3:
        counts[2] = int(np.sum(np.maximum(upper_comp[counted] - 1, 0)))
    return CriticalReport(
        labels=labels,
        lower_components=lower_comp,
        upper_components=upper_comp,
        counts=counts,
        counted=counted,
        dim=mesh.dim,
    )


def betti_bound_check(report: CriticalReport, betti: Sequence[int]) -> bool:
    """True iff the index-i critical count dominates the i-th Betti number
    for every provided index."""
    return all(report.counts.get(i, 0) >= int(b) for i, b in enumerate(betti))


def cosine_product_field(vertices: np.ndarray, periods: Sequence[int] = (2, 1)) -> np.ndarray:
    """Benchmark field prod_i cos(2 pi periods_i x_i) on the unit torus.

    With periods (2, 1) the analytic census on the unit 2-torus is 4 minima,
    4 maxima and 8 saddles; see `cosine_product_census`.
    """
    vals = np.ones(vertices.shape[0])
    for axis, k in enumerate(periods):
        vals = vals * np.cos(2.0 * np.pi * k * vertices[:, axis])
    return vals


def cosine_product_census(periods: Sequence[int] = (2, 1)) -> Dict[int, int]:
    """Analytic critical counts of the cosine product on the unit 2-torus.

    Enumerates the zero set of the gradient directly: extrema sit where both
    sines vanish (2 k_i choices per axis), saddles where both cosines vanish.
    """
    kx, ky = (int(k) for k in periods)
    extrema = [
        (ix, iy)
        for ix in range(2 * kx)
        for iy in range(2 * ky)
    ]
    minima = sum(1 for ix, iy in extrema if (-1) ** (ix + iy) < 0)
    maxima = len(extrema) - minima
    saddles = (2 * kx) * (2 * ky)
    return {0: minima, 1: saddles, 2: maxima}
