"""P1 stiffness and mass operators for conformally weighted quotients.

A cell with conformal factor f contributes f^{d/2-1} times its metric
stiffness and f^{d/2} times its consistent mass, so for any vertex vector v
the ratio v'Kv / v'Mv is the discrete energy quotient of the weighted
metric.  All element integrals are exact on affine cells (no quadrature
error), which keeps the volume and min-max identities sharp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .mesh import Mesh, simplex_gradient_data
from .metric import REGION_MINUS, REGION_PLUS, CollarGeometry, ConformalField


@dataclass
class OperatorPair:
    """Stiffness and mass over a vertex subset.

    ``dof_map`` lists the global vertex ids behind the matrix rows; it is
    the identity for whole-mesh assembly.
    """

    K: sparse.csr_matrix
    M: sparse.csr_matrix
    dof_map: np.ndarray

    @property
    def n_dof(self) -> int:
        return self.K.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.M.sum())

    def restrict_field(self, vertex_field: np.ndarray) -> np.ndarray:
        """Pull a full-mesh vertex field onto this operator's dofs."""
        return np.asarray(vertex_field)[self.dof_map]


def _local_matrices(mesh: Mesh, cell_ids: np.ndarray):
    grads = simplex_gradient_data(mesh)
    d = mesh.dim
    G = grads.gradients[cell_ids]
    ginv = grads.metric_inv[cell_ids]
    vol = grads.volumes[cell_ids]
    stiff = np.einsum("cka,ckl,clb->cab", G, ginv, G) * vol[:, None, None]
    stiff = 0.5 * (stiff + stiff.swapaxes(1, 2))  # exact symmetry
    mass_ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    mass = vol[:, None, None] * mass_ref[None, :, :]
    return stiff, mass


def assemble(
    mesh: Mesh,
    field: Optional[ConformalField] = None,
    cell_mask: Optional[np.ndarray] = None,
) -> OperatorPair:
    """Assemble K and M, optionally restricted to a cell subset.

    ``field=None`` means the unweighted reference metric (f identically 1).
    Restricted assembly renumbers to the vertices of the selected cells and
    imposes nothing on the new boundary, i.e. natural conditions.
    """
    if mesh.periodic:
        raise ValueError("assembly needs mesh geometry; periodic grids are combinatorial")
    d = mesh.dim
    if cell_mask is None:
        cell_ids = np.arange(mesh.num_cells)
    else:
        cell_ids = np.flatnonzero(cell_mask)
        if cell_ids.size == 0:
            raise ValueError("empty region")

    cells = mesh.cells[cell_ids]
    if cell_mask is None:
        dof_map = np.arange(mesh.num_vertices, dtype=np.int64)
        local_cells = cells
    else:
        dof_map = np.unique(cells)
        local_cells = np.searchsorted(dof_map, cells)

    stiff, mass = _local_matrices(mesh, cell_ids)
    if field is not None:
        f = np.asarray(field.f, dtype=float)[cell_ids]
        if np.any(f <= 0):
            raise ValueError("conformal factor must be positive on all cells")
        stiff = stiff * (f ** (d / 2.0 - 1.0))[:, None, None]
        mass = mass * (f ** (d / 2.0))[:, None, None]

    n = dof_map.size
    per = d + 1
    rows = np.repeat(local_cells, per, axis=1).reshape(-1)
    cols = np.tile(local_cells, (1, per)).reshape(-1)
    K = sparse.coo_matrix((stiff.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    M = sparse.coo_matrix((mass.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return OperatorPair(K=K, M=M, dof_map=dof_map)


def subdomain_neumann(mesh: Mesh, geom: CollarGeometry, side: str) -> OperatorPair:
    """Reference-metric operators on one bulk region with natural conditions.

    The smallest eigenvalue of the pair is zero with constant eigenvector;
    the next one is the region's first nontrivial Neumann eigenvalue.
    """
    label = {"plus": REGION_PLUS, "minus": REGION_MINUS}.get(side)
    if label is None:
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    mask = geom.cells_of(label)
    if not np.any(mask):
        raise ValueError(f"empty region '{side}'")
    return assemble(mesh, field=None, cell_mask=mask)


@dataclass
class DirichletSystem:
    """Reduced SPD system for a Dirichlet solve plus its affine lift."""

    pair: OperatorPair
    interior: np.ndarray        # positions into pair.dof_map
    boundary: np.ndarray        # positions into pair.dof_map
    boundary_values: np.ndarray
    K_reduced: sparse.csc_matrix
    rhs: np.ndarray

    def solve(self) -> np.ndarray:
        """Solve and lift; returns values over all pair dofs."""
        out = np.zeros(self.pair.n_dof)
        out[self.boundary] = self.boundary_values
        if self.interior.size:
            try:
                lu = splu(self.K_reduced)
                x = lu.solve(self.rhs)
            except RuntimeError as exc:
                raise RuntimeError(f"singular reduced system (disconnected interior?): {exc}") from exc
            if not np.all(np.isfinite(x)):
                raise RuntimeError("singular reduced system (disconnected interior?)")
            out[self.interior] = x
        return out


def restrict_dirichlet(
    pair: OperatorPair,
    boundary_vertices: np.ndarray,
    values: np.ndarray,
) -> DirichletSystem:
    """Eliminate the given global vertices at fixed values.

    The solution of the reduced system, lifted by the boundary data, is the
    unique discrete harmonic-type extension: the full stiffness applied to it
    vanishes on interior dofs up to solver tolerance.
    """
    boundary_vertices = np.asarray(boundary_vertices, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if boundary_vertices.size != values.size:
        raise ValueError("boundary vertex and value counts differ")
    if np.unique(boundary_vertices).size != boundary_vertices.size:
        raise ValueError("boundary vertices must be unique")
    pos = np.searchsorted(pair.dof_map, boundary_vertices)
    if np.any(pos >= pair.dof_map.size) or np.any(pair.dof_map[np.minimum(pos, pair.dof_map.size - 1)] != boundary_vertices):
        raise ValueError("boundary vertex not in operator domain")
    mask = np.zeros(pair.n_dof, dtype=bool)
    mask[pos] = True
    interior = np.flatnonzero(~mask)
    if interior.size == 0:
        raise ValueError("boundary covers all vertices; nothing to solve")

    K = pair.K.tocsr()
    K_ii = K[interior][:, interior].tocsc()
    K_ib = K[interior][:, pos]
    rhs = -K_ib @ values
    return DirichletSystem(
        pair=pair,
        interior=interior,
        boundary=pos,
        boundary_values=values,
        K_reduced=K_ii,
        rhs=np.asarray(rhs).reshape(-1),
    )
