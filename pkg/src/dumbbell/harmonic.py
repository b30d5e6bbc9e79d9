"""Plateau constants, collar harmonic extensions, and their affine model.

As the conformal factor vanishes on the collar, the first eigenfunction
locks to constants c+ > 0 > c- on the two bulk regions (fixed by a zero-mean
and unit-norm system) and to the harmonic extension h of those constants
inside the collar.  For thin collars h is close to the affine profile
hbar(rho) = (c+ + c-)/2 + (c+ - c-) rho / (2 eta); the remainder w = h - hbar
solves a Poisson problem that this module also solves spectrally, as a sine
series in the stretched collar coordinate with a fixed-point iteration on
the lower-order terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .assembly import assemble, restrict_dirichlet
from .mesh import Mesh
from .metric import REGION_COLLAR, REGION_MINUS, REGION_PLUS, CollarGeometry


@dataclass(frozen=True)
class PlateauConstants:
    """Limiting bulk values of the first eigenfunction.

    They satisfy  c+^2 vol+ + c-^2 vol- = kappa0^{-d/2}  (unit norm) and
    c+ vol+ + c- vol- = 0  (zero mean), with the sign convention c+ > 0.
    """

    c_plus: float
    c_minus: float
    kappa0: float

    @property
    def gap(self) -> float:
        return self.c_plus - self.c_minus


def compute_plateaus(vol_plus: float, vol_minus: float, kappa0: float, d: int) -> PlateauConstants:
    """Closed-form solution of the zero-mean, unit-norm plateau system."""
    if vol_plus <= 0 or vol_minus <= 0:
        raise ValueError("region volumes must be positive")
    c_plus = kappa0 ** (-d / 4.0) * math.sqrt(vol_minus / (vol_plus * (vol_plus + vol_minus)))
    c_minus = -c_plus * vol_plus / vol_minus
    return PlateauConstants(c_plus=c_plus, c_minus=c_minus, kappa0=kappa0)


def hbar(rho, eta: float, consts: PlateauConstants):
    """Affine collar model; takes the plateau values at rho = +/- eta."""
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    mid = 0.5 * (consts.c_plus + consts.c_minus)
    slope = 0.5 * (consts.c_plus - consts.c_minus) / eta
    return mid + slope * np.asarray(rho)


def hbar_root(eta: float, consts: PlateauConstants) -> float:
    """Zero of the affine model, the predicted nodal-set offset."""
    return -eta * (consts.c_plus + consts.c_minus) / (consts.c_plus - consts.c_minus)


@dataclass
class HarmonicSolution:
    """Discrete harmonic extension of the plateau values over the collar."""

    vertex_ids: np.ndarray      # global vertices of the collar (with boundary)
    values: np.ndarray          # h at those vertices
    model: np.ndarray           # hbar at those vertices
    boundary_plus: np.ndarray   # global vertices held at c+
    boundary_minus: np.ndarray
    sup_deviation: float        # max |h - hbar|
    l2_deviation: float         # mass-weighted norm of h - hbar

    def scatter(self, n_vertices: int, fill: float = np.nan) -> np.ndarray:
        out = np.full(n_vertices, fill)
        out[self.vertex_ids] = self.values
        return out


def collar_boundary_vertices(mesh: Mesh, geom: CollarGeometry):
    """Vertices of the collar shared with each bulk region (topological)."""
    collar_verts = np.unique(mesh.cells[geom.region == REGION_COLLAR])
    plus_verts = np.unique(mesh.cells[geom.region == REGION_PLUS])
    minus_verts = np.unique(mesh.cells[geom.region == REGION_MINUS])
    b_plus = np.intersect1d(collar_verts, plus_verts, assume_unique=True)
    b_minus = np.intersect1d(collar_verts, minus_verts, assume_unique=True)
    return b_plus, b_minus


def solve_harmonic(mesh: Mesh, geom: CollarGeometry, consts: PlateauConstants) -> HarmonicSolution:
    """Dirichlet solve of the reference-metric Laplacian on the collar.

    Boundary data is c+ on the interface to the plus region and c- on the
    minus one; outer box faces inside the collar stay natural.
    """
    pair = assemble(mesh, field=None, cell_mask=geom.region == REGION_COLLAR)
    b_plus, b_minus = collar_boundary_vertices(mesh, geom)
    boundary = np.concatenate([b_plus, b_minus])
    values = np.concatenate(
        [np.full(b_plus.size, consts.c_plus), np.full(b_minus.size, consts.c_minus)]
    )
    system = restrict_dirichlet(pair, boundary, values)
    h = system.solve()
    model = hbar(geom.rho[pair.dof_map], geom.eta, consts)
    diff = h - model
    l2 = float(np.sqrt(max(diff @ (pair.M @ diff), 0.0)))
    return HarmonicSolution(
        vertex_ids=pair.dof_map,
        values=h,
        model=model,
        boundary_plus=b_plus,
        boundary_minus=b_minus,
        sup_deviation=float(np.abs(diff).max()),
        l2_deviation=l2,
    )


def _adaptive_simpson(f: Callable, a: float, b: float, tol: float, depth: int = 24) -> float:
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2.0, depth - 1
        )

    return recurse(a, b, fa, fm, fb, whole, tol, depth)


def warped_harmonic_1d(
    w_profile: Callable[[float], float],
    eta: float,
    consts: PlateauConstants,
    d: int,
    quad_points: int = 64,
    tol: float = 1e-12,
):
    """Closed-form collar harmonic on a warped product, as a callable of rho.

    Separation of variables reduces the collar problem to
    (w^{d-1} h')' = 0, so h' is proportional to w^{1-d} and
    h(rho) = c- + (c+ - c-) * int_{-eta}^{rho} w^{1-d} / int_{-eta}^{eta} w^{1-d}.
    Integrals use adaptive Simpson quadrature; endpoint values are exact.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")

    def integrand(t):
        w = w_profile(t)
        if w <= 0:
            raise ValueError(f"non-positive warp sample at rho={t}")
        return w ** (1.0 - d)

    nodes = np.linspace(-eta, eta, max(2, quad_points) + 1)
    pieces = np.array(
        [
            _adaptive_simpson(integrand, float(nodes[i]), float(nodes[i + 1]), tol / len(nodes))
            for i in range(len(nodes) - 1)
        ]
    )
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    total = cumulative[-1]

    def h(rho):
        rho_arr = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.empty_like(rho_arr)
        for i, r in enumerate(rho_arr):
            if r <= -eta:
                out[i] = consts.c_minus
            elif r >= eta:
                out[i] = consts.c_plus
            else:
                k = int(np.searchsorted(nodes, r) - 1)
                k = min(max(k, 0), len(nodes) - 2)
                partial = cumulative[k] + _adaptive_simpson(
                    integrand, float(nodes[k]), float(r), tol
                )
                out[i] = consts.c_minus + (consts.c_plus - consts.c_minus) * partial / total
        return out if np.ndim(rho) else float(out[0])

    return h


class CollarIterationError(RuntimeError):
    """Fixed-point iteration diverged; carries the observed growth ratio."""

    def __init__(self, ratio: float):
        super().__init__(
            f"collar iteration diverged (growth ratio {ratio:.3f}); "
            "the contraction needs a thinner collar"
        )
        self.ratio = ratio


class CrossSectionBasis:
    """Neumann (cosine) basis of a flat box cross-section on midpoint grids.

    ``metric_scale`` is the constant factor of the cross metric at the
    hypersurface, so the surface Laplacian eigenvalues are the flat ones
    divided by its square.  The zero-dimensional instance represents fields
    with no cross-section dependence.
    """

    def __init__(self, shape: Sequence[int] = (), lengths: Optional[Sequence[float]] = None, metric_scale: float = 1.0):
        self.shape = tuple(int(k) for k in shape)
        self.lengths = tuple(float(x) for x in (lengths or (1.0,) * len(self.shape)))
        if len(self.lengths) != len(self.shape):
            raise ValueError("lengths and shape disagree")
        self.metric_scale = float(metric_scale)
        self._cos = []
        self._sin = []
        self._freq = []
        for k, length in zip(self.shape, self.lengths):
            y = (np.arange(k) + 0.5) * (length / k)
            modes = np.arange(k)
            freq = modes * np.pi / length
            self._freq.append(freq)
            self._cos.append(np.cos(np.outer(y, freq)))     # (k pts, k modes)
            self._sin.append(np.sin(np.outer(y, freq)))
        # surface Laplacian eigenvalues nu >= 0 (so Delta_Sigma = -nu)
        if self.shape:
            grids = np.meshgrid(*[f**2 for f in self._freq], indexing="ij")
            self.eigenvalues = sum(grids) / self.metric_scale**2
            self.flat_eigenvalues = sum(grids)
        else:
            self.eigenvalues = np.zeros(())
            self.flat_eigenvalues = np.zeros(())

    @classmethod
    def point(cls) -> "CrossSectionBasis":
        return cls(())

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def _apply(self, mats, field, forward: bool) -> np.ndarray:
        out = np.asarray(field, dtype=float)
        for axis, mat in enumerate(mats, start=1):
            k = mat.shape[0]
            op = (2.0 / k) * mat.T if forward else mat
            out = np.moveaxis(np.tensordot(op, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
            if forward:
                idx = [slice(None)] * out.ndim
                idx[axis] = 0
                out[tuple(idx)] *= 0.5  # mean mode normalization
        return out

    def analyze(self, field: np.ndarray) -> np.ndarray:
        """Grid samples (sigma-major) to cosine coefficients per sigma row."""
        return self._apply(self._cos, field, forward=True)

    def synthesize(self, coef: np.ndarray) -> np.ndarray:
        return self._apply(self._cos, coef, forward=False)

    def d1_synthesize(self, coef: np.ndarray, axis: int) -> np.ndarray:
        """Grid values of the first flat derivative along one cross axis."""
        out = np.asarray(coef, dtype=float).copy()
        for ax in range(self.ndim):
            mat = self._sin[ax] if ax == axis else self._cos[ax]
            if ax == axis:
                shape = [1] * out.ndim
                shape[ax + 1] = -1
                out = out * (-self._freq[ax]).reshape(shape)
            out = np.moveaxis(np.tensordot(mat, np.moveaxis(out, ax + 1, 0), axes=(1, 0)), 0, ax + 1)
        return out


@dataclass
class FourierCollarSolution:
    """Sine-series solution of the collar remainder problem."""

    coefficients: np.ndarray      # (n_sigma, *cross shape) sine coefficients
    eta: float
    basis: CrossSectionBasis
    sigma_grid: np.ndarray
    grid_values: np.ndarray       # w on the collocation grid
    iterations: int
    final_change: float
    contraction_ratio: Optional[float]

    def evaluate_sigma(self, sigma) -> np.ndarray:
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        modes = np.arange(1, self.coefficients.shape[0] + 1)
        sin_mat = np.sin(np.outer(sigma, modes))
        return np.tensordot(sin_mat, self.coefficients, axes=(1, 0))

    def evaluate_rho(self, rho) -> np.ndarray:
        sigma = (np.asarray(rho, dtype=float) + self.eta) * np.pi / (2.0 * self.eta)
        return self.evaluate_sigma(sigma)


def _h2_norm(coef: np.ndarray, modes_sq: np.ndarray, nu: np.ndarray) -> float:
    weight = modes_sq[(...,) + (None,) * nu.ndim] ** 2 + nu[None, ...] ** 2
    return float(np.sqrt(np.add.reduce((weight * coef**2).reshape(-1))))


def collar_fourier_solve(
    basis: CrossSectionBasis,
    eta: float,
    forcing,
    g1=None,
    g2=None,
    g3=None,
    n_sigma: int = 64,
    tol: float = 1e-10,
    max_iterations: int = 200,
    grid_factor: int = 2,
) -> FourierCollarSolution:
    """Solve the stretched-collar problem for w = h - hbar by sine series.

    In sigma = (rho + eta) pi / (2 eta) the Laplacian splits into
    (pi/2 eta)^2 d^2/dsigma^2 + Delta_Sigma minus lower-order terms
    L = (G1/eta) d/dsigma + eta G2 Dy^2 + eta G3 . Dy.  Each fixed-point
    sweep inverts the leading positive operator mode by mode,
    w_n = -(pi^2 n^2 / 4 eta^2 - Delta_Sigma)^{-1} (F_n / eta + (L w)_n),
    with Dirichlet values w(0) = w(pi) = 0 built into the basis.  The sweep
    contracts only for thin collars; growth is reported, not hidden.

    ``g2`` multiplies the flat cross Laplacian; ``g3`` is a tuple of fields,
    one per cross axis.  Fields may be scalars or arrays broadcastable to
    (grid, *cross shape).
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    n_grid = max(grid_factor * n_sigma, 8)
    j = np.arange(1, n_grid + 1)
    sigma = j * np.pi / (n_grid + 1)
    modes = np.arange(1, n_sigma + 1)
    sin_mat = np.sin(np.outer(sigma, modes))            # (grid, modes)
    dcos_mat = np.cos(np.outer(sigma, modes)) * modes   # d/dsigma of sin basis

    cross_shape = basis.shape
    full = (n_grid,) + cross_shape

    def prep(field):
        if field is None:
            return None
        arr = np.asarray(field, dtype=float)
        if arr.ndim == 0 and arr == 0.0:
            return None
        return np.broadcast_to(arr, full)

    F = prep(forcing)
    G1 = prep(g1)
    G2 = prep(g2)
    G3 = tuple(prep(g) for g in g3) if g3 is not None else ()
    if any(g is not None for g in G3) and basis.ndim == 0:
        raise ValueError("g3 given but the cross-section has no axes")

    def analyze_full(field):
        coef = basis.analyze(field) if basis.ndim else field
        return (2.0 / (n_grid + 1)) * np.tensordot(sin_mat.T, coef, axes=(1, 0))

    def synthesize_full(coef):
        vals = np.tensordot(sin_mat, coef, axes=(1, 0))
        return basis.synthesize(vals) if basis.ndim else vals

    nu = basis.eigenvalues
    modes_sq = modes.astype(float) ** 2
    denom = (np.pi**2 / (4.0 * eta**2)) * modes_sq[(...,) + (None,) * nu.ndim] + nu[None, ...]

    F_modes = analyze_full(F) if F is not None else np.zeros((n_sigma,) + cross_shape)
    coef = -(F_modes / eta) / denom

    prev_change = None
    ratio = None
    growth_streak = 0
    iterations = 0
    change = 0.0
    for iterations in range(1, max_iterations + 1):
        residual = None
        if G1 is not None:
            dsw = basis.synthesize(np.tensordot(dcos_mat, coef, axes=(1, 0))) if basis.ndim else np.tensordot(dcos_mat, coef, axes=(1, 0))
            residual = (G1 / eta) * dsw
        if G2 is not None:
            lap = -basis.flat_eigenvalues[None, ...] * coef
            lap_grid = synthesize_full(lap)
            term = eta * G2 * lap_grid
            residual = term if residual is None else residual + term
        for axis, g in enumerate(G3):
            if g is None:
                continue
            sin_vals = np.tensordot(sin_mat, coef, axes=(1, 0))
            dyw = basis.d1_synthesize(sin_vals, axis)
            term = eta * g * dyw
            residual = term if residual is None else residual + term

        if residual is None:
            new_coef = coef
        else:
            R_modes = analyze_full(residual)
            new_coef = -(F_modes / eta + R_modes) / denom

        change = _h2_norm(new_coef - coef, modes_sq, np.atleast_1d(nu) if nu.ndim else nu)
        scale = max(1.0, _h2_norm(new_coef, modes_sq, nu))
        if prev_change is not None and prev_change > 0:
            ratio = change / prev_change
            growth_streak = growth_streak + 1 if ratio > 1.0 else 0
            if growth_streak >= 2:
                raise CollarIterationError(ratio)
        coef = new_coef
        if change <= tol * scale:
            break
        prev_change = change
    else:
        raise CollarIterationError(ratio if ratio is not None else float("nan"))

    return FourierCollarSolution(
        coefficients=coef,
        eta=eta,
        basis=basis,
        sigma_grid=sigma,
        grid_values=synthesize_full(coef),
        iterations=iterations,
        final_change=change,
        contraction_ratio=ratio,
    )
