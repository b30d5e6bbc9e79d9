"""Independent 1d reference spectra for product scenes.

Fields that depend only on the signed distance separate variables exactly,
so the lowest modes of the weighted box problem reduce to a Sturm-Liouville
problem -(p u')' = lambda q u on (0,1) with natural ends, where p and q
carry the conformal weights and the cross-section volume factor.  The same
P1 discretization is used as in 3d (variational treatment of the
discontinuous coefficient), but on a dense uniform grid, which makes this a
genuinely independent check of the mesh pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .metric import kappa as conformal_kappa


@dataclass
class Profile1D:
    """Stiffness/mass weights of the reduced problem on (0,1).

    ``p = f^{d/2-1} A`` and ``q = f^{d/2} A`` with A the cross-section volume
    factor; both must be positive away from jump points.
    """

    p: Callable[[np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], np.ndarray]
    resolution: int


def step_profile(
    epsilon: float,
    eta: float,
    d: int,
    center: float = 0.5,
    warp: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    resolution: int = 512,
    kappa_value: Optional[float] = None,
) -> Profile1D:
    """Reduced profile of the step conformal factor on the unit interval.

    kappa defaults to the volume-preserving value computed from exact
    interval volumes (Simpson quadrature for warped cross-sections), keeping
    this path independent of any mesh.
    """
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0,1], got {epsilon}")
    if not 0 < eta < min(center, 1 - center):
        raise ValueError(f"eta={eta} does not fit inside (0,1) around {center}")

    if warp is None:
        area = lambda t: np.ones_like(np.asarray(t, dtype=float))
    else:
        def area(t):
            w = np.asarray(warp(np.asarray(t) - center), dtype=float)
            if np.any(w <= 0):
                raise ValueError("non-positive warp sample")
            return w ** (d - 1)

    if kappa_value is None:
        from scipy.integrate import simpson

        inner = np.linspace(center - eta, center + eta, 2049)
        vol_collar = float(simpson(area(inner), x=inner))
        left = np.linspace(0.0, center - eta, 2049)
        right = np.linspace(center + eta, 1.0, 2049)
        vol_out = float(simpson(area(left), x=left)) + float(simpson(area(right), x=right))
        kappa_value = conformal_kappa(epsilon, vol_collar, vol_out, d)

    def factor(t):
        t = np.asarray(t, dtype=float)
        return np.where(np.abs(t - center) < eta, epsilon, kappa_value)

    return Profile1D(
        p=lambda t: factor(t) ** (d / 2.0 - 1.0) * area(t),
        q=lambda t: factor(t) ** (d / 2.0) * area(t),
        resolution=resolution,
    )


def _dense_pencil(profile: Profile1D, n: int):
    h = 1.0 / n
    mid = (np.arange(n) + 0.5) * h
    p = np.asarray(profile.p(mid), dtype=float)
    q = np.asarray(profile.q(mid), dtype=float)
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValueError("non-positive profile")
    K = np.zeros((n + 1, n + 1))
    M = np.zeros((n + 1, n + 1))
    idx = np.arange(n)
    np.add.at(K, (idx, idx), p / h)
    np.add.at(K, (idx + 1, idx + 1), p / h)
    np.add.at(K, (idx, idx + 1), -p / h)
    np.add.at(K, (idx + 1, idx), -p / h)
    np.add.at(M, (idx, idx), q * h / 3.0)
    np.add.at(M, (idx + 1, idx + 1), q * h / 3.0)
    np.add.at(M, (idx, idx + 1), q * h / 6.0)
    np.add.at(M, (idx + 1, idx), q * h / 6.0)
    return K, M


@dataclass
class OracleEigenvalues:
    """Lowest modes at resolution N, with the N/2N Richardson refinement."""

    values: np.ndarray
    refined: Optional[np.ndarray]
    resolution: int


def sturm_liouville_neumann(profile: Profile1D, m: int, refine: bool = True) -> OracleEigenvalues:
    """Smallest m eigenvalues with natural ends, dense generalized solve.

    Piecewise-constant coefficients are sampled at cell midpoints, matching
    the per-cell weighting of the 3d assembly.  The Richardson value pairs
    the N and 2N grids to cancel the leading O(N^-2) error.
    """
    n = profile.resolution
    if n < 64:
        raise ValueError(f"resolution must be at least 64, got {n}")
    K, M = _dense_pencil(profile, n)
    vals = scipy.linalg.eigh(K, M, subset_by_index=(0, m - 1), eigvals_only=True)
    refined = None
    if refine:
        K2, M2 = _dense_pencil(profile, 2 * n)
        vals2 = scipy.linalg.eigh(K2, M2, subset_by_index=(0, m - 1), eigvals_only=True)
        refined = (4.0 * vals2 - vals) / 3.0
    return OracleEigenvalues(values=vals, refined=refined, resolution=n)


@dataclass
class PowerFit:
    slope: float
    intercept: float
    max_residual: float


def scaling_fit(epsilons: Sequence[float], lambdas: Sequence[float]) -> PowerFit:
    """Least-squares slope of log(lambda) against log(epsilon)."""
    eps = np.asarray(epsilons, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if eps.size < 3:
        raise ValueError("need at least 3 sweep points")
    if np.any(eps <= 0) or np.any(lam <= 0):
        raise ValueError("scaling fit needs positive data")
    x = np.log(eps)
    y = np.log(lam)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    return PowerFit(
        slope=float(slope),
        intercept=float(intercept),
        max_residual=float(np.abs(residuals).max()),
    )
