"""Two-dimensional smoke coverage.

All quantitative gates live in three dimensions (the collapse exponent
d/2 - 1 vanishes at d = 2); these tests only exercise that the pipeline
runs end to end on planar scenes.
"""

import numpy as np
import pytest

from dumbbell import assembly, eigen, metric, nodal
from dumbbell.mesh import build_box_grid


@pytest.fixture(scope="module")
def plane_scene():
    m = build_box_grid(2, 12)
    rho = metric.signed_distance(m, metric.PlaneSigma(0.5))
    geom = metric.collar_geometry(m, rho, 1.0 / 6.0)
    return m, geom


def test_2d_dumbbell_pipeline(plane_scene):
    m, geom = plane_scene
    fld = metric.build_conformal_field(geom, 0.05, 2)
    assert metric.verify_volume_preservation(fld, geom, 2) <= 1e-12
    pair = assembly.assemble(m, fld)
    bound = eigen.test_function_bound(geom, fld, pair, 2)
    res = eigen.solve_smallest(pair, 2, tol=1e-9, shift_estimate=bound)
    res = eigen.normalize_and_sign(res, pair, geom)
    assert 0 < res.values[1] <= bound
    u1 = res.vectors[:, 1]
    assert u1[geom.rho >= 2 * geom.eta].mean() > 0


def test_2d_nodal_segments(plane_scene):
    m, geom = plane_scene
    u = m.vertices[:, 0] - 0.5
    ns = nodal.extract_nodal_set(m, u)
    assert ns.n_components == 1
    assert ns.total_area == pytest.approx(1.0, abs=1e-12)  # total length here
    assert all(frag.points.shape == (2, 2) for frag in ns.fragments)
    assert nodal.nodal_domain_count(m, u) == 2
    assert nodal.single_crossing_check(m, u, geom)


def test_2d_circle_level_set():
    m = build_box_grid(2, 24)
    circle = metric.sphere_level((0.5, 0.5), 0.3)
    rho = metric.signed_distance(m, circle)
    exact = np.linalg.norm(m.vertices - 0.5, axis=1) - 0.3
    near = np.abs(exact) < 0.1
    h = 1.0 / 24.0
    assert np.abs(rho - exact)[near].max() < 2.0 * h * h
