import numpy as np
import pytest

from dumbbell import assembly, eigen, metric, oracle
from dumbbell.eigen import normalize_and_sign, rayleigh_quotient, solve_smallest
from dumbbell.eigen import test_function_bound as ramp_bound
from dumbbell.metric import build_conformal_field, collar_geometry


def test_flat_box_triple_multiplicity(box16):
    pair = assembly.assemble(box16)
    res = solve_smallest(pair, 4, tol=1e-9, shift_estimate=10.0)
    assert res.values[0] == pytest.approx(0.0, abs=1e-9)
    for lam in res.values[1:4]:
        assert abs(lam - np.pi**2) / np.pi**2 < 0.02
    spread = res.values[3] - res.values[1]
    assert spread / np.pi**2 < 5e-3  # a genuine near-triple cluster


def test_constant_mode_and_residuals(dumbbell16):
    res = dumbbell16["result"]
    assert 0.0 <= res.values[0] <= 1e-9
    u0 = res.vectors[:, 0]
    assert np.abs(u0 - u0.mean()).max() < 1e-9 * abs(u0.mean())
    assert np.all(res.residuals <= 1e-9)


def test_m_orthonormality(dumbbell16):
    res, pair = dumbbell16["result"], dumbbell16["pair"]
    gram = res.vectors.T @ (pair.M @ res.vectors)
    assert np.abs(gram - np.eye(gram.shape[0])).max() <= 1e-8


def test_simplicity_at_small_epsilon(dumbbell16):
    # l2/l1 >= 10 holds at eps = 1e-3 (at 1e-2 the measured ratio is ~5.6,
    # below the gate; the acceptance configuration pins 1e-3)
    res = dumbbell16["result"]
    assert res.values[2] / res.values[1] >= 10.0


def test_oracle_agrees_with_fem_lambda1(dumbbell16):
    geom = dumbbell16["geom"]
    prof = oracle.step_profile(1e-3, geom.eta, 3, resolution=1024)
    ev = oracle.sturm_liouville_neumann(prof, 2, refine=False)
    lam = dumbbell16["result"].values[1]
    assert abs(lam - ev.values[1]) / ev.values[1] < 0.02


def test_solver_needs_two_modes(dumbbell16):
    with pytest.raises(ValueError, match="modes"):
        solve_smallest(dumbbell16["pair"], 1)


def test_normalize_idempotent_and_sign(dumbbell16):
    res, pair, geom = dumbbell16["result"], dumbbell16["pair"], dumbbell16["geom"]
    again = normalize_and_sign(res, pair, geom)
    assert np.allclose(again.vectors, res.vectors)
    flipped = eigen.EigenResult(res.values.copy(), -res.vectors, res.residuals.copy())
    fixed = normalize_and_sign(flipped, pair, geom)
    assert np.allclose(fixed.vectors[:, 1], res.vectors[:, 1])


def test_plateau_signs_after_fixing(dumbbell16):
    geom = dumbbell16["geom"]
    u1 = dumbbell16["result"].vectors[:, 1]
    assert u1[geom.rho >= 2 * geom.eta].mean() > 0
    assert u1[geom.rho <= -2 * geom.eta].mean() < 0


def test_rayleigh_quotient_of_eigenvector(dumbbell16):
    res, pair = dumbbell16["result"], dumbbell16["pair"]
    q = rayleigh_quotient(pair, res.vectors[:, 1])
    assert q == pytest.approx(res.values[1], rel=1e-8)


def test_rayleigh_quotient_constant_and_errors(dumbbell16):
    pair = dumbbell16["pair"]
    assert abs(rayleigh_quotient(pair, np.ones(pair.n_dof))) < 1e-10
    with pytest.raises(ValueError, match="mass"):
        rayleigh_quotient(pair, np.zeros(pair.n_dof))


def test_bound_dominates_lambda1_everywhere(scene16):
    m, geom = scene16
    for eps in (1.0, 0.1, 1e-2, 1e-3):
        fld = build_conformal_field(geom, eps, 3)
        pair = assembly.assemble(m, fld)
        bound = ramp_bound(geom, fld, pair, 3)
        res = solve_smallest(pair, 2, tol=1e-9, shift_estimate=bound)
        assert res.values[1] <= bound


def test_bound_finite_at_eps_one(scene16):
    m, geom = scene16
    fld = build_conformal_field(geom, 1.0, 3)
    pair = assembly.assemble(m, fld)
    bound = ramp_bound(geom, fld, pair, 3)
    assert np.isfinite(bound)
    assert bound >= np.pi**2 * 0.9  # any mean-zero field bounds lambda1 from above


def test_ramp_mean_vanishes(dumbbell16):
    geom, fld, pair = dumbbell16["geom"], dumbbell16["field"], dumbbell16["pair"]
    u, _ = eigen.collar_ramp_vector(geom, fld, 3)
    ones = np.ones(pair.n_dof)
    assert abs(u @ (pair.M @ ones)) <= 1e-10


def test_bound_scaling_band(scene16):
    # bound / sqrt(eps) varies by far less than the factor-4 budget
    m, geom = scene16
    ratios = []
    for eps in (1e-2, 1e-3):
        fld = build_conformal_field(geom, eps, 3)
        pair = assembly.assemble(m, fld)
        ratios.append(ramp_bound(geom, fld, pair, 3) / np.sqrt(eps))
    assert max(ratios) / min(ratios) < 4.0


def test_bound_refuses_unaligned_eta(box16):
    rho = metric.signed_distance(box16, metric.PlaneSigma(0.5))
    geom = collar_geometry(box16, rho, 0.1, snap=False)  # 0.1 not on the 1/16 grid
    assert not geom.grid_aligned
    fld = build_conformal_field(geom, 0.1, 3)
    pair = assembly.assemble(box16, fld)
    with pytest.raises(ValueError, match="grid aligned"):
        ramp_bound(geom, fld, pair, 3)


def test_conformal_scaling_invariance(scene8):
    m, geom = scene8
    fld = build_conformal_field(geom, 0.1, 3)
    pair = assembly.assemble(m, fld)
    pair4 = assembly.assemble(m, fld.scaled(4.0))
    res = solve_smallest(pair, 2, tol=1e-10, shift_estimate=3.0)
    res4 = solve_smallest(pair4, 2, tol=1e-10, shift_estimate=1.0)
    assert res4.values[1] == pytest.approx(res.values[1] / 4.0, rel=1e-8)
    u, u4 = res.vectors[:, 1], res4.vectors[:, 1]
    cos = abs(u @ u4) / (np.linalg.norm(u) * np.linalg.norm(u4))
    assert cos == pytest.approx(1.0, abs=1e-8)


def test_point_reflection_oddness(dumbbell16):
    # the Freudenthal grid is symmetric under x -> 1 - x, which swaps the
    # two bulk regions; the first nontrivial mode is odd under it
    m, geom = dumbbell16["mesh"], dumbbell16["geom"]
    u1 = dumbbell16["result"].vectors[:, 1]
    n = m.grid_resolution[0]
    shape = (n + 1,) * 3
    perm = np.ravel_multi_index(
        tuple(n - idx for idx in np.unravel_index(np.arange(m.num_vertices), shape)), shape
    )
    assert np.array_equal(np.sort(perm), np.arange(m.num_vertices))
    assert np.abs(u1[perm] + u1).max() < 1e-6


def test_severe_mass_ill_conditioning(scene16):
    # at eps = 1e-4 the mass weights span six orders of magnitude; the
    # factorized pencil must still deliver clean small eigenvalues
    m, geom = scene16
    fld = build_conformal_field(geom, 1e-4, 3)
    pair = assembly.assemble(m, fld)
    bound = ramp_bound(geom, fld, pair, 3)
    res = solve_smallest(pair, 2, tol=1e-9, shift_estimate=bound)
    assert 0 < res.values[1] <= bound
    assert np.all(res.residuals <= 1e-9)
    prof = oracle.step_profile(1e-4, geom.eta, 3, resolution=1024)
    ev = oracle.sturm_liouville_neumann(prof, 2, refine=False)
    assert abs(res.values[1] - ev.values[1]) / ev.values[1] < 0.02


def test_nonconvergence_reports_best_residual(dumbbell16):
    with pytest.raises(eigen.EigenConvergenceError, match="residual"):
        solve_smallest(dumbbell16["pair"], 3, tol=1e-16, max_iterations=2)
