import numpy as np
import pytest

from dumbbell.oracle import (
    Profile1D,
    scaling_fit,
    step_profile,
    sturm_liouville_neumann,
)


def flat_profile(n):
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    return Profile1D(p=one, q=one, resolution=n)


def test_flat_interval_spectrum():
    res = sturm_liouville_neumann(flat_profile(512), 3, refine=False)
    assert res.values[0] == pytest.approx(0.0, abs=1e-8)
    assert abs(res.values[1] - np.pi**2) / np.pi**2 < 1e-3
    assert abs(res.values[2] - 4 * np.pi**2) / (4 * np.pi**2) < 1e-3


def test_step_profile_at_eps_one_is_flat():
    prof = step_profile(1.0, 0.125, 3, resolution=256)
    ref = flat_profile(256)
    a = sturm_liouville_neumann(prof, 3, refine=False)
    b = sturm_liouville_neumann(ref, 3, refine=False)
    assert np.allclose(a.values, b.values, rtol=1e-12, atol=1e-12)


def test_second_order_convergence():
    errs = []
    for n in (128, 256):
        res = sturm_liouville_neumann(flat_profile(n), 2, refine=False)
        errs.append(res.values[1] - np.pi**2)
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_richardson_refinement_improves():
    res = sturm_liouville_neumann(flat_profile(128), 2, refine=True)
    raw = abs(res.values[1] - np.pi**2)
    refined = abs(res.refined[1] - np.pi**2)
    assert refined < raw / 50


def test_resolution_floor():
    with pytest.raises(ValueError, match="64"):
        sturm_liouville_neumann(flat_profile(32), 2)


def test_nonpositive_profile_rejected():
    bad = Profile1D(p=lambda t: np.asarray(t) - 0.5, q=lambda t: np.ones_like(np.asarray(t)), resolution=128)
    with pytest.raises(ValueError, match="non-positive"):
        sturm_liouville_neumann(bad, 2)


def test_step_profile_small_eps_reference():
    # the dumbbell mode: lambda1 ~ gap^2 sqrt(eps) / (2 eta); at eps=1e-3,
    # eta=0.125 the measured reference is ~0.49, far below the flat pi^2
    prof = step_profile(1e-3, 0.125, 3, resolution=1024)
    res = sturm_liouville_neumann(prof, 2, refine=False)
    assert 0.3 < res.values[1] < 0.7


def test_outer_interval_mode_with_conformal_weight():
    # the second rho-dependent mode lives in the bulk slabs, whose metric is
    # kappa * g0, so the 1d value is pi^2 / (0.375^2 kappa)
    from dumbbell.metric import kappa

    eta = 0.125
    prof = step_profile(1e-3, eta, 3, resolution=2048)
    res = sturm_liouville_neumann(prof, 3, refine=False)
    kap = kappa(1e-3, 2 * eta, 1 - 2 * eta, 3)
    predicted = np.pi**2 / (0.5 - eta) ** 2 / kap
    assert abs(res.values[2] - predicted) / predicted < 0.02


def test_scaling_fit_exact_line():
    eps = np.array([1e-1, 1e-2, 1e-3])
    fit = scaling_fit(eps, eps)
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.max_residual < 1e-12


def test_scaling_fit_synthetic_power_law():
    eps = np.array([1e-1, 3e-2, 1e-2, 1e-3])
    fit = scaling_fit(eps, 7.0 * eps**0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(7.0), abs=1e-12)


def test_scaling_fit_validation():
    with pytest.raises(ValueError):
        scaling_fit([1e-1, 1e-2], [1.0, 2.0])
    with pytest.raises(ValueError):
        scaling_fit([1e-1, 1e-2, -1e-3], [1.0, 2.0, 3.0])


def test_oracle_sweep_slope_near_half():
    eps_list = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    lams = []
    for eps in eps_list:
        prof = step_profile(eps, 0.125, 3, resolution=512)
        lams.append(sturm_liouville_neumann(prof, 2, refine=False).values[1])
    fit = scaling_fit(eps_list, lams)
    assert 0.4 <= fit.slope <= 0.6


def test_warped_profile_volume_kappa():
    # warped cross-section shifts the collar volume, hence kappa
    prof = step_profile(0.5, 0.2, 3, warp=lambda r: 1.0 + r, resolution=256)
    res = sturm_liouville_neumann(prof, 2, refine=False)
    assert res.values[1] > 0
