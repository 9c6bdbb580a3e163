"""Convergence diagnostics: weak-form residuals, compactness distances,
manufactured-solution orders, and regularization sweeps."""

import numpy as np
import pytest

import cfphase as cf
from cfphase.convergence import reaction_factor_gap, signed_flux_transform

from conftest import std_params


def _small_run(kappa=0.1, n=64, t_end=0.1, amplitude=0.9):
    grid = cf.Grid(0.0, 1.0, n)
    params = std_params(kappa=kappa, t_end=t_end)
    s0 = cf.make_initial_profile("smoothed-step", amplitude, grid)
    traj, mon = cf.run(s0, params, cf.SolverConfig(snapshot_interval=t_end / 64))
    return grid, params, s0, traj, mon


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

def test_family_size_and_boundary_values():
    grid = cf.Grid(0.0, 1.0, 32)
    family = cf.test_function_family(grid, t_end=1.0)
    assert len(family) == 15
    for phi in family:
        assert phi.value(1.0, grid.x[5]) == 0.0           # vanishes at t_end
        assert phi.value(0.3, grid.a) == 0.0              # spatial boundary
        assert phi.value(0.3, grid.d) == 0.0
        assert phi.value(0.0, grid.x[5]) != 0.0           # pairs with S0


def test_weak_residual_zero_trajectory_exact():
    grid = cf.Grid(0.0, 1.0, 48)
    params = std_params(kappa=0.1, t_end=0.05)
    traj, _ = cf.run(cf.ScalarField.zeros(grid), params,
                     cf.SolverConfig(snapshot_interval=0.05 / 16))
    for kw in (False, True):
        res = cf.weak_residual_family(traj, params, kappa_weighted=kw)
        assert np.all(res == 0.0)


class _LinComb:
    """phi = a*phi1 + b*phi2 via duck typing."""

    def __init__(self, a, phi1, b, phi2):
        self.a, self.phi1, self.b, self.phi2 = a, phi1, b, phi2

    def value(self, t, x):
        return self.a * self.phi1.value(t, x) + self.b * self.phi2.value(t, x)

    def dt(self, t, x):
        return self.a * self.phi1.dt(t, x) + self.b * self.phi2.dt(t, x)

    def dx(self, t, x):
        return self.a * self.phi1.dx(t, x) + self.b * self.phi2.dx(t, x)


def test_weak_residual_linear_in_phi():
    grid, params, s0, traj, _ = _small_run()
    phi1 = cf.TestFunction(1, 1, 0.0, 1.0, params.t_end)
    phi2 = cf.TestFunction(2, 3, 0.0, 1.0, params.t_end)
    a, b = 1.7, -0.4
    combo = _LinComb(a, phi1, b, phi2)
    r_combo = cf.weak_residual(traj, traj.tdot_eps, s0, params, combo,
                               normalize=False)
    r_split = (a * cf.weak_residual(traj, traj.tdot_eps, s0, params, phi1,
                                    normalize=False)
               + b * cf.weak_residual(traj, traj.tdot_eps, s0, params, phi2,
                                      normalize=False))
    assert r_combo == pytest.approx(r_split, abs=1e-12)


def test_weak_residual_mismatched_series_rejected():
    grid, params, s0, traj, _ = _small_run()
    phi = cf.TestFunction(1, 1, 0.0, 1.0, params.t_end)
    with pytest.raises(ValueError, match="time stamps"):
        cf.weak_residual(traj, traj.tdot_eps[:-1], s0, params, phi)


def test_flux_pairing_consistent_with_integration_by_parts():
    # cell-midpoint pairing of the flux against analytic phi_x versus the
    # exact discrete summation-by-parts dual; the gap shrinks like dx^2
    params = std_params(kappa=0.1)
    phi = cf.TestFunction(1, 2, 0.0, 1.0, 1.0)
    gaps = []
    for n in (64, 128):
        grid = cf.Grid(0.0, 1.0, n)
        v = 0.3 * np.sin(2 * np.pi * grid.x) + 0.1 * np.sin(3 * np.pi * grid.x)
        g = np.diff(v) / grid.dx
        flux = 0.5 * np.abs(g) * g
        xmid = 0.5 * (grid.x[1:] + grid.x[:-1])
        cell_form = grid.dx * np.sum(flux * phi.dx(0.0, xmid))
        # summation by parts: sum_cells G*(phi_{i+1}-phi_i) = -sum_nodes D-(G)*phi
        phi_nodes = phi.value(0.0, grid.x)
        dual_form = np.sum(flux * np.diff(phi_nodes))
        gaps.append(abs(cell_form - dual_form))
    assert gaps[1] < gaps[0] / 3.0


# ---------------------------------------------------------------------------
# compactness distances
# ---------------------------------------------------------------------------

def test_compactness_distance_identical_zero():
    _, _, _, traj, _ = _small_run()
    assert cf.compactness_distance(traj, traj) == 0.0


def test_compactness_distance_pseudometric():
    trajs = [
        _small_run(kappa=k)[3] for k in (0.2, 0.1, 0.05)
    ]
    d01 = cf.compactness_distance(trajs[0], trajs[1])
    d10 = cf.compactness_distance(trajs[1], trajs[0])
    d12 = cf.compactness_distance(trajs[1], trajs[2])
    d02 = cf.compactness_distance(trajs[0], trajs[2])
    assert d01 == pytest.approx(d10, abs=1e-12)
    assert d02 <= d01 + d12 + 1e-12


def test_compactness_distance_constant_gradient_closed_form():
    grid = cf.Grid(0.0, 1.0, 32)
    t_end = 0.5
    times = np.array([0.0, t_end])

    def ramp_traj(g):
        row = g * (grid.x - grid.a)
        return cf.Trajectory(grid, times, np.vstack([row, row]))

    ga, gb = 1.3, 0.4
    dist = cf.compactness_distance(ramp_traj(ga), ramp_traj(gb))
    expected = np.sqrt(t_end * 1.0) * abs(
        (2.0 / 3.0) * (ga ** 1.5 - gb ** 1.5))
    assert dist == pytest.approx(expected, rel=1e-10)


def test_compactness_distance_incompatible_grids():
    t1 = _small_run(n=64)[3]
    t2 = _small_run(n=48)[3]
    with pytest.raises(ValueError, match="grids"):
        cf.compactness_distance(t1, t2)


def test_trajectory_l2_distance_zero_and_symmetry():
    t1 = _small_run(kappa=0.2)[3]
    t2 = _small_run(kappa=0.1)[3]
    assert cf.trajectory_l2_distance(t1, t1) == 0.0
    assert cf.trajectory_l2_distance(t1, t2) == pytest.approx(
        cf.trajectory_l2_distance(t2, t1), abs=1e-14)


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

def test_manufactured_run_small_order():
    params = std_params(kappa=0.2, t_end=0.04)
    report = cf.manufactured_run(params, grid_sizes=(50, 100))
    assert len(report.errors) == 2
    assert report.orders[0] >= 0.9
    print("small MMS orders:", report.orders)


def test_manufactured_zero_solution_inert():
    class ZeroSolution:
        def value(self, t, x):
            return np.zeros_like(x)

        dt = dx = dxx = value

        def mean(self, t):
            return 0.0

    params = std_params(kappa=0.2, t_end=0.02)
    report = cf.manufactured_run(params, grid_sizes=(32,), exact=ZeroSolution())
    assert report.errors[0] == 0.0


def test_manufactured_report_deterministic():
    params = std_params(kappa=0.2, t_end=0.02)
    r1 = cf.manufactured_run(params, grid_sizes=(32, 64))
    r2 = cf.manufactured_run(params, grid_sizes=(32, 64))
    assert r1.errors == r2.errors
    assert r1.orders == r2.orders


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sweep_setup():
    grid = cf.Grid(0.0, 1.0, 64)
    params = std_params(kappa=0.2, t_end=0.15)
    s0 = cf.make_initial_profile("smoothed-step", 1.0, grid)
    config = cf.SolverConfig(snapshot_interval=0.15 / 64)
    return grid, params, s0, config


def test_sweep_validation():
    _, params, s0, config = _sweep_setup()
    with pytest.raises(ValueError, match="decreasing"):
        cf.kappa_sweep(s0, params, [0.1, 0.2], config)
    with pytest.raises(ValueError, match="0, 1"):
        cf.kappa_sweep(s0, params, [1.5, 0.2], config)


def test_sweep_single_kappa_degenerates():
    _, params, s0, config = _sweep_setup()
    report = cf.kappa_sweep(s0, params, [0.2], config)
    assert report.all_ok
    assert len(report.entries) == 1
    assert report.compactness_distances == []
    assert report.entries[0].finals is not None


def test_sweep_standard_small():
    _, params, s0, config = _sweep_setup()
    report = cf.kappa_sweep(s0, params, [0.2, 0.1, 0.05], config)
    assert report.all_ok
    assert len(report.compactness_distances) == 2
    assert all(d >= 0.0 for d in report.compactness_distances)
    assert all(d >= 0.0 for d in report.flux_distances)
    for entry in report.entries:
        assert entry.reaction_gap <= entry.reaction_gap_bound
        assert entry.weak_residuals.shape == (15,)
    assert set(report.uniformity) == set(cf.MonitorSeries.UNIFORMITY_KEYS)


def test_sweep_deterministic():
    _, params, s0, config = _sweep_setup()
    r1 = cf.kappa_sweep(s0, params, [0.2, 0.1], config)
    r2 = cf.kappa_sweep(s0, params, [0.2, 0.1], config)
    assert r1.compactness_distances == r2.compactness_distances
    assert r1.flux_distances == r2.flux_distances
    for e1, e2 in zip(r1.entries, r2.entries):
        assert e1.finals == e2.finals
        assert np.array_equal(e1.weak_residuals, e2.weak_residuals)


def test_sweep_isolates_failures():
    _, params, s0, _ = _sweep_setup()
    config = cf.SolverConfig(max_steps=5, snapshot_interval=0.15 / 8)
    report = cf.kappa_sweep(s0, params, [0.2, 0.1], config)
    assert not report.all_ok
    assert all(not e.ok for e in report.entries)
    assert all(e.error for e in report.entries)
    assert report.compactness_distances == []


def test_reaction_gap_pointwise_bound(rng):
    _, params, s0, config = _sweep_setup()
    traj, _ = cf.run(s0, params, config)
    gap, bound = reaction_factor_gap(traj, params.kappa)
    assert 0.0 <= gap <= bound


def test_signed_flux_transform():
    p = np.array([-2.0, 0.0, 3.0])
    assert np.allclose(signed_flux_transform(p), [-2.0, 0.0, 4.5], atol=0.0)
