"""Temporal mollification: kernel normalization, convex-combination
properties, quadrature accuracy, and the global fixed-point sweeps."""

import numpy as np
import pytest

import cfphase as cf
from cfphase.mollifier import MollifierError, was_truncated

from conftest import composite_simpson, std_params


def _dense_trajectory(f_of_t, n_times=2001, t_end=1.0, grid=None):
    grid = grid or cf.Grid(0.0, 1.0, 8)
    times = np.linspace(0.0, t_end, n_times)
    values = np.tile(np.asarray([f_of_t(t) for t in times], dtype=float)[:, None],
                     (1, grid.n_nodes))
    return cf.Trajectory(grid, times, values)


# ---------------------------------------------------------------------------
# kernel basics
# ---------------------------------------------------------------------------

def test_bump_mass_matches_independent_oracle():
    oracle = composite_simpson(cf.bump_profile, -1.0, 1.0, 1_000_000)
    assert cf.BUMP_MASS == pytest.approx(oracle, abs=1e-12)
    assert cf.BUMP_MASS == pytest.approx(0.443994, abs=1e-6)


@pytest.mark.parametrize("centered", [True, False])
def test_kernel_unit_mass_and_nonnegative(centered):
    kernel = cf.MollifierKernel(0.37, centered=centered)
    lo, hi = kernel.support
    u = np.linspace(lo, hi, 400_001)
    w = kernel.weight(u)
    assert np.all(w >= 0.0)
    mass = np.trapezoid(w, u) if hasattr(np, "trapezoid") else np.trapz(w, u)
    assert abs(mass - 1.0) < 1e-10
    assert hi - lo == pytest.approx(kernel.kappa if not centered else 2 * kernel.kappa)


def test_kernel_rejects_nonpositive_width():
    with pytest.raises(ValueError):
        cf.MollifierKernel(0.0)


def test_kernel_vanishes_outside_support():
    kernel = cf.MollifierKernel(0.2)
    assert kernel.weight(0.25) == 0.0
    assert kernel.weight(-0.25) == 0.0
    causal = cf.MollifierKernel(0.2, centered=False)
    assert causal.weight(-0.01) == 0.0
    assert causal.weight(0.21) == 0.0


# ---------------------------------------------------------------------------
# mollify_time
# ---------------------------------------------------------------------------

def test_mollify_reproduces_constants():
    traj = _dense_trajectory(lambda t: 0.7, n_times=301)
    for centered in (True, False):
        kernel = cf.MollifierKernel(0.2, centered=centered)
        for t in (0.0, 0.05, 0.5, 0.95, 1.0):
            out = cf.mollify_time(traj, kernel, t)
            assert np.max(np.abs(out - 0.7)) < 1e-12


def test_mollify_linear_in_time_interior():
    traj = _dense_trajectory(lambda t: t, n_times=2001)
    kernel = cf.MollifierKernel(0.2, centered=True)
    for t in (0.3, 0.5, 0.62):
        out = cf.mollify_time(traj, kernel, t)
        assert np.max(np.abs(out - t)) < 1e-10


def test_mollify_quadratic_vs_dense_riemann_oracle():
    t_end, kap, t = 1.0, 0.2, 0.5
    traj = _dense_trajectory(lambda s: s * s, n_times=2001, t_end=t_end)
    kernel = cf.MollifierKernel(kap, centered=True)
    out = cf.mollify_time(traj, kernel, t)

    s = np.linspace(t - kap, t + kap, 100_001)
    interp = np.interp(s, traj.times, traj.values[:, 0])
    w = kernel.weight(t - s)
    oracle = np.sum(0.5 * (w[1:] * interp[1:] + w[:-1] * interp[:-1])
                    * np.diff(s))
    assert out[0] == pytest.approx(oracle, abs=1e-8)


def test_mollify_convex_combination_bounds(rng):
    grid = cf.Grid(0.0, 1.0, 16)
    times = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 200)]))
    values = rng.standard_normal((times.size, grid.n_nodes))
    traj = cf.Trajectory(grid, times, values)
    kernel = cf.MollifierKernel(0.15)
    out = cf.mollify_time(traj, kernel, 0.4)
    assert np.all(out <= values.max(axis=0) + 1e-12)
    assert np.all(out >= values.min(axis=0) - 1e-12)


def test_mollify_monotone(rng):
    grid = cf.Grid(0.0, 1.0, 16)
    times = np.linspace(0.0, 1.0, 101)
    v1 = rng.standard_normal((101, grid.n_nodes))
    v2 = v1 + rng.uniform(0.0, 1.0, (101, grid.n_nodes))
    kernel = cf.MollifierKernel(0.2)
    out1 = cf.mollify_time(cf.Trajectory(grid, times, v1), kernel, 0.5)
    out2 = cf.mollify_time(cf.Trajectory(grid, times, v2), kernel, 0.5)
    assert np.all(out1 <= out2 + 1e-14)


def test_mollify_commutes_with_spatial_reflection(rng):
    grid = cf.Grid(0.0, 1.0, 32)
    times = np.linspace(0.0, 1.0, 101)
    values = rng.standard_normal((101, grid.n_nodes))
    kernel = cf.MollifierKernel(0.2)
    out = cf.mollify_time(cf.Trajectory(grid, times, values), kernel, 0.5)
    out_reflected = cf.mollify_time(cf.Trajectory(grid, times, values[:, ::-1]),
                                    kernel, 0.5)
    assert np.max(np.abs(out[::-1] - out_reflected)) < 1e-14


def test_mollify_insufficient_history_names_interval():
    grid = cf.Grid(0.0, 1.0, 8)
    times = np.linspace(0.0, 0.4, 41)
    traj = cf.Trajectory(grid, times, np.zeros((41, grid.n_nodes)))
    kernel = cf.MollifierKernel(0.2)
    with pytest.raises(MollifierError, match="missing"):
        cf.mollify_time(traj, kernel, 0.5, t_end=1.0)


def test_truncation_flag():
    kernel = cf.MollifierKernel(0.2)
    assert was_truncated(kernel, 0.1, 1.0)
    assert was_truncated(kernel, 0.95, 1.0)
    assert not was_truncated(kernel, 0.5, 1.0)


def test_mollify_convergence_to_identity_under_kappa_halving():
    # interior-smooth trajectory; the centered even kernel gives order >= 1
    grid = cf.Grid(0.0, 1.0, 8)
    traj = _dense_trajectory(lambda t: np.sin(2.0 * np.pi * t), n_times=4001,
                             grid=grid)
    eval_times = np.linspace(0.0, 1.0, 257)
    errs = []
    for kap in (0.2, 0.1, 0.05):
        kernel = cf.MollifierKernel(kap)
        sq = []
        for t in eval_times:
            diff = cf.mollify_time(traj, kernel, float(t))[0] - np.sin(2 * np.pi * t)
            sq.append(diff * diff)
        errs.append(np.sqrt(np.sum(0.5 * (np.asarray(sq)[1:] + np.asarray(sq)[:-1])
                                   * np.diff(eval_times))))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.0


# ---------------------------------------------------------------------------
# fixed-point sweeps
# ---------------------------------------------------------------------------

def _small_setup(kappa=0.2):
    params = std_params(kappa=kappa, t_end=0.25)
    grid = cf.Grid(0.0, 1.0, 48)
    s0 = cf.make_initial_profile("smoothed-step", 0.8, grid)
    config = cf.SolverConfig(snapshot_interval=0.25 / 64)
    return params, s0, config


def test_picard_zero_state_is_fixed_point():
    params, _, config = _small_setup()
    grid = cf.Grid(0.0, 1.0, 48)
    traj0, _ = cf.run(cf.ScalarField.zeros(grid), params, config)
    traj1, _, dist = cf.picard_sweep(traj0, params, config)
    assert dist == 0.0
    assert np.allclose(traj1.values, 0.0, atol=0.0)


def test_picard_distances_reported_and_contracting():
    params, s0, config = _small_setup()
    traj, monitors = cf.run(s0, params,
                            cf.SolverConfig(coupling="picard", picard_sweeps=3,
                                            snapshot_interval=0.25 / 64))
    dists = monitors.picard_distances
    print("picard sweep distances:", dists)
    assert len(dists) == 3
    assert all(np.isfinite(d) and d >= 0.0 for d in dists)
    # observed contraction is strong; only the aggregate trend is asserted
    assert dists[-1] < dists[0]


def test_picard_first_sweep_change_scales_with_kappa():
    dists = {}
    for kap in (0.2, 0.1):
        params, s0, config = _small_setup(kappa=kap)
        traj, _ = cf.run(s0, params, config)
        _, _, dists[kap] = cf.picard_sweep(traj, params, config)
    ratio = dists[0.1] / dists[0.2]
    print("one-sweep distance ratio under kappa halving:", ratio)
    assert 0.3 < ratio < 0.7


def test_build_mollified_table_shape():
    params, s0, config = _small_setup()
    traj, _ = cf.run(s0, params, config)
    kernel = cf.MollifierKernel(params.kappa)
    ref_times, table, truncated = cf.build_mollified_table(traj, kernel,
                                                           n_times=65,
                                                           samples=257)
    assert table.shape == (65, traj.grid.n_nodes)
    assert truncated  # kappa = 0.2 window sticks out at both ends
    assert np.all(np.isfinite(table))
