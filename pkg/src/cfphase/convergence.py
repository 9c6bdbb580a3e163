"""Regularization sweeps, weak-form residual diagnostics, compactness
distances, and manufactured-solution order verification."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .elasticity import ElasticityOperator
from .estimates import MonitorSeries
from .model import (Grid, ModelParams, ScalarField, Trajectory,
                    flux_primitive, sqrt_gradient_transform, time_integral,
                    trapezoid)
from .solver import SolverConfig, run


# ---------------------------------------------------------------------------
# test functions and the weak-form residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Separable smooth test function (1 - t/t_end)^m * sin(n pi (x-a)/(d-a)).

    Vanishes identically at t = t_end and on the spatial boundary, so it is
    admissible for the weak form; the value at t = 0 pairs with the initial
    data."""

    m: int
    n: int
    a: float
    d: float
    t_end: float

    def _tau(self, t):
        return 1.0 - t / self.t_end

    def _u(self, x):
        return (np.asarray(x, dtype=float) - self.a) / (self.d - self.a)

    def _mode(self, x):
        """sin(n pi u), forced to exactly zero on the spatial boundary."""
        u = self._u(x)
        return np.where((u <= 0.0) | (u >= 1.0), 0.0, np.sin(self.n * np.pi * u))

    def value(self, t, x):
        return self._tau(t) ** self.m * self._mode(x)

    def dt(self, t, x):
        return (-self.m / self.t_end) * self._tau(t) ** (self.m - 1) * self._mode(x)

    def dx(self, t, x):
        k = self.n * np.pi / (self.d - self.a)
        return self._tau(t) ** self.m * k * np.cos(self.n * np.pi * self._u(x))

    def __str__(self):
        return f"phi(m={self.m}, n={self.n})"


def test_function_family(grid: Grid, t_end: float, m_max: int = 3,
                         n_max: int = 5) -> List[TestFunction]:
    """The m_max * n_max family used by the residual diagnostics."""
    return [TestFunction(m, n, grid.a, grid.d, t_end)
            for m in range(1, m_max + 1) for n in range(1, n_max + 1)]


def weak_residual(traj: Trajectory, tdot_series: np.ndarray, s0: ScalarField,
                  params: ModelParams, phi: TestFunction,
                  normalize: bool = True, kappa_weighted: bool = False) -> float:
    """Discrete weak-form residual of a trajectory against one test function.

    R(phi) = (S, phi_t)_Q - (c nu / 2) (|S_x| S_x, phi_x)_Q
             + c ((T:eps_bar - psi'(S)) |S_x|, phi)_Q + (S0, phi(0))_Omega,

    with trapezoid quadrature in time over the snapshot instants, trapezoid
    in space for node pairings, and cell-midpoint pairing for the gradient
    flux.  Exactly zero for the zero trajectory.  Optionally normalized by
    the L1-in-time L2-in-space norm of phi.

    With ``kappa_weighted=True`` the flux |S_x| S_x / 2 and the weight |S_x|
    are replaced by their regularized counterparts (the flux primitive and
    |S_x|_kappa - kappa), i.e. the weak form of the equation actually being
    integrated.  That variant converges to zero under space-time refinement
    at fixed kappa, whereas the plain form saturates at the kappa bias.
    """
    tdot_series = np.asarray(tdot_series, dtype=float)
    if tdot_series.shape != traj.values.shape:
        raise ValueError("stress series and trajectory must share time stamps")
    grid = traj.grid
    dx = grid.dx
    x = grid.x
    xmid = 0.5 * (x[1:] + x[:-1])
    times = traj.times
    c, nu, kap = params.c, params.nu, params.kappa

    spatial = np.empty(times.size)
    phi_norms = np.empty(times.size)
    for i, t in enumerate(times):
        s_row = traj.values[i]
        term_a = trapezoid(s_row * phi.dt(t, x), dx)
        g = np.diff(s_row) / dx
        if kappa_weighted:
            flux = flux_primitive(g, kap)
        else:
            flux = 0.5 * np.abs(g) * g
        term_b = -c * nu * dx * float(np.sum(flux * phi.dx(t, xmid)))
        grad_node = np.zeros_like(s_row)
        grad_node[1:-1] = (s_row[2:] - s_row[:-2]) / (2.0 * dx)
        if kappa_weighted:
            weight = np.hypot(grad_node, kap) - kap
        else:
            weight = np.abs(grad_node)
        reac = (tdot_series[i] - np.asarray(params.potential.psi_prime(s_row), dtype=float))
        term_c = c * trapezoid(reac * weight * phi.value(t, x), dx)
        spatial[i] = term_a + term_b + term_c
        phi_norms[i] = math.sqrt(max(trapezoid(phi.value(t, x) ** 2, dx), 0.0))

    r = time_integral(spatial, times)
    r += trapezoid(s0.values * phi.value(0.0, x), dx)
    if not normalize:
        return r
    denom = time_integral(phi_norms, times)
    return r / denom if denom > 0.0 else r


def weak_residual_family(traj: Trajectory, params: ModelParams,
                         family: Optional[Sequence[TestFunction]] = None,
                         kappa_weighted: bool = False) -> np.ndarray:
    """Normalized residuals over the whole test family, using the stress
    series recorded on the trajectory."""
    if traj.tdot_eps is None:
        raise ValueError("trajectory carries no stress series")
    if family is None:
        family = test_function_family(traj.grid, traj.t_end)
    s0 = traj.initial
    return np.array([weak_residual(traj, traj.tdot_eps, s0, params, phi,
                                   kappa_weighted=kappa_weighted)
                     for phi in family])


# ---------------------------------------------------------------------------
# L2(Q) distances between trajectories
# ---------------------------------------------------------------------------

def _resampled_pair(traj_a: Trajectory, traj_b: Trajectory, n_times: int):
    if traj_a.grid.n != traj_b.grid.n or traj_a.grid.a != traj_b.grid.a \
            or traj_a.grid.d != traj_b.grid.d:
        raise ValueError("trajectories live on incompatible grids")
    t_end = min(traj_a.t_end, traj_b.t_end)
    times = np.linspace(0.0, t_end, n_times)
    rows_a = np.vstack([traj_a.sample(float(t)) for t in times])
    rows_b = np.vstack([traj_b.sample(float(t)) for t in times])
    return times, rows_a, rows_b


def _l2q_of_rows(times: np.ndarray, rows_sq_integrals: np.ndarray) -> float:
    return math.sqrt(max(time_integral(rows_sq_integrals, times), 0.0))


def trajectory_l2_distance(traj_a: Trajectory, traj_b: Trajectory,
                           n_times: int = 513) -> float:
    """L2(Q) distance of two trajectories, resampled onto a common uniform
    time grid by linear interpolation."""
    times, ra, rb = _resampled_pair(traj_a, traj_b, n_times)
    dx = traj_a.grid.dx
    diff = ra - rb
    per_t = np.array([trapezoid(row * row, dx) for row in diff])
    return _l2q_of_rows(times, per_t)


def compactness_distance(traj_a: Trajectory, traj_b: Trajectory,
                         n_times: int = 513,
                         gradient_transform: Callable = None) -> float:
    """L2(Q) distance of the transformed gradients of two trajectories.

    The default transform is the degenerate-diffusion compactness quantity
    (2/3)|p|^(3/2) sign(p); trajectories are resampled to common times by
    linear interpolation and gradients are taken per cell.  Symmetric, zero
    iff the gradients agree on the common grid, and satisfies the triangle
    inequality (it is a pseudometric induced by a norm)."""
    if gradient_transform is None:
        gradient_transform = sqrt_gradient_transform
    times, ra, rb = _resampled_pair(traj_a, traj_b, n_times)
    dx = traj_a.grid.dx
    ga = gradient_transform(np.diff(ra, axis=1) / dx)
    gb = gradient_transform(np.diff(rb, axis=1) / dx)
    diff = ga - gb
    per_t = dx * np.sum(diff * diff, axis=1)
    return _l2q_of_rows(times, per_t)


def signed_flux_transform(p):
    """|p| p / 2, the flux whose pairing appears in the weak form."""
    p = np.asarray(p, dtype=float)
    return 0.5 * np.abs(p) * p


# ---------------------------------------------------------------------------
# manufactured-solution order verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form decaying sine mode exp(-t) * sin(pi (x-a)/(d-a))."""

    a: float
    d: float

    def _arg(self, x):
        return np.pi * (x - self.a) / (self.d - self.a)

    def value(self, t, x):
        return np.exp(-t) * np.sin(self._arg(x))

    def dt(self, t, x):
        return -self.value(t, x)

    def dx(self, t, x):
        k = np.pi / (self.d - self.a)
        return np.exp(-t) * k * np.cos(self._arg(x))

    def dxx(self, t, x):
        k = np.pi / (self.d - self.a)
        return -np.exp(-t) * k * k * np.sin(self._arg(x))

    def mean(self, t):
        """Domain average (1/(d-a)) * integral of the profile."""
        return np.exp(-t) * 2.0 / np.pi


def manufactured_source(exact: ManufacturedSolution, params: ModelParams,
                        op: ElasticityOperator) -> Callable:
    """Analytic source g = S_t - c nu |S_x|_k S_xx - c (T:eps_bar - psi'(S))
    (|S_x|_k - kappa), with the stress assembled from the exact solution and
    zero body force."""
    kap = params.kappa
    c, nu = params.c, params.nu

    def source(t, grid):
        x = grid.x
        s = exact.value(t, x)
        sx = exact.dx(t, x)
        sxx = exact.dxx(t, x)
        w = np.hypot(sx, kap)
        tdot = op.alpha * s - op.beta * exact.mean(t)
        psi_p = np.asarray(params.potential.psi_prime(s), dtype=float)
        return exact.dt(t, x) - c * nu * w * sxx - c * (tdot - psi_p) * (w - kap)

    return source


@dataclass
class MmsReport:
    grid_sizes: List[int]
    errors: List[float]
    orders: List[float]
    t_end: float
    kappa: float


def manufactured_run(params: ModelParams, grid_sizes: Sequence[int] = (100, 200, 400),
                     config: Optional[SolverConfig] = None,
                     exact: Optional[ManufacturedSolution] = None) -> MmsReport:
    """Verify the discretization order against a closed-form solution.

    The residual of the exact solution is injected as an analytic source, the
    solver is run on each grid with its own adaptive steps, and the L2(Q)
    error and observed order under grid doubling are reported.
    """
    if exact is None:
        exact = ManufacturedSolution(params.a, params.d)
    if config is None:
        config = SolverConfig()
    errors = []
    for n in grid_sizes:
        grid = Grid(params.a, params.d, int(n))
        op = ElasticityOperator.from_params(grid, params)
        cfg = _with(config, source=manufactured_source(exact, params, op),
                    snapshot_interval=params.t_end / 256.0)
        s0_values = np.asarray(exact.value(0.0, grid.x), dtype=float)
        s0_values[0] = 0.0
        s0_values[-1] = 0.0
        s0 = ScalarField(grid, s0_values)
        traj, _ = run(s0, params, cfg)
        per_t = np.array([trapezoid((traj.values[i] - exact.value(t, grid.x)) ** 2, grid.dx)
                          for i, t in enumerate(traj.times)])
        errors.append(_l2q_of_rows(traj.times, per_t))
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]
    return MmsReport(grid_sizes=list(int(n) for n in grid_sizes), errors=errors,
                     orders=orders, t_end=params.t_end, kappa=params.kappa)


def _with(config: SolverConfig, **kw) -> SolverConfig:
    from dataclasses import replace
    return replace(config, **kw)


# ---------------------------------------------------------------------------
# regularization sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepEntry:
    kappa: float
    ok: bool
    error: Optional[str] = None
    finals: Optional[dict] = None
    weak_residuals: Optional[np.ndarray] = None
    reaction_gap: Optional[float] = None
    reaction_gap_bound: Optional[float] = None
    monitors: Optional[MonitorSeries] = None
    trajectory: Optional[Trajectory] = None


@dataclass
class SweepReport:
    """Per-kappa outcomes of a regularization sweep plus the cross-kappa
    diagnostics: Cauchy distances of the compactness transform, distances of
    the signed flux, and the uniformity ratios of the cumulative monitors."""

    kappas: List[float]
    entries: List[SweepEntry]
    compactness_distances: List[float] = field(default_factory=list)
    flux_distances: List[float] = field(default_factory=list)
    uniformity: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def distances_decreasing(self) -> bool:
        d = self.compactness_distances
        return all(d[i + 1] < d[i] for i in range(len(d) - 1))


def reaction_factor_gap(traj: Trajectory, kappa: float):
    """L2(Q) gap between the regularized reaction weight (|S_x|_k - kappa)
    and |S_x|, with its a priori bound 2 kappa sqrt(|Q|)."""
    dx = traj.grid.dx
    g = np.diff(traj.values, axis=1) / dx
    gap = (np.hypot(g, kappa) - kappa) - np.abs(g)
    per_t = dx * np.sum(gap * gap, axis=1)
    val = _l2q_of_rows(traj.times, per_t)
    area = (traj.grid.d - traj.grid.a) * traj.t_end
    return val, 2.0 * kappa * math.sqrt(area)


def kappa_sweep(s0: ScalarField, params_base: ModelParams,
                kappas: Sequence[float], config: SolverConfig,
                b=None, keep_trajectories: bool = True,
                residual_family: bool = True) -> SweepReport:
    """Run the same problem for each regularization width, concurrently.

    The kappa list must be strictly decreasing within (0, 1]; one failed run
    marks its entry without aborting the sweep.  The same smooth initial
    field is reused for every kappa.
    """
    kappas = [float(k) for k in kappas]
    if any(not (0.0 < k <= 1.0) for k in kappas):
        raise ValueError("every kappa must lie in (0, 1]")
    if any(kappas[i + 1] >= kappas[i] for i in range(len(kappas) - 1)):
        raise ValueError("kappa list must be strictly decreasing")

    def one(kappa: float) -> SweepEntry:
        try:
            params = params_base.with_kappa(kappa)
            traj, monitors = run(s0, params, config, b=b)
            gap, bound = reaction_factor_gap(traj, kappa)
            residuals = (weak_residual_family(traj, params)
                         if residual_family else None)
            return SweepEntry(kappa=kappa, ok=True, finals=monitors.finals(),
                              weak_residuals=residuals, reaction_gap=gap,
                              reaction_gap_bound=bound, monitors=monitors,
                              trajectory=traj)
        except Exception as exc:  # noqa: BLE001 - per-entry isolation
            return SweepEntry(kappa=kappa, ok=False, error=str(exc))

    if len(kappas) == 1:
        entries = [one(kappas[0])]
    else:
        with ThreadPoolExecutor(max_workers=min(len(kappas), 8)) as pool:
            entries = list(pool.map(one, kappas))

    report = SweepReport(kappas=kappas, entries=entries)
    good = [e for e in entries if e.ok]
    for i in range(len(entries) - 1):
        ea, eb = entries[i], entries[i + 1]
        if ea.ok and eb.ok:
            report.compactness_distances.append(
                compactness_distance(ea.trajectory, eb.trajectory))
            report.flux_distances.append(
                compactness_distance(ea.trajectory, eb.trajectory,
                                     gradient_transform=signed_flux_transform))
    if len(good) >= 2:
        for key in MonitorSeries.UNIFORMITY_KEYS:
            vals = np.array([e.finals[key] for e in good])
            lo = float(vals.min())
            hi = float(vals.max())
            ratio = hi / lo if lo > 0.0 else (1.0 if hi == 0.0 else math.inf)
            report.uniformity[key] = {"min": lo, "max": hi, "ratio": ratio,
                                      "within_factor_2": bool(ratio <= 2.0)}
    if not keep_trajectories:
        for e in entries:
            e.trajectory = None
            e.monitors = None
    return report
