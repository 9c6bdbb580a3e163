"""Explicit conservative finite-difference integration of the regularized
order-parameter equation, coupled to the quasi-static elasticity solve.

The degenerate diffusion term is differenced in flux form through the
antiderivative of the smoothed absolute value, so interior flux differences
telescope to boundary fluxes exactly; the reaction uses the central gradient
and vanishes identically wherever that gradient is zero.  Time stepping is
forward Euler under an adaptive step-size budget for the gradient-dependent
diffusion coefficient plus a reaction cap.

Two engines produce the same results up to floating-point association: a
fused compiled loop (used automatically when numba is importable and the run
has no source hook, time-dependent body force, or in-stepping mollification)
and a plain numpy loop.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import mollifier as _mollifier
from .elasticity import (CorrectionPair, ElasticityOperator, compute_ustar,
                         solve_correction, zero_body_force)
from .estimates import MonitorAccumulator
from .model import Grid, ModelParams, ScalarField, Trajectory, trapezoid

try:
    import numba as _numba
except Exception:  # pragma: no cover - exercised only without numba installed
    _numba = None

_CHUNK = 16384
_P43 = 4.0 / 3.0


class SolverAbort(RuntimeError):
    """Raised when a run cannot continue (non-finite state, budget blown)."""

    def __init__(self, reason: str, t: float, step: int):
        super().__init__(f"{reason} (t={t!r}, step {step})")
        self.reason = reason
        self.t = t
        self.step = step


@dataclass(frozen=True)
class SolverConfig:
    """Run controls: coupling mode, step-size safety, output cadence."""

    coupling: str = "direct"            # direct | mollified | picard
    cfl_safety: float = 0.4
    max_steps: int = 5_000_000
    source: Optional[Callable] = None   # source(t, grid) -> nodal values
    snapshot_stride: int = 1            # record every k-th step ...
    snapshot_interval: float = 0.0      # ... or at this time spacing if > 0
    picard_sweeps: int = 2
    mollify_samples: int = 257
    mollify_table: int = 513
    jit: str = "auto"                   # auto | on | off
    dt_override: float = 0.0            # forced step size (stability tests)

    def __post_init__(self):
        if self.coupling not in ("direct", "mollified", "picard"):
            raise ValueError("coupling must be direct, mollified or picard")
        if not (0.0 < self.cfl_safety < 1.0):
            raise ValueError("cfl_safety must lie in (0, 1)")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.jit not in ("auto", "on", "off"):
            raise ValueError("jit must be auto, on or off")


@dataclass(frozen=True)
class StepReport:
    t: float
    dt: float
    max_abs_s: float
    max_grad_weight: float
    reaction_max: float
    elasticity_residual: float

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ValueError("step size must be positive")


# ---------------------------------------------------------------------------
# initial profiles
# ---------------------------------------------------------------------------

def _smoothstep(u):
    """Quintic ramp with zero first and second derivatives at both ends."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 + u * (-15.0 + 6.0 * u))


def make_initial_profile(kind: str, amplitude: float, grid: Grid,
                         width: Optional[float] = None) -> ScalarField:
    """Generated initial data with zero boundary values.

    * ``sine``: amplitude * sin(pi * (x-a)/(d-a)).
    * ``smoothed-step``: rises from exactly 0 through a quintic transition of
      the given width to a plateau at ``amplitude`` and returns to exactly 0
      before the right endpoint, so value, slope and curvature all vanish on
      the boundary (monotone along each transition).
    * ``polynomial-bump``: 16 * amplitude * (u*(1-u))^2, zero value and slope
      at the endpoints.
    """
    if not np.isfinite(amplitude):
        raise ValueError("amplitude must be finite")
    length = grid.d - grid.a
    u = (grid.x - grid.a) / length
    if kind == "sine":
        values = amplitude * np.sin(np.pi * u)
    elif kind == "smoothed-step":
        w = 0.3 * length if width is None else float(width)
        margin = 0.05 * length
        w = min(max(w, 4.0 * grid.dx), 0.5 * (length - 2.0 * margin))
        rise = (grid.x - (grid.a + margin)) / w
        fall = (grid.x - (grid.d - margin - w)) / w
        values = amplitude * (_smoothstep(rise) - _smoothstep(fall))
    elif kind == "polynomial-bump":
        values = 16.0 * amplitude * (u * (1.0 - u)) ** 2
    else:
        raise ValueError(f"unknown profile kind {kind!r}; "
                         "use sine, smoothed-step or polynomial-bump")
    values[0] = 0.0
    values[-1] = 0.0
    return ScalarField(grid, values)


# ---------------------------------------------------------------------------
# public single-step operations (plain numpy, reference formulas)
# ---------------------------------------------------------------------------

def discrete_rhs(s: ScalarField, tdot_eps, params: ModelParams,
                 source=None) -> ScalarField:
    """Right-hand side of the evolution equation on interior nodes.

    Flux-form diffusion (differences of the flux primitive of one-sided
    gradients) plus the configurational reaction with the central-gradient
    weight; endpoints are held at zero.
    """
    v = s.values
    dx = s.grid.dx
    kap = params.kappa
    dplus = np.diff(v) / dx
    wplus = np.hypot(dplus, kap)
    fp = 0.5 * (dplus * wplus + kap * kap * np.arcsinh(dplus / kap))
    flux_div = np.diff(fp) / dx
    d0 = (v[2:] - v[:-2]) / (2.0 * dx)
    w0 = np.hypot(d0, kap)
    tview = tdot_eps.values if isinstance(tdot_eps, ScalarField) else np.asarray(tdot_eps, dtype=float)
    psi_p = np.asarray(params.potential.psi_prime(v[1:-1]), dtype=float)
    rhs = np.zeros_like(v)
    rhs[1:-1] = (params.c * params.nu * flux_div
                 + params.c * (tview[1:-1] - psi_p) * (w0 - kap))
    if source is not None:
        src = source.values if isinstance(source, ScalarField) else np.asarray(source, dtype=float)
        rhs[1:-1] += src[1:-1]
    if not np.all(np.isfinite(rhs)):
        raise SolverAbort("non-finite right-hand side", t=float("nan"), step=-1)
    return ScalarField(s.grid, rhs)


def _reaction_prefactor(params: ModelParams, sup_abs: float) -> float:
    """Lipschitz budget for the reaction's dependence on S: the potential
    curvature on the reachable range plus the stress-coupling gains."""
    u_star, eps_star = compute_ustar(params.elastic, params.epsbar)
    alpha = abs(params.elastic.apply(eps_star - params.epsbar).dot(params.epsbar))
    beta = abs(params.elastic.apply(eps_star).dot(params.epsbar))
    bound = sup_abs + 1.0
    return params.potential.psi_prime_lipschitz(-bound, bound) + alpha + beta


def cfl_dt(s: ScalarField, params: ModelParams, safety: float) -> float:
    """Stability budget: safety * dx^2 / (2 c nu max|D+ S|_kappa), further
    capped by safety over the reaction's Lipschitz budget on the current
    range of S."""
    dx = s.grid.dx
    wmax = float(np.max(np.hypot(np.diff(s.values) / dx, params.kappa)))
    dt = safety * dx * dx / (2.0 * params.c * params.nu * wmax)
    gain = _reaction_prefactor(params, s.max_abs()) * max(wmax - params.kappa, 0.0)
    if gain > 0.0:
        dt = min(dt, safety / (params.c * gain))
    return dt


def step(s: ScalarField, t: float, config: SolverConfig, params: ModelParams,
         b=None, op: Optional[ElasticityOperator] = None,
         corr: Optional[CorrectionPair] = None):
    """One forward-Euler step with direct coupling; endpoints stay pinned.

    Returns the new field and a report of the step actually taken.
    """
    grid = s.grid
    if op is None:
        op = ElasticityOperator.from_params(grid, params)
    if corr is None:
        b_arr = zero_body_force(grid) if b is None else np.asarray(b, dtype=float)
        corr = solve_correction(b_arr, op)
    sbar = trapezoid(s.values, grid.dx) / op.length
    tdot = op.alpha * s.values - op.beta * sbar + corr.sig_dot_eps
    source = None if config.source is None else config.source(t, grid)
    rhs = discrete_rhs(s, tdot, params, source=source)
    dt = config.dt_override if config.dt_override > 0.0 else cfl_dt(s, params, config.cfl_safety)
    new_values = s.values + dt * rhs.values
    new_values[0] = 0.0
    new_values[-1] = 0.0
    if not np.all(np.isfinite(new_values)):
        raise SolverAbort("non-finite state after update", t=t, step=-1)
    d0 = (s.values[2:] - s.values[:-2]) / (2.0 * grid.dx)
    w0 = np.hypot(d0, params.kappa)
    psi_p = np.asarray(params.potential.psi_prime(s.values[1:-1]), dtype=float)
    reaction = params.c * (tdot[1:-1] - psi_p) * (w0 - params.kappa)
    report = StepReport(
        t=t, dt=dt, max_abs_s=float(np.max(np.abs(new_values))),
        max_grad_weight=float(np.max(np.hypot(np.diff(s.values) / grid.dx, params.kappa))),
        reaction_max=float(np.max(np.abs(reaction))) if reaction.size else 0.0,
        elasticity_residual=corr.residual)
    return ScalarField(grid, new_values), report


# ---------------------------------------------------------------------------
# compiled chunk loop
# ---------------------------------------------------------------------------

def _build_chunk_loop():
    if _numba is None:
        return None
    import math

    @_numba.njit(cache=True)
    def chunk_loop(S, rhs_prev, dx, kappa, c, nu, alpha, beta, inv_len,
                   sig_eps, dcoeffs, react_coef, safety, t, t_stop,
                   dt_override, max_chunk, mode, tab_t0, tab_dt, tab_vals,
                   tab_means, dts_buf, acc):
        # acc: 0 diss, 1 recip, 2 p43, 3 wsq, 4 linf83, 5 st_max, 6 sup_run,
        #      7 prev_dt, 8 last_st_l2, 9 last_dt
        n = S.shape[0]
        nm1 = n - 1
        inv_dx = 1.0 / dx
        kap2 = kappa * kappa
        cnu = c * nu
        diff_coef = safety * dx * dx / (2.0 * cnu)
        tiny = 1e-14 * (abs(t_stop) + 1.0)
        ncoef = dcoeffs.shape[0]
        done = 0
        status = 2  # 0 reached t_stop, 1 non-finite, 2 chunk exhausted
        while done < max_chunk:
            if t_stop - t <= tiny:
                status = 0
                break
            if mode == 0:
                accm = 0.5 * (S[0] + S[nm1])
                for i in range(1, nm1):
                    accm += S[i]
                ibar = accm * dx * inv_len
                theta = 0.0
                idx = 0
            else:
                pos = (t - tab_t0) / tab_dt
                idx = int(pos)
                if idx < 0:
                    idx = 0
                if idx > tab_vals.shape[0] - 2:
                    idx = tab_vals.shape[0] - 2
                theta = pos - idx
                if theta < 0.0:
                    theta = 0.0
                if theta > 1.0:
                    theta = 1.0
                ibar = (1.0 - theta) * tab_means[idx] + theta * tab_means[idx + 1]

            dp_prev = (S[1] - S[0]) * inv_dx
            wp = math.sqrt(kap2 + dp_prev * dp_prev)
            wmax = wp
            gmax = abs(dp_prev)
            f_prev = 0.5 * (dp_prev * wp + kap2 * math.asinh(dp_prev / kappa))
            w0max = kappa
            m_w = 0.0
            m_p43 = 0.0
            m_wsq = 0.0
            m_rhs = 0.0
            m_recip = 0.0
            for j in range(1, nm1):
                dp = (S[j + 1] - S[j]) * inv_dx
                wp = math.sqrt(kap2 + dp * dp)
                if wp > wmax:
                    wmax = wp
                g = abs(dp)
                if g > gmax:
                    gmax = g
                f = 0.5 * (dp * wp + kap2 * math.asinh(dp / kappa))
                d0 = 0.5 * (dp + dp_prev)
                w0 = math.sqrt(kap2 + d0 * d0)
                if w0 > w0max:
                    w0max = w0
                d2 = (dp - dp_prev) * inv_dx
                sj = S[j]
                psi_p = dcoeffs[0]
                for k in range(1, ncoef):
                    psi_p = psi_p * sj + dcoeffs[k]
                if mode == 0:
                    seff = sj
                else:
                    seff = (1.0 - theta) * tab_vals[idx, j] + theta * tab_vals[idx + 1, j]
                tdot = alpha * seff - beta * ibar + sig_eps[j]
                r = cnu * (f - f_prev) * inv_dx + c * (tdot - psi_p) * (w0 - kappa)
                rpj = rhs_prev[j]
                m_recip += rpj * rpj / w0
                rhs_prev[j] = r
                m_w += w0 * d2 * d2
                m_p43 += (w0 * abs(d2)) ** _P43
                m_wsq += w0 * w0
                m_rhs += r * r
                dp_prev = dp
                f_prev = f

            dt = diff_coef / wmax
            gain = react_coef * (w0max - kappa)
            if gain > 0.0:
                dt_r = safety / gain
                if dt_r < dt:
                    dt = dt_r
            if dt_override > 0.0:
                dt = dt_override
            if t + dt >= t_stop - tiny:
                dt = t_stop - t

            acc[0] += dt * dx * m_w
            acc[2] += dt * dx * m_p43
            acc[3] += dt * dx * m_wsq
            acc[4] += dt * gmax ** (8.0 / 3.0)
            if acc[7] > 0.0:
                acc[1] += acc[7] * dx * m_recip
            st_l2 = dx * m_rhs
            if st_l2 > acc[5]:
                acc[5] = st_l2
            acc[7] = dt
            acc[8] = st_l2
            acc[9] = dt

            sup_new = 0.0
            for j in range(1, nm1):
                S[j] = S[j] + dt * rhs_prev[j]
                aj = abs(S[j])
                if aj > sup_new:
                    sup_new = aj
            if sup_new > acc[6]:
                acc[6] = sup_new
            t = t + dt
            dts_buf[done] = dt
            done += 1
            if not (sup_new == sup_new) or sup_new > 1e150 or not (st_l2 == st_l2):
                status = 1
                break
            if t_stop - t <= tiny:
                status = 0
                break
        return done, t, status

    return chunk_loop


_CHUNK_LOOP = _build_chunk_loop()


# ---------------------------------------------------------------------------
# run engines
# ---------------------------------------------------------------------------

class _Emitter:
    """Collects snapshots and monitor rows while a run progresses."""

    def __init__(self, grid, params, op, corr, s0_values, store_s_eff):
        self.grid = grid
        self.params = params
        self.op = op
        self.corr = corr
        self.acc = MonitorAccumulator(grid, params, s0_values)
        self.times = []
        self.rows = []
        self.tdots = []
        self.seffs = [] if store_s_eff else None
        self.dts_parts = []

    def emit(self, t, s_values, s_eff_values, st_l2):
        sbar = trapezoid(s_eff_values, self.grid.dx) / self.op.length
        tdot = self.op.alpha * s_eff_values - self.op.beta * sbar + self.corr.sig_dot_eps
        self.times.append(t)
        self.rows.append(np.array(s_values))
        self.tdots.append(tdot)
        if self.seffs is not None:
            self.seffs.append(np.array(s_eff_values))
        self.acc.snapshot(t, s_values, st_l2)

    def finish(self):
        dts = np.concatenate(self.dts_parts) if self.dts_parts else np.zeros(0)
        traj = Trajectory(self.grid, np.asarray(self.times), np.vstack(self.rows),
                          tdot_eps=np.vstack(self.tdots),
                          s_eff=np.vstack(self.seffs) if self.seffs is not None else None,
                          dts=dts)
        monitors = self.acc.build(self.corr.residual)
        return traj, monitors


def _initial_st_l2(s0: ScalarField, op, corr, params, s_eff_values, source):
    sbar = trapezoid(s_eff_values, s0.grid.dx) / op.length
    tdot = op.alpha * s_eff_values - op.beta * sbar + corr.sig_dot_eps
    src = None if source is None else source(0.0, s0.grid)
    rhs = discrete_rhs(s0, tdot, params, source=src)
    return float(s0.grid.dx * np.dot(rhs.values, rhs.values))


def _emission_plan(config: SolverConfig, t_end: float):
    if config.snapshot_interval > 0.0:
        return "interval", min(config.snapshot_interval, t_end)
    return "stride", config.snapshot_stride


def _prepare(s0: ScalarField, params: ModelParams, b):
    grid = s0.grid
    if not (grid.a == params.a and grid.d == params.d):
        raise ValueError("grid endpoints do not match the model domain")
    values = np.array(s0.values)
    if values[0] != 0.0 or values[-1] != 0.0:
        warnings.warn("initial data does not vanish at the boundary; pinning endpoints",
                      stacklevel=3)
        values[0] = 0.0
        values[-1] = 0.0
    op = ElasticityOperator.from_params(grid, params)
    b_callable = None
    if b is None:
        b_static = zero_body_force(grid)
    elif callable(b):
        b_callable = b
        b_static = np.asarray(b(0.0), dtype=float)
    else:
        b_static = np.asarray(b, dtype=float)
    corr = solve_correction(b_static, op)
    return grid, values, op, corr, b_callable


def _table_interp(tab_t0, tab_dt, tab_vals, t):
    pos = (t - tab_t0) / tab_dt
    idx = int(min(max(int(pos), 0), tab_vals.shape[0] - 2))
    theta = float(min(max(pos - idx, 0.0), 1.0))
    return idx, theta


def _run_jit(values, grid, params, config, op, corr, table=None):
    mode = 0 if table is None else 1
    if table is None:
        tab_t0, tab_dt = 0.0, 1.0
        tab_vals = np.zeros((2, grid.n_nodes))
        tab_means = np.zeros(2)
    else:
        ref_times, tab_vals = table
        tab_vals = np.ascontiguousarray(tab_vals)
        tab_t0 = float(ref_times[0])
        tab_dt = float(ref_times[1] - ref_times[0])
        tab_means = np.array([trapezoid(row, grid.dx) / op.length for row in tab_vals])

    def seff_at(t, s_values):
        if mode == 0:
            return s_values
        idx, theta = _table_interp(tab_t0, tab_dt, tab_vals, t)
        return (1.0 - theta) * tab_vals[idx] + theta * tab_vals[idx + 1]

    t_end = params.t_end
    emitter = _Emitter(grid, params, op, corr, values, store_s_eff=(mode == 1))
    st0 = _initial_st_l2(ScalarField(grid, values), op, corr, params,
                         seff_at(0.0, values), None)
    emitter.emit(0.0, values, seff_at(0.0, values), st0)

    react_coef = params.c * _reaction_prefactor(params, float(np.max(np.abs(values))))
    dcoeffs = np.ascontiguousarray(params.potential.dcoeffs, dtype=float)
    sig_eps = np.ascontiguousarray(corr.sig_dot_eps)
    acc = np.zeros(10)
    acc[6] = float(np.max(np.abs(values)))
    rhs_prev = np.zeros(grid.n_nodes)
    dts_buf = np.empty(_CHUNK)
    S = values  # mutated in place by the compiled loop

    plan, cadence = _emission_plan(config, t_end)
    emit_count = 1
    steps_done = 0
    t = 0.0
    tiny_end = 1e-14 * (t_end + 1.0)
    while t < t_end - tiny_end:
        if plan == "interval":
            t_stop = min(t_end, cadence * emit_count)
            budget = _CHUNK
        else:
            t_stop = t_end
            rem = cadence - (steps_done % cadence)
            budget = min(_CHUNK, rem)
        budget = min(budget, config.max_steps - steps_done)
        if budget <= 0:
            raise SolverAbort("step budget exhausted", t=t, step=steps_done)
        done, t, status = _CHUNK_LOOP(
            S, rhs_prev, grid.dx, params.kappa, params.c, params.nu,
            op.alpha, op.beta, 1.0 / op.length, sig_eps, dcoeffs, react_coef,
            config.cfl_safety, t, t_stop, config.dt_override, budget,
            mode, tab_t0, tab_dt, tab_vals, tab_means, dts_buf, acc)
        steps_done += done
        if done:
            emitter.dts_parts.append(dts_buf[:done].copy())
        eacc = emitter.acc
        eacc.diss_cum = acc[0]
        eacc.recip_cum = acc[1]
        eacc.p43_cum = acc[2]
        eacc.wsq_cum = acc[3]
        eacc.linf83_cum = acc[4]
        eacc.st_l2_sq_max = max(eacc.st_l2_sq_max, acc[5])
        eacc.sup_abs_run = max(eacc.sup_abs_run, acc[6])
        eacc.n_steps = steps_done
        if status == 1:
            raise SolverAbort("non-finite state", t=t, step=steps_done)
        reached_end = t >= t_end - tiny_end
        if plan == "interval":
            if status == 0:
                emitter.emit(t, S, seff_at(t, S), acc[8])
                emit_count += 1
        elif steps_done % cadence == 0 or reached_end:
            emitter.emit(t, S, seff_at(t, S), acc[8])
        if reached_end:
            break

    if acc[9] > 0.0:
        w0 = np.hypot((S[2:] - S[:-2]) / (2.0 * grid.dx), params.kappa)
        emitter.acc.finish_reciprocal(
            acc[9], float(np.dot(rhs_prev[1:-1] / w0, rhs_prev[1:-1])))
    return emitter.finish()


def _run_numpy(values, grid, params, config, op, corr, b_callable=None,
               table=None):
    mode = "direct"
    history = None
    kernel = None
    tab_vals = tab_means = None
    tab_t0 = tab_dt = 0.0
    if table is not None:
        mode = "table"
        ref_times, tab_vals = table
        tab_means = np.array([trapezoid(row, grid.dx) / op.length for row in tab_vals])
        tab_t0 = float(ref_times[0])
        tab_dt = float(ref_times[1] - ref_times[0])
    elif config.coupling == "mollified":
        mode = "mollified"
        kernel = _mollifier.MollifierKernel(params.kappa, centered=False)
        history = _CausalHistory(params.kappa)
        history.append(0.0, values)

    dx = grid.dx
    kap = params.kappa
    c, nu = params.c, params.nu
    t_end = params.t_end
    inv_len = 1.0 / op.length
    sig_eps = corr.sig_dot_eps
    dcoeffs = params.potential.dcoeffs
    react_coef = c * _reaction_prefactor(params, float(np.max(np.abs(values))))
    diff_coef = config.cfl_safety * dx * dx / (2.0 * c * nu)
    tiny = 1e-14 * (t_end + 1.0)

    def seff_at(t, s_values):
        if mode == "direct":
            return s_values, trapezoid(s_values, dx) * inv_len
        if mode == "table":
            idx, theta = _table_interp(tab_t0, tab_dt, tab_vals, t)
            se = (1.0 - theta) * tab_vals[idx] + theta * tab_vals[idx + 1]
            return se, (1.0 - theta) * tab_means[idx] + theta * tab_means[idx + 1]
        se = history.mollify(kernel, t, config.mollify_samples)
        return se, trapezoid(se, dx) * inv_len

    emitter = _Emitter(grid, params, op, corr, values,
                       store_s_eff=(mode != "direct"))
    se0, _ = seff_at(0.0, values)
    st0 = _initial_st_l2(ScalarField(grid, values), op, corr, params, se0,
                         config.source)
    emitter.emit(0.0, values, se0, st0)

    plan, cadence = _emission_plan(config, t_end)
    emit_count = 1
    S = np.array(values)
    rhs_prev = None
    prev_dt = 0.0
    last_st = st0
    t = 0.0
    steps = 0
    dts = []
    while t < t_end - tiny:
        if steps >= config.max_steps:
            raise SolverAbort("step budget exhausted", t=t, step=steps)
        if b_callable is not None:
            corr = solve_correction(np.asarray(b_callable(t), dtype=float), op)
            sig_eps = corr.sig_dot_eps
            emitter.corr = corr
        s_eff, ibar = seff_at(t, S)
        dplus = np.diff(S) / dx
        wplus = np.hypot(dplus, kap)
        fp = 0.5 * (dplus * wplus + kap * kap * np.arcsinh(dplus / kap))
        flux_div = np.diff(fp) / dx
        d0 = 0.5 * (dplus[1:] + dplus[:-1])
        w0 = np.hypot(d0, kap)
        d2 = np.diff(dplus) / dx
        psi_p = np.polyval(dcoeffs, S[1:-1])
        tdot = op.alpha * s_eff[1:-1] - op.beta * ibar + sig_eps[1:-1]
        rhs = c * nu * flux_div + c * (tdot - psi_p) * (w0 - kap)
        if config.source is not None:
            rhs = rhs + np.asarray(config.source(t, grid), dtype=float)[1:-1]

        wmax = float(wplus.max())
        gmax = float(np.abs(dplus).max())
        w0max = float(w0.max()) if w0.size else kap
        dt = diff_coef / wmax
        gain = react_coef * (w0max - kap)
        if gain > 0.0:
            dt = min(dt, config.cfl_safety / gain)
        if config.dt_override > 0.0:
            dt = config.dt_override
        t_stop = min(t_end, cadence * emit_count) if plan == "interval" else t_end
        if t + dt >= t_stop - tiny:
            dt = t_stop - t

        sum_recip = float(np.dot(rhs_prev / w0, rhs_prev)) if rhs_prev is not None else 0.0
        st_l2 = dx * float(np.dot(rhs, rhs))
        acc = emitter.acc
        acc.accumulate(dt, float(np.dot(w0, d2 * d2)),
                       float(np.sum((w0 * np.abs(d2)) ** _P43)),
                       float(np.dot(w0, w0)), gmax, sum_recip, prev_dt,
                       st_l2, 0.0)
        S[1:-1] += dt * rhs
        sup_new = float(np.max(np.abs(S)))
        if sup_new > acc.sup_abs_run:
            acc.sup_abs_run = sup_new
        t += dt
        steps += 1
        dts.append(dt)
        rhs_prev = rhs
        prev_dt = dt
        last_st = st_l2
        if not np.isfinite(sup_new) or not np.isfinite(st_l2):
            raise SolverAbort("non-finite state", t=t, step=steps)
        if history is not None:
            history.append(t, S)

        reached_end = t >= t_end - tiny
        if plan == "interval":
            if t >= t_stop - tiny:
                se_now, _ = seff_at(t, S)
                emitter.emit(t, S, se_now, last_st)
                emit_count += 1
        elif steps % cadence == 0 or reached_end:
            se_now, _ = seff_at(t, S)
            emitter.emit(t, S, se_now, last_st)
        if reached_end:
            break

    if rhs_prev is not None:
        w0_final = np.hypot((S[2:] - S[:-2]) / (2.0 * dx), kap)
        emitter.acc.finish_reciprocal(
            prev_dt, float(np.dot(rhs_prev / w0_final, rhs_prev)))
    emitter.dts_parts.append(np.asarray(dts))
    return emitter.finish()


class _CausalHistory:
    """Thinned record of past states for in-stepping causal mollification.

    Keeps samples spaced at least kappa/keep apart (the causal kernel
    vanishes at the leading edge, so the small uncovered sliver next to the
    current time carries negligible mass)."""

    def __init__(self, kappa: float, keep: int = 512):
        self.spacing = kappa / keep
        self.kappa = kappa
        self.times: list = []
        self.rows: list = []
        self._last_kept = -np.inf

    def append(self, t, values):
        if t - self._last_kept >= self.spacing or not self.times:
            self.times.append(t)
            self.rows.append(np.array(values))
            self._last_kept = t
            lo = t - self.kappa - 4.0 * self.spacing
            while len(self.times) > 2 and self.times[1] < lo:
                self.times.pop(0)
                self.rows.pop(0)

    def mollify(self, kernel, t, samples):
        return _mollifier._mollify_arrays(
            np.asarray(self.times), np.vstack(self.rows), kernel, t, t,
            samples, cover_slack=4.0 * self.spacing)


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def run(s0: ScalarField, params: ModelParams, config: SolverConfig, b=None):
    """Integrate from the initial field to t_end.

    Returns the trajectory and the monitor series (including the maximum
    principle verdict).  Picard coupling runs a direct pass first and then
    the configured number of global mollified sweeps.
    """
    if config.coupling == "picard":
        direct_cfg = replace(config, coupling="direct")
        traj, monitors = run(s0, params, direct_cfg, b=b)
        distances = []
        for _ in range(config.picard_sweeps):
            traj, monitors, dist = _mollifier.picard_sweep(traj, params,
                                                           direct_cfg, b=b)
            distances.append(dist)
        monitors.picard_distances = distances
        return traj, monitors

    grid, values, op, corr, b_callable = _prepare(s0, params, b)
    if _pick_engine(config, b_callable):
        return _run_jit(values, grid, params, config, op, corr)
    return _run_numpy(values, grid, params, config, op, corr,
                      b_callable=b_callable)


def run_with_coupling_table(s0: ScalarField, params: ModelParams,
                            config: SolverConfig, ref_times, table, b=None):
    """Integrate with the stress assembled from a tabulated coupling field
    (used by the global fixed-point sweeps)."""
    grid, values, op, corr, b_callable = _prepare(s0, params, b)
    tab = (np.asarray(ref_times, dtype=float), np.asarray(table, dtype=float))
    if _pick_engine(config, b_callable):
        return _run_jit(values, grid, params, config, op, corr, table=tab)
    return _run_numpy(values, grid, params, config, op, corr,
                      b_callable=b_callable, table=tab)


def _pick_engine(config: SolverConfig, b_callable) -> bool:
    if config.jit == "off":
        return False
    available = _CHUNK_LOOP is not None
    if config.jit == "on" and not available:
        warnings.warn("numba not available; falling back to the numpy engine",
                      stacklevel=3)
    eligible = (config.source is None and b_callable is None
                and config.coupling != "mollified")
    return available and eligible
