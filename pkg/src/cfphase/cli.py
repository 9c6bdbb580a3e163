"""Command-line driver: single runs, regularization sweeps, and
manufactured-solution order reports, with deterministic CSV/JSON emission.

Exit codes: 0 success, 1 configuration error, 2 solver abort, 3 invariant
violation (maximum-principle breach), 4 I/O failure, 5 partial sweep failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .convergence import kappa_sweep, manufactured_run
from .elasticity import ElasticityOperator, assemble_displacement, solve_correction
from .estimates import MonitorSeries
from .mollifier import BUMP_MASS
from .solver import SolverAbort, run

MAX_PRINCIPLE_TOL = 1e-10

SNAPSHOT_HEADER = "t,x,S,u1,u2,u3,T_dot_epsbar"
MONITOR_HEADER = ("t,sup_abs,grad_l2_sq,st_l2_sq,energy,weighted_sxx_l2,"
                  "dissipation_cum,reciprocal_cum,p43_cum,grad_linf83_cum,"
                  "grad_weight_sq_cum")
SWEEP_HEADER = ("kappa,status,sup_abs_run,max_principle_margin,"
                "dissipation_cum,reciprocal_cum,st_l2_sq_max,p43_cum,"
                "grad_linf83_cum,energy_final,reaction_gap_l2,"
                "reaction_gap_bound,weak_residual_max,"
                "compactness_dist_to_next,flux_dist_to_next")
MMS_HEADER = "n,l2q_error,observed_order"


def _fmt(x) -> str:
    """Shortest round-trip decimal form; deterministic across reruns."""
    return repr(float(x))


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_snapshots(path: Path, traj, params, b_field):
    op = ElasticityOperator.from_params(traj.grid, params)
    corr = solve_correction(b_field, op)
    x = traj.grid.x
    lines = [SNAPSHOT_HEADER]
    for i, t in enumerate(traj.times):
        s_eff = traj.s_eff[i] if traj.s_eff is not None else traj.values[i]
        u = assemble_displacement(s_eff, corr, op)
        td = traj.tdot_eps[i]
        row = traj.values[i]
        ts = _fmt(t)
        for j in range(x.size):
            lines.append(",".join((ts, _fmt(x[j]), _fmt(row[j]), _fmt(u[j, 0]),
                                   _fmt(u[j, 1]), _fmt(u[j, 2]), _fmt(td[j]))))
    _write_text(path, "\n".join(lines) + "\n")


def _write_monitors(path: Path, monitors: MonitorSeries):
    cols = [getattr(monitors, name) for name in MonitorSeries.COLUMNS]
    lines = [MONITOR_HEADER]
    for i in range(monitors.t.size):
        lines.append(",".join(_fmt(col[i]) for col in cols))
    _write_text(path, "\n".join(lines) + "\n")


def _meta_payload(cfg: RunConfig, monitors: MonitorSeries, extra=None):
    payload = {
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in sorted(asdict(cfg).items())},
        "kernel_normalization": BUMP_MASS,
        "mollifier_truncated": monitors.mollifier_truncated,
        "verdicts": {
            "max_principle_ok": bool(monitors.max_principle_ok),
            "max_principle_margin": monitors.max_principle_margin,
            "sup_abs_run": monitors.sup_abs_run,
            "max_abs_s0": monitors.max_abs_s0,
            "elasticity_residual": monitors.elasticity_residual,
            "n_steps": monitors.n_steps,
        },
    }
    if monitors.picard_distances is not None:
        payload["picard_distances"] = list(monitors.picard_distances)
    if extra:
        payload.update(extra)
    return payload


def _write_meta(path: Path, payload: dict):
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True,
                                 default=float) + "\n")


def _do_run(cfg: RunConfig, out_dir: Path) -> int:
    params = cfg.model_params()
    s0 = cfg.initial_field()
    b = cfg.body_force_field()
    try:
        traj, monitors = run(s0, params, cfg.solver_config(), b=b)
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 2
    try:
        _write_snapshots(out_dir / "snapshots.csv", traj, params, b)
        _write_monitors(out_dir / "monitors.csv", monitors)
        _write_meta(out_dir / "meta.json", _meta_payload(cfg, monitors))
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4
    if not monitors.max_principle_ok:
        print(f"invariant violation: max principle breached by "
              f"{monitors.max_principle_margin!r}", file=sys.stderr)
        return 3
    return 0


def _do_sweep(cfg: RunConfig, kappas, out_dir: Path) -> int:
    params = cfg.model_params()
    s0 = cfg.initial_field()
    b = cfg.body_force_field()
    report = kappa_sweep(s0, params, kappas, cfg.solver_config(), b=b)
    lines = [SWEEP_HEADER]
    breach = False
    for i, entry in enumerate(report.entries):
        if not entry.ok:
            lines.append(",".join([_fmt(entry.kappa), "failed"] + [""] * 13))
            continue
        fin = entry.finals
        monitors = entry.monitors
        if monitors is not None and not monitors.max_principle_ok:
            breach = True
        comp = (report.compactness_distances[i]
                if i < len(report.compactness_distances) else "")
        flux = (report.flux_distances[i]
                if i < len(report.flux_distances) else "")
        lines.append(",".join([
            _fmt(entry.kappa), "ok", _fmt(fin["sup_abs_run"]),
            _fmt(monitors.max_principle_margin),
            _fmt(fin["dissipation_cum"]), _fmt(fin["reciprocal_cum"]),
            _fmt(fin["st_l2_sq_max"]), _fmt(fin["p43_cum"]),
            _fmt(fin["grad_linf83_cum"]), _fmt(fin["energy_final"]),
            _fmt(entry.reaction_gap), _fmt(entry.reaction_gap_bound),
            _fmt(float(np.max(np.abs(entry.weak_residuals)))),
            _fmt(comp) if comp != "" else "",
            _fmt(flux) if flux != "" else "",
        ]))
    try:
        _write_text(out_dir / "sweep.csv", "\n".join(lines) + "\n")
        meta = {
            "kappas": list(report.kappas),
            "uniformity": report.uniformity,
            "compactness_distances_decreasing": report.distances_decreasing(),
            "kernel_normalization": BUMP_MASS,
        }
        _write_meta(out_dir / "sweep_meta.json", meta)
        for entry in report.entries:
            if entry.ok:
                sub = out_dir / f"kappa_{entry.kappa:g}"
                _write_monitors(sub / "monitors.csv", entry.monitors)
                _write_snapshots(sub / "snapshots.csv", entry.trajectory,
                                 params.with_kappa(entry.kappa), b)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4
    if not report.all_ok:
        print("sweep finished with failed entries", file=sys.stderr)
        return 5
    if breach:
        print("invariant violation: max principle breached in sweep",
              file=sys.stderr)
        return 3
    return 0


def _do_mms(cfg: RunConfig, out_dir: Path) -> int:
    params = cfg.model_params(t_end=cfg.mms_t_end)
    try:
        report = manufactured_run(params, grid_sizes=cfg.mms_grids,
                                  config=cfg.solver_config())
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 2
    lines = [MMS_HEADER]
    for i, n in enumerate(report.grid_sizes):
        order = _fmt(report.orders[i - 1]) if i > 0 else ""
        lines.append(",".join([str(n), _fmt(report.errors[i]), order]))
    try:
        _write_text(out_dir / "mms.csv", "\n".join(lines) + "\n")
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4
    for line in lines:
        print(line)
    return 0


def _load_config(path: str) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="1D phase-transition simulator: run, sweep, or verify")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single simulation run")
    p_run.add_argument("config")
    p_run.add_argument("--output", default=None, help="override output_dir")

    p_sweep = sub.add_parser("sweep", help="regularization-width sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--kappas", default="0.2,0.1,0.05,0.025",
                         help="strictly decreasing comma list in (0,1]")
    p_sweep.add_argument("--output", default=None)

    p_mms = sub.add_parser("mms", help="manufactured-solution order report")
    p_mms.add_argument("config")
    p_mms.add_argument("--output", default=None)

    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 4

    out_dir = Path(args.output) if args.output else Path(cfg.output_dir)
    if args.command == "run":
        return _do_run(cfg, out_dir)
    if args.command == "sweep":
        try:
            kappas = [float(k) for k in args.kappas.split(",") if k.strip()]
        except ValueError:
            print(f"config error: cannot parse --kappas={args.kappas!r}",
                  file=sys.stderr)
            return 1
        try:
            return _do_sweep(cfg, kappas, out_dir)
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    return _do_mms(cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
