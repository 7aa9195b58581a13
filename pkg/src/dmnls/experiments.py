"""Scenario runners behind the command-line interface.

Every runner writes into one run directory::

    manifest.json        config echo, version, wall times, file checksums, summary
    diag.csv             t, mass, h1, linf, boundary_leak   (time-stepping runs)
    snapshots/t_<k>.dmnls
    <scenario reports>   CSV tables and JSON summaries

CSV floats are written with ``repr`` (shortest round-trip form) and tasks are
aggregated in submission order, so outputs are byte-identical for a fixed
config regardless of the worker count.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .config import dump_config
from .integrators import EvolutionParams, IntegrationError, picard_solve, solve_averaged, solve_original
from .nonlinearity import AveragedNonlinearity, NonlinearityParams
from .snapshot import read_snapshot, write_snapshot
from .spectral import Field, Trajectory, free_propagate, gaussian, l2, make_grid, plane_wave

log = logging.getLogger(__name__)

__all__ = [
    "RunResult",
    "initial_field",
    "run_simulate",
    "run_scatter",
    "run_average_check",
    "run_bilinear_scan",
    "run_strichartz_scan",
    "run_picard",
    "run_vpnorm",
]


class RunResult(dict):
    """Summary dictionary of a run; ``ok`` is False only on runtime failure."""

    @property
    def ok(self):
        return self.get("status") == "completed"


# --- plumbing ------------------------------------------------------------------

def _f(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, scenario, cfg, started, summary):
    outdir = Path(outdir)
    files = []
    for p in sorted(outdir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            rel = p.relative_to(outdir).as_posix()
            files.append({"path": rel, "sha256": _sha256(p), "bytes": p.stat().st_size})
    manifest = {
        "scenario": scenario,
        "version": __version__,
        "config": dump_config(cfg),
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "files": files,
        "summary": summary,
    }
    _write_json(outdir / "manifest.json", manifest)
    return manifest


def _start(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir, time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def make_run_grid(cfg):
    return make_grid(cfg.dimension, cfg.n, cfg.box_length)


def initial_field(cfg, amplitude=None):
    """Initial data described by the (resolved) config."""
    a = cfg.amplitude if amplitude is None else amplitude
    if cfg.initial == "file":
        f = read_snapshot(cfg.initial_file)
        if f.grid.dim != cfg.dimension:
            raise ValueError(
                f"initial_file has dimension {f.grid.dim}, config says {cfg.dimension}"
            )
        return Field(f.grid, f.values, 0.0)
    grid = make_run_grid(cfg)
    if cfg.initial == "mode":
        return plane_wave(grid, cfg.mode, a, 0.0)
    return gaussian(grid, cfg.width, a, t=0.0)


def evolution_params(cfg, **kw):
    nl = NonlinearityParams(cfg.sigma, cfg.quad_nodes, cfg.dealias, cfg.map_strength)
    base = dict(d_av=cfg.d_av, sigma=cfg.sigma, eps=cfg.eps, dt=cfg.dt, t_final=cfg.t_final,
                nl=nl, snapshot_every=cfg.snapshot_every)
    base.update(kw)
    return EvolutionParams(**base)


def _write_diag(path, traj):
    d = traj.diagnostics
    rows = zip(traj.times, d["mass"], d["h1"], d["linf"], d["boundary_leak"])
    _write_csv(path, ["t", "mass", "h1", "linf", "boundary_leak"], rows)


def _write_snapshots(outdir, traj, indices=None):
    sdir = Path(outdir) / "snapshots"
    sdir.mkdir(exist_ok=True)
    idx = range(len(traj)) if indices is None else indices
    for k in idx:
        write_snapshot(sdir / f"t_{k:05d}.dmnls", traj[k])


def _flags(traj):
    return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
            for k, v in traj.flags.items()}


# --- scenarios -----------------------------------------------------------------

def run_simulate(cfg, outdir):
    """Evolve the averaged (eps = 0) or the original (eps > 0) equation."""
    cfg = cfg.validate("simulate")
    outdir, started = _start(outdir)
    u0 = initial_field(cfg)
    params = evolution_params(cfg)
    summary = RunResult(equation="original" if cfg.eps > 0 else "averaged")
    try:
        traj = solve_original(u0, params) if cfg.eps > 0 else solve_averaged(u0, params)
    except IntegrationError as exc:
        summary.update(status="failed", error=str(exc))
        write_manifest(outdir, "simulate", cfg, started, summary)
        return summary
    _write_diag(outdir / "diag.csv", traj)
    _write_snapshots(outdir, traj)
    summary.update(status="completed", n_snapshots=len(traj), **_flags(traj))
    write_manifest(outdir, "simulate", cfg, started, summary)
    return summary


def _scatter_one(cfg, amplitude, nl_plan):
    u0 = initial_field(cfg, amplitude)
    traj = solve_averaged(u0, evolution_params(cfg), nl_plan)
    phi, res = analysis.scattering_profile(traj, cfg.d_av)
    return u0, traj, phi, res


def _probe_index(times, t_probe):
    return int(np.argmin(np.abs(np.asarray(times) - t_probe)))


def run_scatter(cfg, outdir):
    """Averaged run, scattering profile, residual table and amplitude sweep."""
    cfg = cfg.validate("scatter")
    outdir, started = _start(outdir)
    grid = initial_field(cfg).grid
    plan = AveragedNonlinearity(
        grid, NonlinearityParams(cfg.sigma, cfg.quad_nodes, cfg.dealias, cfg.map_strength))
    amps = list(cfg.amplitudes) or [cfg.amplitude]
    if cfg.amplitude not in amps:
        amps = [cfg.amplitude] + amps
    summary = RunResult()
    try:
        runs = _map(lambda a: _scatter_one(cfg, a, plan), amps, cfg.threads)
    except IntegrationError as exc:
        summary.update(status="failed", error=str(exc))
        write_manifest(outdir, "scatter", cfg, started, summary)
        return summary

    u0, traj, phi, res = runs[amps.index(cfg.amplitude)]
    norm0 = l2(u0)
    times = np.array([t for t, _ in res])
    r = np.array([x for _, x in res])
    rel = r / norm0 if norm0 > 0 else np.zeros_like(r)
    t_probe = 0.25 * cfg.t_final
    tail = times >= t_probe - 1e-9
    nonincreasing = bool(np.all(np.diff(r[tail]) <= 1e-15 * max(norm0, 1e-300)))
    _write_diag(outdir / "diag.csv", traj)
    _write_snapshots(outdir, traj, [0, len(traj) - 1])
    write_snapshot(outdir / "phi_plus.dmnls", phi)
    _write_csv(outdir / "residuals.csv", ["t", "residual", "relative_residual"],
               zip(times, r, rel))

    sweep_rows = []
    for a, (_, tr_a, _, res_a) in zip(amps, runs):
        k = _probe_index(tr_a.times, t_probe)
        sweep_rows.append((a, float(tr_a.times[k]), res_a[k][1]))
    _write_csv(outdir / "sweep.csv", ["amplitude", "t", "residual"], sweep_rows)
    fit = float("nan")
    pos = [(a, x) for a, _, x in sweep_rows if a > 0 and x > 0]
    if len(pos) >= 2:
        fit = float(np.polyfit(np.log([a for a, _ in pos]), np.log([x for _, x in pos]), 1)[0])
    tail_max = float(rel[tail].max())
    summary.update(
        status="completed",
        amplitude=cfg.amplitude,
        t_probe=t_probe,
        relative_residual_tail_max=tail_max,
        residual_nonincreasing_after_probe=nonincreasing,
        decaying=bool(nonincreasing and tail_max <= 1e-3),
        sweep_exponent=fit,
        sweep_exponent_reference=1.0 + 4.0 / cfg.dimension,
        **_flags(traj),
    )
    if not summary["decaying"]:
        log.warning("residuals do not decay: scattering is not indicated for this run")
    _write_json(outdir / "scatter_summary.json", dict(summary))
    write_manifest(outdir, "scatter", cfg, started, summary)
    return summary


def _map_phase(t, eps, strength):
    """Accumulated fast dispersion int_0^t d0(s/eps)/eps ds (a triangle wave)."""
    ph = int(np.floor(t / eps + 1e-9))
    frac = t / eps - ph
    return strength * (frac if ph % 2 == 0 else 1.0 - frac)


def averaging_error(cfg, eps):
    """(sup, final) L^2 distance between original and averaged solutions.

    The original solution is compared after undoing the accumulated fast
    dispersion, at every half period ``t_j = j eps / 2``.
    """
    m = cfg.orig_substeps
    if m % 2:
        raise ValueError("orig_substeps must be even")
    u0 = initial_field(cfg)
    pa = evolution_params(cfg, eps=0.0, dt=eps / 2, snapshot_every=1)
    po = evolution_params(cfg, eps=eps, dt=eps / m, snapshot_every=m // 2)
    ta = solve_averaged(u0, pa)
    to = solve_original(u0, po)
    errs = []
    for k, t in enumerate(to.times):
        D = _map_phase(t, eps, cfg.map_strength)
        errs.append(l2(free_propagate(to[k], -D) - ta[k]))
    return max(errs), errs[-1]


def run_average_check(cfg, outdir):
    """Error between the original and averaged equations along an eps ladder."""
    cfg = cfg.validate("average-check")
    outdir, started = _start(outdir)
    eps_list = list(cfg.eps_ladder)
    errs = _map(lambda e: averaging_error(cfg, e), eps_list, cfg.threads)
    rows, ratios = [], []
    for k, (e, (sup, fin)) in enumerate(zip(eps_list, errs)):
        ratio = errs[k][0] / errs[k - 1][0] if k else float("nan")
        if k:
            ratios.append(ratio)
        rows.append((e, sup, fin, ratio))
    _write_csv(outdir / "averaging.csv", ["eps", "error_sup", "error_final", "ratio_sup"], rows)
    slope = float(np.polyfit(np.log(eps_list), np.log([s for s, _ in errs]), 1)[0])
    summary = RunResult(status="completed", ratios=ratios, fitted_slope=slope)
    _write_json(outdir / "averaging_summary.json", dict(summary))
    write_manifest(outdir, "average-check", cfg, started, summary)
    return summary


def _write_scan(outdir, rep):
    with open(outdir / "scan.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(rep.to_csv())
    with open(outdir / "scan_summary.json", "w", encoding="utf-8") as fh:
        fh.write(rep.summary_json() + "\n")


def _json_safe(summary):
    return json.loads(json.dumps(summary, default=_json_default).replace("NaN", "null"))


def run_bilinear_scan(cfg, outdir):
    cfg = cfg.validate("bilinear-scan")
    outdir, started = _start(outdir)
    method = None if cfg.scan_method == "auto" else cfg.scan_method
    rep = analysis.bilinear_scan(
        cfg.dimension, cfg.scan_separations, cfg.scan_seeds, cfg.seed, cfg.d_av,
        cfg.scan_nt, method, cfg.threads)
    _write_scan(outdir, rep)
    summary = RunResult(status="completed", **_json_safe(rep.summary()))
    write_manifest(outdir, "bilinear-scan", cfg, started, summary)
    return summary, rep


def run_strichartz_scan(cfg, outdir):
    cfg = cfg.validate("strichartz-scan")
    outdir, started = _start(outdir)
    rep = analysis.strichartz_scan(
        cfg.dimension, cfg.strichartz_q, cfg.strichartz_r, cfg.strichartz_levels,
        cfg.scan_seeds, cfg.seed, cfg.d_av, cfg.scan_nt, cfg.threads)
    _write_scan(outdir, rep)
    summary = RunResult(status="completed", **_json_safe(rep.summary()))
    write_manifest(outdir, "strichartz-scan", cfg, started, summary)
    return summary, rep


def _richardson(fine, coarse, order):
    """Error estimate of the coarse run from a run with half the step."""
    g = coarse.grid
    a = coarse.values
    b = fine.values[::2]
    axes = tuple(range(1, g.dim + 1))
    diff = np.sqrt(g.cell_volume * np.sum(np.abs(a - b) ** 2, axis=axes)).max()
    return float(diff * 2 ** order / (2 ** order - 1))


def _trajectory_gap(a, b):
    g = a.grid
    axes = tuple(range(1, g.dim + 1))
    return float(np.sqrt(g.cell_volume * np.sum(np.abs(a.values - b.values) ** 2, axis=axes)).max())


def picard_case(cfg, amplitude, plan=None):
    """Picard iteration at one amplitude plus the cross-check against the stepper."""
    u0 = initial_field(cfg, amplitude)
    params = evolution_params(cfg, snapshot_every=1)
    plan = plan or AveragedNonlinearity(u0.grid, params.nl)
    traj, rep = picard_solve(u0, params, cfg.picard_tol, cfg.picard_max_iter, cfg.threads, plan)
    out = {"amplitude": amplitude, "report": rep, "agreement": None}
    if rep.converged:
        half = evolution_params(cfg, dt=cfg.dt / 2, snapshot_every=1)
        traj_h, rep_h = picard_solve(u0, half, cfg.picard_tol, cfg.picard_max_iter, 1, plan)
        step = solve_averaged(u0, params, plan)
        step_h = solve_averaged(u0, half, plan)
        est = _richardson(traj_h, traj, 2) + _richardson(step_h, step, 4)
        gap = _trajectory_gap(traj, step)
        out["agreement"] = {"gap": gap, "discretization_estimate": est,
                            "tolerance": max(1e-6, est), "ok": gap <= max(1e-6, est),
                            "half_step_converged": rep_h.converged}
    return out


def run_picard(cfg, outdir):
    """Picard iteration along the amplitude ladder; marks the contraction boundary."""
    cfg = cfg.validate("picard")
    outdir, started = _start(outdir)
    amps = sorted(cfg.amplitudes) if cfg.amplitudes else [cfg.amplitude]
    grid = initial_field(cfg).grid
    plan = AveragedNonlinearity(grid, evolution_params(cfg).nl)
    cases = [picard_case(cfg, a, plan) for a in amps]
    rows, table = [], []
    boundary, below = None, True
    for c in cases:
        rep = c["report"]
        ratios = [float("nan")] + rep.contraction_ratios
        for k, (res, q) in enumerate(zip(rep.iterates, ratios)):
            rows.append((c["amplitude"], k + 1, res, q))
        below = below and rep.converged
        if below:
            boundary = c["amplitude"]
        agr = c["agreement"] or {}
        table.append({
            "amplitude": c["amplitude"],
            "converged": rep.converged,
            "iterations": rep.n_iter,
            "max_ratio": max(rep.contraction_ratios) if rep.contraction_ratios else None,
            "stepper_gap": agr.get("gap"),
            "agreement_tolerance": agr.get("tolerance"),
            "agreement_ok": agr.get("ok"),
        })
    _write_csv(outdir / "picard_residuals.csv", ["amplitude", "iteration", "residual", "ratio"], rows)
    _write_csv(outdir / "picard_summary.csv",
               ["amplitude", "converged", "iterations", "max_ratio", "stepper_gap", "agreement_tolerance"],
               [(t["amplitude"], t["converged"], t["iterations"],
                 "" if t["max_ratio"] is None else t["max_ratio"],
                 "" if t["stepper_gap"] is None else t["stepper_gap"],
                 "" if t["agreement_tolerance"] is None else t["agreement_tolerance"])
                for t in table])
    summary = RunResult(status="completed", contraction_boundary=boundary, cases=table)
    _write_json(outdir / "picard_report.json", dict(summary))
    write_manifest(outdir, "picard", cfg, started, summary)
    return summary


def load_trajectory(path):
    """Trajectory from a run directory, a snapshots directory or snapshot files."""
    path = Path(path)
    if path.is_dir():
        sub = path / "snapshots"
        files = sorted((sub if sub.is_dir() else path).glob("*.dmnls"))
    else:
        files = [path]
    if not files:
        raise FileNotFoundError(f"no .dmnls snapshots under {path}")
    return Trajectory.from_fields([read_snapshot(f) for f in files])


def run_vpnorm(path, p, d_av, outdir=None, cfg=None):
    """p-variation of stored snapshots, raw and pulled back, with and without infinity."""
    traj = load_trajectory(path)
    w = traj.grid.cell_volume
    table = {
        "p_variation": analysis.p_variation(analysis.VariationSample(traj.times, traj.values, w), p),
        "p_variation_inf": analysis.p_variation(
            analysis.VariationSample(traj.times, traj.values, w, infinity=True), p),
        "vp_delta": analysis.vp_delta_norm(traj, p, d_av),
        "vp_delta_inf": analysis.vp_delta_norm(traj, p, d_av, infinity=True),
    }
    summary = RunResult(status="completed", p=p, d_av=d_av, n_snapshots=len(traj), **table)
    if outdir is not None:
        outdir, started = _start(outdir)
        _write_csv(Path(outdir) / "vpnorm.csv", ["quantity", "value"], sorted(table.items()))
        if cfg is not None:
            write_manifest(outdir, "vpnorm", cfg, started, summary)
    return summary


def default_outdir(scenario):
    return os.path.join("runs", scenario)
