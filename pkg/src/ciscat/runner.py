"""Scenario execution: drive the library from a ScenarioConfig and write
artifacts under an output directory.

Layout (per run):

    <outdir>/config.echo.ini      canonical echo of the resolved config
    <outdir>/diagnostics.csv      one row per recorded step (propagate)
    <outdir>/snap_<index>.field   spinor snapshots (propagate)
    <outdir>/analysis/*.csv       action-specific delimited tables

All delimited values are rendered with repr(), so identical runs produce
byte-identical files.  Plot rendering (PNG next to each table) is opt-in
via ``plot=True`` and never affects the delimited outputs.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .config import (ScenarioConfig, build_grid, build_model,
                     build_propagation, _float_list)
from .errors import ConfigError
from .field import SpinorField, to_adiabatic, write_field
from .gauge import LoopPath, abelian_field, wilson_loop
from .partialwave import (RadialPotential, differential_cross_section,
                          psi_total, solve, xs_pure_ab)
from .propagator import run as run_propagation
from .topo import charge_at_point, dislocation_lines

__all__ = ["run_scenario"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: List[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _analysis_dir(outdir: Path) -> Path:
    d = outdir / "analysis"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _component(field: SpinorField, model, which: str,
               adiabatic: bool) -> np.ndarray:
    if adiabatic:
        xx, yy = field.grid.meshgrid()
        field = to_adiabatic(field, model.unitary(xx, yy))
    return field.g2 if which == "ground" else field.g1


def _dislocation_rows(dset):
    rows = []
    for i, seg in enumerate(dset):
        (xi_lo, xi_hi) = seg.xi_range
        (eta_lo, eta_hi) = seg.eta_range
        rows.append((i, len(seg), seg.length, seg.suppression,
                     seg.phase_jump, xi_lo, xi_hi, eta_lo, eta_hi))
    return rows


_DISLOCATION_HEADER = ["segment", "n_cells", "length", "suppression",
                       "phase_jump", "xi_min", "xi_max", "eta_min", "eta_max"]


def _write_dislocations(outdir: Path, dset) -> None:
    """Write the polyline list and the per-segment summary table."""
    polyline = [(i, float(x), float(y))
                for i, seg in enumerate(dset)
                for x, y in seg.points]
    _write_csv(_analysis_dir(outdir) / "dislocations.csv",
               ["segment", "xi", "eta"], polyline)
    _write_csv(_analysis_dir(outdir) / "dislocation_summary.csv",
               _DISLOCATION_HEADER, _dislocation_rows(dset))


def _charge_rows(result):
    return [(result.charge, result.raw_winding, result.residual,
             result.converged, result.n_samples)]


_CHARGE_HEADER = ["charge", "raw_winding", "residual", "converged",
                  "n_samples"]


def _run_propagate(cfg: ScenarioConfig, outdir: Path, plot: bool,
                   threads: Optional[int]) -> Dict:
    summary: Dict = {"action": "propagate"}
    beta_raw = cfg.get("run", "beta_values")
    if beta_raw:
        return _run_beta_sweep(cfg, outdir, plot, threads)

    pconfig = build_propagation(cfg, threads=threads)
    trajectory = run_propagation(pconfig)

    rows = [(d.step, d.tau, d.norm, d.p_ground, d.p_excited, d.absorbed,
             d.backscatter) for d in trajectory.diagnostics]
    _write_csv(outdir / "diagnostics.csv",
               ["step", "tau", "norm", "p_ground", "p_excited", "absorbed",
                "backscatter"], rows)

    snap_paths = []
    for i, snap in enumerate(trajectory.snapshots):
        path = outdir / f"snap_{i:04d}.field"
        write_field(snap, path)
        snap_paths.append(path)
    summary["snapshots"] = [str(p) for p in snap_paths]

    final = trajectory.final
    last = trajectory.diagnostics[-1]
    surviving = last.p_ground + last.p_excited
    summary.update(step=last.step, tau=last.tau, norm=last.norm,
                   p_ground=last.p_ground, p_excited=last.p_excited,
                   absorbed=last.absorbed, backscatter=last.backscatter,
                   excited_fraction=(last.p_excited / surviving
                                     if surviving > 0 else 0.0))

    a = cfg.section("analysis")
    model = pconfig.model
    comp = None
    if a["dislocations"] or a["charge_radius"] > 0:
        comp = _component(final, model, a["component"], a["adiabatic"])
    if a["dislocations"]:
        dset = dislocation_lines(comp, final.grid)
        _write_dislocations(outdir, dset)
        summary["n_dislocations"] = len(dset)
        if plot:
            from . import plots
            plots.plot_dislocations(comp, final.grid, dset,
                                    _analysis_dir(outdir) / "dislocations.png")
    if a["charge_radius"] > 0:
        result = charge_at_point(
            comp, (a["charge_center_xi"], a["charge_center_eta"]),
            a["charge_radius"], grid=final.grid)
        _write_csv(_analysis_dir(outdir) / "charge.csv", _CHARGE_HEADER,
                   _charge_rows(result))
        summary["charge"] = result.charge
        summary["charge_converged"] = result.converged

    if plot:
        from . import plots
        plots.plot_diagnostics(trajectory.diagnostics,
                               outdir / "diagnostics.png")
        for i, snap in enumerate(trajectory.snapshots):
            plots.plot_field(snap, model, outdir / f"snap_{i:04d}.png",
                             adiabatic=a["adiabatic"])
    return summary


def _run_beta_sweep(cfg: ScenarioConfig, outdir: Path, plot: bool,
                    threads: Optional[int]) -> Dict:
    betas = _float_list(cfg.get("run", "beta_values"))
    rows = []
    for beta in betas:
        pconfig = build_propagation(cfg, beta=beta, threads=threads)
        trajectory = run_propagation(pconfig)
        last = trajectory.diagnostics[-1]
        rows.append((beta, pconfig.carrier_k(), last.step, last.norm,
                     last.p_ground, last.p_excited, last.absorbed,
                     last.backscatter))
    header = ["beta", "carrier_k", "n_steps", "norm", "p_ground",
              "p_excited", "absorbed", "backscatter"]
    _write_csv(_analysis_dir(outdir) / "backscatter.csv", header, rows)
    if plot:
        from . import plots
        plots.plot_backscatter([r[0] for r in rows], [r[7] for r in rows],
                               _analysis_dir(outdir) / "backscatter.png")
    return {"action": "propagate", "sweep": True,
            "betas": betas, "backscatter": [r[7] for r in rows]}


def _run_crosssection(cfg: ScenarioConfig, outdir: Path, plot: bool) -> Dict:
    a = cfg.section("analysis")
    k, alpha, radius = a["k"], a["alpha"], a["disk_radius"]
    theta = np.linspace(a["theta_min"], a["theta_max"], a["theta_n"])
    disk = RadialPotential.hard_disk(radius)

    flux_solution = solve(disk, k, alpha=alpha, m_max=a["m_max"])
    plain_solution = solve(disk, k, alpha=0.0, m_max=a["m_max"])
    xs_flux_disk = differential_cross_section(flux_solution, theta)
    xs_disk = differential_cross_section(plain_solution, theta)

    header = ["theta", "kxs_flux_disk", "kxs_disk_only"]
    columns = [theta, xs_flux_disk, xs_disk]
    summary: Dict = {"action": "crosssection", "k": k, "alpha": alpha}
    if a["include_pure"]:
        xs_pure = xs_pure_ab(alpha, theta)
        deviation = np.abs(xs_flux_disk - xs_pure) / np.maximum(xs_pure,
                                                                1e-300)
        header += ["kxs_pure_flux", "rel_deviation"]
        columns += [xs_pure, deviation]
        summary["max_rel_deviation"] = float(deviation.max())
    rows = list(zip(*[np.asarray(c, dtype=np.float64) for c in columns]))
    _write_csv(_analysis_dir(outdir) / "crosssection.csv", header,
               [tuple(float(v) for v in row) for row in rows])
    if plot:
        from . import plots
        curves = {"disk + flux": xs_flux_disk, "disk only": xs_disk}
        if a["include_pure"]:
            curves["pure flux"] = xs_pure
        plots.plot_crosssection(theta, curves, k,
                                _analysis_dir(outdir) / "crosssection.png")
    return summary


def _run_wilson(cfg: ScenarioConfig, outdir: Path, plot: bool) -> Dict:
    a = cfg.section("analysis")
    model = build_model(cfg)
    if not model.coupling_is_real:
        raise ConfigError(["[model].name: holonomy analysis needs a "
                           "real-coupling model (complex coupling has no "
                           "projected Abelian phase)"])
    center = (a["wilson_center_xi"], a["wilson_center_eta"])
    loop = LoopPath.circle(center, a["wilson_radius"])
    a_func = abelian_field(model.h, model.c, grad_h=model.grad_h,
                           grad_g=model.grad_g)
    value = wilson_loop(a_func, loop)
    _write_csv(_analysis_dir(outdir) / "wilson.csv",
               ["center_xi", "center_eta", "radius", "re", "im"],
               [(center[0], center[1], a["wilson_radius"],
                 value.real + 0.0, value.imag + 0.0)])
    if plot:
        from . import plots
        plots.plot_wilson(model, loop, _analysis_dir(outdir) / "wilson.png")
    re_disp = round(value.real, 6) + 0.0  # +0.0 folds -0.0 into +0.0
    im_disp = round(value.imag, 6) + 0.0
    return {"action": "wilson", "value": value,
            "line": f"wilson = {re_disp:.6f}{im_disp:+.6f}i"}


def _run_analytic(cfg: ScenarioConfig, outdir: Path, plot: bool) -> Dict:
    a = cfg.section("analysis")
    grid = build_grid(cfg)
    k, alpha, radius = a["k"], a["alpha"], a["disk_radius"]

    xx, yy = grid.meshgrid()
    rr = np.hypot(xx, yy)
    th = np.arctan2(yy, xx)
    kr_max = k * float(rr.max())
    # the incident-wave Bessel column must out-range k r at the far corner
    m_needed = int(math.ceil(kr_max + 10.0 * kr_max ** (1.0 / 3.0) + 10.0))
    m_init = max(a["m_max"], m_needed)
    solution = solve(RadialPotential.hard_disk(radius), k, alpha=alpha,
                     m_max=m_init, m_cap=max(512, m_init + 16))

    psi = np.zeros(rr.shape, dtype=np.complex128)
    outside = rr >= max(radius, 1e-12)
    psi[outside] = psi_total(rr[outside], th[outside], solution)
    field = SpinorField(grid, np.zeros_like(psi), psi)
    write_field(field, outdir / "snap_0000.field")

    dset = dislocation_lines(psi, grid)
    _write_dislocations(outdir, dset)
    summary: Dict = {"action": "analytic", "k": k, "alpha": alpha,
                     "m_max": solution.m_max, "n_dislocations": len(dset)}
    if a["charge_radius"] > 0:
        result = charge_at_point(
            psi, (a["charge_center_xi"], a["charge_center_eta"]),
            a["charge_radius"], grid=grid)
        _write_csv(_analysis_dir(outdir) / "charge.csv", _CHARGE_HEADER,
                   _charge_rows(result))
        summary["charge"] = result.charge
        summary["charge_converged"] = result.converged
    if plot:
        from . import plots
        plots.plot_wave(psi, grid, outdir / "snap_0000.png")
        plots.plot_dislocations(psi, grid, dset,
                                _analysis_dir(outdir) / "dislocations.png")
    return summary


def _run_surfaces(cfg: ScenarioConfig, outdir: Path, plot: bool) -> Dict:
    grid = build_grid(cfg)
    model = build_model(cfg)
    xx, yy = grid.meshgrid()
    lower, upper = model.eigenvalues(xx, yy)
    scalar = model.scalar_potential(xx, yy)
    rows = zip(xx.ravel(), yy.ravel(), (lower + scalar).ravel(),
               (upper + scalar).ravel())
    _write_csv(_analysis_dir(outdir) / "surfaces.csv",
               ["xi", "eta", "e_ground", "e_excited"],
               [tuple(float(v) for v in row) for row in rows])
    if plot:
        from . import plots
        plots.plot_surfaces(xx, yy, lower + scalar, upper + scalar,
                            _analysis_dir(outdir) / "surfaces.png")
    return {"action": "surfaces", "model": model.label}


def run_scenario(cfg: ScenarioConfig, outdir, plot: bool = False,
                 threads: Optional[int] = None) -> Dict:
    """Execute ``cfg`` and write its artifact set under ``outdir``.

    Returns a summary dict (action, key scalar results, artifact names).
    Identical configs produce byte-identical delimited artifacts.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.echo.ini").write_text(cfg.echo())

    action = cfg.action
    if action == "propagate":
        summary = _run_propagate(cfg, outdir, plot, threads)
    elif action == "crosssection":
        summary = _run_crosssection(cfg, outdir, plot)
    elif action == "wilson":
        summary = _run_wilson(cfg, outdir, plot)
    elif action == "analytic":
        summary = _run_analytic(cfg, outdir, plot)
    elif action == "surfaces":
        summary = _run_surfaces(cfg, outdir, plot)
    else:
        raise ConfigError([f"[run].action: unknown action {action!r}"])
    summary["outdir"] = str(outdir)
    summary["scenario"] = cfg.scenario
    return summary
