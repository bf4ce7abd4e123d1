"""Scenario configuration, orchestration, sweeps, checkpoints and the ``atomlens`` CLI.

Configs are JSON with unit-suffixed keys. Physics inputs have no defaults
apart from the bundled 85Rb constants; numerical knobs that are not physics
(edge threshold, ground-state tolerance, output prefix) do.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .bragg import BraggConfig, kick_to_order_angle
from .classical import calibrate_xi
from .gpe import (ConvergenceError, DiagnosticRecord, LossModel, Physics, StepperConfig, TwoStateSystem,
                  compact_ground_state, evolve)
from .grid import SimGrid, read_snapshot, write_snapshot
from .params import BOHR_RADIUS, BeamParams, SpeciesParams, TrapParams, detuning_from_ghz
from .potentials import FocusConfig

log = logging.getLogger("atomlens")

SCENARIOS = ("free", "focus", "calibrate-xi")
TIMESERIES_COLUMNS = ("t_s", "z_center_m", "dx_m", "dvx_m_s", "m2", "n_beam")
SUMMARY_COLUMNS = ("fwhm_m", "peak_density_per_um2", "n_beam", "fit_residual")
PROFILE_COLUMNS = ("z_m", "line_density_per_m", "dx_m", "dvx_m_s", "m2")


class ConfigError(ValueError):
    """Invalid or incomplete scenario config; the message names the key path."""


# --- config parsing ---------------------------------------------------------------

_MISSING = object()


def _get(cfg: dict, path: str, default=_MISSING):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is _MISSING:
                raise ConfigError(f"missing required config key '{path}'")
            return default
        node = node[part]
    return node


def _num(cfg, path, default=_MISSING, kind=float):
    v = _get(cfg, path, default)
    if v is None and default is None:
        return None
    try:
        if kind is int:
            if isinstance(v, bool) or int(v) != v:
                raise TypeError
            return int(v)
        if isinstance(v, bool):
            raise TypeError
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"config key '{path}' must be a number, got {v!r}") from None


def _one_of(cfg, section: str, names: tuple[str, ...]) -> str:
    present = [n for n in names if n in cfg.get(section, {})]
    if len(present) != 1:
        opts = " or ".join(f"'{section}.{n}'" for n in names)
        what = "missing" if not present else "conflicting"
        raise ConfigError(f"{what} config keys: give exactly one of {opts}")
    return present[0]


def set_path(cfg: dict, path: str, value) -> None:
    """Set a dotted key, creating intermediate sections."""
    parts = path.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


@dataclass
class FreeSettings:
    stop_z: float
    observe_z: tuple[float, ...] = ()
    zones: dict = field(default_factory=lambda: dict(diag.ZONES))


@dataclass
class CalibrateSettings:
    target_z: float
    beam_halfwidth: float
    gravity: bool = False
    n_rays: int = 21
    bracket: tuple[float, float] = (0.0, 20.0)


@dataclass
class Scenario:
    kind: str
    physics: Physics
    grid: SimGrid | None
    stepper: StepperConfig | None
    max_steps: int = 100_000
    edge_fraction: float = 1e-3
    ground_tolerance: float = 1e-10
    free: FreeSettings | None = None
    calibrate: CalibrateSettings | None = None
    prefix: str = "run"
    write_profile: bool = True
    config: dict = field(default_factory=dict, repr=False)


def _species(cfg) -> SpeciesParams:
    d = SpeciesParams()
    keys = {"mass_kg": "mass", "gamma_s": "gamma", "saturation_intensity_w_m2": "saturation_intensity",
            "d2_wavelength_m": "d2_wavelength", "three_body_k_m6_s": "three_body_K", "g_m_s2": "g_accel"}
    sec = cfg.get("species", {})
    unknown = set(sec) - set(keys)
    if unknown:
        raise ConfigError(f"unknown config key 'species.{sorted(unknown)[0]}'")
    kw = {attr: _num(cfg, f"species.{k}") for k, attr in keys.items() if k in sec}
    try:
        return replace(d, **kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _bragg(cfg) -> BraggConfig:
    lam = _num(cfg, "bragg.lambda_m")
    sec = cfg.get("bragg", {})
    if "kick_hbar_k" in sec:
        if "alpha_rad" in sec or "order" in sec:
            raise ConfigError("conflicting config keys: 'bragg.kick_hbar_k' excludes 'bragg.alpha_rad'/'bragg.order'")
        try:
            order, angle = kick_to_order_angle(_num(cfg, "bragg.kick_hbar_k"))
        except ValueError as e:
            raise ConfigError(f"config key 'bragg.kick_hbar_k': {e}") from None
    else:
        angle = _num(cfg, "bragg.alpha_rad")
        order = _num(cfg, "bragg.order", kind=int)
    which = _one_of(cfg, "bragg", ("rabi_rad_s", "delta_z_m"))
    val = _num(cfg, f"bragg.{which}")
    kw = {"rabi": val} if which == "rabi_rad_s" else {"resonance_width": val}
    try:
        return BraggConfig(wavelength=lam, angle=angle, order=order, resonance_z=_num(cfg, "bragg.resonance_z_m"), **kw)
    except ValueError as e:
        raise ConfigError(f"bragg: {e}") from None


def _focus(cfg) -> FocusConfig | None:
    if "focus" not in cfg or cfg["focus"] is None:
        return None
    which = _one_of(cfg, "focus", ("detuning_rad_s", "detuning_ghz"))
    if which == "detuning_rad_s":
        detuning = _num(cfg, "focus.detuning_rad_s")
    else:
        conv = _get(cfg, "focus.detuning_convention", "angular")
        try:
            detuning = detuning_from_ghz(_num(cfg, "focus.detuning_ghz"), conv)
        except ValueError as e:
            raise ConfigError(f"config key 'focus.detuning_convention': {e}") from None
    strength = _one_of(cfg, "focus", ("power_w", "xi"))
    kw = {"power": _num(cfg, "focus.power_w")} if strength == "power_w" else {"xi": _num(cfg, "focus.xi")}
    try:
        return FocusConfig(detuning=detuning, wavelength=_num(cfg, "focus.lambda_m"),
                           sigma_z=_num(cfg, "focus.sigma_z_m"), center_z=_num(cfg, "focus.center_z_m"), **kw)
    except ValueError as e:
        raise ConfigError(f"focus: {e}") from None


def parse_scenario(cfg: dict) -> Scenario:
    """Validate a config dict and build the scenario it describes."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = _get(cfg, "scenario")
    if kind not in SCENARIOS:
        raise ConfigError(f"config key 'scenario' must be one of {SCENARIOS}, got {kind!r}")
    species = _species(cfg)
    try:
        trap = TrapParams(omega_x=_num(cfg, "trap.omega_x_rad_s"), omega_y=_num(cfg, "trap.omega_y_rad_s"),
                          omega_z=_num(cfg, "trap.omega_z_rad_s"), atom_number=_num(cfg, "trap.atom_number"),
                          a_s_bec=_num(cfg, "trap.a_s_bec_a0") * BOHR_RADIUS)
        beam = BeamParams(a_s_laser=_num(cfg, "beam.a_s_laser_a0") * BOHR_RADIUS)
        loss = LossModel(K=species.three_body_K if _get(cfg, "loss.enabled", True) else 0.0,
                         convention=_get(cfg, "loss.convention", "standard_half_hbar"))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None
    bragg = _bragg(cfg)
    focus = _focus(cfg)
    if kind == "focus" and focus is None:
        raise ConfigError("missing required config key 'focus'")
    sigma_y = _get(cfg, "grid.sigma_y_m", None)
    try:
        physics = Physics(species=species, trap=trap, beam=beam, bragg=bragg, focus=focus, loss=loss,
                          sigma_y=None if sigma_y is None else float(sigma_y),
                          gravity=bool(_get(cfg, "physics.gravity", True)),
                          trap_on=bool(_get(cfg, "physics.trap_on", True)),
                          absorber_rate=_num(cfg, "grid.absorber_rate_s", 0.0),
                          absorber_fraction=_num(cfg, "grid.absorber_fraction", 0.08))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Scenario(kind=kind, physics=physics, grid=None, stepper=None, config=copy.deepcopy(cfg),
                   prefix=str(_get(cfg, "outputs.prefix", "run")),
                   write_profile=bool(_get(cfg, "outputs.profile", True)))

    if kind == "calibrate-xi":
        if focus is None:
            raise ConfigError("missing required config key 'focus'")
        br = _get(cfg, "calibrate.xi_bracket", [0.0, 20.0])
        out.calibrate = CalibrateSettings(target_z=_num(cfg, "calibrate.target_z_m"),
                                          beam_halfwidth=_num(cfg, "calibrate.beam_halfwidth_m"),
                                          gravity=bool(_get(cfg, "calibrate.gravity", False)),
                                          n_rays=_num(cfg, "calibrate.n_rays", 21, kind=int),
                                          bracket=(float(br[0]), float(br[1])))
        return out

    points = _get(cfg, "grid.points")
    extent = _get(cfg, "grid.extent_m")
    center = _get(cfg, "grid.center_m")
    try:
        out.grid = SimGrid(tuple(points), tuple(extent), tuple(center))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"grid: {e}") from None
    try:
        out.stepper = StepperConfig(dt=_num(cfg, "stepper.dt_s"),
                                    steps_per_diagnostic=_num(cfg, "stepper.steps_per_diagnostic", kind=int),
                                    pump_renormalize=bool(_get(cfg, "stepper.pump_renormalize", True)),
                                    ramp_time=_num(cfg, "stepper.ramp_time_s"),
                                    frame=_get(cfg, "stepper.frame", "envelope"),
                                    max_nonlinear_phase=_num(cfg, "stepper.max_nonlinear_phase", 0.1))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"stepper: {e}") from None
    out.max_steps = _num(cfg, "stepper.max_steps", kind=int)
    out.edge_fraction = _num(cfg, "stepper.edge_fraction", 1e-3)
    out.ground_tolerance = _num(cfg, "stepper.ground_tolerance", 1e-10)
    if kind == "free":
        zones = _get(cfg, "free.zones_m", None)
        out.free = FreeSettings(stop_z=_num(cfg, "free.stop_z_m"),
                                observe_z=tuple(float(z) for z in _get(cfg, "free.observe_z_m", [])),
                                zones=dict(diag.ZONES) if zones is None
                                else {k: (float(v[0]), float(v[1])) for k, v in zones.items()})
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None


# --- ground-state cache -------------------------------------------------------------

_GROUND_CACHE: dict = {}


def cached_ground_state(grid: SimGrid, physics: Physics, tolerance: float):
    """Ground state and mu, memoized per process (the solve is deterministic)."""
    key = (grid, physics.species, physics.trap, physics.reduction_width(), physics.trap_center_z,
           physics.trap_on, tolerance)
    if key not in _GROUND_CACHE:
        if len(_GROUND_CACHE) > 8:
            _GROUND_CACHE.clear()
        _GROUND_CACHE[key] = compact_ground_state(grid, physics, tolerance=tolerance)
    psi0, mu = _GROUND_CACHE[key]
    return psi0.copy(), mu


# --- reports --------------------------------------------------------------------------

@dataclass
class FocusSummary:
    fwhm_m: float
    peak_density_per_um2: float
    n_beam: float
    fit_residual: float
    direct_fwhm_m: float
    focal_z_m: float


@dataclass
class RunReport:
    kind: str
    config: dict
    resolved: dict
    timeseries: list[DiagnosticRecord]
    summary: FocusSummary | None = None
    profile: dict | None = None
    planes: list[dict] = field(default_factory=list)
    zones: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    steps: int = 0
    stop_reason: str = ""
    snapshots: list[str] = field(default_factory=list)
    system: TwoStateSystem | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"kind": self.kind, "config": self.config, "resolved": self.resolved,
                "summary": None if self.summary is None else asdict(self.summary),
                "planes": self.planes, "zones": self.zones, "wall_time_s": self.wall_time_s,
                "steps": self.steps, "stop_reason": self.stop_reason, "snapshots": self.snapshots,
                "timeseries_rows": len(self.timeseries)}


def resolved_parameters(scn: Scenario, mu: float | None = None) -> dict:
    ph = scn.physics
    sp = ph.species
    out = {"rabi_rad_s": ph.bragg.rabi, "resonance_width_m": ph.bragg.resonance_width,
           "bragg_order": ph.bragg.order, "bragg_angle_rad": ph.bragg.angle, "kick_rad_m": ph.bragg.kick(),
           "sigma_y_m": ph.reduction_width(), "loss_convention": ph.loss.convention}
    if ph.focus is not None:
        v = ph.entry_speed()
        out["entry_speed_m_s"] = v
        out["focus_power_w"] = ph.focus.resolved_power(sp, 0.5 * sp.mass * v**2)
        out["focus_peak_intensity_w_m2"] = ph.focus_intensity()
    if scn.grid is not None:
        out["grid_points"] = list(scn.grid.points)
        out["grid_spacing_m"] = list(scn.grid.spacing)
    if scn.stepper is not None:
        out["dt_s"] = scn.stepper.dt
    if mu is not None:
        out["mu_over_hbar_rad_s"] = mu / sp.hbar
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, columns, rows) -> None:
    """RFC-4180 CSV (CRLF line ends, header row) with shortest round-trip floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            values = [row[c] for c in columns] if isinstance(row, dict) else row
            w.writerow([_fmt(v) for v in values])


def write_report(report: RunReport, out_dir, prefix: str, profile: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    p = out_dir / f"{prefix}_timeseries.csv"
    write_csv(p, TIMESERIES_COLUMNS, [{c: getattr(r, c) for c in TIMESERIES_COLUMNS} for r in report.timeseries])
    files.append(p)
    if report.summary is not None:
        p = out_dir / f"{prefix}_focus.csv"
        write_csv(p, SUMMARY_COLUMNS, [{c: getattr(report.summary, c) for c in SUMMARY_COLUMNS}])
        files.append(p)
    if profile and report.profile is not None:
        p = out_dir / f"{prefix}_profile.csv"
        pr = report.profile
        rows = zip(pr["z_m"], pr["line_density"], pr["dx_m"], pr["dvx_m_s"], pr["m2"])
        write_csv(p, PROFILE_COLUMNS, rows)
        files.append(p)
    if report.planes:
        p = out_dir / f"{prefix}_planes.csv"
        write_csv(p, ("z_m", "dx_m", "dvx_m_s", "m2"), report.planes)
        files.append(p)
    if report.zones:
        p = out_dir / f"{prefix}_zones.csv"
        write_csv(p, ("zone", "z_lo_m", "z_hi_m", "theta_rad"),
                  [{"zone": k, **v} for k, v in report.zones.items()])
        files.append(p)
    p = out_dir / f"{prefix}_report.json"
    p.write_text(json.dumps(report.to_json(), indent=2, default=float))
    files.append(p)
    return files


# --- scenario execution -------------------------------------------------------------

def leading_edge(system: TwoStateSystem, fraction: float = 1e-3) -> float:
    """Lowest z whose beam line density exceeds ``fraction`` of its maximum (inf if empty)."""
    n = system.psin.real**2 + system.psin.imag**2
    line = n.reshape(-1, n.shape[-1]).sum(axis=0)
    top = line.max()
    if not top > 0:
        return math.inf
    z = system.grid.coord(system.grid.dims - 1)
    return float(z[line > fraction * top].min())


def _prepare(scn: Scenario, resume=None) -> TwoStateSystem:
    psi0, mu = cached_ground_state(scn.grid, scn.physics, scn.ground_tolerance)
    system = TwoStateSystem(scn.grid, scn.physics, psi0, scn.grid.zeros(), mu)
    if resume is not None:
        snap = read_snapshot(resume) if not hasattr(resume, "psi0") else resume
        snap.check_grid(scn.grid)
        step = round(snap.time / scn.stepper.dt)
        if not math.isclose(step * scn.stepper.dt, snap.time, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError(f"snapshot time {snap.time!r} is not a multiple of dt={scn.stepper.dt!r}")
        system.psi0, system.psin = snap.psi0.copy(), snap.psin.copy()
        system.step, system.time = step, step * scn.stepper.dt
    return system


def _evolve_until(scn: Scenario, system: TwoStateSystem, stop_z: float, out_dir, snapshot_every, prefix):
    every = scn.stepper.steps_per_diagnostic
    if snapshot_every is not None and (snapshot_every <= 0 or snapshot_every % every):
        raise ConfigError(f"--snapshot-every must be a positive multiple of stepper.steps_per_diagnostic ({every})")
    written: list[str] = []

    def on_diag(sy, rec):
        log.info("t=%.4g s step=%d z_c=%.4g m dx=%.4g m M2=%.4g n_beam=%.6g", rec.t_s, sy.step, rec.z_center_m,
                 rec.dx_m, rec.m2, rec.n_beam)
        if snapshot_every and sy.step > 0 and sy.step % snapshot_every == 0:
            p = Path(out_dir) / f"{prefix}_{sy.step:08d}.alfs"
            p.parent.mkdir(parents=True, exist_ok=True)
            write_snapshot(p, sy.grid, sy.time, sy.psi0, sy.psin)
            written.append(str(p))

    def stop(sy):
        return leading_edge(sy, scn.edge_fraction) < stop_z

    records = evolve(system, scn.stepper, stop=stop, max_steps=scn.max_steps, on_diagnostic=on_diag)
    return records, written


def outcouple_and_focus(scn: Scenario, *, out_dir=".", snapshot_every: int | None = None,
                        resume=None) -> RunReport:
    """Outcouple, fall and focus until the beam's leading edge is one waist past the focal plane."""
    if scn.kind != "focus":
        raise ValueError("outcouple_and_focus needs a focus scenario")
    t0 = time.perf_counter()
    focus = scn.physics.focus
    system = _prepare(scn, resume)
    records, snaps = _evolve_until(scn, system, focus.center_z - focus.sigma_z, out_dir, snapshot_every, scn.prefix)
    f = system.fieldn()
    sl = diag.beam_slice(f, focus.center_z)
    fit = diag.fit_gaussian(sl)
    summary = FocusSummary(fwhm_m=fit.fwhm, peak_density_per_um2=diag.peak_density(f, focus.center_z),
                           n_beam=diag.beam_atoms(f, (focus.center_z, scn.physics.bragg.resonance_z)),
                           fit_residual=fit.residual_rms, direct_fwhm_m=fit.direct_fwhm, focal_z_m=sl.z)
    return RunReport(kind="focus", config=scn.config, resolved=resolved_parameters(scn, system.mu),
                     timeseries=records, summary=summary, profile=diag.width_profile(f, scn.physics.species),
                     wall_time_s=time.perf_counter() - t0, steps=system.step, stop_reason="leading edge past focus",
                     snapshots=snaps, system=system)


def free_propagation(scn: Scenario, *, out_dir=".", snapshot_every: int | None = None, resume=None) -> RunReport:
    """Outcouple and fall without the lens; report widths, M^2 at planes and zone divergences."""
    if scn.kind != "free":
        raise ValueError("free_propagation needs a free scenario")
    t0 = time.perf_counter()
    system = _prepare(scn, resume)
    records, snaps = _evolve_until(scn, system, scn.free.stop_z, out_dir, snapshot_every, scn.prefix)
    f = system.fieldn()
    prof = diag.width_profile(f, scn.physics.species)
    z = prof["z_m"]
    planes = []
    for zo in scn.free.observe_z:
        j = int(np.argmin(np.abs(z - zo)))
        planes.append({"z_m": float(z[j]), "dx_m": float(prof["dx_m"][j]), "dvx_m_s": float(prof["dvx_m_s"][j]),
                       "m2": float(prof["m2"][j])})
    zones = {}
    for name, (lo, hi) in scn.free.zones.items():
        try:
            theta = diag.divergence_fit(z, prof["dx_m"], (lo, hi))
        except ValueError:
            theta = float("nan")
        zones[name] = {"z_lo_m": lo, "z_hi_m": hi, "theta_rad": theta}
    return RunReport(kind="free", config=scn.config, resolved=resolved_parameters(scn, system.mu),
                     timeseries=records, profile=prof, planes=planes, zones=zones,
                     wall_time_s=time.perf_counter() - t0, steps=system.step,
                     stop_reason="leading edge past stop plane", snapshots=snaps, system=system)


def run_calibration(scn: Scenario):
    c = scn.calibrate
    ph = scn.physics
    return calibrate_xi(c.target_z, ph.focus, ph.species, ph.entry_speed(), c.beam_halfwidth,
                        gravity=c.gravity, n_rays=c.n_rays, bracket=c.bracket)


def run_scenario(scn: Scenario, **kw) -> RunReport:
    if scn.kind == "focus":
        return outcouple_and_focus(scn, **kw)
    if scn.kind == "free":
        return free_propagation(scn, **kw)
    raise ValueError(f"scenario kind {scn.kind!r} is not a time evolution")


# --- sweeps ---------------------------------------------------------------------------

def sweep_points(cfg: dict) -> tuple[list[str], list[tuple]]:
    axes = _get(cfg, "sweep.axes")
    if not isinstance(axes, list) or not 1 <= len(axes) <= 2:
        raise ConfigError("config key 'sweep.axes' must list one or two axes")
    paths, values = [], []
    for i, ax in enumerate(axes):
        paths.append(str(_get(ax, "path") if isinstance(ax, dict) else _get({}, f"sweep.axes[{i}].path")))
        vals = ax.get("values")
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"config key 'sweep.axes[{i}].values' must be a non-empty list")
        values.append(vals)
    return paths, list(itertools.product(*values))


def _sweep_one(args):
    index, cfg, out_dir = args
    logging.getLogger("atomlens").setLevel(logging.WARNING)
    try:
        scn = parse_scenario(cfg)
        report = run_scenario(scn, out_dir=out_dir)
        write_report(report, out_dir, scn.prefix, scn.write_profile)
        s = report.summary
        if s is None:
            return index, {"fwhm_m": float("nan"), "peak_density_per_um2": float("nan"),
                           "n_beam": report.timeseries[-1].n_beam, "fit_residual": float("nan"), "error": ""}
        return index, {**{c: getattr(s, c) for c in SUMMARY_COLUMNS}, "error": ""}
    except Exception as e:  # recorded per row; the sweep carries on
        return index, {"fwhm_m": float("nan"), "peak_density_per_um2": float("nan"), "n_beam": float("nan"),
                       "fit_residual": float("nan"), "error": f"{type(e).__name__}: {e}"}


def sweep(cfg: dict, out_dir=".", workers: int = 1) -> list[dict]:
    """Cartesian-product sweep; writes per-point outputs and a combined sweep.csv."""
    paths, points = sweep_points(cfg)
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    parse_scenario(base)  # fail fast on the shared part of the config
    prefix = str(_get(cfg, "outputs.prefix", "sweep"))
    jobs = []
    for i, vals in enumerate(points):
        c = copy.deepcopy(base)
        for p, v in zip(paths, vals):
            set_path(c, p, v)
        set_path(c, "outputs.prefix", f"{prefix}_{i:03d}")
        jobs.append((i, c, str(out_dir)))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_sweep_one, jobs))
    else:
        results = dict(map(_sweep_one, jobs))
    rows = []
    for i, vals in enumerate(points):
        rows.append({**dict(zip(paths, vals)), **results[i]})
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    write_csv(Path(out_dir) / f"{prefix}.csv", tuple(paths) + SUMMARY_COLUMNS + ("error",), rows)
    return rows


# --- CLI ------------------------------------------------------------------------------

def _out_dir(args) -> str:
    return args.out_dir or os.environ.get("ATOMLENS_OUT_DIR") or "."


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="atomlens", description="Atom-laser outcoupling and focusing simulations.")
    p.add_argument("--out-dir", help="output directory (default: $ATOMLENS_OUT_DIR or .)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--snapshot-every", type=int, default=None, metavar="STEPS",
                   help="write an ALFS snapshot every STEPS steps")
    p.add_argument("-v", "--verbose", action="store_true", help="log every diagnostic to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run a free or focus scenario"), ("sweep", "run a parameter sweep"),
                       ("calibrate-xi", "calibrate the lens power factor xi")):
        s = sub.add_parser(name, help=text)
        s.add_argument("config")
    r = sub.add_parser("resume", help="resume a run from a snapshot")
    r.add_argument("snapshot")
    r.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    out_dir = _out_dir(args)
    try:
        cfg = load_config(args.config)
        if args.command == "sweep":
            rows = sweep(cfg, out_dir, max(1, args.workers))
            failed = sum(1 for r in rows if r["error"])
            print(f"{len(rows)} sweep points, {failed} failed", file=sys.stderr)
            return 0
        scn = parse_scenario(cfg)
        if args.command == "calibrate-xi" or scn.kind == "calibrate-xi":
            if scn.kind != "calibrate-xi":
                raise ConfigError("config key 'scenario' must be 'calibrate-xi' for this command")
            res = run_calibration(scn)
            w = csv.writer(sys.stdout, lineterminator="\r\n")
            w.writerow(("xi", "focal_z_m", "rms_spot_m"))
            w.writerow((repr(res.xi), repr(res.focal_z), repr(res.rms_spot)))
            return 0
        resume = args.snapshot if args.command == "resume" else None
        report = run_scenario(scn, out_dir=out_dir, snapshot_every=args.snapshot_every, resume=resume)
        for f in write_report(report, out_dir, scn.prefix, scn.write_profile):
            print(f)
        return 0
    except ConfigError as e:
        print(f"atomlens: config error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ConvergenceError, RuntimeError) as e:
        print(f"atomlens: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
