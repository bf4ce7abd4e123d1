"""Classical point-particle trajectories through the focusing lens.

Used to calibrate the dimensionless power factor ``xi`` that puts the focus
of a parallel fan of atoms on a chosen plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .params import SpeciesParams
from .potentials import FocusConfig, optimal_power, peak_intensity, saturation_factor

ForceFn = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


class TrajectoryError(FloatingPointError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    vx: np.ndarray
    vz: np.ndarray

    def energy(self, mass: float, potential: Callable | None = None, g: float = 0.0) -> np.ndarray:
        e = 0.5 * mass * (self.vx**2 + self.vz**2) + mass * g * self.z
        if potential is not None:
            e = e + potential(self.x, self.z)
        return e


@dataclass
class FocusSearchResult:
    xi: float
    focal_z: float
    rms_spot: float
    iterations: int


@dataclass(frozen=True)
class LensField:
    """Analytic value and gradient of the log-form lens potential."""

    detuning: float
    strength: float  # s I0 k^2 / I_s, in 1/m^2
    sigma_z: float
    center_z: float
    hbar: float

    @classmethod
    def from_config(cls, cfg: FocusConfig, species: SpeciesParams, I0: float) -> "LensField":
        s = saturation_factor(cfg.detuning, species.gamma)
        return cls(cfg.detuning, s * I0 * cfg.k**2 / species.saturation_intensity,
                   cfg.sigma_z, cfg.center_z, species.hbar)

    def _arg(self, x, z):
        zeta = z - self.center_z
        env = np.exp(-2 * zeta**2 / self.sigma_z**2)
        return zeta, env, self.strength * x**2 * env

    def potential(self, x, z):
        _, _, a = self._arg(x, z)
        return 0.5 * self.hbar * self.detuning * np.log1p(a)

    def force(self, x, z):
        zeta, env, a = self._arg(x, z)
        pref = 0.5 * self.hbar * self.detuning / (1 + a)
        fx = -pref * 2 * self.strength * x * env
        fz = pref * a * 4 * zeta / self.sigma_z**2
        return fx, fz


def _verlet(state, force: ForceFn, mass: float, g: float, dt: float):
    x, z, vx, vz = state
    fx, fz = force(x, z)
    ax, az = fx / mass, fz / mass - g
    vx_h = vx + 0.5 * dt * ax
    vz_h = vz + 0.5 * dt * az
    x = x + dt * vx_h
    z = z + dt * vz_h
    fx, fz = force(x, z)
    ax, az = fx / mass, fz / mass - g
    if not (np.all(np.isfinite(ax)) and np.all(np.isfinite(az))):
        bad = np.flatnonzero(~(np.isfinite(ax) & np.isfinite(az)))[:1]
        raise TrajectoryError(f"non-finite force at x={np.ravel(x)[bad]}, z={np.ravel(z)[bad]}")
    return x, z, vx_h + 0.5 * dt * ax, vz_h + 0.5 * dt * az


def _no_force(x, z):
    return np.zeros_like(x), np.zeros_like(z)


def integrate_trajectory(initial, force: ForceFn | None, mass: float, dt: float, t_end: float,
                         g: float = 0.0) -> Trajectory:
    """Velocity-Verlet integration of m r'' = F(r) - m g z_hat.

    ``initial`` is (x, z, vx, vz).
    """
    force = force or _no_force
    n = int(math.ceil(t_end / dt - 1e-9))
    out = np.empty((n + 1, 4))
    state = tuple(np.asarray(v, dtype=float) for v in initial)
    out[0] = [float(v) for v in state]
    for i in range(1, n + 1):
        state = _verlet(state, force, mass, g, dt)
        out[i] = [float(v) for v in state]
    t = np.arange(n + 1) * dt
    return Trajectory(t, out[:, 0], out[:, 1], out[:, 2], out[:, 3])


def _fan_crossing(x0: np.ndarray, z0: float, vz0: float, force: ForceFn, mass: float, g: float,
                  dt: float, target_z: float, max_steps: int = 10_000_000):
    """Integrate a fan of rays downward; return x at the target plane and the
    minimum-rms plane along the way."""
    x = x0.astype(float).copy()
    z = np.full_like(x, z0)
    vx = np.zeros_like(x)
    vz = np.full_like(x, vz0)
    best = (np.inf, z0)
    for _ in range(max_steps):
        xp, zp = x, z
        x, z, vx, vz = _verlet((x, z, vx, vz), force, mass, g, dt)
        spread = float(np.std(x))
        if spread < best[0]:
            best = (spread, float(np.mean(z)))
        if np.all(z <= target_z):
            w = (zp - target_z) / (zp - z)
            xt = xp + w * (x - xp)
            return xt, best
    raise CalibrationError("fan did not reach the target plane")


def calibrate_xi(target_z: float, geometry: FocusConfig, species: SpeciesParams, speed_at_center: float,
                 beam_halfwidth: float, *, gravity: bool = False, n_rays: int = 21,
                 bracket: tuple[float, float] = (0.0, 20.0), steps_per_waist: int = 200,
                 tol: float = 1e-6) -> FocusSearchResult:
    """Find xi whose fan focus lands on ``target_z``.

    Rays start at ``center_z + 3 sigma_z`` with zero transverse velocity and
    offsets uniform in [-beam_halfwidth, beam_halfwidth]. With ``gravity``
    off the longitudinal speed is constant at ``speed_at_center``; with it on
    the entry speed follows from free-fall kinematics and the lens sees the
    accelerating beam. The objective is the rms transverse spread at
    ``target_z``; the bracket is scanned for the first sign change of the
    fan's mean signed offset and then refined by bounded Brent minimization.
    """
    lo, hi = bracket
    if not (geometry.center_z - 3 * geometry.sigma_z < target_z < geometry.center_z + 3 * geometry.sigma_z):
        raise ValueError("target_z must lie within the lens support")
    m, g = species.mass, species.g_accel if gravity else 0.0
    E0 = 0.5 * m * speed_at_center**2
    z0 = geometry.center_z + 3 * geometry.sigma_z
    vz0 = -math.sqrt(max(speed_at_center**2 - 2 * g * (z0 - geometry.center_z), 0.0))
    if vz0 == 0.0:
        raise ValueError("beam would not reach the lens entry")
    dt = geometry.sigma_z / speed_at_center / steps_per_waist
    x0 = np.linspace(-beam_halfwidth, beam_halfwidth, n_rays)
    calls = 0

    def shoot(xi):
        nonlocal calls
        calls += 1
        P = optimal_power(E0, geometry.detuning, species.gamma, species.saturation_intensity,
                          geometry.k, xi, species.hbar)
        lens = LensField.from_config(replace(geometry, power=P, xi=None), species, peak_intensity(P, geometry.sigma_z))
        return _fan_crossing(x0, z0, vz0, lens.force, m, g, dt, target_z)

    def signed(xi):
        xt, _ = shoot(xi)
        return float(np.dot(xt, x0))

    # coarse scan for the first crossing of the axis at the target
    scan = np.linspace(lo, hi, 41)[1:]
    prev_xi, prev_val = lo, float(np.dot(x0, x0))
    found = None
    for xi in scan:
        val = signed(xi)
        if val <= 0 < prev_val:
            found = (prev_xi, xi)
            break
        prev_xi, prev_val = xi, val
    if found is None:
        raise CalibrationError(f"no focus on z={target_z:g} for xi in ({lo:g}, {hi:g}]")

    a, b = found
    res = minimize_scalar(lambda xi: float(np.std(shoot(xi)[0])), bounds=(a, b), method="bounded",
                          options={"xatol": tol})
    xi = float(res.x)
    xt, (best_rms, best_z) = shoot(xi)
    return FocusSearchResult(xi=xi, focal_z=best_z, rms_spot=float(np.std(xt)), iterations=calls)


def focal_plane(xi: float, geometry: FocusConfig, species: SpeciesParams, speed_at_center: float,
                beam_halfwidth: float, *, gravity: bool = False, n_rays: int = 21,
                steps_per_waist: int = 200) -> float:
    """z of minimum fan spread for a given xi (searched down to 3 sigma below center)."""
    m, g = species.mass, species.g_accel if gravity else 0.0
    E0 = 0.5 * m * speed_at_center**2
    z0 = geometry.center_z + 3 * geometry.sigma_z
    vz0 = -math.sqrt(max(speed_at_center**2 - 2 * g * (z0 - geometry.center_z), 0.0))
    P = optimal_power(E0, geometry.detuning, species.gamma, species.saturation_intensity,
                      geometry.k, xi, species.hbar)
    lens = LensField.from_config(replace(geometry, power=P, xi=None), species, peak_intensity(P, geometry.sigma_z))
    dt = geometry.sigma_z / speed_at_center / steps_per_waist
    x0 = np.linspace(-beam_halfwidth, beam_halfwidth, n_rays)
    _, (_, z_best) = _fan_crossing(x0, z0, vz0, lens.force, m, g, dt, geometry.center_z - 3 * geometry.sigma_z)
    return z_best
