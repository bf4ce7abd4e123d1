"""Scalar potentials: harmonic trap, gravity and the optical focusing lens."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .params import SpeciesParams, TrapParams


@dataclass(frozen=True)
class FocusConfig:
    """Optical focusing potential.

    Exactly one of ``power`` (W) or ``xi`` must be given. With ``xi`` the power
    follows from the optimal-power relation once the beam kinetic energy at
    the lens is known. A positive detuning gives a potential that grows away
    from the intensity node at x = 0, i.e. a focusing lens.
    """

    detuning: float = 2 * math.pi * 200e9
    wavelength: float = 312e-6
    sigma_z: float = 25e-6
    power: float | None = None
    xi: float | None = None
    center_z: float = -150e-6

    def __post_init__(self):
        if not self.sigma_z > 0:
            raise ValueError("focus sigma_z must be positive")
        if not self.wavelength > 0:
            raise ValueError("focus wavelength must be positive")
        if (self.power is None) == (self.xi is None):
            raise ValueError("exactly one of focus power or xi must be given")
        if self.power is not None and self.power < 0:
            raise ValueError("focus power must be >= 0")
        if self.xi is not None and self.xi < 0:
            raise ValueError("focus xi must be >= 0")

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def slit(self) -> float:
        return self.wavelength / 2

    def resolved_power(self, species: SpeciesParams, kinetic_energy: float | None = None) -> float:
        if self.power is not None:
            return self.power
        if kinetic_energy is None:
            raise ValueError("kinetic energy at the lens is needed to turn xi into a power")
        return optimal_power(kinetic_energy, self.detuning, species.gamma,
                             species.saturation_intensity, self.k, self.xi, species.hbar)

    def peak_intensity(self, species: SpeciesParams, kinetic_energy: float | None = None) -> float:
        return peak_intensity(self.resolved_power(species, kinetic_energy), self.sigma_z)


def trap_potential(x, y, z, trap: TrapParams, species: SpeciesParams, center=(0.0, 0.0, 0.0)):
    cx, cy, cz = center
    m = species.mass
    return 0.5 * m * (trap.omega_x**2 * (x - cx) ** 2
                      + trap.omega_y**2 * (y - cy) ** 2
                      + trap.omega_z**2 * (z - cz) ** 2)


def gravity_potential(z, species: SpeciesParams, z_ref: float = 0.0):
    """m g (z - z_ref); atoms fall toward decreasing z."""
    return species.mass * species.g_accel * (np.asarray(z) - z_ref)


def free_fall_speed(v_initial: float, drop: float, g: float) -> float:
    """Speed after falling a height ``drop`` starting at speed ``v_initial``."""
    return math.sqrt(v_initial**2 + 2 * g * drop)


def intensity(x, z, I0: float, sigma_z: float, wavelength: float):
    """Harmonic-in-x, Gaussian-in-z intensity; z is measured from the lens center."""
    if not sigma_z > 0:
        raise ValueError("sigma_z must be positive")
    k = 2 * math.pi / wavelength
    return I0 * np.exp(-2.0 * np.asarray(z) ** 2 / sigma_z**2) * (k * np.asarray(x)) ** 2


def saturation_factor(detuning: float, gamma: float) -> float:
    return gamma**2 / (gamma**2 + 4 * detuning**2)


def focusing_potential(x, z, cfg: FocusConfig, species: SpeciesParams, I0: float):
    """(hbar D / 2) ln(1 + s I/I_s) with s = g^2/(g^2 + 4 D^2); z is absolute."""
    I = intensity(x, np.asarray(z) - cfg.center_z, I0, cfg.sigma_z, cfg.wavelength)
    s = saturation_factor(cfg.detuning, species.gamma)
    return 0.5 * species.hbar * cfg.detuning * np.log1p(s * I / species.saturation_intensity)


def optimal_power(kinetic_energy: float, detuning: float, gamma: float, saturation_intensity: float,
                  k: float, xi: float, hbar: float = SpeciesParams.hbar) -> float:
    if detuning == 0:
        raise ValueError("detuning must be nonzero")
    return (xi * (math.pi / 4) * kinetic_energy / (hbar * detuning)
            * (gamma**2 + 4 * detuning**2) / gamma**2 * saturation_intensity / k**2)


def peak_intensity(power: float, sigma_z: float) -> float:
    if not sigma_z > 0:
        raise ValueError("sigma_z must be positive")
    return 8 * power / (math.pi * sigma_z**2)


def lens_curvature(cfg: FocusConfig, species: SpeciesParams, I0: float) -> float:
    """Small-intensity spring constant at the lens center: U ~ kappa x^2 / 2."""
    s = saturation_factor(cfg.detuning, species.gamma)
    return species.hbar * cfg.detuning * s * I0 * cfg.k**2 / species.saturation_intensity


# --- potential stack ------------------------------------------------------------

TERM_COMPONENTS = {"trap": "bec", "gravity": "beam", "focusing": "beam", "absorber": "both"}


@dataclass
class PotentialTerm:
    kind: str
    func: Callable = field(repr=False)
    enabled: bool = True
    z_window: tuple[float, float] | None = None

    @property
    def component(self) -> str:
        return TERM_COMPONENTS[self.kind]


@dataclass
class PotentialStack:
    """Ordered potential terms; each kind acts only on its own component.

    ``func`` receives the sparse coordinate mesh (x, [y,] z) and returns an
    energy array in J (for the absorber: a non-negative damping energy).
    """

    terms: list[PotentialTerm] = field(default_factory=list)

    def __post_init__(self):
        for t in self.terms:
            if t.kind not in TERM_COMPONENTS:
                raise ValueError(f"unknown potential kind {t.kind!r}")

    def add(self, kind: str, func: Callable, enabled: bool = True, z_window=None) -> "PotentialStack":
        if kind not in TERM_COMPONENTS:
            raise ValueError(f"unknown potential kind {kind!r}")
        self.terms.append(PotentialTerm(kind, func, enabled, z_window))
        return self

    def evaluate(self, component: str, mesh: list[np.ndarray], shape) -> np.ndarray:
        """Sum of the enabled real potential terms acting on ``component``."""
        total = np.zeros(shape)
        z = mesh[-1]
        for t in self.terms:
            if not t.enabled or t.kind == "absorber" or t.component != component:
                continue
            v = np.broadcast_to(t.func(*mesh), shape)
            if t.z_window is not None:
                lo, hi = t.z_window
                v = np.where((z >= lo) & (z <= hi), v, 0.0)
            total = total + v
        return total

    def absorber(self, mesh: list[np.ndarray], shape) -> np.ndarray:
        total = np.zeros(shape)
        for t in self.terms:
            if t.enabled and t.kind == "absorber":
                total = total + np.broadcast_to(t.func(*mesh), shape)
        return total
