"""Physical constants and experiment parameters (SI units throughout)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

HBAR = 1.054571817e-34  # J s
BOHR_RADIUS = 5.29177210903e-11  # m
RB85_MASS = 1.40999e-25  # kg

# a_s guard for the atom-laser beam, in Bohr radii
MAX_LASER_SCATTERING_BOHR = 500.0


@dataclass(frozen=True)
class SpeciesParams:
    """Atomic species constants. Defaults are for 85Rb on the D2 line."""

    mass: float = RB85_MASS
    gamma: float = 38e6  # natural linewidth, taken as an angular rate (1/s)
    saturation_intensity: float = 16.7  # W/m^2
    d2_wavelength: float = 780.027e-9  # m
    three_body_K: float = 4e-41  # m^6/s
    bohr_radius: float = BOHR_RADIUS
    hbar: float = HBAR
    g_accel: float = 9.8  # m/s^2

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"species.{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class TrapParams:
    omega_x: float = 2 * math.pi * 70
    omega_y: float = 2 * math.pi * 10
    omega_z: float = 2 * math.pi * 70
    atom_number: float = 1e5
    a_s_bec: float = 100 * BOHR_RADIUS

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "omega_z"):
            if not getattr(self, name) > 0:
                raise ValueError(f"trap.{name} must be positive")
        if not self.atom_number >= 1:
            raise ValueError("trap.atom_number must be >= 1")

    @property
    def omega_bar(self) -> float:
        return (self.omega_x * self.omega_y * self.omega_z) ** (1.0 / 3.0)


@dataclass(frozen=True)
class BeamParams:
    a_s_laser: float = 0.0
    bohr_radius: float = field(default=BOHR_RADIUS, repr=False)

    def __post_init__(self):
        if abs(self.a_s_laser) > MAX_LASER_SCATTERING_BOHR * self.bohr_radius * (1 + 1e-12):
            raise ValueError(
                f"beam.a_s_laser_m={self.a_s_laser!r} exceeds the "
                f"{MAX_LASER_SCATTERING_BOHR:g} a0 guard"
            )

    def interaction_u(self, species: SpeciesParams) -> float:
        return interaction_strength(self.a_s_laser, species)


def interaction_strength(a_s: float, species: SpeciesParams) -> float:
    """Contact coupling u = 4 pi hbar^2 a_s / m in J m^3."""
    return 4.0 * math.pi * species.hbar**2 * a_s / species.mass


def rabi_from_khz(value_khz: float) -> float:
    """Rabi frequencies quoted in "kHz" are read as units of 1e3 rad/s."""
    return value_khz * 1e3


def detuning_from_ghz(value_ghz: float, convention: str = "angular") -> float:
    """Convert a detuning quoted in "GHz" to rad/s.

    ``angular`` multiplies by 2 pi (the default); ``literal`` takes the number
    as 1e9 rad/s.
    """
    if convention == "angular":
        return 2 * math.pi * value_ghz * 1e9
    if convention == "literal":
        return value_ghz * 1e9
    raise ValueError(f"unknown detuning convention {convention!r}")


def thomas_fermi_mu_3d(trap: TrapParams, species: SpeciesParams) -> float:
    """3D Thomas-Fermi chemical potential (J)."""
    wbar = trap.omega_bar
    abar = math.sqrt(species.hbar / (species.mass * wbar))
    return 0.5 * species.hbar * wbar * (15 * trap.atom_number * trap.a_s_bec / abar) ** 0.4


def thomas_fermi_radius(mu: float, omega: float, species: SpeciesParams) -> float:
    return math.sqrt(2 * mu / (species.mass * omega**2))
