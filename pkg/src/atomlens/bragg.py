"""Bragg outcoupling kinematics and the resonance-width calibration.

The kicked component travels along -z (the direction of fall), so the
transferred wavevector is n*q*(-z_hat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .params import SpeciesParams, TrapParams


@dataclass(frozen=True)
class BraggConfig:
    wavelength: float = 780.027e-9
    angle: float = math.pi
    order: int = 1
    rabi: float | None = None
    resonance_width: float | None = None
    resonance_z: float = 150e-6

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("bragg wavelength must be positive")
        if not 0 <= self.angle <= math.pi:
            raise ValueError("bragg angle must lie in [0, pi]")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("bragg order must be a positive integer")
        if self.rabi is not None and self.rabi < 0:
            raise ValueError("rabi frequency must be >= 0")
        if self.resonance_width is not None and not self.resonance_width > 0:
            raise ValueError("resonance width must be > 0")

    @property
    def q(self) -> float:
        return bragg_wavenumber(self.wavelength, self.angle)

    def kick(self) -> float:
        """Magnitude of the transferred wavenumber n*q (rad/m)."""
        return self.order * self.q

    def resolved(self, trap: TrapParams, species: SpeciesParams) -> "BraggConfig":
        """Fill in whichever of (rabi, resonance_width) is missing."""
        if self.rabi is not None and self.resonance_width is None:
            width = calibrate_outcoupling(self.rabi, trap, species)
            return replace(self, resonance_width=width if width > 0 else None)
        if self.rabi is None and self.resonance_width is not None:
            return replace(self, rabi=rabi_for_width(self.resonance_width, trap, species))
        if self.rabi is None:
            raise ValueError("one of bragg rabi or resonance width is required")
        return self


def bragg_wavenumber(wavelength: float, angle: float) -> float:
    """|q| = 2 k sin(alpha/2) for two beams of wavenumber k = 2 pi / lambda."""
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * (2.0 * math.pi / wavelength) * math.sin(angle / 2.0)


def resonance_frequency(n: int, q: float, mass: float, hbar: float = SpeciesParams.hbar) -> float:
    if n < 0:
        raise ValueError("order must be >= 0")
    return n * hbar * q**2 / (2.0 * mass)


def recoil_velocity(n: int, q: float, mass: float, hbar: float = SpeciesParams.hbar) -> float:
    if n < 0:
        raise ValueError("order must be >= 0")
    return n * hbar * q / mass


def kick_to_order_angle(kick_hbar_k: float) -> tuple[int, float]:
    """Map a momentum kick p (in units of hbar*k) to (order, angle).

    Uses the lowest order that can reach p, since p = 2 n sin(alpha/2) hbar k.
    """
    if not kick_hbar_k > 0:
        raise ValueError("momentum kick must be positive")
    n = max(1, math.ceil(kick_hbar_k / 2.0 - 1e-12))
    s = min(1.0, kick_hbar_k / (2.0 * n))
    return n, 2.0 * math.asin(s)


def calibrate_outcoupling(rabi: float, trap: TrapParams, species: SpeciesParams) -> float:
    """Outcoupling resonance width dz for a two-photon Rabi frequency.

    dz = -2g/w^2 + 2 sqrt(g^2/w^4 + hbar*Omega/(m w^2)), evaluated in a
    cancellation-free form.
    """
    if rabi < 0:
        raise ValueError("rabi frequency must be >= 0")
    a = species.g_accel / trap.omega_z**2
    b = species.hbar * rabi / (species.mass * trap.omega_z**2)
    return 2.0 * b / (a + math.sqrt(a * a + b))


def rabi_for_width(width: float, trap: TrapParams, species: SpeciesParams) -> float:
    """Closed-form inverse of :func:`calibrate_outcoupling`."""
    if width < 0:
        raise ValueError(f"resonance width {width!r} < 0 has no real Rabi frequency")
    a = species.g_accel / trap.omega_z**2
    # ((dz + 2a)/2)^2 - a^2 expanded to avoid cancellation
    bracket = width * a + 0.25 * width * width
    return species.mass * trap.omega_z**2 / species.hbar * bracket


def coupling_phase(position, time: float, config: BraggConfig, species: SpeciesParams,
                   sign: int = 1, frequency: float | None = None) -> np.ndarray:
    """exp(sign * i n (q.r - w t)) with q along -z.

    ``position`` is the z coordinate (array or scalar); only the beam-axis
    component enters q.r. ``frequency`` defaults to the Bragg resonance.
    """
    z = np.asarray(position, dtype=float)
    q = config.q
    w = resonance_frequency(config.order, q, species.mass, species.hbar) if frequency is None else frequency
    theta = config.order * (-q * z - w * time)
    return np.exp(1j * sign * theta)
