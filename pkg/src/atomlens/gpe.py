"""Two-state Gross-Pitaevskii engine: trapped BEC psi0 and kicked beam psin.

Real-time evolution uses second-order Strang splitting. The local substep
exponentiates the 2x2 Hamiltonian (potentials + mean field + Rabi coupling)
exactly at every grid point, then applies the three-body amplitude decay to
the beam and the absorbing layer to both components.

The beam is carried as a slowly varying envelope around the Bragg carrier
exp(i n q.r) with q along -z, so its kinetic factor is hbar^2 |k + n q|^2/2m
and the coupling carries no spatial phase ("envelope" frame). The "lab"
frame evolves the carrier-included beam with the plain kinetic factor and a
coupling phase exp(+-i n (q.r - w t)); it needs a grid that resolves n q.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy.optimize import NoConvergence, newton_krylov
from scipy.sparse.linalg import LinearOperator

from . import _kernels
from . import diagnostics as diag
from .bragg import BraggConfig, coupling_phase, resonance_frequency
from .grid import ComplexField, SimGrid, absorber_profile, atom_number
from .params import BeamParams, SpeciesParams, TrapParams, interaction_strength, thomas_fermi_mu_3d, \
    thomas_fermi_radius
from .potentials import FocusConfig, PotentialStack, focusing_potential, free_fall_speed, gravity_potential, \
    trap_potential

log = logging.getLogger(__name__)

LOSS_CONVENTIONS = ("standard_half_hbar", "as_written")


class StabilityError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LossModel:
    K: float = 4e-41
    convention: str = "standard_half_hbar"

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("three-body K must be >= 0")
        if self.convention not in LOSS_CONVENTIONS:
            raise ValueError(f"loss convention must be one of {LOSS_CONVENTIONS}")

    def amplitude_rate(self, hbar: float) -> float:
        """c in d(psin)/dt = -c D psin, D the density-squared combination."""
        return 0.5 * self.K if self.convention == "standard_half_hbar" else self.K / hbar

    def density_rate(self, hbar: float) -> float:
        """C in dn/dt = -C K n^3 for a lone uniform beam."""
        return 1.0 if self.convention == "standard_half_hbar" else 2.0 / hbar


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    steps_per_diagnostic: int = 100
    pump_renormalize: bool = True
    ramp_time: float = 0.0
    frame: str = "envelope"
    max_nonlinear_phase: float = 0.1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("stepper dt must be positive")
        if self.steps_per_diagnostic < 1:
            raise ValueError("steps_per_diagnostic must be >= 1")
        if self.frame not in ("envelope", "lab"):
            raise ValueError("frame must be 'envelope' or 'lab'")


@dataclass
class Physics:
    """Everything the Hamiltonian needs, minus the numerics."""

    species: SpeciesParams = field(default_factory=SpeciesParams)
    trap: TrapParams = field(default_factory=TrapParams)
    beam: BeamParams = field(default_factory=BeamParams)
    bragg: BraggConfig = field(default_factory=lambda: BraggConfig(rabi=0.0))
    focus: FocusConfig | None = None
    loss: LossModel = field(default_factory=LossModel)
    sigma_y: float | None = None  # 2D reduction width; derived from the trap if None
    gravity: bool = True
    trap_on: bool = True
    absorber_rate: float = 0.0  # peak damping rate of the absorbing layer, 1/s
    absorber_fraction: float = 0.08

    def __post_init__(self):
        # Rabi frequency is needed by the engine; fill it from the width if absent
        if self.bragg.rabi is None:
            self.bragg = self.bragg.resolved(self.trap, self.species)

    @property
    def trap_center_z(self) -> float:
        return self.bragg.resonance_z

    def reduction_width(self) -> float:
        """Gaussian width used to integrate out y in 2D runs."""
        if self.sigma_y is not None:
            return self.sigma_y
        sp, tr = self.species, self.trap
        a_ho = math.sqrt(sp.hbar / (sp.mass * tr.omega_y))
        if tr.a_s_bec <= 0:
            return a_ho
        return max(a_ho, thomas_fermi_radius(thomas_fermi_mu_3d(tr, sp), tr.omega_y, sp))

    def couplings(self, dims: int) -> tuple[float, float]:
        """(u_bec, u_laser) in J m^dims."""
        ub = interaction_strength(self.trap.a_s_bec, self.species)
        ul = interaction_strength(self.beam.a_s_laser, self.species)
        if dims == 2:
            scale = 1.0 / (math.sqrt(2 * math.pi) * self.reduction_width())
            ub, ul = ub * scale, ul * scale
        return ub, ul

    def loss_rate(self, dims: int) -> float:
        """Amplitude loss rate c (per density^2 in the grid's units).

        In 2D the Gaussian y-profile integrates |phi|^6 to 1/(2 sqrt(3) pi sigma_y^2).
        """
        if self.loss.K == 0:
            return 0.0
        c = self.loss.amplitude_rate(self.species.hbar)
        if dims == 2:
            c /= 2 * math.sqrt(3) * math.pi * self.reduction_width() ** 2
        return c

    def entry_speed(self) -> float:
        """Beam speed at the lens center from free-fall kinematics."""
        v0 = self.bragg.kick() * self.species.hbar / self.species.mass
        if self.focus is None:
            return v0
        drop = self.bragg.resonance_z - self.focus.center_z
        return free_fall_speed(v0, drop, self.species.g_accel if self.gravity else 0.0)

    def focus_intensity(self) -> float:
        if self.focus is None:
            return 0.0
        E0 = 0.5 * self.species.mass * self.entry_speed() ** 2
        return self.focus.peak_intensity(self.species, E0)

    def potential_stack(self, grid: SimGrid) -> PotentialStack:
        sp, tr = self.species, self.trap
        zc = self.trap_center_z
        stack = PotentialStack()
        if grid.dims == 2:
            stack.add("trap", lambda x, z: trap_potential(x, 0.0, z, tr, sp, (0.0, 0.0, zc)), self.trap_on)
        else:
            stack.add("trap", lambda x, y, z: trap_potential(x, y, z, tr, sp, (0.0, 0.0, zc)), self.trap_on)
        stack.add("gravity", lambda *r: gravity_potential(r[-1], sp, self.bragg.resonance_z), self.gravity)
        if self.focus is not None:
            I0 = self.focus_intensity()
            stack.add("focusing", lambda *r: focusing_potential(r[0], r[-1], self.focus, sp, I0))
        if self.absorber_rate > 0:
            shape = absorber_profile(grid, self.absorber_fraction)
            w = sp.hbar * self.absorber_rate
            stack.add("absorber", lambda *r: w * shape)
        return stack


@dataclass
class TwoStateSystem:
    grid: SimGrid
    physics: Physics
    psi0: np.ndarray
    psin: np.ndarray
    mu: float  # energy of the frame rotating with the BEC, J
    step: int = 0
    time: float = 0.0

    def __post_init__(self):
        if self.psi0.shape != self.grid.shape or self.psin.shape != self.grid.shape:
            raise ValueError("psi0 and psin must live on the system grid")

    def field0(self) -> ComplexField:
        return ComplexField(self.grid, self.psi0)

    def fieldn(self) -> ComplexField:
        return ComplexField(self.grid, self.psin)


# --- ground state ---------------------------------------------------------------

def _energy_terms(grid, psi, T, V, u):
    phi = sfft.fftn(psi)
    n = psi.real**2 + psi.imag**2
    norm = n.sum() * grid.dV
    kin = float(np.sum(T * (phi.real**2 + phi.imag**2)) / psi.size * grid.dV)
    pot = float(np.sum(V * n) * grid.dV)
    inter = float(0.5 * u * np.sum(n * n) * grid.dV)
    return norm, kin, pot, inter


def ground_state(grid: SimGrid, trap: TrapParams, species: SpeciesParams, *, u: float | None = None,
                 center_z: float = 0.0, tolerance: float = 1e-10, dtau: float | None = None,
                 max_steps: int = 200_000, sigma_y: float | None = None,
                 check_every: int = 10, polish: bool = True) -> tuple[ComplexField, float]:
    """Imaginary-time ground state of the trapped BEC, normalized to N0.

    Starts from the Thomas-Fermi profile and renormalizes every step; stops
    when the relative energy change per step drops below ``tolerance``.
    Returns the field and its chemical potential (J). ``u`` defaults to the
    trap's a_s_bec coupling, reduced to 2D via ``sigma_y`` when needed.

    The split-step fixed point carries an O(dtau) bias; ``polish`` removes it
    with a Newton-Krylov solve of the stationary equation on the lattice.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    N0 = trap.atom_number
    if u is None:
        u = interaction_strength(trap.a_s_bec, species)
        if grid.dims == 2:
            if sigma_y is None:
                raise ValueError("2D ground state needs sigma_y for the y reduction")
            u /= math.sqrt(2 * math.pi) * sigma_y
    hbar, m = species.hbar, species.mass
    mesh = grid.mesh()
    if grid.dims == 2:
        V = trap_potential(mesh[0], 0.0, mesh[1], trap, species, (0.0, 0.0, center_z))
        omegas = (trap.omega_x, trap.omega_z)
    else:
        V = trap_potential(mesh[0], mesh[1], mesh[2], trap, species, (0.0, 0.0, center_z))
        omegas = (trap.omega_x, trap.omega_y, trap.omega_z)
    V = np.broadcast_to(V, grid.shape)
    k2 = sum(k**2 for k in grid.kmesh())
    T = hbar**2 * k2 / (2 * m)

    # Thomas-Fermi guess: mu fixed by normalization, bisected on the grid
    psi = _thomas_fermi_guess(grid, V, u, N0, hbar * min(omegas))
    mu_scale = max(hbar * max(omegas), float(np.max(u * np.abs(psi) ** 2)) if u > 0 else 0.0)
    if dtau is None:
        dtau = 0.05 * hbar / mu_scale
    kin_half = np.exp(-T * dtau / (2 * hbar))
    prev = None
    for it in range(1, max_steps + 1):
        psi = sfft.ifftn(kin_half * sfft.fftn(psi))
        n = psi.real**2 + psi.imag**2
        psi = psi * np.exp(-(V + u * n) * dtau / hbar)
        psi = sfft.ifftn(kin_half * sfft.fftn(psi))
        psi *= math.sqrt(N0 / (np.sum(np.abs(psi) ** 2) * grid.dV))
        if it % check_every == 0:
            norm, kin, pot, inter = _energy_terms(grid, psi, T, V, u)
            E = kin + pot + inter
            if prev is not None and abs(E - prev) / abs(E) / check_every < tolerance:
                mu = (kin + pot + 2 * inter) / norm
                log.debug("ground state converged after %d steps, mu/hbar=%.6g", it, mu / hbar)
                if polish:
                    psi, mu = _polish(grid, psi, T, V, u, N0, mu, hbar)
                return ComplexField(grid, psi), mu
            prev = E
    raise ConvergenceError(f"ground state did not converge in {max_steps} steps")


def _polish(grid, psi, T, V, u, N0, mu, hbar):
    """Solve (T + V + u|psi|^2) psi = mu psi with sum|psi|^2 dV = N0 for real psi."""
    scale = math.sqrt(N0 / (grid.dV * psi.size))
    e = mu  # energy unit keeps the residual O(1)
    Vs, Ts, us = V / e, T / e, u * scale**2 / e

    def resid(v):
        p = v[:-1].reshape(grid.shape)
        Hp = sfft.ifftn(Ts * sfft.fftn(p)).real + (Vs + us * p * p) * p
        return np.append((Hp - v[-1] * p).ravel(), np.sum(p * p) / p.size - 1.0)

    # kinetic preconditioner tames the stiff high-k modes on fine grids
    pre_k = 1.0 / (Ts + 1.0)

    def precondition(r):
        out = np.empty_like(r)
        out[:-1] = sfft.ifftn(pre_k * sfft.fftn(r[:-1].reshape(grid.shape))).real.ravel()
        out[-1] = r[-1]
        return out

    n = psi.size + 1
    M = LinearOperator((n, n), matvec=precondition)
    v0 = np.append(psi.real.ravel() / scale, 1.0)
    try:
        v = newton_krylov(resid, v0, f_tol=1e-11, maxiter=50, inner_M=M)
    except (NoConvergence, ValueError) as exc:
        log.warning("ground-state polish failed (%s); keeping imaginary-time state", type(exc).__name__)
        return psi, mu
    return (v[:-1].reshape(grid.shape) * scale).astype(np.complex128), float(v[-1] * e)


def _thomas_fermi_guess(grid, V, u, N0, e_floor):
    if u <= 0:
        psi = np.exp(-V / (2 * e_floor)).astype(np.complex128)
    else:
        lo, hi = 0.0, float(V.max())
        for _ in range(200):
            mu = 0.5 * (lo + hi)
            if np.clip(mu - V, 0, None).sum() * grid.dV / u > N0:
                hi = mu
            else:
                lo = mu
        psi = np.sqrt(np.clip(mu - V, 0, None) / u).astype(np.complex128)
        # soften the edge so the first FFTs do not ring
        psi = psi + 1e-3 * np.sqrt(mu / u) * np.exp(-V / (2 * max(mu, e_floor)))
    return psi * math.sqrt(N0 / (np.sum(np.abs(psi) ** 2) * grid.dV))


def compact_ground_state(grid: SimGrid, physics: Physics, tolerance: float = 1e-10, dtau: float | None = None,
                         margin: float = 2.0) -> tuple[np.ndarray, float]:
    """Ground state on a z-trimmed box with the same spacing, embedded in ``grid``.

    The BEC occupies a small slab of a tall domain; solving on the slab and
    zero-padding gives the same lattice state at a fraction of the cost.
    """
    sp, tr = physics.species, physics.trap
    zc = physics.trap_center_z
    iz = grid.dims - 1
    dz = grid.spacing[iz]
    if tr.a_s_bec > 0:
        mu3 = thomas_fermi_mu_3d(tr, sp)
        Rz = thomas_fermi_radius(mu3, tr.omega_z, sp)
    else:
        Rz = 0.0
    Rz = max(Rz, 4 * math.sqrt(sp.hbar / (sp.mass * tr.omega_z)))
    need = 2 * margin * Rz
    nz = grid.points[iz]
    sub = 16
    while sub * dz < need and sub < nz:
        sub *= 2
    z_all = grid.coord(iz)
    i0 = int(np.argmin(np.abs(z_all - zc))) - sub // 2
    if sub >= nz or i0 < 0 or i0 + sub > nz:
        u = physics.couplings(grid.dims)[0]
        f, mu = ground_state(grid, tr, sp, u=u, center_z=zc, tolerance=tolerance, dtau=dtau)
        return f.amplitude, mu
    points = list(grid.points)
    points[iz] = sub
    extent = list(grid.extent)
    extent[iz] = sub * dz
    center = list(grid.center)
    # keep lattice sites aligned with the parent grid
    center[iz] = z_all[i0] + extent[iz] / 2
    subgrid = SimGrid(tuple(points), tuple(extent), tuple(center))
    u = physics.couplings(grid.dims)[0]
    f, mu = ground_state(subgrid, tr, sp, u=u, center_z=zc, tolerance=tolerance, dtau=dtau)
    full = grid.zeros()
    index = [slice(None)] * grid.dims
    index[iz] = slice(i0, i0 + sub)
    full[tuple(index)] = f.amplitude
    return full, mu


# --- real-time propagation ------------------------------------------------------

def _kick(psi, factor):
    """Kinetic substep in spectral space; overwrites ``psi``."""
    phi = sfft.fftn(psi, overwrite_x=True)
    phi *= factor
    return sfft.ifftn(phi, overwrite_x=True)


class Propagator:
    """Precomputed split-step operators for one system and stepper."""

    def __init__(self, system: TwoStateSystem, stepper: StepperConfig, use_kernel: bool = True):
        self.system = system
        self.stepper = stepper
        g, ph = system.grid, system.physics
        sp = ph.species
        hbar, m, dt = sp.hbar, sp.mass, stepper.dt
        self.hbar = hbar
        kmesh = g.kmesh()
        k2 = sum(k**2 for k in kmesh)
        T0 = hbar**2 * k2 / (2 * m)
        nq = ph.bragg.kick()
        self.omega_bragg = resonance_frequency(ph.bragg.order, ph.bragg.q, m, hbar)
        if stepper.frame == "envelope" and nq != 0.0:
            kz_shift = kmesh[-1] - nq
            k2n = sum(k**2 for k in kmesh[:-1]) + kz_shift**2
            Tn = hbar**2 * k2n / (2 * m)
            recoil = (hbar * nq) ** 2 / (2 * m)
        else:
            Tn, recoil = T0, 0.0
        self.kin0_half = np.exp(-1j * T0 * dt / (2 * hbar))
        self.kin0_full = self.kin0_half**2
        self.kinn_half = np.exp(-1j * Tn * dt / (2 * hbar))
        self.kinn_full = self.kinn_half**2

        mesh = g.mesh()
        stack = ph.potential_stack(g)
        self.stack = stack
        self.a_static = (stack.evaluate("bec", mesh, g.shape) - system.mu) / hbar
        self.b_static = (stack.evaluate("beam", mesh, g.shape) - recoil) / hbar
        W = stack.absorber(mesh, g.shape)
        self.absorb = np.exp(-W * dt / hbar) if np.any(W) else None
        ub, ul = ph.couplings(g.dims)
        self.gb, self.gl = ub / hbar, ul / hbar
        self.loss_rate = ph.loss_rate(g.dims)
        self.rabi = ph.bragg.rabi or 0.0
        self.N0 = ph.trap.atom_number
        self.z = g.broadcast(g.coord(g.dims - 1), g.dims - 1)
        self.fused = use_kernel and _kernels.local_step is not None
        if self.fused:
            self._a_flat = np.ascontiguousarray(np.broadcast_to(self.a_static, g.shape)).ravel()
            self._b_flat = np.ascontiguousarray(np.broadcast_to(self.b_static, g.shape)).ravel()
            self._abs_flat = (_kernels.EMPTY_R if self.absorb is None
                              else np.ascontiguousarray(np.broadcast_to(self.absorb, g.shape)).ravel())
            self._z_full = np.ascontiguousarray(np.broadcast_to(self.z, g.shape))

    def rabi_at(self, t: float) -> float:
        ramp = self.stepper.ramp_time
        if ramp > 0 and t < ramp:
            return self.rabi * t / ramp
        return self.rabi

    def _local(self, psi0, psin, t_mid):
        dt = self.stepper.dt
        n0 = psi0.real**2 + psi0.imag**2
        nn = psin.real**2 + psin.imag**2
        ntot = n0 + nn
        guard = dt * max(abs(self.gb), abs(self.gl)) * float(ntot.max())
        if guard > self.stepper.max_nonlinear_phase:
            raise StabilityError(f"nonlinear phase per step {guard:.3g} rad exceeds "
                                 f"{self.stepper.max_nonlinear_phase} (reduce dt)")
        a = self.a_static + self.gb * ntot
        b = self.b_static + self.gl * ntot
        omega = self.rabi_at(t_mid)
        if omega == 0.0:
            psi0 = psi0 * np.exp(-1j * a * dt)
            psin = psin * np.exp(-1j * b * dt)
        else:
            s = 0.5 * (a + b)
            d = 0.5 * (a - b)
            r = np.sqrt(d * d + omega * omega)
            cos = np.cos(r * dt)
            sinc = np.sin(r * dt) / r
            if self.stepper.frame == "lab":
                ph = self.system.physics
                c = omega * coupling_phase(self.z, t_mid, ph.bragg, ph.species, sign=-1, frequency=self.omega_bragg)
            else:
                c = omega
            rot = np.exp(-1j * s * dt)
            new0 = rot * ((cos - 1j * sinc * d) * psi0 - 1j * sinc * c * psin)
            psin = rot * (-1j * sinc * np.conj(c) * psi0 + (cos + 1j * sinc * d) * psin)
            psi0 = new0
        if self.loss_rate:
            psin = self._three_body(psi0, psin)
        if self.absorb is not None:
            psi0 = psi0 * self.absorb
            psin = psin * self.absorb
        return psi0, psin

    def _local_fused(self, psi0, psin, t_mid):
        """Same update as ``_local`` in one compiled pass; modifies in place."""
        omega = self.rabi_at(t_mid)
        if self.stepper.frame == "lab" and omega != 0.0:
            ph = self.system.physics
            c = coupling_phase(self._z_full, t_mid, ph.bragg, ph.species, sign=-1,
                               frequency=self.omega_bragg).ravel()
        else:
            c = _kernels.EMPTY_C
        nmax, norm0 = _kernels.local_step(psi0.reshape(-1), psin.reshape(-1), self._a_flat, self._b_flat,
                                          self.gb, self.gl, float(omega), self.stepper.dt, c,
                                          float(self.loss_rate), self._abs_flat)
        guard = self.stepper.dt * max(abs(self.gb), abs(self.gl)) * nmax
        if guard > self.stepper.max_nonlinear_phase:
            raise StabilityError(f"nonlinear phase per step {guard:.3g} rad exceeds "
                                 f"{self.stepper.max_nonlinear_phase} (reduce dt)")
        return psi0, psin, norm0

    def _three_body(self, psi0, psin):
        dt, c = self.stepper.dt, self.loss_rate
        n0 = psi0.real**2 + psi0.imag**2
        nn = psin.real**2 + psin.imag**2
        D = n0 * n0 + nn * nn + 4 * n0 * nn
        nn_mid = nn * np.exp(-c * D * dt)  # density after a half step (rate 2c)
        D_mid = n0 * n0 + nn_mid * nn_mid + 4 * n0 * nn_mid
        return psin * np.exp(-c * D_mid * dt)

    def advance(self, n_steps: int) -> None:
        """Advance ``n_steps`` Strang steps; inner half kinetic steps are fused."""
        sysm = self.system
        if n_steps <= 0:
            return
        dt = self.stepper.dt
        psi0 = _kick(sysm.psi0.copy(), self.kin0_half)
        psin = _kick(sysm.psin.copy(), self.kinn_half)
        for j in range(n_steps):
            t_mid = (sysm.step + j + 0.5) * dt
            if self.fused:
                psi0, psin, norm0 = self._local_fused(psi0, psin, t_mid)
            else:
                psi0, psin = self._local(psi0, psin, t_mid)
                norm0 = float(np.sum(psi0.real**2 + psi0.imag**2))
            if self.stepper.pump_renormalize and norm0 > 0:
                # scalar rescaling commutes with the kinetic step
                psi0 *= math.sqrt(self.N0 / (norm0 * sysm.grid.dV))
            last = j == n_steps - 1
            k0 = self.kin0_half if last else self.kin0_full
            kn = self.kinn_half if last else self.kinn_full
            psi0 = _kick(psi0, k0)
            psin = _kick(psin, kn)
        if not (np.all(np.isfinite(psi0)) and np.all(np.isfinite(psin))):
            raise StabilityError(f"non-finite amplitude at step {sysm.step + n_steps}")
        sysm.psi0, sysm.psin = psi0, psin
        sysm.step += n_steps
        sysm.time = sysm.step * dt


@dataclass
class DiagnosticRecord:
    t_s: float
    z_center_m: float
    dx_m: float
    dvx_m_s: float
    m2: float
    n_beam: float
    n_bec: float


def snapshot_diagnostics(system: TwoStateSystem) -> DiagnosticRecord:
    f = system.fieldn()
    g, sp = system.grid, system.physics.species
    n_beam = atom_number(f)
    n_bec = atom_number(system.field0())
    if n_beam > 0:
        zc, _ = diag.centroid_and_rms_safe(f, "z")
        dx = diag.beam_width(f)
        dvx = diag.beam_momentum_width(f, sp)
        m2 = diag.quality_factor(dx, dvx, sp.mass, sp.hbar) if dx > 0 and dvx > 0 else float("nan")
    else:
        zc = dx = dvx = m2 = float("nan")
    return DiagnosticRecord(system.time, zc, dx, dvx, m2, n_beam, n_bec)


def evolve(system: TwoStateSystem, stepper: StepperConfig, n_steps: int | None = None, *,
           stop: Callable[[TwoStateSystem], bool] | None = None, max_steps: int | None = None,
           on_diagnostic: Callable[[TwoStateSystem, DiagnosticRecord], None] | None = None,
           record: bool = True) -> list[DiagnosticRecord]:
    """Run the coupled evolution, recording diagnostics every
    ``steps_per_diagnostic`` steps (counted from step 0, so resumed runs line
    up). Stops after ``n_steps`` or when ``stop(system)`` is true at a
    diagnostic point, whichever comes first."""
    if system.psi0.shape != system.psin.shape:
        raise ValueError("psi0 and psin grids differ")
    prop = Propagator(system, stepper)
    every = stepper.steps_per_diagnostic
    end = None if n_steps is None else system.step + n_steps
    if end is None and stop is None:
        raise ValueError("give n_steps or a stop condition")
    limit = max_steps if max_steps is not None else (end if end is not None else 10**9)
    out: list[DiagnosticRecord] = []
    if record and system.step % every == 0 and system.step == 0:
        rec = snapshot_diagnostics(system)
        out.append(rec)
        if on_diagnostic:
            on_diagnostic(system, rec)
    while True:
        target = (system.step // every + 1) * every
        if end is not None:
            target = min(target, end)
        target = min(target, limit)
        if target <= system.step:
            break
        prop.advance(target - system.step)
        if system.step % every == 0 or system.step == end:
            if record:
                rec = snapshot_diagnostics(system)
                out.append(rec)
                if on_diagnostic:
                    on_diagnostic(system, rec)
            if stop is not None and stop(system):
                break
        if end is not None and system.step >= end:
            break
        if system.step >= limit:
            if stop is not None:
                raise ConvergenceError(f"stop condition not met within {limit} steps")
            break
    return out


def prepare_system(grid: SimGrid, physics: Physics, tolerance: float = 1e-10,
                   dtau: float | None = None) -> TwoStateSystem:
    """Ground-state BEC in psi0, empty beam."""
    psi0, mu = compact_ground_state(grid, physics, tolerance=tolerance, dtau=dtau)
    return TwoStateSystem(grid, physics, psi0, grid.zeros(), mu)
