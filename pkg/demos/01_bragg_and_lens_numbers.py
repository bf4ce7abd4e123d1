# Where the numbers come from: Bragg kick, outcoupling width, lens power.
#
# Everything here is closed form and runs instantly. Run from the repo root:
#     python demos/01_bragg_and_lens_numbers.py
import math

from atomlens.bragg import (bragg_wavenumber, calibrate_outcoupling, kick_to_order_angle, rabi_for_width,
                            recoil_velocity)
from atomlens.params import SpeciesParams, TrapParams
from atomlens.potentials import free_fall_speed, optimal_power, peak_intensity

sp, tr = SpeciesParams(), TrapParams()

# Counter-propagating 780 nm beams transfer 2 hbar k per two-photon event.
q = bragg_wavenumber(780.027e-9, math.pi)
v_kick = recoil_velocity(1, q, sp.mass)
print(f"q = {q:.4e} 1/m, kick velocity {v_kick * 100:.3f} cm/s")

# After falling 300 um to the lens the beam is much faster than the kick.
v_lens = free_fall_speed(v_kick, 300e-6, sp.g_accel)
print(f"speed at the lens: {v_lens * 100:.3f} cm/s")

# The resonance shell is thin: its width follows from Omega, gravity and the trap.
for rabi in (300.0, 524.2, 669.0, 1000.0):
    print(f"  Omega = {rabi:7.1f} rad/s -> Delta_z = {calibrate_outcoupling(rabi, tr, sp) * 1e9:6.2f} nm")
print(f"Delta_z = 40 nm needs Omega = {rabi_for_width(40e-9, tr, sp):.1f} rad/s")

# Lens power scales with the beam's kinetic energy at the lens, so a bigger
# kick needs more light.
k_f = 2 * math.pi / 312e-6
for kick in (0.5, 2, 6, 12):
    n, alpha = kick_to_order_angle(kick)
    v = free_fall_speed(recoil_velocity(n, bragg_wavenumber(780.027e-9, alpha), sp.mass), 300e-6, sp.g_accel)
    P = optimal_power(0.5 * sp.mass * v**2, 2 * math.pi * 200e9, sp.gamma, sp.saturation_intensity, k_f, 5.37)
    print(f"  {kick:>4} hbar k (order {n}, alpha {math.degrees(alpha):6.2f} deg): "
          f"P = {P * 1e3:.3f} mW, I0(25 um) = {peak_intensity(P, 25e-6):.3e} W/m^2")
