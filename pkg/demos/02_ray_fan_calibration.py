# Calibrating the lens factor xi with classical rays.
#
# A parallel fan of 21 rays (the +/-1.741 um beam at the lens) enters the
# Gaussian light sheet; xi is tuned until the fan's rms spot is smallest at
# the sheet center. Takes a few seconds.
import math

import numpy as np

from atomlens.bragg import bragg_wavenumber, recoil_velocity
from atomlens.classical import calibrate_xi, focal_plane
from atomlens.params import SpeciesParams
from atomlens.potentials import FocusConfig, free_fall_speed

sp = SpeciesParams()
geom = FocusConfig(xi=5.37, sigma_z=25e-6, center_z=-150e-6)
v = free_fall_speed(recoil_velocity(1, bragg_wavenumber(780.027e-9, math.pi), sp.mass), 300e-6, sp.g_accel)

res = calibrate_xi(geom.center_z, geom, sp, v, 1.741e-6)
print(f"xi = {res.xi:.4f}  (focal z {res.focal_z * 1e6:.2f} um, rms spot {res.rms_spot * 1e9:.2f} nm, "
      f"{res.iterations} fan launches)")

# A weaker lens focuses further down, a stronger one earlier.
for xi in np.arange(4.0, 7.01, 0.5):
    zf = focal_plane(xi, geom, sp, v, 1.741e-6)
    print(f"  xi = {xi:.1f}: focus at {zf * 1e6:8.2f} um ({(zf - geom.center_z) * 1e6:+6.2f} um from center)")
