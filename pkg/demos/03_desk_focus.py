# One desk-scale focusing run, end to end.
#
# The desk geometry shrinks the full-scale 300 um fall to 50 um and the lens
# waist by four, so a 512x2048 grid resolves the spot. Expect about 5 minutes on
# one core. Pass an a_s_laser value (in a0) to change the beam interaction:
#     python demos/03_desk_focus.py -300
import json
import sys
from pathlib import Path

import numpy as np

from atomlens.runner import parse_scenario, run_scenario, write_report

cfg = json.loads((Path(__file__).resolve().parents[1] / "configs" / "desk_focus.json").read_text())
if len(sys.argv) > 1:
    cfg["beam"]["a_s_laser_a0"] = float(sys.argv[1])
scn = parse_scenario(cfg)
r = scn.physics
print(f"a_s_laser = {cfg['beam']['a_s_laser_a0']} a0, Omega = {r.bragg.rabi:.1f} rad/s, "
      f"sigma_y = {r.reduction_width() * 1e6:.1f} um, lens power "
      f"{r.focus.resolved_power(r.species, 0.5 * r.species.mass * r.entry_speed() ** 2) * 1e3:.3f} mW")

rep = run_scenario(scn, out_dir="demo_out")
s = rep.summary
print(f"{rep.steps} steps in {rep.wall_time_s:.0f} s")
print(f"FWHM {s.fwhm_m * 1e9:.1f} nm (direct {s.direct_fwhm_m * 1e9:.1f} nm), "
      f"peak {s.peak_density_per_um2:.1f} atoms/um^2, {s.n_beam:.0f} beam atoms above the focus")

# How the beam narrows on its way down: rms width every 5 um.
prof = rep.profile
for z in np.arange(45e-6, -15e-6, -5e-6):
    j = int(np.argmin(np.abs(prof["z_m"] - z)))
    print(f"  z = {prof['z_m'][j] * 1e6:6.1f} um  dx = {prof['dx_m'][j] * 1e9:8.1f} nm  M^2 = {prof['m2'][j]:.3f}")

for f in write_report(rep, "demo_out", scn.prefix):
    print("wrote", f)
