# Beam quality of the unfocused atom laser at full scale (300 um fall).
#
# Outcouples at z = 150 um and lets the beam fall to -145 um with no lens,
# then reads width, velocity width and M^2 at six planes and the divergence
# in the two zones. About 6-8 minutes per scattering length on one core.
#     python demos/04_free_beam_quality.py 100 0 -100
import json
import sys
from pathlib import Path

from atomlens.runner import parse_scenario, run_scenario

base = json.loads((Path(__file__).resolve().parents[1] / "configs" / "full_free.json").read_text())
for a_s in [float(a) for a in sys.argv[1:]] or [100.0]:
    base["beam"]["a_s_laser_a0"] = a_s
    rep = run_scenario(parse_scenario(base))
    print(f"a_s_laser = {a_s:g} a0 ({rep.wall_time_s:.0f} s)")
    for p in rep.planes:
        print(f"  z = {p['z_m'] * 1e6:7.1f} um  dx = {p['dx_m'] * 1e6:.3f} um  "
              f"dv = {p['dvx_m_s'] * 1e3:.3f} mm/s  M^2 = {p['m2']:.3f}")
    for name, zinfo in rep.zones.items():
        print(f"  {name:9s} divergence {zinfo['theta_rad'] * 1e3:+.3f} mrad")
