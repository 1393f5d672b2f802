"""
Build an isentropic polytrope and a stably stratified star, validate both
and print a few radial profiles.

    python3 demos/01_background.py
"""

import numpy as np

from esspec import background, fields

iso = background.build_background(5.0 / 3.0, 0.0)
baro = background.build_background(5.0 / 3.0, 0.1)

for name, model in (("isentropic", iso), ("s1 = 0.1", baro)):
    rep = background.validate_background(model)
    print(f"{name:12s} R = {model.radius:.6f}  M = {model.total_mass:.6f}  "
          f"ok = {rep.ok}")
    print(f"{'':12s} eos {rep.eos_max_residual:.1e}  hydrostatic "
          f"{rep.hydrostatic_max_residual:.1e}  surface exponent "
          f"{rep.surface_exponent_fit:.3f}")

# the Lane-Emden oracles behind the isentropic star
print("closed-form errors:", {k: f"{v:.1e}" for k, v in
                              background.lane_emden_closed_form_errors().items()})

# buoyancy frequency: zero for the polytrope, positive once entropy rises
r = np.linspace(0.1, 0.9, 5) * baro.radius
s_iso = fields.sample_radial(iso, r)
s_baro = fields.sample_radial(baro, r)
print("\n  r/R    N^2 (iso)    N^2 (s1=0.1)    c")
for k in range(len(r)):
    print(f"  {r[k] / baro.radius:.2f}  {s_iso.n2[k]:11.3e}  "
          f"{s_baro.n2[k]:13.4e}  {s_baro.c[k]:.4f}")
