"""
Radial eigenproblem for l = 2: the kernel, the p-mode ladder and the
g-mode family that buoyancy adds below the fundamental.

    python3 demos/04_mode_spectrum.py
"""

import numpy as np

from esspec import background, modes

iso = background.build_background(5.0 / 3.0, 0.0)
baro = background.build_background(5.0 / 3.0, 0.1)

for nodes in (200, 400, 800):
    table = modes.solve_modes(modes.assemble_radial(iso, 2, nodes))
    print(f"isentropic, {nodes} nodes: kernel dimension {table.kernel_dim}, "
          f"lowest positive {np.round(table.positive[:4], 5)}")

op = modes.assemble_radial(baro, 2, 400)
table = modes.solve_modes(op)
ref = modes.reference_fundamental(baro, 2, 400)
cls = modes.classify_and_check(table, ref)
print(f"\ns1 = 0.1: isentropic fundamental {ref:.5f}, f-mode {cls.f_mode:.5f}")
print(f"  {len(cls.g_modes)} g-modes, strictly decreasing: "
      f"{cls.strictly_decreasing}")
k = np.arange(1, 9)
print("  order  lambda      lambda k^2")
for order, value in zip(k, cls.g_modes[:8]):
    print(f"  {order:5d}  {value:.5e}  {value * order**2:.4f}")
print(f"  p-modes: {np.round(cls.p_modes[:4], 4)}")

it = modes.solve_modes(op, count=10, method="iterative")
print(f"\ndense vs shift-invert Lanczos: {modes.dual_solver_defect(table, it):.1e}")
