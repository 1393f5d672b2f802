"""
Modal time evolution: the first-order companion system has eigenvalues
+-i sqrt(lambda), and the modal solution conserves energy.

    python3 demos/05_time_evolution.py
"""

import numpy as np

from esspec import background, modes

iso = background.build_background(5.0 / 3.0, 0.0)
op = modes.assemble_radial(iso, 2, 200)
table = modes.solve_modes(op)

comp = modes.companion_check(op, table, count=5)
for entry in comp["modes"]:
    print(f"lambda {entry['eigenvalue']:9.4f}  companion mismatch "
          f"{entry['rel_error']:.1e}")

rng = np.random.default_rng(1)
n = len(table.eigenvalues)
cols = np.nonzero(table.eigenvalues > table.kernel_threshold)[0][:10]
u0, v0 = np.zeros(n), np.zeros(n)
u0[cols] = rng.normal(size=len(cols))
v0[cols] = rng.normal(size=len(cols))
# a kernel component drifts linearly
kernel = np.nonzero(np.abs(table.eigenvalues) <= table.kernel_threshold)[0][0]
v0[kernel] = 0.1

e0 = modes.modal_energy(table, u0, v0)
period = 2.0 * np.pi / np.sqrt(table.eigenvalues[cols[0]])
print(f"\nenergy at t=0: {e0:.6f}; fundamental period {period:.4f}")
for t in np.linspace(0.0, 10.0 * period, 6):
    u, du = modes.synthesize(table, u0, v0, t)
    print(f"  t = {t:8.4f}  energy drift {modes.modal_energy(table, u, du) / e0 - 1:+.1e}"
          f"  kernel coefficient {u[kernel]:.4f}")
