"""
Singular sequences concentrating at an interior point, with their residual
decay and the two negative controls.

The imaginary branch uses the stably stratified star.  The real branch
needs a negative eigenvalue of the symmetrized block product, which the
convectively unstable mirror star (s1 = -0.1) provides.

    python3 demos/03_weyl_sequences.py
"""

from esspec import background, fields, spectrum, weyl


def show(model, label, pick):
    x0 = weyl.default_x0(model)
    lo, hi = spectrum.alpha_oracle(fields.sample_meridional(model, *x0), 0.0)
    t = 0.5 * float(pick(lo, hi))
    params = weyl.choose_direction(model, x0, 0.0, t)
    print(f"{label}: t = {t:.5f}, lambda = {params.lam:.5f}")
    main = weyl.run_series(model, params)
    no_j = weyl.run_series(model, params, use_j=False)
    bad_a = weyl.run_series(model, params, a_factor=1.1)
    print("      eps     residual   no J       a x 1.1    kernel")
    for k, eps in enumerate(main.eps):
        print(f"  {eps:9.6f}  {main.rel_residual[k]:.3e}  "
              f"{no_j.rel_residual[k]:.3e}  {bad_a.rel_residual[k]:.3e}  "
              f"{main.kernel_residual[k]:.1e}")
    print(f"  slope {main.fitted_slope:.3f} (verdict {main.fit.verdict}); "
          f"controls {no_j.fit.verdict}, {bad_a.fit.verdict}\n")


show(background.build_background(5.0 / 3.0, 0.1), "imaginary branch",
     lambda lo, hi: hi)
show(background.build_background(5.0 / 3.0, -0.1), "real branch",
     lambda lo, hi: lo)
