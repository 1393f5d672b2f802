import json

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from esspec import modes

# l = 2 eigenvalues of the s1 = 0.1 star at 400 nodes (frozen)
BARO_F_MODE = 2.28911669189217
# Aitken extrapolation of the scalar oracle below at 2000/4000/8000 cells
ISO_L2_EXTRAPOLATED = np.array([2.39111623, 8.83592063, 18.51958776,
                                31.25605347])


def scalar_oracle(model, l, cells, count=4):
    """
    Independent check of the isentropic spectrum.

    Away from the kernel the modes of an isentropic star are u = grad(psi)
    up to a factor, with psi = sigma div(rho u), and psi Y_l solves
    -(r^2 rho f')' + L rho f = lambda r^2 f / sigma.  Cell-centred finite
    differences; the centre and surface fluxes vanish with r^2 and rho.
    """
    h = model.radius / cells
    rc = (np.arange(cells) + 0.5) * h
    rf = np.arange(1, cells) * h
    pc = model.primitives(rc)
    pf = model.primitives(rf)
    flux = np.concatenate([[0.0], rf**2 * pf["rho"] / h**2, [0.0]])
    diag = flux[:-1] + flux[1:] + pc["rho"] * l * (l + 1)
    weight = rc**2 * pc["rho"] ** 2 / (model.gamma * pc["pressure"])
    s = 1.0 / np.sqrt(weight)
    return sla.eigh_tridiagonal(diag * s * s, -flux[1:-1] * s[:-1] * s[1:],
                                eigvals_only=True, select="i",
                                select_range=(0, count - 1))


def _aitken(model, l):
    a, b, c = (scalar_oracle(model, l, n) for n in (2000, 4000, 8000))
    return c - (c - b) ** 2 / ((c - b) - (b - a))


def _aitken_shifted(model):
    a, b, c = (scalar_oracle(model, 0, n, 5)[1:] for n in (2000, 4000, 8000))
    return c - (c - b) ** 2 / ((c - b) - (b - a))


def test_oracle_extrapolation_frozen(iso):
    assert np.max(np.abs(_aitken(iso, 2) / ISO_L2_EXTRAPOLATED - 1.0)) <= 1e-8


def test_isentropic_spectrum_matches_oracle(iso, iso_table):
    ref = _aitken(iso, 2)
    assert np.max(np.abs(iso_table.positive[:4] / ref - 1.0)) <= 2e-4


def test_second_order_convergence(iso, iso_table):
    ref = _aitken(iso, 2)
    fine = modes.solve_modes(modes.assemble_radial(iso, 2, 800))
    err_coarse = np.abs(iso_table.positive[:4] - ref)
    err_fine = np.abs(fine.positive[:4] - ref)
    ratio = err_coarse / err_fine
    assert np.all((ratio > 3.5) & (ratio < 4.6)), ratio


@pytest.mark.parametrize("l", [0, 1, 3])
def test_other_degrees_match_oracle(iso, l):
    table = modes.solve_modes(modes.assemble_radial(iso, l, 400))
    ref = _aitken(iso, l)
    if l == 0:
        # the constant potential is no displacement at all
        ref = _aitken_shifted(iso)
    assert np.max(np.abs(table.positive[:4] / ref - 1.0)) <= 2e-4


@pytest.mark.parametrize("name", ["iso_op", "baro_op"])
def test_symmetric_and_positive_mass(name, request):
    op = request.getfixturevalue(name)
    assert op.asymmetry() <= 1e-12
    assert np.abs(op.mass - op.mass.T).max() <= 1e-15 * np.abs(op.mass).max()
    sla.cholesky(op.mass, lower=True)


@pytest.mark.parametrize("name", ["iso", "baro"])
def test_integrands_agree_on_random_vectors(name, request):
    model = request.getfixturevalue(name)
    ops = {k: modes.assemble_radial(model, 2, 200, integrand=k)
           for k in ("factored", "three_term", "square")}
    x = np.random.default_rng(0).normal(size=(ops["factored"].size, 20))
    q = {k: np.einsum("ij,ij->j", x, op.stiffness @ x)
         for k, op in ops.items()}
    assert np.max(np.abs(q["three_term"] / q["factored"] - 1.0)) <= 1e-10
    if name == "iso":
        assert np.max(np.abs(q["square"] / q["factored"] - 1.0)) <= 1e-10
    else:
        # the squared-divergence form drops the buoyancy term
        assert np.max(np.abs(q["square"] / q["factored"] - 1.0)) >= 1e-7


def test_radial_degree_has_no_horizontal_unknowns(iso, iso_op):
    op0 = modes.assemble_radial(iso, 0, 400)
    assert np.all(op0.dof_kind == "phi")
    assert 2 * op0.size == iso_op.size
    table = modes.solve_modes(op0)
    assert table.kernel_dim == 0


def test_isentropic_kernel_is_exact(iso, iso_table):
    # every Psi beyond the boundary elements pairs with a divergence-free
    # field, minus one constraint
    assert iso_table.kernel_dim == 400 - 4
    assert modes.solve_modes(
        modes.assemble_radial(iso, 2, 200)).kernel_dim == 200 - 4


def test_kernel_grows_with_resolution(baro, baro_table):
    coarse = modes.solve_modes(modes.assemble_radial(baro, 2, 200))
    assert baro_table.kernel_dim > coarse.kernel_dim


@pytest.mark.parametrize("name", ["iso_table", "baro_table"])
def test_spectrum_nonnegative_and_increasing(name, request):
    table = request.getfixturevalue(name)
    vals = table.eigenvalues
    assert np.all(vals >= -table.kernel_threshold)
    pos = table.positive
    assert np.all(np.diff(pos) > 0.0)


def test_iterative_matches_dense(baro_op, baro_table):
    it = modes.solve_modes(baro_op, method="iterative")
    assert modes.dual_solver_defect(baro_table, it) <= 1e-8
    assert modes.orthonormality_defect(baro_op, it) <= 1e-10
    # Lanczos vectors only carry the square root of the Rayleigh quotient
    # accuracy, so pointwise residuals are checked on the dense table, from
    # the f-mode up (buoyancy modes at the cutoff only measure roundoff)
    cols = np.nonzero(baro_table.eigenvalues >= BARO_F_MODE * (1 - 1e-9))[0]
    assert modes.residual_defect(baro_op, baro_table, cols[:10]) <= 1e-8


def test_iterative_is_deterministic(baro_op):
    a = modes.solve_modes(baro_op, method="iterative")
    b = modes.solve_modes(baro_op, method="iterative")
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_dense_orthonormal_and_residual(iso_op, iso_table):
    assert modes.orthonormality_defect(iso_op, iso_table) <= 1e-10
    cols = np.nonzero(iso_table.eigenvalues > iso_table.kernel_threshold)[0]
    assert modes.residual_defect(iso_op, iso_table, cols[:10]) <= 1e-8


def test_baroclinic_classification(baro, baro_table):
    ref = modes.reference_fundamental(baro, 2, 400)
    cls = modes.classify_and_check(baro_table, ref)
    assert abs(cls.f_mode - BARO_F_MODE) <= 1e-9
    assert len(cls.g_modes) >= 6
    assert cls.strictly_decreasing
    assert np.all(cls.g_modes > 0.0) and np.all(cls.g_modes < cls.f_mode)
    assert 0.5 <= cls.trend_ratio <= 2.0
    assert len(cls.negative) == 0
    assert baro_table.labels.count("f") == 1


def test_isentropic_classification(iso_table):
    cls = modes.classify_and_check(iso_table, iso_table.positive[0])
    assert len(cls.g_modes) == 0
    assert cls.f_mode == iso_table.positive[0]


def test_companion_toy_pairs():
    assert modes.expected_companion_pair(4.0) == (2j, -2j)
    assert modes.expected_companion_pair(-1.0) == (1.0, -1.0)
    evs = np.linalg.eigvals(modes.block_companion(np.array([[4.0]])))
    assert np.allclose(sorted(evs.imag), [-2.0, 2.0], atol=1e-14)
    lmat = np.diag([-1.0, 4.0])
    evs = np.sort_complex(np.linalg.eigvals(modes.block_companion(lmat)))
    assert np.allclose(evs, [-1.0, -2j, 2j, 1.0], atol=1e-14)


def test_companion_matches_modes(iso_op, iso_table):
    out = modes.companion_check(iso_op, iso_table, count=10)
    assert out["max_rel_error"] <= 1e-8
    assert len(out["modes"]) == 10


def _toy_table(values):
    vals = np.asarray(values, dtype=float)
    return modes.ModeTable(l=0, eigenvalues=vals,
                           eigenvectors=np.eye(len(vals)),
                           kernel_threshold=1e-12)


def test_synthesis_single_modes():
    table = _toy_table([-1.0, 0.0, 4.0])
    u0 = np.array([1.0, 2.0, 1.0])
    v0 = np.array([0.0, 3.0, 0.0])
    for t in (0.0, 0.3, 1.7):
        u, du = modes.synthesize(table, u0, v0, t)
        assert np.allclose(u, [np.cosh(t), 2.0 + 3.0 * t, np.cos(2.0 * t)],
                           rtol=1e-14, atol=1e-14)
        assert np.allclose(du, [np.sinh(t), 3.0, -2.0 * np.sin(2.0 * t)],
                           rtol=1e-14, atol=1e-14)


def test_synthesis_initial_data(iso_table):
    rng = np.random.default_rng(5)
    n = len(iso_table.eigenvalues)
    u0, v0 = rng.normal(size=n), rng.normal(size=n)
    u, du = modes.synthesize(iso_table, u0, v0, 0.0)
    assert np.allclose(u, u0, rtol=0, atol=1e-12)
    assert np.allclose(du, v0, rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.0, 50.0), seed=st.integers(0, 2**16))
def test_energy_conserved_for_oscillating_modes(t, seed):
    rng = np.random.default_rng(seed)
    table = _toy_table(np.sort(rng.uniform(0.1, 20.0, 8)))
    u0, v0 = rng.normal(size=8), rng.normal(size=8)
    e0 = modes.modal_energy(table, u0, v0)
    u, du = modes.synthesize(table, u0, v0, t)
    assert abs(modes.modal_energy(table, u, du) - e0) <= 1e-10 * e0


def test_synthesis_length_mismatch():
    with pytest.raises(ValueError):
        modes.synthesize(_toy_table([1.0, 2.0]), [1.0], [0.0, 0.0], 1.0)


def test_assembly_errors(iso):
    from esspec.background import build_background
    with pytest.raises(ValueError):
        modes.assemble_radial(iso, -1)
    with pytest.raises(ValueError):
        modes.assemble_radial(iso, 2, nodes=99)
    with pytest.raises(ValueError):
        modes.assemble_radial(iso, 2, integrand="cubic")
    spun = build_background(5.0 / 3.0, 0.0, omega=0.5)
    with pytest.raises(ValueError):
        modes.assemble_radial(spun, 2)


def test_solver_errors(iso_op):
    with pytest.raises(ValueError):
        modes.solve_modes(iso_op, method="qr")


def test_grid_grading():
    g = modes.radial_grid(2.0, 101, 2.0)
    assert g[0] == 0.0 and g[-1] == 2.0
    h = np.diff(g)
    assert np.all(np.diff(h) < 0.0)
    assert np.allclose(modes.radial_grid(2.0, 101), np.linspace(0, 2, 101))


def test_outputs(iso_op, iso_table, tmp_path):
    modes.write_modes_json(iso_table, tmp_path / "m.json", count=5,
                           extra=dict(note="x"))
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["l"] == 2 and len(data["positive"]) == 5
    assert data["kernel_dim"] == iso_table.kernel_dim and data["note"] == "x"
    modes.write_modes_csv(iso_op, iso_table, tmp_path / "m.csv", count=3)
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0] == "r,phi_mode0,phi_mode1,phi_mode2"
    assert len(rows) == len(iso_op.grid) + 1
