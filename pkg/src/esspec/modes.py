"""
Spheroidal oscillation modes of a spherical star in the Cowling
approximation, one harmonic degree l at a time.

The displacement u = xi_r(r) Y e_r + xi_h(r) r grad Y is discretized in the
variables

    Phi = r^2 k1 xi_r      (continuous piecewise linear),
    Psi = L r k1 xi_h      (piecewise constant),  L = l (l + 1),

for which div(k1 u) = (Phi' - Psi) / r^2.  Divergence-free fields of the
discrete space are then exactly representable, so the infinite-dimensional
null space of the isentropic operator has an exact discrete counterpart and
does not leak spurious small eigenvalues.  The quadratic form and the mass
are

    Q[u] = int [ gamma P / k1^2 (Phi' - Psi)^2 + rho N^2 / k1^2 Phi^2 ] dr / r^2
    M[u] = int rho / k1^2 [ Phi^2 / r^2 + Psi^2 / L ] dr

(see docs/radial_reduction.md).  The element touching the centre and the
element touching the surface carry no Psi and have their outer Phi pinned,
which is where finite energy forces the fields to vanish.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from . import _io
from .background import FORMAT_VERSION

KERNEL_RTOL = 1e-10
_GAUSS = np.polynomial.legendre.leggauss(6)
# power of the s -> d = h s^p substitution on the surface element
_SURFACE_POWER = 4


@dataclass
class RadialOperator:
    """
    Stiffness and mass matrices of one harmonic degree.

    ``dof_kind`` marks each unknown as "phi" (nodal) or "psi" (element);
    ``dof_index`` gives the node or element it belongs to.
    """

    l: int
    grid: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    dof_kind: np.ndarray
    dof_index: np.ndarray
    gamma: float
    integrand: str

    @property
    def size(self):
        return self.stiffness.shape[0]

    def asymmetry(self):
        k = self.stiffness
        return float(np.abs(k - k.T).max() / np.abs(k).max())


def radial_grid(radius, nodes, grading=1.0):
    """
    Radial nodes on [0, R], optionally clustered towards the surface:
    r_i = R (1 - (1 - i/(N-1))^grading).
    """
    s = np.linspace(0.0, 1.0, nodes)
    return radius * (1.0 - (1.0 - s) ** grading)


def _element_points(grid):
    """Quadrature abscissae and weights, shape (elements, points)."""
    x, w = _GAUSS
    left, right = grid[:-1], grid[1:]
    h = right - left
    r = left[:, None] + 0.5 * h[:, None] * (x + 1.0)
    wt = 0.5 * h[:, None] * w[None, :]
    # graded substitution on the surface element, where the coefficients
    # carry integrable powers of the depth
    s = 0.5 * (x + 1.0)
    p = _SURFACE_POWER
    r[-1] = right[-1] - h[-1] * s**p
    wt[-1] = 0.5 * w * p * h[-1] * s ** (p - 1)
    return r, wt


def _coefficients(model, r):
    prim = model.primitives(r.ravel())
    n = model.index
    g = model.gamma
    theta = np.maximum(prim["theta"], 1e-300).reshape(r.shape)
    dtheta = prim["dtheta"].reshape(r.shape)
    ent = prim["entropy"].reshape(r.shape)
    dent = prim["dentropy"].reshape(r.shape)
    big_e = np.exp(ent / (g * model.cv))
    a_r = -dent / (g * model.cv)
    return dict(theta=theta, dtheta=dtheta, big_e=big_e, a_r=a_r, n=n, g=g,
                k1=theta**n, dlogk1=n * dtheta / theta,
                pressure=theta ** (n + 1.0),
                dpressure=(n + 1.0) * theta**n * dtheta,
                rho=theta**n / big_e,
                dlogrho=n * dtheta / theta + a_r)


def _dof_maps(nodes, l):
    n_el = nodes - 1
    phi_nodes = np.arange(2, nodes - 1)
    phi_id = -np.ones(nodes, dtype=int)
    phi_id[phi_nodes] = np.arange(len(phi_nodes))
    kinds = ["phi"] * len(phi_nodes)
    index = list(phi_nodes)
    psi_id = -np.ones(n_el, dtype=int)
    if l > 0:
        psi_el = np.arange(1, n_el - 1)
        psi_id[psi_el] = len(phi_nodes) + np.arange(len(psi_el))
        kinds += ["psi"] * len(psi_el)
        index += list(psi_el)
    return phi_id, psi_id, np.array(kinds), np.array(index)


def assemble_radial(model, l, nodes=400, integrand="factored", grading=2.0):
    """
    Assemble the stiffness and mass matrices for harmonic degree l.

    Parameters
    ----------
    model : BackgroundModel
        spherical background; rotation must be zero
    l : int
        harmonic degree
    nodes : int
        number of radial nodes, at least 100
    integrand : {"factored", "three_term", "square"}
        "factored" uses delta P^2 / (gamma P) + rho N^2 xi_r^2;
        "three_term" uses gamma P chi^2 + 2 P' xi_r chi + P' rho' xi_r^2 / rho;
        "square" uses sigma |div(rho u)|^2, valid for isentropic stars only
    grading : float
        surface clustering exponent of the grid

    Returns
    -------
    RadialOperator
    """
    if l < 0:
        raise ValueError("harmonic degree must be nonnegative")
    if nodes < 100:
        raise ValueError("at least 100 nodes are required")
    if model.omega != 0.0:
        raise ValueError("the radial reduction needs a non-rotating star")
    big_l = l * (l + 1.0)
    grid = radial_grid(model.radius, nodes, grading)
    r, wt = _element_points(grid)
    cf = _coefficients(model, r)
    h = np.diff(grid)[:, None]
    n_a = (grid[1:, None] - r) / h
    n_b = (r - grid[:-1, None]) / h
    # local vectors over (Phi_a, Phi_b, Psi)
    zeros = np.zeros_like(r)
    nvec = np.stack([n_a, n_b, zeros], axis=-1)
    dvec = np.stack([-1.0 / h + zeros, 1.0 / h + zeros, -1.0 + zeros * 0.0],
                    axis=-1)
    if l == 0:
        dvec[..., 2] = 0.0

    r2 = r**2
    k1 = cf["k1"]
    if integrand == "factored":
        a_coef = cf["g"] * cf["theta"] ** (1.0 - cf["n"]) / r2
        b_coef = ((cf["n"] + 1.0) * cf["dtheta"] * cf["a_r"]
                  * cf["theta"] ** (-cf["n"]) / r2)
        k_loc = (np.einsum("eq,eqi,eqj->eij", wt * a_coef, dvec, dvec)
                 + np.einsum("eq,eqi,eqj->eij", wt * b_coef, nvec, nvec))
    elif integrand in ("three_term", "square"):
        chi = (dvec - cf["dlogk1"][..., None] * nvec) / (r2 * k1)[..., None]
        xi_r = nvec / (r2 * k1)[..., None]
        if integrand == "three_term":
            gp = cf["g"] * cf["pressure"]
            dp = cf["dpressure"]
            k_loc = (np.einsum("eq,eqi,eqj->eij", wt * r2 * gp, chi, chi)
                     + np.einsum("eq,eqi,eqj->eij", wt * r2 * dp, xi_r, chi)
                     + np.einsum("eq,eqi,eqj->eij", wt * r2 * dp, chi, xi_r)
                     + np.einsum("eq,eqi,eqj->eij",
                                 wt * r2 * dp * cf["dlogrho"], xi_r, xi_r))
        else:
            sigma = cf["g"] * cf["pressure"] / cf["rho"] ** 2
            div = (cf["rho"][..., None] * chi
                   + (cf["rho"] * cf["dlogrho"])[..., None] * xi_r)
            k_loc = np.einsum("eq,eqi,eqj->eij", wt * r2 * sigma, div, div)
    else:
        raise ValueError(f"unknown integrand {integrand!r}")

    c_coef = cf["theta"] ** (-cf["n"]) / cf["big_e"]
    m_loc = np.einsum("eq,eqi,eqj->eij", wt * c_coef / r2, nvec, nvec)
    if l > 0:
        m_loc[:, 2, 2] += np.sum(wt * c_coef, axis=1) / big_l

    phi_id, psi_id, kinds, index = _dof_maps(nodes, l)
    loc_ids = np.stack([phi_id[:-1], phi_id[1:], psi_id], axis=-1)
    size = len(kinds)
    kmat = np.zeros((size, size))
    mmat = np.zeros((size, size))
    for i in range(3):
        for j in range(3):
            ok = (loc_ids[:, i] >= 0) & (loc_ids[:, j] >= 0)
            np.add.at(kmat, (loc_ids[ok, i], loc_ids[ok, j]), k_loc[ok, i, j])
            np.add.at(mmat, (loc_ids[ok, i], loc_ids[ok, j]), m_loc[ok, i, j])
    return RadialOperator(l=int(l), grid=grid, stiffness=kmat, mass=mmat,
                          dof_kind=kinds, dof_index=index,
                          gamma=float(model.gamma), integrand=integrand)


######################################################################
# Eigenproblem
######################################################################

@dataclass
class ModeTable:
    """
    Eigenpairs of one degree, ascending, with M-orthonormal eigenvectors
    stored as columns.
    """

    l: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kernel_threshold: float
    labels: list = field(default_factory=list)
    method: str = "dense"
    shift: float = None

    @property
    def kernel_dim(self):
        return int(np.sum(np.abs(self.eigenvalues) <= self.kernel_threshold))

    @property
    def positive(self):
        """Eigenvalues above the kernel threshold."""
        return self.eigenvalues[self.eigenvalues > self.kernel_threshold]

    def to_dict(self, count=None):
        pos = self.positive
        if count is not None:
            pos = pos[:count]
        return dict(format_version=FORMAT_VERSION, l=self.l,
                    method=self.method,
                    kernel_threshold=self.kernel_threshold,
                    kernel_dim=self.kernel_dim,
                    negative=self.eigenvalues[
                        self.eigenvalues < -self.kernel_threshold].tolist(),
                    positive=pos.tolist(),
                    labels=list(self.labels))


def solve_modes(op, count=20, method="dense", sigma=None):
    """
    Solve K x = lambda M x.

    Parameters
    ----------
    op : RadialOperator
    count : int
        number of eigenpairs above the kernel returned by the iterative path
    method : {"dense", "iterative"}
        "dense" returns the full spectrum; "iterative" uses shift-invert
        Lanczos and returns only the ``count`` eigenvalues just above
        ``sigma``
    sigma : float, optional
        shift of the iterative path; defaults to a value just above the
        kernel threshold of the dense spectrum scale estimate

    Returns
    -------
    ModeTable
    """
    try:
        sla.cholesky(op.mass, lower=True)
    except sla.LinAlgError as exc:
        raise RuntimeError("mass matrix is not positive definite") from exc
    if method == "dense":
        vals, vecs = sla.eigh(op.stiffness, op.mass)
        thr = KERNEL_RTOL * float(np.abs(vals).max())
        return ModeTable(l=op.l, eigenvalues=vals, eigenvectors=vecs,
                         kernel_threshold=thr, method="dense")
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    kmat = sp.csc_matrix(op.stiffness)
    mmat = sp.csc_matrix(op.mass)
    # fixed Lanczos start vector; ARPACK's own draw depends on process state
    start = np.random.default_rng(0).normal(size=op.size)
    top = float(eigsh(kmat, k=1, M=mmat, which="LA", v0=start,
                      return_eigenvectors=False, tol=1e-6)[0])
    thr = KERNEL_RTOL * top
    shift = 1e3 * thr if sigma is None else float(sigma)
    # with shift-invert, eigenvalues just above the shift become the
    # largest algebraic values of (K - sigma M)^-1 M
    _, vecs = eigsh(kmat, k=count, M=mmat, sigma=shift, which="LA",
                    v0=start, tol=1e-14)
    # Rayleigh quotients of the Lanczos vectors; the factorization of the
    # nearly singular shifted matrix limits the raw Ritz values to ~1e-9
    vals = (np.einsum("ij,ij->j", vecs, kmat @ vecs)
            / np.einsum("ij,ij->j", vecs, mmat @ vecs))
    order = np.argsort(vals)
    return ModeTable(l=op.l, eigenvalues=vals[order],
                     eigenvectors=vecs[:, order], kernel_threshold=thr,
                     method="iterative", shift=shift)


def dual_solver_defect(dense, iterative):
    """
    Max relative difference between the iterative eigenvalues and the
    dense eigenvalues lying just above the same shift.
    """
    above = dense.eigenvalues[dense.eigenvalues > iterative.shift]
    k = len(iterative.eigenvalues)
    return float(np.max(np.abs(iterative.eigenvalues / above[:k] - 1.0)))


def orthonormality_defect(op, table, columns=None):
    vecs = table.eigenvectors if columns is None else table.eigenvectors[:, columns]
    gram = vecs.T @ op.mass @ vecs
    return float(np.abs(gram - np.eye(gram.shape[0])).max())


def residual_defect(op, table, columns):
    """max_k ||(K - lambda_k M) x_k|| / ||K x_k|| over the given columns."""
    out = 0.0
    for c in columns:
        x = table.eigenvectors[:, c]
        kx = op.stiffness @ x
        res = kx - table.eigenvalues[c] * (op.mass @ x)
        out = max(out, float(np.linalg.norm(res) / np.linalg.norm(kx)))
    return out


######################################################################
# Classification
######################################################################

@dataclass
class Classification:
    reference: float
    f_mode: float
    g_modes: np.ndarray
    p_modes: np.ndarray
    negative: np.ndarray
    strictly_decreasing: bool
    trend_ratio: float
    threshold_sensitivity: dict

    def to_dict(self):
        return dict(reference=self.reference, f_mode=self.f_mode,
                    g_count=int(len(self.g_modes)),
                    g_modes=self.g_modes[:50].tolist(),
                    p_modes=self.p_modes[:20].tolist(),
                    negative_count=int(len(self.negative)),
                    strictly_decreasing=self.strictly_decreasing,
                    trend_ratio=self.trend_ratio,
                    threshold_sensitivity=self.threshold_sensitivity)


def reference_fundamental(model, l, nodes, grading=2.0):
    """Lowest eigenvalue above the kernel of the isentropic star with the
    same gamma."""
    from .background import build_background
    iso = build_background(model.gamma, 0.0, nodes=model.nodes, cv=model.cv)
    table = solve_modes(assemble_radial(iso, l, nodes, grading=grading))
    return float(table.positive[0])


def classify_and_check(table, reference):
    """
    Label the spectrum relative to the isentropic fundamental ``reference``.

    The f-mode is the eigenvalue above the kernel closest to ``reference``
    in logarithmic distance; buoyancy can pull it below the reference, so
    g-modes are the positive eigenvalues strictly below the f-mode, listed
    by mode order (decreasing eigenvalue).  Everything above is a p-mode.
    """
    vals = table.eigenvalues
    thr = table.kernel_threshold
    pos = vals[vals > thr]
    if len(pos) == 0:
        raise ValueError("no eigenvalues above the kernel threshold")
    f_value = float(pos[np.argmin(np.abs(np.log(pos / reference)))])
    g = pos[pos < f_value][::-1]
    p = pos[pos > f_value]
    dec = bool(len(g) < 2 or np.all(np.diff(g) < 0.0))
    # lambda ~ 1/k^2 makes lambda_k k^2 level off; spread over the middle
    # of the resolved family
    if len(g) >= 8:
        k = np.arange(1, len(g) + 1)
        lo, hi = len(g) // 4, len(g) // 2
        prod = (g * k**2)[lo:hi]
        trend = float(prod.max() / prod.min())
    else:
        trend = float("nan")
    sens = {}
    for factor in (0.1, 10.0):
        sens[str(factor)] = int(np.sum((vals > factor * thr)
                                       & (vals < f_value)))
    labels = []
    for v in vals:
        if abs(v) <= thr:
            labels.append("kernel")
        elif v < 0.0:
            labels.append("unstable")
        elif v < f_value:
            labels.append("g")
        elif v == f_value:
            labels.append("f")
        else:
            labels.append("p")
    table.labels = labels
    return Classification(reference=reference, f_mode=f_value, g_modes=g,
                          p_modes=p, negative=vals[vals < -thr],
                          strictly_decreasing=dec, trend_ratio=trend,
                          threshold_sensitivity=sens)


######################################################################
# Companion system and time evolution
######################################################################

def companion_matrix(op):
    """
    Block matrix [[0, Lt], [-I, 0]] with Lt = C^-1 K C^-T and M = C C^T.
    """
    chol = sla.cholesky(op.mass, lower=True)
    tmp = sla.solve_triangular(chol, op.stiffness, lower=True)
    lt = sla.solve_triangular(chol, tmp.T, lower=True).T
    lt = 0.5 * (lt + lt.T)
    return block_companion(lt)


def block_companion(lmat):
    n = lmat.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[:n, n:] = lmat
    out[n:, :n] = -np.eye(n)
    return out


def expected_companion_pair(lam):
    """+-i sqrt(lambda) for lambda >= 0, +-sqrt(|lambda|) otherwise."""
    if lam >= 0.0:
        root = 1j * math.sqrt(lam)
    else:
        root = complex(math.sqrt(-lam))
    return root, -root


def companion_check(op, table, count=10, columns=None):
    """
    Compare companion eigenvalues with +-i sqrt(lambda) for the lowest
    ``count`` eigenvalues above the kernel, or for the table ``columns``
    when given.

    Returns
    -------
    dict with the worst relative mismatch and per-mode details
    """
    evs = np.linalg.eigvals(companion_matrix(op))
    if columns is None:
        pos = table.positive[:count]
    else:
        pos = table.eigenvalues[np.asarray(columns)]
    worst = 0.0
    details = []
    for lam in pos:
        for target in expected_companion_pair(float(lam)):
            err = float(np.min(np.abs(evs - target)) / abs(target))
            worst = max(worst, err)
        details.append(dict(eigenvalue=float(lam), rel_error=err))
    return dict(max_rel_error=worst, modes=details)


def _propagators(lam, t, thr):
    """cos-like and sin-like propagators and their time derivatives."""
    lam = np.asarray(lam, dtype=float)
    c = np.ones_like(lam)
    s = np.full_like(lam, float(t))
    dc = np.zeros_like(lam)
    ds = np.ones_like(lam)
    pos = lam > thr
    neg = lam < -thr
    w = np.sqrt(lam[pos])
    c[pos], s[pos] = np.cos(w * t), np.sin(w * t) / w
    dc[pos], ds[pos] = -w * np.sin(w * t), np.cos(w * t)
    k = np.sqrt(-lam[neg])
    c[neg], s[neg] = np.cosh(k * t), np.sinh(k * t) / k
    dc[neg], ds[neg] = k * np.sinh(k * t), np.cosh(k * t)
    return c, s, dc, ds


def exponential_coefficients(lam, u0, v0, thr):
    """
    Coefficients c_plus, c_minus of exp(+-i sqrt(lambda) t) (lambda > 0) or
    exp(+-sqrt(|lambda|) t) (lambda < 0) matching the initial data.
    """
    lam = np.asarray(lam, dtype=float)
    root = np.where(lam > thr, 1j * np.sqrt(np.abs(lam)),
                    np.sqrt(np.abs(lam)) + 0j)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(lam) > thr, v0 / root, 0.0)
    return 0.5 * (u0 + ratio), 0.5 * (u0 - ratio), root


def synthesize(table, u0_coeffs, v0_coeffs, t):
    """
    Modal solution of u'' + L u = 0 at time t.

    Parameters
    ----------
    table : ModeTable
    u0_coeffs, v0_coeffs : array_like
        coefficients of u(0) and du/dt(0) in the eigenvector basis
    t : float

    Returns
    -------
    (u, du) : coefficient arrays of u(t) and du/dt(t)

    Notes
    -----
    Modes above the kernel threshold evolve as
    c_plus exp(root t) + c_minus exp(-root t) with root = i sqrt(lambda)
    (or sqrt(|lambda|) when lambda < 0).  Kernel modes evolve as
    u0 + v0 t, the solution of u'' = 0.
    """
    lam = table.eigenvalues
    u0 = np.asarray(u0_coeffs, dtype=float)
    v0 = np.asarray(v0_coeffs, dtype=float)
    if u0.shape != lam.shape or v0.shape != lam.shape:
        raise ValueError("coefficient length does not match the mode table")
    thr = table.kernel_threshold
    c_plus, c_minus, root = exponential_coefficients(lam, u0, v0, thr)
    e_plus = np.exp(root * t)
    e_minus = np.exp(-root * t)
    u = c_plus * e_plus + c_minus * e_minus
    du = root * (c_plus * e_plus - c_minus * e_minus)
    kern = np.abs(lam) <= thr
    u = np.where(kern, u0 + v0 * t, u)
    du = np.where(kern, v0, du)
    return u.real, du.real


def modal_energy(table, u, du):
    """sum lambda |u_n|^2 + |du_n|^2."""
    return float(np.sum(table.eigenvalues * np.abs(u) ** 2
                        + np.abs(du) ** 2))


######################################################################
# Output
######################################################################

def nodal_fields(op, vector):
    """
    xi_r at nodes and xi_h at element midpoints from one eigenvector,
    returned in the Phi, Psi variables (r^2 k1 xi_r and L r k1 xi_h).
    """
    nodes = len(op.grid)
    phi = np.zeros(nodes)
    psi = np.zeros(nodes - 1)
    sel = op.dof_kind == "phi"
    phi[op.dof_index[sel]] = vector[sel]
    psi[op.dof_index[~sel]] = vector[~sel]
    return phi, psi


def write_modes_json(table, path, count=20, extra=None):
    data = table.to_dict(count)
    if extra:
        data.update(extra)
    Path(path).write_text(_io.dumps(data))


def write_modes_csv(op, table, path, count=5):
    """Phi at the nodes for the lowest ``count`` modes above the kernel."""
    cols = np.nonzero(table.eigenvalues > table.kernel_threshold)[0][:count]
    fields_ = [nodal_fields(op, table.eigenvectors[:, c])[0] for c in cols]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r"] + [f"phi_mode{k}" for k in range(len(cols))])
        for i, r in enumerate(op.grid):
            writer.writerow([repr(float(r))]
                            + [repr(float(f[i])) for f in fields_])
