"""
Pointwise spectral intervals of the rotating, stratified oscillation
operator and their union over a meridional grid.

At a meridional point the first-order system has a multiplication part
built from two 2x2 blocks

    H1 = [[-2 Omega, -(c^2/k1) dk1/dw],      H2 = [[2 Omega,        0      ],
          [    0,    -(c^2/k1) dk1/dz]],           [dk3/dw / k3, dk3/dz / k3]]

and the quantities

    q1 = 4 Omega^2 + (c^2 / (k1 k3)) (dk1/dw dk3/dw + dk1/dz dk3/dz),
    q2 = (c^2 / (k1 k3)) (dk1/dw dk3/dz + dk1/dz dk3/dw).

``alpha_interval`` evaluates the closed-form endpoints
alpha_pm = (q1 +- sqrt(q1^2 + q2^2)) / 2.  ``alpha_oracle`` instead
diagonalizes the symmetric part of -H1 H2 directly.  The two routes agree
when the diagonal entries p = 4 Omega^2 + K dk1/dw dk3/dw and
r = K dk1/dz dk3/dz satisfy p r = 0 (equator, axis, isentropic stars);
elsewhere the eigenvalues are (q1 +- sqrt((p - r)^2 + q2^2)) / 2.  Both are
kept and the map records the gap between them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _io
from .background import FORMAT_VERSION
from .fields import sample_meridional, sample_radial

# fraction of the radius covered by the default grid
GRID_EXTENT = 0.95


@dataclass(frozen=True)
class AlphaInterval:
    """Closed-form interval endpoints (arrays broadcast like q1, q2)."""

    q1: np.ndarray
    q2: np.ndarray
    alpha_minus: np.ndarray
    alpha_plus: np.ndarray


def q_pair(msample, omega):
    """
    q1 and q2 at meridional sample points.

    Parameters
    ----------
    msample : MeridionalSample
    omega : float
        rotation rate

    Returns
    -------
    (q1, q2) : tuple of ndarray
    """
    scale = msample.c**2 / (msample.k1 * msample.k3)
    g1, g3 = msample.grad_k1, msample.grad_k3
    q1 = 4.0 * omega**2 + scale * (g1[..., 0] * g3[..., 0]
                                   + g1[..., 1] * g3[..., 1])
    q2 = scale * (g1[..., 0] * g3[..., 1] + g1[..., 1] * g3[..., 0])
    return q1, q2


def alpha_interval(q1, q2):
    """
    Closed-form endpoints alpha_pm = (q1 +- sqrt(q1^2 + q2^2)) / 2.

    The subtraction in alpha_minus is rewritten through
    alpha_minus alpha_plus = -q2^2 / 4 when q1 > 0 (and symmetrically for
    alpha_plus when q1 < 0) to avoid cancellation.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    root = np.hypot(q1, q2)
    big = 0.5 * (np.abs(q1) + root)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(big > 0.0, -0.25 * q2**2 / big, 0.0)
    plus = np.where(q1 >= 0.0, big, -small)
    minus = np.where(q1 >= 0.0, small, -big)
    return AlphaInterval(q1=q1, q2=q2, alpha_minus=minus, alpha_plus=plus)


def natural_scale(msample, omega):
    """
    4 Omega^2 + |grad P / rho| |grad rho / rho|, the size that q1 and q2
    would have without the cancellation making them vanish for isentropic
    stars; used to tell roundoff from a genuine interval.
    """
    gp = np.linalg.norm(msample.grad_P_over_rho, axis=-1)
    r = np.hypot(msample.w, msample.z)
    grho = np.abs(msample.drhodr / msample.rho) * np.ones_like(r)
    return 4.0 * omega**2 + gp * grho


def is_degenerate(interval, scale, rtol=1e-12):
    """True where alpha_plus - alpha_minus is roundoff relative to scale."""
    return (interval.alpha_plus - interval.alpha_minus) <= rtol * scale


def h_blocks(msample, omega):
    """
    The blocks H1 and H2, shape (..., 2, 2).
    """
    shape = np.shape(msample.w)
    h1 = np.zeros(shape + (2, 2))
    h2 = np.zeros(shape + (2, 2))
    coef = msample.c**2 / msample.k1
    h1[..., 0, 0] = -2.0 * omega
    h1[..., 0, 1] = -coef * msample.grad_k1[..., 0]
    h1[..., 1, 1] = -coef * msample.grad_k1[..., 1]
    h2[..., 0, 0] = 2.0 * omega
    h2[..., 1, 0] = msample.grad_k3[..., 0] / msample.k3
    h2[..., 1, 1] = msample.grad_k3[..., 1] / msample.k3
    return h1, h2


def symmetric_eig2(mat):
    """
    Eigen-decomposition of real symmetric 2x2 matrices in closed form.

    Returns
    -------
    values : ndarray (..., 2)
        ascending eigenvalues
    vectors : ndarray (..., 2, 2)
        unit eigenvectors as columns, matching ``values``
    """
    a = mat[..., 0, 0]
    b = 0.5 * (mat[..., 0, 1] + mat[..., 1, 0])
    d = mat[..., 1, 1]
    mean = 0.5 * (a + d)
    half = 0.5 * (a - d)
    rad = np.hypot(half, b)
    values = np.stack([mean - rad, mean + rad], axis=-1)
    # rotation angle of the larger eigenvector
    angle = 0.5 * np.arctan2(2.0 * b, a - d)
    e_plus = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    e_minus = np.stack([-np.sin(angle), np.cos(angle)], axis=-1)
    vectors = np.stack([e_minus, e_plus], axis=-1)
    return values, vectors


def neg_sym_product(msample, omega):
    """Symmetric part of -H1 H2."""
    h1, h2 = h_blocks(msample, omega)
    prod = -h1 @ h2
    return 0.5 * (prod + np.swapaxes(prod, -1, -2))


def alpha_oracle(msample, omega):
    """
    Eigenvalues of the symmetric part of -H1 H2.

    Returns
    -------
    (mu_minus, mu_plus) : ascending eigenvalue arrays
    """
    values, _ = symmetric_eig2(neg_sym_product(msample, omega))
    return values[..., 0], values[..., 1]


######################################################################
# Meridional map
######################################################################

@dataclass(frozen=True)
class GridSpec:
    """Tensor grid of cell midpoints over w in (0, f R], z in [-f R, f R]."""

    nw: int = 64
    nz: int = 64
    extent: float = GRID_EXTENT

    def points(self, radius):
        top = self.extent * radius
        w = (np.arange(self.nw) + 0.5) * top / self.nw
        z = -top + (np.arange(self.nz) + 0.5) * 2.0 * top / self.nz
        ww, zz = np.meshgrid(w, z, indexing="ij")
        inside = np.hypot(ww, zz) < top
        return ww[inside], zz[inside]


@dataclass(frozen=True)
class SpectrumMap:
    """
    Intervals over a meridional grid and the derived global quantities.

    The cross and disk entries use the closed-form endpoints; the
    ``oracle_*`` entries repeat them for the eigenvalues of the symmetric
    part of -H1 H2.
    """

    omega: float
    w: np.ndarray
    z: np.ndarray
    intervals: AlphaInterval
    oracle_minus: np.ndarray
    oracle_plus: np.ndarray
    global_min: float
    global_max: float
    cross_real_halfwidth: float
    cross_imag_halfwidth: float
    oracle_cross_real_halfwidth: float
    oracle_cross_imag_halfwidth: float
    max_oracle_gap: float
    sup_grad_p_over_rho: float
    sup_a: float
    disk_radius_sq: float
    disk_ok: bool
    oracle_disk_ok: bool
    surface_gravity: float

    def to_dict(self):
        iv = self.intervals
        return dict(
            format_version=FORMAT_VERSION,
            omega=self.omega,
            grid=dict(w=self.w.tolist(), z=self.z.tolist()),
            q1=iv.q1.tolist(), q2=iv.q2.tolist(),
            alpha_minus=iv.alpha_minus.tolist(),
            alpha_plus=iv.alpha_plus.tolist(),
            oracle=dict(minus=self.oracle_minus.tolist(),
                        plus=self.oracle_plus.tolist(),
                        max_gap=self.max_oracle_gap,
                        cross=dict(real=self.oracle_cross_real_halfwidth,
                                   imag=self.oracle_cross_imag_halfwidth),
                        disk_ok=self.oracle_disk_ok),
            cross=dict(real=self.cross_real_halfwidth,
                       imag=self.cross_imag_halfwidth,
                       global_min=self.global_min,
                       global_max=self.global_max),
            disk=dict(radius_sq=self.disk_radius_sq, ok=self.disk_ok,
                      sup_grad_p_over_rho=self.sup_grad_p_over_rho,
                      sup_a=self.sup_a,
                      surface_gravity=self.surface_gravity,
                      note="suprema are grid maxima, a lower bound of the "
                           "true suprema"),
            scope="statements concern the first-order companion operator",
        )

    def write_json(self, path):
        Path(path).write_text(_io.dumps(self.to_dict()))

    def write_csv(self, path):
        iv = self.intervals
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["w", "z", "q1", "q2", "alpha_minus", "alpha_plus",
                             "oracle_minus", "oracle_plus"])
            for row in zip(self.w, self.z, iv.q1, iv.q2, iv.alpha_minus,
                           iv.alpha_plus, self.oracle_minus, self.oracle_plus):
                writer.writerow([repr(float(v)) for v in row])


def spectrum_map(model, omega=None, grid_spec=None):
    """
    Evaluate intervals on a meridional grid and audit the disk bound.

    Parameters
    ----------
    model : BackgroundModel
    omega : float, optional
        rotation rate; defaults to ``model.omega``
    grid_spec : GridSpec, optional

    Returns
    -------
    SpectrumMap
    """
    omega = model.omega if omega is None else float(omega)
    grid_spec = grid_spec or GridSpec()
    w, z = grid_spec.points(model.radius)
    if w.size == 0:
        raise ValueError("empty spectrum grid")
    ms = sample_meridional(model, w, z)
    q1, q2 = q_pair(ms, omega)
    iv = alpha_interval(q1, q2)
    mu_minus, mu_plus = alpha_oracle(ms, omega)

    gmin = float(iv.alpha_minus.min())
    gmax = float(iv.alpha_plus.max())
    sup_gp = float(np.linalg.norm(ms.grad_P_over_rho, axis=-1).max())
    sup_a = float(np.linalg.norm(ms.a_vec, axis=-1).max())
    disk = max(4.0 * omega**2 + sup_gp**2, 4.0 * omega**2 + sup_a**2)
    reach = np.maximum(iv.alpha_plus, -iv.alpha_minus)
    oracle_reach = np.maximum(mu_plus, -mu_minus)
    gap = max(float(np.abs(iv.alpha_minus - mu_minus).max()),
              float(np.abs(iv.alpha_plus - mu_plus).max()))
    return SpectrumMap(
        omega=omega, w=w, z=z, intervals=iv, oracle_minus=mu_minus,
        oracle_plus=mu_plus, global_min=gmin, global_max=gmax,
        cross_real_halfwidth=float(np.sqrt(max(-gmin, 0.0))),
        cross_imag_halfwidth=float(np.sqrt(max(gmax, 0.0))),
        oracle_cross_real_halfwidth=float(
            np.sqrt(max(-float(mu_minus.min()), 0.0))),
        oracle_cross_imag_halfwidth=float(
            np.sqrt(max(float(mu_plus.max()), 0.0))),
        max_oracle_gap=gap, sup_grad_p_over_rho=sup_gp, sup_a=sup_a,
        disk_radius_sq=disk, disk_ok=bool(np.all(reach <= disk)),
        oracle_disk_ok=bool(np.all(oracle_reach <= disk)),
        surface_gravity=model.gconst * model.total_mass / model.radius**2)


def spherical_q_pair(model, w, z, omega=0.0):
    """
    q1, q2 from radial profiles of a spherical star:
    q1 = 4 Omega^2 - P' S' / (C_V gamma rho),  q2 = (q1 - 4 Omega^2) 2 w z / r^2.
    """
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.hypot(w, z)
    s = sample_radial(model, r)
    prim = model.primitives(r)
    base = -prim["dpressure"] * prim["dentropy"] / (model.cv * model.gamma
                                                    * s.rho)
    return 4.0 * omega**2 + base, base * 2.0 * w * z / r**2
