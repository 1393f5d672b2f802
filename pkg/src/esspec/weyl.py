"""
Weyl singular sequences for points of the meridional spectral intervals.

Given a meridional point x0 = (w0, z0) with w0 > 0 and a target t with
t = -lambda^2, the sequence is built from an anisotropic bump

    u_eps = eps**((nu2 - nu1)/2) phi(xi1) phi(xi2),
    xi1 = (c1 . (x - x0)) / eps**nu1,   xi2 = (c2 . (x - x0)) / eps**nu2,

whose first two components are (1/k1) J grad~ u_eps with
grad~ u = grad u + (u / w, 0) and J the quarter turn.  The last two
components are fixed so that the lower block of the residual vanishes
identically.  The upper block

    lambda g12 - H1 g34 + a (grad u + u grad k3 / k3)

is measured in the weighted norm rho w dw dz and should decay like eps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import beta

from . import _io
from .background import FORMAT_VERSION
from .fields import sample_meridional
from .spectrum import h_blocks, neg_sym_product, symmetric_eig2

J = np.array([[0.0, -1.0], [1.0, 0.0]])

# admissible supports stay inside this fraction of the radius
_SUPPORT_LIMIT = 0.99
# relative step-halving disagreement that flags under-resolved quadrature
_QUAD_TOL = 0.01


class BumpProfile:
    """
    phi(xi) = N (1 - xi^2)^3 on (-1, 1), zero outside, with unit L2 norm.

    The profile is C^2, enough for the second derivatives used by the
    kernel check, and its normalization is a beta function.
    """

    norm = 1.0 / math.sqrt(beta(0.5, 7.0))

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        s = 1.0 - xi**2
        return np.where(np.abs(xi) < 1.0, self.norm * s**3, 0.0)

    def d1(self, xi):
        xi = np.asarray(xi, dtype=float)
        s = 1.0 - xi**2
        return np.where(np.abs(xi) < 1.0, -6.0 * self.norm * xi * s**2, 0.0)

    def d2(self, xi):
        xi = np.asarray(xi, dtype=float)
        s = 1.0 - xi**2
        return np.where(np.abs(xi) < 1.0,
                        -6.0 * self.norm * s * (1.0 - 5.0 * xi**2), 0.0)


BUMP = BumpProfile()


@dataclass(frozen=True)
class SingularSequenceParams:
    """
    Everything that defines g_eps apart from eps itself.

    ``mu`` holds the ascending eigenvalues of the symmetric part of -H1 H2
    at x0; targets must lie in [mu[0], mu[1]].
    """

    x0: tuple
    t: float
    lam: complex
    c1: np.ndarray
    c2: np.ndarray
    a_scalar: complex
    omega: float
    mu: tuple
    k1_x0: float
    nu1: float = 1.0
    nu2: float = 2.0
    m: int = 0

    def esp1_defect(self, hh):
        """|(c1 | H1 H2 c1) - lambda^2| for the product matrix hh."""
        return abs(self.c1 @ hh @ self.c1 - self.lam**2)


def default_x0(model):
    """Mid-radius point at 45 degrees latitude."""
    side = model.radius / (2.0 * math.sqrt(2.0))
    return (side, side)


def _product_at(model, x0, omega):
    ms = sample_meridional(model, x0[0], x0[1])
    h1, h2 = h_blocks(ms, omega)
    return ms, h1, h2


def choose_direction(model, x0, omega, t, nu1=1.0, nu2=2.0, m=0):
    """
    Direction pair, lambda and the scalar a for the target t = -lambda^2.

    Parameters
    ----------
    model : BackgroundModel
    x0 : (w0, z0)
        meridional point with w0 > 0
    omega : float
    t : float
        target; must lie in the numerical range [mu_minus, mu_plus] of the
        symmetric part of -H1 H2 at x0, and be nonzero
    nu1, nu2 : float
        scaling exponents, 0 < nu1 < nu2
    m : int
        azimuthal wave number

    Returns
    -------
    SingularSequenceParams
    """
    if not 0.0 < nu1 < nu2:
        raise ValueError("need 0 < nu1 < nu2")
    if x0[0] <= 0.0:
        raise ValueError("x0 must be off the rotation axis")
    if t == 0.0:
        raise ValueError("t = 0 gives lambda = 0, which is excluded")
    ms, h1, h2 = _product_at(model, x0, omega)
    values, vectors = symmetric_eig2(neg_sym_product(ms, omega))
    mu_lo, mu_hi = float(values[0]), float(values[1])
    span = mu_hi - mu_lo
    slack = 1e-12 * max(abs(mu_lo), abs(mu_hi), 1e-300)
    if t < mu_lo - slack or t > mu_hi + slack:
        raise ValueError(
            f"no direction exists: t={t!r} outside the numerical range "
            f"[{mu_lo!r}, {mu_hi!r}] of the symmetrized product at x0")
    e_minus, e_plus = vectors[:, 0], vectors[:, 1]
    frac = 0.0 if span == 0.0 else min(max((t - mu_lo) / span, 0.0), 1.0)
    c1 = math.sqrt(1.0 - frac) * e_minus + math.sqrt(frac) * e_plus
    c2 = J @ c1
    lam = complex(np.sqrt(complex(-t)))
    k1 = float(ms.k1)
    hh = h1 @ h2
    a_scalar = complex(c2 @ ((lam**2) * c1 - hh @ c1) / (k1 * lam))
    return SingularSequenceParams(
        x0=(float(x0[0]), float(x0[1])), t=float(t), lam=lam, c1=c1, c2=c2,
        a_scalar=a_scalar, omega=float(omega), mu=(mu_lo, mu_hi), k1_x0=k1,
        nu1=float(nu1), nu2=float(nu2), m=int(m))


def esp5_defect(model, params):
    """
    Componentwise defect of (1/k1)(lambda^2 - H1 H2) J c2 = -a lambda c2 at x0.
    """
    _, h1, h2 = _product_at(model, params.x0, params.omega)
    lhs = ((params.lam**2) * np.eye(2) - h1 @ h2) @ (J @ params.c2) / params.k1_x0
    return np.abs(lhs + params.a_scalar * params.lam * params.c2)


######################################################################
# Sequence evaluation
######################################################################

@dataclass
class SequenceSample:
    """Values of u_eps, g_eps and residual pieces at quadrature points."""

    weight: np.ndarray
    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    g12: np.ndarray
    g34: np.ndarray
    res12: np.ndarray
    res34: np.ndarray
    lam_g34: np.ndarray
    kernel: np.ndarray
    kernel_scale: np.ndarray
    w: np.ndarray
    z: np.ndarray


class SingularSequence:
    """
    Closed-form evaluators of u_eps and g_eps for one eps.

    Parameters
    ----------
    model : BackgroundModel
    params : SingularSequenceParams
    eps : float
    use_j : bool
        build the velocity part from J grad~ u (True) or from grad~ u
        (negative control)
    a_factor : float
        multiplies the scalar a (negative control)
    """

    def __init__(self, model, params, eps, use_j=True, a_factor=1.0):
        self.model = model
        self.params = params
        self.eps = float(eps)
        self.use_j = use_j
        self.a = params.a_scalar * a_factor
        self.len1 = self.eps**params.nu1
        self.len2 = self.eps**params.nu2
        self.amp = self.eps ** (0.5 * (params.nu2 - params.nu1))
        w0, z0 = params.x0
        reach = math.hypot(self.len1, self.len2)
        if (w0 - reach <= 0.0
                or math.hypot(w0, z0) + reach >= _SUPPORT_LIMIT * model.radius):
            raise ValueError(f"support of u_eps escapes the admissible region "
                             f"for eps={eps!r}")

    def points(self, xi1, xi2):
        p = self.params
        w = p.x0[0] + self.len1 * xi1 * p.c1[0] + self.len2 * xi2 * p.c2[0]
        z = p.x0[1] + self.len1 * xi1 * p.c1[1] + self.len2 * xi2 * p.c2[1]
        return w, z

    def bump(self, xi1, xi2):
        """u, grad u and the Hessian of u at local coordinates."""
        c1, c2 = self.params.c1, self.params.c2
        f1, d1, dd1 = BUMP.value(xi1), BUMP.d1(xi1), BUMP.d2(xi1)
        f2, d2, dd2 = BUMP.value(xi2), BUMP.d1(xi2), BUMP.d2(xi2)
        u = self.amp * f1 * f2
        s1 = self.amp * d1 * f2 / self.len1
        s2 = self.amp * f1 * d2 / self.len2
        grad = s1[..., None] * c1 + s2[..., None] * c2
        h11 = self.amp * dd1 * f2 / self.len1**2
        h12 = self.amp * d1 * d2 / (self.len1 * self.len2)
        h22 = self.amp * f1 * dd2 / self.len2**2
        hess = (h11[..., None, None] * np.outer(c1, c1)
                + h12[..., None, None] * (np.outer(c1, c2) + np.outer(c2, c1))
                + h22[..., None, None] * np.outer(c2, c2))
        return u, grad, hess

    def evaluate(self, xi1, xi2):
        """
        Evaluate g_eps, both residual blocks and the kernel identity.

        Parameters
        ----------
        xi1, xi2 : ndarray
            local coordinates in [-1, 1]

        Returns
        -------
        SequenceSample (weights are left as the bare rho w density)
        """
        p = self.params
        lam = p.lam
        w, z = self.points(xi1, xi2)
        ms = sample_meridional(self.model, w, z)
        u, grad, hess = self.bump(xi1, xi2)
        u_w, u_z = grad[..., 0], grad[..., 1]
        u_ww, u_wz, u_zz = hess[..., 0, 0], hess[..., 0, 1], hess[..., 1, 1]

        # q = k1 v and its diagonal derivatives
        if self.use_j:
            q = np.stack([-u_z, u_w + u / w], axis=-1)
            dq_w = -u_wz
            dq_z = u_wz + u_z / w
        else:
            q = np.stack([u_w + u / w, u_z], axis=-1)
            dq_w = u_ww + u_w / w - u / w**2
            dq_z = u_zz
        k1 = ms.k1
        gk1 = ms.grad_k1
        g12 = q / k1[..., None]
        log_k3 = ms.grad_k3 / ms.k3[..., None]

        kernel_scale = ms.c / k1 * np.max(np.abs(hess), axis=(-1, -2))
        if p.m == 0:
            g12 = g12.astype(complex)
            g3 = 2.0 * p.omega * g12[..., 0] / lam
            g4 = np.einsum("...i,...i->...", log_k3, g12) / lam
            g34 = np.stack([g3, g4], axis=-1)
            # divergence through the product rule on k1 v
            v_w, v_z = g12[..., 0], g12[..., 1]
            dv_w = dq_w / k1 - q[..., 0] * gk1[..., 0] / k1**2
            dv_z = dq_z / k1 - q[..., 1] * gk1[..., 1] / k1**2
            div = (k1 * v_w / w + gk1[..., 0] * v_w + k1 * dv_w
                   + gk1[..., 1] * v_z + k1 * dv_z)
            kernel = ms.c / k1 * div
        else:
            g12, g34, kernel = self._azimuthal(ms, u, grad, q, dq_w, dq_z, w)

        h1, h2 = h_blocks(ms, p.omega)
        res12 = (lam * g12 - np.einsum("...ij,...j->...i", h1, g34)
                 + self.a * (grad + u[..., None] * log_k3))
        res34 = -np.einsum("...ij,...j->...i", h2, g12) + lam * g34
        return SequenceSample(
            weight=ms.rho * w, u=u, grad=grad, hess=hess, g12=g12, g34=g34,
            res12=res12, res34=res34, lam_g34=lam * g34, kernel=kernel,
            kernel_scale=kernel_scale, w=w, z=z)

    def kappa(self):
        """Coefficient of the u c2 correction in the azimuthal construction."""
        p = self.params
        return (p.m * 2.0 * p.omega * p.c1[0]
                / (1j * p.lam * p.x0[0] * p.k1_x0))

    def _azimuthal(self, ms, u, grad, q, dq_w, dq_z, w):
        p = self.params
        kap = self.kappa()
        k1, gk1, c2 = ms.k1, ms.grad_k1, p.c2
        u_w, u_z = grad[..., 0], grad[..., 1]
        f = q / k1[..., None] - kap * u[..., None] * c2
        # divergence of k1 f via the product rule
        df_w = (dq_w / k1 - q[..., 0] * gk1[..., 0] / k1**2
                - kap * c2[0] * u_w)
        df_z = (dq_z / k1 - q[..., 1] * gk1[..., 1] / k1**2
                - kap * c2[1] * u_z)
        div = (k1 * f[..., 0] / w + gk1[..., 0] * f[..., 0] + k1 * df_w
               + gk1[..., 1] * f[..., 1] + k1 * df_z)
        # azimuthal component in closed form (the J grad~ u part is
        # divergence free and drops out)
        bracket = (c2[0] * (k1 * u / w + gk1[..., 0] * u + k1 * u_w)
                   + c2[1] * (gk1[..., 1] * u + k1 * u_z))
        v_phi = (1j * w / p.m) / k1 * (-kap) * bracket
        g4 = np.einsum("...i,...i->...", ms.grad_k3 / ms.k3[..., None],
                       f) / p.lam
        kernel = ms.c / k1 * div + ms.c / w * (1j * p.m) * v_phi
        return f, np.stack([v_phi, g4], axis=-1), kernel

    def quadrature(self, nodes=32):
        """Sample on a tensor Gauss-Legendre grid; weights include rho w dw dz."""
        x, wq = np.polynomial.legendre.leggauss(nodes)
        xi1, xi2 = np.meshgrid(x, x, indexing="ij")
        sample = self.evaluate(xi1.ravel(), xi2.ravel())
        sample.weight = (sample.weight * np.outer(wq, wq).ravel()
                         * self.len1 * self.len2)
        return sample


def _wnorm(sample, values):
    vals = np.abs(values) ** 2
    if vals.ndim > 1:
        vals = vals.sum(axis=-1)
    return math.sqrt(float(np.sum(sample.weight * vals)))


@dataclass
class ResidualSample:
    """Weighted norms for one eps."""

    eps: float
    rel_residual: float
    rows12: float
    rows34: float
    kernel: float
    g_norm: float
    u_norm: float
    grad_norm: float
    grad_c1: float
    imag_max: float

    def to_dict(self):
        return dict(self.__dict__)


def _measure(seq, nodes):
    s = seq.quadrature(nodes)
    g_norm = math.sqrt(_wnorm(s, s.g12) ** 2 + _wnorm(s, s.g34) ** 2)
    r12 = _wnorm(s, s.res12)
    r34 = _wnorm(s, s.res34)
    lam_g34 = _wnorm(s, s.lam_g34)
    rows34 = r34 / lam_g34 if lam_g34 > 0.0 else r34
    kscale = float(np.max(s.kernel_scale))
    kernel = float(np.max(np.abs(s.kernel))) / kscale
    grad_c1 = abs(float(np.sum(s.weight * (s.grad @ seq.params.c1))))
    imag = max(float(np.max(np.abs(s.res12.imag))),
               float(np.max(np.abs(s.g34.imag))))
    return ResidualSample(
        eps=seq.eps, rel_residual=math.hypot(r12, r34) / g_norm, rows12=r12,
        rows34=rows34, kernel=kernel, g_norm=g_norm, u_norm=_wnorm(s, s.u),
        grad_norm=_wnorm(s, s.grad), grad_c1=grad_c1, imag_max=imag)


def residual_esp2(model, params, eps, nodes=32, use_j=True, a_factor=1.0):
    """
    Weighted residual of the upper and lower blocks for one eps.

    The quadrature is repeated with twice the nodes; a relative change above
    1% of the residual ratio raises ``RuntimeError``.
    """
    if nodes < 32:
        raise ValueError("at least 32 quadrature nodes per axis are required")
    seq = SingularSequence(model, params, eps, use_j=use_j, a_factor=a_factor)
    coarse = _measure(seq, nodes)
    fine = _measure(seq, 2 * nodes)
    if abs(coarse.rel_residual - fine.rel_residual) > _QUAD_TOL * fine.rel_residual:
        raise RuntimeError(f"quadrature under-resolved at eps={eps!r}")
    return fine


def kernel_check(model, params, eps, nodes=32, use_j=True):
    """
    Max of the divergence expression applied to g_eps over the quadrature
    grid, relative to (c/k1) times the largest second derivative of u_eps.
    """
    seq = SingularSequence(model, params, eps, use_j=use_j)
    return _measure(seq, nodes).kernel


def weak_pairing(model, params, eps, nodes=32, test_field=None):
    """
    |(g_eps | psi)| in the weighted inner product for a fixed smooth psi.

    The default test field is psi(w, z) = (w, z, 1, 1).
    """
    seq = SingularSequence(model, params, eps)
    s = seq.quadrature(nodes)
    if test_field is None:
        def test_field(w, z):
            return np.stack([w, z, np.ones_like(w), np.ones_like(w)], axis=-1)
    psi = test_field(s.w, s.z)
    g = np.concatenate([s.g12, s.g34], axis=-1)
    return abs(complex(np.sum(s.weight * np.sum(g * np.conj(psi), axis=-1))))


######################################################################
# Series and decay fit
######################################################################

def default_eps():
    return [2.0**-k for k in range(3, 8)]


@dataclass
class DecayFit:
    slope: float
    monotone: bool
    threshold: float
    verdict: bool


def decay_fit(eps, rel_residual, nu1=1.0, nu2=2.0):
    """
    Least-squares slope of log(rel_residual) against log(eps).

    The verdict is true iff the series strictly decreases with eps and the
    slope is at least half of min(nu1, nu2 - nu1).
    """
    eps = np.asarray(eps, dtype=float)
    res = np.asarray(rel_residual, dtype=float)
    if len(eps) < 4 or eps.max() / eps.min() < 4.0:
        raise ValueError("need at least 4 eps values spanning 2 octaves")
    order = np.argsort(eps)[::-1]
    eps, res = eps[order], res[order]
    if np.any(res <= 0.0):
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(eps), np.log(res), 1)[0])
    monotone = bool(np.all(np.diff(res) < 0.0))
    threshold = 0.5 * min(nu1, nu2 - nu1)
    return DecayFit(slope=slope, monotone=monotone, threshold=threshold,
                    verdict=bool(monotone and slope >= threshold))


@dataclass
class ResidualSeries:
    """Measured residuals over an eps sweep."""

    params: SingularSequenceParams
    samples: list
    fit: DecayFit
    label: str = "sequence"
    notes: list = field(default_factory=list)

    @property
    def eps(self):
        return [s.eps for s in self.samples]

    @property
    def rel_residual(self):
        return [s.rel_residual for s in self.samples]

    @property
    def kernel_residual(self):
        return [s.kernel for s in self.samples]

    @property
    def fitted_slope(self):
        return self.fit.slope

    def to_dict(self):
        p = self.params
        return dict(
            format_version=FORMAT_VERSION, label=self.label,
            params=dict(x0=list(p.x0), t=p.t,
                        lam=[p.lam.real, p.lam.imag],
                        c1=p.c1.tolist(), c2=p.c2.tolist(),
                        a=[p.a_scalar.real, p.a_scalar.imag],
                        omega=p.omega, nu1=p.nu1, nu2=p.nu2, m=p.m,
                        range=list(p.mu)),
            samples=[s.to_dict() for s in self.samples],
            fit=dict(self.fit.__dict__), notes=list(self.notes))


def run_series(model, params, eps_list=None, nodes=32, use_j=True,
               a_factor=1.0, label="sequence"):
    """Residual samples over an eps sweep together with the decay fit."""
    eps_list = default_eps() if eps_list is None else list(eps_list)
    eps_list = sorted(eps_list, reverse=True)
    samples = [residual_esp2(model, params, e, nodes=nodes, use_j=use_j,
                             a_factor=a_factor) for e in eps_list]
    fit = decay_fit(eps_list, [s.rel_residual for s in samples],
                    params.nu1, params.nu2)
    notes = []
    if params.m != 0:
        notes.append("azimuthal construction: kernel membership and norms "
                     "only, no decay rate is claimed")
    return ResidualSeries(params=params, samples=samples, fit=fit,
                          label=label, notes=notes)


def write_series_csv(series_list, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "eps", "rel_residual", "rows34", "kernel",
                         "g_norm"])
        for series in series_list:
            for s in series.samples:
                writer.writerow([series.label, repr(s.eps),
                                 repr(s.rel_residual), repr(s.rows34),
                                 repr(s.kernel), repr(s.g_norm)])


def write_series_json(series_list, path, extra=None):
    data = dict(format_version=FORMAT_VERSION,
                series=[s.to_dict() for s in series_list])
    if extra:
        data.update(extra)
    Path(path).write_text(_io.dumps(data))


def with_m(params, m):
    """Copy of ``params`` with another azimuthal wave number."""
    return replace(params, m=int(m))
