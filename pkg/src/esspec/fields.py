"""
Coefficient fields of a background, evaluated pointwise with analytic
gradients.

Every field is recomposed from the quintic interpolants of Theta, S and m
held by the model, and derivatives come from differentiating those
interpolants, never from finite differences.  With n = 1 / (gamma - 1) and
E = exp(S / (gamma C_V)):

    k1 = P**(1/gamma),   k2 = sqrt(gamma) rho**(1/2) P**(-(2-gamma)/(2 gamma)),
    k3 = rho P**(-1/gamma),   c**2 = gamma P / rho,   sigma = gamma P / rho**2,
    a  = -grad S / (gamma C_V).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# Points closer to the surface than this fraction of R are not sampled by
# the randomized identity audit; sigma diverges there.
SURFACE_MARGIN = 1e-3


@dataclass(frozen=True)
class CoefficientSample:
    """
    Background coefficients at a set of radii (all arrays share one shape).

    ``a`` is the radial component of the vector a = -grad S / (gamma C_V);
    ``n2`` is the squared buoyancy frequency and ``schwarz`` the
    Schwarzschild discriminant, both with the normal n = -grad rho / |grad rho|.
    """

    r: np.ndarray
    rho: np.ndarray
    pressure: np.ndarray
    entropy: np.ndarray
    c: np.ndarray
    sigma: np.ndarray
    E: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    a: np.ndarray
    dPdr: np.ndarray
    drhodr: np.ndarray
    dk1dr: np.ndarray
    dk3dr: np.ndarray
    n2: np.ndarray
    schwarz: np.ndarray


@dataclass(frozen=True)
class MeridionalSample:
    """
    Coefficients at meridional points (w, z) of an axisymmetric star.

    Gradients are (d/dw, d/dz) pairs stacked along the last axis.
    Scalar fields are forwarded from the underlying radial sample.
    """

    w: np.ndarray
    z: np.ndarray
    radial: CoefficientSample
    grad_k1: np.ndarray
    grad_k3: np.ndarray
    grad_P_over_rho: np.ndarray
    a_vec: np.ndarray

    def __getattr__(self, name):
        # only reached for attributes not defined on the dataclass itself
        if name == "radial":
            raise AttributeError(name)
        return getattr(self.radial, name)


def sample_radial(model, r):
    """
    Evaluate all coefficient fields at radii 0 < r < R.

    Parameters
    ----------
    model : BackgroundModel
    r : array_like
        radii strictly inside the star

    Returns
    -------
    CoefficientSample
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0) or np.any(r >= model.radius):
        raise ValueError("sample radius outside (0, R)")
    g = model.gamma
    prim = model.primitives(r)
    rho, p = prim["rho"], prim["pressure"]
    ds = prim["dentropy"]
    drho, dp = prim["drho"], prim["dpressure"]

    big_e = np.exp(prim["entropy"] / (g * model.cv))
    c = np.sqrt(g * p / rho)
    k1 = p ** (1.0 / g)
    k2 = np.sqrt(g) * np.sqrt(rho) * p ** (-(2.0 - g) / (2.0 * g))
    k3 = rho * p ** (-1.0 / g)
    a = -ds / (g * model.cv)
    # d/dr of the power laws through the chain rule
    dk1 = k1 * dp / (g * p)
    dk3 = k3 * (drho / rho - dp / (g * p))

    normal = -np.sign(drho)
    schwarz = a * normal
    n2 = schwarz * (dp / rho) * normal
    return CoefficientSample(
        r=r, rho=rho, pressure=p, entropy=prim["entropy"], c=c,
        sigma=g * p / rho**2, E=big_e, k1=k1, k2=k2, k3=k3, a=a, dPdr=dp,
        drhodr=drho, dk1dr=dk1, dk3dr=dk3, n2=n2, schwarz=schwarz)


def _chain(w, z, r, radial_derivative):
    return np.stack([w / r * radial_derivative, z / r * radial_derivative],
                    axis=-1)


def sample_meridional(model, w, z):
    """
    Evaluate coefficients and (d/dw, d/dz) gradients at meridional points.

    Parameters
    ----------
    model : BackgroundModel
    w, z : array_like
        cylindrical radius (w >= 0) and height, broadcast together

    Returns
    -------
    MeridionalSample
    """
    w, z = np.broadcast_arrays(np.asarray(w, dtype=float),
                               np.asarray(z, dtype=float))
    if np.any(w < 0.0):
        raise ValueError("cylindrical radius must be nonnegative")
    r = np.hypot(w, z)
    rad = sample_radial(model, r)
    return MeridionalSample(
        w=w, z=z, radial=rad,
        grad_k1=_chain(w, z, r, rad.dk1dr),
        grad_k3=_chain(w, z, r, rad.dk3dr),
        grad_P_over_rho=_chain(w, z, r, rad.dPdr / rad.rho),
        a_vec=_chain(w, z, r, rad.a))


def random_interior_points(model, count, seed=0):
    """
    Uniform random points of the ball r < (1 - SURFACE_MARGIN) R in R^3.
    """
    rng = np.random.default_rng(seed)
    rmax = (1.0 - SURFACE_MARGIN) * model.radius
    direction = rng.normal(size=(count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rmax * rng.uniform(0.0, 1.0, count) ** (1.0 / 3.0)
    # keep clear of the centre, where the chain rule is 0/0
    radius = np.maximum(radius, 1e-3 * model.radius)
    return direction * radius[:, None]


def _rel(lhs, rhs):
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    scale = np.where(scale > 0.0, scale, 1.0)
    return np.abs(lhs - rhs) / scale


def identity_residuals(model, points, seed=0, k2_factor=1.0):
    """
    Maximum relative residuals of the coefficient identities.

    Checks k1 k2 = c rho, k2 = c k3, grad k3 / k3 = a, c k2 / k1 = sigma / E^2
    and the divergence identity

        (c/k1) div(k1 v) = (c/rho) div(rho v) - c (v . a)

    for a random affine-plus-quadratic vector field v.

    Parameters
    ----------
    model : BackgroundModel
    points : array_like, shape (N, 3)
        Cartesian points inside the star
    seed : int
        seed of the random test field
    k2_factor : float
        multiplies k2 before checking (negative control hook)

    Returns
    -------
    dict of residual name -> max relative residual
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(x, axis=1)
    s = sample_radial(model, r)
    k2 = s.k2 * k2_factor
    unit = x / r[:, None]

    grad_k3 = s.dk3dr[:, None] * unit
    a_vec = s.a[:, None] * unit
    # scale of the two logarithmic gradients that cancel in grad k3 / k3
    grad_scale = np.abs(s.drhodr / s.rho) + np.abs(s.dPdr / (model.gamma
                                                            * s.pressure))
    grad_res = (np.linalg.norm(grad_k3 / s.k3[:, None] - a_vec, axis=1)
                / grad_scale)

    # random smooth field v = b + A x + |x|^2 d, with exact divergence
    rng = np.random.default_rng(seed)
    b, d = rng.normal(size=3), rng.normal(size=3)
    amat = rng.normal(size=(3, 3))
    v = b + x @ amat.T + (r**2)[:, None] * d
    div_v = np.trace(amat) + 2.0 * x @ d
    v_r = np.einsum("ij,ij->i", v, unit)
    lhs = s.c * (div_v + v_r * s.dk1dr / s.k1)
    rhs = s.c * (div_v + v_r * s.drhodr / s.rho) - s.c * v_r * s.a
    div_scale = s.c * (np.abs(div_v) + np.abs(v_r) * np.abs(s.dk1dr / s.k1))
    div_res = np.abs(lhs - rhs) / np.where(div_scale > 0.0, div_scale, 1.0)

    return {
        "k1k2_eq_c_rho": float(_rel(s.k1 * k2, s.c * s.rho).max()),
        "k2_eq_c_k3": float(_rel(k2, s.c * s.k3).max()),
        "grad_k3_over_k3_eq_a": float(grad_res.max()),
        "c_k2_over_k1_eq_sigma_over_E2": float(
            _rel(s.c * k2 / s.k1, s.sigma / s.E**2).max()),
        "divergence": float(div_res.max()),
    }


def export_profiles_csv(model, path, degrees=(1, 2, 3), points=400):
    """
    Write propagation-diagram data: c, N^2 and Lamb frequencies
    l(l+1) c^2 / r^2 on a uniform interior grid.
    """
    r = np.linspace(0.0, model.radius, points + 2)[1:-1]
    s = sample_radial(model, r)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "c", "n2"] + [f"lamb2_l{l}" for l in degrees])
        for i in range(len(r)):
            lamb = [l * (l + 1) * s.c[i] ** 2 / r[i] ** 2 for l in degrees]
            writer.writerow([repr(float(v)) for v in
                             (r[i], s.c[i], s.n2[i], *lamb)])
