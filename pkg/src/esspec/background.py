"""
Spherically symmetric gaseous-star backgrounds.

A background is a hydrostatic star obeying the adiabatic equation of state

    P = rho**gamma * exp(S / C_V)

tabulated on a uniform radial grid from the centre (r = 0) to the vacuum
boundary (r = R).  Units are nondimensional: G = 1 and rho(0) = 1.

Two construction paths exist.  Isentropic stars (S constant) are Lane-Emden
polytropes of index n = 1 / (gamma - 1) and are built from a fixed-step RK4
solution of the Lane-Emden equation.  Stars with the built-in entropy profile
S(r) = s1 * (r / R_ref)**2 are obtained by shooting the hydrostatic system
outwards from the centre.  The shooting uses the variable

    Theta = P**(1 / (n + 1)),

which vanishes linearly at the surface, so the boundary is located as a
simple zero instead of a pressure threshold.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq

from . import _io

FORMAT_VERSION = 1

# Theta value at which the shooting switches from r to Theta as independent
# variable.
_THETA_SWITCH = 0.2
# Start radius of the shooting (series expansion used below it).
_R_START = 1e-5
_ODE_RTOL = 1e-13
_ODE_ATOL = 1e-15


######################################################################
# Lane-Emden equation
######################################################################

def _le_rhs(xi, y, n):
    theta, dtheta = y
    # n = 0 keeps the polynomial continuation past the zero (0**0 = 1)
    source = max(theta, 0.0) ** n
    if xi == 0.0:
        # limit of theta'' + 2 theta'/xi at the regular centre
        return np.array([dtheta, -source / 3.0])
    return np.array([dtheta, -source - 2.0 * dtheta / xi])


def _rk4_step(xi, y, h, n):
    k1 = _le_rhs(xi, y, n)
    k2 = _le_rhs(xi + 0.5 * h, y + 0.5 * h * k1, n)
    k3 = _le_rhs(xi + 0.5 * h, y + 0.5 * h * k2, n)
    k4 = _le_rhs(xi + h, y + h * k3, n)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class LaneEmdenCurve:
    """
    Solution of the Lane-Emden equation of index n.

    Attributes
    ----------
    n : float
        polytropic index
    xi : ndarray
        strictly increasing grid on [0, xi1]; uniform with spacing ``step``
        except for the last point, which is the first zero xi1
    theta, dtheta : ndarray
        theta(xi) and theta'(xi) on the grid
    xi1 : float
        first zero of theta
    step : float
        RK4 step used for the integration
    """

    n: float
    xi: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    xi1: float
    step: float

    def evaluate(self, xi):
        """
        Evaluate theta and theta' at arbitrary points of [0, xi1].

        Each value is produced by a single partial RK4 step from the
        preceding grid node, so the accuracy matches the integration itself.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if np.any(xi < 0.0) or np.any(xi > self.xi1 * (1.0 + 1e-12)):
            raise ValueError("xi outside [0, xi1]")
        idx = np.searchsorted(self.xi, xi, side="right") - 1
        idx = np.clip(idx, 0, len(self.xi) - 1)
        theta = np.empty_like(xi)
        dtheta = np.empty_like(xi)
        for k, (x, i) in enumerate(zip(xi, idx)):
            h = x - self.xi[i]
            y0 = np.array([self.theta[i], self.dtheta[i]])
            y = y0 if h == 0.0 else _rk4_step(self.xi[i], y0, h, self.n)
            theta[k], dtheta[k] = y
        return theta, dtheta

    def ode_residual(self):
        """
        Pointwise residual (1/xi^2)(xi^2 theta')' + theta^n at interior nodes.

        The derivative of xi^2 theta' is taken from a quintic interpolant.
        """
        xi = self.xi
        flux = make_interp_spline(xi, xi**2 * self.dtheta, k=5)
        inner = slice(1, -1)
        dflux = flux.derivative()(xi[inner])
        return np.abs(dflux / xi[inner] ** 2
                      + np.maximum(self.theta[inner], 0.0) ** self.n)


def solve_lane_emden(n, step=1e-3, xi_max=50.0):
    """
    Integrate the Lane-Emden equation with classical RK4 up to its first zero.

    Parameters
    ----------
    n : float
        polytropic index, 0 <= n < 5
    step : float
        fixed integration step in xi
    xi_max : float
        give up if no sign change is found before this abscissa

    Returns
    -------
    LaneEmdenCurve
    """
    if not 0.0 <= n < 5.0:
        raise ValueError(f"polytropic index n={n} outside [0, 5)")
    if not step > 0.0:
        raise ValueError("step must be positive")
    if step > 0.05:
        raise ValueError(f"step {step} too large for the 1e-8 accuracy target")

    nsteps = int(math.ceil(xi_max / step))
    xs = np.empty(nsteps + 2)
    ys = np.empty((nsteps + 2, 2))
    xs[0] = 0.0
    ys[0] = (1.0, 0.0)
    k = 0
    while True:
        y_next = _rk4_step(xs[k], ys[k], step, n)
        if y_next[0] <= 0.0:
            break
        k += 1
        if k > nsteps:
            raise RuntimeError(
                f"no zero of theta found for xi <= {xi_max} (n={n})")
        xs[k] = k * step
        ys[k] = y_next

    # bisection on the length of the partial step from the last positive node
    lo, hi = 0.0, step
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if _rk4_step(xs[k], ys[k], mid, n)[0] > 0.0:
            lo = mid
        else:
            hi = mid
    h1 = 0.5 * (lo + hi)
    y1 = _rk4_step(xs[k], ys[k], h1, n)
    if abs(y1[0]) > 1e-10:
        raise RuntimeError("zero of theta not resolved to 1e-10")
    xs[k + 1] = xs[k] + h1
    ys[k + 1] = (0.0, y1[1])
    m = k + 2
    return LaneEmdenCurve(n=float(n), xi=xs[:m].copy(), theta=ys[:m, 0].copy(),
                          dtheta=ys[:m, 1].copy(), xi1=float(xs[k + 1]),
                          step=float(step))


def lane_emden_closed_form_errors(step=1e-3):
    """
    Deviations of the RK4 solutions from the closed forms
    theta = 1 - xi^2/6 (n = 0, xi1 = sqrt 6) and theta = sin(xi)/xi
    (n = 1, xi1 = pi).
    """
    out = {}
    c0 = solve_lane_emden(0.0, step)
    out["n0_theta"] = float(np.abs(c0.theta - (1.0 - c0.xi**2 / 6.0)).max())
    out["n0_xi1"] = abs(c0.xi1 - math.sqrt(6.0))
    c1 = solve_lane_emden(1.0, step)
    exact = np.sinc(c1.xi / math.pi)
    out["n1_theta"] = float(np.abs(c1.theta - exact).max())
    out["n1_xi1"] = abs(c1.xi1 - math.pi)
    return out


######################################################################
# Background model
######################################################################

@dataclass(frozen=True)
class BackgroundModel:
    """
    Tabulated spherical background.

    Attributes
    ----------
    gamma : float
        adiabatic exponent, 1 < gamma <= 2
    cv : float
        specific heat at constant volume
    gconst : float
        gravitational constant
    omega : float
        rotation rate; stored for the spectrum formulas only, it does not
        deform the (spherical) background
    radius : float
        surface radius R
    r, rho, pressure, entropy, mass : ndarray
        radial tables; r is uniform on [0, R]
    entropy_amp : float
        amplitude s1 of the built-in entropy profile s1 * (r / entropy_scale)**2
    entropy_scale : float
        length scale of the built-in entropy profile
    """

    gamma: float
    cv: float
    gconst: float
    omega: float
    radius: float
    r: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    pressure: np.ndarray = field(repr=False)
    entropy: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    entropy_amp: float = 0.0
    entropy_scale: float = 1.0

    @property
    def index(self):
        """Polytropic index n = 1 / (gamma - 1)."""
        return 1.0 / (self.gamma - 1.0)

    @property
    def nodes(self):
        return len(self.r)

    @property
    def central_pressure(self):
        return float(self.pressure[0])

    @property
    def total_mass(self):
        return float(self.mass[-1])

    @property
    def is_isentropic(self):
        return bool(np.all(self.entropy == self.entropy[0]))

    @property
    def flags(self):
        """Configuration notes that do not invalidate the model."""
        notes = []
        if self.gamma == 2.0:
            notes.append("gamma=2 analytic-oracle configuration "
                         "(outside the open range 1<gamma<2)")
        if self.omega != 0.0:
            notes.append("formula-evaluation mode: omega enters the spectrum "
                         "formulas only; background kept spherical")
        return notes

    # Interpolants.  Theta = P**(1/(n+1)) is linear at the surface, so it is
    # the quantity that is splined; rho and P are recomposed from it through
    # the equation of state.
    @cached_property
    def theta_table(self):
        return np.maximum(self.pressure, 0.0) ** (1.0 / (self.index + 1.0))

    @cached_property
    def theta_spline(self):
        return make_interp_spline(self.r, self.theta_table, k=5)

    @cached_property
    def entropy_spline(self):
        return make_interp_spline(self.r, self.entropy, k=5)

    @cached_property
    def mass_spline(self):
        return make_interp_spline(self.r, self.mass, k=5)

    def primitives(self, r):
        """
        Background values and radial derivatives at radii r.

        Returns
        -------
        dict with keys rho, pressure, entropy, drho, dpressure, dentropy,
        mass, theta, dtheta (arrays shaped like r)
        """
        r = np.asarray(r, dtype=float)
        n = self.index
        theta = self.theta_spline(r)
        dtheta = self.theta_spline.derivative()(r)
        entropy = self.entropy_spline(r)
        dentropy = self.entropy_spline.derivative()(r)
        inv_e = np.exp(-entropy / (self.gamma * self.cv))
        theta_pos = np.maximum(theta, 0.0)
        rho = theta_pos**n * inv_e
        pressure = theta_pos ** (n + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            drho = rho * (n * dtheta / theta
                          - dentropy / (self.gamma * self.cv))
        dpressure = (n + 1.0) * theta_pos**n * dtheta
        return dict(rho=rho, pressure=pressure, entropy=entropy, drho=drho,
                    dpressure=dpressure, dentropy=dentropy,
                    mass=self.mass_spline(r), theta=theta, dtheta=dtheta)


def _polytrope_radius(gamma, gconst=1.0, step=1e-3):
    n = 1.0 / (gamma - 1.0)
    curve = solve_lane_emden(n, step)
    scale = math.sqrt((n + 1.0) / (4.0 * math.pi * gconst))
    return curve, scale


def _check_gamma(gamma):
    if not 1.0 < gamma <= 2.0:
        raise ValueError(f"gamma={gamma} outside (1, 2]")


def _from_lane_emden(gamma, omega, nodes, cv, gconst):
    curve, scale = _polytrope_radius(gamma, gconst)
    n = curve.n
    xi = curve.xi1 * np.linspace(0.0, 1.0, nodes)
    theta, dtheta = curve.evaluate(xi[:-1])
    theta = np.append(np.maximum(theta, 0.0), 0.0)
    dtheta = np.append(dtheta, curve.dtheta[-1])
    r = scale * xi
    mass = -4.0 * math.pi * scale**3 * xi**2 * dtheta
    radius = scale * curve.xi1
    return BackgroundModel(
        gamma=float(gamma), cv=float(cv), gconst=float(gconst),
        omega=float(omega), radius=float(radius), r=r, rho=theta**n,
        pressure=theta ** (n + 1.0), entropy=np.zeros(nodes), mass=mass,
        entropy_amp=0.0, entropy_scale=float(radius))


def _shoot(gamma, entropy_amp, omega, nodes, cv, gconst, r_ref):
    n = 1.0 / (gamma - 1.0)
    gcv = gamma * cv

    def entropy(r):
        return entropy_amp * (r / r_ref) ** 2

    def big_e(r):
        return np.exp(entropy(r) / gcv)

    # phase 1: independent variable r, state (Theta, m)
    def rhs_r(r, y):
        theta, m = y
        rho = max(theta, 0.0) ** n / big_e(r)
        return [-gconst * m / ((n + 1.0) * big_e(r) * r**2),
                4.0 * math.pi * r**2 * rho]

    def hit_switch(r, y):
        return y[0] - _THETA_SWITCH
    hit_switch.terminal = True
    hit_switch.direction = -1

    r0 = _R_START
    y0 = [1.0 - 2.0 * math.pi * r0**2 / (3.0 * (n + 1.0)),
          4.0 * math.pi * r0**3 / 3.0]
    sol1 = solve_ivp(rhs_r, (r0, 100.0 * r_ref), y0, method="DOP853",
                     rtol=_ODE_RTOL, atol=_ODE_ATOL, dense_output=True,
                     events=hit_switch)
    if sol1.status != 1:
        raise RuntimeError("hydrostatic integration did not reach a surface "
                           "(unbound profile)")
    r_sw = float(sol1.t_events[0][0])
    m_sw = float(sol1.y_events[0][0][1])

    # phase 2: independent variable Theta, state (r, m), down to Theta = 0
    def rhs_theta(theta, y):
        r, m = y
        drdth = -(n + 1.0) * big_e(r) * r**2 / (gconst * m)
        rho = max(theta, 0.0) ** n / big_e(r)
        return [drdth, 4.0 * math.pi * r**2 * rho * drdth]

    sol2 = solve_ivp(rhs_theta, (_THETA_SWITCH, 0.0), [r_sw, m_sw],
                     method="DOP853", rtol=_ODE_RTOL, atol=_ODE_ATOL,
                     dense_output=True)
    if not sol2.success:
        raise RuntimeError("hydrostatic integration failed near the surface")
    radius = float(sol2.y[0, -1])
    total_mass = float(sol2.y[1, -1])

    r = radius * np.linspace(0.0, 1.0, nodes)
    theta = np.empty(nodes)
    mass = np.empty(nodes)
    theta[0], mass[0] = 1.0, 0.0
    theta[-1], mass[-1] = 0.0, total_mass
    for i in range(1, nodes - 1):
        ri = r[i]
        if ri < r0:
            theta[i] = 1.0 - 2.0 * math.pi * ri**2 / (3.0 * (n + 1.0))
            mass[i] = 4.0 * math.pi * ri**3 / 3.0
        elif ri <= r_sw:
            theta[i], mass[i] = sol1.sol(ri)
        else:
            th = brentq(lambda t: sol2.sol(t)[0] - ri, 0.0, _THETA_SWITCH,
                        xtol=1e-15, rtol=1e-15)
            theta[i] = th
            mass[i] = sol2.sol(th)[1]
    ent = entropy(r)
    rho = theta**n / big_e(r)
    return BackgroundModel(
        gamma=float(gamma), cv=float(cv), gconst=float(gconst),
        omega=float(omega), radius=radius, r=r, rho=rho,
        pressure=theta ** (n + 1.0), entropy=ent, mass=mass,
        entropy_amp=float(entropy_amp), entropy_scale=float(r_ref))


def build_background(gamma=5.0 / 3.0, entropy_amp=0.0, omega=0.0, nodes=1001,
                     cv=1.0, method="auto"):
    """
    Build a hydrostatic background in units G = 1, rho(0) = 1.

    Parameters
    ----------
    gamma : float
        adiabatic exponent in (1, 2]
    entropy_amp : float
        amplitude s1 of S(r) = s1 (r / R_ref)^2, where R_ref is the radius of
        the isentropic polytrope with the same gamma
    omega : float
        rotation rate, stored on the model only
    nodes : int
        number of radial grid points, at least 200
    cv : float
        specific heat C_V
    method : {"auto", "lane-emden", "shoot"}
        "auto" uses the Lane-Emden path for s1 = 0 and shooting otherwise

    Returns
    -------
    BackgroundModel
    """
    _check_gamma(gamma)
    if nodes < 200:
        raise ValueError("at least 200 nodes are required")
    if method == "auto":
        method = "lane-emden" if entropy_amp == 0.0 else "shoot"
    if method == "lane-emden":
        if entropy_amp != 0.0:
            raise ValueError("the Lane-Emden path is isentropic only")
        return _from_lane_emden(gamma, omega, nodes, cv, 1.0)
    if method == "shoot":
        curve, scale = _polytrope_radius(gamma)
        return _shoot(gamma, entropy_amp, omega, nodes, cv, 1.0,
                      scale * curve.xi1)
    raise ValueError(f"unknown method {method!r}")


def nondimensionalize(model):
    """
    Rescale a model to units G = 1, rho(0) = 1 (hence P(0) = 1, S(0) = 0).

    The entropy is shifted so that the equation of state keeps the form
    P = rho^gamma exp(S / C_V).  Applying the map twice changes nothing.
    """
    rho_c = float(model.rho[0])
    p_c = float(model.pressure[0])
    length = math.sqrt(p_c / (model.gconst * rho_c**2))
    shift = model.cv * math.log(p_c / rho_c**model.gamma)
    return replace(
        model,
        gconst=1.0,
        omega=model.omega / math.sqrt(model.gconst * rho_c),
        radius=model.radius / length,
        r=model.r / length,
        rho=model.rho / rho_c,
        pressure=model.pressure / p_c,
        entropy=model.entropy - shift,
        mass=model.mass / (rho_c * length**3),
        entropy_scale=model.entropy_scale / length,
    )


######################################################################
# Validation
######################################################################

@dataclass
class ValidationReport:
    hydrostatic_max_residual: float
    eos_max_residual: float
    surface_exponent_fit: float
    pressure_exponent_fit: float
    dc2dn_surface: float
    center_concavity: float
    tolerances: dict
    passed: dict
    notes: list

    @property
    def ok(self):
        return all(self.passed.values())

    def to_dict(self):
        return dict(format_version=FORMAT_VERSION,
                    hydrostatic_max_residual=self.hydrostatic_max_residual,
                    eos_max_residual=self.eos_max_residual,
                    surface_exponent_fit=self.surface_exponent_fit,
                    pressure_exponent_fit=self.pressure_exponent_fit,
                    dc2dn_surface=self.dc2dn_surface,
                    center_concavity=self.center_concavity,
                    tolerances=self.tolerances, passed=self.passed,
                    notes=self.notes, ok=self.ok)


DEFAULT_TOLERANCES = dict(eos=1e-12, hydrostatic=1e-8, exponent=0.05)


def _loglog_slope(x, y):
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def validate_background(model, tolerances=None):
    """
    Check a background against the standing assumptions on gaseous stars.

    Residuals are computed on the tables; failures are reported through the
    ``passed`` flags, never raised.
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    r, rho, p = model.r, model.rho, model.pressure
    inside = rho > 0.0

    eos = np.abs(p[inside] / (rho[inside] ** model.gamma
                              * np.exp(model.entropy[inside] / model.cv)) - 1.0)
    eos_res = float(eos.max())

    prim = model.primitives(r[1:-1])
    hydro = np.abs(prim["dpressure"]
                   + model.gconst * model.mass[1:-1] * rho[1:-1] / r[1:-1] ** 2)
    hydro_res = float(hydro.max() / (model.central_pressure / model.radius))

    # surface power laws over one decade of depth resolved by the grid
    h = r[1] - r[0]
    depth = model.radius - r
    d_lo = max(2.0 * h, 1e-3 * model.radius)
    window = (depth >= d_lo) & (depth <= 10.0 * d_lo)
    rho_slope = _loglog_slope(depth[window], rho[window])
    p_slope = _loglog_slope(depth[window], p[window])

    # d(c^2)/dn at the surface; c^2 = gamma * Theta * E
    surf = model.primitives(np.array([model.radius]))
    e_surf = np.exp(surf["entropy"][0] / (model.gamma * model.cv))
    dc2dn = float(model.gamma * surf["dtheta"][0] * e_surf)

    core = (r > 0.0) & (r < 0.05 * model.radius)
    core_prim = model.primitives(r[core])
    concavity = float(np.min(-core_prim["drho"] / r[core]))

    outer = r >= 0.9 * model.radius
    decreasing = bool(np.all(np.diff(rho[outer]) < 0.0))

    expected = 1.0 / (model.gamma - 1.0)
    passed = dict(
        eos=eos_res <= tol["eos"],
        hydrostatic=hydro_res <= tol["hydrostatic"],
        surface_exponent=abs(rho_slope - expected) <= tol["exponent"],
        pressure_exponent=abs(p_slope - (expected + 1.0)) <= tol["exponent"],
        dc2dn_negative=bool(-np.inf < dc2dn < 0.0),
        center_concavity=concavity > 0.0,
        decreasing_near_surface=decreasing,
    )
    return ValidationReport(
        hydrostatic_max_residual=hydro_res, eos_max_residual=eos_res,
        surface_exponent_fit=rho_slope, pressure_exponent_fit=p_slope,
        dc2dn_surface=dc2dn, center_concavity=concavity, tolerances=tol,
        passed=passed, notes=model.flags)


######################################################################
# Serialization
######################################################################

_SCALARS = ("gamma", "cv", "gconst", "omega", "radius", "entropy_amp",
            "entropy_scale")
_COLUMNS = ("r", "rho", "pressure", "entropy", "mass")


def model_to_dict(model):
    out = dict(format_version=FORMAT_VERSION, kind="BackgroundModel")
    for name in _SCALARS:
        out[name] = float(getattr(model, name))
    out["columns"] = {name: getattr(model, name).tolist() for name in _COLUMNS}
    return out


def model_from_dict(data):
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version "
                         f"{data.get('format_version')!r}")
    kwargs = {name: float(data[name]) for name in _SCALARS}
    for name in _COLUMNS:
        kwargs[name] = np.asarray(data["columns"][name], dtype=float)
    _check_gamma(kwargs["gamma"])
    return BackgroundModel(**kwargs)


def save_model(model, path):
    Path(path).write_text(_io.dumps(model_to_dict(model)))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))


def export_csv(model, path):
    """Write the radial tables as CSV for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for row in zip(*(getattr(model, c) for c in _COLUMNS)):
            writer.writerow([repr(float(v)) for v in row])
