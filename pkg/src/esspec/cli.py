"""
Scenario runner: build a star, evaluate its spectral data and write
deterministic JSON/CSV results.

    esspec all --entropy-amp 0.1 --stages weyl,modes --output out/
    esspec spectrum --omega 0.5 --grid 64x64
    esspec weyl run --x0 0.6,0.6 --t alpha_plus_half --eps 2^-3..2^-7
    esspec modes solve --l 2 --nodes 400 --count 20
    esspec modes synthesize --t 3.0

Settings come from defaults, then a TOML file (--config), then the
ESSPEC_OUTPUT_DIR environment variable for the output directory, then
command-line flags.  Exit status: 0 all enabled verdicts pass, 1 some
verdict fails, 2 bad configuration, 3 numerical failure in a named stage.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _io, background, fields as coef_fields, modes, spectrum, weyl
from .background import FORMAT_VERSION

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

STAGES = ("model", "fields", "spectrum", "weyl", "modes")
OUTPUT_ENV = "ESSPEC_OUTPUT_DIR"
TARGETS = ("alpha_minus_half", "alpha_plus_half", "alpha_mid")

CRITERIA = (
    "c01_background_fidelity",
    "c02_coefficient_identities",
    "c03_alpha_correctness",
    "c04_spherical_cross_check",
    "c05_disk_bound",
    "c06_weyl_certification",
    "c07_mode_structure",
    "c08_companion_correspondence",
    "c09_synthesis",
    "c10_determinism",
)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


@dataclass
class ScenarioConfig:
    gamma: float = 5.0 / 3.0
    entropy_amp: float = 0.0
    omega: float = 0.0
    nodes: int = 1001
    cv: float = 1.0
    grid: str = "64x64"
    x0: list = None
    targets: list = field(default_factory=lambda: ["alpha_minus_half",
                                                   "alpha_plus_half"])
    nu1: float = 1.0
    nu2: float = 2.0
    eps: list = field(default_factory=weyl.default_eps)
    m: int = 0
    quad_nodes: int = 32
    degrees: list = field(default_factory=lambda: [2])
    mode_nodes: int = 400
    count: int = 20
    synth_time: float = 1.0
    stages: list = field(default_factory=lambda: list(STAGES))
    output: str = "esspec_out"
    csv: bool = True

    def validate(self):
        if not 1.0 < self.gamma <= 2.0:
            raise ConfigError("gamma must lie in (1, 2]")
        if self.nodes < 200:
            raise ConfigError("nodes must be at least 200")
        if self.cv <= 0.0:
            raise ConfigError("cv must be positive")
        parse_grid(self.grid)
        if not 0.0 < self.nu1 < self.nu2:
            raise ConfigError("need 0 < nu1 < nu2")
        if len(self.eps) < 1 or any(e <= 0.0 for e in self.eps):
            raise ConfigError("eps values must be positive")
        for t in self.targets:
            if not isinstance(t, (int, float)) and t not in TARGETS:
                raise ConfigError(f"unknown target selector {t!r}")
        if self.x0 is not None and (len(self.x0) != 2 or self.x0[0] <= 0.0):
            raise ConfigError("x0 must be two numbers w,z with w > 0")
        if any(l < 0 for l in self.degrees):
            raise ConfigError("harmonic degrees must be nonnegative")
        if self.mode_nodes < 100:
            raise ConfigError("mode nodes must be at least 100")
        if self.quad_nodes < 32:
            raise ConfigError("quadrature needs at least 32 nodes per axis")
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages {sorted(unknown)}")
        return self


# TOML layout: section -> {key in file: attribute}
_TOML_KEYS = {
    "model": {"gamma": "gamma", "entropy_amp": "entropy_amp",
              "omega": "omega", "nodes": "nodes", "cv": "cv"},
    "spectrum": {"grid": "grid"},
    "weyl": {"x0": "x0", "t": "targets", "nu1": "nu1", "nu2": "nu2",
             "eps": "eps", "m": "m", "quad_nodes": "quad_nodes"},
    "modes": {"l": "degrees", "nodes": "mode_nodes", "count": "count",
              "t": "synth_time"},
    "output": {"dir": "output", "csv": "csv", "stages": "stages"},
}


def load_config(path):
    """Read a TOML scenario file; unknown sections or keys are rejected."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = ScenarioConfig()
    for section, values in data.items():
        if section not in _TOML_KEYS or not isinstance(values, dict):
            raise ConfigError(f"unknown config section {section!r}")
        for key, value in values.items():
            if key not in _TOML_KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            attr = _TOML_KEYS[section][key]
            if attr == "eps" and isinstance(value, str):
                value = parse_eps(value)
            if attr in ("targets", "degrees", "stages") and not isinstance(
                    value, list):
                value = [value]
            setattr(cfg, attr, value)
    return cfg


def parse_grid(text):
    try:
        nw, nz = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"grid must look like 64x64, got {text!r}") from exc
    if nw < 1 or nz < 1:
        raise ConfigError("grid sizes must be positive")
    return nw, nz


def _power(text):
    base, _, expo = text.partition("^")
    return float(base) ** float(expo) if expo else float(base)


def parse_eps(text):
    """'2^-3..2^-7' (every integer power in between) or a comma list."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            base, _, e_lo = lo.partition("^")
            base2, _, e_hi = hi.partition("^")
            if base != base2 or not e_lo or not e_hi:
                raise ValueError(text)
            a, b = int(e_lo), int(e_hi)
            step = 1 if b >= a else -1
            return [float(base) ** k for k in range(a, b + step, step)]
        return [_power(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse eps list {text!r}") from exc


def parse_target(text):
    if text in TARGETS:
        return text
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"unknown target {text!r}") from exc


def parse_pair(text):
    try:
        w, z = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"x0 must look like w,z, got {text!r}") from exc
    return [w, z]


######################################################################
# Stages
######################################################################

def _dump(path, data):
    Path(path).write_text(_io.dumps(data))


def _verdict(ok, **detail):
    if ok is None:
        return dict(status="not_applicable", **detail)
    return dict(status="pass" if ok else "fail", **detail)


class Runner:
    """Executes the enabled stages in order and collects verdicts."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.output)
        self.verdicts = {name: dict(status="not_run") for name in CRITERIA}
        self._model = None

    @property
    def model(self):
        if self._model is None:
            c = self.cfg
            self._model = background.build_background(
                c.gamma, c.entropy_amp, c.omega, nodes=c.nodes, cv=c.cv)
        return self._model

    def run(self):
        self.out.mkdir(parents=True, exist_ok=True)
        for stage in STAGES:
            if stage not in self.cfg.stages:
                continue
            try:
                getattr(self, f"stage_{stage}")()
            except (ArithmeticError, ValueError, RuntimeError,
                    np.linalg.LinAlgError) as exc:
                raise StageError(stage, exc) from exc
        self.verdicts["c10_determinism"] = dict(
            status="not_applicable",
            note="JSON is written with sorted keys and no timestamps; "
                 "compare two runs with --check-determinism")
        summary = dict(format_version=FORMAT_VERSION,
                       config=_config_dict(self.cfg),
                       verdicts=self.verdicts,
                       ok=all(v["status"] != "fail"
                              for v in self.verdicts.values()))
        _dump(self.out / "summary.json", summary)
        return summary

    def stage_model(self):
        m = self.model
        report = background.validate_background(m)
        background.save_model(m, self.out / "model.json")
        _dump(self.out / "validation.json", report.to_dict())
        if self.cfg.csv:
            background.export_csv(m, self.out / "model.csv")
        checks = dict(report.passed)
        closed = background.lane_emden_closed_form_errors()
        checks["lane_emden_closed_forms"] = max(closed.values()) <= 1e-8
        self.verdicts["c01_background_fidelity"] = _verdict(
            all(checks.values()), checks=checks, lane_emden=closed,
            hydrostatic=report.hydrostatic_max_residual,
            eos=report.eos_max_residual,
            surface_exponent=report.surface_exponent_fit)

    def stage_fields(self):
        m = self.model
        pts = coef_fields.random_interior_points(m, 1000, seed=0)
        res = coef_fields.identity_residuals(m, pts, seed=0)
        _dump(self.out / "fields.json",
              dict(format_version=FORMAT_VERSION, points=1000, residuals=res))
        if self.cfg.csv:
            coef_fields.export_profiles_csv(m, self.out / "profiles.csv")
        self.verdicts["c02_coefficient_identities"] = _verdict(
            max(res.values()) <= 1e-10, residuals=res)

    def stage_spectrum(self):
        m = self.model
        nw, nz = parse_grid(self.cfg.grid)
        spec = spectrum.GridSpec(nw, nz)
        smap = spectrum.spectrum_map(m, self.cfg.omega, spec)
        smap.write_json(self.out / "spectrum_map.json")
        if self.cfg.csv:
            smap.write_csv(self.out / "spectrum_map.csv")
        iv = smap.intervals
        scale = max(float(np.max(np.abs(iv.q1))),
                    float(np.max(np.abs(iv.q2))), 1e-300)
        signs = bool(np.all(iv.alpha_minus <= 0.0)
                     and np.all(iv.alpha_plus >= 0.0))
        product = float(np.max(np.abs(iv.alpha_minus * iv.alpha_plus
                                      + 0.25 * iv.q2**2))) / scale**2
        gap = smap.max_oracle_gap
        checks = dict(signs=signs, product=product <= 1e-12,
                      oracle_agreement=gap <= 1e-12)
        if m.is_isentropic and self.cfg.omega == 0.0:
            sup = max(float(np.max(np.abs(iv.alpha_minus))),
                      float(np.max(np.abs(iv.alpha_plus))))
            checks["isentropic_zero"] = sup <= 1e-12
        self.verdicts["c03_alpha_correctness"] = _verdict(
            all(checks.values()), checks=checks, oracle_gap=gap,
            product_residual=product)

        q1s, q2s = spectrum.spherical_q_pair(m, smap.w, smap.z,
                                             self.cfg.omega)
        ms = coef_fields.sample_meridional(m, smap.w, smap.z)
        qscale = float(np.max(spectrum.natural_scale(ms, self.cfg.omega)))
        sph = max(float(np.max(np.abs(q1s - iv.q1))),
                  float(np.max(np.abs(q2s - iv.q2)))) / qscale
        checks4 = dict(formulas=sph <= 1e-10)
        if not m.is_isentropic:
            checks4["real_halfwidth_positive"] = smap.cross_real_halfwidth > 0
            checks4["imag_halfwidth_positive"] = smap.cross_imag_halfwidth > 0
        self.verdicts["c04_spherical_cross_check"] = _verdict(
            all(checks4.values()), checks=checks4, formula_residual=sph,
            cross=[smap.cross_real_halfwidth, smap.cross_imag_halfwidth],
            oracle_cross=[smap.oracle_cross_real_halfwidth,
                          smap.oracle_cross_imag_halfwidth])
        self.verdicts["c05_disk_bound"] = _verdict(
            smap.disk_ok, radius_sq=smap.disk_radius_sq,
            oracle_ok=smap.oracle_disk_ok)

    def _targets(self, x0):
        ms = coef_fields.sample_meridional(self.model, x0[0], x0[1])
        q1, q2 = spectrum.q_pair(ms, self.cfg.omega)
        iv = spectrum.alpha_interval(q1, q2)
        lo, hi = float(iv.alpha_minus), float(iv.alpha_plus)
        degenerate = bool(spectrum.is_degenerate(
            iv, spectrum.natural_scale(ms, self.cfg.omega)))
        out = []
        for sel in self.cfg.targets:
            value = {"alpha_minus_half": 0.5 * lo, "alpha_plus_half": 0.5 * hi,
                     "alpha_mid": 0.5 * (lo + hi)}.get(sel, sel)
            out.append((str(sel), float(value)))
        return out, (lo, hi), degenerate

    def stage_weyl(self):
        cfg, m = self.cfg, self.model
        x0 = cfg.x0 or list(weyl.default_x0(m))
        targets, interval, degenerate = self._targets(x0)
        if degenerate:
            _dump(self.out / "weyl_series.json",
                  dict(format_version=FORMAT_VERSION, series=[],
                       interval=list(interval),
                       note="degenerate interval at x0, no admissible "
                            "nonzero target"))
            self.verdicts["c06_weyl_certification"] = _verdict(
                None, reason="degenerate interval at x0")
            return
        all_series, results = [], {}
        for label, t in targets:
            entry = dict(t=t)
            try:
                params = weyl.choose_direction(m, x0, cfg.omega, t, cfg.nu1,
                                               cfg.nu2, cfg.m)
            except ValueError as exc:
                entry.update(status="fail", reason=str(exc))
                results[label] = entry
                continue
            main = weyl.run_series(m, params, cfg.eps, cfg.quad_nodes,
                                   label=label)
            all_series.append(main)
            if cfg.m != 0:
                entry.update(status="pass" if max(main.kernel_residual)
                             <= 1e-10 else "fail",
                             kernel=max(main.kernel_residual),
                             note=main.notes)
                results[label] = entry
                continue
            no_j = weyl.run_series(m, params, cfg.eps, cfg.quad_nodes,
                                   use_j=False, label=label + ":no_j")
            bad_a = weyl.run_series(m, params, cfg.eps, cfg.quad_nodes,
                                    a_factor=1.1, label=label + ":a_x1.1")
            all_series += [no_j, bad_a]
            rows34 = max(s.rows34 for s in main.samples)
            kernel = max(main.kernel_residual)
            slope = main.fitted_slope
            checks = dict(
                rows34=rows34 <= 1e-12, kernel=kernel <= 1e-10,
                decay=bool(main.fit.monotone and 0.7 <= slope <= 1.3),
                control_no_j=not no_j.fit.verdict,
                control_a=not bad_a.fit.verdict)
            entry.update(status="pass" if all(checks.values()) else "fail",
                         checks=checks, slope=slope, rows34=rows34,
                         kernel=kernel, lam=[params.lam.real,
                                             params.lam.imag])
            results[label] = entry
        weyl.write_series_json(all_series, self.out / "weyl_series.json",
                               extra=dict(interval=list(interval),
                                          targets=results))
        if self.cfg.csv:
            weyl.write_series_csv(all_series, self.out / "weyl_series.csv")
        self.verdicts["c06_weyl_certification"] = _verdict(
            all(r["status"] == "pass" for r in results.values()),
            targets=results)

    def stage_modes(self):
        cfg, m = self.cfg, self.model
        if cfg.omega != 0.0:
            note = "mode solver needs a non-rotating star"
            for key in ("c07_mode_structure", "c08_companion_correspondence",
                        "c09_synthesis"):
                self.verdicts[key] = _verdict(None, reason=note)
            return
        mode_model = m
        c7, c8, c9 = {}, {}, {}
        for l in cfg.degrees:
            op = modes.assemble_radial(mode_model, l, cfg.mode_nodes)
            table = modes.solve_modes(op)
            scale = float(np.abs(table.eigenvalues).max())
            cols = np.nonzero(table.eigenvalues > table.kernel_threshold)[0]
            it = modes.solve_modes(op, count=10, method="iterative")
            dual = modes.dual_solver_defect(table, it)
            ortho = modes.orthonormality_defect(op, table)
            ref = (float(table.positive[0]) if m.is_isentropic else
                   modes.reference_fundamental(m, l, cfg.mode_nodes))
            cls = modes.classify_and_check(table, ref) if l > 0 else None
            # buoyancy modes of a stratified star pile up against the kernel
            # cutoff, where relative residuals only measure roundoff in K;
            # pointwise checks start at the f-mode
            if cls is not None:
                low = cols[table.eigenvalues[cols] >= cls.f_mode][:10]
            else:
                low = cols[:10]
            resid = modes.residual_defect(op, table, low)
            resid_near = modes.residual_defect(op, table, cols[:10])
            if m.is_isentropic:
                order = convergence_order(mode_model, l, cfg.mode_nodes,
                                          table)
            else:
                order = None
            checks = dict(
                nonnegative=bool(table.eigenvalues.min() >= -1e-10 * scale)
                if m.is_isentropic else None,
                increasing=bool(np.all(np.diff(table.eigenvalues[low]) > 0)),
                dual_solver=dual <= 1e-8,
                orthonormal=ortho <= 1e-8,
                residual=resid <= 1e-8,
                order2=(order >= 1.8) if m.is_isentropic else None,
            )
            if cls is not None:
                if m.is_isentropic:
                    checks["no_g_modes"] = len(cls.g_modes) == 0
                elif m.entropy_amp > 0.0:
                    checks["g_modes"] = bool(len(cls.g_modes) >= 6
                                             and cls.strictly_decreasing)
            checks = {k: v for k, v in checks.items() if v is not None}
            c7[f"l{l}"] = dict(checks=checks, dual_rel=dual,
                               orthonormality=ortho, residual=resid,
                               residual_lowest_positive=resid_near,
                               order=order, kernel_dim=table.kernel_dim,
                               g_count=0 if cls is None else len(cls.g_modes))

            comp = modes.companion_check(op, table, columns=low)
            c8[f"l{l}"] = dict(max_rel_error=comp["max_rel_error"],
                               ok=comp["max_rel_error"] <= 1e-8)
            c9[f"l{l}"] = synthesis_checks(table, cfg.synth_time)

            extra = dict(dual_solver_rel=dual, orthonormality=ortho,
                         convergence_order=order,
                         companion=comp,
                         synthesis=c9[f"l{l}"],
                         classification=None if cls is None else cls.to_dict())
            modes.write_modes_json(table, self.out / f"modes_l{l}.json",
                                   cfg.count, extra)
            if cfg.csv:
                modes.write_modes_csv(op, table, self.out / f"modes_l{l}.csv")
        self.verdicts["c07_mode_structure"] = _verdict(
            all(all(v["checks"].values()) for v in c7.values()), degrees=c7)
        self.verdicts["c08_companion_correspondence"] = _verdict(
            all(v["ok"] for v in c8.values()), degrees=c8)
        self.verdicts["c09_synthesis"] = _verdict(
            all(v["ok"] for v in c9.values()), degrees=c9)


def convergence_order(model, l, nodes, table=None, count=5):
    """
    Observed order of the lowest ``count`` eigenvalues above the kernel
    from grids with nodes/2, nodes and 2*nodes points (worst mode).
    """
    levels = []
    for k in (nodes // 2, nodes, 2 * nodes):
        if k == nodes and table is not None:
            levels.append(table.positive[:count])
        else:
            levels.append(modes.solve_modes(
                modes.assemble_radial(model, l, k)).positive[:count])
    d1 = np.abs(levels[0] - levels[1])
    d2 = np.abs(levels[1] - levels[2])
    return float(np.min(np.log2(d1 / d2)))


def synthesis_checks(table, t_probe):
    """Initial data, single-mode closed forms and energy constancy."""
    n = len(table.eigenvalues)
    rng = np.random.default_rng(7)
    u0, v0 = rng.normal(size=n), rng.normal(size=n)
    u, du = modes.synthesize(table, u0, v0, 0.0)
    initial = max(float(np.abs(u - u0).max()), float(np.abs(du - v0).max()))

    cols = np.nonzero(table.eigenvalues > table.kernel_threshold)[0]
    k = cols[0]
    lam = table.eigenvalues[k]
    unit = np.zeros(n)
    unit[k] = 1.0
    u, _ = modes.synthesize(table, unit, 0.0 * unit, t_probe)
    cos_err = abs(u[k] - math.cos(math.sqrt(lam) * t_probe))

    a = np.zeros(n)
    b = np.zeros(n)
    a[cols[:10]] = rng.normal(size=min(10, len(cols)))
    b[cols[:10]] = rng.normal(size=min(10, len(cols)))
    e0 = modes.modal_energy(table, a, b)
    horizon = 10.0 / math.sqrt(lam)
    drift = max(abs(modes.modal_energy(table, *modes.synthesize(
        table, a, b, t)) / e0 - 1.0) for t in np.linspace(0.0, horizon, 41))
    ok = initial <= 1e-10 and cos_err <= 1e-10 and drift <= 1e-8
    return dict(initial=initial, cos=cos_err, energy_drift=drift, ok=ok)


def _config_dict(cfg):
    return {k: v for k, v in asdict(cfg).items() if k != "output"}


def run_scenario(cfg):
    """Validate ``cfg``, run it and return the summary dictionary."""
    cfg.validate()
    return Runner(cfg).run()


######################################################################
# Argument parsing
######################################################################

def _add_common(p, nodes=True):
    p.add_argument("--config", help="TOML scenario file")
    p.add_argument("--gamma", type=float)
    p.add_argument("--entropy-amp", type=float, dest="entropy_amp")
    p.add_argument("--omega", type=float)
    if nodes:
        p.add_argument("--nodes", type=int, help="background grid nodes")
    p.add_argument("--output", help="output directory")
    p.add_argument("--no-csv", action="store_true")


def _add_weyl(p):
    p.add_argument("--x0", type=str, help="meridional point w,z")
    p.add_argument("--t", type=str, action="append", dest="targets",
                   help="target value or alpha_minus_half, alpha_plus_half, "
                        "alpha_mid (repeatable)")
    p.add_argument("--nu1", type=float)
    p.add_argument("--nu2", type=float)
    p.add_argument("--eps", type=str, help="e.g. 2^-3..2^-7 or 0.1,0.05")
    p.add_argument("--m", type=int, help="azimuthal wave number")


def _add_modes(p):
    p.add_argument("--l", type=int, action="append", dest="degrees")
    p.add_argument("--mode-nodes", type=int, dest="mode_nodes")
    p.add_argument("--count", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="esspec",
        description="Spectral laboratory for gaseous-star oscillations")
    sub = parser.add_subparsers(dest="command")

    p_all = sub.add_parser("all", help="run the enabled stages")
    _add_common(p_all)
    p_all.add_argument("--stages", type=str,
                       help="comma list of " + ",".join(STAGES))
    p_all.add_argument("--grid", type=str)
    _add_weyl(p_all)
    _add_modes(p_all)
    p_all.add_argument("--check-determinism", action="store_true",
                       help="run twice and compare the JSON bytes")

    for name in ("model", "fields"):
        _add_common(sub.add_parser(name, help=f"{name} stage only"))
    p_spec = sub.add_parser("spectrum", help="spectrum map only")
    _add_common(p_spec)
    p_spec.add_argument("--grid", type=str)

    p_weyl = sub.add_parser("weyl", help="singular sequences")
    wsub = p_weyl.add_subparsers(dest="action", required=True)
    p_run = wsub.add_parser("run")
    _add_common(p_run)
    _add_weyl(p_run)

    p_modes = sub.add_parser("modes", help="radial mode solver")
    msub = p_modes.add_subparsers(dest="action", required=True)
    p_solve = msub.add_parser("solve")
    _add_common(p_solve, nodes=False)
    p_solve.add_argument("--l", type=int, action="append", dest="degrees")
    p_solve.add_argument("--nodes", type=int, dest="mode_nodes",
                         help="radial nodes of the mode grid")
    p_solve.add_argument("--count", type=int)
    p_syn = msub.add_parser("synthesize")
    _add_common(p_syn)
    p_syn.add_argument("--l", type=int, action="append", dest="degrees")
    p_syn.add_argument("--t", type=float, dest="synth_time", required=True)
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else \
        ScenarioConfig()
    env_out = os.environ.get(OUTPUT_ENV)
    if env_out:
        cfg.output = env_out
    simple = ("gamma", "entropy_amp", "omega", "nodes", "output", "grid",
              "nu1", "nu2", "m", "degrees", "mode_nodes", "count",
              "synth_time")
    for name in simple:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "no_csv", False):
        cfg.csv = False
    if getattr(args, "stages", None):
        cfg.stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    if getattr(args, "x0", None):
        cfg.x0 = parse_pair(args.x0)
    if getattr(args, "targets", None):
        cfg.targets = [parse_target(t) for t in args.targets]
    if getattr(args, "eps", None):
        cfg.eps = parse_eps(args.eps)

    command = args.command or "all"
    if command != "all":
        wanted = {"model": ["model"], "fields": ["fields"],
                  "spectrum": ["spectrum"], "weyl": ["weyl"],
                  "modes": ["modes"]}[command]
        cfg.stages = wanted
    return cfg


def _json_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).glob(
        "*.json"))}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate()
    except ConfigError as exc:
        print(f"esspec: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_scenario(cfg)
        if getattr(args, "check_determinism", False):
            first = _json_bytes(cfg.output)
            summary = run_scenario(cfg)
            same = first == _json_bytes(cfg.output)
            summary["verdicts"]["c10_determinism"] = _verdict(same)
            summary["ok"] = summary["ok"] and same
            _dump(Path(cfg.output) / "summary.json", summary)
    except StageError as exc:
        print(f"esspec: {exc}", file=sys.stderr)
        return 3
    for name, verdict in summary["verdicts"].items():
        print(f"{name:32s} {verdict['status']}")
    return 0 if summary["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
