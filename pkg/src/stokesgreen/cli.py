"""Experiment runner.

Usage::

    stokesgreen run CONFIG [--out DIR] [--seed N]
    stokesgreen list-checks

``CONFIG`` is an INI file (or the name of a bundled config, see
``stokesgreen list-configs``). The run writes ``checks.csv`` (one row per
sub-check), ``summary.json`` (resolved config, per-check status and
timings) and, if requested, ``fields/*.npz`` grid dumps. The exit status is
0 iff every mandatory check passes.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import estimates as E
from .coefficients import CoefficientError, make_coefficients
from .discretization import assemble_stokes, adjoint_system
from .geometry import (Ball, ExteriorBox, GeometryError, HalfBall, HalfSpaceBox, WholeSpaceBox,
                       build_domain, dist_to_boundary, region_nodes)
from .green import averaged_green, green_extrapolated
from .solver import SolverError

log = logging.getLogger("stokesgreen")

CSV_COLUMNS = ["check", "sub_check", "measured", "target", "band_lo", "band_hi", "pass"]


# ------------------------------------------------------------ catalog

CATALOG = {
    "ellipticity": {
        "anchor": "lam|xi|^2 <= A xi.xi and |A xi.eta| <= |xi||eta|/lam",
        "subs": ["lam_min", "lam_max_inv"]},
    "bmo": {
        "anchor": "mean oscillation of A against transverse averages, sup over r <= R",
        "subs": ["omega[R]"]},
    "oseen": {
        "anchor": "V = (1/8pi)(delta/r + r r^T/r^3) for the identity tensor",
        "subs": ["sup_rel_error"]},
    "decay": {
        "anchor": "|V(x,y)| <= C|x-y|^(2-d)",
        "subs": ["slope[pole*]"]},
    "corollary-bounds": {
        "anchor": "Y12, L_q(B_R) bounds on V, DV and Pi in powers of R",
        "subs": list(E.COROLLARY_NAMES)},
    "eps-scaling": {
        "anchor": "||DV_eps||_2 + ||Pi_eps||_2 ~ eps^(1-d/2)",
        "subs": ["slope"]},
    "symmetry": {
        "anchor": "V(x,y) = V*(y,x)^T",
        "subs": ["max_rel_discrepancy"]},
    "representation": {
        "anchor": "u(y) = int V*(.,y)^T f - D_a V*(.,y)^T f_a - Pi*(.,y) g",
        "subs": ["max_rel_error"]},
    "bogovskii": {
        "anchor": "div u = g with ||Du||_2 <= C3 ||g||_2",
        "subs": ["C3"]},
    "caccioppoli": {
        "anchor": "int_{B_R/2} |Du|^2 <= C R^-2 int_{B_R} |u|^2",
        "subs": ["max_ratio", "spread"]},
    "pressure": {
        "anchor": "int_{B_R} |p - (p)_{B_R}|^2 <= C int_{B_R} |Du|^2",
        "subs": ["max_ratio", "spread"]},
    "reverse-holder": {
        "anchor": "(avg_{R/2} |Du|^q0)^(1/q0) <= C (avg_R |Du|^2)^(1/2), q0 > 2",
        "subs": ["max_ratio[q0=*]", "spread[q0=*]"]},
    "local-boundedness": {
        "anchor": "||u||_{L_inf(B_R/2)} <= C R^-d ||u||_{L_1(B_R)}",
        "subs": ["max_ratio", "spread"]},
    "assumption-A": {
        "anchor": "[u]_{C^a0(B_R/2)} <= C0 R^-a0 (avg_{B_R} |u|^2)^(1/2)",
        "subs": ["constant"]},
    "assumption-B": {
        "anchor": "||u||_{L_inf(B+_R/2)} <= C1 (avg_{B+_R} |u|^2)^(1/2)",
        "subs": ["constant"]},
    "boundary-decay": {
        "anchor": "|V(x,y)| <~ min(d_x,|x-y|)^a2 min(d_y,|x-y|)^a2 |x-y|^(2-d-2a2)",
        "subs": ["dx_slope[pole*]", "pair_slope", "wall_trace", "alpha2"]},
}

ORDER = list(CATALOG)
HOMOGENEOUS = ("caccioppoli", "pressure", "reverse-holder", "local-boundedness",
               "assumption-A", "assumption-B")


def list_checks():
    """Stable, machine-readable catalog of the available checks."""
    return [{"name": k, "anchor": v["anchor"], "sub_checks": list(v["subs"])}
            for k, v in CATALOG.items()]


# ------------------------------------------------------------ config


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


DEFAULTS = {
    "domain": {"d": "3", "L": "1.0", "n": "32", "kind": "whole", "hole_center": "",
               "hole_radius": "0.125", "pad_layers": "0", "pad_ratio": "2.0"},
    "coefficients": {"variant": "identity"},
    "solver": {"tol": "1e-8", "maxiter": "5000", "gamma_s": "0.0"},
    "green": {"poles": "", "eps": "2h", "extrapolate": "", "extrapolate_checks": ""},
    "checks": {"enabled": "decay"},
    "run": {"seed": "0", "out": "results", "dump_fields": "false"},
}

CHECK_DEFAULTS = {
    "decay.band": "0.25", "decay.radii": "6",
    "corollary.q": "1.0", "corollary.band": "0.3", "corollary.r_min": "", "corollary.radii": "5",
    "eps_scaling.factors": "2, 4, 8", "eps_scaling.band": "0.15",
    "symmetry.factor": "10",
    "representation.trials": "10", "representation.band": "1e-6",
    "oseen.band": "0.10",
    "bogovskii.trials": "5",
    "homogeneous.trials": "20", "homogeneous.basis": "4", "homogeneous.radius": "",
    "homogeneous.spread": "10", "homogeneous.refine_n": "", "homogeneous.refine_band": "0.5",
    "reverse_holder.q0": "2.25, 2.5",
    "assumption.alpha": "0.5", "assumption.radii": "",
    "boundary.rho": "", "boundary.band": "0.2", "boundary.pair_band": "0.2",
    "bmo.radii": "0.05, 0.1, 0.2",
}


@dataclass
class ExperimentConfig:
    domain: dict
    coefficients: dict
    solver: dict
    green: dict
    checks: dict
    run: dict
    enabled: list = field(default_factory=list)

    def resolved(self):
        return {k: v for k, v in asdict(self).items()}


def _floats(text, path):
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(path, f"expected numbers, got {text!r}") from exc


def _float(text, path):
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(path, f"expected a number, got {text!r}") from exc


def _int(text, path):
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(path, f"expected an integer, got {text!r}") from exc


def _bool(text, path):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(path, f"expected a boolean, got {text!r}")


def _length(text, h, path):
    """A length given as a number or as a multiple of ``h`` (``"2h"``)."""
    t = text.strip()
    if t.endswith("h"):
        return _float(t[:-1] or "1", path) * h
    return _float(t, path)


def _resolve_config_path(name):
    p = Path(name)
    if p.exists():
        return p
    bundled = resources.files("stokesgreen") / "configs" / f"{name}.ini"
    if bundled.is_file():
        return bundled
    raise ConfigError("config", f"no such file or bundled config {name!r}")


def bundled_configs():
    root = resources.files("stokesgreen") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(path, seed=None, out=None):
    """Parse and validate a config file (or bundled config name)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    src = _resolve_config_path(path)
    cp.read_string(src.read_text())
    sections = {}
    for sec, defaults in DEFAULTS.items():
        vals = dict(defaults)
        if sec == "checks":
            vals.update(CHECK_DEFAULTS)
        if cp.has_section(sec):
            for k, v in cp.items(sec):
                if k not in vals and sec != "coefficients":
                    raise ConfigError(f"{sec}.{k}", "unknown key")
                vals[k] = v
        sections[sec] = vals
    for sec in cp.sections():
        if sec not in DEFAULTS:
            raise ConfigError(sec, "unknown section")
    if seed is not None:
        sections["run"]["seed"] = str(seed)
    if out is not None:
        sections["run"]["out"] = str(out)
    cfg = ExperimentConfig(**sections)
    validate(cfg)
    return cfg


def _build_domain(cfg):
    D = cfg.domain
    d = _int(D["d"], "domain.d")
    L = _float(D["L"], "domain.L")
    n = _int(D["n"], "domain.n")
    kind_name = D["kind"].strip().lower()
    if kind_name == "whole":
        kind = WholeSpaceBox()
    elif kind_name == "half":
        kind = HalfSpaceBox()
    elif kind_name == "exterior":
        c = _floats(D["hole_center"], "domain.hole_center") or [L / 2] * d
        kind = ExteriorBox(tuple(c), _float(D["hole_radius"], "domain.hole_radius"))
    else:
        raise ConfigError("domain.kind", f"expected whole|half|exterior, got {kind_name!r}")
    try:
        return build_domain(d, L, n, kind, pad_layers=_int(D["pad_layers"], "domain.pad_layers"),
                            pad_ratio=_float(D["pad_ratio"], "domain.pad_ratio"))
    except GeometryError as exc:
        raise ConfigError("domain", str(exc)) from exc


def _build_coefficients(cfg, d):
    C = dict(cfg.coefficients)
    variant = C.pop("variant").strip()
    params = {}
    for k, v in C.items():
        path = f"coefficients.{k}"
        if k in ("values", "anisotropy"):
            params[k] = tuple(_floats(v, path))
        elif k in ("axis",):
            params[k] = _int(v, path)
        elif k in ("form",):
            params[k] = v.strip()
        else:
            params[k] = _float(v, path)
    try:
        return make_coefficients(variant, d=d, **params)
    except (CoefficientError, TypeError, KeyError) as exc:
        raise ConfigError("coefficients", str(exc)) from exc


def _poles(cfg, dom):
    text = cfg.green["poles"].strip()
    if not text:
        c = dom.L / 2
        if isinstance(dom.kind, HalfSpaceBox):
            return [np.array([4 * dom.h, c, c])]
        if isinstance(dom.kind, ExteriorBox):
            return [np.array([c] * dom.d) + np.eye(dom.d)[0] * (dom.kind.radius + dom.L / 8)]
        return [np.full(dom.d, c)]
    out = []
    for m, part in enumerate(text.split(";")):
        path = f"green.poles[{m}]"
        vals = []
        for t in part.split(","):
            vals.append(_length(t, dom.h, path))
        if len(vals) != dom.d:
            raise ConfigError(path, f"expected {dom.d} coordinates")
        out.append(np.array(vals))
    return out


def validate(cfg):
    """Cross-field validation before any solve; raises :class:`ConfigError`."""
    dom = _build_domain(cfg)
    _build_coefficients(cfg, dom.d)
    tol = _float(cfg.solver["tol"], "solver.tol")
    if not 0 < tol < 1:
        raise ConfigError("solver.tol", "must lie in (0, 1)")
    _int(cfg.solver["maxiter"], "solver.maxiter")
    if _float(cfg.solver["gamma_s"], "solver.gamma_s") < 0:
        raise ConfigError("solver.gamma_s", "must be >= 0")
    eps = _length(cfg.green["eps"], dom.h, "green.eps")
    if eps < dom.h * (1 - 1e-9):
        raise ConfigError("green.eps", f"must be >= h = {dom.h}")
    if eps > dom.window_margin() + 1e-12:
        raise ConfigError("green.eps", f"must be <= L/4 = {dom.window_margin()}")
    for m, y in enumerate(_poles(cfg, dom)):
        path = f"green.poles[{m}]"
        if not dom.in_window(y):
            raise ConfigError(path, f"pole {tuple(y)} lies outside the measurement window")
        try:
            dist_to_boundary(dom, y)
        except GeometryError as exc:
            raise ConfigError(path, str(exc)) from exc
    enabled = [c.strip() for c in cfg.checks["enabled"].split(",") if c.strip()]
    for k, name in enumerate(enabled):
        if name not in CATALOG:
            raise ConfigError(f"checks.enabled[{k}]", f"unknown check {name!r}")
    q = _float(cfg.checks["corollary.q"], "checks.corollary.q")
    if not 1 <= q < dom.d / (dom.d - 1):
        raise ConfigError("checks.corollary.q", f"must lie in [1, {dom.d / (dom.d - 1):.3g})")
    if "boundary-decay" in enabled and not isinstance(dom.kind, HalfSpaceBox):
        raise ConfigError("checks.enabled", "boundary-decay needs domain.kind = half")
    if "symmetry" in enabled and len(_poles(cfg, dom)) < 2:
        raise ConfigError("green.poles", "symmetry needs at least two poles")
    if "decay" in enabled and len(_poles(cfg, dom)) < 3:
        raise ConfigError("green.poles", "decay needs at least three poles")
    for path in ("checks.homogeneous.trials", "checks.homogeneous.basis",
                 "checks.representation.trials", "checks.bogovskii.trials"):
        if _int(cfg.checks[path[len("checks."):]], path) < 1:
            raise ConfigError(path, "must be >= 1")
    _int(cfg.run["seed"], "run.seed")
    cfg.enabled = [c for c in ORDER if c in enabled]
    return cfg


# ------------------------------------------------------------ runner


class Runner:
    """Executes the enabled checks of a config, sharing expensive objects."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.seed = _int(cfg.run["seed"], "run.seed")
        self.dom = _build_domain(cfg)
        self.coeffs = _build_coefficients(cfg, self.dom.d)
        self.tol = _float(cfg.solver["tol"], "solver.tol")
        self.maxiter = _int(cfg.solver["maxiter"], "solver.maxiter")
        self.gamma_s = _float(cfg.solver["gamma_s"], "solver.gamma_s")
        self.eps = _length(cfg.green["eps"], self.dom.h, "green.eps")
        self.poles = _poles(cfg, self.dom)
        self._sys = None
        self._greens = {}
        self.dumps = []

    def c(self, key):
        return self.cfg.checks[key]

    def substream(self, name):
        """Seed derived from the root seed and a check name."""
        return int(np.random.SeedSequence([self.seed, *map(ord, name)]).generate_state(1)[0])

    @property
    def system(self):
        if self._sys is None:
            self._sys = assemble_stokes(self.dom, self.coeffs, self.gamma_s)
        return self._sys

    def greens(self, eps=None, adjoint=False, extrapolated=False):
        eps = self.eps if eps is None else eps
        key = (round(eps / self.dom.h, 9), adjoint, extrapolated)
        if key not in self._greens:
            sys_ = self.system
            if adjoint and sys_.symmetric:
                self._greens[key] = self.greens(eps, False, extrapolated)
                return self._greens[key]
            target = adjoint_system(sys_) if adjoint else sys_
            if extrapolated:
                sched = [_length(t, self.dom.h, "green.extrapolate")
                         for t in self.cfg.green["extrapolate"].split(",") if t.strip()]
                self._greens[key] = [green_extrapolated(target, y, sched, self.tol, self.maxiter)
                                     for y in self.poles]
            else:
                self._greens[key] = [averaged_green(target, y, eps, self.tol, self.maxiter)
                                     for y in self.poles]
        return self._greens[key]

    def _decay_greens(self):
        checks = [t.strip() for t in self.cfg.green["extrapolate_checks"].split(",")]
        return self.greens(extrapolated="decay" in checks and bool(
            self.cfg.green["extrapolate"].strip()))

    # individual checks ---------------------------------------------------
    def run_ellipticity(self):
        lo, hi = self.dom.box_bounds()
        return [E.check_ellipticity_report(self.coeffs, seed=self.substream("ellipticity"),
                                           box=(float(lo.min()), float(hi.max())))]

    def run_bmo(self):
        radii = _floats(self.c("bmo.radii"), "checks.bmo.radii")
        return [E.check_bmo(self.coeffs, radii, self.dom.h, seed=self.substream("bmo"),
                            box=(0.0, self.dom.L))]

    def run_oseen(self):
        return [E.check_oseen(self.greens()[0], band=_float(self.c("oseen.band"), "oseen.band"))]

    def run_decay(self):
        k = _int(self.c("decay.radii"), "checks.decay.radii")
        radii = E.default_radii(self.dom, count=k)
        return [E.check_decay(self._decay_greens(), radii,
                              band=_float(self.c("decay.band"), "checks.decay.band"))]

    def run_corollary_bounds(self):
        dom = self.dom
        r_min = self.c("corollary.r_min").strip()
        r_min = _length(r_min, dom.h, "checks.corollary.r_min") if r_min else dom.L / 8
        k = _int(self.c("corollary.radii"), "checks.corollary.radii")
        radii = np.geomspace(r_min, dom.L / 4, k)
        return [E.check_corollary_bounds(self.greens()[0], radii,
                                         q=_float(self.c("corollary.q"), "corollary.q"),
                                         band=_float(self.c("corollary.band"), "corollary.band"))]

    def run_eps_scaling(self):
        factors = _floats(self.c("eps_scaling.factors"), "checks.eps_scaling.factors")
        gs = [self.greens(eps=f * self.dom.h)[0] for f in factors]
        return [E.check_eps_scaling(gs, band=_float(self.c("eps_scaling.band"), "band"))]

    def run_symmetry(self):
        return [E.check_symmetry(self.greens(), self.greens(adjoint=True), self.tol,
                                 factor=_float(self.c("symmetry.factor"), "symmetry.factor"))]

    def run_representation(self):
        return [E.check_representation(
            self.system, self.greens(adjoint=True),
            trials=_int(self.c("representation.trials"), "representation.trials"),
            seed=self.substream("representation"), tol=self.tol,
            band=_float(self.c("representation.band"), "representation.band"))]

    def _bogovskii_region(self, dom):
        c = dom.L / 2
        R = dom.L / 4
        if isinstance(dom.kind, HalfSpaceBox):
            return region_nodes(dom, HalfBall((0.0, c, c), R), check_fit=False)
        if isinstance(dom.kind, ExteriorBox):
            return region_nodes(dom, Ball(tuple(dom.kind.center), 2 * dom.kind.radius))
        return region_nodes(dom, Ball((c,) * dom.d, R))

    def run_bogovskii(self):
        return [E.check_bogovskii(self.dom, self._bogovskii_region(self.dom),
                                  trials=_int(self.c("bogovskii.trials"), "bogovskii.trials"),
                                  seed=self.substream("bogovskii"), tol=self.tol)]

    # homogeneous-solution checks -----------------------------------------
    def _homog_setup(self, dom):
        half = isinstance(dom.kind, HalfSpaceBox)
        c = dom.L / 2
        center = (0.0, c, c) if half else (c,) * dom.d
        rtext = self.c("homogeneous.radius").strip()
        R = _length(rtext, dom.h, "checks.homogeneous.radius") if rtext else dom.L / 4
        return center, R, half

    def _homog_fields(self, dom, name):
        key = ("homog", dom.n)
        if key not in self._greens:
            sys_ = self.system if dom is self.dom else assemble_stokes(dom, self.coeffs,
                                                                       self.gamma_s)
            center, R, _ = self._homog_setup(dom)
            self._greens[key] = E.homogeneous_solutions(
                sys_, center, R, trials=_int(self.c("homogeneous.trials"), "trials"),
                basis=_int(self.c("homogeneous.basis"), "basis"),
                seed=self.substream("homogeneous") % (2 ** 31), tol=self.tol)[0]
        return self._greens[key]

    def _homog_reports(self, name, dom):
        fields = self._homog_fields(dom, name)
        center, R, half = self._homog_setup(dom)
        variant = "boundary" if half else "interior"
        spread = _float(self.c("homogeneous.spread"), "checks.homogeneous.spread")
        if name == "caccioppoli":
            rep = E.check_caccioppoli(fields, center, R, variant)
        elif name == "pressure":
            rep = E.check_pressure_estimate(fields, E._ball(dom, center, R, half))
        elif name == "reverse-holder":
            q0s = _floats(self.c("reverse_holder.q0"), "checks.reverse_holder.q0")
            rep = E.check_reverse_holder(fields, center, R, q0s, half=half)
        elif name == "local-boundedness":
            rep = E.check_local_boundedness(fields, center, R, variant)
        elif name == "assumption-A":
            radii = self._assumption_radii(dom, R)
            alpha = _float(self.c("assumption.alpha"), "checks.assumption.alpha")
            cert = E.check_assumption_A(fields, center, radii, alpha,
                                        seed=self.substream("assumption-A"))
            rep = cert.report("assumption_A")
        else:
            radii = self._assumption_radii(dom, R)
            rep = E.check_assumption_B(fields, center, radii).report("assumption_B")
        for s in rep.subs:
            if s.name.startswith("spread"):
                s.hi = spread
                s.passed = bool(s.lo <= s.measured <= s.hi)
        return rep

    def _assumption_radii(self, dom, R):
        text = self.c("assumption.radii").strip()
        if text:
            return [_length(t, dom.h, "checks.assumption.radii") for t in text.split(",")]
        return [R, R / np.sqrt(2)]

    def run_homogeneous(self, name):
        rep = self._homog_reports(name, self.dom)
        refine = self.c("homogeneous.refine_n").strip()
        if refine:
            fine_dom = build_domain(self.dom.d, self.dom.L, _int(refine, "refine_n"),
                                    self.dom.kind, self.dom.pad_layers, self.dom.pad_ratio)
            fine = self._homog_reports(name, fine_dom)
            band = _float(self.c("homogeneous.refine_band"), "checks.homogeneous.refine_band")
            for s in list(rep.subs):
                if s.name.startswith(("max_ratio", "constant")):
                    f = fine[s.name]
                    rel = abs(f.measured - s.measured) / max(abs(s.measured), 1e-300)
                    rep.add(f"refinement:{s.name}", rel, 0.0, 0.0, band, mandatory=s.mandatory)
        return [rep]

    def run_boundary_decay(self):
        dom = self.dom
        fields = self._homog_fields(dom, "boundary-decay")
        center, R, _ = self._homog_setup(dom)
        rho = self.c("boundary.rho").strip()
        rho = _length(rho, dom.h, "checks.boundary.rho") if rho else dom.L / 4
        dx = E.default_wall_distances(dom, rho)
        alpha2, slopes = E.boundary_holder_exponent(fields, center, dx)
        rep = E.check_boundary_decay(self.greens(), alpha2, rho=rho, dx=dx,
                                     band=_float(self.c("boundary.band"), "boundary.band"),
                                     pair_band=_float(self.c("boundary.pair_band"), "pair_band"))
        rep.data["alpha2_trial_slopes"] = [float(s) for s in slopes]
        rep.add("alpha2", alpha2, alpha2, 0.0, 1.0, mandatory=False,
                note=f"min over {len(slopes)} trials")
        return [rep]

    def run(self, name):
        method = {"corollary-bounds": self.run_corollary_bounds,
                  "eps-scaling": self.run_eps_scaling,
                  "boundary-decay": self.run_boundary_decay}.get(name)
        if method is None and name in HOMOGENEOUS:
            return self.run_homogeneous(name)
        if method is None:
            method = getattr(self, "run_" + name.replace("-", "_"))
        return method()


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def run_experiment(cfg, out_dir=None):
    """Run all enabled checks; returns ``(exit_status, summary_dict)``."""
    out = Path(out_dir or cfg.run["out"])
    out.mkdir(parents=True, exist_ok=True)
    runner = Runner(cfg)
    rows = []
    summary = {"config": cfg.resolved(), "domain": runner.dom.describe(),
               "coefficients": runner.coeffs.describe(), "checks": {}}
    ok = True
    for name in cfg.enabled:
        t0 = time.perf_counter()
        entry = {}
        try:
            reports = runner.run(name)
            passed = all(r.passed for r in reports)
            entry["status"] = "passed" if passed else "failed"
            entry["reports"] = [{"check": r.check, "context": _jsonable(r.context),
                                 "data": _jsonable(r.data),
                                 "subs": [_jsonable(asdict(s)) for s in r.subs]}
                                for r in reports]
            for r in reports:
                for s in r.subs:
                    rows.append([name, s.name, _fmt(s.measured), _fmt(s.target), _fmt(s.lo),
                                 _fmt(s.hi), _fmt(s.passed)])
        except (SolverError, GeometryError, ValueError) as exc:
            passed = False
            entry["status"] = "errored"
            entry["error"] = str(exc)
            rows.append([name, "errored", "nan", "nan", "nan", "nan", "false"])
        entry["seconds"] = round(time.perf_counter() - t0, 3)
        summary["checks"][name] = entry
        ok &= passed
        log.info("%s: %s (%.1fs)", name, entry["status"], entry["seconds"])
    summary["passed"] = bool(ok)
    buf = io.StringIO()
    buf.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    (out / "checks.csv").write_text(buf.getvalue())
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    (out / "config.resolved.ini").write_text(_config_text(cfg))
    if _bool(cfg.run["dump_fields"], "run.dump_fields"):
        fdir = out / "fields"
        fdir.mkdir(exist_ok=True)
        for key, gs in runner._greens.items():
            if key and key[0] == "homog":
                continue
            for m, g in enumerate(gs):
                tag = f"eps{key[0]:g}h{'_adj' if key[1] else ''}{'_ext' if key[2] else ''}"
                g.save(fdir / f"green_pole{m}_{tag}.npz")
    return (0 if ok else 1), summary


def _config_text(cfg):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    for sec in DEFAULTS:
        cp[sec] = getattr(cfg, sec)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def main(argv=None):
    parser = argparse.ArgumentParser(prog="stokesgreen",
                                     description="Discrete Stokes Green function experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run the checks of a config")
    p_run.add_argument("config", help="INI file or bundled config name")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override run.seed")
    sub.add_parser("list-checks", help="print the check catalog as JSON")
    sub.add_parser("list-configs", help="print the bundled config names")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.cmd == "list-checks":
        print(json.dumps(list_checks(), indent=2))
        return 0
    if args.cmd == "list-configs":
        print("\n".join(bundled_configs()))
        return 0
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status, summary = run_experiment(cfg, args.out)
    for name, entry in summary["checks"].items():
        print(f"{name:20s} {entry['status']}")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
