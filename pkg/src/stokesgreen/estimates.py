"""Discrete norms, power-law fits and checkers for the Green function estimates.

Every checker returns an :class:`EstimateReport` made of sub-checks, each a
measured value with a target and a tolerance band. Norms use the midpoint
rule on cells and, for derivatives, the same corner samples as the
assembly, so that ``||Du||_2^2`` is exactly the discrete Dirichlet energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import FieldPair
from .geometry import (Annulus, Ball, Complement, GeometryError, HalfBall, HalfSpaceBox,
                       PHYSICAL, region_nodes)
from .green import GreenFunction
from .sampling import band_limited_field, random_pairs
from .solver import solve_stokes

__all__ = [
    "PowerLawFit",
    "SubCheck",
    "EstimateReport",
    "HolderCertificate",
    "fit_power_law",
    "lq_norm",
    "gradient_norm",
    "y12_norm",
    "holder_seminorm",
    "homogeneous_solutions",
    "check_decay",
    "check_corollary_bounds",
    "check_eps_scaling",
    "check_caccioppoli",
    "check_pressure_estimate",
    "check_reverse_holder",
    "check_local_boundedness",
    "check_assumption_A",
    "check_assumption_B",
    "boundary_holder_exponent",
    "check_boundary_decay",
    "default_wall_distances",
    "wall_trace",
    "compare_refinement",
]


# ------------------------------------------------------------ reports


@dataclass
class PowerLawFit:
    r: np.ndarray
    values: np.ndarray
    slope: float
    log_const: float
    rms: float

    def predict(self, r):
        return np.exp(self.log_const) * np.asarray(r) ** self.slope


@dataclass
class SubCheck:
    name: str
    measured: float
    target: float
    lo: float
    hi: float
    passed: bool
    mandatory: bool = True
    note: str = ""


@dataclass
class EstimateReport:
    check: str
    subs: list = field(default_factory=list)
    context: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(s.passed for s in self.subs if s.mandatory)

    def add(self, name, measured, target, lo, hi, mandatory=True, note=""):
        ok = bool(np.isfinite(measured) and lo <= measured <= hi)
        self.subs.append(SubCheck(name, float(measured), float(target), float(lo), float(hi),
                                  ok, mandatory, note))
        return ok

    def rows(self):
        return [(self.check, s.name, s.measured, s.target, s.lo, s.hi, s.passed)
                for s in self.subs]

    def __getitem__(self, name):
        for s in self.subs:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class HolderCertificate:
    """Sup over trials of a normalized Hölder (or sup) quotient."""

    exponent: float
    radii: list
    constant: float
    per_radius: dict
    trials: int
    excluded: int = 0

    def report(self, check, cap=np.inf):
        rep = EstimateReport(check, data={"per_radius": self.per_radius})
        rep.add("constant", self.constant, self.constant, 0.0, cap)
        return rep


def fit_power_law(r, values, min_samples=4, min_octaves=1.0):
    """Least-squares fit of ``log value = log C + s log r``.

    Raises ``ValueError`` for fewer than ``min_samples`` samples, a span of
    ``r`` below ``min_octaves`` octaves, or nonpositive values.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.shape != v.shape or r.ndim != 1:
        raise ValueError("r and values must be 1-d arrays of equal length")
    if len(r) < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {len(r)}")
    if np.any(v <= 0) or np.any(r <= 0):
        raise ValueError("power-law fit needs positive radii and values")
    if np.log2(r.max() / r.min()) < min_octaves - 1e-12:
        raise ValueError(f"radii span {np.log2(r.max() / r.min()):.2f} octaves, "
                         f"need {min_octaves}")
    x, y = np.log(r), np.log(v)
    X = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rms = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return PowerLawFit(r, v, float(coef[1]), float(coef[0]), rms)


# ------------------------------------------------------------ norms


def _columns(field_):
    if isinstance(field_, GreenFunction):
        return field_.columns
    if isinstance(field_, FieldPair):
        return [field_]
    return list(field_)


def _region_cells(dom, region):
    """Fluid-cell indices and volumes of a region."""
    from .discretization import layout_of
    lay = layout_of(dom)
    idx = lay.cell_index.ravel()[region.cells]
    if len(idx) == 0:
        raise GeometryError("empty region")
    return idx, lay.cell_volumes()[idx]


def _velocity_cells(field_, idx):
    cols = _columns(field_)
    dom = cols[0].layout.dom
    vals = [c.cell_velocity()[dom.fluid][idx] for c in cols]
    return np.stack(vals, axis=-1).reshape(len(idx), -1)


def _pressure_cells(field_, idx):
    return np.stack([c.p[idx] for c in _columns(field_)], axis=-1)


def _domain(field_):
    return _columns(field_)[0].layout.dom


def lq_norm(field_, region, q, dom=None, pressure=False):
    """``L_q`` norm over a region by the midpoint rule (Frobenius pointwise).

    ``field_`` is a :class:`FieldPair`, a :class:`GreenFunction` (all
    columns) or an array of cell values on the grid (then ``dom`` is needed).
    ``pressure=True`` measures the pressure part instead of the velocity.
    """
    if not 1 <= q < np.inf:
        raise ValueError("q must lie in [1, inf)")
    if isinstance(field_, np.ndarray):
        if dom is None:
            raise ValueError("array input needs the domain")
        idx, vol = _region_cells(dom, region)
        vals = field_[dom.fluid][idx].reshape(len(idx), -1)
    else:
        idx, vol = _region_cells(_domain(field_), region)
        vals = _pressure_cells(field_, idx) if pressure else _velocity_cells(field_, idx)
    mag = np.linalg.norm(vals, axis=1)
    return float((vol @ mag ** q) ** (1.0 / q))


def _grad_magnitudes(field_, idx):
    cols = _columns(field_)
    sq = 0.0
    for c in cols:
        G = c.gradient_samples(idx)
        sq = sq + np.sum(G ** 2, axis=(2, 3))
    return np.sqrt(sq)          # (m, 2^d)


def gradient_norm(field_, region, q=2):
    """``||Du||_{L_q}`` from the corner gradient samples."""
    dom = _domain(field_)
    idx, vol = _region_cells(dom, region)
    g = _grad_magnitudes(field_, idx)
    w = vol[:, None] / g.shape[1]
    return float(np.sum(w * g ** q) ** (1.0 / q))


def y12_norm(field_, region):
    """``||u||_{L_{2d/(d-2)}} + ||Du||_{L_2}``."""
    d = _domain(field_).d
    return lq_norm(field_, region, 2 * d / (d - 2)) + gradient_norm(field_, region, 2)


def holder_seminorm(field_, region, alpha, dom=None, max_pairs=10_000, seed=0):
    """``max |u(x) - u(z)| / |x - z|^alpha`` over cell-center pairs of a region.

    All pairs are used when there are at most ``max_pairs``, otherwise a
    seeded random sample of that size.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if isinstance(field_, np.ndarray):
        idx, _ = _region_cells(dom, region)
        vals = field_[dom.fluid][idx].reshape(len(idx), -1)
    else:
        dom = _domain(field_)
        idx, _ = _region_cells(dom, region)
        vals = _velocity_cells(field_, idx)
    if len(idx) < 2:
        raise GeometryError("degenerate region for a Hölder seminorm")
    pts = dom.cell_points(dom.fluid)[idx]
    i, j = random_pairs(len(idx), max_pairs, seed)
    dist = np.linalg.norm(pts[i] - pts[j], axis=1)
    diff = np.linalg.norm(vals[i] - vals[j], axis=1)
    return float(np.max(diff / dist ** alpha))


# ------------------------------------------------------- homogeneous data


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def homogeneous_solutions(sys, center, R, trials=20, basis=4, seed=0, tol=1e-8,
                          exclusion=1.25, kmax=3):
    """Random solutions of the homogeneous system on ``B_R(center)``.

    ``basis`` solves are driven by smooth band-limited body forces that vanish
    on ``B_{exclusion R}(center)`` (rising to full strength by ``1.5 R``) and
    inside the core box only; the trials are seeded random combinations of
    them. Returns ``(trials_list, basis_list)`` of :class:`FieldPair`.
    """
    dom = sys.dom
    d = dom.d
    c = np.asarray(center, dtype=float)
    rng = np.random.default_rng(seed)
    lo, hi = dom.core_bounds()
    basis_fields = []
    for b in range(basis):
        wave = band_limited_field(d, seed=seed * 1000 + b, kmax=kmax, period=dom.L,
                                  components=d)

        def force(x, wave=wave):
            r = np.linalg.norm(x - c, axis=1) / R
            inside = np.all((x >= lo) & (x <= hi), axis=1)
            return wave(x) * (_smoothstep((r - exclusion) / (1.5 - exclusion)) * inside)[:, None]

        fp, _ = solve_stokes(sys, f=force, tol=tol)
        basis_fields.append(fp)
    coef = rng.normal(size=(trials, basis))
    out = []
    for t in range(trials):
        u = sum(coef[t, b] * basis_fields[b].u for b in range(basis))
        p = sum(coef[t, b] * basis_fields[b].p for b in range(basis))
        out.append(FieldPair(sys.layout, u, p))
    return out, basis_fields


def interior_residual(sys, fp, region):
    """Relative momentum residual of ``fp`` at velocity unknowns inside ``region``."""
    lay = sys.layout
    centers = np.concatenate([lay.face_centers(j) for j in range(lay.d)])
    inside = region.desc.contains(centers)
    r = sys.A @ fp.u + sys.G @ fp.p
    scale = np.abs(sys.A @ fp.u).max() + 1e-300
    return float(np.abs(r[inside]).max() / scale) if inside.any() else 0.0


# ------------------------------------------------------------ ratio checks


def _ratio_report(check, ratios, context, spread_cap=10.0, note=""):
    ratios = np.asarray(ratios, dtype=float)
    valid = np.isfinite(ratios)
    excluded = int((~valid).sum())
    rep = EstimateReport(check, context=dict(context), data={"ratios": ratios.tolist()})
    if not valid.any():
        rep.add("max_ratio", 0.0, 0.0, 0.0, 0.0, note="all trials 0/0")
        return rep
    r = ratios[valid]
    rmax, rmin = float(r.max()), float(r.min())
    rep.add("max_ratio", rmax, rmax, 0.0, np.inf,
            note=f"{excluded} zero trials excluded" if excluded else note)
    spread = rmax / rmin if rmin > 0 else np.inf
    rep.add("spread", spread, 1.0, 1.0, spread_cap)
    rep.context["trials"] = int(valid.sum())
    return rep


def _safe_ratio(num, den):
    if den == 0:
        return np.nan if num == 0 else np.inf
    return num / den


def _ball(dom, center, R, half):
    cls = HalfBall if half else Ball
    return region_nodes(dom, cls(tuple(center), R), check_fit=False)


def check_caccioppoli(fields, center, R, variant="interior"):
    """``int_{B_{R/2}} |Du|^2 / (R^-2 int_{B_R} |u|^2)`` over trial solutions.

    ``variant`` is ``interior`` (balls), ``boundary`` (half-balls centered on
    the wall) or ``annulus`` (``B_R \\ B_{R/2}`` against ``B_{5R/4} \\ B_{R/4}``).
    """
    dom = _domain(fields[0])
    c = tuple(center)
    if variant == "annulus":
        inner = region_nodes(dom, Annulus(c, R / 2, R), check_fit=False)
        outer = region_nodes(dom, Annulus(c, R / 4, 5 * R / 4), check_fit=False)
    elif variant in ("interior", "boundary"):
        half = variant == "boundary"
        inner = _ball(dom, c, R / 2, half)
        outer = _ball(dom, c, R, half)
    else:
        raise ValueError(f"unknown Caccioppoli variant {variant!r}")
    ratios = [_safe_ratio(gradient_norm(f, inner) ** 2, R ** -2 * lq_norm(f, outer, 2) ** 2)
              for f in fields]
    return _ratio_report("caccioppoli", ratios, {"variant": variant, "R": R, "n": dom.n})


def check_pressure_estimate(fields, region):
    """``||p - (p)_region||_2^2 / ||Du||_{L_2(region)}^2`` over trial solutions."""
    dom = _domain(fields[0])
    idx, vol = _region_cells(dom, region)
    ratios = []
    for f in fields:
        p = f.p[idx]
        p = p - (vol @ p) / vol.sum()
        ratios.append(_safe_ratio(float(vol @ p ** 2), gradient_norm(f, region) ** 2))
    return _ratio_report("pressure", ratios, {"region": repr(region.desc), "n": dom.n})


def check_reverse_holder(fields, center, R, q0s=(2.25, 2.5), half=None):
    """``(avg_{Omega_{R/2}} |Du|^q0)^{1/q0} / (avg_{Omega_R} |Du|^2)^{1/2}``.

    ``Omega_R`` is the half-ball on a half-space domain (default) and the
    ball otherwise. One sub-check per ``q0``; the first one is mandatory.
    """
    dom = _domain(fields[0])
    if half is None:
        half = isinstance(dom.kind, HalfSpaceBox)
    inner = _ball(dom, center, R / 2, half)
    outer = _ball(dom, center, R, half)
    _, vi = _region_cells(dom, inner)
    _, vo = _region_cells(dom, outer)
    rep = None
    for k, q0 in enumerate(q0s):
        ratios = []
        for f in fields:
            lhs = gradient_norm(f, inner, q0) / vi.sum() ** (1 / q0)
            rhs = gradient_norm(f, outer, 2) / vo.sum() ** 0.5
            ratios.append(_safe_ratio(lhs, rhs))
        sub = _ratio_report("reverse_holder", ratios, {"R": R, "n": dom.n, "half": half})
        for s in sub.subs:
            s.name = f"{s.name}[q0={q0}]"
            s.mandatory = k == 0
        if rep is None:
            rep = sub
        else:
            rep.subs += sub.subs
            rep.data[f"ratios[q0={q0}]"] = sub.data["ratios"]
    return rep


def check_local_boundedness(fields, center, R, variant="interior"):
    """``||u||_{L_inf(B_{R/2})} / (R^-d ||u||_{L_1(B_R)})`` over trial solutions."""
    dom = _domain(fields[0])
    half = variant == "boundary"
    inner = _ball(dom, center, R / 2, half)
    outer = _ball(dom, center, R, half)
    idx, _ = _region_cells(dom, inner)
    ratios = []
    for f in fields:
        sup = float(np.linalg.norm(_velocity_cells(f, idx), axis=1).max())
        ratios.append(_safe_ratio(sup, R ** -dom.d * lq_norm(f, outer, 1)))
    return _ratio_report("local_boundedness", ratios, {"variant": variant, "R": R, "n": dom.n})


def _certificate(fields, center, radii, half, alpha, seed):
    dom = _domain(fields[0])
    per = {}
    excluded = 0
    for R in radii:
        inner = _ball(dom, center, R / 2, half)
        outer = _ball(dom, center, R, half)
        _, vo = _region_cells(dom, outer)
        best = 0.0
        for f in fields:
            ms = lq_norm(f, outer, 2) / np.sqrt(vo.sum())
            if alpha is None:
                idx, _ = _region_cells(dom, inner)
                num = float(np.linalg.norm(_velocity_cells(f, idx), axis=1).max())
            else:
                num = holder_seminorm(f, inner, alpha, seed=seed) * R ** alpha
            q = _safe_ratio(num, ms)
            if not np.isfinite(q):
                excluded += 1
                continue
            best = max(best, q)
        per[float(R)] = best
    return HolderCertificate(0.0 if alpha is None else alpha, [float(r) for r in radii],
                             max(per.values()), per, len(fields), excluded)


def check_assumption_A(fields, center, radii, alpha=0.5, seed=0):
    """Interior Hölder certificate ``C0 = sup [u]_{C^a(B_{R/2})} R^a / (avg_{B_R}|u|^2)^{1/2}``."""
    return _certificate(fields, center, radii, False, alpha, seed)


def check_assumption_B(fields, center, radii):
    """Boundary sup certificate ``C1 = sup ||u||_{L_inf(B+_{R/2})} / (avg_{B+_R}|u|^2)^{1/2}``."""
    return _certificate(fields, center, radii, True, None, 0)


def boundary_holder_exponent(fields, center, dx):
    """Boundary Hölder exponent from wall-normal profiles.

    For each trial (zero wall trace) ``|u(center + t e_1)|`` is fit against
    the wall distances ``t`` in ``dx``; the certificate exponent is the
    smallest fitted slope, capped at 1. ``center`` lies on the wall. Using
    the same distances as :func:`check_boundary_decay` keeps both exponents
    on one scale range, which matters when the coefficients oscillate
    across the wall-normal direction. Returns ``(alpha2, slopes)``.
    """
    dx = np.asarray(dx, dtype=float)
    pts = np.tile(np.asarray(center, dtype=float), (len(dx), 1))
    pts[:, 0] = pts[:, 0] + dx
    slopes = []
    for f in fields:
        vals = np.linalg.norm(f.evaluate(pts), axis=1)
        if vals.min() <= 0:
            continue
        slopes.append(fit_power_law(dx, vals).slope)
    if not slopes:
        raise ValueError("all trials vanish on the wall-normal profile")
    return float(min(min(slopes), 1.0)), slopes


def compare_refinement(coarse, fine, name="max_ratio", band=0.5):
    """Relative change of a sub-check value between two resolutions."""
    a = coarse[name].measured if isinstance(coarse, EstimateReport) else float(coarse)
    b = fine[name].measured if isinstance(fine, EstimateReport) else float(fine)
    rel = abs(b - a) / max(abs(a), 1e-300)
    rep = EstimateReport("refinement", data={"coarse": a, "fine": b})
    rep.add(name, rel, 0.0, 0.0, band)
    return rep


# ------------------------------------------------------------ Green checks


def _shell_max(green, radii, width=None):
    dom = green.layout.dom
    pts = dom.cell_points(dom.fluid)
    dist = np.linalg.norm(pts - green.y, axis=1)
    V = green.V_cells()[dom.fluid]
    mag = np.sqrt(np.sum(V ** 2, axis=(1, 2)))
    width = dom.h / 2 if width is None else width
    out = []
    for r in radii:
        sel = np.abs(dist - r) <= width
        if not sel.any():
            raise GeometryError(f"empty shell at r = {r}")
        out.append(float(mag[sel].max()))
    return np.array(out)


def default_radii(dom, count=6, r_min=None, r_max=None):
    r_min = 4 * dom.h if r_min is None else r_min
    r_max = dom.L / 4 if r_max is None else r_max
    return np.geomspace(r_min, r_max, count)


def check_decay(greens, radii=None, band=0.25, min_poles=3):
    """Slope of ``max_{|x-y|=r} |V(x,y)|`` against ``r``, one sub-check per pole."""
    if len(greens) < min_poles:
        raise ValueError(f"decay check needs at least {min_poles} poles")
    dom = greens[0].layout.dom
    radii = default_radii(dom) if radii is None else np.asarray(radii, dtype=float)
    if radii.min() < 4 * dom.h - 1e-12 or radii.max() > dom.L / 4 + 1e-12:
        raise ValueError("decay radii must lie in [4h, L/4]")
    target = 2.0 - dom.d
    rep = EstimateReport("decay", context={"n": dom.n, "eps": greens[0].eps})
    for m, g in enumerate(greens):
        fit = fit_power_law(radii, _shell_max(g, radii))
        rep.add(f"slope[pole{m}]", fit.slope, target, target - band, target + band)
        rep.data[f"pole{m}"] = {"y": g.y.tolist(), "values": fit.values.tolist()}
    rep.data["radii"] = radii.tolist()
    return rep


def corollary_quantities(green, R, q=1.0):
    dom = green.layout.dom
    c = tuple(green.y)
    ball = region_nodes(dom, Ball(c, R), check_fit=False)
    comp = region_nodes(dom, Complement(Ball(c, R)), check_fit=False)
    return np.array([
        y12_norm(green, comp),
        lq_norm(green, ball, q),
        gradient_norm(green, ball, q),
        lq_norm(green, comp, 2, pressure=True),
        lq_norm(green, ball, q, pressure=True),
    ])


COROLLARY_NAMES = ("i:Y12_outside", "ii:Lq_V_ball", "iii:Lq_DV_ball",
                   "iv:L2_Pi_outside", "v:Lq_Pi_ball")


def corollary_targets(d, q):
    return np.array([1 - d / 2, 2 - d + d / q, 1 - d + d / q, 1 - d / 2, 1 - d + d / q])


def check_corollary_bounds(green, radii, q=1.0, band=0.3):
    """Five power-law slopes of Green function norms in ``R``.

    Norms over ``B_R(y)`` and its complement of ``V``, ``DV`` and ``Pi``,
    against the exponents ``1 - d/2``, ``2 - d + d/q``, ``1 - d + d/q``,
    ``1 - d/2``, ``1 - d + d/q``.
    """
    dom = green.layout.dom
    d = dom.d
    if not (1 <= q < d / (d - 1)):
        raise ValueError(f"q must lie in [1, {d / (d - 1)})")
    radii = np.asarray(radii, dtype=float)
    if radii.max() > dom.L / 4 + 1e-12 or radii.min() < 2 * dom.h - 1e-12:
        raise ValueError("corollary radii must lie in [2h, L/4]")
    vals = np.array([corollary_quantities(green, R, q) for R in radii])
    targets = corollary_targets(d, q)
    rep = EstimateReport("corollary_bounds", context={"n": dom.n, "q": q, "eps": green.eps},
                         data={"radii": radii.tolist(), "values": vals.tolist()})
    for k, name in enumerate(COROLLARY_NAMES):
        fit = fit_power_law(radii, vals[:, k])
        rep.add(name, fit.slope, targets[k], targets[k] - band, targets[k] + band)
    return rep


def eps_scaling_value(green):
    dom = green.layout.dom
    everywhere = region_nodes(dom, Complement(Ball(tuple(green.y), 0.0)), check_fit=False)
    return (gradient_norm(green, everywhere, 2)
            + lq_norm(green, everywhere, 2, pressure=True))


def check_eps_scaling(greens, band=0.15):
    """Slope of ``||DV_eps||_2 + ||Pi_eps||_2`` against ``eps`` (target ``1 - d/2``)."""
    d = greens[0].layout.d
    eps = np.array([g.eps for g in greens])
    vals = np.array([eps_scaling_value(g) for g in greens])
    fit = fit_power_law(eps, vals, min_samples=3)
    t = 1 - d / 2
    rep = EstimateReport("eps_scaling", data={"eps": eps.tolist(), "values": vals.tolist()})
    rep.add("slope", fit.slope, t, t - band, t + band)
    return rep


def wall_trace(green):
    """Largest ``|V|`` over physical-boundary nodes (exactly 0 for no-slip)."""
    dom = green.layout.dom
    nodes = dom.node_points()[(dom.node_class == PHYSICAL).ravel()]
    if len(nodes) == 0:
        return 0.0
    return float(max(np.abs(c.evaluate(nodes)).max() for c in green.columns))


def _values_at(green, pts):
    return np.stack([c.evaluate(pts) for c in green.columns], axis=-1)


def default_wall_distances(dom, rho=None, count=6):
    """Wall distances ``geomspace(h, max(rho / 4, 2h))`` for near-wall fits."""
    rho = dom.L / 4 if rho is None else rho
    return np.geomspace(dom.h, max(rho / 4, 2 * dom.h), count)


def check_boundary_decay(greens, alpha2, rho=None, dx=None, band=0.2, pair_band=0.2):
    """Wall behaviour of half-space Green functions.

    For each pole the points ``x`` with ``|x - y| = rho`` and wall distance
    ``d_x`` from ``dx`` give the slope of ``|V(x, y)|`` in ``d_x``, compared
    with ``alpha2``. With four or more poles, the values at
    ``x = y + d_y e_2`` (so ``d_x = d_y = |x - y|``) give a slope against
    ``|x - y|`` compared with ``2 - d``. The largest ``|V|`` on wall nodes is
    reported as well and must vanish.
    """
    dom = greens[0].layout.dom
    d = dom.d
    h = dom.h
    rho = dom.L / 4 if rho is None else rho
    dx = default_wall_distances(dom, rho) if dx is None else np.asarray(dx, dtype=float)
    rep = EstimateReport("boundary_decay", context={"n": dom.n, "alpha2": alpha2, "rho": rho})
    for m, g in enumerate(greens):
        y = g.y
        pts = np.tile(y, (len(dx), 1))
        pts[:, 0] = dx
        pts[:, 1] = y[1] + np.sqrt(rho ** 2 - (dx - y[0]) ** 2)
        vals = np.sqrt(np.sum(_values_at(g, pts) ** 2, axis=(1, 2)))
        fit = fit_power_law(dx, vals)
        rep.add(f"dx_slope[pole{m}]", fit.slope, alpha2, alpha2 - band, alpha2 + band)
        rep.data[f"pole{m}"] = {"y": y.tolist(), "values": vals.tolist()}
    if len(greens) >= 4:
        dy = np.array([g.y[0] for g in greens])
        vals = []
        for g in greens:
            x = g.y.copy()
            x[1] += g.y[0]
            vals.append(float(np.sqrt(np.sum(_values_at(g, x[None]) ** 2))))
        fit = fit_power_law(dy, np.array(vals), min_octaves=1.0)
        t = 2.0 - d
        rep.add("pair_slope", fit.slope, t, t - pair_band, t + pair_band)
    wt = max(wall_trace(g) for g in greens)
    rep.add("wall_trace", wt, 0.0, 0.0, 0.0)
    rep.data["dx"] = dx.tolist()
    return rep


# ------------------------------------------------------------ global checks


def check_symmetry(greens, adjoint_greens, tol, factor=10.0):
    """Compare ``avg_{B(y_b)} V(., y_a)`` with the transpose of the adjoint one.

    ``greens[a]`` and ``adjoint_greens[a]`` share the pole ``y_a``. The
    measured value is the largest entrywise discrepancy over ordered pole
    pairs, relative to the largest compared entry; it must stay below
    ``factor * tol``.
    """
    if len(greens) < 2:
        raise ValueError("symmetry needs at least two poles")
    worst, scale = 0.0, 0.0
    for a, ga in enumerate(greens):
        for b, gb in enumerate(adjoint_greens):
            if a == b:
                continue
            M = ga.averaged(gb.y, gb.eps)
            Mt = gb.averaged(ga.y, ga.eps).T
            worst = max(worst, float(np.abs(M - Mt).max()))
            scale = max(scale, float(np.abs(M).max()))
    rel = worst / scale
    rep = EstimateReport("symmetry", data={"abs": worst, "scale": scale})
    rep.add("max_rel_discrepancy", rel, 0.0, 0.0, factor * tol)
    return rep


def random_data(dom, seed, kmax=3, with_g=True):
    """Seeded smooth data ``(f, f_alpha, g)`` for representation tests.

    ``g`` has zero mean over the fluid cells so that it is compatible with
    the no-slip boundary.
    """
    d = dom.d
    lo, hi = dom.core_bounds()
    fw = band_limited_field(d, seed=seed, kmax=kmax, period=dom.L, components=d)
    aw = band_limited_field(d, seed=seed + 1, kmax=kmax, period=dom.L, components=d * d)
    gw = band_limited_field(d, seed=seed + 2, kmax=kmax, period=dom.L)

    def core(x):
        return np.all((x >= lo) & (x <= hi), axis=1).astype(float)

    def f(x):
        return fw(x) * core(x)[:, None]

    def f_alpha(x):
        return (aw(x) * core(x)[:, None]).reshape(len(x), d, d)

    g = None
    if with_g:
        pts = dom.cell_points(dom.fluid)
        vol = dom.cell_volumes()[dom.fluid]
        gv = gw(pts) * core(pts)
        gv = gv - (vol @ gv) / vol.sum()
        g = np.zeros(dom.shape)
        g[dom.fluid] = gv
    return f, f_alpha, g


def check_representation(sys, adjoint_greens, trials=10, seed=0, tol=1e-8, band=1e-6):
    """Ball averages of direct solutions against the Green representation.

    For ``trials`` random data sets the solution of ``sys`` is averaged over
    ``B_eps(y)`` at each pole and compared with
    ``<V*, F> - <Pi*, vol g>`` built from the adjoint Green functions. The
    measured value is the largest error relative to the largest average.
    """
    from .green import averaged_value, representation_reconstruct

    errs = []
    for t in range(trials):
        f, fa, g = random_data(sys.dom, seed + 101 * t)
        fp, _ = solve_stokes(sys, f=f, f_alpha=fa, g=g, tol=tol)
        rec = representation_reconstruct(adjoint_greens, sys, f, fa, g)
        direct = np.array([np.diag(averaged_value([fp] * sys.dom.d, gr.y, gr.eps))
                           for gr in adjoint_greens])
        errs.append(float(np.abs(rec - direct).max() / np.abs(direct).max()))
    rep = EstimateReport("representation", data={"errors": errs})
    rep.add("max_rel_error", max(errs), 0.0, 0.0, band)
    return rep


def check_oseen(green, band=0.10, viscosity=1.0):
    """Sup-relative deviation of ``V`` from the Oseen tensor on ``[4h, L/4]``."""
    from .green import oseen_error

    err = oseen_error(green, viscosity=viscosity)
    rep = EstimateReport("oseen", context={"n": green.layout.dom.n, "eps": green.eps})
    rep.add("sup_rel_error", err, 0.0, 0.0, band)
    return rep


def check_bogovskii(dom, region, trials=5, seed=0, tol=1e-8, cap=np.inf):
    """Empirical divergence-solvability constant ``C3`` on a region."""
    from .solver import check_divergence_solvability

    c3, ratios = check_divergence_solvability(dom, region, trials=trials, tol=tol, seed=seed)
    rep = EstimateReport("bogovskii", context={"n": dom.n, "region": repr(region.desc)},
                         data={"ratios": ratios})
    rep.add("C3", c3, c3, 0.0, cap)
    return rep


def check_ellipticity_report(coeffs, samples=1000, seed=0, box=(0.0, 1.0)):
    from .coefficients import check_ellipticity

    r = check_ellipticity(coeffs, samples=samples, seed=seed, box=box)
    rep = EstimateReport("ellipticity", data={"bound_max": r.bound_max, "ratio": r.ratio})
    rep.add("lam_min", r.lam_min, coeffs.lam, coeffs.lam - 1e-12, np.inf)
    rep.add("lam_max_inv", r.lam_max_inv, coeffs.lam, coeffs.lam - 1e-12, np.inf)
    return rep


def check_bmo(coeffs, radii, h, sample_centers=16, seed=0, box=(0.0, 1.0)):
    """Mean oscillation modulus of the coefficients at each radius (informational)."""
    from .coefficients import bmo_modulus

    rep = EstimateReport("bmo")
    for R in radii:
        w = bmo_modulus(coeffs, R, sample_centers=sample_centers, h=h, box=box, seed=seed)
        rep.add(f"omega[R={R:.4g}]", w, 0.0, 0.0, np.inf, mandatory=False)
    return rep
