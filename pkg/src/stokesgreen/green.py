"""Averaged Green functions ``(V_eps, Pi_eps)`` and their use.

Column ``k`` of the averaged Green function with pole ``y`` solves the
Stokes system with the body force ``e_k`` spread uniformly over the faces
of component ``k`` inside ``B_eps(y)``. Because the load functional is the
discrete ball average, the transposed solve gives the exact discrete
representation formula

    avg_{B_eps(y)} u^k = <V_k, F> - <Pi_k, vol g>

for any solution ``u`` of the system with load ``F`` and divergence ``g``,
where ``V_k`` belongs to the adjoint system.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .discretization import FieldPair, adjoint_system
from .geometry import GeometryError, HalfSpaceBox, dist_to_boundary
from .solver import build_rhs, solve_saddle

__all__ = [
    "GreenFunction",
    "mollified_source",
    "averaged_green",
    "adjoint_green",
    "green_extrapolated",
    "extrapolate_eps",
    "representation_reconstruct",
    "averaged_value",
    "oseen_tensor",
    "oseen_error",
]


@dataclass
class SourceLoad:
    """Discrete ball average over the faces of one component."""

    component: int
    indices: np.ndarray
    weights: np.ndarray
    mass_ratio: float

    def vector(self, n):
        v = np.zeros(n)
        v[self.indices] = self.weights
        return v

    def apply(self, u):
        return float(self.weights @ u[self.indices])


def mollified_source(lay, y, eps, k, check=True):
    """Ball-average functional of component ``k`` over ``B_eps(y)``.

    The weights are the dual volumes of the loaded faces normalized to sum
    to one; ``mass_ratio`` compares the loaded volume with the exact volume
    of the ball, cut by the wall for a pole closer to it than ``eps``. Raises :class:`GeometryError` when ``eps < h``, when the
    ball is empty or, with ``check``, when ``y`` is outside the window or
    ``eps`` exceeds the window margin.
    """
    dom = lay.dom
    y = np.asarray(y, dtype=float)
    if eps < dom.h * (1 - 1e-9):
        raise GeometryError(f"mollifier radius {eps} below the grid spacing {dom.h}")
    if check:
        if eps > dom.window_margin() + 1e-12:
            raise GeometryError(f"mollifier radius {eps} exceeds the window margin "
                                f"{dom.window_margin()}")
        if not dom.in_window(y):
            raise GeometryError(f"pole {tuple(y)} outside the computational window")
        dist_to_boundary(dom, y)
    pts = lay.face_centers(k)
    sel = np.flatnonzero(np.sum((pts - y) ** 2, axis=1) < eps * eps)
    if len(sel) == 0:
        raise GeometryError(f"no unknowns of component {k} inside B_eps({tuple(y)})")
    dv = lay.dual_volumes()[lay.offsets[k] + sel]
    wall = y[0] if isinstance(dom.kind, HalfSpaceBox) else np.inf
    ball = _ball_volume(dom.d, eps, wall)
    return SourceLoad(k, lay.offsets[k] + sel, dv / dv.sum(), float(dv.sum() / ball))


def _ball_const(d):
    from math import gamma, pi
    return pi ** (d / 2) / gamma(d / 2 + 1)


def _ball_volume(d, eps, wall=np.inf):
    """Volume of ``B_eps`` cut by a plane at distance ``wall`` from its center."""
    if wall >= eps:
        return _ball_const(d) * eps ** d
    val, _ = quad(lambda t: (eps * eps - t * t) ** ((d - 1) / 2), -wall, eps)
    return _ball_const(d - 1) * val


@dataclass
class GreenFunction:
    """Columns of an averaged Green function.

    ``columns[k]`` is the :class:`FieldPair` answering a unit force in
    direction ``k`` averaged over ``B_eps(y)``. ``system_hash`` identifies
    the matrix it was computed from and ``reports`` the solver diagnostics.
    """

    y: np.ndarray
    eps: float
    columns: list
    system_hash: str
    tol: float
    reports: list = field(default_factory=list)
    extrapolated: bool = False
    mass_ratio: float = 1.0
    layout: object = None

    @property
    def d(self):
        return len(self.columns)

    def V_cells(self):
        """``V[..., j, k]`` at cell centers (zero outside the fluid)."""
        return np.stack([c.cell_velocity() for c in self.columns], axis=-1)

    def Pi_cells(self):
        """``Pi[..., k]`` at cell centers."""
        return np.stack([c.pressure_grid() for c in self.columns], axis=-1)

    def V_at(self, x):
        """``V(x, y)`` at the cell containing ``x``, a ``(d, d)`` matrix."""
        dom = self.layout.dom
        idx = dom.locate_cell(np.asarray(x, dtype=float))
        return np.stack([c.cell_velocity()[idx] for c in self.columns], axis=-1)

    def averaged(self, x, delta):
        """``avg_{B_delta(x)} V(., y)``, a ``(d, d)`` matrix ``[j, k]``."""
        return averaged_value(self.columns, x, delta)

    def save(self, path):
        """Write the cell values of ``V`` and ``Pi`` with provenance to ``.npz``."""
        dom = self.layout.dom
        np.savez_compressed(
            path, V=self.V_cells(), Pi=self.Pi_cells(), y=self.y, eps=self.eps,
            centers=np.array(dom.centers, dtype=object), fluid=dom.fluid,
            meta=json.dumps({"system_hash": self.system_hash, "tol": self.tol,
                             "extrapolated": self.extrapolated, "domain": dom.describe()}))


def averaged_value(columns, x, delta):
    lay = columns[0].layout
    d = lay.d
    out = np.empty((d, d))
    for j in range(d):
        s = mollified_source(lay, x, delta, j, check=False)
        for k, col in enumerate(columns):
            out[j, k] = s.apply(col.u)
    return out


def _green(sys, y, eps, tol, maxiter=5000):
    lay = sys.layout
    y = np.asarray(y, dtype=float)
    if y.shape != (lay.d,):
        raise ValueError(f"pole must have {lay.d} coordinates")
    cols, reps = [], []
    mass = []
    for k in range(lay.d):
        src = mollified_source(lay, y, eps, k)
        mass.append(src.mass_ratio)
        rhs = np.zeros(lay.size)
        rhs[:lay.n_u] = src.vector(lay.n_u)
        x, rep = solve_saddle(sys, rhs, tol=tol, maxiter=maxiter)
        u, p, _ = sys.split(x)
        cols.append(FieldPair(lay, u, p))
        reps.append(rep)
    return GreenFunction(y, float(eps), cols, sys.fingerprint(), tol, reps,
                         mass_ratio=float(np.mean(mass)), layout=lay)


def averaged_green(sys, y, eps, tol=1e-8, maxiter=5000):
    """The ``d`` columns of ``(V_eps, Pi_eps)(., y)`` for the system ``sys``."""
    return _green(sys, y, eps, tol, maxiter)


def adjoint_green(sys, y, eps, tol=1e-8, maxiter=5000):
    """Averaged Green function of the adjoint operator (transposed system)."""
    return _green(adjoint_system(sys), y, eps, tol, maxiter)


def green_extrapolated(sys, y, schedule, tol=1e-8, maxiter=5000, adjoint=False):
    """Extrapolate ``V_eps`` to ``eps -> 0`` from a decreasing schedule.

    Every unknown is modelled as ``a + b eps^2`` and ``a`` is returned, fit
    by least squares over the schedule. Where the values are not monotone in
    ``eps`` (three or more radii) the smallest-radius value is kept instead.
    """
    schedule = sorted((float(e) for e in schedule), reverse=True)
    if len(schedule) < 2:
        raise ValueError("extrapolation needs at least two radii")
    target = adjoint_system(sys) if adjoint else sys
    gs = [_green(target, y, e, tol, maxiter) for e in schedule]
    cols = []
    for k in range(target.layout.d):
        u0 = extrapolate_eps(schedule, np.stack([g.columns[k].u for g in gs]))
        p0 = extrapolate_eps(schedule, np.stack([g.columns[k].p for g in gs]), monotone=False)
        cols.append(FieldPair(target.layout, u0, p0))
    return GreenFunction(np.asarray(y, float), 0.0, cols, target.fingerprint(), tol,
                         sum((g.reports for g in gs), []), extrapolated=True,
                         mass_ratio=gs[-1].mass_ratio, layout=target.layout)


def extrapolate_eps(schedule, values, monotone=True):
    """Least-squares ``a`` in ``values ~ a + b eps^2`` along the first axis.

    ``values[m]`` belongs to radius ``schedule[m]`` (decreasing). With
    ``monotone`` and three or more radii, entries that are not monotone in
    ``eps`` keep the smallest-radius value instead.
    """
    schedule = np.asarray(schedule, dtype=float)
    values = np.asarray(values, dtype=float)
    e2 = schedule ** 2
    P = np.linalg.pinv(np.stack([np.ones_like(e2), e2], axis=1))[0]
    out = np.tensordot(P, values, axes=1)
    if monotone and len(schedule) >= 3:
        dv = np.diff(values, axis=0)
        mono = np.all(dv >= 0, axis=0) | np.all(dv <= 0, axis=0)
        out = np.where(mono, out, values[-1])
    return out


def representation_reconstruct(greens, sys, f=None, f_alpha=None, g=None,
                               include_pressure=True):
    """Averages of ``u`` at the poles from Green functions of the adjoint.

    ``greens`` are adjoint Green functions (see :func:`adjoint_green`) of
    ``sys``; the result, shape ``(len(greens), d)``, equals the ball average
    of the solution of ``sys`` with data ``(f, f_alpha, g)`` up to the solver
    tolerance. ``include_pressure=False`` drops the ``Pi`` term.
    """
    lay = sys.layout
    rhs = build_rhs(sys, f, f_alpha, g)
    F, rp = rhs[:lay.n_u], rhs[lay.n_u:lay.n_u + lay.n_p]
    out = np.empty((len(greens), lay.d))
    for m, gr in enumerate(greens):
        for k, col in enumerate(gr.columns):
            out[m, k] = col.u @ F + (col.p @ rp if include_pressure else 0.0)
    return out


# ----------------------------------------------------------- Oseen oracle


def oseen_tensor(r, viscosity=1.0):
    """Fundamental solution of ``-nu Lap u + grad p = delta e_k`` in 3D, ``(m, 3, 3)``."""
    r = np.atleast_2d(r)
    rn = np.linalg.norm(r, axis=1)
    eye = np.eye(3)
    return (eye[None] / rn[:, None, None] + r[:, :, None] * r[:, None, :]
            / rn[:, None, None] ** 3) / (8 * np.pi * viscosity)


def oseen_error(green, r_min=None, r_max=None, viscosity=1.0):
    """Sup-relative deviation of ``V`` from the mollified Oseen tensor.

    The reference at each cell center ``x`` is ``sum_f w_f O(x - z_f)`` over
    the loaded faces ``z_f`` of each column; the error is
    ``max |V - O_eps| / max |O_eps|`` (entrywise) over cells with
    ``r_min <= |x - y| <= r_max`` (defaults ``4h`` and ``L/4``).
    """
    lay = green.layout
    dom = lay.dom
    if dom.d != 3:
        raise ValueError("the Oseen reference is implemented for d = 3")
    r_min = 4 * dom.h if r_min is None else r_min
    r_max = dom.L / 4 if r_max is None else r_max
    pts = dom.cell_points(dom.fluid)
    dist = np.linalg.norm(pts - green.y, axis=1)
    sel = (dist >= r_min) & (dist <= r_max)
    if not sel.any():
        raise GeometryError(f"no cells with {r_min:.4g} <= |x - y| <= {r_max:.4g}")
    x = pts[sel]
    V = green.V_cells()[dom.fluid][sel]
    ref = np.zeros_like(V)
    for k in range(3):
        if green.eps > 0:
            src = mollified_source(lay, green.y, green.eps, k, check=False)
            centers = _unknown_centers(lay)[src.indices]
            for z, w in zip(centers, src.weights):
                ref[:, :, k] += w * oseen_tensor(x - z, viscosity)[:, :, k]
        else:
            ref[:, :, k] = oseen_tensor(x - green.y, viscosity)[:, :, k]
    return float(np.abs(V - ref).max() / np.abs(ref).max())


def _unknown_centers(lay):
    if "centers" not in lay._cache:
        lay._cache["centers"] = np.concatenate([lay.face_centers(j) for j in range(lay.d)])
    return lay._cache["centers"]
