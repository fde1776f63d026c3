"""Iterative solution of the assembled saddle systems.

Symmetric systems are solved with preconditioned MINRES, non-symmetric ones
(and their transposes) with left-preconditioned restarted GMRES. The
preconditioner is block diagonal: one smoothed-aggregation AMG V-cycle per
velocity component, the inverse viscosity-scaled mass matrix for the
pressure and a scalar for the mean-zero multiplier. Either way the returned
solution is checked against the true relative residual ``||b - Kx|| / ||b||``
and the Krylov method is restarted from the current iterate until it meets
``tol``.
"""

from __future__ import annotations

import csv
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import identity
from .discretization import FieldPair, assemble_stokes, layout_of
from .sampling import band_limited_field

__all__ = [
    "SolveReport",
    "SolverError",
    "build_rhs",
    "solve_saddle",
    "solve_stokes",
    "solve_divergence",
    "check_divergence_solvability",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when the iteration cannot reach the requested tolerance."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history or [])


@dataclass
class SolveReport:
    """Diagnostics of one linear solve.

    ``history`` holds the relative residual per iteration (true residual
    for MINRES, the preconditioned one reported by GMRES); ``residual`` is
    always the final true relative residual.
    """

    method: str
    iterations: int
    residual: float
    wall_time: float
    converged: bool
    history: list = field(default_factory=list)
    ratio: float | None = None
    notes: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "relative_residual"])
            for k, r in enumerate(self.history, 1):
                w.writerow([k, f"{r:.6e}"])


# ------------------------------------------------------------ preconditioner


def _seeded_setup(Ajj):
    # pyamg draws spectral-radius start vectors from the global numpy RNG;
    # seeding it here makes the hierarchy (and so every solve) reproducible
    state = np.random.get_state()
    np.random.seed(0)
    try:
        ml = pyamg.smoothed_aggregation_solver(Ajj, symmetry="symmetric", strength="evolution",
                                                max_coarse=500, **_SMOOTHERS)
    finally:
        np.random.set_state(state)
    _to_csr(ml)
    return ml


def _preconditioner(sys):
    if "precond" in sys.cache:
        return sys.cache["precond"]
    lay = sys.layout
    A = sys.A
    Asym = 0.5 * (A + A.T) if not _is_sym(A) else A
    blocks = []
    for j in range(lay.d):
        lo, hi = lay.offsets[j], lay.offsets[j + 1]
        Ajj = Asym[lo:hi, lo:hi].tocsr()
        ml = _seeded_setup(Ajj)
        blocks.append((lo, hi, ml.aspreconditioner(cycle="V")))
    vol = lay.cell_volumes()
    nu = np.maximum(sys.nu, 1e-300)
    pdiag = nu / vol
    mscale = 1.0 / float(np.sum(nu * vol))
    n_u, n_p = lay.n_u, lay.n_p

    def apply(r):
        r = np.asarray(r).ravel()
        z = np.empty_like(r)
        for lo, hi, P in blocks:
            z[lo:hi] = P(r[lo:hi])
        z[n_u:n_u + n_p] = pdiag * r[n_u:n_u + n_p]
        z[n_u + n_p:] = mscale * r[n_u + n_p:]
        return z

    M = spla.LinearOperator(sys.K.shape, matvec=apply, dtype=float)
    sys.cache["precond"] = M
    return M


# forward sweep before and backward sweep after keeps the V-cycle symmetric
_SMOOTHERS = {"presmoother": ("gauss_seidel", {"sweep": "forward"}),
              "postsmoother": ("gauss_seidel", {"sweep": "backward"})}


def _to_csr(ml):
    """Store coarse operators as CSR; 1x1-block BSR relaxation is much slower."""
    for lvl in ml.levels:
        lvl.A = lvl.A.tocsr()
        if hasattr(lvl, "P"):
            lvl.P = lvl.P.tocsr()
            lvl.R = lvl.R.tocsr()


def _is_sym(A):
    d = A - A.T
    return d.nnz == 0 or abs(d).max() == 0


# ------------------------------------------------------------ core solve


def solve_saddle(sys, rhs, tol=1e-8, maxiter=5000, x0=None, rounds=6):
    """Solve ``K x = rhs`` to a true relative residual ``<= tol``.

    Returns ``(x, SolveReport)``; raises :class:`SolverError` with the
    residual history when the budget ``maxiter`` is exhausted.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    K = sys.K
    rhs = np.asarray(rhs, dtype=float)
    t0 = time.perf_counter()
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return np.zeros_like(rhs), SolveReport("none", 0, 0.0, 0.0, True, [0.0])
    M = _preconditioner(sys)
    symmetric = sys.symmetric
    method = "minres" if symmetric else "gmres"
    history = []
    x = np.zeros_like(rhs) if x0 is None else np.asarray(x0, dtype=float).copy()
    inner = tol
    used = 0
    res = np.linalg.norm(rhs - K @ x) / bnorm
    for _ in range(rounds):
        if res <= tol or used >= maxiter:
            break
        budget = maxiter - used
        r0 = rhs - K @ x
        # solve for the correction so the internal tolerance is relative to r0
        scale = np.linalg.norm(r0)
        target = max(min(inner * bnorm / scale, 0.5), 1e-15)
        count = [0]
        if symmetric:
            def cb(xk, _r0=r0, _s=scale):
                count[0] += 1
                history.append(np.linalg.norm(_r0 - K @ xk) / bnorm)
            dx, _ = spla.minres(K, r0, rtol=target, maxiter=budget, M=M, callback=cb)
        else:
            def cb(pr):
                count[0] += 1
                history.append(float(pr) * scale / bnorm)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                dx, _ = spla.gmres(K, r0, rtol=target, atol=0.0, restart=150,
                                   maxiter=max(1, budget // 150 + 1), M=M, callback=cb,
                                   callback_type="pr_norm")
        used += count[0]
        x = x + dx
        res = np.linalg.norm(rhs - K @ x) / bnorm
        inner = inner * min(0.5, tol / max(res, 1e-300))
    wall = time.perf_counter() - t0
    rep = SolveReport(method, used, float(res), wall, bool(res <= tol), history)
    if res > tol:
        raise SolverError(f"{method} stopped at relative residual {res:.3e} > {tol:.1e} "
                          f"after {used} iterations", history)
    log.debug("%s: %d its, residual %.2e, %.2fs", method, used, res, wall)
    return x, rep


# ------------------------------------------------------------ loads


def _face_values(lay, f):
    """Velocity-shaped vector of a body force given as callable or array."""
    if callable(f):
        parts = [np.asarray(f(lay.face_centers(j)))[:, j] for j in range(lay.d)]
        return np.concatenate(parts)
    f = np.asarray(f, dtype=float)
    if f.shape != (lay.n_u,):
        raise ValueError(f"body force must have shape ({lay.n_u},), got {f.shape}")
    return f


def _cell_values(lay, g):
    if callable(g):
        return np.asarray(g(lay.dom.cell_points(lay.dom.fluid)), dtype=float).ravel()
    g = np.asarray(g, dtype=float)
    if g.shape == lay.dom.shape:
        return g[lay.dom.fluid]
    if g.shape != (lay.n_p,):
        raise ValueError(f"divergence data must have shape ({lay.n_p},) or the cell grid")
    return g


def build_rhs(sys, f=None, f_alpha=None, g=None):
    """Right-hand side ``[F; -vol g; 0]`` for ``L u + grad p = f + D_a f_a``.

    ``f`` is a callable ``x -> (m, d)`` (sampled at face centers) or a
    velocity vector; ``f_alpha`` a callable ``x -> (m, d, d)`` indexed
    ``[i, a]`` (sampled at sub-cell centers); ``g`` a callable ``x -> (m,)``
    or an array of cell values.
    """
    import itertools

    from .discretization import _corner_points

    lay = sys.layout
    d = lay.d
    F = np.zeros(lay.n_u)
    if f is not None:
        F += lay.dual_volumes() * _face_values(lay, f)
    if f_alpha is not None:
        w = lay.cell_volumes() / 2 ** d
        for s in itertools.product((0, 1), repeat=d):
            vals = np.asarray(f_alpha(_corner_points(lay.dom, s)))
            for i in range(d):
                for a in range(d):
                    B = lay.sample_op(i, a, s[i], s[a])
                    F -= B.T @ (w * vals[:, i, a])
    rp = np.zeros(lay.n_p)
    if g is not None:
        rp = -lay.cell_volumes() * _cell_values(lay, g)
    return np.concatenate([F, rp, [0.0]])


# ------------------------------------------------------------ public solves


def solve_stokes(sys, f=None, f_alpha=None, g=None, tol=1e-8, maxiter=5000, x0=None):
    """Solve the Stokes system with data ``(f, f_alpha, g)``.

    Returns ``(FieldPair, SolveReport)``. Divergence data with nonzero mean
    is incompatible with the no-slip boundary; it is accepted but the mean
    is absorbed by the pressure multiplier and a note is recorded. The
    report's ``ratio`` is ``(||Du|| + ||p||) / (||f||_{2d/(d+2)} +
    ||f_alpha|| + ||g||)``.
    """
    lay = sys.layout
    rhs = build_rhs(sys, f, f_alpha, g)
    notes = []
    if g is not None:
        gv = _cell_values(lay, g)
        vol = lay.cell_volumes()
        mean = float(vol @ gv)
        if abs(mean) > 1e-10 * max(float(vol @ np.abs(gv)), 1e-300):
            notes.append(f"divergence data has mean {mean:.3e}; projected by the gauge")
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    x, rep = solve_saddle(sys, rhs, tol=tol, maxiter=maxiter, x0=x0)
    u, p, _ = sys.split(x)
    fp = FieldPair(lay, u, p)
    rep.notes += notes
    rep.ratio = _stability_ratio(sys, fp, f, f_alpha, g)
    return fp, rep


def _stability_ratio(sys, fp, f, f_alpha, g):
    lay = sys.layout
    d = lay.d
    vol = lay.cell_volumes()
    du = np.sqrt(max(fp.u @ (lay.dirichlet_form() @ fp.u), 0.0))
    pn = np.sqrt(vol @ fp.p ** 2)
    data = 0.0
    pts = lay.dom.cell_points(lay.dom.fluid)
    q = 2 * d / (d + 2)
    if f is not None:
        if callable(f):
            fv = np.linalg.norm(np.asarray(f(pts)), axis=1)
            data += (vol @ fv ** q) ** (1 / q)
        else:
            data += (lay.dual_volumes() @ np.abs(f) ** q) ** (1 / q)
    if f_alpha is not None:
        fa = np.asarray(f_alpha(pts)).reshape(len(pts), -1)
        data += np.sqrt(vol @ np.sum(fa ** 2, axis=1))
    if g is not None:
        data += np.sqrt(vol @ _cell_values(lay, g) ** 2)
    return float((du + pn) / data) if data > 0 else None


def _identity_system(dom):
    key = "identity_system"
    if key not in dom._cache:
        dom._cache[key] = assemble_stokes(dom, identity(dom.d), gamma_s=0.0)
    return dom._cache[key]


def solve_divergence(dom, region, g, tol=1e-8, maxiter=5000):
    """Find ``u`` vanishing outside ``region`` with ``div u = g`` in it.

    The solution minimizes ``||Du||`` among all such fields (it solves the
    Stokes system with zero force on the region). ``g`` is a callable or an
    array of cell values over the whole grid; its volume-weighted mean over
    the region must vanish, otherwise a ``ValueError`` reports the mean.

    Returns ``(u, SolveReport)`` with ``u`` a :class:`FieldPair` on the
    layout of ``dom`` (pressure part zero) and ``report.ratio`` equal to
    ``||Du|| / ||g||``.
    """
    mask = region.cell_mask if hasattr(region, "cell_mask") else np.asarray(region, bool)
    sub = dom.restrict(mask)
    if sub.n_cells == 0:
        raise ValueError("divergence region contains no fluid cells")
    sys = _identity_system(sub)
    lay = sys.layout
    if callable(g):
        gv = np.asarray(g(sub.cell_points(sub.fluid)), dtype=float).ravel()
    else:
        garr = np.asarray(g, dtype=float)
        gv = garr[sub.fluid] if garr.shape == dom.shape else garr
        if gv.shape != (lay.n_p,):
            raise ValueError("divergence data does not match the region")
    vol = lay.cell_volumes()
    mean = float(vol @ gv) / float(vol.sum())
    if abs(mean) > 1e-10 * max(float(vol @ np.abs(gv)) / float(vol.sum()), 1e-300):
        raise ValueError(f"divergence data must have zero mean over the region, mean = {mean:.6e}")
    rhs = np.concatenate([np.zeros(lay.n_u), -vol * gv, [0.0]])
    x, rep = solve_saddle(sys, rhs, tol=tol, maxiter=maxiter)
    u_sub = x[:lay.n_u]
    full = layout_of(dom)
    u = _embed(lay, full, u_sub)
    du = np.sqrt(max(u_sub @ (lay.dirichlet_form() @ u_sub), 0.0))
    gn = np.sqrt(vol @ gv ** 2)
    rep.ratio = float(du / gn) if gn > 0 else 0.0
    return FieldPair(full, u, np.zeros(full.n_p)), rep


def _embed(sub, full, u):
    out = np.zeros(full.n_u)
    for j in range(sub.d):
        si = sub.face_index[j]
        fi = full.face_index[j]
        m = si >= 0
        out[fi[m]] = u[si[m]]
    return out


def check_divergence_solvability(dom, region, trials=5, tol=1e-8, seed=0, kmax=3):
    """Estimate the constant ``C3`` with ``||Du|| <= C3 ||g||`` on ``region``.

    Each trial draws a smooth band-limited field (wavenumbers up to
    ``kmax`` per axis relative to the core box), removes its mean over the
    region and solves the divergence problem. Returns ``(C3, ratios)``.
    """
    mask = region.cell_mask if hasattr(region, "cell_mask") else np.asarray(region, bool)
    mask = mask & dom.fluid
    pts = dom.cell_points(mask)
    vol = dom.cell_volumes()[mask]
    ratios = []
    for t in range(trials):
        field_ = band_limited_field(dom.d, seed=seed + 7919 * t, kmax=kmax, period=dom.L)
        gv = field_(pts)
        gv = gv - (vol @ gv) / vol.sum()
        garr = np.zeros(dom.shape)
        garr[mask] = gv
        _, rep = solve_divergence(dom, mask, garr, tol=tol)
        ratios.append(rep.ratio)
    return float(max(ratios)), ratios
