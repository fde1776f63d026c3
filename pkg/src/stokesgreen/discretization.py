"""Staggered (MAC) discretization of the Stokes system with tensor coefficients.

Pressure lives at cell centers, velocity component ``j`` on the faces normal
to axis ``j``. The full gradient ``D_b u^j`` is sampled at the ``2^d``
corners of every cell: the diagonal derivatives are the usual cell-centered
differences and the off-diagonal ones are differences between neighbouring
faces, picked on the side of the corner. The velocity block is the
corresponding quadrature of ``int A^{ab}_{ij} D_b u^j D_a phi^i`` with the
coefficients evaluated at the sub-cell centers, which keeps it coercive for
any elliptic (also non-symmetric) ``A`` and reduces to the standard
``(2d+1)``-point Laplacian for the identity.

Boundary treatment: a face is an unknown when both adjacent cells are fluid.
A face between a fluid cell and a solid cell or the outer wall carries the
value 0 (no-slip). Tangential differences reaching across a wall use the
mirrored ghost value ``-u``.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coefficients import CoefficientField, identity

__all__ = [
    "Layout",
    "SaddleSystem",
    "FieldPair",
    "assemble_stokes",
    "adjoint_system",
    "layout_of",
]

GHOST, WALL, UNKNOWN = 0, 1, 2
_CHUNK = 20000


def _along(v, axis, d):
    shape = [1] * d
    shape[axis] = -1
    return np.reshape(v, shape)


class Layout:
    """Degree-of-freedom bookkeeping for a :class:`~stokesgreen.geometry.Domain`.

    Velocity unknowns are ordered component-major, each component in C order
    over its face grid; pressure unknowns are the fluid cells in C order.
    """

    def __init__(self, dom):
        self.dom = dom
        d, S = dom.d, dom.shape
        self.d = d
        fl = dom.fluid
        self.face_shapes = []
        self.face_class = []
        self.face_index = []
        self.offsets = [0]
        for j in range(d):
            pad = [(0, 0)] * d
            pad[j] = (1, 1)
            fp = np.pad(fl, pad, constant_values=False)
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[j] = slice(0, S[j] + 1)
            hi[j] = slice(1, S[j] + 2)
            n_fl = fp[tuple(lo)].astype(np.int8) + fp[tuple(hi)].astype(np.int8)
            cls = np.where(n_fl == 2, UNKNOWN, np.where(n_fl == 1, WALL, GHOST)).astype(np.int8)
            idx = np.full(cls.shape, -1, dtype=np.int64)
            unk = cls == UNKNOWN
            idx[unk] = self.offsets[-1] + np.arange(int(unk.sum()))
            self.face_shapes.append(cls.shape)
            self.face_class.append(cls)
            self.face_index.append(idx)
            self.offsets.append(self.offsets[-1] + int(unk.sum()))
        self.n_u = self.offsets[-1]
        self.cell_index = np.full(S, -1, dtype=np.int64)
        self.cell_index[fl] = np.arange(int(fl.sum()))
        self.n_p = int(fl.sum())
        self._ops = {}
        self._cache = {}

    @property
    def size(self):
        return self.n_u + self.n_p + 1

    # --------------------------------------------------------- geometry
    def face_centers(self, j):
        """Coordinates of the unknown faces of component ``j``, shape ``(m, d)``."""
        dom = self.dom
        axes = [dom.nodes[a] if a == j else dom.centers[a] for a in range(self.d)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return pts[(self.face_class[j] == UNKNOWN).ravel()]

    def dual_volumes(self):
        """Control volume of each velocity unknown (face area times center spacing)."""
        if "dual" in self._cache:
            return self._cache["dual"]
        dom = self.dom
        d = self.d
        out = np.empty(self.n_u)
        for j in range(d):
            w = dom.widths[j]
            dual = np.concatenate([[w[0]], 0.5 * (w[1:] + w[:-1]), [w[-1]]])
            vol = np.ones(self.face_shapes[j])
            for a in range(d):
                vol = vol * _along(dual if a == j else dom.widths[a], a, d)
            out[self.offsets[j]:self.offsets[j + 1]] = vol[self.face_class[j] == UNKNOWN]
        self._cache["dual"] = out
        return out

    def cell_volumes(self):
        return self.dom.cell_volumes()[self.dom.fluid]

    # ------------------------------------------------------- operators
    def sample_op(self, j, b, sj=0, sb=0):
        """Sparse map from velocity unknowns to corner samples of ``D_b u^j``.

        Rows are fluid cells. For ``b == j`` the sample is the cell-centered
        difference and ``sj, sb`` are ignored. Otherwise it sits on the face
        ``c + sj e_j`` and differences towards ``+e_b`` (``sb = 1``) or
        ``-e_b`` (``sb = 0``).
        """
        key = (j, b) if j == b else (j, b, sj, sb)
        if key not in self._ops:
            self._ops[key] = self._build_sample_op(j, b, sj, sb)
        return self._ops[key]

    def _build_sample_op(self, j, b, sj, sb):
        dom, d = self.dom, self.d
        S = dom.shape
        fl = dom.fluid
        rows_all = self.cell_index
        idx = self.face_index[j]
        if j == b:
            inv_h = 1.0 / _along(dom.widths[j], j, d)
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[j] = slice(0, S[j])
            hi[j] = slice(1, S[j] + 1)
            parts = [(idx[tuple(hi)], np.broadcast_to(inv_h, S)),
                     (idx[tuple(lo)], -np.broadcast_to(inv_h, S))]
        else:
            sl = [slice(None)] * d
            sl[j] = slice(sj, sj + S[j])
            i_f = idx[tuple(sl)]
            step = 1 if sb else -1
            pad = [(0, 0)] * d
            pad[b] = (1, 1)
            idx_p = np.pad(idx, pad, constant_values=-1)
            cls_p = np.pad(self.face_class[j], pad, constant_values=GHOST)
            sl2 = list(sl)
            sl2[b] = slice(1 + step, 1 + step + S[b])
            i_fp = idx_p[tuple(sl2)]
            c_fp = cls_p[tuple(sl2)]
            hb = dom.widths[b]
            hb_nb = np.pad(hb, 1, mode="edge")[1 + step:1 + step + S[b]]
            ghost = c_fp == GHOST
            hb_c = np.broadcast_to(_along(hb, b, d), S)
            hb_n = np.broadcast_to(_along(hb_nb, b, d), S)
            dist = np.where(ghost, hb_c, 0.5 * (hb_c + hb_n))
            # (u_nb - u_f) / dist forward, (u_f - u_nb) / dist backward; ghost u_nb = -u_f
            own = -step * (1.0 + ghost) / dist
            parts = [(i_f, own), (i_fp, step / dist)]
        rows, cols, vals = [], [], []
        for cidx, v in parts:
            keep = fl & (cidx >= 0)
            rows.append(rows_all[keep])
            cols.append(cidx[keep])
            vals.append(v[keep])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_p, self.n_u))

    def divergence_op(self):
        """Pointwise divergence ``sum_j D_j u^j`` at fluid cells."""
        if "div" not in self._cache:
            D = self.sample_op(0, 0)
            for j in range(1, self.d):
                D = D + self.sample_op(j, j)
            self._cache["div"] = D.tocsr()
        return self._cache["div"]

    def dirichlet_form(self):
        """Velocity block for the identity tensor: ``u^T L u = ||Du||^2``."""
        if "lap" not in self._cache:
            self._cache["lap"] = velocity_block(self, identity(self.d))[0]
        return self._cache["lap"]

    def pressure_laplacian(self):
        """Graph Laplacian on fluid cells weighted by face area over center distance."""
        if "plap" in self._cache:
            return self._cache["plap"]
        dom, d = self.dom, self.d
        S = dom.shape
        rows, cols, vals = [], [], []
        for a in range(d):
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[a] = slice(0, S[a] - 1)
            hi[a] = slice(1, S[a])
            both = dom.fluid[tuple(lo)] & dom.fluid[tuple(hi)]
            w = dom.widths[a]
            dist = 0.5 * (w[1:] + w[:-1])
            wt = np.ones([S[b] if b != a else S[a] - 1 for b in range(d)])
            for b in range(d):
                wt = wt * _along(1.0 / dist if b == a else dom.widths[b], b, d)
            i0 = self.cell_index[tuple(lo)][both]
            i1 = self.cell_index[tuple(hi)][both]
            ww = wt[both]
            rows += [i0, i1, i0, i1]
            cols += [i0, i1, i1, i0]
            vals += [ww, ww, -ww, -ww]
        Lp = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(self.n_p, self.n_p))
        self._cache["plap"] = Lp
        return Lp


def layout_of(dom):
    if "layout" not in dom._cache:
        dom._cache["layout"] = Layout(dom)
    return dom._cache["layout"]


def _corner_points(dom, s):
    """Sub-cell centers ``c + (s - 1/2) h / 2`` of all fluid cells."""
    d = dom.d
    axes = [dom.centers[a] + (s[a] - 0.5) * 0.5 * dom.widths[a] for a in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g[dom.fluid] for g in grids], axis=1)


def velocity_block(lay, coeffs):
    """Assemble the velocity block and a per-cell viscosity scale."""
    dom, d = lay.dom, lay.d
    pattern = np.argwhere(coeffs.pattern)          # rows (a, b, i, j)
    vol = lay.cell_volumes() / 2 ** d
    n = lay.n_p

    def axes_of(i, a):
        return () if i == a else tuple(sorted({i, a}))

    groups = {}
    for a, b, i, j in pattern:
        R = tuple(sorted(set(axes_of(i, a)) | set(axes_of(j, b))))
        groups[(a, b, i, j)] = R
    weights = {k: {} for k in groups}
    nu = np.zeros(n)
    for s in itertools.product((0, 1), repeat=d):
        pts = _corner_points(dom, s)
        for lo in range(0, n, _CHUNK):
            hi = min(n, lo + _CHUNK)
            A = coeffs(pts[lo:hi])
            nu[lo:hi] += np.einsum("maaii->m", A) / (d * d * 2 ** d)
            for key, R in groups.items():
                a, b, i, j = key
                g = tuple(s[r] for r in R)
                w = weights[key].setdefault(g, np.zeros(n))
                w[lo:hi] += vol[lo:hi] * A[:, a, b, i, j]
    K = sp.csr_matrix((lay.n_u, lay.n_u))
    for key, R in groups.items():
        a, b, i, j = key
        for g, w in weights[key].items():
            if not np.any(w):
                continue
            sv = dict(zip(R, g))
            Bi = lay.sample_op(i, a, sv.get(i, 0), sv.get(a, 0))
            Bj = lay.sample_op(j, b, sv.get(j, 0), sv.get(b, 0))
            K = K + Bi.T @ (Bj.multiply(w[:, None])).tocsr()
    K.sum_duplicates()
    K.eliminate_zeros()
    return K.tocsr(), nu


@dataclass(eq=False)
class SaddleSystem:
    """Assembled saddle-point system ``K [u; p; mu] = rhs``.

    ``K = [[A, G, 0], [G^T, C, m], [0, m^T, 0]]`` with ``G = -Dw^T`` the
    (volume-weighted) discrete gradient, ``C = gamma_s h^2 Lp`` a symmetric
    negative semidefinite pressure stabilization and ``m`` the cell volumes,
    whose multiplier pins the pressure mean to zero.
    """

    dom: object
    coeffs: CoefficientField
    gamma_s: float
    layout: Layout
    A: sp.csr_matrix
    Dw: sp.csr_matrix
    C: sp.csr_matrix
    K: sp.csr_matrix
    nu: np.ndarray
    adjoint_of: "SaddleSystem | None" = None
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def G(self):
        return -self.Dw.T.tocsr()

    @property
    def n_u(self):
        return self.layout.n_u

    @property
    def n_p(self):
        return self.layout.n_p

    @property
    def symmetric(self):
        if "sym" not in self.cache:
            diff = abs(self.K - self.K.T)
            self.cache["sym"] = bool(diff.nnz == 0 or diff.max() <= 1e-14 * abs(self.K).max())
        return self.cache["sym"]

    def fingerprint(self):
        """Short hash of the assembled matrix, used to tag derived data."""
        if "hash" not in self.cache:
            K = self.K
            hsh = hashlib.sha1()
            for arr in (K.indptr, K.indices, K.data):
                hsh.update(np.ascontiguousarray(arr).tobytes())
            self.cache["hash"] = hsh.hexdigest()[:16]
        return self.cache["hash"]

    def apply_divergence(self, u):
        """Pointwise divergence of a velocity vector, per fluid cell."""
        return self.layout.divergence_op() @ u

    def apply_gradient(self, p):
        """Pointwise gradient of a pressure vector at velocity unknowns."""
        return (self.G @ p) / self.layout.dual_volumes()

    def split(self, x):
        return x[:self.n_u], x[self.n_u:self.n_u + self.n_p], x[self.n_u + self.n_p:]

    def triplets(self):
        """The matrix as ``(rows, cols, vals)`` arrays."""
        K = self.K.tocoo()
        return K.row, K.col, K.data


def assemble_stokes(dom, coeffs, gamma_s=0.0):
    """Assemble the saddle system for ``-D_a(A^{ab} D_b u) + grad p``, ``div u``.

    Parameters
    ----------
    dom : Domain
    coeffs : CoefficientField
        Must have the same dimension as ``dom``.
    gamma_s : float
        Pressure stabilization weight, ``>= 0``. The staggered pair is stable
        without it; nonzero values only add ``gamma_s h^2 Lp`` to the
        pressure block.
    """
    if coeffs.d != dom.d:
        raise ValueError(f"coefficients are {coeffs.d}-dimensional, domain is {dom.d}")
    if gamma_s < 0:
        raise ValueError("gamma_s must be >= 0")
    lay = layout_of(dom)
    A, nu = velocity_block(lay, coeffs)
    vol = lay.cell_volumes()
    Dw = sp.diags(vol) @ lay.divergence_op()
    Dw = Dw.tocsr()
    C = (-gamma_s * dom.h ** 2) * lay.pressure_laplacian()
    K = _saddle(A, Dw, C, vol)
    return SaddleSystem(dom, coeffs, gamma_s, lay, A, Dw, C.tocsr(), K, nu)


def _saddle(A, Dw, C, vol):
    n_p = Dw.shape[0]
    m = sp.csr_matrix(vol.reshape(-1, 1))
    K = sp.bmat([[A, -Dw.T, None],
                 [-Dw, C, m],
                 [None, m.T, sp.csr_matrix((1, 1))]], format="csr")
    assert K.shape[0] == A.shape[0] + n_p + 1
    return K


def adjoint_system(sys):
    """Transpose of ``K``, i.e. the system of the adjoint operator.

    The result carries ``coeffs.adjoint()``; its velocity block coincides
    with an independent assembly from the adjoint coefficients.
    """
    if sys.adjoint_of is not None:
        return sys.adjoint_of
    At = sys.A.T.tocsr()
    adj = SaddleSystem(sys.dom, sys.coeffs.adjoint(), sys.gamma_s, sys.layout, At, sys.Dw,
                       sys.C, sys.K.T.tocsr(), sys.nu, adjoint_of=sys)
    return adj


# --------------------------------------------------------------- fields


@dataclass(eq=False)
class FieldPair:
    """A discrete velocity/pressure pair on a layout.

    ``u`` holds the velocity unknowns and ``p`` the cell pressures (fluid
    cells only); boundary values are implied by the layout.
    """

    layout: Layout
    u: np.ndarray
    p: np.ndarray

    def face_arrays(self):
        """Velocity components on their full face grids (zeros off-unknowns)."""
        lay = self.layout
        out = []
        for j in range(lay.d):
            a = np.zeros(lay.face_shapes[j])
            unk = lay.face_class[j] == UNKNOWN
            a[unk] = self.u[lay.offsets[j]:lay.offsets[j + 1]]
            out.append(a)
        return out

    def cell_velocity(self):
        """Velocity at cell centers (average of opposite faces), ``(*S, d)``."""
        lay = self.layout
        d = lay.d
        faces = self.face_arrays()
        S = lay.dom.shape
        out = np.zeros(S + (d,))
        for j, a in enumerate(faces):
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[j] = slice(0, S[j])
            hi[j] = slice(1, S[j] + 1)
            out[..., j] = 0.5 * (a[tuple(lo)] + a[tuple(hi)])
        out[~lay.dom.fluid] = 0.0
        return out

    def pressure_grid(self):
        lay = self.layout
        out = np.zeros(lay.dom.shape)
        out[lay.dom.fluid] = self.p
        return out

    def gradient_samples(self, cells=None):
        """Corner samples of ``D_b u^j``, shape ``(m, 2^d, d, d)`` ``[.., j, b]``.

        ``cells`` selects rows by fluid-cell index (default all fluid cells).
        """
        return gradient_samples(self.layout, self.u, cells)

    def evaluate(self, points):
        """Velocity at arbitrary points by multilinear interpolation, ``(m, d)``.

        Each component is interpolated on its own staggered grid, extended
        by the box boundary where the no-slip value 0 is imposed; points on
        the physical boundary therefore get exactly 0.
        """
        from scipy.interpolate import RegularGridInterpolator

        lay = self.layout
        dom = lay.dom
        d = lay.d
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((len(pts), d))
        for j, vals in enumerate(self.face_arrays()):
            axes = []
            pad = []
            for a in range(d):
                if a == j:
                    axes.append(dom.nodes[a])
                    pad.append((0, 0))
                else:
                    c = dom.centers[a]
                    axes.append(np.concatenate([[dom.nodes[a][0]], c, [dom.nodes[a][-1]]]))
                    pad.append((1, 1))
            vals = np.pad(vals, pad)
            interp = RegularGridInterpolator(axes, vals, bounds_error=False, fill_value=0.0)
            out[:, j] = interp(pts)
        return out

    def __add__(self, other):
        return FieldPair(self.layout, self.u + other.u, self.p + other.p)

    def __mul__(self, c):
        return FieldPair(self.layout, c * self.u, c * self.p)

    __rmul__ = __mul__


def gradient_samples(lay, u, cells=None):
    d = lay.d
    corners = list(itertools.product((0, 1), repeat=d))
    m = lay.n_p if cells is None else len(cells)
    out = np.empty((m, len(corners), d, d))
    for j in range(d):
        for b in range(d):
            if j == b:
                B = lay.sample_op(j, j)
                v = B @ u if cells is None else B[cells] @ u
                out[:, :, j, b] = v[:, None]
                continue
            for sj in (0, 1):
                for sb in (0, 1):
                    B = lay.sample_op(j, b, sj, sb)
                    v = B @ u if cells is None else B[cells] @ u
                    for k, s in enumerate(corners):
                        if s[j] == sj and s[b] == sb:
                            out[:, k, j, b] = v
    return out
