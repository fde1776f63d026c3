"""Computational domains and grid regions.

A domain is a tensor-product grid over a core box ``[0, L]^d`` with ``n``
uniform cells per axis. Faces of the core box that stand in for infinity
("artificial" faces) may be pushed outward by a few geometrically graded
padding layers; the physical wall of a half-space box is never padded.

Everything downstream (discretization, norms, regions) works on cells.
Nodes (cell vertices) carry the boundary classification.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WholeSpaceBox",
    "HalfSpaceBox",
    "ExteriorBox",
    "Domain",
    "build_domain",
    "dist_to_boundary",
    "Ball",
    "HalfBall",
    "Annulus",
    "HalfAnnulus",
    "Complement",
    "Region",
    "region_nodes",
    "INTERIOR",
    "PHYSICAL",
    "ARTIFICIAL",
    "EXCLUDED",
]

INTERIOR, PHYSICAL, ARTIFICIAL, EXCLUDED = 0, 1, 2, 3


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class WholeSpaceBox:
    """Truncation of the whole space; every outer face is artificial."""


@dataclass(frozen=True)
class HalfSpaceBox:
    """Truncation of ``{x_1 > 0}``; the face ``x_1 = 0`` is a physical wall."""


@dataclass(frozen=True)
class ExteriorBox:
    """Whole-space box with a ball-shaped hole (staircase approximated)."""

    center: tuple
    radius: float


def _padded_axis(L, n, pad_low, pad_high, ratio):
    h = L / n
    core = np.linspace(0.0, L, n + 1)
    widths = h * ratio ** np.arange(1, max(pad_low, pad_high) + 1)
    low = -np.cumsum(widths[:pad_low])[::-1]
    high = L + np.cumsum(widths[:pad_high])
    return np.concatenate([low, core, high])


@dataclass(frozen=True, eq=False)
class Domain:
    """Truncated computational domain on a tensor-product grid.

    Attributes
    ----------
    d, L, n, h : core box dimension, extent, cells per axis and spacing.
    kind : WholeSpaceBox, HalfSpaceBox or ExteriorBox.
    nodes : per-axis node coordinates (includes padding layers).
    offset : per-axis index of the core box origin in ``nodes``.
    fluid : boolean cell mask (False inside the hole).
    node_class : per-node classification (INTERIOR/PHYSICAL/ARTIFICIAL/EXCLUDED).
    """

    d: int
    L: float
    n: int
    kind: object
    nodes: tuple
    offset: tuple
    fluid: np.ndarray
    node_class: np.ndarray
    pad_layers: int = 0
    pad_ratio: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h(self):
        return self.L / self.n

    @property
    def shape(self):
        return tuple(len(x) - 1 for x in self.nodes)

    @property
    def widths(self):
        return tuple(np.diff(x) for x in self.nodes)

    @property
    def centers(self):
        return tuple(0.5 * (x[1:] + x[:-1]) for x in self.nodes)

    @property
    def n_nodes(self):
        return int(np.prod([len(x) for x in self.nodes]))

    @property
    def n_cells(self):
        return int(self.fluid.sum())

    @property
    def is_uniform(self):
        return self.pad_layers == 0

    def cell_volumes(self):
        """Volumes of all cells in grid shape (zero for excluded cells)."""
        if "vol" not in self._cache:
            vol = np.ones(self.shape)
            for a, w in enumerate(self.widths):
                vol = vol * _along(w, a, self.d)
            self._cache["vol"] = vol * self.fluid
        return self._cache["vol"]

    def cell_points(self, mask=None):
        """Coordinates of cell centers, shape ``(m, d)``, in C order."""
        grids = np.meshgrid(*self.centers, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        if mask is not None:
            pts = pts[np.asarray(mask).ravel()]
        return pts

    def node_points(self):
        grids = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def core_bounds(self):
        return np.zeros(self.d), np.full(self.d, float(self.L))

    def box_bounds(self):
        return (np.array([x[0] for x in self.nodes]),
                np.array([x[-1] for x in self.nodes]))

    def artificial_faces(self):
        """List of ``(axis, side)`` for truncation faces of the core box."""
        faces = [(a, s) for a in range(self.d) for s in (0, 1)]
        if isinstance(self.kind, HalfSpaceBox):
            faces.remove((0, 0))
        return faces

    def window_margin(self):
        return self.L / 4

    def in_window(self, x):
        """True if ``x`` is at distance >= L/4 from every artificial face."""
        x = np.asarray(x, dtype=float)
        m = self.window_margin()
        for a, s in self.artificial_faces():
            dist = x[..., a] if s == 0 else self.L - x[..., a]
            if np.any(dist < m - 1e-12):
                return False
        if isinstance(self.kind, HalfSpaceBox) and np.any(x[..., 0] < 0):
            return False
        return True

    def locate_cell(self, x):
        """Multi-index of the cell containing point ``x``."""
        idx = []
        for a in range(self.d):
            i = np.searchsorted(self.nodes[a], x[a], side="right") - 1
            idx.append(int(np.clip(i, 0, self.shape[a] - 1)))
        return tuple(idx)

    def restrict(self, mask):
        """Same grid, with the fluid cells limited to ``mask``."""
        mask = np.asarray(mask, dtype=bool).reshape(self.shape) & self.fluid
        return Domain(self.d, self.L, self.n, self.kind, self.nodes, self.offset,
                      mask, _classify_nodes(mask, self.nodes, self.kind, self.offset, self.L),
                      self.pad_layers, self.pad_ratio)

    def describe(self):
        return {
            "d": self.d, "L": self.L, "n": self.n, "h": self.h,
            "kind": type(self.kind).__name__,
            "shape": list(self.shape), "cells": self.n_cells, "nodes": self.n_nodes,
            "pad_layers": self.pad_layers, "pad_ratio": self.pad_ratio,
        }


def _along(v, axis, d):
    shape = [1] * d
    shape[axis] = -1
    return np.reshape(v, shape)


def _classify_nodes(fluid, nodes, kind, offset, L):
    d = fluid.ndim
    padded = np.pad(fluid, 1, constant_values=False)
    n_fluid = np.zeros(tuple(s + 1 for s in fluid.shape), dtype=np.int8)
    n_solid_inside = np.zeros_like(n_fluid)
    inside = np.pad(np.ones(fluid.shape, bool), 1, constant_values=False)
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(c, c + s + 1) for c, s in zip(corner, fluid.shape))
        n_fluid += padded[sl]
        n_solid_inside += inside[sl] & ~padded[sl]
    cls = np.full(n_fluid.shape, INTERIOR, dtype=np.int8)
    cls[n_fluid == 0] = EXCLUDED
    # nodes touching both fluid and hole cells sit on the physical staircase wall
    cls[(n_fluid > 0) & (n_solid_inside > 0)] = PHYSICAL
    outer = np.zeros(n_fluid.shape, bool)
    for a in range(d):
        idx = [slice(None)] * d
        idx[a] = 0
        outer[tuple(idx)] = True
        idx[a] = -1
        outer[tuple(idx)] = True
    cls[outer & (n_fluid > 0)] = ARTIFICIAL
    if isinstance(kind, HalfSpaceBox):
        wall = [slice(None)] * d
        wall[0] = offset[0]
        w = cls[tuple(wall)]
        w[w != EXCLUDED] = PHYSICAL
    return cls


def build_domain(d, L, n, kind=None, pad_layers=0, pad_ratio=1.35):
    """Build a truncated domain.

    Parameters
    ----------
    d : int
        Space dimension, at least 3.
    L : float
        Extent of the core box ``[0, L]^d``.
    n : int
        Uniform cells per axis in the core box (``h = L / n``), at least 8.
    kind : WholeSpaceBox, HalfSpaceBox or ExteriorBox
        Defaults to ``WholeSpaceBox()``.
    pad_layers, pad_ratio : int, float
        Optional graded far-field padding beyond each artificial face: layer
        ``k`` has width ``h * pad_ratio**k``.
    """
    kind = WholeSpaceBox() if kind is None else kind
    if int(d) != d or d < 3:
        raise GeometryError(f"dimension must be an integer >= 3, got {d}")
    if n < 8:
        raise GeometryError(f"need n >= 8 cells per axis, got {n}")
    if L <= 0:
        raise GeometryError("L must be positive")
    if pad_layers < 0 or pad_ratio < 1:
        raise GeometryError("pad_layers >= 0 and pad_ratio >= 1 required")
    d, n, L = int(d), int(n), float(L)
    if isinstance(kind, ExteriorBox):
        c = np.asarray(kind.center, dtype=float)
        if c.shape != (d,):
            raise GeometryError("hole center has wrong dimension")
        r = float(kind.radius)
        if not 0 < r < L / 4:
            raise GeometryError(f"hole radius must lie in (0, L/4), got {r}")
        if np.any(c - r <= 0) or np.any(c + r >= L):
            raise GeometryError("hole touches the outer faces")
        kind = ExteriorBox(tuple(float(v) for v in c), r)

    nodes, offset = [], []
    for a in range(d):
        low = 0 if (a == 0 and isinstance(kind, HalfSpaceBox)) else pad_layers
        nodes.append(_padded_axis(L, n, low, pad_layers, pad_ratio))
        offset.append(low)
    nodes = tuple(nodes)
    shape = tuple(len(x) - 1 for x in nodes)

    fluid = np.ones(shape, dtype=bool)
    if isinstance(kind, ExteriorBox):
        # a cell is removed as soon as one of its vertices lies strictly inside the hole
        c = np.asarray(kind.center)
        grids = np.meshgrid(*nodes, indexing="ij")
        r2 = sum((g - c[a]) ** 2 for a, g in enumerate(grids))
        inside = r2 < kind.radius ** 2
        for corner in itertools.product((0, 1), repeat=d):
            sl = tuple(slice(k, k + s) for k, s in zip(corner, shape))
            fluid &= ~inside[sl]

    cls = _classify_nodes(fluid, nodes, kind, tuple(offset), L)
    return Domain(d, L, n, kind, nodes, tuple(offset), fluid, cls,
                  int(pad_layers), float(pad_ratio))


def dist_to_boundary(dom, x):
    """Distance from ``x`` to the physical boundary (artificial faces ignored).

    Returns ``inf`` for a whole-space box.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = dom.box_bounds()
    if x.shape != (dom.d,):
        raise GeometryError("point has wrong dimension")
    if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
        raise GeometryError(f"point {x} lies outside the computational box")
    kind = dom.kind
    if isinstance(kind, WholeSpaceBox):
        return np.inf
    if isinstance(kind, HalfSpaceBox):
        if x[0] < 0:
            raise GeometryError("point lies below the wall")
        return float(x[0])
    r = float(np.linalg.norm(x - np.asarray(kind.center)))
    if r < kind.radius:
        raise GeometryError(f"point {x} lies inside the hole")
    return r - kind.radius


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Ball:
    center: tuple
    r: float

    def contains(self, pts):
        return _dist(pts, self.center) < self.r

    def radius(self):
        return self.r


@dataclass(frozen=True)
class HalfBall:
    """``{y in B_r(x): y_1 > x_1}``."""

    center: tuple
    r: float

    def contains(self, pts):
        c = np.asarray(self.center, dtype=float)
        return (_dist(pts, c) < self.r) & (pts[:, 0] > c[0])

    def radius(self):
        return self.r


@dataclass(frozen=True)
class Annulus:
    """``{r_in <= |y - x| < r_out}``."""

    center: tuple
    r_in: float
    r_out: float

    def contains(self, pts):
        dist = _dist(pts, self.center)
        return (dist >= self.r_in) & (dist < self.r_out)

    def radius(self):
        return self.r_out


@dataclass(frozen=True)
class HalfAnnulus:
    center: tuple
    r_in: float
    r_out: float

    def contains(self, pts):
        c = np.asarray(self.center, dtype=float)
        dist = _dist(pts, c)
        return (dist >= self.r_in) & (dist < self.r_out) & (pts[:, 0] > c[0])

    def radius(self):
        return self.r_out


@dataclass(frozen=True)
class Complement:
    """Everything outside a ball."""

    ball: Ball

    def contains(self, pts):
        return ~self.ball.contains(pts)

    def radius(self):
        return None


def _dist(pts, c):
    return np.linalg.norm(np.asarray(pts) - np.asarray(c, dtype=float), axis=-1)


@dataclass(frozen=True, eq=False)
class Region:
    """Index sets of cells and nodes whose coordinates satisfy a descriptor.

    ``cells`` are flat (C order) indices into the cell grid, restricted to
    fluid cells; ``nodes`` are flat indices of non-excluded nodes.
    """

    desc: object
    cells: np.ndarray
    nodes: np.ndarray
    shape: tuple

    @property
    def cell_mask(self):
        m = np.zeros(int(np.prod(self.shape)), dtype=bool)
        m[self.cells] = True
        return m.reshape(self.shape)

    def __len__(self):
        return len(self.cells)


def region_nodes(dom, desc, check_fit=True):
    """Extract the region described by ``desc`` from the domain grid."""
    r = desc.radius()
    if r is not None and r < 2 * dom.h - 1e-12:
        raise GeometryError(f"region radius {r} below 2h = {2 * dom.h}")
    if check_fit and r is not None:
        c = np.asarray(desc.center, dtype=float)
        lo, hi = dom.box_bounds()
        low_ok = c - r >= lo - 1e-12
        if isinstance(desc, (HalfBall, HalfAnnulus)):
            low_ok[0] = True
        if not (low_ok.all() and np.all(c + r <= hi + 1e-12)):
            raise GeometryError(f"{desc} does not fit inside the domain box")
    pts = dom.cell_points()
    cells = np.flatnonzero(desc.contains(pts) & dom.fluid.ravel())
    npts = dom.node_points()
    nodes = np.flatnonzero(desc.contains(npts) & (dom.node_class.ravel() != EXCLUDED))
    if len(cells) == 0 and len(nodes) == 0:
        raise GeometryError(f"empty region {desc}")
    return Region(desc, cells, nodes, dom.shape)
