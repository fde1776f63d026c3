"""Coefficient tensors ``A^{ab}_{ij}(x)`` for the operator ``-D_a(A^{ab} D_b u)``.

Evaluators take points of shape ``(m, d)`` and return arrays of shape
``(m, d, d, d, d)`` indexed ``[a, b, i, j]``. Every field also declares a
structural sparsity pattern so that assembly can skip entries that vanish
identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CoefficientField",
    "constant",
    "identity",
    "layered",
    "step_profile",
    "perturbed",
    "diffeo",
    "make_coefficients",
    "check_ellipticity",
    "EllipticityReport",
    "bmo_modulus",
    "as_matrix",
]


class CoefficientError(ValueError):
    pass


def identity_tensor(d):
    eye = np.eye(d)
    return np.einsum("ab,ij->abij", eye, eye)


def as_matrix(A):
    """Reshape ``[..., a, b, i, j]`` into the ``(i,a) x (j,b)`` matrix form."""
    A = np.asarray(A)
    d = A.shape[-1]
    M = np.moveaxis(A, (-4, -3, -2, -1), (-3, -1, -4, -2))
    return M.reshape(A.shape[:-4] + (d * d, d * d))


class CoefficientField:
    """A coefficient tensor field with a declared ellipticity constant.

    Parameters
    ----------
    d : int
    func : callable
        ``func(x) -> (m, d, d, d, d)``; must be deterministic and pure.
    lam : float
        Declared ellipticity constant in (0, 1).
    variant : str
        One of ``constant``, ``layered``, ``perturbed``, ``diffeo`` or
        ``adjoint``.
    pattern : bool array ``(d, d, d, d)``, optional
        Entries that may be nonzero; everything else is identically zero.
    layer_axis : int or None
        Axis the field depends on exclusively (layered families only).
    """

    def __init__(self, d, func, lam, variant, pattern=None, layer_axis=None,
                 params=None, _adjoint_of=None):
        if not 0 < lam < 1 and not np.isclose(lam, 1.0):
            raise CoefficientError(f"declared lambda must lie in (0, 1], got {lam}")
        self.d = d
        self._func = func
        self.lam = float(lam)
        self.variant = variant
        self.pattern = (np.ones((d,) * 4, bool) if pattern is None
                        else np.asarray(pattern, bool))
        self.layer_axis = layer_axis
        self.params = dict(params or {})
        self._adjoint_of = _adjoint_of
        self._adjoint = None

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self._func(x)
        return np.broadcast_to(out, (x.shape[0],) + (self.d,) * 4)

    def __repr__(self):
        return f"CoefficientField({self.variant}, d={self.d}, lam={self.lam})"

    def adjoint(self):
        """Coefficients of the adjoint operator, ``A*[a,b,i,j] = A[b,a,j,i]``."""
        if self._adjoint_of is not None:
            return self._adjoint_of
        if self._adjoint is None:
            func = self._func
            self._adjoint = CoefficientField(
                self.d, lambda x: _transpose_abij(func(x)), self.lam, "adjoint",
                np.transpose(self.pattern, (1, 0, 3, 2)), self.layer_axis,
                {"of": self.variant, **self.params}, _adjoint_of=self)
        return self._adjoint

    def is_symmetric(self, points):
        A = self(points)
        return bool(np.array_equal(A, _transpose_abij(A)))

    def viscosity(self, x):
        """Scalar size of the field, the mean of ``A^{aa}_{ii}``."""
        A = self(x)
        d = self.d
        return np.einsum("maaii->m", A) / (d * d)

    def describe(self):
        return {"variant": self.variant, "lam": self.lam, **{
            k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}}


def _transpose_abij(A):
    A = np.asarray(A)
    nd = A.ndim
    axes = list(range(nd - 4)) + [nd - 3, nd - 4, nd - 1, nd - 2]
    return np.transpose(A, axes)


def constant(tensor, lam):
    """Spatially constant coefficients."""
    tensor = np.asarray(tensor, dtype=float)
    d = tensor.shape[0]
    if tensor.shape != (d,) * 4:
        raise CoefficientError("constant tensor must have shape (d, d, d, d)")
    t = tensor[None]
    return CoefficientField(d, lambda x: np.broadcast_to(t, (x.shape[0],) + t.shape[1:]),
                            lam, "constant", tensor != 0, params={"kind": "constant"})


def identity(d):
    """``A^{ab}_{ij} = delta_ab delta_ij``, i.e. the classical Stokes operator."""
    f = constant(identity_tensor(d), 1.0)
    f.params = {"kind": "identity"}
    return f


@dataclass(frozen=True)
class StepProfile:
    """Piecewise-constant scalar multiple of the identity tensor.

    ``a(t) = values[floor(t / (period / len(values))) mod len(values)]``;
    the profile is merely measurable (jumps every ``period / len(values)``).
    """

    values: tuple = (0.5, 2.0)
    period: float = 0.1

    def scalar(self, t):
        k = len(self.values)
        idx = np.floor(np.asarray(t) / (self.period / k)).astype(int) % k
        return np.asarray(self.values, dtype=float)[idx]


def step_profile(values=(0.5, 2.0), period=0.1):
    return StepProfile(tuple(float(v) for v in values), float(period))


def layered(d, profile, lam, axis=0, anisotropy=None):
    """Coefficients depending on the single coordinate ``x_axis``.

    ``profile`` is a :class:`StepProfile` (or any object with a ``scalar``
    method); the tensor is ``a(x_axis) * I`` unless ``anisotropy`` (a
    length-``d`` vector of per-direction factors ``c_a``, giving
    ``A^{ab}_{ij} = a c_a delta_ab delta_ij``) is supplied.
    """
    c = np.ones(d) if anisotropy is None else np.asarray(anisotropy, dtype=float)
    base = np.einsum("a,ab,ij->abij", c, np.eye(d), np.eye(d))

    def func(x):
        return profile.scalar(x[:, axis])[:, None, None, None, None] * base

    field = CoefficientField(d, func, lam, "layered", base != 0, layer_axis=axis,
                             params={"axis": axis, "values": tuple(profile.values),
                                     "period": profile.period})
    _validate(field, axis)
    return field


def perturbed(base, gamma, scale, lam, floor=None):
    """Layered field plus a transverse oscillation of amplitude ``gamma``.

    ``A(x) = base(x) + gamma * prod_{a != k} sin(2 pi x_a / scale) * I``
    where ``k`` is the layering axis of ``base``. Points where the symmetric
    part drops below ``floor`` (default: the declared ``lam``) have their
    low eigenvalues clipped back up, so the field stays elliptic for any
    ``gamma``.
    """
    if gamma < 0:
        raise CoefficientError("perturbation amplitude must be >= 0")
    d = base.d
    axis = 0 if base.layer_axis is None else base.layer_axis
    floor = lam if floor is None else floor
    eye4 = identity_tensor(d)
    others = [a for a in range(d) if a != axis]

    def func(x):
        mod = np.prod([np.sin(2 * np.pi * x[:, a] / scale) for a in others], axis=0)
        A = base(x) + gamma * mod[:, None, None, None, None] * eye4
        return _clip_elliptic(A, floor)

    pattern = base.pattern | (eye4 != 0)
    return CoefficientField(d, func, lam, "perturbed", pattern, layer_axis=None,
                            params={"axis": axis, "gamma": gamma, "scale": scale,
                                    **{f"base_{k}": v for k, v in base.params.items()}})


def _clip_elliptic(A, floor):
    d = A.shape[-1]
    M = as_matrix(A)
    sym = 0.5 * (M + np.swapaxes(M, -1, -2))
    w = np.linalg.eigvalsh(sym)
    bad = w[:, 0] < floor
    if not bad.any():
        return A
    w_all, v = np.linalg.eigh(sym[bad])
    lift = np.maximum(w_all, floor) - w_all
    M = M.copy()
    M[bad] += np.einsum("mik,mk,mjk->mij", v, lift, v)
    # back to [a, b, i, j]
    out = M.reshape(M.shape[0], d, d, d, d)          # [i, a, j, b]
    return np.transpose(out, (0, 2, 4, 1, 3))


def diffeo(d, amplitude=0.3, lam=0.05, form="direct", wavenumber=1.0):
    """Coefficients induced by the unit-Jacobian shear ``M(x) = x + s(x_1) e_2``.

    ``s(t) = amplitude * sin(2 pi wavenumber t)``. With ``J = dM`` the
    ``direct`` form uses ``A^{ab} = (J^{-1})_{ab} I`` (non-symmetric, so the
    operator differs from its adjoint); ``pullback`` uses the symmetric
    ``J^{-1} J^{-T}``.
    """
    if form not in ("direct", "pullback"):
        raise CoefficientError(f"unknown diffeo form {form!r}")
    k = 2 * np.pi * wavenumber
    eye = np.eye(d)

    def inv_jac(x):
        sp = amplitude * k * np.cos(k * x[:, 0])
        Jinv = np.broadcast_to(eye, (x.shape[0], d, d)).copy()
        Jinv[:, 1, 0] = -sp
        return Jinv

    def func(x):
        B = inv_jac(x)
        if form == "pullback":
            B = B @ np.swapaxes(B, 1, 2)
        return np.einsum("mab,ij->mabij", B, eye)

    pattern = np.zeros((d,) * 4, bool)
    pat2 = eye.astype(bool).copy()
    pat2[1, 0] = True
    if form == "pullback":
        pat2[0, 1] = True
    pattern[:] = np.einsum("ab,ij->abij", pat2, eye.astype(bool)) != 0
    field = CoefficientField(d, func, lam, "diffeo", pattern, layer_axis=0,
                             params={"amplitude": amplitude, "form": form,
                                     "wavenumber": wavenumber})
    field.shear_map = lambda x: _shear(x, amplitude, k)
    _validate(field, 0)
    return field


def _shear(x, amplitude, k):
    y = np.array(x, dtype=float, copy=True)
    y[..., 1] = y[..., 1] + amplitude * np.sin(k * y[..., 0])
    return y


def _validate(field, axis, samples=4096):
    """Reject a field violating its declared lambda on a dense profile scan."""
    d = field.d
    t = np.linspace(-0.5, 1.5, samples)
    x = np.full((samples, d), 0.5)
    x[:, axis] = t
    rep = check_ellipticity(field, points=x, n_directions=0)
    if not rep.passed:
        raise CoefficientError(
            f"{field.variant} coefficients violate lambda={field.lam}: "
            f"min form {rep.lam_min:.4g}, bound {rep.bound_max:.4g}")


def make_coefficients(variant, d=3, **params):
    """Factory keyed by variant name (used by the experiment config)."""
    lam = params.pop("lam", None)
    if variant == "identity":
        return identity(d)
    if variant == "constant":
        return constant(params["tensor"], lam if lam is not None else 1.0)
    if variant == "layered":
        prof = step_profile(params.get("values", (0.5, 2.0)), params.get("period", 0.1))
        return layered(d, prof, lam if lam is not None else 0.25, axis=params.get("axis", 0),
                       anisotropy=params.get("anisotropy"))
    if variant == "perturbed":
        prof = step_profile(params.get("values", (0.5, 2.0)), params.get("period", 0.1))
        lam = lam if lam is not None else 0.25
        base = layered(d, prof, lam, axis=params.get("axis", 0))
        return perturbed(base, params.get("gamma", 0.1), params.get("scale", 0.25), lam,
                         floor=params.get("floor"))
    if variant == "diffeo":
        return diffeo(d, params.get("amplitude", 0.3), lam if lam is not None else 0.05,
                      params.get("form", "direct"), params.get("wavenumber", 1.0))
    raise CoefficientError(f"unknown coefficient variant {variant!r}")


# ----------------------------------------------------------------- checks


@dataclass
class EllipticityReport:
    lam_min: float
    lam_max_inv: float
    bound_max: float
    ratio: float
    passed: bool
    witness: tuple | None
    sampled_min: float
    sampled_bound: float


def check_ellipticity(A, samples=1000, points=None, box=(0.0, 1.0), seed=0,
                      n_directions=None, tol=1e-12):
    """Measure the ellipticity of ``A`` by sampling.

    The smallest eigenvalue of the symmetric part of the ``d^2 x d^2`` matrix
    form gives the coercivity constant at each sampled point, and its largest
    singular value the bound; both are complemented by ``n_directions``
    random unit directions (default ``samples``) as a direct check of the
    quadratic and bilinear forms.

    ``passed`` requires ``lam_min >= lam - tol`` and ``bound_max <= 1/lam + tol``.
    ``ratio`` is ``lam_min / bound_max``, which is invariant under rescaling.
    """
    rng = np.random.default_rng(seed)
    d = A.d
    if points is None:
        lo, hi = box
        points = rng.uniform(lo, hi, size=(samples, d))
    points = np.atleast_2d(points)
    M = as_matrix(A(points))
    sym = 0.5 * (M + np.swapaxes(M, -1, -2))
    w, v = np.linalg.eigh(sym)
    smax = np.linalg.norm(M, ord=2, axis=(-2, -1))
    lam_min = float(w[:, 0].min())
    bound = float(smax.max())

    nd = samples if n_directions is None else n_directions
    sampled_min, sampled_bound = np.inf, 0.0
    if nd:
        pick = rng.integers(0, len(points), size=nd)
        xi = rng.normal(size=(nd, d * d))
        eta = rng.normal(size=(nd, d * d))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        eta /= np.linalg.norm(eta, axis=1, keepdims=True)
        Mi = M[pick]
        sampled_min = float(np.einsum("mi,mij,mj->m", xi, Mi, xi).min())
        sampled_bound = float(np.abs(np.einsum("mi,mij,mj->m", eta, Mi, xi)).max())

    witness = None
    if lam_min < A.lam - tol:
        m = int(np.argmin(w[:, 0]))
        witness = (points[m].copy(), v[m, :, 0].reshape(d, d).copy())
    passed = lam_min >= A.lam - tol and bound <= 1.0 / A.lam + tol and \
        min(lam_min, sampled_min) > 0
    return EllipticityReport(lam_min, 1.0 / bound, bound, lam_min / bound, bool(passed),
                             witness, sampled_min, sampled_bound)


def bmo_modulus(A, R, sample_centers=16, h=None, box=(0.0, 1.0), seed=0, axis=None):
    """Mean oscillation of ``A`` against transverse averages, sup over ``r <= R``.

    For each sampled center ``x`` and radius ``r`` the quantity is the
    midpoint-rule mean over ``B_r(x)`` of the Frobenius norm of
    ``A(y_k, y') - avg_{B'_r(x')} A(y_k, .)`` where ``k`` is ``axis`` (default
    the layering axis, else 0). Radii are taken from the fixed ladder
    ``2^{m/2}`` restricted to ``[2h, R]`` (``R`` itself when the ladder is
    empty), so the result is nondecreasing in ``R`` for a fixed sample set.
    """
    d = A.d
    if axis is None:
        axis = A.layer_axis if A.layer_axis is not None else 0
    if h is None:
        h = R / 8
    rng = np.random.default_rng(seed)
    lo, hi = box
    centers = rng.uniform(lo, hi, size=(sample_centers, d))
    radii = _ladder(2 * h, R)
    best = 0.0
    for x in centers:
        for r in radii:
            best = max(best, _mean_oscillation(A, x, r, h, axis))
    return best


def _ladder(rmin, R):
    m = np.arange(np.floor(2 * np.log2(rmin)) - 1, np.floor(2 * np.log2(R)) + 2)
    r = 2.0 ** (m / 2)
    r = r[(r >= rmin * (1 - 1e-12)) & (r <= R * (1 + 1e-12))]
    return r if len(r) else np.array([R])


def _mean_oscillation(A, x, r, h, axis):
    d = A.d
    k = int(np.ceil(r / h))
    offs = (np.arange(-k, k) + 0.5) * h
    others = [a for a in range(d) if a != axis]
    grids = np.meshgrid(*([offs] * (d - 1)), indexing="ij")
    trans = np.stack([g.ravel() for g in grids], axis=1)
    disk = trans[np.einsum("ij,ij->i", trans, trans) < r * r]
    if len(disk) == 0:
        disk = np.zeros((1, d - 1))
    total, count = 0.0, 0
    for t in offs:
        rr2 = r * r - t * t
        if rr2 <= 0:
            continue
        pts = np.empty((len(disk), d))
        pts[:, axis] = x[axis] + t
        pts[:, others] = x[others] + disk
        vals = A(pts).reshape(len(disk), -1)
        avg = vals.mean(axis=0)
        inside = np.einsum("ij,ij->i", disk, disk) < rr2
        if not inside.any():
            continue
        diff = vals[inside] - avg
        total += np.linalg.norm(diff, axis=1).sum()
        count += int(inside.sum())
    return total / count if count else 0.0
