"""Seeded random test data shared by the solver and the estimate checks."""

from __future__ import annotations

import numpy as np

__all__ = ["band_limited_field", "random_pairs"]


def band_limited_field(d, seed=0, kmax=3, period=1.0, n_modes=24, components=None):
    """Random smooth field ``x -> sum_m a_m cos(2 pi k_m . x / period + phi_m)``.

    The wave vectors are integer with ``|k|_inf <= kmax``, so the field does
    not depend on the grid it is sampled on. With ``components`` set the
    callable returns ``(m, components)`` arrays.
    """
    rng = np.random.default_rng(seed)
    ncomp = 1 if components is None else components
    k = rng.integers(-kmax, kmax + 1, size=(ncomp, n_modes, d))
    k[np.all(k == 0, axis=2)] = 1
    amp = rng.normal(size=(ncomp, n_modes)) / np.sqrt(n_modes)
    phase = rng.uniform(0, 2 * np.pi, size=(ncomp, n_modes))
    scale = 2 * np.pi / period

    def field(x):
        x = np.atleast_2d(x)
        arg = scale * np.einsum("md,cnd->mcn", x, k) + phase
        out = np.einsum("mcn,cn->mc", np.cos(arg), amp)
        return out[:, 0] if components is None else out

    return field


def random_pairs(n, count, seed=0):
    """Index pairs ``i < j``: all of them when few enough, else a seeded sample."""
    total = n * (n - 1) // 2
    if total <= count:
        i, j = np.triu_indices(n, 1)
        return i, j
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=count)
    j = rng.integers(0, n - 1, size=count)
    j = j + (j >= i)
    return np.minimum(i, j), np.maximum(i, j)
