"""Dawson's integral and friends.

dawson(z) = exp(-z^2) * integral_0^z exp(u^2) du, its supremum, its
derivative, and its antiderivative; the last three calibrate the
Nose-Hoover weight construction.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import dawsn, roots_legendre


def dawson(z):
    """Dawson's integral, accurate to machine precision (vectorized)."""
    return dawsn(z)


def dawson_deriv(z):
    """D'(z) = 1 - 2 z D(z)."""
    z = np.asarray(z, dtype=float)
    out = 1.0 - 2.0 * z * dawsn(z)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=1)
def _dawson_max_pair():
    # golden-section refinement of the single interior maximum
    res = minimize_scalar(lambda t: -dawsn(t), bracket=(0.5, 0.9, 1.5), method="golden",
                          options={"xtol": 1e-14})
    return float(dawsn(res.x)), float(res.x)


def dawson_max() -> float:
    """sup_z D(z), cached."""
    return _dawson_max_pair()[0]


def dawson_argmax() -> float:
    return _dawson_max_pair()[1]


_GL_NODES, _GL_WEIGHTS = roots_legendre(48)


def dawson_antideriv(z):
    """A(z) = integral_0^z D(u) du via composite Gauss-Legendre panels.

    D is odd, so A is even; panels of unit width keep the rule far beyond
    the accuracy the weight construction needs.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty_like(z_arr)
    for i, zi in enumerate(z_arr):
        a = abs(zi)
        if a == 0.0:
            out[i] = 0.0
            continue
        n_panels = max(1, int(np.ceil(a)))
        edges = np.linspace(0.0, a, n_panels + 1)
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            total += half * np.dot(_GL_WEIGHTS, dawsn(mid + half * _GL_NODES))
        out[i] = total
    return float(out[0]) if np.ndim(z) == 0 else out
