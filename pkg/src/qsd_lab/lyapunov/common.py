"""Shared machinery for the exponential weight families.

Each family produces the first derivatives and noise-block Laplacians of
its core exponent F at a state; the exact generator ratio of
W = exp(F^delta) is then assembled here.  Only first and second
derivatives of F enter:

    L W / W = delta F^(delta-1) (L F)
              + [delta (delta-1) F^(delta-2) + delta^2 F^(2 delta-2)] Gamma,

with Gamma the noise-block carre-du-champ (gamma |grad_v F|^2 plus, for
the auxiliary-noise family, alpha |grad_z F|^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..processes import ProcessSpec, State, diffusion_map, drift

# exp overflow guard for W = exp(F^delta)
EXP_OVERFLOW = 700.0


@dataclass
class FDerivs:
    """Value and exact derivatives of the shifted exponent F at one state."""

    value: float
    gx: np.ndarray
    gv: np.ndarray
    gaux: np.ndarray
    lap_v: float
    lap_aux: float = 0.0


def generator_on_f(proc: ProcessSpec, s: State, d: FDerivs) -> float:
    """(L F)(s) from the drift and the noise-block Laplacians."""
    b = drift(proc, s)
    layout = diffusion_map(proc)
    val = float(np.dot(b.x, d.gx) + np.dot(b.v, d.gv))
    if proc.aux_dim:
        val += float(np.dot(b.aux, d.gaux))
    val += layout.diffusion_v * d.lap_v
    if layout.diffusion_aux:
        val += layout.diffusion_aux * d.lap_aux
    return val


def carre_du_champ(proc: ProcessSpec, d: FDerivs) -> float:
    layout = diffusion_map(proc)
    gam = layout.diffusion_v * float(np.dot(d.gv, d.gv))
    if layout.diffusion_aux:
        gam += layout.diffusion_aux * float(np.dot(d.gaux, d.gaux))
    return gam


def ratio_from_derivs(proc: ProcessSpec, s: State, d: FDerivs, delta: float) -> float:
    """Exact (L W)/W; +inf when the exponent is not positive (broken weight)."""
    f = d.value
    if not np.isfinite(f) or f <= 0.0:
        return float("inf")
    lf = generator_on_f(proc, s, d)
    gam = carre_du_champ(proc, d)
    return (
        delta * f ** (delta - 1.0) * lf
        + (delta * (delta - 1.0) * f ** (delta - 2.0) + delta**2 * f ** (2.0 * delta - 2.0))
        * gam
    )


def w_value(f: float, delta: float):
    """W = exp(F^delta) with the +inf overflow sentinel and a flag."""
    if not np.isfinite(f) or f <= 0.0:
        return float("inf"), True
    e = f**delta
    if e > EXP_OVERFLOW:
        return float("inf"), True
    return float(np.exp(e)), False
