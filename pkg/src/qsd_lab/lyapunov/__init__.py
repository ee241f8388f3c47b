"""Exponential Lyapunov weights W = exp(F^delta) and drift verification.

Public surface: family-tagged evaluation (eval_F / eval_W / drift_ratio),
parameter selection per family, shell-based drift-condition verification,
Dawson's integral utilities and the smooth gate family.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..errors import UsageError
from ..processes import ProcessSpec, State
from .common import FDerivs, ratio_from_derivs, w_value
from .cutoffs import CutoffFamily, EvenGate, Ramp, build_cutoffs, radial_cutoff
from .gl import (
    GLRegularParams,
    GLSingularParams,
    estimate_c_j,
    gl_regular_derivs,
    gl_regular_shift,
    gl_singular_derivs,
    grad_x_v_dot_g,
    select_gl_regular,
    select_gl_singular,
    separation_field,
    sup_g_norm,
)
from .nh import (
    NHParams,
    delta_lower_bound_nh,
    nh_derivs,
    nh_grad_v_phi_norm,
    nh_phi_value,
    nh_psi_value,
    select_nh,
    suggested_zeta,
)
from .samplers import potential_floor_value, sample_states_in_band
from .special import dawson, dawson_antideriv, dawson_argmax, dawson_deriv, dawson_max
from .verify import C3Report, ShellRecord, verify_c3_with, _params_record

FAMILY_GL_REGULAR = "gl_regular"
FAMILY_GL_SINGULAR = "gl_singular"
FAMILY_NH_WEIGHT = "nh"
WEIGHT_FAMILIES = (FAMILY_GL_REGULAR, FAMILY_GL_SINGULAR, FAMILY_NH_WEIGHT)

_DERIVS = {
    FAMILY_GL_REGULAR: gl_regular_derivs,
    FAMILY_GL_SINGULAR: gl_singular_derivs,
    FAMILY_NH_WEIGHT: nh_derivs,
}

_SELECT = {
    FAMILY_GL_REGULAR: select_gl_regular,
    FAMILY_GL_SINGULAR: select_gl_singular,
    FAMILY_NH_WEIGHT: select_nh,
}

_PARAM_TYPES = {
    FAMILY_GL_REGULAR: GLRegularParams,
    FAMILY_GL_SINGULAR: GLSingularParams,
    FAMILY_NH_WEIGHT: NHParams,
}


def _check_family(family_id: str):
    if family_id not in WEIGHT_FAMILIES:
        raise UsageError(f"unknown weight family {family_id!r}; expected one of {WEIGHT_FAMILIES}")


def f_derivatives(params, family_id: str, proc: ProcessSpec, s: State) -> FDerivs:
    _check_family(family_id)
    return _DERIVS[family_id](params, proc, s)


def eval_F(params, family_id: str, proc: ProcessSpec, s: State) -> float:
    """The shifted exponent F at a state."""
    return f_derivatives(params, family_id, proc, s).value


def eval_W(params, family_id: str, proc: ProcessSpec, s: State) -> float:
    """W = exp(F^delta); +inf sentinel on overflow."""
    return eval_W_flagged(params, family_id, proc, s)[0]


def eval_W_flagged(params, family_id: str, proc: ProcessSpec, s: State):
    f = eval_F(params, family_id, proc, s)
    return w_value(f, params.delta)


def drift_ratio(params, family_id: str, proc: ProcessSpec, s: State) -> float:
    """Exact (L W)(s) / W(s); +inf when the exponent is not positive."""
    d = f_derivatives(params, family_id, proc, s)
    return ratio_from_derivs(proc, s, d, params.delta)


def select_params(family_id: str, proc: ProcessSpec, delta: float, **kw):
    """Feasible weight parameters for the family, or InfeasibleError."""
    _check_family(family_id)
    return _SELECT[family_id](proc, delta, **kw)


def verify_C3(
    params,
    family_id: str,
    proc: ProcessSpec,
    shells: Sequence[float],
    n_per_shell: int,
    rng_seed: int = 0,
    mode: str = "energy",
) -> C3Report:
    """Sampled per-shell suprema of (L W)/W with the (r_n, b_n) certificate."""
    _check_family(family_id)

    def ratio_fn(p, s):
        return drift_ratio(params, family_id, p, s)

    def f_and_delta(p, s):
        return eval_F(params, family_id, p, s), params.delta

    ratio_fn.f_and_delta = f_and_delta
    return verify_c3_with(
        ratio_fn,
        family_id,
        proc,
        shells,
        n_per_shell,
        rng_seed=rng_seed,
        mode=mode,
        params_record=_params_record(params),
    )


__all__ = [
    "FAMILY_GL_REGULAR",
    "FAMILY_GL_SINGULAR",
    "FAMILY_NH_WEIGHT",
    "WEIGHT_FAMILIES",
    "C3Report",
    "ShellRecord",
    "CutoffFamily",
    "EvenGate",
    "Ramp",
    "GLRegularParams",
    "GLSingularParams",
    "NHParams",
    "FDerivs",
    "build_cutoffs",
    "radial_cutoff",
    "dawson",
    "dawson_antideriv",
    "dawson_argmax",
    "dawson_deriv",
    "dawson_max",
    "delta_lower_bound_nh",
    "drift_ratio",
    "estimate_c_j",
    "eval_F",
    "eval_W",
    "eval_W_flagged",
    "f_derivatives",
    "gl_regular_shift",
    "grad_x_v_dot_g",
    "nh_grad_v_phi_norm",
    "nh_phi_value",
    "nh_psi_value",
    "potential_floor_value",
    "sample_states_in_band",
    "select_params",
    "separation_field",
    "suggested_zeta",
    "sup_g_norm",
    "verify_C3",
]
