"""Phase-space samplers on energy bands.

States with H in a prescribed band are built by splitting a target energy
into potential / kinetic / auxiliary budgets (Dirichlet fractions) and
inverting the potential profile, so membership is exact by construction.
Three position strategies cover the two ways energy can diverge for
composite potentials: growing |x| and shrinking pair separations.
"""

from __future__ import annotations

import math
from typing import List

import numpy as np
from scipy.optimize import brentq

from ..errors import UsageError
from ..potentials import KIND_SINGULAR, PotentialSpec, eval_potential
from ..processes import FAMILY_GL, FAMILY_NH, ProcessSpec, State

MODES = ("energy", "spatial", "collision")


def potential_floor_value(spec: PotentialSpec) -> float:
    """Certified lower bound of V over the admissible set."""
    if spec.kind == KIND_SINGULAR:
        return spec.floor + len(spec.pair_list()) * spec.interaction.pair_min()
    return spec.floor


def _radial_position(spec: PotentialSpec, target_v: float, rng) -> np.ndarray:
    """A position with V = target_v for single-well (radial) potentials."""
    u = rng.standard_normal(spec.dim)
    u /= np.linalg.norm(u)

    def f(r):
        return float(eval_potential(spec, r * u)) - target_v

    lo, hi = 0.0, 1.0
    if f(lo) > 0:
        return np.zeros(spec.dim)
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise UsageError("cannot invert the potential profile; target too large")
    r = brentq(f, lo, hi, xtol=1e-12, rtol=1e-12)
    return r * u


def _pair_excess(spec: PotentialSpec, s: float) -> float:
    """V_I(s) - min V_I + a0 s^2/4 for the two-particle placement."""
    inter = spec.interaction
    return float(inter.pair_value(s)) - inter.pair_min() + spec.quadratic_a0 * s * s / 4.0


def _composite_position(spec: PotentialSpec, target_v: float, rng, mode: str) -> np.ndarray:
    """Two-particle placement with V(x) = target_v exactly.

    Splits the excess above the floor between the pair separation and the
    centre-of-mass confinement; 'collision' pushes it into the separation,
    'spatial' into |x|.
    """
    if spec.n_particles != 2:
        # fall back: scale a random admissible configuration radially
        return _scaled_configuration(spec, target_v, rng)
    inter = spec.interaction
    a0 = spec.quadratic_a0
    excess = target_v - potential_floor_value(spec)
    if excess < 0:
        raise UsageError("target below the accessible energy range")
    if mode == "collision":
        w = rng.uniform(0.85, 1.0)
    elif mode == "spatial":
        w = rng.uniform(0.0, 0.1)
    else:
        w = rng.uniform(0.05, 0.95)
    pair_budget = w * excess
    # invert the (monotone on the steep branch) pair excess
    s_ref = 1.0
    while _pair_excess(spec, s_ref) > _pair_excess(spec, s_ref * 1.5):
        s_ref *= 1.5
        if s_ref > 1e6:
            break
    if _pair_excess(spec, s_ref) >= pair_budget:
        s = s_ref  # flattest point; fold everything into the confinement
    else:
        lo = s_ref
        while _pair_excess(spec, lo) < pair_budget:
            lo *= 0.5
            if lo < 1e-12:
                raise UsageError("pair separation underflow while inverting the profile")
        s = brentq(lambda t: _pair_excess(spec, t) - pair_budget, lo, s_ref, xtol=1e-14)
    used = _pair_excess(spec, s)
    conf_budget = excess - used
    if conf_budget < 0:
        conf_budget = 0.0
    c_norm = math.sqrt(conf_budget / a0)
    u_pair = rng.standard_normal(spec.dim_d)
    u_pair /= np.linalg.norm(u_pair)
    u_c = rng.standard_normal(spec.dim_d)
    u_c /= np.linalg.norm(u_c)
    c = c_norm * u_c
    x = np.concatenate([c + 0.5 * s * u_pair, c - 0.5 * s * u_pair])
    return x


def _scaled_configuration(spec: PotentialSpec, target_v: float, rng) -> np.ndarray:
    base = rng.standard_normal(spec.dim)
    f = lambda t: float(eval_potential(spec, t * base)) - target_v  # noqa: E731
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e9:
            raise UsageError("cannot scale configuration to the target level")
    t = brentq(f, 0.0, hi, xtol=1e-12)
    return t * base


def sample_states_in_band(
    proc: ProcessSpec,
    e_lo: float,
    e_hi: float,
    n: int,
    rng: np.random.Generator,
    mode: str = "energy",
) -> List[State]:
    """n states with H in [e_lo, e_hi], exact by construction."""
    if mode not in MODES:
        raise UsageError(f"unknown sampling mode {mode!r}")
    if not e_hi > e_lo:
        raise UsageError("energy band must satisfy e_hi > e_lo")
    spec = proc.potential
    vfloor = potential_floor_value(spec)
    if e_lo < vfloor:
        e_lo = max(e_lo, vfloor + 1e-9)
        if e_lo >= e_hi:
            raise UsageError("energy band lies below the accessible range")
    groups = 3 if proc.aux_dim else 2
    states = []
    for _ in range(n):
        target = rng.uniform(e_lo, e_hi)
        frac = rng.dirichlet(np.ones(groups))
        budget = target - vfloor
        p_x = frac[0] * budget
        p_v = frac[1] * budget
        p_aux = frac[2] * budget if groups == 3 else 0.0
        if spec.kind == KIND_SINGULAR:
            x = _composite_position(spec, vfloor + p_x, rng, mode)
        else:
            x = _radial_position(spec, vfloor + p_x, rng)
        # fold the inversion residual into the velocity so H is exact
        v_actual = float(eval_potential(spec, x))
        p_v_adj = target - v_actual - p_aux
        if p_v_adj < 0:
            p_aux = max(0.0, p_aux + p_v_adj)
            p_v_adj = max(0.0, target - v_actual - p_aux)
        u = rng.standard_normal(proc.dim)
        u /= np.linalg.norm(u)
        v = math.sqrt(2.0 * p_v_adj) * u
        if proc.family == FAMILY_GL:
            uz = rng.standard_normal(proc.dim)
            uz /= np.linalg.norm(uz)
            aux = math.sqrt(2.0 * p_aux) * uz
        elif proc.family == FAMILY_NH:
            aux = np.array([rng.choice([-1.0, 1.0]) * math.sqrt(2.0 * p_aux)])
        else:
            aux = np.zeros(0)
        states.append(State(x, v, aux))
    return states
