"""Exponential weight for the Nose-Hoover dynamics.

The exponent is F0 = h* H + Psi0 + Psi1 + Psi2 + eps_phi * Phi, a gated
perturbation of the energy:

* Psi0 damps the deep-negative thermostat region,
* Psi1 and Psi2 (the latter built on Dawson's integral) repair the
  kinetic-energy plateau where the bare energy has no decay,
* Phi adds the force-aligned term h(V) v.grad V / |grad V|^zeta that
  produces decay in the position direction, minus a gated y^2 ballast.

All gates are C^2 splines, so F has exact first derivatives and velocity
Laplacian in closed form; these are assembled term by term below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InfeasibleError, UsageError
from ..potentials import eval_potential, grad_potential, hess_potential
from ..processes import FAMILY_NH, ProcessSpec, State
from .common import FDerivs
from .cutoffs import CutoffFamily, build_cutoffs
from .special import dawson, dawson_antideriv, dawson_deriv, dawson_max

SAFETY = 1.05


@dataclass(frozen=True)
class NHParams:
    """Parameters of the Nose-Hoover weight."""

    delta: float
    zeta: float
    h_star: float
    delta_star: float
    alpha_star: float
    eps_star: float
    k_star: float
    y_star: float
    p_star: float
    u_star: float
    eps_phi: float
    r1_level: float
    hess_ratio_bound: float  # sup over the gate support of |Hess V|/|grad V|^zeta
    c_v_frak: float
    shift: float
    dawson_m: float
    kappa_bound: float = 0.0
    upper_c: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.delta <= 1.0:
            raise UsageError("delta must lie in (1/2, 1] for the Nose-Hoover weight")
        if not 1.0 < self.zeta < 2.0:
            raise UsageError("zeta must lie in (1, 2)")
        if self.h_star <= 0 or self.h_star >= 1.0 / (8.0 * self.dawson_m**2):
            raise UsageError("h_star must lie in (0, 1/(8 D_m^2))")
        for name in ("delta_star", "alpha_star", "eps_star", "k_star", "y_star",
                     "p_star", "u_star", "eps_phi"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        if self.eps_phi >= (self.h_star - self.eps_star) / 2.0:
            raise UsageError("eps_phi must be below (h_star - eps_star)/2")

    def gates(self) -> CutoffFamily:
        return build_cutoffs(k_star=self.k_star, y_star=self.y_star, r1_level=self.r1_level)


def nh_derivs(params: NHParams, proc: ProcessSpec, s: State) -> FDerivs:
    """Exact value, gradient blocks and velocity Laplacian of F."""
    if proc.family != FAMILY_NH:
        raise UsageError("this weight family applies to the Nose-Hoover process")
    p = params
    gates = p.gates()
    x, v = s.x, s.v
    y = float(s.aux[0])
    dn = float(proc.dim)
    gamma = proc.gamma
    vpot = float(eval_potential(proc.potential, x))
    g = grad_potential(proc.potential, x)
    g2 = float(np.dot(g, g))
    v2 = float(np.dot(v, v))

    value = p.h_star * (vpot + 0.5 * v2 + 0.5 * y * y)
    gx = p.h_star * g
    gv = p.h_star * v
    gy = p.h_star * y
    lap_v = p.h_star * dn

    # thermostat damping Psi0 = delta_star f0(y) y^2/2
    f0, f0d = float(gates.f0.value(y)), float(gates.f0.d1(y))
    value += p.delta_star * f0 * 0.5 * y * y
    gy += p.delta_star * (0.5 * f0d * y * y + f0 * y)

    # shared gate arguments
    q = y * y + 1.0
    sq = math.sqrt(q)
    theta = v2 / (p.p_star * sq)
    dtheta_dv = (2.0 / (p.p_star * sq)) * v
    dtheta_dy = -v2 * y / (p.p_star * q**1.5)
    lap_theta = 2.0 * dn / (p.p_star * sq)
    grad_theta_sq = 4.0 * v2 / (p.p_star**2 * q)
    ups = g2 / (p.u_star * q)
    hess_needed = False

    f2t, f2t_d, f2t_dd = (
        float(gates.f2.value(theta)),
        float(gates.f2.d1(theta)),
        float(gates.f2.d2(theta)),
    )

    # Psi1 = alpha* [|g|^2 >= u*/2] g1 sq (v.g)/|g|^2
    f1y, f1y_d = float(gates.f1.value(y)), float(gates.f1.d1(y))
    f3u, f3u_d = float(gates.f3.value(ups)), float(gates.f3.d1(ups))
    chi_grad = g2 >= p.u_star / 2.0
    if chi_grad and f1y != 0.0 and (f3u != 0.0 or f3u_d != 0.0) and (f2t != 0.0 or f2t_d != 0.0):
        hs = hess_potential(proc.potential, x)
        hess_needed = True
        dups_dx = (2.0 / (p.u_star * q)) * (hs @ g)
        dups_dy = -2.0 * y * g2 / (p.u_star * q * q)
        g1 = f1y * f2t * f3u
        vg = float(np.dot(v, g))
        a_val = sq * vg / g2
        da_dv = (sq / g2) * g
        da_dy = (y / sq) * vg / g2
        da_dx = sq * ((hs @ v) / g2 - 2.0 * vg * (hs @ g) / g2**2)
        dg1_dv = f1y * f2t_d * f3u * dtheta_dv
        dg1_dy = f1y_d * f2t * f3u + f1y * f2t_d * dtheta_dy * f3u + f1y * f2t * f3u_d * dups_dy
        dg1_dx = f1y * f2t * f3u_d * dups_dx
        lap_g1_v = f1y * f3u * (f2t_dd * grad_theta_sq + f2t_d * lap_theta)
        value += p.alpha_star * g1 * a_val
        gv += p.alpha_star * (dg1_dv * a_val + g1 * da_dv)
        gy += p.alpha_star * (dg1_dy * a_val + g1 * da_dy)
        gx += p.alpha_star * (dg1_dx * a_val + g1 * da_dx)
        lap_v += p.alpha_star * (
            lap_g1_v * a_val + 2.0 * float(np.dot(dg1_dv, da_dv))
        )

    # Psi2 = [y <= -3 gamma] g2gate sum_i FF(xi_i), FF = -A(.)/(2 D_m^2)
    h1y, h1y_d = float(gates.h1.value(y)), float(gates.h1.d1(y))
    if y <= -3.0 * gamma and h1y != 0.0 or (y <= -3.0 * gamma and h1y_d != 0.0):
        h3u, h3u_d = float(gates.h3.value(ups)), float(gates.h3.d1(ups))
        if (h3u != 0.0 or h3u_d != 0.0) and (f2t != 0.0 or f2t_d != 0.0):
            if not hess_needed:
                hs = hess_potential(proc.potential, x)
                hess_needed = True
            dups_dx = (2.0 / (p.u_star * q)) * (hs @ g)
            dups_dy = -2.0 * y * g2 / (p.u_star * q * q)
            g2gate = h1y * f2t * h3u
            c_g = 1.0 / math.sqrt(2.0 * gamma)
            r = abs(y + gamma)
            drdy = 1.0 if y + gamma > 0 else -1.0
            sr = math.sqrt(r)
            xi = c_g * (sr * v - g / sr)
            two_dm2 = 2.0 * p.dawson_m**2
            ff = -dawson_antideriv(xi) / two_dm2
            ffp = -dawson(xi) / two_dm2
            ffpp = -dawson_deriv(xi) / two_dm2
            s_val = float(np.sum(ff))
            ds_dv = ffp * (c_g * sr)
            dxi_dy = c_g * drdy * (0.5 * v / sr + 0.5 * g / r**1.5)
            ds_dy = float(np.dot(ffp, dxi_dy))
            ds_dx = -(c_g / sr) * (hs @ ffp)
            lap_s_v = float(np.sum(ffpp)) * c_g**2 * r
            dg2_dv = h1y * f2t_d * h3u * dtheta_dv
            dg2_dy = (
                h1y_d * f2t * h3u
                + h1y * f2t_d * dtheta_dy * h3u
                + h1y * f2t * h3u_d * dups_dy
            )
            dg2_dx = h1y * f2t * h3u_d * dups_dx
            lap_g2_v = h1y * h3u * (f2t_dd * grad_theta_sq + f2t_d * lap_theta)
            value += g2gate * s_val
            gv += dg2_dv * s_val + g2gate * ds_dv
            gy += dg2_dy * s_val + g2gate * ds_dy
            gx += dg2_dx * s_val + g2gate * ds_dx
            lap_v += (
                lap_g2_v * s_val
                + 2.0 * float(np.dot(dg2_dv, ds_dv))
                + g2gate * lap_s_v
            )

    # eps_phi * Phi, Phi = h(V) (v.g)/|g|^zeta - h0(y) y^2
    hv, hv_d = float(gates.h.value(vpot)), float(gates.h.d1(vpot))
    if hv != 0.0 or hv_d != 0.0:
        if not hess_needed:
            hs = hess_potential(proc.potential, x)
            hess_needed = True
        gz = g2 ** (p.zeta / 2.0)
        vg = float(np.dot(v, g))
        term = vg / gz
        value += p.eps_phi * hv * term
        gv += p.eps_phi * hv * g / gz
        gx += p.eps_phi * (
            hv_d * term * g
            + hv * ((hs @ v) / gz - p.zeta * vg * (hs @ g) / g2 ** (p.zeta / 2.0 + 1.0))
        )
    h0y, h0y_d = float(gates.h0.value(y)), float(gates.h0.d1(y))
    value += p.eps_phi * (-h0y * y * y)
    gy += p.eps_phi * (-h0y_d * y * y - 2.0 * h0y * y)

    return FDerivs(
        value=value + p.shift,
        gx=gx,
        gv=gv,
        gaux=np.array([gy]),
        lap_v=lap_v,
        lap_aux=0.0,
    )


def nh_psi_value(params: NHParams, proc: ProcessSpec, s: State) -> float:
    """Psi = Psi0 + Psi1 + Psi2 alone (for the |Psi| <= eps* H witness)."""
    p = params
    gates = p.gates()
    x, v = s.x, s.v
    y = float(s.aux[0])
    g = grad_potential(proc.potential, x)
    g2 = float(np.dot(g, g))
    v2 = float(np.dot(v, v))
    q = y * y + 1.0
    sq = math.sqrt(q)
    theta = v2 / (p.p_star * sq)
    ups = g2 / (p.u_star * q)
    psi = p.delta_star * float(gates.f0.value(y)) * 0.5 * y * y
    if g2 >= p.u_star / 2.0:
        g1 = float(gates.f1.value(y)) * float(gates.f2.value(theta)) * float(gates.f3.value(ups))
        if g1 != 0.0:
            psi += p.alpha_star * g1 * sq * float(np.dot(v, g)) / g2
    if y <= -3.0 * proc.gamma:
        g2gate = (
            float(gates.h1.value(y))
            * float(gates.f2.value(theta))
            * float(gates.h3.value(ups))
        )
        if g2gate != 0.0:
            c_g = 1.0 / math.sqrt(2.0 * proc.gamma)
            r = abs(y + proc.gamma)
            xi = c_g * (math.sqrt(r) * v - g / math.sqrt(r))
            psi += g2gate * float(np.sum(-dawson_antideriv(xi) / (2.0 * p.dawson_m**2)))
    return psi


def nh_phi_value(params: NHParams, proc: ProcessSpec, s: State) -> float:
    """Phi alone (for the |Phi| <= |v| + y^2 witness)."""
    p = params
    gates = p.gates()
    y = float(s.aux[0])
    vpot = float(eval_potential(proc.potential, s.x))
    out = -float(gates.h0.value(y)) * y * y
    hv = float(gates.h.value(vpot))
    if hv != 0.0:
        g = grad_potential(proc.potential, s.x)
        g2 = float(np.dot(g, g))
        out += hv * float(np.dot(s.v, g)) / g2 ** (p.zeta / 2.0)
    return out


def nh_grad_v_phi_norm(params: NHParams, proc: ProcessSpec, s: State) -> float:
    gates = params.gates()
    vpot = float(eval_potential(proc.potential, s.x))
    hv = float(gates.h.value(vpot))
    if hv == 0.0:
        return 0.0
    g = grad_potential(proc.potential, s.x)
    g2 = float(np.dot(g, g))
    return hv * g2 ** ((1.0 - params.zeta) / 2.0)


# ---------------------------------------------------------------------------
# parameter selection
# ---------------------------------------------------------------------------


def _radial_scan(proc: ProcessSpec, r_max: float = 1e4, n: int = 8001):
    """(r, V, |grad V|, |Hess V|_2) along probe directions, min-merged."""
    dim = proc.potential.dim
    rng = np.random.Generator(np.random.Philox(key=20240602))
    dirs = [np.eye(dim)[0]]
    if dim > 1:
        extra = rng.standard_normal((3, dim))
        dirs += list(extra / np.linalg.norm(extra, axis=1, keepdims=True))
    r = np.geomspace(1e-3, r_max, n)
    rows = []
    for u in dirs:
        pts = r[:, None] * u[None, :]
        v = eval_potential(proc.potential, pts)
        gn = np.linalg.norm(grad_potential(proc.potential, pts), axis=1)
        rows.append((v, gn))
    return r, rows, dirs


def _find_r1(proc: ProcessSpec) -> float:
    """Level L with |grad V| >= 1 (margin 1.2) whenever V >= L - 1."""
    r, rows, _ = _radial_scan(proc)
    levels = []
    for v, gn in rows:
        idx = np.argmax(gn >= 1.2)
        if gn[idx] < 1.2:
            raise InfeasibleError("|grad V| never reaches 1 along probe directions")
        levels.append(v[idx])
    return float(max(levels)) + 1.0


def _hess_ratio_and_cv(proc: ProcessSpec, r1_level: float, zeta: float):
    """M = sup_{V >= R1 - 1} |Hess V|/|grad V|^zeta and the c_V constant."""
    r, rows, dirs = _radial_scan(proc)
    m_sup = 0.0
    band_sup = 0.0
    for (v, gn), u in zip(rows, dirs):
        mask = v >= r1_level - 1.0
        if not mask.any():
            continue
        idxs = np.flatnonzero(mask)
        sub = idxs[:: max(1, len(idxs) // 400)]
        hn = np.array(
            [np.linalg.norm(hess_potential(proc.potential, r[i] * u), ord=2) for i in sub]
        )
        ratio = hn / gn[sub] ** zeta
        m_sup = max(m_sup, float(ratio.max()))
        band = (v[sub] >= r1_level - 1.0) & (v[sub] <= r1_level)
        if band.any():
            band_sup = max(band_sup, float((gn[sub][band] ** (2.0 - zeta)).max()))
    m_sup *= SAFETY
    band_sup *= SAFETY
    return m_sup, 3.0 * m_sup + 2.0 * band_sup


def suggested_zeta(proc: ProcessSpec) -> float:
    """zeta in (1,2) adapted to the growth class of the potential."""
    spec = proc.potential
    if spec.kind == "singular_composite":
        beta = spec.interaction.beta
        return 1.5 + 0.5 / (beta + 1.0)  # midpoint of (1 + 1/(beta+1), 2)
    return 1.5


def delta_lower_bound_nh(proc: ProcessSpec, zeta: float) -> float:
    """Smallest admissible delta for the chosen zeta and growth class."""
    k = proc.potential.growth_k
    return max(0.5, 1.0 - (k - 1.0) / k * (2.0 - zeta))


def select_nh(proc: ProcessSpec, delta: float, zeta: float | None = None) -> NHParams:
    """Feasible Nose-Hoover weight parameters, or a named failure.

    Follows the smallness chain: fix h* under the Dawson budget, shrink
    delta*, eps*, then eps_phi against the named inequalities, enlarge
    alpha*, k*, p*, u*, y*; gate scales are escalated until the sampled
    bound witnesses hold.
    """
    if proc.family != FAMILY_NH:
        raise InfeasibleError("nh weight requires the Nose-Hoover process")
    if not 0.5 < delta <= 1.0:
        raise InfeasibleError("the Nose-Hoover construction requires delta in (1/2, 1]")
    if zeta is None:
        zeta = suggested_zeta(proc)
    dlo = delta_lower_bound_nh(proc, zeta)
    if delta <= dlo:
        raise InfeasibleError(
            f"delta={delta:g} must exceed {dlo:g} for zeta={zeta:g} and "
            f"growth k={proc.potential.growth_k:g}"
        )
    dm = dawson_max()
    budget = 1.0 / (8.0 * dm**2)
    gamma = proc.gamma
    dn = float(proc.dim)
    h_star = 0.5 * budget
    eps_star = 0.22 * budget
    delta_star = 0.18 * budget
    alpha_star = 1.5 * dn / (4.0 * dm**2)
    k_star = 10.0
    y_star = max(3.0 * gamma + 2.0, 12.0)
    r1_level = _find_r1(proc)
    m_sup, c_v_frak = _hess_ratio_and_cv(proc, r1_level, zeta)
    p_star = 1.35 * 4.0 * max(dn * budget, (h_star + delta_star + eps_star) * dn) / delta_star
    u_scale = 1.0
    for attempt in range(7):
        u_star = u_scale * max(10.0, 8.0 * alpha_star**2 * 2.0 * p_star / eps_star**2)
        kappa_bound = 2.0 * gamma * max(
            h_star, dn / (2.0 * dm * math.sqrt(2.0 * gamma)), (dn + 1.0) * eps_star
        )
        caps = [
            (h_star - eps_star) / 2.0,
            delta_star / 4.0,
            gamma * h_star * (1.0 - h_star) / (2.0 * (c_v_frak + 3.0)),
            h_star * dn / (2.0 * dn + 1.0),
            (dn * budget - (h_star + delta_star + eps_star) * dn) / (1.0 + kappa_bound),
            (delta_star * p_star / 4.0 - (h_star + delta_star + eps_star) * dn)
            / (1.0 + kappa_bound),
        ]
        if min(caps) <= 0:
            raise InfeasibleError(
                "the smallness chain for eps_phi is empty; the budget "
                "h* + delta* + eps* < 1/(8 D_m^2) failed"
            )
        eps_phi = 0.5 * min(caps)
        lower = (h_star - eps_star) - eps_phi**2 / (2.0 * (h_star - eps_star))
        shift = -lower + 1.0
        params = NHParams(
            delta=delta, zeta=zeta, h_star=h_star, delta_star=delta_star,
            alpha_star=alpha_star, eps_star=eps_star, k_star=k_star,
            y_star=y_star, p_star=p_star, u_star=u_star, eps_phi=eps_phi,
            r1_level=r1_level, hess_ratio_bound=m_sup, c_v_frak=c_v_frak,
            shift=shift, dawson_m=dm, kappa_bound=kappa_bound,
        )
        upper_c = h_star + eps_star + 2.0 * eps_phi + shift
        params = replace(params, upper_c=upper_c)
        if _witnesses_hold(params, proc):
            return params
        # widen the deep-thermostat gate and the force gate and retry
        y_star *= 1.5
        u_scale *= 2.0
    raise InfeasibleError("sampled bound witnesses kept failing after gate escalation")


def _witnesses_hold(params: NHParams, proc: ProcessSpec, n: int = 4000) -> bool:
    from .samplers import sample_states_in_band

    rng = np.random.Generator(np.random.Philox(key=20240603))
    states = sample_states_in_band(proc, 1.5, 2e4, n, rng)
    for s in states:
        h = float(eval_potential(proc.potential, s.x) + 0.5 * np.dot(s.v, s.v) + 0.5 * s.aux[0] ** 2)
        psi = nh_psi_value(params, proc, s)
        if abs(psi) > params.eps_star * h + 1e-12:
            return False
        phi = nh_phi_value(params, proc, s)
        if abs(phi) > float(np.linalg.norm(s.v)) + s.aux[0] ** 2 + 1e-9:
            return False
        if nh_grad_v_phi_norm(params, proc, s) > 1.0 + 1e-12:
            return False
        d = nh_derivs(params, proc, s)
        if d.value < 1.0 - 1e-9 or d.value > params.upper_c * h + 1e-9:
            return False
    return True
