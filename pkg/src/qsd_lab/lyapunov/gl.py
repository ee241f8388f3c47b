"""Exponential weights for the generalized Langevin dynamics.

Two constructions:

* regular confinement (single particle, power growth k > 1): exponent
  F0 = h H + a L(x).v + b v.z with L = kappa J, J a gated radial field
  x |x|^(beta-1) chi(|x|); b = 0 when gamma > 0, b = a when gamma = 0.

* singular composite potentials (N >= 2, pair singularities): exponent
  F0 = h H + b R x.v + c R^2 v.z - b J_R v.G(x), where G sums unit
  separation vectors and J_R is 1 (gamma > 0) or the energy weight
  sqrt(R^6 |z|^2 + |v|^2 + 2V + R^2) (gamma = 0).

Both are shifted so F = F0 - inf F0 + 1 >= 1; the shift is a certified
closed-form lower bound, so F >= 1 can hold with slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InfeasibleError, UsageError
from ..potentials import KIND_SINGULAR, eval_potential, grad_potential
from ..processes import FAMILY_GL, ProcessSpec, State, hamiltonian
from .common import FDerivs
from .cutoffs import radial_cutoff

SAFETY = 1.05


# ---------------------------------------------------------------------------
# regular confinement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GLRegularParams:
    """Parameters of the gated-radial-field weight for regular potentials."""

    delta: float
    beta: float
    h_frak: float
    a_frak: float
    b_frak: float
    kappa: float
    c_j: float
    shift: float
    chi_inner: float = 1.0
    chi_outer: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise UsageError("delta must lie in (0, 1]")
        if self.h_frak <= 0 or self.a_frak < 0 or self.b_frak < 0:
            raise UsageError("weight parameters must satisfy h > 0 and a, b >= 0")
        if self.kappa <= 0 or self.c_j <= 0:
            raise UsageError("kappa and the field-derivative bound must be positive")
        if not self.chi_outer > self.chi_inner > 0:
            raise UsageError("radial gate radii must satisfy 0 < inner < outer")

    @property
    def c_l(self) -> float:
        """Bound on |Jac(kappa J)|, kappa c_j <= lambda/2 by construction."""
        return self.kappa * self.c_j


def _radial_profile(params: GLRegularParams, r):
    """g(r) = r^beta chi(r) and g'(r) for the gated radial field."""
    chi = radial_cutoff(params.chi_inner, params.chi_outer)
    r = np.asarray(r, dtype=float)
    c = chi.value(r)
    c1 = chi.d1(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = np.where(r > 0, r**params.beta, 0.0)
        rb1 = np.where(r > 0, params.beta * r ** (params.beta - 1.0), 0.0)
    g = np.where(c > 0, rb * c, 0.0)
    g1 = np.where((c > 0) | (c1 != 0), rb1 * c + rb * c1, 0.0)
    return g, g1


def estimate_c_j(beta: float, chi_inner: float = 1.0, chi_outer: float = 2.0) -> float:
    """sup over radii of the radial-field Jacobian norm, with a 1.05 margin.

    For a radial field g(r) x/|x| the Jacobian norm is max(|g'|, g/r); the
    scan covers the gate transition densely and appends the analytic tail
    values (monotone beyond the gate for beta <= 1).
    """
    p = GLRegularParams(
        delta=1.0, beta=beta, h_frak=1.0, a_frak=0.0, b_frak=0.0, kappa=1.0,
        c_j=1.0, shift=0.0, chi_inner=chi_inner, chi_outer=chi_outer,
    )
    r = np.linspace(chi_inner, max(10.0 * chi_outer, 20.0), 20001)
    g, g1 = _radial_profile(p, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        grid = np.max(np.maximum(np.abs(g1), np.where(r > 0, g / r, 0.0)))
    tail_r = r[-1]
    tail = max(beta * tail_r ** (beta - 1.0), tail_r ** (beta - 1.0))
    return SAFETY * float(max(grid, tail))


def gl_regular_derivs(params: GLRegularParams, proc: ProcessSpec, s: State) -> FDerivs:
    """Exact value/gradients/Laplacians of the shifted exponent."""
    _require_gl(proc)
    h, a, b = params.h_frak, params.a_frak, params.b_frak
    x, v, z = s.x, s.v, s.aux
    dn = float(proc.dim)
    r = float(np.linalg.norm(x))
    g, g1 = _radial_profile(params, r)
    g, g1 = float(g), float(g1)
    grad_v_pot = grad_potential(proc.potential, x)
    if r > 0.0 and (g != 0.0 or g1 != 0.0):
        xhat = x / r
        l_vec = params.kappa * g * xhat
        xv = float(np.dot(xhat, v))
        jac_l_v = params.kappa * (g1 * xv * xhat + (g / r) * (v - xv * xhat))
    else:
        l_vec = np.zeros_like(x)
        jac_l_v = np.zeros_like(x)
    ham = hamiltonian(proc, s)
    f0 = h * ham + a * float(np.dot(l_vec, v)) + b * float(np.dot(v, z))
    return FDerivs(
        value=f0 + params.shift,
        gx=h * grad_v_pot + a * jac_l_v,
        gv=h * v + a * l_vec + b * z,
        gaux=h * z + b * v,
        lap_v=h * dn,
        lap_aux=h * dn,
    )


def gl_regular_shift(
    delta: float,
    beta: float,
    h_frak: float,
    a_frak: float,
    b_frak: float,
    kappa: float,
    c_j: float,
    proc: ProcessSpec,
    chi_inner: float = 1.0,
    chi_outer: float = 2.0,
) -> float:
    """-inf F0 + 1 via the exact velocity/auxiliary reduction.

    For fixed |x| the minimum over (v, z) of h(|v|^2+|z|^2)/2 + a L.v + b v.z
    is -(a kappa g)^2 / (2 (h - b^2/h)) (attained with v antiparallel to the
    field), so the infimum reduces to a radial scan; the tail must be
    increasing, otherwise the exponent is unbounded below.
    """
    if not h_frak > b_frak:
        raise InfeasibleError("shift bound requires h > b")
    probe = GLRegularParams(
        delta=delta, beta=beta, h_frak=h_frak, a_frak=max(a_frak, 1e-300),
        b_frak=b_frak, kappa=kappa, c_j=c_j, shift=0.0,
        chi_inner=chi_inner, chi_outer=chi_outer,
    )
    denom = 2.0 * (h_frak - b_frak**2 / h_frak)
    r = np.geomspace(1e-3, 1e6, 4001)
    r = np.concatenate([[0.0], r])
    dirs = _probe_directions(proc.potential.dim)
    v_min = np.full(r.shape, np.inf)
    for u in dirs:
        v_min = np.minimum(v_min, eval_potential(proc.potential, r[:, None] * u[None, :]))
    g, _ = _radial_profile(probe, r)
    profile = h_frak * v_min - (a_frak * kappa * g) ** 2 / denom
    tail = profile[-40:]
    if not np.all(np.diff(tail) > 0):
        raise InfeasibleError(
            "exponent is unbounded below: the field term outgrows the confinement"
        )
    return -float(profile.min()) + 1.0


def _probe_directions(dim: int):
    rng = np.random.Generator(np.random.Philox(key=20240601))
    dirs = [np.eye(dim)[i] for i in range(min(dim, 2))]
    extra = rng.standard_normal((6, dim))
    dirs += list(extra / np.linalg.norm(extra, axis=1, keepdims=True))
    return dirs


def select_gl_regular(proc: ProcessSpec, delta: float) -> GLRegularParams:
    """Feasible parameters for the regular construction, or a named failure."""
    _require_gl(proc)
    k = proc.potential.growth_k
    if k <= 1:
        raise InfeasibleError("regular construction requires growth exponent k > 1")
    gamma, lam, alpha = proc.gamma, proc.lambda_c, proc.alpha_c
    if gamma > 0:
        beta = 0.9 * min(1.0, k / 2.0, k - 1.0)
    else:
        if not 1.0 < k <= 2.0:
            raise InfeasibleError(
                "gamma=0 requires growth exponent k in (1, 2]; "
                f"the potential declares k={k:g}"
            )
        beta = k - 1.0
    lo = (1.0 - beta) / k
    if not lo < delta <= 1.0:
        raise InfeasibleError(
            f"delta={delta:g} outside the admissible range ({lo:g}, 1] "
            f"for beta={beta:g}, k={k:g}"
        )
    c_j = estimate_c_j(beta)
    kappa = lam / (2.0 * c_j)
    c_l = kappa * c_j  # = lambda/2 by construction
    # h small enough that the quadratic noise corrections stay dominated
    h = min(0.25, 1.0 / (4.0 * delta))
    if gamma > 0:
        # a c_l - gamma h + 2 delta gamma h^2 < 0
        a_cap = gamma * h * (1.0 - 2.0 * delta * h) / c_l
        a = 0.5 * a_cap
        b = 0.0
        if a <= 0:
            raise InfeasibleError("no positive field coefficient fits the friction budget")
    else:
        c_v, m_v = proc.potential.growth_c_v, proc.potential.growth_m_v
        p1 = k / (k - 1.0)
        a = h
        for _ in range(200):
            conds = [
                a * kappa / p1 < c_v * h,
                a * kappa / k + a / 2.0 < h / 2.0,
                -lam * a / 2.0 + 2.0 * delta * alpha * a**2 + alpha * a**1.5 / 2.0 < 0,
                -kappa * c_v * a + lam * kappa * a**1.5 / 2.0 + m_v * a**1.5 / 2.0 < 0,
                -alpha * h
                + 2.0 * delta * alpha * h**2
                + (lam * kappa / 2.0 + m_v / 2.0 + alpha / 2.0) * math.sqrt(a)
                + lam * a
                < 0,
            ]
            if all(conds):
                break
            a *= 0.5
        else:
            raise InfeasibleError("no coupling coefficient satisfies the gamma=0 inequalities")
        b = a
    shift = gl_regular_shift(delta, beta, h, a, b, kappa, c_j, proc)
    return GLRegularParams(
        delta=delta, beta=beta, h_frak=h, a_frak=a, b_frak=b,
        kappa=kappa, c_j=c_j, shift=shift,
    )


# ---------------------------------------------------------------------------
# singular composite potentials
# ---------------------------------------------------------------------------

JR_CONSTANT = "constant1"
JR_ENERGY = "energy_weighted"


@dataclass(frozen=True)
class GLSingularParams:
    """Parameters of the separation-field weight for singular potentials."""

    delta: float
    h_frak: float
    b_frak: float
    c_frak: float
    r_frak: float
    shift: float
    jr_kind: str
    c_g_inf: float
    q_star: float
    c_star: float
    m_inf: float = 0.0
    upper_c: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise UsageError("delta must lie in (0, 1]")
        if self.jr_kind not in (JR_CONSTANT, JR_ENERGY):
            raise UsageError(f"unknown jr_kind {self.jr_kind!r}")
        if self.h_frak <= 0 or self.b_frak < 0 or self.c_frak < 0 or self.r_frak <= 0:
            raise UsageError("weight parameters must satisfy h > 0, b, c >= 0, R > 0")


def separation_field(spec, x: np.ndarray) -> np.ndarray:
    """G(x): per particle, the sum of unit vectors away from the others."""
    xs = x.reshape(spec.n_particles, spec.dim_d)
    g = np.zeros_like(xs)
    for i, j in spec.pair_list():
        diff = xs[i] - xs[j]
        u = diff / np.linalg.norm(diff)
        g[i] += u
        g[j] -= u
    return g.reshape(-1)


def grad_x_v_dot_g(spec, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Gradient in x of v.G(x) (exact, particle-structured)."""
    xs = x.reshape(spec.n_particles, spec.dim_d)
    vs = v.reshape(spec.n_particles, spec.dim_d)
    out = np.zeros_like(xs)
    for i, j in spec.pair_list():
        diff = xs[i] - xs[j]
        r = np.linalg.norm(diff)
        dv = vs[i] - vs[j]
        term = dv / r - (np.dot(dv, diff) / r**3) * diff
        out[i] += term
        out[j] -= term
    return out.reshape(-1)


def sup_g_norm(spec) -> float:
    """Analytic bound sup |G| <= sqrt(N) (N-1)."""
    n = spec.n_particles
    return math.sqrt(n) * (n - 1)


def _jr(params: GLSingularParams, proc: ProcessSpec, s: State):
    """J_R value and derivatives for the energy-weighted kind."""
    r6 = params.r_frak**6
    vpot = eval_potential(proc.potential, s.x)
    j2 = r6 * float(np.dot(s.aux, s.aux)) + float(np.dot(s.v, s.v)) + 2.0 * vpot + params.r_frak**2
    j = math.sqrt(j2)
    grad_v_pot = grad_potential(proc.potential, s.x)
    dn = float(proc.dim)
    gx = grad_v_pot / j
    gv = s.v / j
    gz = r6 * s.aux / j
    lap_v = dn / j - float(np.dot(s.v, s.v)) / j**3
    lap_z = r6 * dn / j - r6**2 * float(np.dot(s.aux, s.aux)) / j**3
    return j, gx, gv, gz, lap_v, lap_z


def gl_singular_derivs(params: GLSingularParams, proc: ProcessSpec, s: State) -> FDerivs:
    _require_gl(proc)
    spec = proc.potential
    h, b, c, big_r = params.h_frak, params.b_frak, params.c_frak, params.r_frak
    x, v, z = s.x, s.v, s.aux
    dn = float(proc.dim)
    g_vec = separation_field(spec, x)
    vg = float(np.dot(v, g_vec))
    grad_v_pot = grad_potential(spec, x)
    grad_vg = grad_x_v_dot_g(spec, x, v)
    ham = hamiltonian(proc, s)
    if params.jr_kind == JR_CONSTANT:
        j = 1.0
        gx = h * grad_v_pot + b * big_r * v - b * j * grad_vg
        gv = h * v + b * big_r * x + c * big_r**2 * z - b * j * g_vec
        gz = h * z + c * big_r**2 * v
        lap_v = h * dn
        lap_z = h * dn
    else:
        j, jx, jv, jz, jlv, jlz = _jr(params, proc, s)
        gx = h * grad_v_pot + b * big_r * v - b * j * grad_vg - b * vg * jx
        gv = h * v + b * big_r * x + c * big_r**2 * z - b * j * g_vec - b * vg * jv
        gz = h * z + c * big_r**2 * v - b * vg * jz
        lap_v = h * dn - 2.0 * b * float(np.dot(jv, g_vec)) - b * vg * jlv
        lap_z = h * dn - b * vg * jlz
    f0 = h * ham + b * big_r * float(np.dot(x, v)) + c * big_r**2 * float(np.dot(v, z)) - b * j * vg
    return FDerivs(
        value=f0 + params.shift, gx=gx, gv=gv, gaux=gz, lap_v=lap_v, lap_aux=lap_z
    )


def _pairs_min_total(spec) -> float:
    return len(spec.pair_list()) * spec.interaction.pair_min()


def _shift_singular_gamma_pos(h, b, c_g, proc) -> float:
    """Certified lower bound of F0 = h H + b x.v - b v.G, turned into a shift."""
    a0 = proc.potential.quadratic_a0
    if h**2 * a0 <= b**2:
        raise InfeasibleError("shift bound requires h^2 a0 > b^2")
    # min over (|x|, |v|) >= -(1/2) c^T M^-1 c for the coupled quadratic
    m = np.array([[h * a0, -b], [-b, h]])
    cvec = np.array([0.0, -b * c_g])
    quad_min = -0.5 * float(cvec @ np.linalg.solve(m, cvec))
    const = h * (_pairs_min_total(proc.potential) + proc.potential.floor)
    return -(quad_min + const) + 1.0


def _shift_singular_gamma_zero(h, b, big_r, c_g, proc) -> float:
    """Certified lower bound for the energy-weighted exponent."""
    a0 = proc.potential.quadratic_a0
    cx = a0 * (h - b * c_g / math.sqrt(2.0)) - b * big_r  # coeff of |x|^2 (x2 = /2 below)
    ca = h - b * c_g * (big_r**3 + 2.0 + math.sqrt(2.0))
    cb = h - b * c_g * big_r**3
    m = np.array(
        [
            [cx, -b * big_r, 0.0],
            [-b * big_r, ca, -b * big_r**2],
            [0.0, -b * big_r**2, cb],
        ]
    )
    if np.linalg.eigvalsh(m).min() <= 0:
        raise InfeasibleError(
            "shift bound matrix is not positive definite; reduce the coupling b"
        )
    cvec = np.array([0.0, -b * c_g * big_r, 0.0])
    quad_min = -0.5 * float(cvec @ np.linalg.solve(m, cvec))
    const = (h - b * c_g / math.sqrt(2.0)) * (
        _pairs_min_total(proc.potential) + proc.potential.floor
    )
    return -(quad_min + const) + 1.0


def _upper_c_singular(params: GLSingularParams, proc: ProcessSpec) -> float:
    """c with F <= c H (so W <= exp(c^delta H^delta)), from term-wise bounds."""
    a0 = proc.potential.quadratic_a0
    h, b, big_r, c_g = params.h_frak, params.b_frak, params.r_frak, params.c_g_inf
    c = h + 2.0 * b * big_r / math.sqrt(a0) + b * big_r**2
    if params.jr_kind == JR_ENERGY:
        c += b * c_g * (big_r**3 + 4.0 + math.sqrt(2.0) * big_r)
    else:
        c += b * c_g * 2.0  # |v| <= sqrt(2H) <= 2H since H >= 1
    return c + max(params.shift, 0.0)


def select_gl_singular(proc: ProcessSpec, delta: float) -> GLSingularParams:
    """Feasible parameters for the singular construction, or a named failure."""
    _require_gl(proc)
    spec = proc.potential
    if spec.kind != KIND_SINGULAR:
        raise InfeasibleError("singular construction requires a singular composite potential")
    gamma, lam, alpha = proc.gamma, proc.lambda_c, proc.alpha_c
    inter = spec.interaction
    c_g = sup_g_norm(spec)
    q_star = inter.beta + 1.0
    c_star = inter.B * inter.beta / 2.0
    a0 = spec.quadratic_a0
    if gamma > 0:
        h = min(0.25, 1.0 / (6.0 * delta * gamma), 1.0 / (2.0 * delta))
        b = min(h, h * a0) * 0.5
        for _ in range(200):
            conds = [
                a0 * b - 2.0 * b**1.5 - 3.0 * delta * gamma * b**2 > 0,
                alpha * h - delta * alpha * h**2 - lam**2 * math.sqrt(b) / 4.0 > 0,
                gamma * h - b - 3.0 * delta * gamma * h**2 - gamma**2 * math.sqrt(b) / 4.0 > 0,
                h > max(b, b / a0),
            ]
            if all(conds):
                break
            b *= 0.5
        else:
            raise InfeasibleError("no coupling satisfies the gamma>0 singular inequalities")
        shift = _shift_singular_gamma_pos(h, b, c_g, proc)
        params = GLSingularParams(
            delta=delta, h_frak=h, b_frak=b, c_frak=0.0, r_frak=1.0,
            shift=shift, jr_kind=JR_CONSTANT, c_g_inf=c_g,
            q_star=q_star, c_star=c_star, m_inf=0.0,
        )
    else:
        a_grad = inter.B * inter.beta + 1.0  # |pair force| <= a_grad/r^q* + const
        big_r = max(2.0 * a_grad / c_star * 1.1, 1.5 / lam, 1.0)
        h = min(0.25, 1.0 / (6.0 * delta))
        m_inf = 1.0 / (2.0 * big_r**3)  # sup |v||z|/J_R^2 via AM-GM
        b = h / 10.0
        for _ in range(200):
            e0 = e1 = 1.0 / math.sqrt(b)
            e2 = e3 = math.sqrt(b)
            cz = (
                -alpha * h
                + 3.0 * delta * alpha * h**2
                + b * big_r**2 * lam
                + alpha * b * big_r**2 * e0 / 2.0
                + lam * b * big_r * e1 / 2.0
                + lam * b * big_r**3 * c_g
                + b * c_g * lam * math.sqrt(a0) / (2.0 * e2)
                + b * c_g * lam / (2.0 * e3)
                + big_r**2 * a0 * math.sqrt(b) / 2.0
                + 3.0 * delta * alpha * b**2 * big_r**12 * c_g**2 * m_inf / 2.0
                + lam * c_g * b / math.sqrt(2.0)
            )
            cv = (
                -b * big_r * (lam * big_r - 1.0)
                + b * big_r**2 * alpha / (2.0 * e0)
                + b * c_g * lam * e3 / 2.0
                + 3.0 * delta * alpha * b**2 * (big_r**4 + c_g**2 * big_r**12 * m_inf / 2.0)
            )
            cx = (
                -a0 * b * big_r
                + b * c_g * lam * e2 * math.sqrt(a0) / 2.0
                + b * big_r * lam / (2.0 * e1)
                + big_r**2 * a0 * b**1.5 / 2.0
            )
            cond_h1 = a0 / 2.0 * (h - b * c_g / math.sqrt(2.0)) - b * big_r / 2.0 > 0
            cond_h12 = (
                h / 2.0 - b * big_r**2 / 2.0 - b * big_r**3 * c_g / 2.0 > 0
                and h / 2.0
                - b * big_r / 2.0
                - b * big_r**2 / 2.0
                - b * c_g / 2.0 * (big_r**3 + math.sqrt(2.0) + 2.0)
                > 0
            )
            if cz < 0 and cv < 0 and cx < 0 and cond_h1 and cond_h12:
                break
            b *= 0.5
        else:
            raise InfeasibleError("no coupling satisfies the gamma=0 singular inequalities")
        shift = _shift_singular_gamma_zero(h, b, big_r, c_g, proc)
        params = GLSingularParams(
            delta=delta, h_frak=h, b_frak=b, c_frak=b, r_frak=big_r,
            shift=shift, jr_kind=JR_ENERGY, c_g_inf=c_g,
            q_star=q_star, c_star=c_star, m_inf=m_inf,
        )
    return replace(params, upper_c=_upper_c_singular(params, proc))


def _require_gl(proc: ProcessSpec):
    if proc.family != FAMILY_GL:
        raise UsageError("this weight family applies to the generalized Langevin process")
