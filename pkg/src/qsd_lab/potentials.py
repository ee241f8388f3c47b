"""Potential energy functions, their admissible domains and derivatives.

Four families are shipped:

* ``quadratic``          -- a0/2 |x|^2 confinement per particle plus a floor.
* ``poly_confining``     -- floor + c (|x|^2 + eps^2)^(k/2), a smoothed
                            power-growth well with k > 1.
* ``singular_composite`` -- quadratic confinement plus singular pair
                            interactions B/r^beta + tail, for N >= 2
                            particles; infinite at particle collisions.
* ``custom``             -- caller-supplied callables (programmatic use).

Values outside the admissible set are reported with a ``+inf`` sentinel;
the set itself is ``{V < +inf}`` (all of R^(dN) except collisions for the
composite family).  Sample-based validators check the structural
assumptions the Lyapunov constructions rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, UsageError

# Smoothing half-width at the origin of the poly well, keeps the gradient
# Lipschitz at x = 0.
POLY_SMOOTHING_EPS = 1e-8

KIND_QUADRATIC = "quadratic"
KIND_POLY = "poly_confining"
KIND_SINGULAR = "singular_composite"
KIND_CUSTOM = "custom"

PHI_NONE = "none"
PHI_LJ_TAIL = "lj_tail"
PHI_COULOMB = "coulomb_only"
PHI_CUSTOM = "custom_symmetric"


@dataclass(frozen=True)
class PerturbationSpec:
    """Compactly supported smooth bump added to the potential.

    value(x) = amplitude * exp(1 - 1/(1 - u)) with u = |x - center|^2/radius^2
    for u < 1 and 0 otherwise.  Smooth everywhere, support is the closed
    ball of ``radius`` around ``center`` (full dN-dimensional position).
    """

    amplitude: float
    center: tuple
    radius: float

    def _u(self, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        diff = x - c
        return np.sum(diff * diff, axis=-1) / self.radius**2

    def value(self, x: np.ndarray) -> np.ndarray:
        u = self._u(x)
        out = np.zeros(np.shape(u))
        inside = u < 1.0
        ui = np.where(inside, u, 0.0)
        out = np.where(inside, self.amplitude * np.exp(1.0 - 1.0 / (1.0 - ui)), 0.0)
        return out

    def grad(self, x: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        diff = x - c
        u = np.sum(diff * diff, axis=-1) / self.radius**2
        inside = u < 1.0
        ui = np.where(inside, u, 0.0)
        dvdu = np.where(
            inside,
            -self.amplitude * np.exp(1.0 - 1.0 / (1.0 - ui)) / (1.0 - ui) ** 2,
            0.0,
        )
        return dvdu[..., None] * (2.0 * diff / self.radius**2)


@dataclass(frozen=True)
class InteractionSpec:
    """Singular pair interaction w(r) = B/r^beta + phi(r).

    ``phi_kind`` selects the regular tail: ``lj_tail`` gives
    phi(y) = -c2/|y|^6 (so B/r^12 - c2/r^6 is the familiar 12-6 pair
    potential), ``coulomb_only``/``none`` give phi = 0, and
    ``custom_symmetric`` takes radial callables.

    The gradient-growth metadata (C_phi, q_phi, c_phi, r_phi) declares
    |grad phi(y)| <= C_phi/|y|^q_phi + c_phi with 0 <= q_phi < beta + 1;
    validators check it by sampling.
    """

    B: float
    beta: float
    phi_kind: str = PHI_NONE
    c2: float = 0.0
    q_phi: float = 0.0
    r_phi: float = 1.0
    C_phi: float = 0.0
    c_phi: float = 1e-9
    phi_value: Optional[Callable[[float], float]] = None
    phi_deriv: Optional[Callable[[float], float]] = None
    phi_deriv2: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.B <= 0 or self.beta <= 0:
            raise UsageError("interaction requires B > 0 and beta > 0")
        if self.phi_kind not in (PHI_NONE, PHI_LJ_TAIL, PHI_COULOMB, PHI_CUSTOM):
            raise UsageError(f"unknown phi_kind {self.phi_kind!r}")
        if self.phi_kind == PHI_CUSTOM and self.phi_value is None:
            raise UsageError("custom_symmetric interaction needs phi_value")
        if not 0 <= self.q_phi < self.beta + 1:
            raise UsageError("metadata must satisfy 0 <= q_phi < beta + 1")

    # Radial profile w(r), w'(r), w''(r) for r > 0.
    def pair_value(self, r):
        r = np.asarray(r, dtype=float)
        w = self.B * r ** (-self.beta)
        if self.phi_kind == PHI_LJ_TAIL:
            w = w - self.c2 * r**-6.0
        elif self.phi_kind == PHI_CUSTOM:
            w = w + np.vectorize(self.phi_value)(r)
        return w

    def pair_deriv(self, r):
        r = np.asarray(r, dtype=float)
        dw = -self.beta * self.B * r ** (-self.beta - 1.0)
        if self.phi_kind == PHI_LJ_TAIL:
            dw = dw + 6.0 * self.c2 * r**-7.0
        elif self.phi_kind == PHI_CUSTOM:
            if self.phi_deriv is None:
                raise UsageError("custom_symmetric interaction needs phi_deriv")
            dw = dw + np.vectorize(self.phi_deriv)(r)
        return dw

    def pair_deriv2(self, r):
        r = np.asarray(r, dtype=float)
        d2 = self.beta * (self.beta + 1.0) * self.B * r ** (-self.beta - 2.0)
        if self.phi_kind == PHI_LJ_TAIL:
            d2 = d2 - 42.0 * self.c2 * r**-8.0
        elif self.phi_kind == PHI_CUSTOM:
            if self.phi_deriv2 is None:
                raise UsageError("custom_symmetric interaction needs phi_deriv2")
            d2 = d2 + np.vectorize(self.phi_deriv2)(r)
        return d2

    def phi_only(self, r):
        r = np.asarray(r, dtype=float)
        if self.phi_kind == PHI_LJ_TAIL:
            return -self.c2 * r**-6.0
        if self.phi_kind == PHI_CUSTOM:
            return np.vectorize(self.phi_value)(r)
        return np.zeros_like(r)

    def phi_only_deriv(self, r):
        r = np.asarray(r, dtype=float)
        if self.phi_kind == PHI_LJ_TAIL:
            return 6.0 * self.c2 * r**-7.0
        if self.phi_kind == PHI_CUSTOM:
            return np.vectorize(self.phi_deriv)(r)
        return np.zeros_like(r)

    def pair_min(self) -> float:
        """Certified lower bound of w(r) over r > 0 (used for floors)."""
        if self.phi_kind in (PHI_NONE, PHI_COULOMB):
            return 0.0
        if self.phi_kind == PHI_LJ_TAIL:
            if self.beta == 12.0:
                # exact minimum of B/r^12 - c2/r^6
                return -self.c2**2 / (4.0 * self.B)
            r = np.geomspace(1e-2, 1e3, 20001)
            return float(min(0.0, self.pair_value(r).min() * 1.001 - 1e-9))
        r = np.geomspace(1e-2, 1e3, 20001)
        return float(min(0.0, self.pair_value(r).min() * 1.001 - 1e-9))


@dataclass(frozen=True)
class PotentialSpec:
    """A potential energy function with its admissible set and metadata."""

    kind: str
    dim_d: int = 1
    n_particles: int = 1
    quadratic_a0: float = 1.0
    poly_k: float = 2.0
    poly_c: float = 1.0
    interaction: Optional[InteractionSpec] = None
    perturbation: Optional[PerturbationSpec] = None
    floor: float = 1.0
    # declared growth constants for the power-growth sandwich; None = derived
    c_v: Optional[float] = None
    m_v: Optional[float] = None
    r_v: Optional[float] = None
    custom_value: Optional[Callable[[np.ndarray], float]] = None
    custom_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in (KIND_QUADRATIC, KIND_POLY, KIND_SINGULAR, KIND_CUSTOM):
            raise UsageError(f"unknown potential kind {self.kind!r}")
        if self.dim_d < 1 or self.n_particles < 1:
            raise UsageError("dim_d and n_particles must be positive")
        if self.kind == KIND_QUADRATIC and self.quadratic_a0 <= 0:
            raise UsageError("quadratic potential requires a0 > 0")
        if self.kind == KIND_POLY:
            if self.poly_k <= 1:
                raise UsageError("poly_confining requires growth exponent k > 1")
            if self.poly_c <= 0:
                raise UsageError("poly_confining requires a positive coefficient")
        if self.kind == KIND_SINGULAR:
            if self.interaction is None:
                raise UsageError("singular_composite requires an interaction")
            if self.n_particles < 2:
                raise UsageError("singular_composite requires n_particles >= 2")
            if self.quadratic_a0 <= 0:
                raise UsageError("singular_composite requires a0 > 0")
        if self.kind == KIND_CUSTOM and self.custom_value is None:
            raise UsageError("custom potential requires custom_value")

    @property
    def dim(self) -> int:
        return self.dim_d * self.n_particles

    # Growth metadata with derived defaults (used by validators and by the
    # Lyapunov parameter selection).
    @property
    def growth_k(self) -> float:
        if self.kind == KIND_POLY:
            return self.poly_k
        if self.kind in (KIND_QUADRATIC, KIND_SINGULAR):
            return 2.0
        raise UsageError("custom potential has no declared growth exponent")

    @property
    def growth_c_v(self) -> float:
        if self.c_v is not None:
            return self.c_v
        if self.kind == KIND_POLY:
            return self.poly_c / 2.0
        return self.quadratic_a0 / 4.0

    @property
    def growth_m_v(self) -> float:
        if self.m_v is not None:
            return self.m_v
        if self.kind == KIND_POLY:
            return self.poly_c * self.poly_k + self.floor
        return self.quadratic_a0 + self.floor

    @property
    def growth_r_v(self) -> float:
        if self.r_v is not None:
            return self.r_v
        return 2.0

    def pair_list(self):
        n = self.n_particles
        return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _check_dim(spec: PotentialSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise UsageError(
            f"position has dimension {x.shape[-1]}, expected d*N = {spec.dim}"
        )
    return x


def _particles(spec: PotentialSpec, x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[:-1] + (spec.n_particles, spec.dim_d))


def min_pair_distance(spec: PotentialSpec, x: np.ndarray):
    """Smallest inter-particle distance; +inf for single-particle specs."""
    x = _check_dim(spec, x)
    if spec.n_particles < 2:
        return np.full(x.shape[:-1], np.inf) if x.ndim > 1 else np.inf
    xs = _particles(spec, x)
    dmin = np.full(x.shape[:-1], np.inf)
    for i, j in spec.pair_list():
        r = np.linalg.norm(xs[..., i, :] - xs[..., j, :], axis=-1)
        dmin = np.minimum(dmin, r)
    return dmin if x.ndim > 1 else float(dmin)


def in_domain(spec: PotentialSpec, x: np.ndarray):
    """Membership in the admissible position set (V finite)."""
    x = _check_dim(spec, x)
    finite = np.all(np.isfinite(x), axis=-1)
    if spec.kind == KIND_SINGULAR:
        finite = finite & (min_pair_distance(spec, np.atleast_2d(x)) > 0.0).reshape(
            finite.shape
        )
    if x.ndim == 1:
        return bool(finite)
    return finite


def eval_potential(spec: PotentialSpec, x: np.ndarray):
    """Potential value; +inf sentinel outside the admissible set.

    Accepts a single position of shape (dN,) or a batch (M, dN).
    """
    x = _check_dim(spec, x)
    single = x.ndim == 1
    xb = np.atleast_2d(x)

    if spec.kind == KIND_CUSTOM:
        vals = np.array([float(spec.custom_value(row)) for row in xb])
        out = vals + spec.floor
        return float(out[0]) if single else out

    xs = _particles(spec, xb)
    if spec.kind == KIND_POLY:
        r2 = np.sum(xb * xb, axis=-1)
        vals = spec.poly_c * (r2 + POLY_SMOOTHING_EPS**2) ** (spec.poly_k / 2.0)
    else:
        vals = 0.5 * spec.quadratic_a0 * np.sum(xs * xs, axis=(-2, -1))
        if spec.kind == KIND_SINGULAR:
            for i, j in spec.pair_list():
                r = np.linalg.norm(xs[:, i, :] - xs[:, j, :], axis=-1)
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    pair = spec.interaction.pair_value(np.maximum(r, 1e-300))
                # the singular core dominates the tail as r -> 0: overflow
                # artifacts (inf - inf) mean "outside the admissible set"
                pair = np.where((r <= 0.0) | np.isnan(pair), np.inf, pair)
                vals = vals + pair
    if spec.perturbation is not None:
        vals = vals + spec.perturbation.value(xb)
    out = vals + spec.floor
    return float(out[0]) if single else out


def grad_potential(spec: PotentialSpec, x: np.ndarray):
    """Analytic gradient; raises DomainError outside the admissible set."""
    x = _check_dim(spec, x)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    ok = in_domain(spec, xb)
    if not np.all(ok):
        raise DomainError("gradient requested outside the admissible position set")

    if spec.kind == KIND_CUSTOM:
        if spec.custom_grad is not None:
            g = np.stack([np.asarray(spec.custom_grad(row), dtype=float) for row in xb])
        else:
            g = np.stack([_fd_gradient(spec, row) for row in xb])
        return g[0] if single else g

    if spec.kind == KIND_POLY:
        r2 = np.sum(xb * xb, axis=-1, keepdims=True)
        g = (
            spec.poly_c
            * spec.poly_k
            * (r2 + POLY_SMOOTHING_EPS**2) ** (spec.poly_k / 2.0 - 1.0)
            * xb
        )
    else:
        g = spec.quadratic_a0 * xb.copy()
        if spec.kind == KIND_SINGULAR:
            xs = _particles(spec, xb)
            gs = _particles(spec, g)
            for i, j in spec.pair_list():
                diff = xs[:, i, :] - xs[:, j, :]
                r = np.linalg.norm(diff, axis=-1, keepdims=True)
                f = spec.interaction.pair_deriv(r[..., 0])[..., None] * (diff / r)
                gs[:, i, :] += f
                gs[:, j, :] -= f
            g = gs.reshape(xb.shape)
    if spec.perturbation is not None:
        g = g + spec.perturbation.grad(xb)
    return g[0] if single else g


def hess_potential(spec: PotentialSpec, x: np.ndarray) -> np.ndarray:
    """Analytic Hessian (dN x dN) for the built-in families.

    Custom potentials and perturbations fall back to central differences of
    the gradient.
    """
    x = _check_dim(spec, x)
    if x.ndim != 1:
        raise UsageError("hessian is evaluated one state at a time")
    if not in_domain(spec, x):
        raise DomainError("hessian requested outside the admissible position set")
    n = spec.dim
    if spec.kind == KIND_CUSTOM or spec.perturbation is not None:
        return fd_hessian(spec, x)
    if spec.kind == KIND_POLY:
        r2 = float(np.dot(x, x)) + POLY_SMOOTHING_EPS**2
        c, k = spec.poly_c, spec.poly_k
        h = c * k * r2 ** (k / 2.0 - 1.0) * np.eye(n)
        h += c * k * (k - 2.0) * r2 ** (k / 2.0 - 2.0) * np.outer(x, x)
        return h
    h = spec.quadratic_a0 * np.eye(n)
    if spec.kind == KIND_SINGULAR:
        xs = x.reshape(spec.n_particles, spec.dim_d)
        d = spec.dim_d
        for i, j in spec.pair_list():
            diff = xs[i] - xs[j]
            r = float(np.linalg.norm(diff))
            u = diff / r
            w1 = float(spec.interaction.pair_deriv(r))
            w2 = float(spec.interaction.pair_deriv2(r))
            blk = w2 * np.outer(u, u) + (w1 / r) * (np.eye(d) - np.outer(u, u))
            si, sj = slice(i * d, (i + 1) * d), slice(j * d, (j + 1) * d)
            h[si, si] += blk
            h[sj, sj] += blk
            h[si, sj] -= blk
            h[sj, si] -= blk
    return h


def _fd_gradient(spec: PotentialSpec, x: np.ndarray, rel_h: float = 1e-6) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (eval_potential(spec, xp) - eval_potential(spec, xm)) / (2 * h)
    return g


def fd_hessian(spec: PotentialSpec, x: np.ndarray, rel_h: float = 1e-5) -> np.ndarray:
    """Central differences of the analytic gradient."""
    n = x.size
    h_mat = np.empty((n, n))
    for i in range(n):
        h = rel_h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        h_mat[:, i] = (grad_potential(spec, xp) - grad_potential(spec, xm)) / (2 * h)
    return 0.5 * (h_mat + h_mat.T)


# ---------------------------------------------------------------------------
# assumption validators
# ---------------------------------------------------------------------------

ASSUMPTION_IDS = ("V-loc", "V-poly-xk", "V-coercive", "V-2", "V-int", "V-sing1", "V-sing2")


@dataclass(frozen=True)
class SamplingPlan:
    """Radial shells and per-shell counts for the sample-based validators."""

    radii: tuple = (2.0, 5.0, 10.0, 30.0, 100.0)
    small_radii: tuple = (0.5, 0.2, 0.1, 0.05, 0.02, 0.01)
    n_per_shell: int = 32
    seed: int = 0

    def __post_init__(self):
        if len(self.radii) == 0 or self.n_per_shell <= 0:
            raise UsageError("sampling plan needs at least one shell and one point")


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    assumption: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, margin, detail="", tol=0.0):
        margin = float(margin)
        self.checks.append(CheckResult(name, bool(margin > -abs(tol) - 1e-12), margin, detail))

    def add_bool(self, name, ok, detail=""):
        self.checks.append(CheckResult(name, bool(ok), 1.0 if ok else -1.0, detail))

    def as_dict(self):
        return {
            "assumption": self.assumption,
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "worst_margin": c.worst_margin,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def _unit_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    u = rng.standard_normal((n, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _shell_points(spec, rng, radius, count):
    return radius * _unit_directions(rng, count, spec.dim)


def _collision_points(spec, rng, pair_sep, count):
    """Configurations with one pair at distance pair_sep, others spread out."""
    xs = rng.standard_normal((count, spec.n_particles, spec.dim_d))
    xs *= 2.0
    u = _unit_directions(rng, count, spec.dim_d)
    xs[:, 1, :] = xs[:, 0, :] + pair_sep * u
    return xs.reshape(count, spec.dim)


def validate_assumptions(
    spec: PotentialSpec,
    which: str,
    samples: SamplingPlan,
    zeta: float = 1.5,
    delta: float = 1.0,
) -> ValidationReport:
    """Sample-based check of one structural assumption.

    Returns the per-inequality worst margins; a report passes when every
    sub-check passes.  These are samplers, not proofs.
    """
    if which not in ASSUMPTION_IDS:
        raise UsageError(f"unknown assumption id {which!r}; expected one of {ASSUMPTION_IDS}")
    rng = np.random.Generator(np.random.Philox(key=samples.seed))
    rep = ValidationReport(assumption=which)

    if which == "V-loc":
        _check_v_loc(spec, samples, rng, rep)
    elif which == "V-poly-xk":
        _check_v_poly(spec, samples, rng, rep)
    elif which == "V-coercive":
        _check_v_coercive(spec, samples, rng, rep)
    elif which == "V-2":
        rep.add_bool(
            "confinement is the quadratic well",
            spec.kind in (KIND_QUADRATIC, KIND_SINGULAR) and spec.quadratic_a0 > 0,
            f"a0={spec.quadratic_a0}",
        )
    elif which == "V-int":
        _check_v_int(spec, samples, rng, rep)
    elif which == "V-sing1":
        _check_v_sing1(spec, samples, rng, rep)
    elif which == "V-sing2":
        _check_v_sing2(spec, samples, rng, rep, zeta=zeta, delta=delta)
    return rep


def _check_v_loc(spec, samples, rng, rep):
    vals = []
    for r in samples.radii:
        pts = _shell_points(spec, rng, r, samples.n_per_shell)
        v = eval_potential(spec, pts)
        g = grad_potential(spec, pts)
        vals.append(v.mean())
        rep.add(f"V >= 1 at |x|={r:g}", float(v.min() - 1.0))
        rep.add_bool(f"gradient finite at |x|={r:g}", bool(np.all(np.isfinite(g))))
    diffs = np.diff(vals)
    rep.add_bool(
        "V grows along increasing shells (coercivity witness)",
        bool(np.all(diffs[-max(1, len(diffs) // 2):] > 0)),
        f"shell means {np.round(vals, 3).tolist()}",
    )


def _check_v_poly(spec, samples, rng, rep):
    k = spec.growth_k
    c_v, m_v, r_v = spec.growth_c_v, spec.growth_m_v, spec.growth_r_v
    radii = [r for r in samples.radii if r >= r_v] or [r_v, 2 * r_v]
    lower, upper, drift, gbound = [], [], [], []
    for r in radii:
        pts = _shell_points(spec, rng, r, samples.n_per_shell)
        v = eval_potential(spec, pts)
        g = grad_potential(spec, pts)
        rk = r**k
        lower.append(np.min(v - c_v * rk) / rk)
        upper.append(np.min(m_v * rk - v) / rk)
        xg = np.sum(pts * g, axis=1)
        drift.append(np.min(xg - c_v * rk) / rk)
        gn = np.linalg.norm(g, axis=1)
        gbound.append(np.min(m_v * r ** (k - 1) - gn) / r ** (k - 1))
    rep.add("lower sandwich c_V |x|^k <= V", min(lower), f"relative margin over |x| in {radii}")
    rep.add("upper sandwich V <= M_V |x|^k", min(upper))
    rep.add("radial drift x.grad V >= c_V |x|^k", min(drift))
    rep.add("gradient growth |grad V| <= M_V |x|^(k-1) (needed when gamma=0)", min(gbound))


def _check_v_coercive(spec, samples, rng, rep):
    # along rays to infinity
    dirs = _unit_directions(rng, 8, spec.dim)
    radii = np.array(sorted(samples.radii))
    vals = np.array([[float(eval_potential(spec, r * u)) for r in radii] for u in dirs])
    tail = vals[:, len(radii) // 2 :]
    rep.add_bool(
        "V increases along rays to infinity",
        bool(np.all(np.diff(tail, axis=1) > 0)),
    )
    rep.add(
        "V exceeds 10^3 at the largest sampled radius",
        float(vals[:, -1].min() - 1e3),
    )
    grads = np.array(
        [np.linalg.norm(grad_potential(spec, radii[-1] * u)) for u in dirs]
    )
    rep.add("gradient is large where V is large (|grad V| > 1)", float(grads.min() - 1.0))
    if spec.kind == KIND_SINGULAR:
        seps = np.array(sorted(samples.small_radii, reverse=True))
        vcol = []
        for sep in seps:
            pts = _collision_points(spec, rng, sep, samples.n_per_shell)
            vcol.append(float(np.min(eval_potential(spec, pts))))
        rep.add_bool(
            "V increases along paths into pair collisions",
            bool(np.all(np.diff(vcol) > 0)),
            f"min V per separation {np.round(vcol, 2).tolist()}",
        )


def _check_v_int(spec, samples, rng, rep):
    inter = spec.interaction
    if inter is None:
        rep.add_bool("interaction present", False, "spec has no interaction")
        return
    rep.add("metadata exponent q_phi < beta + 1", inter.beta + 1 - inter.q_phi - 1e-12)
    d = spec.dim_d
    # small-radius behaviour of the regular tail
    seps = np.array(sorted(samples.small_radii, reverse=True))
    weighted = seps**inter.beta * np.abs(inter.phi_only(seps))
    rep.add_bool(
        "|y|^beta |phi(y)| -> 0 toward the singularity",
        bool(np.all(np.diff(weighted) <= 1e-12) and weighted[-1] <= max(1e-8, weighted[0] * 0.01 + 1e-12)),
        f"sequence {np.format_float_scientific(weighted[0], 3)} -> "
        f"{np.format_float_scientific(weighted[-1], 3)}",
    )
    # symmetry and gradient growth at generic points; the tail is stored as a
    # radial profile, so phi(y) = phi(-y) reduces to |y| = |-y|
    margins, sym = [], []
    for r in list(seps) + list(samples.radii):
        u = _unit_directions(rng, samples.n_per_shell, d)
        y = r * u
        rp = np.linalg.norm(y, axis=1)
        rm = np.linalg.norm(-y, axis=1)
        sym.append(float(np.max(np.abs(inter.phi_only(rp) - inter.phi_only(rm)))))
        gphi = np.abs(inter.phi_only_deriv(np.full(len(y), r)))
        bound = inter.C_phi / r**inter.q_phi + inter.c_phi
        margins.append(float(np.min(bound - gphi)))
    rep.add_bool("phi is symmetric (radial profile)", max(sym) <= 1e-12)
    rep.add("gradient growth |grad phi| <= C_phi/|y|^q_phi + c_phi", min(margins))
    far = np.array([max(samples.radii), 2 * max(samples.radii)])
    rep.add_bool(
        "phi and grad phi bounded outside r_phi",
        bool(
            np.all(np.isfinite(inter.phi_only(far)))
            and np.all(np.abs(inter.phi_only_deriv(far)) < 1e6)
        ),
    )


def _check_v_sing1(spec, samples, rng, rep):
    if spec.kind != KIND_SINGULAR:
        rep.add_bool("composite structure", False, "spec is not singular_composite")
        return
    rep.add_bool("at least two particles", spec.n_particles >= 2)
    x_coincident = np.zeros(spec.dim)
    rep.add_bool(
        "coincident particles are outside the admissible set",
        not in_domain(spec, x_coincident)
        and math.isinf(eval_potential(spec, x_coincident)),
    )
    _check_v_int(spec, samples, rng, rep)
    if spec.perturbation is not None:
        pts = _collision_points(spec, rng, min(samples.small_radii), samples.n_per_shell)
        vp = spec.perturbation.value(pts)
        rep.add_bool(
            "perturbation support avoids near-collision configurations",
            bool(np.all(vp == 0.0)),
        )


def _sing2_sequences(spec, samples, rng):
    """Position sequences with V -> infinity: outward shells, then collisions."""
    radii = sorted(samples.radii)
    dirs = _unit_directions(rng, 4, spec.dim)
    seqs = [[r * u for r in radii] for u in dirs]
    if spec.kind == KIND_SINGULAR:
        seps = sorted(samples.small_radii, reverse=True)
        for _ in range(4):
            base = rng.standard_normal((spec.n_particles, spec.dim_d)) * 1.5
            u = _unit_directions(rng, 1, spec.dim_d)[0]
            seq = []
            for sep in seps:
                xs = base.copy()
                xs[1] = xs[0] + sep * u
                seq.append(xs.reshape(spec.dim))
            seqs.append(seq)
    return seqs


def _check_v_sing2(spec, samples, rng, rep, zeta, delta):
    if not 1.0 < zeta < 2.0:
        raise UsageError("[V sing2] requires zeta in (1, 2)")
    if not 0.5 < delta <= 1.0:
        raise UsageError("[V sing2] requires delta in (1/2, 1]")
    for label, seq in zip(
        [f"seq{idx}" for idx in range(64)], _sing2_sequences(spec, samples, rng)
    ):
        v = np.array([float(eval_potential(spec, x)) for x in seq])
        gn = np.array([float(np.linalg.norm(grad_potential(spec, x))) for x in seq])
        hn = np.array(
            [float(np.linalg.norm(fd_hessian(spec, x), ord=2)) for x in seq]
        )
        r1 = hn / gn**zeta
        r2 = gn ** (2.0 - zeta) / v ** (1.0 - delta)
        rep.add_bool(
            f"V diverges along {label}",
            bool(np.all(np.diff(v) > 0)),
            f"V: {np.format_float_scientific(v[0], 2)} -> {np.format_float_scientific(v[-1], 2)}",
        )
        rep.add_bool(
            f"|Hess V|/|grad V|^zeta decreasing toward 0 along {label}",
            bool(np.all(np.diff(r1) <= 1e-12) or r1[-1] < 0.05 * r1[0]),
            f"{np.format_float_scientific(r1[0], 2)} -> {np.format_float_scientific(r1[-1], 2)}",
        )
        rep.add_bool(
            f"|grad V|^(2-zeta)/V^(1-delta) increasing to infinity along {label}",
            bool(np.all(np.diff(r2) >= -1e-12) or r2[-1] > 20.0 * r2[0]),
            f"{np.format_float_scientific(r2[0], 2)} -> {np.format_float_scientific(r2[-1], 2)}",
        )


# convenience builders used by configs and tests -----------------------------


def lennard_jones_interaction(c1: float = 1.0, c2: float = 1.0) -> InteractionSpec:
    """12-6 pair potential c1/r^12 - c2/r^6 in the singular + tail split."""
    return InteractionSpec(
        B=c1,
        beta=12.0,
        phi_kind=PHI_LJ_TAIL,
        c2=c2,
        q_phi=7.0,
        r_phi=1.0,
        C_phi=6.0 * c2,
        c_phi=1e-9,
    )


def coulomb_interaction(c3: float = 1.0, dim_d: int = 3) -> InteractionSpec:
    """Repulsive Coulomb pair potential c3/r^(d-2) for d >= 3."""
    if dim_d < 3:
        raise UsageError("coulomb interaction requires d >= 3")
    return InteractionSpec(
        B=c3, beta=float(dim_d - 2), phi_kind=PHI_COULOMB, q_phi=0.0, C_phi=0.0, c_phi=1e-9
    )
