"""The three thermostated dynamics and their generators.

All families evolve a position block x and velocity block v in R^(dN);
the auxiliary block is a Markovian bath variable z in R^(dN) for the
generalized Langevin family, a scalar thermostat y for Nose-Hoover, and
empty for kinetic Langevin.  Units are nondimensional: unit mass, noise
amplitudes sqrt(2*gamma) and sqrt(2*alpha).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from .errors import DomainError, UsageError
from .potentials import PotentialSpec, eval_potential, grad_potential, in_domain

FAMILY_KL = "kinetic_langevin"
FAMILY_GL = "generalized_langevin"
FAMILY_NH = "nose_hoover"
FAMILIES = (FAMILY_KL, FAMILY_GL, FAMILY_NH)


@dataclass(frozen=True)
class ProcessSpec:
    """One of the three dynamics with its friction/coupling parameters."""

    family: str
    potential: PotentialSpec
    gamma: float = 1.0
    lambda_c: float = 1.0
    alpha_c: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown process family {self.family!r}")
        if self.gamma < 0:
            raise UsageError("friction gamma must be >= 0")
        if self.family == FAMILY_NH and self.gamma <= 0:
            raise UsageError("nose_hoover requires gamma > 0")
        if self.family == FAMILY_GL and (self.lambda_c <= 0 or self.alpha_c <= 0):
            raise UsageError("generalized_langevin requires lambda > 0 and alpha > 0")

    @property
    def dim(self) -> int:
        """dN, the size of the position and velocity blocks."""
        return self.potential.dim

    @property
    def aux_dim(self) -> int:
        if self.family == FAMILY_GL:
            return self.dim
        if self.family == FAMILY_NH:
            return 1
        return 0

    @property
    def phase_dim(self) -> int:
        return 2 * self.dim + self.aux_dim


@dataclass
class State:
    """A phase-space point (x, v, aux)."""

    x: np.ndarray
    v: np.ndarray
    aux: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.v = np.asarray(self.v, dtype=float).reshape(-1)
        self.aux = np.asarray(self.aux, dtype=float).reshape(-1)

    def copy(self) -> "State":
        return State(self.x.copy(), self.v.copy(), self.aux.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.v, self.aux])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))


def make_state(proc: ProcessSpec, x, v, aux=None) -> State:
    """Build and shape-check a state for the given process."""
    s = State(np.atleast_1d(np.asarray(x, dtype=float)),
              np.atleast_1d(np.asarray(v, dtype=float)),
              np.zeros(proc.aux_dim) if aux is None else np.atleast_1d(np.asarray(aux, dtype=float)))
    check_state(proc, s)
    return s


def check_state(proc: ProcessSpec, s: State) -> None:
    if s.x.size != proc.dim or s.v.size != proc.dim:
        raise UsageError(
            f"state blocks have sizes ({s.x.size}, {s.v.size}), expected {proc.dim}"
        )
    if s.aux.size != proc.aux_dim:
        raise UsageError(
            f"state has auxiliary size {s.aux.size}, family {proc.family!r} "
            f"expects {proc.aux_dim}"
        )


def hamiltonian(proc: ProcessSpec, s: State) -> float:
    """V(x) + |v|^2/2 plus the quadratic auxiliary energy; +inf off-domain."""
    check_state(proc, s)
    v_pot = eval_potential(proc.potential, s.x)
    if not np.isfinite(v_pot):
        return float("inf")
    return float(v_pot + 0.5 * np.dot(s.v, s.v) + 0.5 * np.dot(s.aux, s.aux))


def hamiltonian_many(proc: ProcessSpec, x: np.ndarray, v: np.ndarray, aux: np.ndarray) -> np.ndarray:
    """Batched Hamiltonian over rows of (x, v, aux)."""
    vp = eval_potential(proc.potential, x)
    h = vp + 0.5 * np.sum(v * v, axis=-1)
    if aux.shape[-1]:
        h = h + 0.5 * np.sum(aux * aux, axis=-1)
    return h


def drift(proc: ProcessSpec, s: State) -> State:
    """Deterministic part of the dynamics, as a phase-space vector."""
    check_state(proc, s)
    if not in_domain(proc.potential, s.x):
        raise DomainError("drift requested outside the admissible position set")
    dx, dv, daux = drift_arrays(proc, s.x[None, :], s.v[None, :], s.aux[None, :])
    return State(dx[0], dv[0], daux[0])


def drift_arrays(proc: ProcessSpec, x: np.ndarray, v: np.ndarray, aux: np.ndarray):
    """Batched drift over rows; returns (dx, dv, daux) arrays."""
    g = grad_potential(proc.potential, x)
    dx = v
    if proc.family == FAMILY_GL:
        z = aux
        dv = -g - proc.gamma * v + proc.lambda_c * z
        daux = -proc.alpha_c * z - proc.lambda_c * v
    elif proc.family == FAMILY_NH:
        y = aux[..., 0:1]
        dv = -g - proc.gamma * v - v * y
        dn = float(proc.dim)
        daux = np.sum(v * v, axis=-1, keepdims=True) - dn
    else:
        dv = -g - proc.gamma * v
        daux = np.zeros_like(aux)
    return dx, dv, daux


@dataclass(frozen=True)
class NoiseLayout:
    """Which blocks receive independent Brownian increments, and amplitude."""

    amp_v: float
    amp_aux: float
    aux_dim: int

    @property
    def diffusion_v(self) -> float:
        """Generator coefficient of the velocity Laplacian (amp^2 / 2)."""
        return 0.5 * self.amp_v**2

    @property
    def diffusion_aux(self) -> float:
        return 0.5 * self.amp_aux**2


def diffusion_map(proc: ProcessSpec) -> NoiseLayout:
    """Noise layout of the family; amplitude 0 marks noise-free blocks."""
    amp_v = float(np.sqrt(2.0 * proc.gamma))
    if proc.family == FAMILY_GL:
        return NoiseLayout(amp_v=amp_v, amp_aux=float(np.sqrt(2.0 * proc.alpha_c)), aux_dim=proc.aux_dim)
    if proc.family == FAMILY_NH:
        return NoiseLayout(amp_v=amp_v, amp_aux=0.0, aux_dim=proc.aux_dim)
    return NoiseLayout(amp_v=amp_v, amp_aux=0.0, aux_dim=0)


class ScalarField(Protocol):
    """Observable with the derivatives the generator needs."""

    def value(self, s: State) -> float: ...

    def grad(self, s: State) -> tuple: ...

    def lap_noise(self, s: State) -> tuple: ...


def apply_generator(proc: ProcessSpec, f: ScalarField, s: State) -> float:
    """(L f)(s) for a twice-differentiable observable.

    The observable supplies its full gradient and the Laplacians restricted
    to the noise blocks; the generator is drift . grad + sum of
    (amplitude^2/2) Laplacians.
    """
    check_state(proc, s)
    if not hasattr(f, "grad") or not hasattr(f, "lap_noise"):
        raise UsageError("observable must provide grad() and lap_noise()")
    gx, gv, gaux = f.grad(s)
    b = drift(proc, s)
    layout = diffusion_map(proc)
    val = float(np.dot(b.x, gx) + np.dot(b.v, gv))
    if proc.aux_dim:
        val += float(np.dot(b.aux, gaux))
    lap_v, lap_aux = f.lap_noise(s)
    val += layout.diffusion_v * float(lap_v)
    if layout.diffusion_aux:
        val += layout.diffusion_aux * float(lap_aux)
    return val


class HamiltonianField:
    """The energy observable with exact derivatives."""

    def __init__(self, proc: ProcessSpec):
        self.proc = proc

    def value(self, s: State) -> float:
        return hamiltonian(self.proc, s)

    def grad(self, s: State):
        return grad_potential(self.proc.potential, s.x), s.v.copy(), s.aux.copy()

    def lap_noise(self, s: State):
        return float(self.proc.dim), float(self.proc.aux_dim)


class FiniteDifferenceField:
    """Adapter turning a plain callable into a ScalarField.

    Meant for ad-hoc observables in diagnostics; Lyapunov evaluation uses
    exact closed-form derivatives instead.
    """

    def __init__(self, func: Callable[[State], float], h: float = 1e-5):
        self.func = func
        self.h = h

    def value(self, s: State) -> float:
        return float(self.func(s))

    def _part(self, s: State, block: str, i: int, shift: float) -> float:
        t = s.copy()
        getattr(t, block)[i] += shift
        return float(self.func(t))

    def grad(self, s: State):
        out = []
        for block in ("x", "v", "aux"):
            arr = getattr(s, block)
            g = np.zeros_like(arr)
            for i in range(arr.size):
                h = self.h * max(1.0, abs(arr[i]))
                g[i] = (self._part(s, block, i, h) - self._part(s, block, i, -h)) / (2 * h)
            out.append(g)
        return tuple(out)

    def lap_noise(self, s: State):
        f0 = self.value(s)
        laps = []
        for block in ("v", "aux"):
            arr = getattr(s, block)
            acc = 0.0
            for i in range(arr.size):
                h = self.h * max(1.0, abs(arr[i]))
                acc += (self._part(s, block, i, h) - 2 * f0 + self._part(s, block, i, -h)) / h**2
            laps.append(acc)
        return tuple(laps)
