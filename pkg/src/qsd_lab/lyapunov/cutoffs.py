"""Smooth gate functions built from the quintic smoothstep.

Every gate is a C^2 spline with values in [0, 1], exact plateaus and
|derivative| <= 1.875 / width; all the shipped gates use unit-width
transitions, meeting the |f'| <= 2 budget with slack.  First and second
derivatives are available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError

# max |S'| of the quintic smoothstep on [0, 1], attained at 1/2
SMOOTHSTEP_MAX_D1 = 1.875


def _smoothstep(u):
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_d1(u):
    return 30.0 * u * u * (1.0 - u) ** 2


def _smoothstep_d2(u):
    return 60.0 * u * (2.0 * u - 1.0) * (u - 1.0)


@dataclass(frozen=True)
class Ramp:
    """0 -> 1 transition on [a, b] (rising) or 1 -> 0 (falling)."""

    a: float
    b: float
    rising: bool = True

    def __post_init__(self):
        if not self.b > self.a:
            raise UsageError(f"gate interval [{self.a}, {self.b}] is inverted")

    @property
    def width(self) -> float:
        return self.b - self.a

    def _u(self, z):
        return np.clip((np.asarray(z, dtype=float) - self.a) / self.width, 0.0, 1.0)

    def value(self, z):
        s = _smoothstep(self._u(z))
        return s if self.rising else 1.0 - s

    def d1(self, z):
        z_arr = np.asarray(z, dtype=float)
        inside = (z_arr > self.a) & (z_arr < self.b)
        u = self._u(z_arr)
        g = np.where(inside, _smoothstep_d1(u) / self.width, 0.0)
        return g if self.rising else -g

    def d2(self, z):
        z_arr = np.asarray(z, dtype=float)
        inside = (z_arr > self.a) & (z_arr < self.b)
        u = self._u(z_arr)
        g = np.where(inside, _smoothstep_d2(u) / self.width**2, 0.0)
        return g if self.rising else -g


@dataclass(frozen=True)
class EvenGate:
    """ramp applied to |z|; C^2 because the ramp is flat at the origin."""

    ramp: Ramp

    def __post_init__(self):
        if self.ramp.a < 0:
            raise UsageError("even gate needs a transition at positive |z|")

    def value(self, z):
        return self.ramp.value(np.abs(z))

    def d1(self, z):
        z_arr = np.asarray(z, dtype=float)
        return np.sign(z_arr) * self.ramp.d1(np.abs(z_arr))

    def d2(self, z):
        return self.ramp.d2(np.abs(z))


@dataclass(frozen=True)
class CutoffFamily:
    """The gate collection the Nose-Hoover weight is assembled from.

    f0: 1 below -1, 0 above 0 (thermostat sign gate)
    f1: 1 below k_star, 0 above k_star + 1
    f2: 1 on |z| <= 1, 0 on |z| >= 2 (kinetic-ratio gate)
    f3: complementary bump, 1 on |z| >= 2, 0 on |z| <= 1
    h1: 1 below -y_star - 1, 0 above -y_star (deep-negative thermostat gate)
    h3: 1 on |z| <= 3, 0 on |z| >= 4
    h : 1 above level R1, 0 below R1 - 1 (potential-level gate)
    h0: 0 below 1, 1 above 2, nondecreasing
    """

    f0: Ramp
    f1: Ramp
    f2: EvenGate
    f3: EvenGate
    h1: Ramp
    h3: EvenGate
    h: Ramp
    h0: Ramp

    def all_named(self):
        return {
            "f0": self.f0,
            "f1": self.f1,
            "f2": self.f2,
            "f3": self.f3,
            "h1": self.h1,
            "h3": self.h3,
            "h": self.h,
            "h0": self.h0,
        }


def build_cutoffs(k_star: float = 1.0, y_star: float = 5.0, r1_level: float = 2.0) -> CutoffFamily:
    """Instantiate the gate family for the given gate parameters."""
    return CutoffFamily(
        f0=Ramp(-1.0, 0.0, rising=False),
        f1=Ramp(k_star, k_star + 1.0, rising=False),
        f2=EvenGate(Ramp(1.0, 2.0, rising=False)),
        f3=EvenGate(Ramp(1.0, 2.0, rising=True)),
        h1=Ramp(-y_star - 1.0, -y_star, rising=False),
        h3=EvenGate(Ramp(3.0, 4.0, rising=False)),
        h=Ramp(r1_level - 1.0, r1_level, rising=True),
        h0=Ramp(1.0, 2.0, rising=True),
    )


def radial_cutoff(inner: float = 1.0, outer: float = 2.0) -> Ramp:
    """chi gate: 0 inside radius ``inner``, 1 outside radius ``outer``."""
    return Ramp(inner, outer, rising=True)
