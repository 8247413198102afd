"""Natural and SI unit systems.

Natural units measure every spacetime coordinate in meters and every
4-momentum component, mass and potential in inverse meters (c = hbar = 1).
SI mode restores seconds, joules, kilograms and volts through five
substitutions::

    t      -> c t            (time)
    E      -> E / c          (energy, then divided by hbar)
    A      -> (e / c) A      (4-potential, then divided by hbar)
    p      -> p / hbar       (momentum)
    m      -> m c / hbar     (mass)

All numerical work in the library happens in natural units; SI values enter
and leave through :func:`convert_units`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import UnitMismatch

SPEED_OF_LIGHT = 2.99792458e8  # m/s
ELEMENTARY_CHARGE = 1.60217646e-19  # C
HBAR = 1.05457148e-34  # J s

ROLES = ("time", "position", "energy", "momentum", "potential", "mass")


class UnitMode(str, Enum):
    NATURAL = "natural"
    SI = "si"


@dataclass(frozen=True)
class UnitSystem:
    mode: UnitMode = UnitMode.NATURAL

    @property
    def c(self) -> float:
        return SPEED_OF_LIGHT if self.mode is UnitMode.SI else 1.0

    @property
    def hbar(self) -> float:
        return HBAR if self.mode is UnitMode.SI else 1.0

    @property
    def e_charge(self) -> float:
        return ELEMENTARY_CHARGE if self.mode is UnitMode.SI else 1.0

    @classmethod
    def parse(cls, name: Union[str, "UnitSystem", UnitMode]) -> "UnitSystem":
        if isinstance(name, UnitSystem):
            return name
        return cls(UnitMode(str(name.value if isinstance(name, UnitMode) else name).lower()))


NATURAL = UnitSystem(UnitMode.NATURAL)
SI = UnitSystem(UnitMode.SI)


def _si_to_natural_factor(role: str) -> float:
    c, e, hbar = SPEED_OF_LIGHT, ELEMENTARY_CHARGE, HBAR
    factors = {
        "time": c,
        "position": 1.0,
        "energy": 1.0 / (c * hbar),
        "momentum": 1.0 / hbar,
        "potential": e / (c * hbar),
        "mass": c / hbar,
    }
    try:
        return factors[role]
    except KeyError:
        raise ValueError(f"unknown role tag {role!r}; expected one of {ROLES}") from None


@dataclass(frozen=True)
class Quantity:
    """A value (scalar or array) tagged with a physical role and unit system."""

    value: object
    role: str
    units: UnitSystem = NATURAL

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role tag {self.role!r}; expected one of {ROLES}")

    def _check(self, other: "Quantity") -> None:
        if not isinstance(other, Quantity):
            raise TypeError("can only combine Quantity with Quantity")
        if other.units != self.units:
            raise UnitMismatch(
                f"cannot mix {self.units.mode.value} and {other.units.mode.value} quantities"
            )
        if other.role != self.role:
            raise UnitMismatch(f"cannot combine roles {self.role!r} and {other.role!r}")

    def __add__(self, other: "Quantity") -> "Quantity":
        self._check(other)
        return Quantity(np.add(self.value, other.value), self.role, self.units)

    def __sub__(self, other: "Quantity") -> "Quantity":
        self._check(other)
        return Quantity(np.subtract(self.value, other.value), self.role, self.units)

    def natural_value(self):
        """Return the bare value in natural units."""
        return convert_units(self, NATURAL).value


def convert_units(q: Quantity, to: Union[UnitSystem, str]) -> Quantity:
    """Convert a tagged quantity between natural and SI units."""
    target = UnitSystem.parse(to)
    if not isinstance(q, Quantity):
        raise TypeError("convert_units expects a Quantity")
    if q.units == target:
        return q
    factor = _si_to_natural_factor(q.role)
    if target.mode is UnitMode.NATURAL:
        value = np.multiply(q.value, factor)
    else:
        value = np.divide(q.value, factor)
    if np.ndim(value) == 0:
        value = float(value)
    return Quantity(value, q.role, target)


def propagator_prefactor(units: Union[UnitSystem, str] = NATURAL) -> float:
    """Scalar in front of the delta function of the propagator (hbar**2 in SI)."""
    return UnitSystem.parse(units).hbar ** 2


def shell_radius(mass: float, units: Union[UnitSystem, str] = NATURAL) -> float:
    """Square root of the right-hand side of the mass-shell condition (m c in SI)."""
    return mass * UnitSystem.parse(units).c
