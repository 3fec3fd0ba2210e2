"""
Domain types for a single cavity mode coupled to an ensemble of multi-level atoms.

Conventions
-----------
Every rate and detuning is stored in units of the excited-state decay rate
Gamma (Gamma = 1).  MHz only appears at the configuration boundary, through
:func:`convert` with an explicit calibration constant.

Atomic resonances are stored as the probe detuning at which the probe is
resonant with each transition.  For the four-level ladder the reference is the
|1> -> |4> transition, so the offsets are ``[-(d34 + d23), -d34, 0]`` and the
transmission peaks, the susceptibility features and the normal-mode
eigenvalues all live on the same probe-detuning axis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError


class Unit(str, enum.Enum):
    GAMMA = "Gamma"
    MHZ = "MHz"

    @classmethod
    def parse(cls, text: str) -> "Unit":
        key = text.strip().lower()
        if key in ("gamma", "γ", "g"):
            return cls.GAMMA
        if key == "mhz":
            return cls.MHZ
        raise ValidationError("unit", f"unknown frequency unit {text!r} (expected 'Gamma' or 'MHz')")


@dataclass(frozen=True)
class FrequencyQuantity:
    value: float
    unit: Unit = Unit.GAMMA

    def __post_init__(self):
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "value", float(self.value))


def convert(q: FrequencyQuantity, target: Unit | str, gamma_mhz: float) -> FrequencyQuantity:
    """Rescale ``q`` into ``target`` units, given Gamma expressed in MHz."""
    if not gamma_mhz > 0 or not math.isfinite(gamma_mhz):
        raise ValidationError("gamma_mhz", f"must be a positive finite number, got {gamma_mhz!r}")
    target = Unit(target)
    if q.unit is target:
        return q
    if target is Unit.MHZ:
        return FrequencyQuantity(q.value * gamma_mhz, Unit.MHZ)
    return FrequencyQuantity(q.value / gamma_mhz, Unit.GAMMA)


def _as_float_tuple(name: str, values) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValidationError(name, "all entries must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class TransitionLadder:
    """Cavity-coupled transitions sharing the ground state |1>.

    Parameters
    ----------
    offsets : sequence of float
        Probe detuning (Gamma units) at which each transition is resonant.
        Strictly increasing.
    decays : sequence of float
        Excited-state decay rates gamma_i (Gamma units), all positive.
    labels : sequence of str, optional
        Display names; defaults to ``|2>, |3>, ...``.
    """

    offsets: tuple[float, ...]
    decays: tuple[float, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        offsets = _as_float_tuple("offsets", self.offsets)
        decays = _as_float_tuple("decays", self.decays)
        if len(offsets) < 1:
            raise ValidationError("offsets", "at least one transition is required")
        if len(decays) != len(offsets):
            raise ValidationError("decays", f"expected {len(offsets)} entries, got {len(decays)}")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValidationError("offsets", "must be strictly increasing")
        if any(g <= 0 for g in decays):
            raise ValidationError("decays", "all decay rates must be > 0")
        labels = tuple(self.labels) or tuple(f"|{i + 2}>" for i in range(len(offsets)))
        if len(labels) != len(offsets):
            raise ValidationError("labels", f"expected {len(offsets)} entries, got {len(labels)}")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "decays", decays)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.offsets)

    def shifted(self, s: float) -> "TransitionLadder":
        return TransitionLadder(tuple(o + s for o in self.offsets), self.decays, self.labels)


@dataclass(frozen=True)
class CollectiveCoupling:
    """Collective coupling strengths G_i = g_i sqrt(N), in Gamma units."""

    strengths: tuple[float, ...]

    def __post_init__(self):
        strengths = _as_float_tuple("strengths", self.strengths)
        if any(s < 0 for s in strengths):
            raise ValidationError("strengths", "coupling strengths must be >= 0")
        object.__setattr__(self, "strengths", strengths)

    @classmethod
    def uniform(cls, g_sqrt_n: float, size: int) -> "CollectiveCoupling":
        return cls((float(g_sqrt_n),) * size)

    @property
    def size(self) -> int:
        return len(self.strengths)


@dataclass(frozen=True)
class CavityParams:
    """Cavity field decay half-width ``kappa``, detuning ``delta_c`` and probe drive.

    ``kappa`` is the half-width of the empty-cavity Lorentzian, so its FWHM is
    ``2 * kappa``.  ``drive`` only scales intra-cavity amplitudes; normalized
    transmission does not depend on it.
    """

    kappa: float
    delta_c: float = 0.0
    drive: float = 1.0

    def __post_init__(self):
        for name in ("kappa", "delta_c", "drive"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValidationError(name, "must be finite")
            object.__setattr__(self, name, v)
        if self.kappa <= 0:
            raise ValidationError("kappa", f"must be > 0, got {self.kappa!r}")
        if self.drive <= 0:
            raise ValidationError("drive", f"must be > 0, got {self.drive!r}")


@dataclass(frozen=True)
class Grid:
    dp_min: float
    dp_max: float
    points: int = 2001

    def __post_init__(self):
        if not (math.isfinite(self.dp_min) and math.isfinite(self.dp_max)):
            raise ValidationError("grid", "bounds must be finite")
        if not self.dp_min < self.dp_max:
            raise ValidationError("grid.dp_max", "dp_min must be < dp_max")
        if int(self.points) != self.points or self.points < 2:
            raise ValidationError("grid.points", f"need an integer >= 2, got {self.points!r}")
        object.__setattr__(self, "points", int(self.points))

    def values(self) -> np.ndarray:
        return np.linspace(self.dp_min, self.dp_max, self.points)

    @property
    def step(self) -> float:
        return (self.dp_max - self.dp_min) / (self.points - 1)


@dataclass(frozen=True)
class SystemConfig:
    ladder: TransitionLadder
    coupling: CollectiveCoupling
    cavity: CavityParams
    grid: Grid = field(default_factory=lambda: Grid(-30.0, 30.0, 2001))

    def __post_init__(self):
        if self.ladder.size != self.coupling.size:
            raise ValidationError(
                "coupling",
                f"{self.coupling.size} strengths given for {self.ladder.size} transitions",
            )

    def replace(self, **changes) -> "SystemConfig":
        from dataclasses import replace

        return replace(self, **changes)


def build_from_splittings(delta23: float, delta34: float, gammas: Sequence[float] = (1.0, 1.0, 1.0)) -> TransitionLadder:
    """Four-level ladder from the excited-state splittings (Gamma units).

    The |1> -> |4> transition is the zero of the probe-detuning axis, so the
    returned offsets are ``[-(delta34 + delta23), -delta34, 0]``.
    """
    for name, v in (("delta23", delta23), ("delta34", delta34)):
        if not math.isfinite(v) or v <= 0:
            raise ValidationError(name, f"must be > 0, got {v!r}")
    gammas = tuple(float(g) for g in gammas)
    if len(gammas) != 3:
        raise ValidationError("gammas", f"expected 3 decay rates, got {len(gammas)}")
    if any(not g > 0 for g in gammas):
        raise ValidationError("gammas", "all decay rates must be > 0")
    offsets = (-(delta34 + delta23), -delta34, 0.0)
    return TransitionLadder(offsets, gammas, ("|2>", "|3>", "|4>"))


HBAR = 1.054571817e-34  # J s
EPSILON_0 = 8.8541878128e-12  # F / m


def coupling_from_dipole(mu: float, omega_c: float, volume: float, hbar: float = HBAR, epsilon_0: float = EPSILON_0) -> float:
    """Single-atom coupling ``g = mu * sqrt(omega_c / (2 hbar eps0 V))``.

    SI units by default (mu in C m, omega_c in rad/s, V in m^3, g in rad/s);
    pass ``hbar`` and ``epsilon_0`` to work in another consistent system.
    """
    for name, v in (("mu", mu), ("omega_c", omega_c), ("volume", volume), ("hbar", hbar), ("epsilon_0", epsilon_0)):
        if not math.isfinite(v) or v <= 0:
            raise ValidationError(name, f"must be > 0, got {v!r}")
    return mu * math.sqrt(omega_c / (2.0 * hbar * epsilon_0 * volume))
