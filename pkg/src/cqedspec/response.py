"""
Weak-probe steady-state observables: atomic susceptibility and cavity transmission.

The susceptibility of the ensemble is a sum of complex Lorentzians, one per
cavity-coupled transition::

    chi(dp) = sum_i  i G_i**2 / (gamma_i/2 - i (dp - offset_i))

and the transmitted field, normalized to the empty cavity on resonance, is::

    t(dp) = kappa / (kappa + i (delta_c - dp) - i chi(dp))

Both functions broadcast over arrays of probe detunings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .model import CavityParams, CollectiveCoupling, SystemConfig, TransitionLadder

__all__ = ["Spectrum", "susceptibility", "transmission_amplitude", "transmission", "scan_spectrum", "scan_susceptibility"]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sampled transmission spectrum.

    ``amplitude`` is the complex transmitted field relative to the resonant
    empty cavity, ``intensity`` is ``|amplitude|**2``.
    """

    dp: np.ndarray
    amplitude: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        dp = np.asarray(self.dp, dtype=float)
        amp = np.asarray(self.amplitude, dtype=complex)
        inten = np.asarray(self.intensity, dtype=float)
        if dp.ndim != 1 or amp.shape != dp.shape or inten.shape != dp.shape:
            raise ValidationError("spectrum", "dp, amplitude and intensity must be 1-D and of equal length")
        if dp.size > 1 and np.any(np.diff(dp) <= 0):
            raise ValidationError("spectrum.dp", "must be strictly increasing")
        for name, arr in (("dp", dp), ("amplitude", amp), ("intensity", inten)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_intensity(cls, dp, intensity) -> "Spectrum":
        """Wrap a measured or synthetic intensity trace (phase unknown, taken as zero)."""
        inten = np.asarray(intensity, dtype=float)
        return cls(np.asarray(dp, dtype=float), np.sqrt(np.clip(inten, 0.0, None)).astype(complex), inten)

    def __len__(self):
        return self.dp.size


def susceptibility(ladder: TransitionLadder, coupling: CollectiveCoupling, dp):
    """Complex collective susceptibility chi (Gamma units) at probe detuning(s) ``dp``."""
    if ladder.size != coupling.size:
        raise ValidationError("coupling", f"{coupling.size} strengths given for {ladder.size} transitions")
    dp = np.asarray(dp, dtype=float)
    offsets = np.asarray(ladder.offsets)
    half_widths = 0.5 * np.asarray(ladder.decays)
    g2 = np.square(coupling.strengths)
    terms = 1j * g2 / (half_widths - 1j * (dp[..., None] - offsets))
    chi = terms.sum(axis=-1)
    return chi if chi.ndim else complex(chi)


def transmission_amplitude(cavity: CavityParams, chi, dp):
    """Transmitted field relative to the empty cavity on resonance."""
    dp = np.asarray(dp, dtype=float)
    t = cavity.kappa / (cavity.kappa + 1j * (cavity.delta_c - dp) - 1j * np.asarray(chi))
    return t if np.ndim(t) else complex(t)


def transmission(config: SystemConfig, dp):
    """Normalized transmitted intensity at ``dp`` (convenience wrapper)."""
    chi = susceptibility(config.ladder, config.coupling, dp)
    return np.abs(transmission_amplitude(config.cavity, chi, dp)) ** 2


def scan_spectrum(config: SystemConfig) -> Spectrum:
    """Evaluate the normalized transmission on the configured uniform grid."""
    dp = config.grid.values()
    chi = susceptibility(config.ladder, config.coupling, dp)
    amp = transmission_amplitude(config.cavity, chi, dp)
    intensity = amp.real**2 + amp.imag**2
    # |t| <= 1 follows from Re(denominator) = kappa + Im chi >= kappa
    if not np.all((intensity > 0) & (intensity <= 1.0 + 1e-12)):
        raise NumericalError("transmission left the interval (0, 1]; check inputs for overflow")
    return Spectrum(dp, amp, intensity)


def scan_susceptibility(config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    dp = config.grid.values()
    return dp, susceptibility(config.ladder, config.coupling, dp)
