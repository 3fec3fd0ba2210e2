"""Peak picking on sampled spectra and peak-to-normal-mode matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .modes import PolaritonModes
from .response import Spectrum

__all__ = ["Peak", "PeakMatch", "DEFAULT_MIN_PROMINENCE", "find_peaks", "prominences", "match_peaks_to_modes", "spectrum_distance"]

DEFAULT_MIN_PROMINENCE = 0.005


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    prominence: float
    index: int  # grid index of the discrete maximum


def prominences(y: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    """Topographic prominence of each peak within the sampled window.

    Height minus the higher of the two minima between the peak and the
    nearest strictly higher sample (or window edge) on each side.
    """
    if len(peaks) == 0:
        return np.empty(0)
    return signal.peak_prominences(y, np.asarray(peaks, dtype=np.intp))[0]


def _parabolic_vertex(x, y, i):
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    curv = (d12 - d01) / (x2 - x0)
    if curv >= 0:
        return x1, y1
    # Newton form p(x) = y0 + d01 (x - x0) + curv (x - x0)(x - x1)
    xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv)
    xv = min(max(xv, x0), x2)
    yv = y0 + d01 * (xv - x0) + curv * (xv - x0) * (xv - x1)
    return xv, yv


def find_peaks(spectrum: Spectrum, min_prominence: float = DEFAULT_MIN_PROMINENCE) -> list[Peak]:
    """Strict local maxima of ``spectrum.intensity`` with sub-grid refinement.

    Positions and heights come from the parabola through the maximum and its
    two neighbours.  Peaks with prominence below ``min_prominence`` are dropped.
    """
    if min_prominence < 0:
        raise ValidationError("min_prominence", "must be >= 0")
    x = np.asarray(spectrum.dp)
    y = np.asarray(spectrum.intensity)
    if y.size < 3:
        raise ValidationError("spectrum", "need at least 3 samples to find peaks")
    core = (y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])
    idx = np.flatnonzero(core) + 1
    prom = prominences(y, idx)
    peaks = []
    for i, p in zip(idx, prom):
        if p < min_prominence:
            continue
        xv, yv = _parabolic_vertex(x, y, i)
        peaks.append(Peak(float(xv), float(yv), float(p), int(i)))
    return sorted(peaks, key=lambda pk: pk.position)


@dataclass(frozen=True)
class PeakMatch:
    """Optimal one-to-one pairing between peaks and mode eigenvalues.

    ``pairs`` holds ``(peak_index, mode_index, residual)`` with
    ``residual = peak position - eigenvalue``; pairs farther apart than the
    tolerance are reported as unmatched instead.
    """

    pairs: tuple[tuple[int, int, float], ...]
    unmatched_peaks: tuple[int, ...]
    unmatched_modes: tuple[int, ...]
    tol: float

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r for _, _, r in self.pairs])

    @property
    def complete(self) -> bool:
        return not self.unmatched_peaks and not self.unmatched_modes


def match_peaks_to_modes(peaks, modes: PolaritonModes | np.ndarray, tol: float = np.inf) -> PeakMatch:
    positions = np.array([p.position if isinstance(p, Peak) else float(p) for p in peaks])
    eig = np.asarray(modes.eigenvalues if isinstance(modes, PolaritonModes) else modes, dtype=float)
    if positions.size == 0 or eig.size == 0:
        return PeakMatch((), tuple(range(positions.size)), tuple(range(eig.size)), tol)
    cost = np.abs(positions[:, None] - eig[None, :])
    rows, cols = linear_sum_assignment(cost)
    pairs = []
    for r, c in zip(rows, cols):
        res = positions[r] - eig[c]
        if abs(res) <= tol:
            pairs.append((int(r), int(c), float(res)))
    used_p = {p for p, _, _ in pairs}
    used_m = {m for _, m, _ in pairs}
    return PeakMatch(
        tuple(sorted(pairs)),
        tuple(i for i in range(positions.size) if i not in used_p),
        tuple(i for i in range(eig.size) if i not in used_m),
        tol,
    )


def spectrum_distance(s1: Spectrum, s2: Spectrum) -> float:
    """Root-mean-square intensity difference between two spectra on one grid."""
    if s1.dp.shape != s2.dp.shape or not np.array_equal(s1.dp, s2.dp):
        raise ValidationError("grid", "spectra must share an identical probe-detuning grid")
    return float(np.sqrt(np.mean((s1.intensity - s2.intensity) ** 2)))
