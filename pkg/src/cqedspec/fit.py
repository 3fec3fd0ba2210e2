"""
Least-squares estimation of coupling, cavity and calibration parameters from a
measured transmission spectrum.

The model for an observation at probe detuning ``x`` is::

    scale * |t(x - offset; G_i, kappa, delta_c)|**2

with ``t`` the normalized transmission of :mod:`cqedspec.response`.  The
transition ladder (resonance offsets and decay rates) is held fixed.

Coupling strengths and ``kappa`` are optimized as logarithms, which keeps them
positive without the optimizer sticking to a zero bound.  Bounds are always
given (and reported) in physical units; in the internal coordinates they are
enforced by projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .model import CavityParams, CollectiveCoupling, SystemConfig, TransitionLadder
from .response import susceptibility, transmission_amplitude

__all__ = [
    "FitProblem",
    "FitResult",
    "parameter_names",
    "model_intensity",
    "residuals",
    "jacobian",
    "fit_spectrum",
    "DEFAULT_BOUNDS",
]

DEFAULT_BOUNDS = {
    "G": (1e-6, 1e3),
    "kappa": (1e-6, 1e3),
    "delta_c": (-1e4, 1e4),
    "scale": (1e-12, 1e12),
    "offset": (-1e4, 1e4),
}


def parameter_names(n_transitions: int) -> tuple[str, ...]:
    """``G_common``, one ``G<k>`` per transition (excited levels numbered from 2), then cavity and calibration."""
    per = tuple(f"G{k + 2}" for k in range(n_transitions))
    return ("G_common",) + per + ("kappa", "delta_c", "scale", "offset")


def _is_log(name: str) -> bool:
    return name.startswith("G") or name == "kappa"


def _default_bounds(name: str) -> tuple[float, float]:
    return DEFAULT_BOUNDS["G" if name.startswith("G") else name]


@dataclass(frozen=True, eq=False)
class FitProblem:
    """Observations plus the parameter set-up of one fit.

    Parameters
    ----------
    dp, intensity : array_like
        Probe detunings (Gamma units) and measured intensities.
    ladder : TransitionLadder
        Fixed transition structure.
    free : sequence of str
        Names (see :func:`parameter_names`) optimized by the fit.
    fixed : mapping
        Values of parameters that are not free.  Unspecified ones default to
        ``scale=1`` and ``offset=0``; per-transition ``G<k>`` fall back to
        ``G_common`` unless given here or made free.
    initial : mapping
        Starting value of every free parameter.
    bounds : mapping, optional
        ``(lower, upper)`` per parameter; defaults in :data:`DEFAULT_BOUNDS`.
    weights : array_like, optional
        Per-point weights; the residual is multiplied by ``sqrt(weight)``.
    """

    dp: np.ndarray
    intensity: np.ndarray
    ladder: TransitionLadder
    free: tuple[str, ...]
    fixed: Mapping[str, float]
    initial: Mapping[str, float]
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    weights: np.ndarray | None = None

    def __post_init__(self):
        dp = np.asarray(self.dp, dtype=float).ravel()
        y = np.asarray(self.intensity, dtype=float).ravel()
        if dp.shape != y.shape:
            raise ValidationError("data", "dp and intensity differ in length")
        if not (np.all(np.isfinite(dp)) and np.all(np.isfinite(y))):
            raise ValidationError("data", "observations must be finite")
        names = parameter_names(self.ladder.size)
        free = tuple(self.free)
        unknown = [n for n in free + tuple(self.fixed) + tuple(self.initial) + tuple(self.bounds) if n not in names]
        if unknown:
            raise ValidationError("free", f"unknown parameter(s) {sorted(set(unknown))}; expected names from {names}")
        if not free:
            raise ValidationError("free", "at least one parameter must be free")
        if len(set(free)) != len(free):
            raise ValidationError("free", "duplicate parameter names")
        if "G_common" in free and all(f"G{k + 2}" in free or f"G{k + 2}" in self.fixed for k in range(self.ladder.size)):
            raise ValidationError("free", "G_common is free but every transition has its own coupling")
        if dp.size < len(free) + 2:
            raise ValidationError("data", f"need at least {len(free) + 2} points for {len(free)} free parameters")

        bounds = {}
        for name in names:
            lo, hi = (float(v) for v in self.bounds.get(name, _default_bounds(name)))
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValidationError(f"bounds.{name}", f"need finite lower < upper, got ({lo}, {hi})")
            if _is_log(name) and lo <= 0:
                raise ValidationError(f"bounds.{name}", "lower bound must be > 0 for a log-scaled parameter")
            bounds[name] = (lo, hi)

        fixed = {"scale": 1.0, "offset": 0.0}
        fixed.update({k: float(v) for k, v in self.fixed.items()})
        for name in free:
            fixed.pop(name, None)
        needs = ["kappa", "delta_c"]
        if any(f"G{k + 2}" not in free and f"G{k + 2}" not in fixed for k in range(self.ladder.size)):
            needs.append("G_common")
        missing = [n for n in needs if n not in free and n not in fixed]
        if missing:
            raise ValidationError("fixed", f"no value for parameter(s) {missing}")

        initial = {}
        for name in free:
            if name not in self.initial:
                raise ValidationError(f"initial.{name}", "missing starting value")
            v = float(self.initial[name])
            lo, hi = bounds[name]
            if not lo <= v <= hi:
                raise ValidationError(f"initial.{name}", f"{v} outside bounds ({lo}, {hi})")
            initial[name] = v

        w = None
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != dp.shape or np.any(~np.isfinite(w)) or np.any(w < 0):
                raise ValidationError("weights", "need one finite non-negative weight per point")
            w.setflags(write=False)
        dp.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "intensity", y)
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_config(cls, config: SystemConfig, dp, intensity, free: Sequence[str] = ("G_common", "kappa", "delta_c"),
                    initial: Mapping[str, float] | None = None, bounds=None, weights=None,
                    scale: float = 1.0, offset: float = 0.0) -> "FitProblem":
        """Problem whose fixed values and starting point come from ``config``."""
        names = parameter_names(config.ladder.size)
        unknown = sorted(set(free) - set(names))
        if unknown:
            raise ValidationError("free", f"unknown parameter(s) {unknown}; expected names from {names}")
        g = config.coupling.strengths
        base = {"kappa": config.cavity.kappa, "delta_c": config.cavity.delta_c, "scale": scale, "offset": offset}
        if "G_common" in free or len(set(g)) == 1:
            base["G_common"] = float(np.mean(g))
        if len(set(g)) > 1 or any(n.startswith("G") and n != "G_common" for n in free):
            base.update({f"G{k + 2}": v for k, v in enumerate(g) if "G_common" not in free or f"G{k + 2}" in free})
        start = {n: base[n] for n in free}
        start.update(initial or {})
        fixed = {k: v for k, v in base.items() if k not in free}
        return cls(dp, intensity, config.ladder, tuple(free), fixed, start, bounds or {}, weights)

    @property
    def n_free(self) -> int:
        return len(self.free)

    def full_parameters(self, values: Mapping[str, float]) -> dict[str, float]:
        """Complete parameter set with per-transition couplings resolved."""
        out = dict(self.fixed)
        out.update(values)
        for k in range(self.ladder.size):
            name = f"G{k + 2}"
            if name not in out:
                out[name] = out["G_common"]
        return out

    # internal coordinates -------------------------------------------------
    def _to_internal(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([math.log(values[n]) if _is_log(n) else float(values[n]) for n in self.free])

    def _to_physical(self, theta: np.ndarray) -> dict[str, float]:
        return {n: float(math.exp(t)) if _is_log(n) else float(t) for n, t in zip(self.free, theta)}

    def _internal_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([math.log(self.bounds[n][0]) if _is_log(n) else self.bounds[n][0] for n in self.free])
        hi = np.array([math.log(self.bounds[n][1]) if _is_log(n) else self.bounds[n][1] for n in self.free])
        return lo, hi


def model_intensity(ladder: TransitionLadder, params: Mapping[str, float], dp) -> np.ndarray:
    """``scale * |t(dp - offset)|**2``.

    Missing ``G<k>`` fall back to ``G_common``; ``scale`` and ``offset``
    default to 1 and 0.
    """
    x = np.asarray(dp, dtype=float) - params.get("offset", 0.0)
    coupling = CollectiveCoupling(tuple(params.get(f"G{k + 2}", params.get("G_common")) for k in range(ladder.size)))
    cavity = CavityParams(params["kappa"], params["delta_c"])
    t = transmission_amplitude(cavity, susceptibility(ladder, coupling, x), x)
    return params.get("scale", 1.0) * (t.real**2 + t.imag**2)


def _raw_residuals(problem: FitProblem, values: Mapping[str, float]) -> np.ndarray:
    r = model_intensity(problem.ladder, problem.full_parameters(values), problem.dp) - problem.intensity
    if problem.weights is not None:
        r = r * np.sqrt(problem.weights)
    return r


def residuals(problem: FitProblem, params: Mapping[str, float] | Sequence[float]) -> np.ndarray:
    """Model minus observation at every data point, for values of the free parameters."""
    if not isinstance(params, Mapping):
        vec = np.asarray(params, dtype=float).ravel()
        if vec.size != problem.n_free:
            raise ValidationError("params", f"expected {problem.n_free} values in the order {problem.free}")
        params = dict(zip(problem.free, vec))
    for name in problem.free:
        if name not in params:
            raise ValidationError(f"params.{name}", "missing value")
        lo, hi = problem.bounds[name]
        if not lo <= params[name] <= hi:
            raise ValidationError(f"params.{name}", f"{params[name]} outside bounds ({lo}, {hi})")
    return _raw_residuals(problem, {n: float(params[n]) for n in problem.free})


def jacobian(problem: FitProblem, params: Mapping[str, float], step: float = 1e-6, scheme: str = "central") -> np.ndarray:
    """Finite-difference Jacobian of :func:`residuals` in physical units.

    The step for parameter ``p`` is ``step * max(1, |p|)``.
    """
    base = {n: float(params[n]) for n in problem.free}
    cols = []
    r0 = _raw_residuals(problem, base) if scheme == "forward" else None
    for name in problem.free:
        h = step * max(1.0, abs(base[name]))
        up = dict(base, **{name: base[name] + h})
        if scheme == "central":
            down = dict(base, **{name: base[name] - h})
            cols.append((_raw_residuals(problem, up) - _raw_residuals(problem, down)) / (2 * h))
        elif scheme == "forward":
            cols.append((_raw_residuals(problem, up) - r0) / h)
        else:
            raise ValidationError("scheme", f"unknown scheme {scheme!r}")
    return np.column_stack(cols)


def _internal_jacobian(problem, theta, step=1e-6):
    cols = []
    for j in range(theta.size):
        h = step * max(1.0, abs(theta[j]))
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        cols.append((_raw_residuals(problem, problem._to_physical(tp)) - _raw_residuals(problem, problem._to_physical(tm))) / (2 * h))
    return np.column_stack(cols)


@dataclass(frozen=True)
class FitResult:
    parameters: dict[str, float]  # complete set, fitted and fixed
    free: tuple[str, ...]
    residual_rms: float
    iterations: int
    converged: bool
    jacobian_condition: float
    message: str
    history: tuple[float, ...] = ()  # residual norm after every accepted step

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "message": self.message,
            "iterations": self.iterations,
            "residual_rms": self.residual_rms,
            "jacobian_condition": self.jacobian_condition,
            "free": list(self.free),
            "parameters": dict(self.parameters),
        }


def fit_spectrum(problem: FitProblem, max_iter: int = 500, xtol: float = 1e-10, gtol: float = 1e-8) -> FitResult:
    """Projected Levenberg-Marquardt fit.

    A trial step is accepted only if it lowers the residual norm, so the
    accepted norms never increase.  Converged when an accepted step changes
    the norm by less than ``xtol`` relative, or when the max-norm of the
    projected gradient (internal coordinates) drops below ``gtol``.  Hitting
    ``max_iter`` returns a non-converged result rather than raising.
    """
    lo, hi = problem._internal_bounds()
    theta = np.clip(problem._to_internal(problem.initial), lo, hi)
    r = _raw_residuals(problem, problem._to_physical(theta))
    norm = float(np.linalg.norm(r))
    history = [norm]
    mu = 1e-3
    converged = False
    message = f"iteration limit ({max_iter}) reached"
    J = _internal_jacobian(problem, theta)
    it = 0
    while it < max_iter:
        it += 1
        g = J.T @ r
        g_proj = np.where(((theta <= lo) & (g > 0)) | ((theta >= hi) & (g < 0)), 0.0, g)
        if np.max(np.abs(g_proj)) < gtol:
            converged, message = True, "gradient below tolerance"
            break
        if norm == 0.0:
            converged, message = True, "exact fit"
            break
        jtj_diag = np.maximum(np.einsum("ij,ij->j", J, J), 1e-300)
        accepted = False
        while mu < 1e20:
            damp = np.sqrt(mu * jtj_diag)
            a = np.vstack([J, np.diag(damp)])
            rhs = np.concatenate([-r, np.zeros(theta.size)])
            step = np.linalg.lstsq(a, rhs, rcond=None)[0]
            trial = np.clip(theta + step, lo, hi)
            r_new = _raw_residuals(problem, problem._to_physical(trial))
            norm_new = float(np.linalg.norm(r_new))
            if np.isfinite(norm_new) and norm_new < norm:
                accepted = True
                break
            mu *= 4.0
        if not accepted:
            message = "no decrease possible within damping limit"
            break
        rel = (norm - norm_new) / norm
        theta, r, norm = trial, r_new, norm_new
        history.append(norm)
        mu = max(mu / 3.0, 1e-15)
        J = _internal_jacobian(problem, theta)
        if rel < xtol:
            converged, message = True, "relative residual change below tolerance"
            break

    values = problem._to_physical(theta)
    cond = float(np.linalg.cond(J)) if np.all(np.isfinite(J)) else float("inf")
    return FitResult(
        parameters=problem.full_parameters(values),
        free=problem.free,
        residual_rms=float(norm / math.sqrt(problem.dp.size)),
        iterations=it,
        converged=converged,
        jacobian_condition=cond,
        message=message,
        history=tuple(history),
    )
