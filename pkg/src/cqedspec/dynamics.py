"""
Time-domain integration of the weak-probe equations of motion.

With all atoms in the ground state the cavity field ``a`` and the atomic
coherences ``s_i`` (one per transition, collective normalization folded into
G_i) obey a driven linear system ``dv/dt = A v + b``::

    da/dt   = -[kappa + i (delta_c - dp)] a + i sum_i G_i s_i + drive
    ds_i/dt = -[gamma_i/2 - i (dp - offset_i)] s_i + i G_i a

whose steady state reproduces the closed-form cavity field of
:mod:`cqedspec.response`.  Time is in units of 1/Gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .model import SystemConfig

__all__ = ["LinearSystem", "Trajectory", "linear_system", "integrate", "steady_state", "cavity_transmission"]

# RK4's stability boundary is ~2.785 on the negative real axis and ~2.828 on
# the imaginary one; stay a little inside both.
RK4_STABILITY_LIMIT = 2.6


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``dv/dt = A v + b`` with state ordering ``[a, s_1, ..., s_M]``."""

    A: np.ndarray
    b: np.ndarray
    check_stable: bool = True

    def __post_init__(self):
        A = np.array(self.A, dtype=complex)
        b = np.array(self.b, dtype=complex).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.size:
            raise ValidationError("A", "need a square matrix matching the drive vector")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if self.check_stable and self.max_real_eigenvalue() >= 0:
            raise NumericalError(f"linear system is not stable (max Re eig = {self.max_real_eigenvalue():.3g})")

    @property
    def dim(self) -> int:
        return self.b.size

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def max_real_eigenvalue(self) -> float:
        return float(self.eigenvalues().real.max())

    def scaled(self, alpha: complex) -> "LinearSystem":
        return LinearSystem(self.A, alpha * self.b, self.check_stable)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)

    def __post_init__(self):
        if self.times.shape[0] != self.states.shape[0]:
            raise ValidationError("trajectory", "times and states differ in length")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def cavity(self) -> np.ndarray:
        return self.states[:, 0]


def linear_system(config: SystemConfig, dp: float) -> LinearSystem:
    """Build the linearized equations of motion at probe detuning ``dp``."""
    ladder, coupling, cavity = config.ladder, config.coupling, config.cavity
    m = ladder.size
    g = np.asarray(coupling.strengths)
    A = np.zeros((m + 1, m + 1), dtype=complex)
    A[0, 0] = -(cavity.kappa + 1j * (cavity.delta_c - dp))
    A[0, 1:] = 1j * g
    A[1:, 0] = 1j * g
    A[1:, 1:] = np.diag(-(0.5 * np.asarray(ladder.decays) - 1j * (dp - np.asarray(ladder.offsets))))
    b = np.zeros(m + 1, dtype=complex)
    b[0] = cavity.drive
    return LinearSystem(A, b)


def steady_state(sys: LinearSystem) -> np.ndarray:
    """Fixed point of the system, i.e. the solution of ``A v = -b``."""
    try:
        v = np.linalg.solve(sys.A, -sys.b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"steady state: singular system ({exc})") from exc
    if not np.all(np.isfinite(v)):
        raise NumericalError("steady state: non-finite solution")
    return v


def cavity_transmission(config: SystemConfig, state: np.ndarray) -> complex:
    """Cavity amplitude of ``state`` on the normalized transmission scale."""
    return complex(state[0] * config.cavity.kappa / config.cavity.drive)


def _rk4_propagator(A: np.ndarray, dt: float):
    """One classical RK4 step for ``v' = A v + b`` written as ``v -> S v + T b``.

    For an autonomous linear system the four stages collapse exactly into the
    truncated exponential series below, so stepping costs one mat-vec.
    """
    n = A.shape[0]
    h = dt * A
    eye = np.eye(n)
    h2 = h @ h
    h3 = h2 @ h
    S = eye + h + h2 / 2 + h3 / 6 + (h3 @ h) / 24
    T = dt * (eye + h / 2 + h2 / 6 + h3 / 24)
    return S, T


def integrate(sys: LinearSystem, v0, dt: float, t_end: float, record_every: int = 1) -> Trajectory:
    """Fixed-step classical RK4 from ``t = 0`` to ``t_end``.

    ``t_end`` is reached exactly; the last step is shortened when ``t_end``
    is not a multiple of ``dt``.  Every ``record_every``-th step is stored,
    together with the initial and the final state.
    """
    if not dt > 0:
        raise ValidationError("dt", f"must be > 0, got {dt!r}")
    if not t_end >= dt:
        raise ValidationError("t_end", f"must be >= dt, got {t_end!r}")
    if int(record_every) < 1:
        raise ValidationError("record_every", "must be >= 1")
    v = np.array(v0, dtype=complex).ravel()
    if v.size != sys.dim:
        raise ValidationError("v0", f"expected {sys.dim} components, got {v.size}")

    radius = float(np.abs(sys.eigenvalues()).max()) if sys.dim else 0.0
    if dt * radius > RK4_STABILITY_LIMIT:
        suggested = 0.5 * RK4_STABILITY_LIMIT / radius
        raise NumericalError(
            f"dt={dt:g} is unstable for this system (|eig| up to {radius:.4g}); use dt <= {suggested:.3g}"
        )

    n_full = int(np.floor(t_end / dt * (1 + 1e-12)))
    rest = t_end - n_full * dt
    if rest <= 1e-12 * t_end:
        rest = 0.0
    S, T = _rk4_propagator(sys.A, dt)
    kick = T @ sys.b

    times = [0.0]
    states = [v.copy()]
    for k in range(1, n_full + 1):
        v = S @ v + kick
        if k % record_every == 0 or k == n_full:
            times.append(t_end if (k == n_full and rest == 0.0) else k * dt)
            states.append(v)
    if rest > 0.0:
        S_r, T_r = _rk4_propagator(sys.A, rest)
        v = S_r @ v + T_r @ sys.b
        times.append(t_end)
        states.append(v)
    if not np.all(np.isfinite(v)):
        raise NumericalError("integration produced non-finite values")
    return Trajectory(np.array(times), np.array(states))
