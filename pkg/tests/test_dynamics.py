import numpy as np
import pytest

from cqedspec import (
    CavityParams,
    CollectiveCoupling,
    LinearSystem,
    NumericalError,
    ValidationError,
    integrate,
    linear_system,
    steady_state,
)
from cqedspec.dynamics import cavity_transmission
from cqedspec.response import susceptibility, transmission_amplitude

from conftest import theory_config
from test_response import random_system


def closed_form(cfg, dp):
    chi = susceptibility(cfg.ladder, cfg.coupling, dp)
    return transmission_amplitude(cfg.cavity, chi, dp)


def test_zero_drive_zero_state_stays_zero(fig2a):
    sys_ = linear_system(fig2a, 1.0).scaled(0.0)
    traj = integrate(sys_, np.zeros(4), 0.05, 10.0)
    assert np.all(traj.states == 0)


def test_scalar_decay_matches_exponential():
    traj = integrate(LinearSystem([[-1.0]], [0.0]), [1.0], 0.01, 1.0)
    assert traj.times[-1] == 1.0
    assert abs(traj.final[0] - np.exp(-1.0)) < 1e-9


def test_oscillating_decay():
    sys_ = LinearSystem([[-1.0 + 2.0j]], [0.0])
    traj = integrate(sys_, [1.0], 0.01, 3.0)
    exact = np.exp((-1.0 + 2.0j) * traj.times)
    # local error ~ |lam dt|^5 / 120 per step, |lam| = sqrt(5)
    assert np.max(np.abs(traj.states[:, 0] - exact)) < 1e-8


def test_fourth_order_convergence():
    lam = -1.0 + 2.0j
    sys_ = LinearSystem([[lam]], [0.5])
    exact = (1.0 + 0.5 / lam) * np.exp(lam * 2.0) - 0.5 / lam
    errs = [abs(integrate(sys_, [1.0], dt, 2.0).final[0] - exact) for dt in (0.1, 0.05)]
    assert errs[0] / errs[1] >= 12


def test_linearity_in_drive(fig2a):
    sys_ = linear_system(fig2a, -3.0)
    a = integrate(sys_, np.zeros(4), 0.05, 20.0).final
    b = integrate(sys_.scaled(2.5 - 1j), np.zeros(4), 0.05, 20.0).final
    np.testing.assert_allclose(b, (2.5 - 1j) * a, rtol=1e-12, atol=1e-15)


def test_ends_exactly_at_t_end(fig2a):
    traj = integrate(linear_system(fig2a, 0.0), np.zeros(4), 0.03, 1.0, record_every=7)
    assert traj.times[0] == 0.0 and traj.times[-1] == 1.0
    assert np.all(np.diff(traj.times) > 0)


def test_system_is_stable(rng):
    for _ in range(50):
        cfg = random_system(rng)
        assert linear_system(cfg, rng.uniform(-30, 30)).max_real_eigenvalue() < 0


def test_steady_state_equals_closed_form(rng):
    for _ in range(20):
        cfg = random_system(rng)
        dp = rng.uniform(-30, 30)
        t = cavity_transmission(cfg, steady_state(linear_system(cfg, dp)))
        ref = closed_form(cfg, dp)
        assert abs(t - ref) <= 1e-12 * abs(ref)


def test_driven_steady_state_reached(fig2a):
    sys_ = linear_system(fig2a, -2.7)
    traj = integrate(sys_, np.zeros(4), 0.02, 200.0, record_every=1000)
    ref = closed_form(fig2a, -2.7)
    assert abs(cavity_transmission(fig2a, traj.final) - ref) < 1e-6 * abs(ref)


def test_unstable_step_rejected(fig2a):
    with pytest.raises(NumericalError):
        integrate(linear_system(fig2a, 0.0), np.zeros(4), 5.0, 10.0)


def test_growing_system_rejected():
    with pytest.raises(NumericalError):
        LinearSystem([[0.1]], [1.0])
    assert LinearSystem([[0.1]], [1.0], check_stable=False).dim == 1


def test_bad_arguments(fig2a):
    sys_ = linear_system(fig2a, 0.0)
    with pytest.raises(ValidationError):
        integrate(sys_, np.zeros(4), 0.0, 1.0)
    with pytest.raises(ValidationError):
        integrate(sys_, np.zeros(3), 0.1, 1.0)
    with pytest.raises(ValidationError):
        integrate(sys_, np.zeros(4), 0.1, 1.0, record_every=0)


def test_drive_normalization():
    cfg = theory_config(g=0.0).replace(cavity=CavityParams(2.0, 0.0, drive=3.0))
    v = steady_state(linear_system(cfg, 0.0))
    assert cavity_transmission(cfg, v) == pytest.approx(1.0)
    assert v[0] == pytest.approx(1.5)


def test_atomic_coherence_sign():
    # s = i G a / (gamma/2 - i(dp - offset)) at steady state
    cfg = theory_config(g=3.0)
    v = steady_state(linear_system(cfg, 1.0))
    G = np.array(cfg.coupling.strengths)
    off = np.array(cfg.ladder.offsets)
    np.testing.assert_allclose(v[1:], 1j * G * v[0] / (0.5 - 1j * (1.0 - off)), rtol=1e-12)
    assert CollectiveCoupling.uniform(3.0, 3).size == 3
