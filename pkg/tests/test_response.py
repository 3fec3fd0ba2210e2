import numpy as np
import pytest

from cqedspec import (
    CavityParams,
    CollectiveCoupling,
    Grid,
    NumericalError,
    Spectrum,
    SystemConfig,
    TransitionLadder,
    ValidationError,
    scan_spectrum,
    susceptibility,
    transmission_amplitude,
)
from cqedspec.response import scan_susceptibility, transmission

from conftest import theory_config

# 40-digit mpmath sums of the three Lorentzian terms, frozen
CHI_FIG6_AT_ZERO = complex(-3.368451789505149446, 40.645947561728309637)
I_FIG2A_AT_ZERO = 0.002598571657633308006


def random_system(rng, m=None):
    m = m or int(rng.integers(1, 5))
    offsets = np.sort(rng.uniform(-30, 10, m))
    offsets += np.arange(m) * 1e-3  # keep strictly increasing
    ladder = TransitionLadder(tuple(offsets), tuple(rng.uniform(0.2, 3.0, m)))
    coupling = CollectiveCoupling(tuple(rng.uniform(0.0, 12.0, m)))
    cavity = CavityParams(rng.uniform(0.2, 5.0), rng.uniform(-20, 20))
    return SystemConfig(ladder, coupling, cavity, Grid(-60.0, 40.0, 501))


def test_chi_fig6_oracle():
    cfg = theory_config(g=4.5)
    chi = susceptibility(cfg.ladder, cfg.coupling, 0.0)
    assert isinstance(chi, complex)
    assert abs(chi - CHI_FIG6_AT_ZERO) < 1e-12 * abs(CHI_FIG6_AT_ZERO)


def test_intensity_fig2a_oracle(fig2a):
    assert transmission(fig2a, 0.0) == pytest.approx(I_FIG2A_AT_ZERO, rel=1e-12)


def test_empty_cavity_is_lorentzian():
    cfg = theory_config(g=0.0, delta_c=-3.0, kappa=1.5)
    s = scan_spectrum(cfg)
    expected = 1.5**2 / (1.5**2 + (-3.0 - s.dp) ** 2)
    np.testing.assert_allclose(s.intensity, expected, rtol=0, atol=1e-12)


def test_passivity_and_boundedness(rng):
    for _ in range(200):
        cfg = random_system(rng)
        dp = cfg.grid.values()
        chi = susceptibility(cfg.ladder, cfg.coupling, dp)
        assert np.all(chi.imag >= 0)
        inten = transmission(cfg, dp)
        assert np.all(inten > 0) and np.all(inten <= 1 + 1e-12)


def test_chi_decays_far_from_resonance():
    cfg = theory_config()
    near = abs(susceptibility(cfg.ladder, cfg.coupling, 1e3))
    far = abs(susceptibility(cfg.ladder, cfg.coupling, 1e5))
    assert far < near / 50
    # asymptotically -sum G^2 / dp
    assert susceptibility(cfg.ladder, cfg.coupling, 1e6).real == pytest.approx(-3 * 4.3**2 / 1e6, rel=1e-4)


def test_translation_covariance(rng):
    for _ in range(50):
        cfg = random_system(rng)
        s = rng.uniform(-10, 10)
        dp = rng.uniform(-40, 40, 20)
        shifted = cfg.replace(
            ladder=cfg.ladder.shifted(s),
            cavity=CavityParams(cfg.cavity.kappa, cfg.cavity.delta_c + s),
        )
        np.testing.assert_allclose(transmission(shifted, dp + s), transmission(cfg, dp), rtol=1e-10, atol=1e-13)


def test_single_transition_symmetry():
    lad = TransitionLadder((0.0,), (1.0,))
    cfg = SystemConfig(lad, CollectiveCoupling((6.0,)), CavityParams(2.0, 0.0), Grid(-30, 30, 601))
    s = scan_spectrum(cfg)
    np.testing.assert_allclose(s.intensity, s.intensity[::-1], rtol=1e-12, atol=1e-15)
    chi = susceptibility(lad, cfg.coupling, np.array([-3.0, 3.0]))
    assert chi[0].imag == pytest.approx(chi[1].imag, rel=1e-14)
    assert chi[0].real == pytest.approx(-chi[1].real, rel=1e-14)


def test_fig6_dispersion_changes_sign_near_each_offset():
    cfg = theory_config(g=4.5)
    for off in cfg.ladder.offsets:
        lo = susceptibility(cfg.ladder, cfg.coupling, off - 0.5).real
        hi = susceptibility(cfg.ladder, cfg.coupling, off + 0.5).real
        assert lo * hi < 0


def test_amplitude_normalization():
    cav = CavityParams(2.0, 1.0)
    assert transmission_amplitude(cav, 0.0, 1.0) == pytest.approx(1.0)


def test_spectrum_is_immutable(fig2a):
    s = scan_spectrum(fig2a)
    assert len(s) == 4501
    with pytest.raises(ValueError):
        s.intensity[0] = 2.0


def test_spectrum_requires_increasing_grid():
    with pytest.raises(ValidationError):
        Spectrum.from_intensity([0.0, 0.0, 1.0], [0.1, 0.2, 0.3])


def test_scan_susceptibility_shape(fig2a):
    dp, chi = scan_susceptibility(fig2a)
    assert dp.shape == chi.shape == (4501,)


def test_negative_coupling_rejected_before_scan():
    with pytest.raises(ValidationError):
        CollectiveCoupling((-1.0,))


def test_numerical_error_type():
    assert issubclass(NumericalError, ArithmeticError)
