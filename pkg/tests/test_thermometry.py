import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from ioncrystal.constants import TWO_PI, YB171
from ioncrystal.errors import InvalidRatio, ValidationError
from ioncrystal.modes import pseudopotential_modes
from ioncrystal.thermometry import (FWHM_PER_SIGMA, LineProfile, doppler_fwhm, doppler_fwhm_hz, extract_ratio,
                                    fit_heating_rate, fit_voigt, flop_curves, heating_conversions,
                                    heating_from_noise, lorentz_fwhm, ratio_to_nbar, sideband_flops,
                                    synthetic_scan, temperature_from_doppler, thermal_populations,
                                    uncorrelated_mode_scaling, voigt_fwhm, voigt_profile, voigt_shape)

THETA = math.pi / 4
L = lorentz_fwhm(YB171.natural_linewidth, 0.3)


def test_power_broadened_width():
    assert L / TWO_PI == pytest.approx(22.347e6, rel=1e-4)
    assert lorentz_fwhm(YB171.natural_linewidth, 0.0) == YB171.natural_linewidth
    with pytest.raises(ValueError):
        lorentz_fwhm(1.0, -0.1)


def test_doppler_width_at_3mk():
    assert doppler_fwhm_hz(3e-3, 3e-3, THETA) == pytest.approx(2.434e6, rel=1e-3)
    with pytest.raises(ValueError):
        doppler_fwhm_hz(-1.0, 0.0, THETA)


@given(st.floats(1e-4, 10.0), st.floats(0.0, 1.0), st.floats(0.05, 1.5))
def test_doppler_width_inverts(T_r, T_z, theta):
    g = doppler_fwhm(T_r, T_z, theta)
    assert temperature_from_doppler(g, theta, T_z) == pytest.approx(T_r, rel=1e-9, abs=1e-12)


def _convolution(x, g, lw):
    s = g / FWHM_PER_SIGMA
    gamma = lw / 2
    f = lambda u: np.exp(-u**2 / (2 * s**2)) * gamma**2 / ((x - u) ** 2 + gamma**2)  # noqa: E731
    return quad(f, -12 * s, 12 * s, points=[x] if abs(x) < 12 * s else None, limit=200)[0]


@pytest.mark.parametrize("g", [0.2 * L, L, 4 * L])
def test_voigt_matches_direct_convolution(g):
    xs = np.array([0.0, 0.3, 1.0, 2.5]) * L
    direct = np.array([_convolution(x, g, L) for x in xs])
    assert voigt_shape(xs, g, L) == pytest.approx(direct / direct[0], rel=1e-7)


def test_voigt_reduces_to_lorentzian():
    x = np.linspace(-3, 3, 7) * L
    assert voigt_shape(x, 0.0, L) == pytest.approx((L / 2) ** 2 / (x**2 + (L / 2) ** 2), rel=1e-14)


@given(st.floats(0.0, 20.0))
def test_voigt_fwhm_bounds(ratio):
    g = ratio * L
    w = voigt_fwhm(g, L)
    assert max(g, L) * (1 - 1e-9) <= w <= (g + L) * (1 + 1e-9)
    assert voigt_shape(0.5 * w, g, L) == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=10)
@given(st.floats(1e-3, 1.0))
def test_noise_free_fit_recovers_temperature(T_r):
    total = voigt_fwhm(doppler_fwhm(T_r, 0.0, THETA), L)
    grid = np.linspace(-4 * total, 4 * total, 2001)
    fit = fit_voigt(voigt_profile(grid, T_r, 0.0, THETA, amplitude=2.0, background=0.1, center=0.1 * L), L)
    assert fit.T_r == pytest.approx(T_r, rel=1e-4)
    assert fit.center == pytest.approx(0.1 * L, rel=1e-6)
    assert not fit.upper_bound


def test_noisy_fit_error_bar_is_honest():
    prof = synthetic_scan(0.1, noise=0.01, n_points=4001, rng=2)
    fit = fit_voigt(prof, L)
    assert abs(fit.T_r - 0.1) < 4 * fit.T_r_err


def test_unresolved_doppler_width_gives_upper_bound():
    grid = np.linspace(-4 * L, 4 * L, 2001)
    prof = voigt_profile(grid, 0.0, 0.0, THETA)
    prof.intensities = prof.intensities + 0.01 * np.random.default_rng(0).standard_normal(len(grid))
    fit = fit_voigt(prof, L)
    assert fit.upper_bound
    assert fit.T_r >= 0 and math.isnan(fit.T_r_err)


def test_narrow_scan_rejected():
    grid = np.linspace(-L, L, 101)
    with pytest.raises(ValidationError):
        fit_voigt(voigt_profile(grid, 1e-3, 0.0), L)


def test_profile_grid_validation():
    with pytest.raises(ValidationError):
        LineProfile(np.array([0.0, 0.0, 1.0]), np.ones(3), 1, 0, L, 0, 0)


def test_heating_rate_fit():
    t = np.array([0.0, 1e-3, 2e-3, 5e-3])
    rate, err, t0 = fit_heating_rate(t, 3e-3 + 0.4 * t)
    assert rate == pytest.approx(0.4, rel=1e-10) and t0 == pytest.approx(3e-3, rel=1e-10)
    rate_w, err_w, _ = fit_heating_rate(t, 3e-3 + 0.4 * t, errors=np.full(4, 1e-4))
    assert rate_w == pytest.approx(0.4, rel=1e-10) and err_w > 0
    with pytest.raises(ValidationError):
        fit_heating_rate([0.0], [1.0])


# ---------------------------------------------------------------- sidebands

def test_thermal_populations_normalised_with_small_tail():
    for nbar in (0.0, 0.05, 1.0, 20.0):
        n, p = thermal_populations(nbar)
        assert p.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.sum(n * p) == pytest.approx(nbar, rel=1e-6, abs=1e-12)
    with pytest.raises(ValueError):
        thermal_populations(-1.0)


def test_ground_state_has_no_red_sideband():
    t = np.linspace(0, 60e-6, 61)
    red, blue = flop_curves(0.0, 0.1, TWO_PI * 100e3, t)
    assert np.abs(red).max() == 0
    assert blue.max() > 0.5


@given(st.floats(0.0, 20.0))
def test_ratio_matches_thermal_value(nbar):
    eta, rabi = 0.1, TWO_PI * 100e3
    t = np.linspace(0, 0.3 / (eta * rabi * math.sqrt(nbar + 1)), 60)
    red, blue = flop_curves(nbar, eta, rabi, t)
    assert extract_ratio(t, red, blue) == pytest.approx(nbar / (nbar + 1), abs=1e-3)


def test_sideband_scan_recovers_nbar():
    scan = sideband_flops(0.5, 0.05, TWO_PI * 100e3, np.linspace(0, 20e-6, 80))
    assert scan.nbar == pytest.approx(0.5, rel=1e-3)


def test_lamb_dicke_warning():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        sideband_flops(50.0, 0.1, TWO_PI * 100e3, np.linspace(0, 2e-6, 30))
    assert any("Lamb-Dicke" in str(w.message) for w in rec)


def test_ratio_to_nbar():
    assert ratio_to_nbar(0.5) == pytest.approx(1.0)
    assert ratio_to_nbar(0.0) == 0.0
    for bad in (1.0, -0.1, 1.5):
        with pytest.raises(InvalidRatio):
            ratio_to_nbar(bad)


# ---------------------------------------------------------------- heating units

def test_conversions_at_one_megahertz():
    tdot, s_e = heating_conversions(90.0, TWO_PI * 1e6)
    assert tdot == pytest.approx(4.319e-3, rel=1e-3)
    assert s_e == pytest.approx(2.638e-12, rel=1e-3)


@given(st.floats(1e-3, 1e6), st.floats(1e4, 1e8))
def test_noise_round_trip(ndot, omega):
    _, s_e = heating_conversions(ndot, omega)
    assert heating_from_noise(s_e, omega) == pytest.approx(ndot, rel=1e-12)


def test_conversion_validation():
    with pytest.raises(ValueError):
        heating_conversions(1.0, 0.0)
    with pytest.raises(ValueError):
        heating_from_noise(1.0, -1.0)
    with pytest.raises(ValueError):
        uncorrelated_mode_scaling(1.0, 1.0, [1.0, 0.0])


def test_uncorrelated_noise_heats_lowest_axial_mode_faster(crystal7):
    spec = pseudopotential_modes(crystal7, "Axial")
    w = spec.frequencies
    rates = uncorrelated_mode_scaling(100.0, w[-1], w)
    assert rates[-1] == pytest.approx(100.0)
    # the lowest axial mode of the 7-ion hexagon heats about 60% faster than the COM mode
    assert 1.4 < rates[0] / 100.0 < 1.7
