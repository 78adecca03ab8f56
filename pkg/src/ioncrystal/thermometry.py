"""Fluorescence lineshape thermometry, sideband thermometry and heating-rate conversions.

Angular frequencies throughout. The Doppler FWHM formula yields an ordinary
frequency (Hz); it is multiplied by 2 pi before being combined with the
Lorentzian width Gamma sqrt(1 + s).
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import wofz

from .constants import HBAR, K_B, TWO_PI, YB171, IonSpecies
from .errors import FitDiverged, InvalidRatio, ValidationError

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))


@dataclass
class LineProfile:
    detunings: np.ndarray  # rad/s, strictly increasing
    intensities: np.ndarray
    amplitude: float = 1.0
    background: float = 0.0
    lorentz_fwhm: float | None = None
    gauss_fwhm: float | None = None
    center: float = 0.0

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)
        if np.any(np.diff(self.detunings) <= 0):
            raise ValidationError("detuning grid must be strictly increasing")
        if self.detunings.shape != self.intensities.shape:
            raise ValidationError("grid and intensities differ in length")


def lorentz_fwhm(linewidth: float, saturation: float) -> float:
    """Power-broadened natural linewidth Gamma sqrt(1 + s)."""
    if saturation < 0:
        raise ValueError("saturation must be non-negative")
    return linewidth * math.sqrt(1 + saturation)


def doppler_fwhm_hz(T_r: float, T_z: float, theta: float, species: IonSpecies = YB171) -> float:
    """2 sqrt(2 ln2 k_B / (m lambda^2)) sqrt(T_r cos^2 theta + T_z sin^2 theta), in Hz."""
    if T_r < 0 or T_z < 0:
        raise ValueError("temperatures must be non-negative")
    t_eff = T_r * math.cos(theta) ** 2 + T_z * math.sin(theta) ** 2
    lam = species.transition_wavelength
    return 2 * math.sqrt(2 * math.log(2) * K_B / (species.mass * lam**2)) * math.sqrt(t_eff)


def doppler_fwhm(T_r, T_z, theta, species=YB171) -> float:
    """Doppler FWHM as an angular frequency."""
    return TWO_PI * doppler_fwhm_hz(T_r, T_z, theta, species)


def temperature_from_doppler(gauss_fwhm: float, theta: float, T_z: float = 0.0,
                             species: IonSpecies = YB171) -> float:
    """Invert the Doppler FWHM (rad/s) for T_r at fixed T_z."""
    hz = gauss_fwhm / TWO_PI
    lam = species.transition_wavelength
    t_eff = hz**2 * species.mass * lam**2 / (8 * math.log(2) * K_B)
    return (t_eff - T_z * math.sin(theta) ** 2) / math.cos(theta) ** 2


def voigt_shape(x, gauss_fwhm, lorentz_fwhm_):
    """Voigt line normalised to unit peak, from the real part of the Faddeeva function."""
    x = np.asarray(x, dtype=float)
    gamma = 0.5 * lorentz_fwhm_
    # below 1e-7 L the Gaussian changes the shape by less than 1e-14
    if gauss_fwhm <= 1e-7 * lorentz_fwhm_:
        return gamma**2 / (x**2 + gamma**2)
    sigma = gauss_fwhm / FWHM_PER_SIGMA
    z = (x + 1j * gamma) / (sigma * math.sqrt(2))
    z0 = 1j * gamma / (sigma * math.sqrt(2))
    return wofz(z).real / wofz(z0).real


def voigt_profile(grid, T_r: float, T_z: float, theta: float = math.pi / 4, species: IonSpecies = YB171,
                  saturation: float = 0.3, amplitude: float = 1.0, background: float = 0.0,
                  center: float = 0.0) -> LineProfile:
    lw = lorentz_fwhm(species.natural_linewidth, saturation)
    gw = doppler_fwhm(T_r, T_z, theta, species)
    grid = np.asarray(grid, dtype=float)
    inten = amplitude * voigt_shape(grid - center, gw, lw) + background
    return LineProfile(grid, inten, amplitude, background, lw, gw, center)


def voigt_fwhm(gauss_fwhm: float, lorentz_fwhm_: float) -> float:
    """Full width at half maximum of the Voigt line, found by root bracketing."""
    from scipy.optimize import brentq

    upper = gauss_fwhm + lorentz_fwhm_
    half = brentq(lambda x: voigt_shape(x, gauss_fwhm, lorentz_fwhm_) - 0.5, 0.0, upper)
    return 2 * half


def synthetic_scan(T_r: float, T_z: float = 0.0, theta: float = math.pi / 4, species: IonSpecies = YB171,
                   saturation: float = 0.3, noise: float = 0.01, n_points: int = 400_001,
                   half_span: float = 4.0, rng=None) -> LineProfile:
    """Voigt scan over +-``half_span`` total FWHM with Gaussian noise of ``noise`` times the peak.

    The Doppler width only shifts the total FWHM by about G^2 / L when
    G << L, so at a few mK the temperature is set by a small shape change.
    At 1% noise per point the statistical error on T_r at 3 mK is roughly
    32% with 2001 points and 2% with the default 400001.
    """
    rng = np.random.default_rng(rng)
    lw = lorentz_fwhm(species.natural_linewidth, saturation)
    total = voigt_fwhm(doppler_fwhm(T_r, T_z, theta, species), lw)
    grid = np.linspace(-half_span * total, half_span * total, n_points)
    prof = voigt_profile(grid, T_r, T_z, theta, species, saturation)
    prof.intensities = prof.intensities + noise * rng.standard_normal(n_points)
    return prof


@dataclass
class VoigtFit:
    T_r: float
    T_r_err: float
    gauss_fwhm: float
    gauss_fwhm_err: float
    center: float
    amplitude: float
    background: float
    upper_bound: bool  # True when the Doppler width is unresolved and T_r is an upper limit


def fit_voigt(profile: LineProfile, lorentz_fwhm_: float, theta: float = math.pi / 4, T_z: float = 0.0,
              species: IonSpecies = YB171, sigma=None, resolve_sigmas: float = 2.0) -> VoigtFit:
    """Least-squares fit over (center, amplitude, background, Doppler FWHM) at fixed Lorentzian width.

    When the fitted squared Doppler width is below ``resolve_sigmas`` standard
    errors the fit is degenerate and T_r is reported as an upper bound.
    """
    x, y = profile.detunings, profile.intensities
    peak = int(np.argmax(y))
    bg0 = float(np.min(y))
    amp0 = float(y[peak] - bg0)
    above = x[y > bg0 + 0.5 * amp0]
    total0 = float(above[-1] - above[0]) if len(above) > 1 else lorentz_fwhm_
    if x[-1] - x[0] < 3 * max(total0, lorentz_fwhm_):
        raise ValidationError("profile must span at least three total linewidths")
    # The line depends on the Doppler width only through G^2, so the fit works in u = G^2:
    # its Jacobian stays regular at G = 0, where a fit in G would understate the error.
    # Detunings and widths are expressed in units of the Lorentzian FWHM to keep the
    # covariance well conditioned.
    lw = lorentz_fwhm_
    u0 = max(total0**2 / lw**2 - 1.0, 0.01)

    def model(xx, c, a, b, u):
        return a * voigt_shape(xx - c, math.sqrt(max(u, 0.0)), 1.0) + b

    xs = x / lw
    sig = None if sigma is None else np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    p0 = [xs[peak], amp0, bg0, u0]
    lower = [xs[0], 0.0, -np.inf, 0.0]
    upper = [xs[-1], np.inf, np.inf, np.inf]
    try:
        popt, pcov = curve_fit(model, xs, y, p0=p0, sigma=sig, bounds=(lower, upper),
                               x_scale=[1.0, amp0, amp0, 1.0], max_nfev=2000)
    except (RuntimeError, ValueError) as exc:
        raise FitDiverged(str(exc)) from exc
    perr = np.sqrt(np.diag(pcov))
    if not np.all(np.isfinite(popt)) or not np.isfinite(perr[3]):
        raise FitDiverged("non-finite fit parameters or covariance")
    c, a, b, u = popt
    c, u, u_err = c * lw, u * lw**2, perr[3] * lw**2
    g = math.sqrt(u)
    g_err = u_err / (2 * g) if g > 0 else float("inf")
    # effective temperature per unit G^2
    per_u = temperature_from_doppler(1.0, 0.0, 0.0, species)
    degenerate = u < resolve_sigmas * u_err
    if degenerate:
        g_used = math.sqrt(u + resolve_sigmas * u_err)
        t_r = max(temperature_from_doppler(g_used, theta, T_z, species), 0.0)
        t_err = float("nan")
    else:
        t_r = temperature_from_doppler(g, theta, T_z, species)
        t_err = per_u * u_err / math.cos(theta) ** 2
    return VoigtFit(t_r, t_err, g, g_err, c, a, b, degenerate)


def fit_heating_rate(times, temperatures, errors=None):
    """Weighted straight-line fit T(t) = T0 + rate t; returns (rate, rate_err, T0)."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(temperatures, dtype=float)
    if len(t) < 2:
        raise ValidationError("need at least two heat times")
    if errors is not None:
        w = 1.0 / np.asarray(errors, dtype=float)
        coef, cov = np.polyfit(t, y, 1, w=w, cov="unscaled")
        return float(coef[0]), float(math.sqrt(cov[0, 0])), float(coef[1])
    if len(t) < 4:
        # polyfit's scaled covariance needs more points than parameters + 2
        coef = np.polyfit(t, y, 1)
        return float(coef[0]), float("nan"), float(coef[1])
    coef, cov = np.polyfit(t, y, 1, cov=True)
    return float(coef[0]), float(math.sqrt(cov[0, 0])), float(coef[1])


# ---------------------------------------------------------------------------
# Sideband thermometry
# ---------------------------------------------------------------------------

@dataclass
class SidebandScan:
    times: np.ndarray
    red: np.ndarray
    blue: np.ndarray
    ratio: float
    nbar: float


def thermal_populations(nbar: float, tail: float = 1e-8):
    """Thermal Fock populations truncated where the neglected tail is below ``tail``.

    n_max = max(ceil(nbar + 10 sqrt(nbar + 1)), first n with a tail below ``tail``).
    """
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    n_max = math.ceil(nbar + 10 * math.sqrt(nbar + 1))
    if nbar > 0:
        ratio = nbar / (nbar + 1)
        # P(n > n_max) = ratio^(n_max + 1)
        n_max = max(n_max, math.ceil(math.log(tail) / math.log(ratio)) - 1)
    n = np.arange(n_max + 1)
    if nbar == 0:
        p = (n == 0).astype(float)
    else:
        p = np.exp(n * math.log(nbar) - (n + 1) * math.log(nbar + 1))
    return n, p / p.sum()


def flop_curves(nbar: float, eta: float, rabi: float, times):
    t = np.asarray(times, dtype=float)
    n, p = thermal_populations(nbar)
    red = np.sin(0.5 * eta * rabi * np.sqrt(n)[:, None] * t[None, :]) ** 2
    blue = np.sin(0.5 * eta * rabi * np.sqrt(n + 1)[:, None] * t[None, :]) ** 2
    return p @ red, p @ blue


def extract_ratio(times, red, blue, order: int = 4) -> float:
    """Ratio of early-time flop amplitudes: t^2 coefficients of even-polynomial fits."""
    t = np.asarray(times, dtype=float)
    basis = np.stack([t ** (2 * k) for k in range(1, order + 1)], axis=1)
    scale = np.abs(basis).max(axis=0)
    cr = np.linalg.lstsq(basis / scale, np.asarray(red), rcond=None)[0]
    cb = np.linalg.lstsq(basis / scale, np.asarray(blue), rcond=None)[0]
    if cb[0] <= 0:
        raise FitDiverged("blue sideband shows no early-time rise")
    return float(cr[0] / cb[0])


def sideband_flops(nbar: float, eta: float, rabi: float, times) -> SidebandScan:
    """Thermally averaged red/blue sideband flops in the Lamb-Dicke regime, with the extracted ratio."""
    if eta * math.sqrt(nbar + 1) > 0.5:
        import warnings
        warnings.warn("eta sqrt(nbar + 1) > 0.5: outside the Lamb-Dicke regime", stacklevel=2)
    red, blue = flop_curves(nbar, eta, rabi, times)
    r = extract_ratio(times, red, blue)
    return SidebandScan(np.asarray(times, dtype=float), red, blue, r, ratio_to_nbar(min(max(r, 0.0), 1 - 1e-15)))


def ratio_to_nbar(r: float) -> float:
    if not 0 <= r < 1:
        raise InvalidRatio(f"sideband ratio must lie in [0, 1), got {r}")
    return r / (1 - r)


# ---------------------------------------------------------------------------
# Heating-rate units
# ---------------------------------------------------------------------------

def heating_conversions(ndot: float, omega: float, species: IonSpecies = YB171):
    """Quanta/s to (dT/dt in K/s, field-noise density S_E in V^2 m^-2 Hz^-1).

    dT/dt = ndot hbar omega / k_B and S_E = 4 m hbar omega ndot / Q^2.
    """
    if omega <= 0:
        raise ValueError("mode frequency must be positive")
    tdot = ndot * HBAR * omega / K_B
    s_e = 4 * species.mass * HBAR * omega * ndot / species.charge**2
    return tdot, s_e


def heating_from_noise(s_e: float, omega: float, species: IonSpecies = YB171) -> float:
    """Inverse of the S_E conversion: quanta/s from a field-noise density."""
    if omega <= 0:
        raise ValueError("mode frequency must be positive")
    return s_e * species.charge**2 / (4 * species.mass * HBAR * omega)


def uncorrelated_mode_scaling(ndot_com: float, omega_com: float, omega_k):
    """Heating of mode k for spatially uncorrelated noise: (omega_COM / omega_k) ndot_COM."""
    omega_k = np.asarray(omega_k, dtype=float)
    if np.any(omega_k <= 0):
        raise ValueError("mode frequency must be positive")
    return omega_com / omega_k * ndot_com
