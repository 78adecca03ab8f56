"""Linear Paul trap parameters and closed-form single-ion physics.

All frequencies are angular (rad/s). The radial asymmetry ``epsilon`` is the
pseudopotential ratio omega_x / omega_y. It is realised as a static
quadrupole a_x = a + delta, a_y = a - delta, which leaves the static part
source-free (a_x + a_y + a_z = 0) and splits the squared secular
frequencies symmetrically about the degenerate value:

    omega_x^2 = 2 eps^2 / (1 + eps^2) * omega_deg^2
    omega_y^2 = 2 / (1 + eps^2) * omega_deg^2
"""

from dataclasses import dataclass, replace
import warnings

import numpy as np

from .constants import HBAR, TWO_PI, YB171, IonSpecies
from .errors import UnstableTrap


@dataclass(frozen=True)
class TrapConfig:
    rf_voltage: float = 340.0
    dc_voltage: float = 0.0
    radial_extent: float = 460e-6
    axial_extent: float = 335e-6
    drive_frequency: float = TWO_PI * 21e6
    geometric_factor: float = 0.12
    radial_asymmetry: float = 1.02

    def __post_init__(self):
        if self.rf_voltage <= 0 or self.dc_voltage < 0:
            raise ValueError("rf voltage must be positive and dc voltage non-negative")
        if self.radial_extent <= 0 or self.axial_extent <= 0 or self.drive_frequency <= 0:
            raise ValueError("trap lengths and drive frequency must be positive")
        if not 0 < self.geometric_factor <= 1:
            raise ValueError("geometric factor must lie in (0, 1]")
        if self.radial_asymmetry < 1:
            raise ValueError("radial asymmetry must be >= 1")

    @property
    def rf_period(self) -> float:
        return TWO_PI / self.drive_frequency


@dataclass(frozen=True)
class MathieuCoefficients:
    a_x: float
    a_y: float
    a_z: float
    q_x: float
    q_y: float
    q_z: float = 0.0

    @property
    def a(self) -> np.ndarray:
        return np.array([self.a_x, self.a_y, self.a_z])

    @property
    def q(self) -> np.ndarray:
        return np.array([self.q_x, self.q_y, self.q_z])

    @property
    def asymmetry_shift(self) -> float:
        return 0.5 * (self.a_x - self.a_y)


@dataclass(frozen=True)
class SecularFrequencies:
    omega_x: float
    omega_y: float
    omega_z: float
    beta_x: float
    beta_y: float
    omega_r_closed_form: float  # degenerate radial frequency of the closed form

    @property
    def omega_r(self) -> float:
        return max(self.omega_x, self.omega_y)

    @property
    def alpha(self) -> float:
        return self.omega_z / self.omega_r

    @property
    def omegas(self) -> np.ndarray:
        return np.array([self.omega_x, self.omega_y, self.omega_z])


def _split_fraction(epsilon):
    # omega_x^2 = c * omega_deg^2
    return 2.0 * epsilon**2 / (1.0 + epsilon**2)


def _raw_a_q(trap, species):
    scale = species.charge / (species.mass * trap.drive_frequency**2)
    a = -4.0 * scale * trap.geometric_factor * trap.dc_voltage / trap.axial_extent**2
    q = 2.0 * scale * trap.rf_voltage / trap.radial_extent**2
    return a, q


def mathieu_coefficients(trap: TrapConfig, species: IonSpecies = YB171) -> MathieuCoefficients:
    a, q = _raw_a_q(trap, species)
    eps = trap.radial_asymmetry
    beta_deg_sq = a + 0.5 * q**2
    delta = beta_deg_sq * (eps**2 - 1.0) / (eps**2 + 1.0) if beta_deg_sq > 0 else 0.0
    return MathieuCoefficients(a_x=a + delta, a_y=a - delta, a_z=-2.0 * a, q_x=q, q_y=-q)


def secular_frequencies(trap: TrapConfig, species: IonSpecies = YB171) -> SecularFrequencies:
    """Pseudopotential secular frequencies.

    Returns beta-based frequencies omega_i = beta_i * Omega / 2 with
    beta_i = sqrt(a_i + q_i^2 / 2), together with the degenerate closed-form
    radial frequency sqrt(Q/m (q V0 / 4 r0^2 - kappa U0 / z0^2)), which
    coincides with the beta-based value at epsilon = 1.
    """
    c = mathieu_coefficients(trap, species)
    half_drive = 0.5 * trap.drive_frequency
    qm = species.charge / species.mass
    rad_closed = qm * (c.q_x * trap.rf_voltage / (4 * trap.radial_extent**2)
                       - trap.geometric_factor * trap.dc_voltage / trap.axial_extent**2)
    ax_closed = qm * 2 * trap.geometric_factor * trap.dc_voltage / trap.axial_extent**2
    bx_sq = c.a_x + 0.5 * c.q_x**2
    by_sq = c.a_y + 0.5 * c.q_y**2
    if min(bx_sq, by_sq) <= 0 or rad_closed <= 0:
        raise UnstableTrap(f"radial confinement lost (beta_x^2={bx_sq:.3g}, beta_y^2={by_sq:.3g})")
    if ax_closed <= 0 or c.a_z <= 0:
        raise UnstableTrap("no axial confinement: dc voltage must be positive")
    bx, by = np.sqrt(bx_sq), np.sqrt(by_sq)
    return SecularFrequencies(
        omega_x=bx * half_drive,
        omega_y=by * half_drive,
        omega_z=np.sqrt(c.a_z) * half_drive,
        beta_x=bx,
        beta_y=by,
        omega_r_closed_form=np.sqrt(rad_closed),
    )


def dc_voltage_for_axial(omega_z: float, trap: TrapConfig, species: IonSpecies = YB171) -> float:
    """Invert omega_z = sqrt(2 Q kappa U0 / (m z0^2)) for U0."""
    return omega_z**2 * species.mass * trap.axial_extent**2 / (2 * species.charge * trap.geometric_factor)


def trap_at_alpha(alpha: float, trap: TrapConfig, species: IonSpecies = YB171) -> TrapConfig:
    """Same rf voltage, dc voltage chosen so that omega_z / omega_r = alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    _, q = _raw_a_q(trap, species)
    c = _split_fraction(trap.radial_asymmetry)
    a = -alpha**2 * c * q**2 / (2 * (alpha**2 * c + 2))
    u0 = -a * species.mass * trap.axial_extent**2 * trap.drive_frequency**2 / (
        4 * species.charge * trap.geometric_factor)
    return replace(trap, dc_voltage=u0)


def trap_for_frequencies(omega_r: float, alpha: float, trap: TrapConfig,
                         species: IonSpecies = YB171) -> TrapConfig:
    """Choose rf and dc voltages giving pseudopotential omega_r and omega_z = alpha * omega_r.

    Geometry, drive frequency, kappa and epsilon are taken from ``trap``.
    """
    if omega_r <= 0 or alpha <= 0:
        raise ValueError("omega_r and alpha must be positive")
    drive = trap.drive_frequency
    c = _split_fraction(trap.radial_asymmetry)
    a_z = (2 * alpha * omega_r / drive) ** 2
    a = -0.5 * a_z
    beta_deg_sq = (2 * omega_r / drive) ** 2 / c
    q = np.sqrt(2 * (beta_deg_sq - a))
    v0 = q * species.mass * trap.radial_extent**2 * drive**2 / (2 * species.charge)
    u0 = -a * species.mass * trap.axial_extent**2 * drive**2 / (4 * species.charge * trap.geometric_factor)
    return replace(trap, rf_voltage=v0, dc_voltage=u0)


def single_ion_trajectory(coeffs: MathieuCoefficients, axis: int, amplitude: float, t,
                          drive_frequency: float, secular_phase: float = 0.0, rf_phase: float = 0.0,
                          beta: float | None = None):
    """Lowest-order Mathieu solution along one axis (0=x, 1=y, 2=z).

    u(t) = A ( cos(w t) [1 + q/2 cos(W t) + q^2/32 cos(2 W t)] + beta q/2 sin(w t) sin(W t) )

    with w = beta W / 2. ``beta`` defaults to sqrt(a + q^2/2); passing the exact
    characteristic exponent removes the secular phase drift, leaving the
    neglected higher harmonics as the only error.
    """
    a, q = coeffs.a[axis], coeffs.q[axis]
    if q != 0 and not abs(a) < q**2 < 0.1:
        warnings.warn("lowest-order Mathieu solution used outside |a| < q^2 << 1", stacklevel=2)
    elif q == 0 and a <= 0:
        raise UnstableTrap("no confinement along this axis")
    if beta is None:
        beta = np.sqrt(a + 0.5 * q**2)
    t = np.asarray(t, dtype=float)
    sec = 0.5 * beta * drive_frequency * t + secular_phase
    rf = drive_frequency * t + rf_phase
    return amplitude * (np.cos(sec) * (1 + 0.5 * q * np.cos(rf) + q**2 / 32 * np.cos(2 * rf))
                        + beta * 0.5 * q * np.sin(sec) * np.sin(rf))


def lamb_dicke(species: IonSpecies, beam_half_angle: float, omega: float, wavelength: float | None = None) -> float:
    """eta = 2 sin(theta) (2 pi / lambda) sqrt(hbar / (2 m omega)) for two crossed Raman beams."""
    if np.any(np.asarray(omega) <= 0):
        raise ValueError("mode frequency must be positive")
    lam = species.raman_wavelength if wavelength is None else wavelength
    return 2 * np.sin(beam_half_angle) * (TWO_PI / lam) * np.sqrt(HBAR / (2 * species.mass * np.asarray(omega)))


def micromotion_amplitude(q: float, radial_distance):
    """First and second harmonic micromotion amplitudes (q/2) r0 and (q^2/32) r0."""
    r0 = np.asarray(radial_distance, dtype=float)
    if np.any(r0 < 0):
        raise ValueError("radial distance must be non-negative")
    return 0.5 * abs(q) * r0, q**2 / 32 * r0


def max_micromotion_estimate(q: float, spacing: float, n_ions: int) -> float:
    """|r1|_max ~ q d sqrt(N) / 4 from an outer radius ~ d sqrt(N) / 2."""
    return abs(q) * spacing * np.sqrt(n_ions) / 4
