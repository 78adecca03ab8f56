"""Physical constants (CODATA 2018, via scipy.constants) and species data."""

from dataclasses import dataclass

import numpy as np
import scipy.constants as const

HBAR = const.hbar
K_B = const.k
EPS0 = const.epsilon_0
AMU = const.atomic_mass
E_CHARGE = const.e
COULOMB_K = 1.0 / (4.0 * np.pi * EPS0)

TWO_PI = 2.0 * np.pi

# 171Yb+ ground-state hyperfine splitting; a frequency reference only
YB171_HYPERFINE_HZ = 12.642821e9


@dataclass(frozen=True)
class IonSpecies:
    """Singly-charged ion with its cooling and Raman wavelengths."""

    mass: float
    charge: float = E_CHARGE
    transition_wavelength: float = 369.5e-9
    raman_wavelength: float = 355e-9
    natural_linewidth: float = TWO_PI * 19.6e6
    name: str = "ion"

    def __post_init__(self):
        if self.mass <= 0 or self.charge <= 0:
            raise ValueError("mass and charge must be positive")
        if self.transition_wavelength <= 0 or self.raman_wavelength <= 0:
            raise ValueError("wavelengths must be positive")
        if self.natural_linewidth <= 0:
            raise ValueError("natural linewidth must be positive")

    @property
    def coulomb_strength(self) -> float:
        """Q^2 / (4 pi eps0) in J m."""
        return COULOMB_K * self.charge**2


YB171 = IonSpecies(mass=170.9363258 * AMU, name="171Yb+")
