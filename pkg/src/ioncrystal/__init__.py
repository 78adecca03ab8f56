"""Simulation of ion Coulomb crystals in linear Paul traps.

Equilibria and structural phases, pseudopotential and Floquet normal modes,
rf-driven molecular dynamics, and spectroscopic thermometry.
"""

from .constants import YB171, IonSpecies
from .trap import TrapConfig, mathieu_coefficients, secular_frequencies, trap_at_alpha

__all__ = ["IonSpecies", "TrapConfig", "YB171", "mathieu_coefficients", "secular_frequencies", "trap_at_alpha"]
__version__ = "0.1.0"
