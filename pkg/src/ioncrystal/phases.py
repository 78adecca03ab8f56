"""Structural phase classification and the critical aspect ratios alpha_c(N).

Boundaries are located by bisection in alpha at fixed radial frequency
(omega_z = alpha * omega_r is varied). The default detector is the soft-mode
criterion: the chain loses stability when its lowest radial mode reaches zero
(LinearToZigZag), and the planar crystal when its lowest axial mode does
(ThreeDToRadial2D). With method="Floquet" the mode frequencies come from the
monodromy of the rf-driven periodic orbit instead of the pseudopotential
Hessian.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from .constants import YB171, IonSpecies
from .equilibrium import (CrystalConfiguration, EquilibriumOptions, PotentialModel,
                          find_equilibrium, relax)
from .errors import NoTransitionFound, NotConverged, ValidationError
from .modes import find_periodic_orbit, floquet_modes, signed_pseudopotential_frequencies
from .trap import TrapConfig, trap_at_alpha, secular_frequencies, trap_for_frequencies

log = logging.getLogger(__name__)

LABELS = ("Linear", "ZigZag", "ThreeD", "Radial2D")
BOUNDARIES = ("LinearToZigZag", "ThreeDToRadial2D")
METHODS = ("Pseudopotential", "Floquet")


@dataclass(frozen=True)
class PhaseLabel:
    label: str
    extents: tuple  # (radial major, radial minor, axial), units of ell

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class PhaseBoundaryPoint:
    n_ions: int
    boundary: str
    alpha_critical: float
    method: str
    bracket_width: float
    error: str | None = None


def principal_extents(positions, length_scale):
    """Max |projection| along the two radial principal axes and along z, in units of ell."""
    u = np.asarray(positions) / length_scale
    u = u - u.mean(axis=0)
    xy = u[:, :2]
    if len(u) > 1:
        _, vec = np.linalg.eigh(xy.T @ xy)
        proj = xy @ vec  # columns: minor, major
        minor, major = np.abs(proj).max(axis=0)
    else:
        minor = major = 0.0
    return float(major), float(minor), float(np.abs(u[:, 2]).max())


def classify(config: CrystalConfiguration, tol: float = 1e-3) -> PhaseLabel:
    if not config.converged:
        raise ValidationError("cannot classify an unconverged configuration")
    major, minor, axial = principal_extents(config.positions, config.model.length_scale)
    ext = (major, minor, axial)
    if major < tol:
        return PhaseLabel("Linear", ext)
    if axial < tol:
        return PhaseLabel("Radial2D", ext)
    if minor < tol:
        return PhaseLabel("ZigZag", ext)
    return PhaseLabel("ThreeD", ext)


@dataclass
class PhaseScan:
    """Fixed radial frequency and trap hardware used to sweep alpha."""

    trap: TrapConfig = field(default_factory=TrapConfig)
    omega_r: float | None = None  # default: the trap's omega_r at alpha = 2
    species: IonSpecies = YB171
    seed: int = 0
    alpha_min: float = 0.02
    alpha_max: float = 50.0

    def __post_init__(self):
        if self.omega_r is None:
            self.omega_r = secular_frequencies(trap_at_alpha(2.0, self.trap, self.species), self.species).omega_r

    def model(self, n_ions: int, alpha: float) -> PotentialModel:
        eps = self.trap.radial_asymmetry
        return PotentialModel(self.omega_r, self.omega_r / eps, alpha * self.omega_r, n_ions, self.species)

    def trap_at(self, alpha: float) -> TrapConfig:
        return trap_for_frequencies(self.omega_r, alpha, self.trap, self.species)


class _SoftMode:
    """Signed lowest transverse frequency of the candidate phase as a function of alpha."""

    def __init__(self, scan: PhaseScan, n_ions: int, boundary: str, method: str):
        if boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {boundary!r}")
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.scan, self.n, self.boundary, self.method = scan, n_ions, boundary, method
        self.constraint = "axial" if boundary == "LinearToZigZag" else "planar"
        self.subspace = "InPlane" if boundary == "LinearToZigZag" else "Axial"
        self._config = None
        self.calls = 0

    def config(self, alpha):
        model = self.scan.model(self.n, alpha)
        if self._config is None:
            opts = EquilibriumOptions(constraint=self.constraint)
            self._config = find_equilibrium(model, self.scan.seed, opts)
        cfg = relax(self._config, model, self.constraint)
        if not cfg.converged:
            cfg = find_equilibrium(model, self.scan.seed, EquilibriumOptions(constraint=self.constraint))
        self._config = cfg
        return cfg

    def __call__(self, alpha):
        """Positive when the candidate phase is stable; stable side is below alpha_c for the chain."""
        self.calls += 1
        cfg = self.config(alpha)
        if self.method == "Pseudopotential":
            f = signed_pseudopotential_frequencies(cfg, self.subspace)
        else:
            orbit = find_periodic_orbit(self.scan.trap_at(alpha), cfg, constraint=self.constraint)
            f = floquet_modes(orbit, self.subspace).signed_frequencies
        return float(np.min(f)) / self.scan.omega_r


def _bisect(stable_at, lo, hi, tol, stable_side_low):
    """Shrink [lo, hi] around the sign change; ``stable_at`` returns a bool."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stable_at(mid) == stable_side_low:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _bracket(stable_at, scan, stable_side_low, start=1.0):
    """Geometric search for an interval where the stability verdict flips."""
    a = start
    s = stable_at(a)
    factor = 1.5
    going_up = s == stable_side_low
    while scan.alpha_min <= a <= scan.alpha_max:
        b = a * factor if going_up else a / factor
        if stable_at(b) != s:
            return (a, b) if going_up else (b, a)
        a = b
    raise NoTransitionFound(f"no transition in alpha in [{scan.alpha_min}, {scan.alpha_max}]")


def critical_alpha(n_ions: int, boundary: str, method: str = "Pseudopotential", tol_alpha: float = 1e-3,
                   scan: PhaseScan | None = None, bracket=None) -> PhaseBoundaryPoint:
    """Soft-mode location of a structural transition by bisection in alpha."""
    if n_ions < 3:
        raise ValidationError("structural boundaries need at least three ions")
    scan = scan or PhaseScan()
    soft = _SoftMode(scan, n_ions, boundary, method)
    chain = boundary == "LinearToZigZag"
    stable_at = lambda a: soft(a) > 0  # noqa: E731
    if bracket is None:
        bracket = _bracket(stable_at, scan, stable_side_low=chain, start=0.6 if chain else 1.5)
    else:
        lo, hi = bracket
        if stable_at(lo) == stable_at(hi):
            raise NoTransitionFound(f"verdict identical at both ends of bracket {bracket}")
    lo, hi = _bisect(stable_at, *bracket, tol_alpha, stable_side_low=chain)
    log.info("N=%d %s %s: alpha_c in [%.5f, %.5f] (%d evaluations)", n_ions, boundary, method, lo, hi, soft.calls)
    return PhaseBoundaryPoint(n_ions, boundary, 0.5 * (lo + hi), method, hi - lo)


def critical_alpha_by_classification(n_ions: int, boundary: str, bracket, tol_alpha: float = 1e-3,
                                     scan: PhaseScan | None = None, tol: float = 1e-3) -> PhaseBoundaryPoint:
    """Independent detector: bisection on the label of the global energy minimum."""
    scan = scan or PhaseScan()
    target = "Linear" if boundary == "LinearToZigZag" else "Radial2D"

    def in_phase(alpha):
        cfg = find_equilibrium(scan.model(n_ions, alpha), scan.seed)
        return classify(cfg, tol).label == target

    chain = boundary == "LinearToZigZag"
    lo, hi = bracket
    if in_phase(lo) == in_phase(hi):
        raise NoTransitionFound(f"classification constant over {bracket}")
    lo, hi = _bisect(in_phase, lo, hi, tol_alpha, stable_side_low=chain)
    return PhaseBoundaryPoint(n_ions, boundary, 0.5 * (lo + hi), "Pseudopotential", hi - lo)


def phase_diagram(n_range=range(3, 20), method: str = "Pseudopotential", tol_alpha: float = 1e-3,
                  scan: PhaseScan | None = None, boundaries=BOUNDARIES):
    """Both boundaries for every N; failures are recorded per point rather than raised."""
    scan = scan or PhaseScan()
    points = []
    for n in n_range:
        for b in boundaries:
            try:
                points.append(critical_alpha(n, b, method, tol_alpha, scan))
            except (NoTransitionFound, NotConverged, ValidationError) as exc:
                points.append(PhaseBoundaryPoint(n, b, float("nan"), method, float("nan"), error=str(exc)))
    points.sort(key=lambda p: (p.n_ions, BOUNDARIES.index(p.boundary)))
    return points
