"""Equilibrium configurations of N ions in the 3D harmonic pseudopotential.

Internally positions are measured in the length unit
ell = (Q^2 / (4 pi eps0 m omega_r^2))^(1/3) and energies in m omega_r^2 ell^2,
where omega_r = max(omega_x, omega_y). In these units the energy is

    E = sum_i 1/2 (w_x^2 x_i^2 + w_y^2 y_i^2 + w_z^2 z_i^2) + sum_{i<j} 1/r_ij

with w = omega / omega_r.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from .constants import YB171, IonSpecies
from .errors import CoincidentIons, NotConverged
from .trap import TrapConfig, secular_frequencies

log = logging.getLogger(__name__)

_COINCIDENT = 1e-12  # in units of ell


@dataclass(frozen=True)
class PotentialModel:
    omega_x: float
    omega_y: float
    omega_z: float
    n_ions: int
    species: IonSpecies = YB171

    def __post_init__(self):
        if min(self.omega_x, self.omega_y, self.omega_z) <= 0:
            raise ValueError("trap frequencies must be positive")
        if self.n_ions < 1:
            raise ValueError("need at least one ion")

    @classmethod
    def from_trap(cls, trap: TrapConfig, n_ions: int, species: IonSpecies = YB171):
        f = secular_frequencies(trap, species)
        return cls(f.omega_x, f.omega_y, f.omega_z, n_ions, species)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([self.omega_x, self.omega_y, self.omega_z])

    @property
    def omega_r(self) -> float:
        return max(self.omega_x, self.omega_y)

    @property
    def alpha(self) -> float:
        return self.omega_z / self.omega_r

    @property
    def length_scale(self) -> float:
        return (self.species.coulomb_strength / (self.species.mass * self.omega_r**2)) ** (1 / 3)

    @property
    def energy_scale(self) -> float:
        return self.species.mass * self.omega_r**2 * self.length_scale**2

    @property
    def w2(self) -> np.ndarray:
        """Squared trap frequencies in units of omega_r^2."""
        return (self.omegas / self.omega_r) ** 2

    def scaled(self, factor: float) -> "PotentialModel":
        return PotentialModel(self.omega_x * factor, self.omega_y * factor, self.omega_z * factor,
                              self.n_ions, self.species)

    def with_alpha(self, alpha: float) -> "PotentialModel":
        """Same radial frequencies, omega_z = alpha * omega_r."""
        return PotentialModel(self.omega_x, self.omega_y, alpha * self.omega_r, self.n_ions, self.species)


@dataclass
class CrystalConfiguration:
    positions: np.ndarray  # (N, 3), metres
    energy: float  # J
    converged: bool
    gradient_norm: float  # J/m
    model: PotentialModel
    candidate_energies: tuple = field(default=(), repr=False)

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    @property
    def scaled_positions(self) -> np.ndarray:
        return self.positions / self.model.length_scale

    def radial_distances(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    def nearest_neighbour_distance(self) -> float:
        if self.n_ions < 2:
            return float("nan")
        d = _pair_distances(self.positions)
        np.fill_diagonal(d, np.inf)
        return float(np.median(d.min(axis=1)))


@dataclass(frozen=True)
class EquilibriumOptions:
    n_random: int = 24
    max_iter: int = 500
    grad_tol: float = 1e-12  # units of m omega_r^2 ell
    constraint: str | None = None  # None, "planar" (z = 0) or "axial" (x = y = 0)
    structured_seeds: bool = True


def _pair_distances(u):
    d = u[:, None, :] - u[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def _check_coincident(u):
    if len(u) < 2:
        return
    r = _pair_distances(u)
    np.fill_diagonal(r, np.inf)
    if r.min() < _COINCIDENT:
        raise CoincidentIons("two ions occupy the same position")


def scaled_energy(u, w2):
    _check_coincident(u)
    e = 0.5 * np.sum(w2 * u**2)
    if len(u) > 1:
        r = _pair_distances(u)
        iu = np.triu_indices(len(u), 1)
        e += np.sum(1.0 / r[iu])
    return e


def scaled_gradient(u, w2):
    _check_coincident(u)
    g = w2 * u
    if len(u) > 1:
        d = u[:, None, :] - u[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        np.fill_diagonal(r, np.inf)
        g -= np.sum(d / r[..., None] ** 3, axis=1)
    return g


def coulomb_hessian(u):
    """Hessian of sum_{i<j} 1/r_ij, shape (3N, 3N), coordinates ordered (x1, y1, z1, x2, ...)."""
    n = len(u)
    d = u[:, None, :] - u[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    np.fill_diagonal(r, np.inf)
    inv3 = 1.0 / r**3
    inv5 = 1.0 / r**5
    # off-diagonal blocks: -(3 d d^T / r^5 - I / r^3)
    blocks = -(3 * d[..., :, None] * d[..., None, :] * inv5[..., None, None]
               - np.eye(3) * inv3[..., None, None])
    for i in range(n):
        blocks[i, i] = -blocks[i].sum(axis=0)
    return blocks.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)


def scaled_hessian(u, w2):
    _check_coincident(u)
    h = np.diag(np.tile(w2, len(u)))
    if len(u) > 1:
        h += coulomb_hessian(u)
    return h


def total_potential(positions, model: PotentialModel) -> float:
    """Trap plus Coulomb energy in joules for positions in metres, shape (N, 3)."""
    u = np.asarray(positions, dtype=float) / model.length_scale
    return scaled_energy(u, model.w2) * model.energy_scale


def potential_gradient(positions, model: PotentialModel) -> np.ndarray:
    u = np.asarray(positions, dtype=float) / model.length_scale
    return scaled_gradient(u, model.w2) * model.energy_scale / model.length_scale


def potential_hessian(positions, model: PotentialModel) -> np.ndarray:
    u = np.asarray(positions, dtype=float) / model.length_scale
    return scaled_hessian(u, model.w2) * model.energy_scale / model.length_scale**2


def _free_mask(n, constraint):
    mask = np.ones((n, 3), dtype=bool)
    if constraint == "planar":
        mask[:, 2] = False
    elif constraint == "axial":
        mask[:, :2] = False
    elif constraint is not None:
        raise ValueError(f"unknown constraint {constraint!r}")
    return mask.ravel()


def _newton(u0, w2, mask, max_iter, grad_tol):
    """Damped Newton with Armijo backtracking; gradient descent when the Hessian is indefinite.

    Returns (u, energy, grad_norm, converged).
    """
    u = u0.copy()
    n = len(u)
    escapes = 0
    for _ in range(max_iter):
        g = scaled_gradient(u, w2).ravel()[mask]
        gnorm = np.linalg.norm(g)
        h = scaled_hessian(u, w2)[np.ix_(mask, mask)]
        lam, vec = np.linalg.eigh(h)
        thr = 1e-9 * max(abs(lam).max(), 1.0)
        if gnorm < grad_tol:
            if lam[0] < -thr and escapes < 20:
                # stationary but a saddle (typically a symmetric seed): push along the unstable mode
                step = np.zeros(3 * n)
                step[mask] = 0.05 * vec[:, 0]
                u = u + step.reshape(n, 3)
                escapes += 1
                continue
            return u, scaled_energy(u, w2), gnorm, True
        if lam[0] < -thr:
            direction = -g
        else:
            keep = abs(lam) > thr
            direction = -vec[:, keep] @ ((vec[:, keep].T @ g) / lam[keep])
        e0 = scaled_energy(u, w2)
        slope = g @ direction
        if slope >= 0:
            direction, slope = -g, -gnorm**2
        # cap the step so ions never jump over each other
        t = min(1.0, 0.3 / max(np.abs(direction).max(), 1e-300))
        accepted = False
        for _ls in range(60):
            trial = u.copy().ravel()
            trial[mask] += t * direction
            trial = trial.reshape(n, 3)
            try:
                e1 = scaled_energy(trial, w2)
            except CoincidentIons:
                e1 = np.inf
            if e1 <= e0 + 1e-4 * t * slope or (abs(e1 - e0) <= 1e-14 * abs(e0) and t == 1.0):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # energy no longer resolvable; accept the full Newton step if it reduces the gradient
            trial = u.copy().ravel()
            trial[mask] += direction if lam[0] >= -thr else 1e-3 * direction
            trial = trial.reshape(n, 3)
            if np.linalg.norm(scaled_gradient(trial, w2).ravel()[mask]) >= gnorm:
                return u, e0, gnorm, False
        u = trial
    g = scaled_gradient(u, w2).ravel()[mask]
    return u, scaled_energy(u, w2), np.linalg.norm(g), False


def _structured_seeds(n, w2, constraint):
    seeds = []
    spacing = 1.0
    line = np.zeros((n, 3))
    line[:, 2] = spacing * (np.arange(n) - (n - 1) / 2)
    ring = np.zeros((n, 3))
    phi = 2 * np.pi * np.arange(n) / n + 0.1
    rad = max(0.5, n / (2 * np.pi))
    ring[:, 0], ring[:, 1] = rad * np.cos(phi), rad * np.sin(phi)
    # triangular patch: the n lattice sites nearest the origin (slightly offset to break ties)
    k = int(np.ceil(np.sqrt(n))) + 2
    ii, jj = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1))
    pts = np.stack([ii + 0.5 * jj, np.sqrt(3) / 2 * jj], axis=-1).reshape(-1, 2) + [0.01, 0.02]
    order = np.argsort(np.einsum("ij,ij->i", pts, pts), kind="stable")
    tri = np.zeros((n, 3))
    tri[:, :2] = pts[order[:n]] * 1.2
    if constraint == "axial":
        return [line]
    if constraint == "planar":
        return [ring, tri]
    return [line, ring, tri]


def _canonical(u):
    key = np.round(u, 9)
    order = np.lexsort((key[:, 1], key[:, 0], key[:, 2]))
    return u[order]


def find_equilibrium(model: PotentialModel, seed: int = 0, options: EquilibriumOptions | None = None,
                     guesses=None) -> CrystalConfiguration:
    """Lowest-energy local minimum over structured and seeded random starts.

    ``guesses`` (arrays in metres) are tried in addition to the generated starts.
    Raises NotConverged (carrying the best candidate) if no start converges.
    """
    opts = options or EquilibriumOptions()
    n = model.n_ions
    w2 = model.w2
    ell = model.length_scale
    mask = _free_mask(n, opts.constraint)
    if n == 1:
        return CrystalConfiguration(np.zeros((1, 3)), 0.0, True, 0.0, model, (0.0,))

    starts = []
    if guesses is not None:
        starts += [np.asarray(g, dtype=float) / ell for g in guesses]
    if opts.structured_seeds:
        starts += _structured_seeds(n, w2, opts.constraint)
    rng = np.random.default_rng(seed)
    box = 1.5 * n ** (1 / 3) * np.minimum(w2, 4.0) ** (-1 / 3)
    for _ in range(opts.n_random):
        starts.append(rng.uniform(-box, box, size=(n, 3)))
    results = []
    for s in starts:
        s = s.copy()
        s.reshape(-1)[~mask] = 0.0
        try:
            u, e, gn, ok = _newton(s, w2, mask, opts.max_iter, opts.grad_tol)
        except CoincidentIons:
            continue
        results.append((ok, e, gn, _canonical(u)))
    if not results:
        raise NotConverged("every start collapsed onto coincident ions")
    good = [r for r in results if r[0]]
    pool = good or results
    e_min = min(r[1] for r in pool)
    tie = [r for r in pool if r[1] - e_min <= 1e-10 * max(abs(e_min), 1.0)]
    tie.sort(key=lambda r: tuple(np.round(r[3].ravel(), 9)))
    ok, e, gn, u = tie[0]
    cfg = CrystalConfiguration(
        positions=u * ell,
        energy=e * model.energy_scale,
        converged=ok,
        gradient_norm=gn * model.energy_scale / ell,
        model=model,
        candidate_energies=tuple(sorted(r[1] * model.energy_scale for r in good)),
    )
    if not ok:
        raise NotConverged(f"no start reached |grad| < {opts.grad_tol:g}; best |grad| = {gn:.3g}", best=cfg)
    log.debug("equilibrium N=%d alpha=%.4f: %d/%d starts converged", n, model.alpha, len(good), len(results))
    return cfg


def relax(config: CrystalConfiguration, model: PotentialModel, constraint=None,
          max_iter=200, grad_tol=1e-12) -> CrystalConfiguration:
    """Newton-polish an existing configuration in a (possibly different) model."""
    ell = model.length_scale
    mask = _free_mask(len(config.positions), constraint)
    u0 = config.positions / ell
    u0 = u0.copy()
    u0.reshape(-1)[~mask] = 0.0
    u, e, gn, ok = _newton(u0, model.w2, mask, max_iter, grad_tol)
    return CrystalConfiguration(u * ell, e * model.energy_scale, ok, gn * model.energy_scale / ell, model)
