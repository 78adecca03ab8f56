"""Normal modes: pseudopotential Hessian eigenmodes and Floquet modes of the rf-driven crystal.

The time-dependent problem is integrated in dimensionless form with
tau = Omega t and lengths in units of ell (the pseudopotential length scale):

    u_i'' = -1/4 (a_i + 2 q_i cos(tau + phi)) u_i + g sum_j (u_i - u_j) / |u_i - u_j|^3

with g = (omega_r / Omega)^2. One rf period is tau in [0, 2 pi].
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import sqrtm

from .constants import TWO_PI, YB171, IonSpecies
from .equilibrium import (CrystalConfiguration, PotentialModel, coulomb_hessian,
                          potential_hessian)
from .errors import (NegativeEigenvalue, NotConverged, ResonantDetuning,
                     UnstableParameters)
from .trap import MathieuCoefficients, TrapConfig, mathieu_coefficients, secular_frequencies

log = logging.getLogger(__name__)

ODE_RTOL = 1e-12
ODE_ATOL = 1e-14

SUBSPACES = ("Full", "InPlane", "Axial")


@dataclass
class ModeSpectrum:
    frequencies: np.ndarray  # rad/s, ascending
    eigenvectors: np.ndarray  # columns, orthonormal
    method: str  # "Pseudopotential" or "Floquet"
    subspace: str
    positions: np.ndarray | None = None  # reference ion positions, metres
    signed_frequencies: np.ndarray | None = None  # negative values mark unstable modes
    multipliers: np.ndarray | None = None  # Floquet multipliers of the selected modes
    near_zone_edge: np.ndarray | None = None

    @property
    def stable(self) -> bool:
        sf = self.signed_frequencies if self.signed_frequencies is not None else self.frequencies
        return bool(np.all(sf >= 0))

    def __len__(self):
        return len(self.frequencies)


def _subspace_indices(n, subspace):
    idx = np.arange(3 * n).reshape(n, 3)
    if subspace == "Full":
        return idx.ravel()
    if subspace == "InPlane":
        return idx[:, :2].ravel()
    if subspace == "Axial":
        return idx[:, 2]
    raise ValueError(f"unknown subspace {subspace!r}")


def _canonical_eigenvectors(lam, vec, rtol=1e-9):
    """Deterministic basis inside degenerate eigenspaces plus a sign convention.

    Each degenerate group is re-spanned by Gram-Schmidt on the projector columns
    taken in coordinate order, so the result does not depend on LAPACK's choice.
    """
    vec = vec.copy()
    scale = max(abs(lam).max(), 1e-300)
    i = 0
    n = len(lam)
    while i < n:
        j = i + 1
        while j < n and abs(lam[j] - lam[i]) <= rtol * scale:
            j += 1
        if j - i > 1:
            sub = vec[:, i:j]
            proj = sub @ sub.T
            basis = []
            for col in proj.T:
                v = col.copy()
                for b in basis:
                    v -= (b @ v) * b
                nv = np.linalg.norm(v)
                if nv > 1e-6:
                    basis.append(v / nv)
                if len(basis) == j - i:
                    break
            vec[:, i:j] = np.array(basis).T
        i = j
    for k in range(n):
        pivot = np.flatnonzero(abs(vec[:, k]) > 1e-8)
        if len(pivot) and vec[pivot[0], k] < 0:
            vec[:, k] *= -1
    return vec


def hessian_block(config: CrystalConfiguration, subspace: str = "Full") -> np.ndarray:
    h = potential_hessian(config.positions, config.model)
    idx = _subspace_indices(config.n_ions, subspace)
    if subspace != "Full":
        rest = np.setdiff1d(np.arange(h.shape[0]), idx)
        coupling = np.abs(h[np.ix_(idx, rest)]).max() if len(rest) else 0.0
        if coupling > 1e-9 * np.abs(h).max():
            raise ValueError(f"{subspace} block is coupled to the rest of the crystal; use subspace='Full'")
    return h[np.ix_(idx, idx)]


def signed_pseudopotential_frequencies(config: CrystalConfiguration, subspace: str = "Full") -> np.ndarray:
    """sign(lambda) sqrt(|lambda| / m) for the Hessian eigenvalues, ascending."""
    lam = np.linalg.eigvalsh(hessian_block(config, subspace))
    return np.sign(lam) * np.sqrt(abs(lam) / config.model.species.mass)


def pseudopotential_modes(config: CrystalConfiguration, subspace: str = "Full") -> ModeSpectrum:
    h = hessian_block(config, subspace)
    lam, vec = np.linalg.eigh(h)
    tol = 1e-9 * abs(lam).max()
    if lam[0] < -tol:
        k = int(np.argmin(lam))
        raise NegativeEigenvalue(f"mode {k} has negative curvature {lam[k]:.3g} J/m^2",
                                 mode_index=k, eigenvalue=lam[k])
    lam = np.where(abs(lam) <= tol, 0.0, lam)
    vec = _canonical_eigenvectors(lam, vec)
    freqs = np.sqrt(lam / config.model.species.mass)
    return ModeSpectrum(freqs, vec, "Pseudopotential", subspace, positions=config.positions.copy(),
                        signed_frequencies=freqs.copy())


# ---------------------------------------------------------------------------
# Scalar Mathieu equation
# ---------------------------------------------------------------------------

def mathieu_monodromy(a: float, q: float) -> np.ndarray:
    """2x2 propagator of u'' + (a + 2 q cos 2 zeta) u = 0 over zeta in [0, pi]."""

    def rhs(z, y):
        k = a + 2 * q * np.cos(2 * z)
        return np.array([y[2], y[3], -k * y[0], -k * y[1]])

    sol = solve_ivp(rhs, (0.0, np.pi), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=1e-13, atol=1e-15)
    y = sol.y[:, -1]
    return np.array([[y[0], y[1]], [y[2], y[3]]])


def mathieu_exponent(a: float, q: float) -> float:
    """Characteristic exponent beta in the first stability region; omega = beta Omega / 2."""
    m = mathieu_monodromy(a, q)
    half_trace = 0.5 * np.trace(m)
    if abs(half_trace) > 1.0:
        raise UnstableParameters(f"(a={a:g}, q={q:g}) lies outside the stability region (|tr M|/2 = {abs(half_trace):.6g})")
    return float(np.arccos(half_trace) / np.pi)


# ---------------------------------------------------------------------------
# Full rf model, periodic orbits and Floquet modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RFModel:
    coeffs: MathieuCoefficients
    drive_frequency: float
    n_ions: int
    length_scale: float  # pseudopotential ell, metres
    coulomb_coupling: float  # g = (omega_r / Omega)^2
    species: IonSpecies = YB171

    @classmethod
    def from_trap(cls, trap: TrapConfig, n_ions: int, species: IonSpecies = YB171):
        model = PotentialModel.from_trap(trap, n_ions, species)
        return cls(mathieu_coefficients(trap, species), trap.drive_frequency, n_ions,
                   model.length_scale, (model.omega_r / trap.drive_frequency) ** 2, species)

    @property
    def rf_period(self) -> float:
        return TWO_PI / self.drive_frequency

    def acceleration(self, u, tau, phase=0.0):
        a, q = self.coeffs.a, self.coeffs.q
        acc = -0.25 * (a + 2 * q * np.cos(tau + phase)) * u
        if len(u) > 1:
            d = u[:, None, :] - u[None, :, :]
            r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
            np.fill_diagonal(r, np.inf)
            acc += self.coulomb_coupling * np.sum(d / r[..., None] ** 3, axis=1)
        return acc

    def stiffness(self, u, tau, phase=0.0):
        """Linearised restoring matrix K(tau): delta'' = -K delta."""
        a, q = self.coeffs.a, self.coeffs.q
        k = np.diag(np.tile(0.25 * (a + 2 * q * np.cos(tau + phase)), len(u)))
        if len(u) > 1:
            k += self.coulomb_coupling * coulomb_hessian(u)
        return k


def propagate(model: RFModel, state0, phase=0.0, with_monodromy=True, t_eval=None):
    """Integrate one rf period from dimensionless state (u, u') of shape (6N,)."""
    n = model.n_ions
    dim = 6 * n

    def rhs(tau, y):
        u = y[:3 * n].reshape(n, 3)
        out = np.empty_like(y)
        out[:3 * n] = y[3 * n:dim]
        out[3 * n:dim] = model.acceleration(u, tau, phase).ravel()
        if with_monodromy:
            phi = y[dim:].reshape(dim, dim)
            k = model.stiffness(u, tau, phase)
            dphi = np.empty_like(phi)
            dphi[:3 * n] = phi[3 * n:]
            dphi[3 * n:] = -k @ phi[:3 * n]
            out[dim:] = dphi.ravel()
        return out

    y0 = np.asarray(state0, dtype=float)
    if with_monodromy:
        y0 = np.concatenate([y0, np.eye(dim).ravel()])
    sol = solve_ivp(rhs, (0.0, TWO_PI), y0, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL,
                    t_eval=t_eval)
    if not sol.success:
        raise NotConverged(f"orbit integration failed: {sol.message}")
    end = sol.y[:, -1]
    mono = end[dim:].reshape(dim, dim) if with_monodromy else None
    return end[:dim], mono, sol


@dataclass
class PeriodicOrbit:
    model: RFModel
    state0: np.ndarray  # dimensionless (u, u') at the reference rf phase
    rf_phase: float
    residual: float  # metres
    monodromy: np.ndarray
    samples_tau: np.ndarray
    samples: np.ndarray  # (K, N, 3) positions in metres over one period (endpoint excluded)
    constraint: str | None = None
    stable: bool = True

    @property
    def period(self) -> float:
        return self.model.rf_period

    @property
    def mean_positions(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def harmonic_amplitudes(self, harmonic: int = 1) -> np.ndarray:
        """Per-ion vector amplitude |r_h| of the h-th rf harmonic, metres."""
        k = len(self.samples_tau)
        ph = np.exp(-1j * harmonic * self.samples_tau)
        coef = 2.0 / k * np.tensordot(ph, self.samples, axes=(0, 0))
        return np.sqrt(np.sum(abs(coef) ** 2, axis=1))


def _auto_constraint(u):
    scale = max(np.abs(u).max(), 1.0)
    if len(u) > 1 and np.abs(u[:, :2]).max() < 1e-9 * scale:
        return "axial"
    if np.abs(u[:, 2]).max() < 1e-9 * scale:
        return "planar"
    return None


def _active(n, constraint):
    mask = np.ones((n, 3), dtype=bool)
    if constraint == "planar":
        mask[:, 2] = False
    elif constraint == "axial":
        mask[:, :2] = False
    m = mask.ravel()
    return np.concatenate([m, m])


def micromotion_guess(model: RFModel, u, phase=0.0):
    """Lowest-order micromotion dressing of a static configuration at rf phase ``phase``."""
    q = model.coeffs.q
    pos = u * (1 + 0.5 * q * np.cos(phase) + q**2 / 32 * np.cos(2 * phase))
    vel = -u * (0.5 * q * np.sin(phase) + q**2 / 16 * np.sin(2 * phase))
    return np.concatenate([pos.ravel(), vel.ravel()])


def _rotation_generator(state):
    """Infinitesimal rotation about z of a (u, u') state: (x, y, z) -> (-y, x, 0) for both halves."""
    v = state.reshape(2, -1, 3)
    out = np.zeros_like(v)
    out[..., 0], out[..., 1] = -v[..., 1], v[..., 0]
    return out.ravel()


def _rotate_state(state, angle):
    c, s = np.cos(angle), np.sin(angle)
    v = state.reshape(2, -1, 3)
    out = v.copy()
    out[..., 0] = c * v[..., 0] - s * v[..., 1]
    out[..., 1] = s * v[..., 0] + c * v[..., 1]
    return out.ravel()


def find_periodic_orbit(trap: TrapConfig, guess: CrystalConfiguration, rf_phase: float = 0.0,
                        constraint="auto", tol: float = 1e-12, max_iter: int = 60,
                        n_samples: int = 64, species: IonSpecies | None = None) -> PeriodicOrbit:
    """Newton shooting for the rf-periodic orbit near a pseudopotential equilibrium.

    Solves Phi_T(X) = X for the stroboscopic map Phi_T in the 6N-dimensional
    phase space. ``constraint`` restricts the unknowns to the plane z = 0 or the
    trap axis (detected automatically from the guess by default); these
    subspaces are invariant, and restricting to them keeps the Newton system
    regular when a transverse mode goes soft. ``tol`` is in units of ell.
    """
    species = species or guess.model.species
    model = RFModel.from_trap(trap, guess.n_ions, species)
    return shoot_periodic_orbit(model, guess.positions / model.length_scale, rf_phase, constraint,
                                tol, max_iter, n_samples)


def shoot_periodic_orbit(model: RFModel, u, rf_phase: float = 0.0, constraint="auto", tol: float = 1e-12,
                         max_iter: int = 60, n_samples: int = 64) -> PeriodicOrbit:
    """Shooting core of ``find_periodic_orbit`` for a model given directly; ``u`` in units of ell."""
    n = model.n_ions
    u = np.asarray(u, dtype=float).reshape(n, 3)
    if constraint == "auto":
        constraint = _auto_constraint(u)
    act = _active(n, constraint)
    x = micromotion_guess(model, u, rf_phase)
    x[~act] = 0.0
    res = np.inf
    mono = None
    end, mono, _ = propagate(model, x, rf_phase)
    f = end - x
    for it in range(max_iter):
        res = np.abs(f).max()
        log.debug("shooting iteration %d: residual %.3e ell", it, res)
        if res < tol:
            break
        jac = (mono - np.eye(len(x)))[np.ix_(act, act)]
        step = np.linalg.lstsq(jac, -f[act], rcond=1e-12)[0]
        # The component of the step along a rigid rotation about z is applied as an exact
        # rotation: for planar crystals that rotation is nearly free, the Jacobian is almost
        # singular along it, and an additive step of that size would shear the crystal.
        gen = _rotation_generator(x)[act]
        g2 = gen @ gen
        theta = (step @ gen) / g2 if g2 > 0 else 0.0
        rest = step - theta * gen
        # Damping by the natural monotonicity test: the simplified Newton correction with
        # the old Jacobian must shrink.
        size = np.linalg.norm(step)
        lam = 1.0
        for _ in range(10):
            trial = _rotate_state(x, lam * theta)
            trial[act] += lam * rest
            end_t, _, _ = propagate(model, trial, rf_phase, with_monodromy=False)
            simplified = np.linalg.lstsq(jac, -(end_t - trial)[act], rcond=1e-12)[0]
            if np.linalg.norm(simplified) <= (1 - 0.25 * lam) * size:
                break
            lam *= 0.5
        x = trial
        end, mono, _ = propagate(model, x, rf_phase)
        f = end - x
    else:
        raise NotConverged(f"periodic orbit residual {res:.3e} ell after {max_iter} iterations")
    taus = np.linspace(0, TWO_PI, n_samples, endpoint=False)
    _, _, sol = propagate(model, x, rf_phase, with_monodromy=False, t_eval=taus)
    samples = sol.y[:3 * n].T.reshape(n_samples, n, 3) * model.length_scale
    mult = np.linalg.eigvals(mono)
    stable = bool(np.all(abs(abs(mult) - 1) < 1e-6))
    return PeriodicOrbit(model, x, rf_phase, res * model.length_scale, mono, taus, samples,
                         constraint, stable)


def _symplectic_form(dim):
    h = dim // 2
    j = np.zeros((dim, dim))
    j[:h, h:] = np.eye(h)
    j[h:, :h] = -np.eye(h)
    return j


def symplectic_defect(mono: np.ndarray) -> float:
    j = _symplectic_form(len(mono))
    return float(np.abs(mono.T @ j @ mono - j).max())


def _block_indices(n, subspace):
    pos = _subspace_indices(n, subspace)
    return np.concatenate([pos, pos + 3 * n]), len(pos)


def floquet_modes(orbit: PeriodicOrbit, subspace: str = "Full", unit_tol: float = 1e-6) -> ModeSpectrum:
    """Floquet-Lyapunov modes from the eigenvalues of the one-period monodromy.

    A stable pair exp(+-i w T) gives w = arg / T in (0, Omega/2]. Each pair is
    summarised by c = Re(lambda + 1/lambda)/2; the signed frequency is
    arccos(c)/T when |c| <= 1 and -arccosh(c)/T beyond, so it passes
    continuously through zero when a mode softens. Position parts of the
    eigenvectors are phase-aligned, made real and Lowdin-orthonormalised.
    """
    n = orbit.model.n_ions
    idx, npos = _block_indices(n, subspace)
    rest = np.setdiff1d(np.arange(6 * n), idx)
    m = orbit.monodromy
    if len(rest) and np.abs(m[np.ix_(idx, rest)]).max() > 1e-8 * np.abs(m).max():
        raise ValueError(f"{subspace} block of the monodromy is coupled; use subspace='Full'")
    block = m[np.ix_(idx, idx)]
    lam, vec = np.linalg.eig(block)
    # one representative per pair: upper half plane, or the outside root of a real pair
    order = np.lexsort((-abs(lam), -lam.imag))
    chosen = []
    used = np.zeros(len(lam), dtype=bool)
    for i in order:
        if used[i]:
            continue
        partner_target = 1.0 / lam[i] if abs(lam[i].imag) < 1e-10 else np.conj(lam[i])
        used[i] = True
        d = np.where(used, np.inf, abs(lam - partner_target))
        j = int(np.argmin(d))
        if np.isfinite(d[j]):
            used[j] = True
        chosen.append(i)
        if len(chosen) == npos:
            break
    lam_c = lam[chosen]
    c = np.real(0.5 * (lam_c + 1.0 / lam_c))
    two_pi = TWO_PI
    signed = np.where(c <= 1.0, np.arccos(np.clip(c, -1.0, 1.0)), -np.arccosh(np.maximum(c, 1.0)))
    omega_unit = orbit.model.drive_frequency / two_pi  # converts angle per period to rad/s
    signed_f = signed * omega_unit
    freqs = np.abs(np.angle(lam_c)) * omega_unit
    unstable = abs(abs(lam_c) - 1) > unit_tol
    freqs = np.where(unstable & (c > 1), 0.0, freqs)
    order = np.argsort(signed_f, kind="stable")
    pos = vec[:npos, chosen][:, order]
    k = np.argmax(abs(pos), axis=0)
    pos = pos * np.exp(-1j * np.angle(pos[k, np.arange(pos.shape[1])]))
    real = pos.real
    real /= np.linalg.norm(real, axis=0)
    overlap = real.T @ real
    real = real @ np.real(np.linalg.inv(sqrtm(overlap)))
    for col in range(real.shape[1]):
        piv = np.flatnonzero(abs(real[:, col]) > 1e-8)
        if len(piv) and real[piv[0], col] < 0:
            real[:, col] *= -1
    edge = freqs[order] > 0.45 * orbit.model.drive_frequency
    return ModeSpectrum(freqs[order], real, "Floquet", subspace, positions=orbit.mean_positions,
                        signed_frequencies=signed_f[order], multipliers=lam_c[order], near_zone_edge=edge)


# ---------------------------------------------------------------------------
# Spin-spin couplings
# ---------------------------------------------------------------------------

def spin_spin_couplings(spectrum: ModeSpectrum, eta, detuning: float, rabi: float,
                        guard: float = TWO_PI * 1e3, positions=None):
    """Ising couplings J_ij = Omega_R^2 sum_k eta_ik eta_jk w_k / (mu^2 - w_k^2), rad/s.

    ``eta`` is the per-mode Lamb-Dicke parameter (scalar or array); eta_ik = b_ik eta_k.
    Returns (J, p) with p the power-law range exponent from a least-squares fit
    of log|J_ij| against log d_ij.
    """
    w = np.asarray(spectrum.frequencies, dtype=float)
    if np.min(abs(detuning - w)) < guard:
        raise ResonantDetuning(f"detuning within {guard / TWO_PI:.3g} Hz of a mode")
    eta = np.broadcast_to(np.asarray(eta, dtype=float), w.shape)
    b = spectrum.eigenvectors
    weights = eta**2 * w / (detuning**2 - w**2)
    j = rabi**2 * (b * weights) @ b.T
    np.fill_diagonal(j, 0.0)
    pos = spectrum.positions if positions is None else positions
    p = float("nan")
    if pos is not None and len(w) > 2:
        iu = np.triu_indices(len(w), 1)
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)[iu]
        jj = abs(j[iu])
        ok = jj > 0
        slope = np.polyfit(np.log(d[ok]), np.log(jj[ok]), 1)[0]
        p = float(-slope)
    return j, p
