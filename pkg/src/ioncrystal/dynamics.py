"""Molecular dynamics of ions in the rf-driven (or pseudopotential) trap.

Velocity Verlet under trap + Coulomb forces, with optional Doppler cooling
beams (mean scattering force or Poissonian recoil kicks with isotropic
emission) and an optional spatially uniform white-noise electric field.
The loop itself lives in ``_md_kernel`` and is compiled with numba.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging

import numpy as np

from . import _md_kernel
from .constants import HBAR, K_B, TWO_PI, YB171, IonSpecies
from .equilibrium import (CrystalConfiguration, PotentialModel, find_equilibrium,
                          potential_hessian, total_potential)
from .errors import CoincidentIons, StepTooLarge, ValidationError, WindowTooShort
from .trap import TrapConfig, mathieu_coefficients

log = logging.getLogger(__name__)

FORCE_MODELS = ("FullRF", "Pseudopotential")


@dataclass(frozen=True)
class CoolingLaser:
    direction: tuple = (np.cos(np.pi / 4) / np.sqrt(2), np.cos(np.pi / 4) / np.sqrt(2), np.sin(np.pi / 4))
    saturation: float = 0.3
    detuning: float = -TWO_PI * 9.8e6  # -Gamma/2 for Yb+
    linewidth: float = TWO_PI * 19.6e6
    wavelength: float = 369.5e-9

    def __post_init__(self):
        if self.saturation < 0:
            raise ValueError("saturation must be non-negative")
        if abs(np.linalg.norm(self.direction) - 1) > 1e-9:
            raise ValueError("laser direction must be a unit vector")

    @property
    def wavevector(self) -> np.ndarray:
        return TWO_PI / self.wavelength * np.asarray(self.direction, dtype=float)


@dataclass(frozen=True)
class SimulationParams:
    timestep: float
    duration: float
    force_model: str = "FullRF"
    seed: int = 0
    recoil: bool = True
    field_noise_psd: float = 0.0  # one-sided S_E, V^2 m^-2 Hz^-1
    sample_every: int = 100
    rf_phase: float = 0.0

    def __post_init__(self):
        if self.force_model not in FORCE_MODELS:
            raise ValueError(f"force model must be one of {FORCE_MODELS}")
        if self.timestep <= 0 or self.duration < self.timestep:
            raise ValueError("need 0 < timestep <= duration")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (K, N, 3)
    velocities: np.ndarray
    rf_phase: np.ndarray  # drive phase (Omega t + phi) mod 2 pi at each sample
    drive_frequency: float
    force_model: str
    q: np.ndarray  # per-axis Mathieu q used by the stroboscopic correction
    species: IonSpecies
    length_scale: float

    @property
    def n_ions(self) -> int:
        return self.positions.shape[1]

    def final_state(self):
        return self.positions[-1].copy(), self.velocities[-1].copy()

    def stroboscopic_mask(self, phase: float = 0.0, tol: float = 1e-6):
        d = np.angle(np.exp(1j * (self.rf_phase - phase)))
        return np.abs(d) < tol

    def micromotion_amplitudes(self) -> np.ndarray:
        """Per-ion |r_1| from the first rf harmonic of the sampled positions (metres).

        Uses the largest whole number of rf periods available in the samples.
        """
        period = TWO_PI / self.drive_frequency
        span = self.times[-1] - self.times[0]
        dt = self.times[1] - self.times[0]
        n_keep = int(round(np.floor(span / period + 1e-9) * period / dt))
        t = self.times[:n_keep]
        x = self.positions[:n_keep]
        ph = np.exp(-1j * self.rf_phase[:n_keep])
        coef = 2.0 / n_keep * np.tensordot(ph, x - x.mean(axis=0), axes=(0, 0))
        return np.sqrt(np.sum(abs(coef[:, :2]) ** 2, axis=1)) if len(t) else np.zeros(self.n_ions)

    def mean_positions(self) -> np.ndarray:
        period = TWO_PI / self.drive_frequency
        dt = self.times[1] - self.times[0]
        span = self.times[-1] - self.times[0]
        n_keep = max(1, int(round(np.floor(span / period + 1e-9) * period / dt)))
        return self.positions[:n_keep].mean(axis=0)


@dataclass
class TemperatureRecord:
    times: np.ndarray
    T_r: np.ndarray
    T_z: np.ndarray


def _axis_constants(trap: TrapConfig, species: IonSpecies, force_model: str):
    if force_model == "Pseudopotential":
        from .trap import secular_frequencies
        w = secular_frequencies(trap, species).omegas
        return w**2, np.zeros(3), np.zeros(3)
    c = mathieu_coefficients(trap, species)
    quarter = 0.25 * trap.drive_frequency**2
    return quarter * c.a, quarter * 2 * c.q, c.q


def doppler_force(velocity, laser: CoolingLaser, species: IonSpecies = YB171, rng=None, dt=None):
    """Scattering force on ions with the given velocities, shape (N, 3) or (3,).

    Without ``rng`` the mean force hbar k Gamma/2 s / (1 + s + (2 delta_eff / Gamma)^2)
    is returned. With ``rng`` and ``dt`` a stochastic sample over one step is
    returned: Poissonian absorption kicks along k plus isotropic emission kicks.
    """
    v = np.atleast_2d(np.asarray(velocity, dtype=float))
    k = laser.wavevector
    delta_eff = laser.detuning - v @ k
    rate = 0.5 * laser.linewidth * laser.saturation / (
        1 + laser.saturation + (2 * delta_eff / laser.linewidth) ** 2)
    if rng is None:
        f = HBAR * rate[:, None] * k[None, :]
    else:
        if dt is None:
            raise ValueError("a stochastic sample needs the step length dt")
        events = rng.poisson(rate * dt)
        f = np.zeros_like(v)
        kmag = np.linalg.norm(k)
        for i, m in enumerate(events):
            if m:
                e = rng.normal(size=(m, 3))
                e /= np.linalg.norm(e, axis=1, keepdims=True)
                f[i] = HBAR * (m * k + kmag * e.sum(axis=0)) / dt
    return f[0] if np.ndim(velocity) == 1 else f


def integrate(positions, velocities, trap: TrapConfig, params: SimulationParams, lasers=(),
              species: IonSpecies = YB171, t0: float = 0.0) -> Trajectory:
    """Velocity-Verlet trajectory from the given SI state (arrays of shape (N, 3))."""
    pos = np.array(positions, dtype=float, copy=True)
    vel = np.array(velocities, dtype=float, copy=True)
    n = len(pos)
    model = PotentialModel.from_trap(trap, n, species)
    ell = model.length_scale
    if params.force_model == "FullRF" and params.timestep > trap.rf_period / 50 * (1 + 1e-12):
        raise ValidationError("FullRF needs a timestep of at most T_rf / 50")
    if n > 1:
        d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        if d.min() < 1e-12 * ell:
            raise CoincidentIons("two ions occupy the same position")
    k_static, k_rf, q = _axis_constants(trap, species, params.force_model)
    n_steps = int(round(params.duration / params.timestep))
    kvec = np.array([l.wavevector for l in lasers], dtype=float).reshape(-1, 3)
    sat = np.array([l.saturation for l in lasers], dtype=float)
    det = np.array([l.detuning for l in lasers], dtype=float)
    gam = np.array([l.linewidth for l in lasers], dtype=float)
    sigma = 0.0
    if params.field_noise_psd > 0:
        # one-sided PSD: the field averaged over dt has variance S_E / (2 dt)
        sigma = species.charge / species.mass * np.sqrt(params.field_noise_psd / (2 * params.timestep)) * params.timestep
    ps, vs, ts, done = _md_kernel.run(
        pos, vel, float(t0), float(params.timestep), n_steps, int(params.sample_every),
        k_static.astype(float), k_rf.astype(float), float(trap.drive_frequency), float(params.rf_phase),
        species.coulomb_strength / species.mass, kvec, sat, det, gam, bool(params.recoil),
        HBAR / species.mass, float(sigma), int(params.seed), 0.1 * ell)
    if done < n_steps:
        raise StepTooLarge(f"an ion moved more than 0.1 ell in one step (step {done + 1})")
    phase = np.mod(trap.drive_frequency * ts + params.rf_phase, TWO_PI)
    return Trajectory(ts, ps, vs, phase, trap.drive_frequency, params.force_model, q, species, ell)


def dressing_factors(q):
    """Eq.-of-motion factors at rf phase 0: positions x(1 + q/2 + q^2/32), velocities x(1 - q/2 + q^2/32)."""
    q = np.asarray(q, dtype=float)
    return 1 + 0.5 * q + q**2 / 32, 1 - 0.5 * q + q**2 / 32


def thermal_state(config: CrystalConfiguration, temperature: float, rng, trap: TrapConfig | None = None,
                  force_model: str = "FullRF", soft_fraction: float = 0.2):
    """Equilibrium plus Boltzmann-distributed secular displacements and velocities.

    Modes softer than ``soft_fraction`` times the weakest trap frequency (the
    near-free rotation of a planar crystal) get no displacement: their thermal
    amplitude exceeds the range of the harmonic approximation. Velocities are
    drawn for every degree of freedom.

    For FullRF the state is dressed with the lowest-order micromotion at rf
    phase 0 (see ``dressing_factors``); ``trap`` must then be given.
    """
    model = config.model
    m = model.species.mass
    h = potential_hessian(config.positions, model)
    lam, vec = np.linalg.eigh(h)
    cut = m * (soft_fraction * model.omegas.min()) ** 2
    lam_pos = np.where(lam > cut, lam, np.inf)
    amp = rng.normal(size=len(lam)) * np.sqrt(K_B * temperature / lam_pos)
    disp = (vec @ amp).reshape(-1, 3)
    vel = rng.normal(size=config.positions.shape) * np.sqrt(K_B * temperature / m)
    pos = config.positions + disp
    if force_model == "FullRF":
        if trap is None:
            raise ValueError("FullRF dressing needs the trap")
        fp, fv = dressing_factors(mathieu_coefficients(trap, model.species).q)
        pos, vel = pos * fp, vel * fv
    return pos, vel


def secular_temperature(traj: Trajectory, window: float, method: str = "stroboscopic") -> TemperatureRecord:
    """Radial and axial secular temperatures averaged over consecutive windows.

    stroboscopic: samples at rf phase 0, velocities divided by 1 - q/2 + q^2/32;
    naive: every sample, no micromotion removal;
    harmonic: every sample, minus a per-ion first-harmonic fit in each window.
    """
    period = TWO_PI / traj.drive_frequency
    if traj.force_model == "FullRF" and window < period * (1 - 1e-9):
        raise WindowTooShort("window must cover at least one rf period")
    m = traj.species.mass
    t = traj.times
    v = traj.velocities
    if method == "stroboscopic":
        sel = traj.stroboscopic_mask()
        _, fv = dressing_factors(traj.q if traj.force_model == "FullRF" else np.zeros(3))
        t, v = t[sel], v[sel] / fv
    elif method not in ("naive", "harmonic"):
        raise ValueError(f"unknown method {method!r}")
    edges = np.arange(traj.times[0], traj.times[-1] + 0.5 * window, window)
    if len(edges) < 2:
        raise WindowTooShort("trajectory shorter than one window")
    centres, tr, tz = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (t >= lo - 1e-15) & (t < hi - 1e-15)
        if not sel.any():
            continue
        vw = v[sel]
        if method == "harmonic":
            tt = t[sel]
            ph = traj.rf_phase[np.isin(traj.times, tt)]
            basis = np.stack([np.ones_like(tt), np.cos(ph), np.sin(ph)], axis=1)
            x = traj.positions[np.isin(traj.times, tt)].reshape(len(tt), -1)
            coef = np.linalg.lstsq(basis, x, rcond=None)[0]
            w = traj.drive_frequency
            vmm = (np.stack([np.zeros_like(tt), -w * np.sin(ph), w * np.cos(ph)], axis=1) @ coef)
            vw = vw - vmm.reshape(vw.shape)
        centres.append(0.5 * (lo + hi))
        tr.append(m * np.mean(vw[..., 0] ** 2 + vw[..., 1] ** 2) / (2 * K_B))
        tz.append(m * np.mean(vw[..., 2] ** 2) / K_B)
    if not centres:
        raise WindowTooShort("no samples fall inside any window")
    return TemperatureRecord(np.array(centres), np.array(tr), np.array(tz))


def total_energy(traj: Trajectory, trap: TrapConfig) -> np.ndarray:
    """Kinetic plus pseudopotential energy per sample (meaningful for Pseudopotential runs)."""
    model = PotentialModel.from_trap(trap, traj.n_ions, traj.species)
    kin = 0.5 * traj.species.mass * np.sum(traj.velocities**2, axis=(1, 2))
    pot = np.array([total_potential(p, model) for p in traj.positions])
    return kin + pot


@dataclass
class MeltSeries:
    times: np.ndarray
    order_parameter: np.ndarray
    melted: np.ndarray
    permutations: int

    @property
    def any_melt(self) -> bool:
        return bool(self.melted.any())


def _greedy_assignment(pos, sites):
    d = np.linalg.norm(pos[:, None, :] - sites[None, :, :], axis=-1)
    n = len(pos)
    assign = -np.ones(n, dtype=int)
    taken = np.zeros(n, dtype=bool)
    for flat in np.argsort(d, axis=None, kind="stable"):
        i, j = divmod(int(flat), n)
        if assign[i] < 0 and not taken[j]:
            assign[i] = j
            taken[j] = True
    return assign


def _rotate_z(p, angle):
    c, s = np.cos(angle), np.sin(angle)
    out = p.copy()
    out[:, 0], out[:, 1] = c * p[:, 0] - s * p[:, 1], s * p[:, 0] + c * p[:, 1]
    return out


def melt_monitor(traj: Trajectory, reference: CrystalConfiguration, threshold: float = 0.1,
                 stroboscopic: bool = True, align_rotation: bool = True,
                 max_samples: int | None = 2000) -> MeltSeries:
    """Lindemann-type order parameter: RMS site displacement over nearest-neighbour spacing.

    Ions are matched to reference sites greedily at every sample; a change of the
    assignment between samples counts as a permutation event. With
    ``align_rotation`` a rigid rotation about z is removed first (alternating
    matching and 2D Procrustes), since the in-plane rotation of a planar
    crystal is nearly free and is not disorder. Long trajectories are
    thinned to at most ``max_samples`` evenly spaced samples.
    """
    sites = reference.positions
    d_nn = reference.nearest_neighbour_distance() if reference.n_ions > 1 else reference.model.length_scale
    pos = traj.positions
    times = traj.times
    if stroboscopic and traj.force_model == "FullRF":
        sel = traj.stroboscopic_mask()
        fp, _ = dressing_factors(traj.q)
        pos, times = pos[sel] / fp, times[sel]
    if max_samples is not None and len(pos) > max_samples:
        keep = np.unique(np.linspace(0, len(pos) - 1, max_samples).round().astype(int))
        pos, times = pos[keep], times[keep]
    order = np.empty(len(pos))
    perms = 0
    prev = None
    angle = 0.0
    for k, p in enumerate(pos):
        if align_rotation and len(p) > 1:
            for _ in range(3):
                a = _greedy_assignment(_rotate_z(p, -angle), sites)
                s_xy, p_xy = sites[a][:, :2], p[:, :2]
                cross = np.sum(s_xy[:, 0] * p_xy[:, 1] - s_xy[:, 1] * p_xy[:, 0])
                dot = np.sum(s_xy * p_xy)
                angle = np.arctan2(cross, dot)
            p = _rotate_z(p, -angle)
        a = _greedy_assignment(p, sites)
        order[k] = np.sqrt(np.mean(np.sum((p - sites[a]) ** 2, axis=1))) / d_nn
        if prev is not None and np.any(a != prev):
            perms += 1
        prev = a
    return MeltSeries(times, order, order > threshold, perms)


@dataclass
class HeatingResult:
    rate_r: float
    rate_r_err: float
    rate_z: float
    rate_z_err: float
    r_squared_r: float
    heat_times: np.ndarray
    T_r: np.ndarray  # (seeds, times)
    T_z: np.ndarray
    melt_count: int
    records: list = field(default_factory=list, repr=False)


def _linear_fit(t, y):
    """Slope, its standard error, and R^2 of an ordinary least-squares line."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = max(len(t) - 2, 1)
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(a.T @ a)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1 - resid @ resid / ss_tot if ss_tot > 0 else float("nan")
    return coef[0], np.sqrt(cov[0, 0]), r2


def child_seeds(master: int, count: int):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master).spawn(count)]


def rf_heating_experiment(n_ions: int, trap: TrapConfig, heat_times, n_seeds: int = 4,
                          initial_temperature: float = 3e-3, window: float = 20e-6,
                          lasers=(), cool_time: float = 0.0, steps_per_period: int = 100,
                          field_noise_psd: float = 0.0, seed: int = 0, species: IonSpecies = YB171,
                          melt_threshold: float = 0.1, threads: int = 1) -> HeatingResult:
    """Cool (optionally), switch the beams off, and track T_r, T_z under the full rf drive.

    Temperatures at each heat time are averaged over ``window`` starting at that
    time. Rates are least-squares slopes over all (seed, time) points of
    non-melted trajectories, with standard errors. Seeds run on ``threads``
    worker threads (the compiled loop releases the GIL); the result does not
    depend on the thread count.
    """
    heat_times = np.asarray(sorted(heat_times), dtype=float)
    model = PotentialModel.from_trap(trap, n_ions, species)
    ref = find_equilibrium(model, seed)
    dt = trap.rf_period / steps_per_period
    span = heat_times[-1] + window
    seeds = child_seeds(seed, n_seeds)

    def one(s):
        rng = np.random.default_rng(s)
        pos, vel = thermal_state(ref, initial_temperature, rng, trap)
        t_start = 0.0
        if lasers and cool_time > 0:
            prep = integrate(pos, vel, trap, SimulationParams(dt, cool_time, seed=s % 2**31,
                                                              sample_every=steps_per_period),
                             lasers, species)
            pos, vel = prep.final_state()
            t_start = prep.times[-1]
        params = SimulationParams(dt, span, seed=(s >> 1) % 2**31, sample_every=steps_per_period,
                                  field_noise_psd=field_noise_psd)
        traj = integrate(pos, vel, trap, params, (), species, t0=t_start)
        traj.times = traj.times - t_start
        rec = secular_temperature(traj, window)
        melted = melt_monitor(traj, ref, melt_threshold).any_melt
        tr = [rec.T_r[(rec.times >= th) & (rec.times < th + window)].mean() for th in heat_times]
        tz = [rec.T_z[(rec.times >= th) & (rec.times < th + window)].mean() for th in heat_times]
        return rec, melted, tr, tz

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            outcomes = list(pool.map(one, seeds))
    else:
        outcomes = [one(s) for s in seeds]
    records = [o[0] for o in outcomes]
    melts = sum(o[1] for o in outcomes)
    all_r = [o[2] for o in outcomes if not o[1]]
    all_z = [o[3] for o in outcomes if not o[1]]
    all_r = np.array(all_r).reshape(-1, len(heat_times))
    all_z = np.array(all_z).reshape(-1, len(heat_times))
    if len(all_r) == 0:
        nan = float("nan")
        return HeatingResult(nan, nan, nan, nan, nan, heat_times, all_r, all_z, melts, records)
    tt = np.tile(heat_times, len(all_r))
    sr, er, _ = _linear_fit(tt, all_r.ravel())
    sz, ez, _ = _linear_fit(tt, all_z.ravel())
    _, _, r2 = _linear_fit(heat_times, all_r.mean(axis=0))
    return HeatingResult(sr, er, sz, ez, r2, heat_times, all_r, all_z, melts, records)
