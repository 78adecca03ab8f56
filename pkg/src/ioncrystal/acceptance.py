"""Acceptance checks, one function per numbered criterion.

Each check returns a ``CriterionResult``. ``run_all`` is what the ``validate``
subcommand and ``tests/test_acceptance.py`` call. Tolerances are the ones the
criteria state; nothing here is tuned to make a check pass.
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np

from .constants import TWO_PI, YB171
from .dynamics import SimulationParams, integrate, rf_heating_experiment, thermal_state
from .equilibrium import (PotentialModel, find_equilibrium, scaled_energy, scaled_gradient,
                          scaled_hessian)
from .modes import (RFModel, find_periodic_orbit, floquet_modes, mathieu_exponent,
                    pseudopotential_modes, shoot_periodic_orbit, spin_spin_couplings, symplectic_defect)
from .phases import BOUNDARIES, classify, phase_diagram
from .thermometry import (fit_heating_rate, fit_voigt, heating_conversions, lorentz_fwhm,
                          ratio_to_nbar, synthetic_scan)
from .trap import (MathieuCoefficients, TrapConfig, lamb_dicke, mathieu_coefficients, secular_frequencies,
                   trap_at_alpha)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number:2d} {self.title}: {self.detail} ({self.elapsed:.1f} s)"


def _within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def criterion_1():
    q = abs(mathieu_coefficients(TrapConfig()).q_x)
    return abs(q - 0.10) <= 0.005, f"q = {q:.5f} (target 0.10 +- 0.005)", {"q": q}


def criterion_2():
    eta = float(lamb_dicke(YB171, math.radians(53.0), TWO_PI * 900e3, 355e-9))
    return abs(eta - 0.16) <= 0.005, f"eta = {eta:.4f} (target 0.16 +- 0.005)", {"eta": eta}


def criterion_3():
    lw = lorentz_fwhm(TWO_PI * 19.6e6, 0.3) / TWO_PI / 1e6
    return _within(lw, 22.0, 0.02), f"Lorentzian FWHM = 2pi x {lw:.3f} MHz (target 22 +- 2%)", {"fwhm_mhz": lw}


def criterion_4():
    tdot, s_e = heating_conversions(100.0, TWO_PI * 900e3)
    ok_t = _within(tdot, 0.004, 0.05)
    ok_s = _within(s_e, 2.65e-12, 0.05)
    detail = (f"dT/dt = {tdot:.5f} K/s ({'ok' if ok_t else 'outside'} 0.004 +- 5%), "
              f"S_E = {s_e:.4g} ({'ok' if ok_s else 'outside'} 2.65e-12 +- 5%)")
    return ok_t and ok_s, detail, {"tdot": tdot, "s_e": s_e}


def _axial_com_frequency(config):
    """Frequency of the Hessian eigenvector with the largest overlap on rigid axial translation."""
    spec = pseudopotential_modes(config, "Full")
    n = config.n_ions
    com = np.zeros(3 * n)
    com[2::3] = 1 / math.sqrt(n)
    k = int(np.argmax(abs(com @ spec.eigenvectors)))
    return spec.frequencies[k]


def criterion_5(n_max=19):
    trap = trap_at_alpha(2.0, TrapConfig())
    wz = secular_frequencies(trap).omega_z
    worst = 0.0
    for n in range(1, n_max + 1):
        cfg = find_equilibrium(PotentialModel.from_trap(trap, n))
        worst = max(worst, abs(_axial_com_frequency(cfg) / wz - 1))
    return worst < 1e-9, f"max |w_COM / w_z - 1| = {worst:.2e} over N = 1..{n_max} (limit 1e-9)", {"worst": worst}


MATHIEU_POINTS = ((0.0, 0.10), (-0.002, 0.10), (-0.005, 0.20), (-0.01, 0.30), (-0.02, 0.45), (-0.03, 0.60))


def criterion_6(points=MATHIEU_POINTS):
    """Single ion with a_x = a_y = a, q_x = -q_y = q, a_z = -2a; zero modes (a = 0 axially) are skipped."""
    drive = TWO_PI * 21e6
    worst = 0.0
    for a, q in points:
        model = RFModel(MathieuCoefficients(a, a, -2 * a, q, -q), drive, 1, 1.0, 0.0)
        orbit = shoot_periodic_orbit(model, np.array([[0.01, -0.02, 0.0]]))
        got = np.sort(floquet_modes(orbit).frequencies) / (0.5 * drive)
        want = [mathieu_exponent(a, q), mathieu_exponent(a, -q), mathieu_exponent(-2 * a, 0.0) if a < 0 else 0.0]
        want = np.sort(want)
        for g, w in zip(got, want):
            if w > 0:
                worst = max(worst, abs(g / w - 1))
    return worst < 1e-6, f"max relative deviation {worst:.2e} over {len(points)} (a, q) points (limit 1e-6)", \
        {"worst": worst}


def criterion_7():
    trap = trap_at_alpha(2.0, TrapConfig())
    cfg = find_equilibrium(PotentialModel.from_trap(trap, 7))
    ps = pseudopotential_modes(cfg, "Axial").frequencies
    fl = floquet_modes(find_periodic_orbit(trap, cfg), "Axial").frequencies
    delta = (ps - fl) / TWO_PI / 1e3
    others = float(np.max(abs(delta[1:])))
    lowest = float(abs(delta[0]))
    ok = others <= 3.0 and lowest >= 5.0
    detail = (f"lowest-mode delta {lowest:.2f} kHz (need >= 5), other modes max {others:.2f} kHz (need <= 3); "
              f"pseudo {np.round(ps / TWO_PI / 1e3, 2).tolist()} kHz, Floquet {np.round(fl / TWO_PI / 1e3, 2).tolist()} kHz")
    return ok, detail, {"delta_khz": delta.tolist()}


def _monotone(values, direction):
    d = np.diff(values)
    return bool(np.all(d <= 0)) if direction < 0 else bool(np.all(d >= 0))


def criterion_8(n_range=range(3, 20), tol_alpha=1e-3):
    eps = TrapConfig().radial_asymmetry
    pseudo = phase_diagram(n_range, "Pseudopotential", tol_alpha)
    floq = phase_diagram(n_range, "Floquet", tol_alpha, boundaries=(BOUNDARIES[1],))
    chain = np.array([p.alpha_critical for p in pseudo if p.boundary == BOUNDARIES[0]])
    planar = np.array([p.alpha_critical for p in pseudo if p.boundary == BOUNDARIES[1]])
    planar_f = np.array([p.alpha_critical for p in floq])
    failures = [f"N={p.n_ions} {p.boundary}: {p.error}" for p in pseudo + floq if p.error]
    oracle = math.sqrt(5 / 12) / eps
    n3 = abs(chain[0] - oracle) if list(n_range)[0] == 3 else float("nan")
    rel = float(np.max(abs(planar_f / planar - 1)))
    ok = (not failures and _monotone(chain, -1) and _monotone(planar, +1) and n3 <= 1e-3 and rel < 0.10)
    detail = (f"chain monotone {_monotone(chain, -1)}, planar monotone {_monotone(planar, +1)}, "
              f"|alpha_c(3) - {oracle:.5f}| = {n3:.1e}, max Floquet/pseudo 2D deviation {rel:.2%}"
              + (f", failures: {failures}" if failures else ""))
    return ok, detail, {"chain": chain.tolist(), "planar": planar.tolist(), "planar_floquet": planar_f.tolist()}


def criterion_9(alpha=2.5, periods=200, sample_every=5):
    """13 ions in the radial plane, started at rest on the dressed equilibrium."""
    trap = trap_at_alpha(alpha, TrapConfig())
    cfg = find_equilibrium(PotentialModel.from_trap(trap, 13))
    label = classify(cfg).label
    pos, vel = thermal_state(cfg, 0.0, np.random.default_rng(0), trap)
    period = trap.rf_period
    traj = integrate(pos, vel, trap, SimulationParams(period / 100, periods * period, recoil=False,
                                                       sample_every=sample_every))
    amp = traj.micromotion_amplitudes()
    mean = traj.mean_positions()
    r = np.linalg.norm(mean[:, :2], axis=1)
    q = abs(mathieu_coefficients(trap).q_x)
    slope = float(np.sum(amp * r) / np.sum(r * r))
    dev = float(np.linalg.norm(mean - cfg.positions, axis=1).max() / cfg.nearest_neighbour_distance())
    ok = label == "Radial2D" and _within(slope, q / 2, 0.05) and dev < 0.02
    detail = f"{label}; slope/(q/2) = {slope / (q / 2):.4f} (+-5%), max mean-position offset {dev:.2%} of d_nn (< 2%)"
    return ok, detail, {"slope_ratio": slope / (q / 2), "offset": dev}


def criterion_10(heat_times=np.arange(0.0, 10.01e-3, 1e-3), n_seeds=8, window=200e-6, seed=0):
    """Intrinsic rf heating only: no cooling beams, no field noise, 7 ions at alpha = 2 from 3 mK."""
    trap = trap_at_alpha(2.0, TrapConfig())
    res = rf_heating_experiment(7, trap, heat_times, n_seeds=n_seeds, initial_temperature=3e-3,
                                window=window, seed=seed)
    ratio = res.rate_r / res.rate_z if res.rate_z != 0 else float("inf")
    ok = res.rate_r > 0 and (res.rate_z <= 0 or ratio >= 10) and res.r_squared_r > 0.9
    detail = (f"dT_r/dt = {res.rate_r:.3g} +- {res.rate_r_err:.2g} K/s, dT_z/dt = {res.rate_z:.3g} +- "
              f"{res.rate_z_err:.2g} K/s, ratio {ratio:.3g} (need >= 10), R^2 = {res.r_squared_r:.3f} (need > 0.9), "
              f"melted {res.melt_count}/{n_seeds}")
    return ok, detail, {"rate_r": res.rate_r, "rate_z": res.rate_z, "r2": res.r_squared_r}


def criterion_11(seed=0):
    rng = np.random.default_rng(seed)
    theta = math.pi / 4
    lw = lorentz_fwhm(YB171.natural_linewidth, 0.3)
    errs = [abs(fit_voigt(synthetic_scan(t_r, theta=theta, rng=rng), lw, theta).T_r / t_r - 1)
            for t_r in (3e-3, 30e-3, 300e-3)]
    times = np.array([0.0, 80e-3, 160e-3])
    temps = [fit_voigt(synthetic_scan(3e-3 + 1.04 * t, theta=theta, rng=rng), lw, theta).T_r for t in times]
    slope = fit_heating_rate(times, temps)[0]
    nbar = ratio_to_nbar(2.5 / 3.5)
    ok = max(errs) <= 0.10 and _within(slope, 1.04, 0.10) and abs(nbar - 2.5) < 1e-12
    detail = (f"Voigt T_r errors {[f'{e:.2%}' for e in errs]} (<= 10%), slope {slope:.3f} K/s (1.04 +- 10%), "
              f"nbar(5/7) = {nbar:.12f}")
    return ok, detail, {"errors": errs, "slope": slope}


def _range_exponent(n_ions, alpha, detuning_above_com=TWO_PI * 50e3, rabi=TWO_PI * 1e6):
    trap = trap_at_alpha(alpha, TrapConfig())
    cfg = find_equilibrium(PotentialModel.from_trap(trap, n_ions))
    mu = secular_frequencies(trap).omega_z + detuning_above_com
    ps = pseudopotential_modes(cfg, "Axial")
    fl = floquet_modes(find_periodic_orbit(trap, cfg), "Axial")
    half = math.radians(53.0)
    _, p_ps = spin_spin_couplings(ps, lamb_dicke(YB171, half, ps.frequencies), mu, rabi)
    _, p_fl = spin_spin_couplings(fl, lamb_dicke(YB171, half, fl.frequencies), mu, rabi)
    return classify(cfg).label, p_ps, p_fl


def criterion_12(cases=((7, 2.0), (19, 2.5))):
    parts, worst, ok = [], 0.0, True
    for n, alpha in cases:
        label, p_ps, p_fl = _range_exponent(n, alpha)
        rel = abs(p_fl / p_ps - 1)
        worst = max(worst, rel)
        ok &= label == "Radial2D"
        parts.append(f"N={n} ({label}, alpha={alpha}): p = {p_ps:.4f} vs {p_fl:.4f}")
    ok &= worst < 0.005
    return ok, "; ".join(parts) + f"; max relative difference {worst:.2e} (< 0.5%)", {"worst": worst}


def _fd_errors(rng, n=5):
    u = rng.normal(size=(n, 3)) * 1.5
    w2 = np.array([1.0, 0.96, 4.0])
    h = 1e-6
    g = scaled_gradient(u, w2).ravel()
    hess = scaled_hessian(u, w2)
    g_fd = np.empty_like(g)
    h_fd = np.empty_like(hess)
    flat = u.ravel()
    for i in range(len(flat)):
        e = np.zeros_like(flat)
        e[i] = h
        up, dn = (flat + e).reshape(n, 3), (flat - e).reshape(n, 3)
        g_fd[i] = (scaled_energy(up, w2) - scaled_energy(dn, w2)) / (2 * h)
        h_fd[:, i] = (scaled_gradient(up, w2).ravel() - scaled_gradient(dn, w2).ravel()) / (2 * h)
    return (np.abs(g - g_fd).max() / np.abs(g).max(), np.abs(hess - h_fd).max() / np.abs(hess).max())


def criterion_13(n_configs=5, seed=0, halving_periods=50, base_steps=400):
    rng = np.random.default_rng(seed)
    fd = [_fd_errors(rng) for _ in range(n_configs)]
    g_err = max(e[0] for e in fd)
    h_err = max(e[1] for e in fd)
    trap = trap_at_alpha(2.0, TrapConfig())
    cfg = find_equilibrium(PotentialModel.from_trap(trap, 7))
    defect = symplectic_defect(find_periodic_orbit(trap, cfg).monodromy)
    pos, vel = thermal_state(cfg, 3e-3, np.random.default_rng(seed), trap)
    period = trap.rf_period
    ends = []
    for steps in (base_steps, 2 * base_steps):
        p = SimulationParams(period / steps, halving_periods * period, recoil=False, sample_every=steps)
        ends.append(integrate(pos, vel, trap, p).positions[-1])
    change = float(np.abs(ends[0] - ends[1]).max() / cfg.model.length_scale)
    ok = g_err < 1e-5 and h_err < 1e-5 and defect < 1e-8 and change < 1e-4
    detail = (f"FD gradient {g_err:.1e}, Hessian {h_err:.1e} (< 1e-5); symplectic defect {defect:.1e} (< 1e-8); "
              f"halving T_rf/{base_steps} over {halving_periods} rf periods moves ions {change:.1e} ell (< 1e-4)")
    return ok, detail, {"grad": g_err, "hess": h_err, "defect": defect, "halving": change}


CRITERIA = {
    1: ("Mathieu q of the reference trap", criterion_1),
    2: ("Lamb-Dicke parameter", criterion_2),
    3: ("Lorentzian width", criterion_3),
    4: ("heating-rate conversion chain", criterion_4),
    5: ("axial COM invariance", criterion_5),
    6: ("single-ion Floquet vs Mathieu", criterion_6),
    7: ("7-ion axial spectrum, pseudo vs Floquet", criterion_7),
    8: ("phase diagram N = 3..19", criterion_8),
    9: ("13-ion micromotion and mean positions", criterion_9),
    10: ("rf heating anisotropy", criterion_10),
    11: ("thermometry round trips", criterion_11),
    12: ("Ising range exponent", criterion_12),
    13: ("numerics hygiene", criterion_13),
}


def run_criterion(number: int) -> CriterionResult:
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    ok, detail, values = fn()
    return CriterionResult(number, title, bool(ok), detail, time.perf_counter() - start, values)


def run_all(numbers=None, echo=print):
    results = []
    for k in numbers or sorted(CRITERIA):
        res = run_criterion(k)
        if echo:
            echo(res.line())
        results.append(res)
    return results
