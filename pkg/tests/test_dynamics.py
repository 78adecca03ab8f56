import numpy as np
import pytest

from ioncrystal.constants import HBAR, K_B, TWO_PI, YB171
from ioncrystal.dynamics import (CoolingLaser, SimulationParams, doppler_force, dressing_factors, integrate,
                                 melt_monitor, rf_heating_experiment, secular_temperature, thermal_state,
                                 total_energy)
from ioncrystal.errors import CoincidentIons, StepTooLarge, ValidationError, WindowTooShort
from ioncrystal.modes import mathieu_exponent
from ioncrystal.trap import mathieu_coefficients, single_ion_trajectory


def test_ion_at_rest_on_axis_stays(trap2):
    p = SimulationParams(trap2.rf_period / 100, 200 * trap2.rf_period, recoil=False)
    traj = integrate(np.zeros((1, 3)), np.zeros((1, 3)), trap2, p)
    assert np.abs(traj.positions).max() == 0.0


def test_single_ion_follows_mathieu_solution(trap2):
    c = mathieu_coefficients(trap2)
    w = trap2.drive_frequency
    beta = mathieu_exponent(c.a_x, c.q_x)
    amp = 1e-6
    x = lambda t: single_ion_trajectory(c, 0, amp, t, w, beta=beta)  # noqa: E731
    h = 1e-13
    v0 = (x(h) - x(-h)) / (2 * h)
    p = SimulationParams(trap2.rf_period / 1000, 2 * TWO_PI / (beta * w / 2), recoil=False, sample_every=50)
    traj = integrate([[x(0.0), 0, 0]], [[v0, 0, 0]], trap2, p)
    err = np.abs(traj.positions[:, 0, 0] - x(traj.times)).max() / amp
    assert err < abs(c.q_x) ** 3


def test_pseudopotential_energy_conserved(crystal7, trap2, rng):
    pos, vel = thermal_state(crystal7, 1e-3, rng, force_model="Pseudopotential")
    p = SimulationParams(trap2.rf_period / 10, 1e-3, "Pseudopotential", sample_every=500)
    e = total_energy(integrate(pos, vel, trap2, p), trap2)
    # velocity Verlet keeps a bounded O((w dt)^2) wobble around a conserved shadow energy
    thermal = 3 * 7 * K_B * 1e-3
    assert np.ptp(e) / thermal < 1e-3
    half = len(e) // 2
    assert abs(e[half:].mean() - e[:half].mean()) / thermal < 1e-4


def test_mean_doppler_force_limits():
    laser = CoolingLaser(saturation=0.3)
    k = laser.wavevector
    f0 = doppler_force(np.zeros(3), laser)
    rate = 0.5 * laser.linewidth * 0.3 / (1.3 + (2 * laser.detuning / laser.linewidth) ** 2)
    assert f0 == pytest.approx(HBAR * rate * k, rel=1e-12)
    # red detuning: moving against the beam feels more force
    v = 1.0 * k / np.linalg.norm(k)
    assert np.linalg.norm(doppler_force(-v, laser)) > np.linalg.norm(f0) > np.linalg.norm(doppler_force(v, laser))
    assert np.all(doppler_force(np.zeros(3), CoolingLaser(saturation=0.0)) == 0)


def test_stochastic_force_averages_to_mean():
    laser = CoolingLaser()
    rng = np.random.default_rng(3)
    dt = 1e-7
    samples = doppler_force(np.zeros((20000, 3)), laser, rng=rng, dt=dt)
    mean = doppler_force(np.zeros(3), laser)
    k_hat = laser.wavevector / np.linalg.norm(laser.wavevector)
    assert samples.mean(axis=0) @ k_hat == pytest.approx(mean @ k_hat, rel=0.05)
    with pytest.raises(ValueError):
        doppler_force(np.zeros(3), laser, rng=rng)


def test_laser_validation():
    with pytest.raises(ValueError):
        CoolingLaser(saturation=-1)
    with pytest.raises(ValueError):
        CoolingLaser(direction=(1.0, 1.0, 0.0))


def test_doppler_cooling_reaches_limit(trap2):
    limit = HBAR * YB171.natural_linewidth / (2 * K_B)
    temps = []
    for s in range(8):
        p = SimulationParams(trap2.rf_period / 2, 20e-3, "Pseudopotential", seed=s, sample_every=10)
        traj = integrate(np.zeros((1, 3)), np.full((1, 3), 0.5), trap2, p, (CoolingLaser(saturation=0.05),))
        rec = secular_temperature(traj, 200e-6)
        late = rec.times > 5e-3
        temps.append(np.mean((2 * rec.T_r[late] + rec.T_z[late]) / 3))
    assert limit / 3 < np.mean(temps) < 3 * limit


def test_cooling_damps_motion(trap2):
    p = SimulationParams(trap2.rf_period / 2, 2e-3, "Pseudopotential", recoil=False, sample_every=10)
    traj = integrate(np.zeros((1, 3)), np.full((1, 3), 2.0), trap2, p, (CoolingLaser(),))
    rec = secular_temperature(traj, 100e-6)
    assert rec.T_r[-1] < 0.05 * rec.T_r[0]
    assert rec.T_z[-1] < 0.05 * rec.T_z[0]


def test_stroboscopic_temperature_recovers_thermal_state(crystal7, trap2):
    """Equipartition: the dressed initial state reads back at its temperature."""
    temps = []
    for s in range(32):
        pos, vel = thermal_state(crystal7, 2e-3, np.random.default_rng(s), trap2)
        p = SimulationParams(trap2.rf_period / 100, 2 * trap2.rf_period, sample_every=1)
        rec = secular_temperature(integrate(pos, vel, trap2, p), trap2.rf_period)
        temps.append((rec.T_r[0], rec.T_z[0]))
    temps = np.array(temps)
    assert temps[:, 0].mean() == pytest.approx(2e-3, rel=0.1)
    assert temps[:, 1].mean() == pytest.approx(2e-3, rel=0.15)


def test_naive_temperature_includes_micromotion(crystal7, trap2, rng):
    pos, vel = thermal_state(crystal7, 1e-3, rng, trap2)
    p = SimulationParams(trap2.rf_period / 100, 20 * trap2.rf_period, sample_every=1)
    traj = integrate(pos, vel, trap2, p)
    strobe = secular_temperature(traj, 10 * trap2.rf_period)
    naive = secular_temperature(traj, 10 * trap2.rf_period, "naive")
    assert naive.T_r.mean() > 5 * strobe.T_r.mean()
    harm = secular_temperature(traj, 10 * trap2.rf_period, "harmonic")
    assert harm.T_r.mean() < naive.T_r.mean()
    with pytest.raises(ValueError):
        secular_temperature(traj, 10 * trap2.rf_period, "other")


def test_window_validation(crystal7, trap2, rng):
    pos, vel = thermal_state(crystal7, 1e-3, rng, trap2)
    traj = integrate(pos, vel, trap2, SimulationParams(trap2.rf_period / 100, 3 * trap2.rf_period))
    with pytest.raises(WindowTooShort):
        secular_temperature(traj, 0.5 * trap2.rf_period)
    with pytest.raises(WindowTooShort):
        secular_temperature(traj, 10 * trap2.rf_period)


def test_dressing_factors():
    fp, fv = dressing_factors([0.1, -0.1, 0.0])
    assert fp == pytest.approx([1.0503125, 0.9503125, 1.0])
    assert fv == pytest.approx([0.9503125, 1.0503125, 1.0])


def test_single_ion_shows_no_rf_heating(trap2):
    res = rf_heating_experiment(1, trap2, [0.0, 0.5e-3, 1e-3], n_seeds=2, window=50e-6)
    assert abs(res.rate_r) < 0.5 and abs(res.rate_z) < 0.5
    assert res.melt_count == 0


def test_melt_monitor_cold_and_hot(crystal7, trap2):
    p = SimulationParams(trap2.rf_period / 100, 100 * trap2.rf_period)
    cold = integrate(*thermal_state(crystal7, 1e-3, np.random.default_rng(1), trap2), trap2, p)
    assert not melt_monitor(cold, crystal7).any_melt
    hot = integrate(*thermal_state(crystal7, 0.1, np.random.default_rng(1), trap2), trap2,
                    SimulationParams(trap2.rf_period / 100, 2000 * trap2.rf_period))
    series = melt_monitor(hot, crystal7)
    assert series.order_parameter.max() > melt_monitor(cold, crystal7).order_parameter.max()


def test_bit_reproducible(crystal7, trap2):
    def run():
        pos, vel = thermal_state(crystal7, 1e-3, np.random.default_rng(5), trap2)
        return integrate(pos, vel, trap2, SimulationParams(trap2.rf_period / 100, 20 * trap2.rf_period, seed=9),
                         (CoolingLaser(),))
    a, b = run(), run()
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.velocities, b.velocities)


def test_thread_count_does_not_change_result(trap2):
    kw = dict(n_seeds=3, window=20e-6, seed=4)
    one = rf_heating_experiment(3, trap2, [0.0, 60e-6], threads=1, **kw)
    three = rf_heating_experiment(3, trap2, [0.0, 60e-6], threads=3, **kw)
    assert np.array_equal(one.T_r, three.T_r)
    assert np.array_equal(one.T_z, three.T_z)


def test_fullrf_rejects_coarse_step(trap2):
    with pytest.raises(ValidationError):
        integrate(np.zeros((1, 3)), np.zeros((1, 3)), trap2, SimulationParams(trap2.rf_period / 20, 1e-6))


def test_coincident_ions_rejected(trap2):
    with pytest.raises(CoincidentIons):
        integrate(np.zeros((2, 3)), np.zeros((2, 3)), trap2, SimulationParams(trap2.rf_period / 100, 1e-7))


def test_step_too_large_detected(trap2):
    p = SimulationParams(trap2.rf_period / 2, 1e-6, "Pseudopotential")
    with pytest.raises(StepTooLarge):
        integrate(np.zeros((1, 3)), np.full((1, 3), 1e4), trap2, p)


def test_params_validation():
    with pytest.raises(ValueError):
        SimulationParams(1e-9, 1e-6, "Other")
    with pytest.raises(ValueError):
        SimulationParams(0.0, 1e-6)
    with pytest.raises(ValueError):
        SimulationParams(1e-9, 1e-6, sample_every=0)
