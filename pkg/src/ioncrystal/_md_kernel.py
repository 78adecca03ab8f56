"""Compiled velocity-Verlet loop (SI units throughout)."""

import numpy as np
from numba import njit


@njit(cache=True)
def _forces(pos, t, k_static, k_rf, drive, phase, coulomb_over_m, acc):
    n = pos.shape[0]
    c = np.cos(drive * t + phase)
    for i in range(n):
        for d in range(3):
            acc[i, d] = -(k_static[d] + k_rf[d] * c) * pos[i, d]
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            inv3 = coulomb_over_m / (r2 * np.sqrt(r2))
            acc[i, 0] += dx * inv3
            acc[i, 1] += dy * inv3
            acc[i, 2] += dz * inv3
            acc[j, 0] -= dx * inv3
            acc[j, 1] -= dy * inv3
            acc[j, 2] -= dz * inv3


@njit(cache=True)
def _scatter(vel, dt, kvec, sat, det, gamma, recoil, hbar_over_m):
    n = vel.shape[0]
    for l in range(kvec.shape[0]):
        kx, ky, kz = kvec[l, 0], kvec[l, 1], kvec[l, 2]
        kmag = np.sqrt(kx * kx + ky * ky + kz * kz)
        for i in range(n):
            kv = kx * vel[i, 0] + ky * vel[i, 1] + kz * vel[i, 2]
            x = 2.0 * (det[l] - kv) / gamma[l]
            rate = 0.5 * gamma[l] * sat[l] / (1.0 + sat[l] + x * x)
            if recoil:
                events = np.random.poisson(rate * dt)
                for _ in range(events):
                    vel[i, 0] += hbar_over_m * kx
                    vel[i, 1] += hbar_over_m * ky
                    vel[i, 2] += hbar_over_m * kz
                    ex = np.random.normal()
                    ey = np.random.normal()
                    ez = np.random.normal()
                    en = np.sqrt(ex * ex + ey * ey + ez * ez)
                    s = hbar_over_m * kmag / en
                    vel[i, 0] += s * ex
                    vel[i, 1] += s * ey
                    vel[i, 2] += s * ez
            else:
                vel[i, 0] += hbar_over_m * kx * rate * dt
                vel[i, 1] += hbar_over_m * ky * rate * dt
                vel[i, 2] += hbar_over_m * kz * rate * dt


@njit(cache=True, nogil=True)
def run(pos, vel, t0, dt, n_steps, sample_every, k_static, k_rf, drive, phase, coulomb_over_m,
        kvec, sat, det, gamma, recoil, hbar_over_m, field_kick_sigma, seed, max_disp):
    """Advance in place; returns (sample positions, sample velocities, sample times, steps done)."""
    if seed >= 0:
        np.random.seed(seed)
    n = pos.shape[0]
    n_samples = n_steps // sample_every + 1
    ps = np.empty((n_samples, n, 3))
    vs = np.empty((n_samples, n, 3))
    ts = np.empty(n_samples)
    acc = np.empty((n, 3))
    _forces(pos, t0, k_static, k_rf, drive, phase, coulomb_over_m, acc)
    ps[0] = pos
    vs[0] = vel
    ts[0] = t0
    k = 1
    has_lasers = kvec.shape[0] > 0
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * dt
        for i in range(n):
            for d in range(3):
                vel[i, d] += 0.5 * dt * acc[i, d]
                disp = dt * vel[i, d]
                if abs(disp) > max_disp:
                    return ps[:k], vs[:k], ts[:k], step - 1
                pos[i, d] += disp
        _forces(pos, t + dt, k_static, k_rf, drive, phase, coulomb_over_m, acc)
        for i in range(n):
            for d in range(3):
                vel[i, d] += 0.5 * dt * acc[i, d]
        if has_lasers:
            _scatter(vel, dt, kvec, sat, det, gamma, recoil, hbar_over_m)
        if field_kick_sigma > 0:
            for d in range(3):
                kick = field_kick_sigma * np.random.normal()
                for i in range(n):
                    vel[i, d] += kick
        if step % sample_every == 0:
            ps[k] = pos
            vs[k] = vel
            ts[k] = t0 + step * dt
            k += 1
    return ps, vs, ts, n_steps
