"""Command-line front end.

    ioncrystal <subcommand> [--config PATH] [--seed N] [--out DIR]
               [--format csv|json|both] [--svg] [--threads N]

Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 config parse
error, 4 validation error, 5 numerical failure, 6 one or more acceptance
criteria failed. On any nonzero exit a JSON object
``{"error": <kind>, "type": <exception class>, "message": ...}`` is written
to stderr and to ``<out>/error.json``.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import io
from .config import SUBCOMMANDS, RunConfig, load_config, parse_config
from .constants import TWO_PI
from .errors import ConfigParseError, NumericalFailure, ValidationError

EXIT_OK, EXIT_UNEXPECTED, EXIT_USAGE, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ACCEPTANCE = range(7)

log = logging.getLogger("ioncrystal")


class _Outputs:
    """Writes artifacts in the requested formats, each with a config sidecar."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = cfg.out_dir or "."
        self.written = []

    def path(self, name):
        return os.path.join(self.dir, name)

    def csv(self, name, header, rows):
        if self.cfg.output_format in ("csv", "both"):
            p = io.write_csv(self.path(name), header, rows)
            io.write_sidecar(p, self.cfg.resolved())
            self.written.append(p)

    def json(self, name, obj):
        if self.cfg.output_format in ("json", "both"):
            p = io.write_json(self.path(name), obj)
            io.write_sidecar(p, self.cfg.resolved())
            self.written.append(p)

    def svg(self, name, *args, **kw):
        if self.cfg.svg:
            p = io.svg_plot(self.path(name), *args, **kw)
            io.write_sidecar(p, self.cfg.resolved())
            self.written.append(p)


def _trap(cfg: RunConfig, default_alpha=None):
    from .trap import trap_at_alpha

    alpha = cfg.alpha if cfg.alpha is not None else default_alpha
    return trap_at_alpha(alpha, cfg.trap, cfg.species) if alpha is not None else cfg.trap


def _require(cfg, key):
    if key not in cfg.experiment:
        raise ValidationError(f"[experiment] needs {key}")
    return cfg.experiment[key]


def cmd_equilibrium(cfg: RunConfig, out: _Outputs):
    from .equilibrium import EquilibriumOptions, PotentialModel, find_equilibrium
    from .phases import classify

    n = _require(cfg, "n_ions")
    opts = EquilibriumOptions(n_random=cfg.get("n_random", 24), constraint=cfg.get("constraint"))
    model = PotentialModel.from_trap(_trap(cfg), n, cfg.species)
    conf = find_equilibrium(model, cfg.seed, opts)
    label = classify(conf)
    rows = [(i, *(conf.positions[i] * 1e6), label.label) for i in range(n)]
    out.csv("equilibrium.csv", ["ion", "x_um", "y_um", "z_um", "phase"], rows)
    out.json("equilibrium.json", {
        "phase": label.label, "extents_ell": label.extents, "energy_J": conf.energy,
        "length_scale_um": model.length_scale * 1e6, "alpha": model.alpha,
        "positions_um": conf.positions * 1e6, "gradient_norm": conf.gradient_norm,
    })
    out.svg("equilibrium.svg", [(conf.positions[:, 0] * 1e6, conf.positions[:, 1] * 1e6, label.label, "o")],
            "x (um)", "y (um)")
    return {"phase": label.label}


def cmd_phase_diagram(cfg: RunConfig, out: _Outputs):
    from .phases import BOUNDARIES, PhaseScan, phase_diagram

    n_min, n_max = cfg.get("n_min", 3), cfg.get("n_max", 19)
    method = cfg.get("method", "Pseudopotential")
    bounds = tuple(b.strip() for b in cfg.get("boundaries", ",".join(BOUNDARIES)).split(","))
    for b in bounds:
        if b not in BOUNDARIES:
            raise ValidationError(f"unknown boundary {b!r}")
    scan = PhaseScan(cfg.trap, species=cfg.species, seed=cfg.seed)
    pts = phase_diagram(range(n_min, n_max + 1), method, cfg.get("tol_alpha", 1e-3), scan, bounds)
    rows = [(p.n_ions, p.boundary, p.alpha_critical, p.method, p.bracket_width, p.error or "") for p in pts]
    out.csv("phase_diagram.csv", ["n_ions", "boundary", "alpha_critical", "method", "bracket_width", "error"], rows)
    out.json("phase_diagram.json", {"omega_r_hz": scan.omega_r / TWO_PI, "points": [p.__dict__ for p in pts]})
    series = []
    for b, style in zip(BOUNDARIES, ("o-", "s--")):
        sel = [p for p in pts if p.boundary == b]
        if sel:
            series.append(([p.n_ions for p in sel], [p.alpha_critical for p in sel], b, style))
    out.svg("phase_diagram.svg", series, "number of ions", "critical aspect ratio")
    return {"points": len(pts), "failed": sum(1 for p in pts if p.error)}


def cmd_modes(cfg: RunConfig, out: _Outputs):
    from .equilibrium import PotentialModel, find_equilibrium
    from .modes import find_periodic_orbit, floquet_modes, pseudopotential_modes

    n = _require(cfg, "n_ions")
    subspace = cfg.get("subspace", "Axial")
    trap = _trap(cfg, default_alpha=2.0)
    conf = find_equilibrium(PotentialModel.from_trap(trap, n, cfg.species), cfg.seed)
    ps = pseudopotential_modes(conf, subspace)
    fl = floquet_modes(find_periodic_orbit(trap, conf), subspace)
    rows = [(k, f / TWO_PI, "Pseudopotential") for k, f in enumerate(ps.frequencies)]
    rows += [(k, f / TWO_PI, "Floquet") for k, f in enumerate(fl.frequencies)]
    out.csv("modes.csv", ["mode_index", "frequency_Hz", "method"], rows)
    comp = [(k, a / TWO_PI / 1e3, b / TWO_PI / 1e3, (a - b) / TWO_PI / 1e3)
            for k, (a, b) in enumerate(zip(ps.frequencies, fl.frequencies))]
    out.csv("modes_comparison.csv", ["mode_index", "pseudo_kHz", "floquet_kHz", "delta_kHz"], comp)
    out.json("modes.json", {
        "subspace": subspace,
        "pseudopotential": {"frequency_Hz": ps.frequencies / TWO_PI, "eigenvectors": ps.eigenvectors},
        "floquet": {"frequency_Hz": fl.frequencies / TWO_PI, "eigenvectors": fl.eigenvectors,
                    "near_zone_edge": fl.near_zone_edge},
    })
    out.svg("modes.svg", [(ps.frequencies / TWO_PI / 1e3, np.zeros(len(ps.frequencies)), "pseudopotential", "|"),
                          (fl.frequencies / TWO_PI / 1e3, np.ones(len(fl.frequencies)), "Floquet", "|")],
            "mode frequency (kHz)", "method")
    return {"max_delta_kHz": max(abs(c[3]) for c in comp)}


def cmd_md(cfg: RunConfig, out: _Outputs):
    from .dynamics import (CoolingLaser, SimulationParams, integrate, rf_heating_experiment,
                           secular_temperature, thermal_state)
    from .equilibrium import PotentialModel, find_equilibrium

    n = _require(cfg, "n_ions")
    trap = _trap(cfg, default_alpha=2.0)
    mode = cfg.get("mode", "trajectory")
    temp0 = cfg.get("initial_temperature", 3e-3)
    steps = cfg.get("steps_per_period", 100)
    lasers = (CoolingLaser(linewidth=cfg.species.natural_linewidth,
                           wavelength=cfg.species.transition_wavelength),) if cfg.get("cooling", False) else ()
    if mode == "heating":
        res = rf_heating_experiment(n, trap, cfg.get("heat_times", (0.0, 1e-3, 2e-3)), cfg.get("n_seeds", 4),
                                    temp0, cfg.get("window", 20e-6), lasers, cfg.get("cool_time", 0.0), steps,
                                    cfg.get("field_noise_psd", 0.0), cfg.seed, cfg.species, threads=cfg.threads)
        rows = [(t * 1e3, tr, tz) for t, tr, tz in zip(res.heat_times, res.T_r.mean(axis=0), res.T_z.mean(axis=0))] \
            if len(res.T_r) else []
        out.csv("temperatures.csv", ["t_ms", "Tr_K", "Tz_K"], rows)
        summary = {"rate_r_K_per_s": res.rate_r, "rate_r_err": res.rate_r_err, "rate_z_K_per_s": res.rate_z,
                   "rate_z_err": res.rate_z_err, "r_squared_r": res.r_squared_r, "melt_count": res.melt_count,
                   "n_seeds": cfg.get("n_seeds", 4)}
        out.json("heating.json", summary)
        if rows:
            t = np.array([r[0] for r in rows])
            out.svg("heating.svg", [(t, [r[1] * 1e3 for r in rows], "T_r", "o"),
                                    (t, (res.rate_r * t * 1e-3 + (rows[0][1] if rows else 0)) * 1e3, "fit", "-"),
                                    (t, [r[2] * 1e3 for r in rows], "T_z", "s")], "heat time (ms)", "T (mK)")
        return summary
    if mode != "trajectory":
        raise ValidationError("md mode must be trajectory or heating")
    conf = find_equilibrium(PotentialModel.from_trap(trap, n, cfg.species), cfg.seed)
    force = cfg.get("force_model", "FullRF")
    pos, vel = thermal_state(conf, temp0, np.random.default_rng(cfg.seed), trap, force)
    params = SimulationParams(trap.rf_period / steps, cfg.get("duration", 100e-6), force, cfg.seed,
                              sample_every=steps)
    traj = integrate(pos, vel, trap, params, lasers, cfg.species)
    rec = secular_temperature(traj, cfg.get("window", 10e-6))
    out.csv("temperatures.csv", ["t_ms", "Tr_K", "Tz_K"], zip(rec.times * 1e3, rec.T_r, rec.T_z))
    stride = max(1, len(traj.times) // 200)
    rows = [(traj.times[k] * 1e6, i, *(traj.positions[k, i] * 1e6))
            for k in range(0, len(traj.times), stride) for i in range(n)]
    out.csv("trajectory.csv", ["t_us", "ion", "x_um", "y_um", "z_um"], rows)
    summary = {"final_T_r_K": rec.T_r[-1], "final_T_z_K": rec.T_z[-1], "samples": len(traj.times)}
    out.json("md.json", summary)
    out.svg("temperatures.svg", [(rec.times * 1e3, rec.T_r * 1e3, "T_r", "o-"),
                                 (rec.times * 1e3, rec.T_z * 1e3, "T_z", "s-")], "t (ms)", "T (mK)")
    return summary


def _ingest_profile(path):
    from .thermometry import LineProfile

    rows = io.read_csv(path)
    try:
        x = np.array([float(r["detuning_MHz"]) for r in rows]) * TWO_PI * 1e6
        y = np.array([float(r["counts"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise ConfigParseError(f"{path}: expected columns detuning_MHz, counts ({exc})") from exc
    return LineProfile(x, y)


def cmd_thermometry(cfg: RunConfig, out: _Outputs):
    from . import thermometry as th

    mode = cfg.get("mode", "voigt")
    theta = cfg.get("theta", math.pi / 4)
    t_z = cfg.get("temperature_z", 0.0)
    sat = cfg.get("saturation", 0.3)
    lw = th.lorentz_fwhm(cfg.species.natural_linewidth, sat)
    rng = np.random.default_rng(cfg.seed)
    npts = cfg.get("n_points", 400_001)
    noise = cfg.get("noise_fraction", 0.01)
    if mode == "voigt":
        if cfg.get("input_csv"):
            prof = _ingest_profile(cfg.get("input_csv"))
        else:
            prof = th.synthetic_scan(cfg.get("temperature_r", 3e-3), t_z, theta, cfg.species, sat, noise, npts, rng=rng)
        fit = th.fit_voigt(prof, lw, theta, t_z, cfg.species)
        report = {"T_r_K": fit.T_r, "T_r_err_K": fit.T_r_err, "upper_bound": fit.upper_bound,
                  "doppler_fwhm_MHz": fit.gauss_fwhm / TWO_PI / 1e6, "lorentz_fwhm_MHz": lw / TWO_PI / 1e6,
                  "center_MHz": fit.center / TWO_PI / 1e6, "amplitude": fit.amplitude, "background": fit.background}
        out.json("voigt_fit.json", report)
        stride = max(1, len(prof.detunings) // 400)
        x = prof.detunings[::stride]
        model = fit.amplitude * th.voigt_shape(x - fit.center, fit.gauss_fwhm, lw) + fit.background
        out.csv("voigt_fit.csv", ["detuning_MHz", "counts", "model"],
                zip(x / TWO_PI / 1e6, prof.intensities[::stride], model))
        out.svg("voigt_fit.svg", [(x / TWO_PI / 1e6, prof.intensities[::stride], "data", "."),
                                  (x / TWO_PI / 1e6, model, "Voigt fit", "-")], "detuning (MHz)", "fluorescence")
        return report
    if mode == "heating":
        rate = cfg.get("heating_rate", 1.04)
        times = np.asarray(cfg.get("heat_times", (0.0, 80e-3, 160e-3)))
        temps, errs = [], []
        for t in times:
            prof = th.synthetic_scan(cfg.get("temperature_r", 3e-3) + rate * t, t_z, theta, cfg.species, sat,
                                     noise, npts, rng=rng)
            fit = th.fit_voigt(prof, lw, theta, t_z, cfg.species)
            temps.append(fit.T_r)
            errs.append(fit.T_r_err)
        slope, slope_err, t0 = th.fit_heating_rate(times, temps, errs)
        out.csv("heating_fit.csv", ["t_ms", "Tr_K", "Tr_err_K"], zip(times * 1e3, temps, errs))
        report = {"rate_K_per_s": slope, "rate_err_K_per_s": slope_err, "T0_K": t0}
        out.json("heating_fit.json", report)
        out.svg("heating_fit.svg", [(times * 1e3, np.array(temps) * 1e3, "fits", "o"),
                                    (times * 1e3, (t0 + slope * times) * 1e3, "linear", "-")],
                "heat time (ms)", "T_r (mK)")
        return report
    if mode == "sideband":
        nbar = cfg.get("nbar", 2.5)
        eta = cfg.get("eta", 0.16)
        rabi = cfg.get("rabi", TWO_PI * 50e3)
        times = np.linspace(0, cfg.get("max_time", 2e-6), 80)
        scan = th.sideband_flops(nbar, eta, rabi, times)
        out.csv("sideband.csv", ["time_us", "P_red", "P_blue"], zip(times * 1e6, scan.red, scan.blue))
        report = {"ratio": scan.ratio, "nbar": scan.nbar, "nbar_input": nbar}
        out.json("sideband.json", report)
        out.svg("sideband.svg", [(times * 1e6, scan.red, "red", "-"), (times * 1e6, scan.blue, "blue", "-")],
                "drive time (us)", "flip probability")
        return report
    if mode == "conversion":
        ndot = cfg.get("ndot", 100.0)
        w = cfg.get("mode_frequency", TWO_PI * 900e3)
        tdot, s_e = th.heating_conversions(ndot, w, cfg.species)
        report = {"ndot_per_s": ndot, "mode_frequency_Hz": w / TWO_PI, "Tdot_K_per_s": tdot, "S_E_V2_m2_Hz": s_e}
        out.json("conversion.json", report)
        out.csv("conversion.csv", ["ndot_per_s", "mode_frequency_Hz", "Tdot_K_per_s", "S_E_V2_m2_Hz"],
                [(ndot, w / TWO_PI, tdot, s_e)])
        return report
    raise ValidationError("thermometry mode must be voigt, heating, sideband or conversion")


def cmd_validate(cfg: RunConfig, out: _Outputs):
    from .acceptance import run_all

    numbers = cfg.get("criteria")
    results = run_all(list(numbers) if numbers else None, echo=lambda s: print(s, flush=True))
    rows = [(r.number, r.title, "PASS" if r.passed else "FAIL", r.elapsed, r.detail) for r in results]
    out.csv("validate.csv", ["criterion", "title", "status", "seconds", "detail"], rows)
    out.json("validate.json", {"results": [{"criterion": r.number, "passed": r.passed, "detail": r.detail,
                                            "values": r.values} for r in results]})
    failed = [r.number for r in results if not r.passed]
    return {"failed": failed}


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "phase-diagram": cmd_phase_diagram,
    "modes": cmd_modes,
    "md": cmd_md,
    "thermometry": cmd_thermometry,
    "validate": cmd_validate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="ioncrystal", description="Ion Coulomb crystal simulator")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="sectioned key=value run configuration")
    p.add_argument("--seed", type=int, help="master RNG seed (overrides [run] seed)")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--format", choices=("csv", "json", "both"))
    p.add_argument("--svg", action="store_true", help="also write SVG figures")
    p.add_argument("--threads", type=int, help="worker threads for MD ensembles")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _error(kind, exc, out_dir, code):
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    text = json.dumps(payload, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir:
        try:
            io.write_json(os.path.join(out_dir, "error.json"), payload)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    out_dir = args.out
    try:
        cfg = load_config(args.config, args.subcommand) if args.config else parse_config("", args.subcommand)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ValidationError("seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.out:
            cfg.out_dir = args.out
        out_dir = cfg.out_dir
        if args.format:
            cfg.output_format = args.format
        if args.svg:
            cfg.svg = True
        if args.threads is not None:
            if args.threads < 1:
                raise ValidationError("threads must be >= 1")
            cfg.threads = args.threads
        if cfg.out_dir:
            os.makedirs(cfg.out_dir, exist_ok=True)
        out = _Outputs(cfg)
        summary = COMMANDS[args.subcommand](cfg, out)
    except ConfigParseError as exc:
        return _error("ConfigParse", exc, out_dir, EXIT_CONFIG)
    except ValidationError as exc:
        return _error("Validation", exc, out_dir, EXIT_VALIDATION)
    except NumericalFailure as exc:
        return _error("NumericalFailure", exc, out_dir, EXIT_NUMERICAL)
    except ValueError as exc:
        return _error("Validation", exc, out_dir, EXIT_VALIDATION)
    except Exception as exc:  # noqa: BLE001 - last-resort JSON report
        return _error("Unexpected", exc, out_dir, EXIT_UNEXPECTED)
    print(json.dumps(io.to_plain({"subcommand": args.subcommand, "summary": summary, "artifacts": out.written}),
                     sort_keys=True))
    if args.subcommand == "validate" and summary["failed"]:
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
