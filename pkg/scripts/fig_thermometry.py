"""Synthetic Doppler-broadened scan with its Voigt fit, and thermal sideband flops."""

import math
import os

import numpy as np

from ioncrystal import io
from ioncrystal.constants import TWO_PI, YB171
from ioncrystal.thermometry import fit_voigt, lorentz_fwhm, sideband_flops, synthetic_scan, voigt_profile

from _common import outdir, parser, plot


def main():
    p = parser(__doc__, "out/thermometry")
    p.add_argument("--temperature-mk", type=float, default=30.0)
    p.add_argument("--nbar", type=float, default=0.5)
    args = p.parse_args()
    out = outdir(args.out)

    t_r = args.temperature_mk * 1e-3
    lw = lorentz_fwhm(YB171.natural_linewidth, 0.3)
    scan = synthetic_scan(t_r, n_points=2001, rng=0)
    fit = fit_voigt(scan, lw)
    model = voigt_profile(scan.detunings, fit.T_r, 0.0, amplitude=fit.amplitude, background=fit.background,
                          center=fit.center)
    mhz = scan.detunings / TWO_PI / 1e6
    io.write_csv(os.path.join(out, "voigt_scan.csv"), ["detuning_mhz", "signal", "fit"],
                 zip(mhz, scan.intensities, model.intensities))
    plot(os.path.join(out, "voigt_scan.svg"),
         [(mhz, scan.intensities, "scan", ","), (mhz, model.intensities, "fit", "-")],
         "detuning (MHz)", "fluorescence")
    print(f"T_r = {fit.T_r * 1e3:.3f} +- {fit.T_r_err * 1e3:.3f} mK (true {args.temperature_mk} mK)")

    eta, rabi = 0.1, TWO_PI * 100e3
    times = np.linspace(0, 1.2 * math.pi / (eta * rabi), 200)
    flops = sideband_flops(args.nbar, eta, rabi, times)
    io.write_csv(os.path.join(out, "sidebands.csv"), ["time_us", "red", "blue"],
                 zip(times * 1e6, flops.red, flops.blue))
    plot(os.path.join(out, "sidebands.svg"),
         [(times * 1e6, flops.red, "red", "-"), (times * 1e6, flops.blue, "blue", "-")], "time (us)", "P(up)")
    print(f"ratio {flops.ratio:.6f} -> nbar {flops.nbar:.6f} (true {args.nbar})")


if __name__ == "__main__":
    main()
