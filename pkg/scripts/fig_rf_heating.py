"""Secular temperatures of a crystal left in the rf drive with the cooling beams off."""

import os

import numpy as np

from ioncrystal import io
from ioncrystal.dynamics import rf_heating_experiment
from ioncrystal.trap import TrapConfig, trap_at_alpha

from _common import outdir, parser, plot


def main():
    p = parser(__doc__, "out/rf_heating")
    p.add_argument("--n-ions", type=int, default=7)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--t-max-ms", type=float, default=2.0)
    p.add_argument("--seeds", type=int, default=4)
    p.add_argument("--temperature-mk", type=float, default=3.0)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    out = outdir(args.out)
    times = np.linspace(0, args.t_max_ms * 1e-3, 9)
    res = rf_heating_experiment(args.n_ions, trap_at_alpha(args.alpha, TrapConfig()), times,
                                n_seeds=args.seeds, initial_temperature=args.temperature_mk * 1e-3,
                                window=100e-6, threads=args.threads)
    tr, tz = res.T_r.mean(axis=0) * 1e3, res.T_z.mean(axis=0) * 1e3
    io.write_csv(os.path.join(out, "heating.csv"), ["time_ms", "T_r_mk", "T_z_mk"], zip(times * 1e3, tr, tz))
    plot(os.path.join(out, "heating.svg"),
         [(times * 1e3, tr, "T_r", "o-"), (times * 1e3, tz, "T_z", "s-")], "time (ms)", "T (mK)")
    print(f"dT_r/dt = {res.rate_r:.4g} +- {res.rate_r_err:.2g} K/s, "
          f"dT_z/dt = {res.rate_z:.4g} +- {res.rate_z_err:.2g} K/s, melted {res.melt_count}")


if __name__ == "__main__":
    main()
