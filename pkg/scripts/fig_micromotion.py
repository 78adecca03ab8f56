"""Micromotion amplitude of each ion against its distance from the rf null."""

import os

import numpy as np

from ioncrystal import io
from ioncrystal.equilibrium import PotentialModel, find_equilibrium
from ioncrystal.modes import find_periodic_orbit
from ioncrystal.trap import TrapConfig, mathieu_coefficients, trap_at_alpha

from _common import outdir, parser, plot


def main():
    p = parser(__doc__, "out/micromotion")
    p.add_argument("--n-ions", type=int, default=19)
    p.add_argument("--alpha", type=float, default=2.5)
    args = p.parse_args()
    out = outdir(args.out)
    trap = trap_at_alpha(args.alpha, TrapConfig())
    q = abs(mathieu_coefficients(trap).q_x)
    orbit = find_periodic_orbit(trap, find_equilibrium(PotentialModel.from_trap(trap, args.n_ions)))
    r = np.linalg.norm(orbit.mean_positions[:, :2], axis=1) * 1e6
    amp = orbit.harmonic_amplitudes(1) * 1e6
    order = np.argsort(r)
    io.write_csv(os.path.join(out, "micromotion.csv"), ["radius_um", "amplitude_um"],
                 zip(r[order], amp[order]))
    line = np.linspace(0, r.max(), 50)
    plot(os.path.join(out, "micromotion.svg"),
         [(r, amp, "orbit", "o"), (line, 0.5 * q * line, "q r / 2", "-")], "radius (um)", "amplitude (um)")
    print(f"slope / (q/2) = {np.polyfit(r, amp, 1)[0] / (0.5 * q):.4f}")


if __name__ == "__main__":
    main()
