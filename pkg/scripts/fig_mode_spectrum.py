"""Pseudopotential and Floquet axial mode frequencies of a planar crystal."""

import os

from ioncrystal import io
from ioncrystal.constants import TWO_PI
from ioncrystal.equilibrium import PotentialModel, find_equilibrium
from ioncrystal.modes import find_periodic_orbit, floquet_modes, pseudopotential_modes
from ioncrystal.trap import TrapConfig, trap_at_alpha

from _common import outdir, parser, plot


def main():
    p = parser(__doc__, "out/modes")
    p.add_argument("--n-ions", type=int, default=7)
    p.add_argument("--alpha", type=float, default=2.0)
    args = p.parse_args()
    out = outdir(args.out)
    trap = trap_at_alpha(args.alpha, TrapConfig())
    cfg = find_equilibrium(PotentialModel.from_trap(trap, args.n_ions))
    ps = pseudopotential_modes(cfg, "Axial").frequencies / TWO_PI / 1e3
    fl = floquet_modes(find_periodic_orbit(trap, cfg), "Axial").frequencies / TWO_PI / 1e3
    rows = [(k, a, b, b - a) for k, (a, b) in enumerate(zip(ps, fl))]
    io.write_csv(os.path.join(out, "axial_modes.csv"),
                 ["mode", "pseudopotential_khz", "floquet_khz", "difference_khz"], rows)
    idx = list(range(len(ps)))
    plot(os.path.join(out, "axial_modes.svg"),
         [(idx, ps, "pseudopotential", "o"), (idx, fl, "Floquet", "x")], "mode index", "frequency (kHz)")
    for r in rows:
        print("{:2d} {:10.3f} {:10.3f} {:+8.3f}".format(*r))


if __name__ == "__main__":
    main()
