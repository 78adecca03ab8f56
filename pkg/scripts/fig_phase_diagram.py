"""Critical aspect ratios alpha_c(N) for both structural boundaries, N = 3..19."""

import os

import numpy as np

from ioncrystal import io
from ioncrystal.phases import phase_diagram

from _common import outdir, parser, plot


def main():
    p = parser(__doc__, "out/phase_diagram")
    p.add_argument("--n-max", type=int, default=19)
    p.add_argument("--tol", type=float, default=1e-3)
    args = p.parse_args()
    out = outdir(args.out)
    pts = phase_diagram(range(3, args.n_max + 1), tol_alpha=args.tol)
    io.write_csv(os.path.join(out, "phase_diagram.csv"), ["n_ions", "boundary", "alpha_critical", "error"],
                 [(q.n_ions, q.boundary, q.alpha_critical, q.error) for q in pts])
    series = []
    for b, style in (("LinearToZigZag", "o-"), ("ThreeDToRadial2D", "s-")):
        sel = [q for q in pts if q.boundary == b]
        series.append((np.array([q.n_ions for q in sel]), np.array([q.alpha_critical for q in sel]), b, style))
    plot(os.path.join(out, "phase_diagram.svg"), series, "N", "alpha_c")
    for q in pts:
        print(f"{q.n_ions:3d} {q.boundary:18s} {q.alpha_critical:.4f}")


if __name__ == "__main__":
    main()
