"""Gaudin determinant of dilute fixed-N states as the density is lowered."""
import argparse

import numpy as np

from llcorr.bethe import gaudin_det
from llcorr.oracle import dilute_state, fit_exponent
from llcorr.rootdensity import parse_density


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--density", default="family:gaussian,A=1,sigma=2")
    ap.add_argument("--N", type=int, default=4)
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--D", type=float, nargs="+", default=list(0.1 / 2 ** np.arange(6)))
    args = ap.parse_args()

    shape = parse_density(args.density)
    excess = []
    print("D,L,det_minus_one,ratio_to_D")
    for D in args.D:
        st = dilute_state(shape, D, args.c, N=args.N)
        e = gaudin_det(st) - 1
        excess.append(e)
        print(f"{D:.6g},{st.params.L:.6g},{e:.6e},{e / D:.6f}")
    print(f"# fitted exponent {fit_exponent(args.D, excess):.3f}")


if __name__ == "__main__":
    main()
