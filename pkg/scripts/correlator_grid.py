"""Field or density correlator of a smooth root density on an (x, t) grid.

    python3 scripts/correlator_grid.py --density family:gaussian,A=0.05,sigma=1 \
        --x=-2:2:9 --t 0:1:5 --kind density > grid.csv
"""
import argparse
import csv
import sys

import numpy as np

from llcorr.correlator import correlator_grid
from llcorr.rootdensity import parse_density


def grid(text):
    a, b, n = text.split(":")
    return np.linspace(float(a), float(b), int(n))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--density", default="family:gaussian,A=0.05,sigma=1")
    ap.add_argument("--kind", choices=("field", "density"), default="field")
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--x", type=grid, default=grid("-2:2:9"), help="a:b:n")
    ap.add_argument("--t", type=grid, default=grid("0.1:1:4"), help="a:b:n")
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    rho = parse_density(args.density)
    samples = correlator_grid(rho, args.c, args.x, args.t, args.kind, args.tol, args.workers)
    w = csv.writer(sys.stdout)
    w.writerow(["x", "t", "re", "im", "abs", "err"])
    for s in samples:
        w.writerow([f"{s.x:.17g}", f"{s.t:.17g}", f"{s.value.real:.17g}", f"{s.value.imag:.17g}",
                    f"{abs(s.value):.17g}", f"{s.quad_error:.3e}"])


if __name__ == "__main__":
    main()
