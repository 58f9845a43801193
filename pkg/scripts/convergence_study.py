"""Oracle against low-density formula along a halving sequence of densities.

    python3 scripts/convergence_study.py --kind field --N 2 3 4 -o field_study.csv
    python3 scripts/convergence_study.py --kind density --N 2 3 --window 10 --mu-window 30
"""
import argparse
import csv
import sys
import time

from llcorr.oracle import LehmannConfig, fit_exponent, lowdensity_convergence_study
from llcorr.rootdensity import parse_density


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=("field", "density"), default="field")
    ap.add_argument("--density", default="family:gaussian,A=1,sigma=2", help="shape of rho")
    ap.add_argument("--N", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--D", type=float, nargs="+", default=[0.1, 0.05, 0.025, 0.0125])
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--x", type=float, default=0.5)
    ap.add_argument("--t", type=float, default=0.2)
    ap.add_argument("--window", type=float, default=40.0)
    ap.add_argument("--mu-window", type=float, default=30.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("-o", "--output")
    args = ap.parse_args()

    shape = parse_density(args.density)
    cfg = LehmannConfig(number_window=args.window, mu_window=args.mu_window,
                        taper=args.mu_window / 3, workers=args.workers)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    writer = None
    for N in args.N:
        t0 = time.perf_counter()
        rows = lowdensity_convergence_study(shape, args.D, args.c, args.x, args.t, N=N,
                                            kind=args.kind, cfg=cfg)
        for r in rows:
            rec = r.to_record()
            if writer is None:
                writer = csv.DictWriter(out, fieldnames=list(rec))
                writer.writeheader()
            writer.writerow(rec)
        errs = [r.rel_err for r in rows]
        print(f"N={N}: rel_err {['%.3g' % e for e in errs]}, fitted exponent "
              f"{fit_exponent(args.D, errs):.2f}, {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    if args.output:
        out.close()


if __name__ == "__main__":
    main()
