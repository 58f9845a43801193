"""Exact field form factor against its low-density form along growing L."""
import argparse

from llcorr.oracle import ff_ratio_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, nargs="+", default=[-2.0, 0.0, 2.0], help="target rapidities")
    ap.add_argument("--L", type=float, nargs="+", default=[50, 100, 200, 400, 800])
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--a", type=int, default=1, help="index of the removed particle")
    args = ap.parse_args()

    print("L,inv_L_gap,ratio_minus_one,phase_diff")
    for r in ff_ratio_study(args.lam, args.L, args.c, a=args.a):
        print(f"{r['L']:.6g},{r['inv_L_gap']:.6e},{r['ratio_minus_one']:.6e},{r['phase_diff']:.3e}")


if __name__ == "__main__":
    main()
