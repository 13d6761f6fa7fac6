"""Degree-one DtN eigenvalue of a two-phase ball against the exact value.

    python scripts/sphere_convergence.py --n 12 24 48
"""

import argparse

import numpy as np

from polystab.harness import sphere_eigenvalue


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[12, 24, 48], help="cells per unit length")
    ap.add_argument("--k", type=float, default=2.0)
    args = ap.parse_args()

    errs = []
    for n in args.n:
        val, exact = sphere_eigenvalue(1.0 / n, k=args.k)
        errs.append(abs(val - exact) / exact)
        line = f"h = 1/{n:<3d} eigenvalue {val:.8f}  exact {exact:.8f}  rel. error {errs[-1]:.3e}"
        if len(errs) > 1:
            order = np.log(errs[-2] / errs[-1]) / np.log(n / args.n[len(errs) - 2])
            line += f"  order {order:.2f}"
        print(line, flush=True)


if __name__ == "__main__":
    main()
