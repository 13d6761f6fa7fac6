"""Stability ratios over a perturbation family.

    python scripts/run_sweep.py default -o results/sweep
"""

import argparse

from polystab.harness import load_config, stability_sweep, write_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default="default")
    ap.add_argument("-o", "--output", default="results/sweep")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--no-validate", action="store_true")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    res = stability_sweep(cfg, validate=not args.no_validate)
    path = write_sweep(res, args.output)
    print(f"{'m':>8} {'d_H':>10} {'|dLambda|':>11} {'d_H/|dL|':>10} {'|F|/d_H':>10}")
    for r in res.records:
        print(f"{r.magnitude:8.4f} {r.d_boundary:10.3e} {r.dtn_diff:11.3e} {r.lipschitz_ratio:10.3f} {r.derivative_ratio:10.3e}")
    print(f"Lipschitz-ratio spread {res.summary['lipschitz_spread']:.3f}, "
          f"derivative-ratio spread {res.summary['derivative_ratio_spread']:.3f}")
    print(f"written to {path}")


if __name__ == "__main__":
    main()
