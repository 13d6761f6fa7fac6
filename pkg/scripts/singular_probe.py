"""Blow-up of the singular pairing |S| as the sources approach a face.

    python scripts/singular_probe.py default -o results/probe_s
"""

import argparse
from pathlib import Path

from polystab.harness import load_config, metadata, singular_probe_run, write_csv, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default="default")
    ap.add_argument("-o", "--output", default="results/probe_s")
    args = ap.parse_args()

    cfg = load_config(args.config)
    res = singular_probe_run(cfg)
    out = Path(args.output)
    write_csv(out / "probe_s.csv", ("distance", "abs_S"), zip(res.distances.tolist(), res.values.tolist()))
    write_json(out / "probe_s.json", metadata(cfg, slope=res.slope, **res.metadata))
    for d, s in zip(res.distances, res.values):
        print(f"d = {d:.6f}  |S| = {s:.6e}")
    print(f"log-log slope {res.slope:.3f} (expected about -1)")


if __name__ == "__main__":
    main()
