"""Command-line entry point ``polystab``.

Each subcommand reads one configuration (a TOML path or a bundled name)
and writes CSV and JSON artifacts to the output directory.  Exit codes:
0 success, 1 validation failure or failed check, 2 numerical failure,
64 usage error.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dtn as dtn_mod
from . import geometry as geo
from . import harness as hs
from .errors import NumericalError, ValidationError

EXIT_OK, EXIT_FAILED, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _setup(args):
    cfg = hs.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.h is not None:
        cfg.h = hs._number(args.h)
    out = Path(args.output or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def cmd_validate(args):
    cfg, out = _setup(args)
    p0 = cfg.base.build()
    reports = {"base": geo.validate_admissibility(p0, cfg.domain, cfg.prior)}
    if args.family:
        for m in cfg.family.magnitudes:
            reports[f"member_{m!r}"] = geo.validate_admissibility(cfg.family.member(p0, m), cfg.domain, cfg.prior)
    hs.write_json(out / "validate.json", {k: r.to_dict() for k, r in reports.items()})
    for name, rep in reports.items():
        print(f"{name}: {'pass' if rep.passed else 'fail ' + ','.join(rep.failures)}")
    return EXIT_OK if all(r.passed for r in reports.values()) else EXIT_FAILED


def cmd_dtn(args):
    cfg, out = _setup(args)
    ctx = hs.Context.build(cfg)
    mat = ctx.dtn0.matrix
    hs.write_csv(out / "dtn.csv", [f"n{i}" for i in ctx.basis.nodes], mat.tolist())
    hs.write_json(out / "dtn.json", hs.metadata(cfg, basis_nodes=ctx.basis.nodes.tolist(),
                                                symmetry_defect=float(np.abs(mat - mat.T).max())))
    print(f"DtN matrix {mat.shape[0]}x{mat.shape[1]} written to {out / 'dtn.csv'}")
    return EXIT_OK


def cmd_sweep(args):
    cfg, out = _setup(args)
    res = hs.stability_sweep(cfg, validate=not args.no_validate)
    hs.write_sweep(res, out)
    for key, value in res.summary.items():
        print(f"{key}: {value}")
    return EXIT_FAILED if res.summary["failed"] else EXIT_OK


def cmd_probe_s(args):
    cfg, out = _setup(args)
    res = hs.singular_probe_run(cfg)
    hs.write_csv(out / "probe_s.csv", ("distance", "abs_S"), zip(res.distances.tolist(), res.values.tolist()))
    hs.write_json(out / "probe_s.json", hs.metadata(cfg, slope=res.slope, **res.metadata))
    print(f"log-log slope {res.slope:.4f}")
    return EXIT_OK


def cmd_probe_derivative(args):
    cfg, out = _setup(args)
    res = hs.derivative_probe(cfg)
    hs.write_csv(out / "probe_derivative.csv", hs.DerivativeCheck.HEADER, res.rows)
    hs.write_json(out / "probe_derivative.json", res.meta)
    print(f"distributed {res.distributed:.6e} boundary {res.boundary:.6e} (gap {res.form_gap:.3%})")
    print(f"swapped control gap {res.swapped_gap:.3%}; finite-difference order {res.order:.3f}")
    return EXIT_OK


def cmd_three_spheres(args):
    cfg, out = _setup(args)
    recs = dtn_mod.three_spheres_test(n_samples=args.samples, degree=args.degree, seed=cfg.seed)
    rows = [(r.sup_r1, r.sup_r2, r.sup_r3, r.exponent, r.ratio) for r in recs]
    hs.write_csv(out / "three_spheres.csv", ("sup_r1", "sup_r2", "sup_r3", "exponent", "ratio"), rows)
    n_bad = sum(r.violated for r in recs)
    hs.write_json(out / "three_spheres.json", {"samples": len(recs), "violations": n_bad, "seed": cfg.seed,
                                               "max_ratio": max(r.ratio for r in recs)})
    print(f"{n_bad} violations over {len(recs)} harmonic polynomials")
    return EXIT_FAILED if n_bad else EXIT_OK


def cmd_reconstruct(args):
    cfg, out = _setup(args)
    if args.max_iter is not None:
        cfg.reconstruct = replace(cfg.reconstruct, max_iter=args.max_iter)
    ctx = hs.Context.build(cfg)
    truth, target = hs.synthetic_target(cfg, ctx)
    res = hs.reconstruct(target, ctx.p0, cfg, ctx, truth)
    hs.write_reconstruction(res, out)
    last = res.trace[-1]
    print(f"{res.status} after {last[0]} iterations: J = {last[1]:.3e}, vertex error {last[4]:.4f}")
    return EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "admissibility report of the base shape"),
    "dtn": (cmd_dtn, "local DtN matrix of the base configuration"),
    "sweep": (cmd_sweep, "stability ratios over the perturbation family"),
    "probe-s": (cmd_probe_s, "singular pairing blow-up near a face"),
    "probe-derivative": (cmd_probe_derivative, "shape derivative forms against finite differences"),
    "three-spheres": (cmd_three_spheres, "three-spheres inequality on random harmonic polynomials"),
    "reconstruct": (cmd_reconstruct, "vertex descent on same-mesh synthetic data"),
}


def build_parser():
    parser = _Parser(prog="polystab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", nargs="?", default="default",
                       help="TOML file or bundled config name (%s)" % ", ".join(hs.bundled_configs()))
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("-o", "--output", default=None, help="output directory")
        p.add_argument("--h", default=None, help="override the mesh size, e.g. 1/32")
        if name == "validate":
            p.add_argument("--family", action="store_true", help="also validate every family member")
        if name == "sweep":
            p.add_argument("--no-validate", action="store_true", help="skip admissibility checks of members")
        if name == "three-spheres":
            p.add_argument("--samples", type=int, default=200)
            p.add_argument("--degree", type=int, default=5)
        if name == "reconstruct":
            p.add_argument("--max-iter", type=int, default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command][0](args)
    except FileNotFoundError as exc:
        print(f"polystab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"polystab: validation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except NumericalError as exc:
        print(f"polystab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
