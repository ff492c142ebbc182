"""Command-line sweep runner.

Exit status: 0 when every run succeeded, 1 for an invalid configuration,
2 when at least one run failed (the results table is still written).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .experiments import ConfigError, ExperimentConfig, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUN_FAILED = 0, 1, 2

_SG_ALIASES = {"mapped": "mapped", "random": "random", "homogeneous": "homogeneous", "homog": "homogeneous"}


def _float_list(text: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _mesh(text: str) -> tuple[int, int]:
    parts = text.lower().replace("*", "x").split("x")
    try:
        dims = [int(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"mesh must be N or NXxNY, got {text!r}") from exc
    if len(dims) == 1:
        dims *= 2
    if len(dims) != 2:
        raise argparse.ArgumentTypeError(f"mesh must be N or NXxNY, got {text!r}")
    return dims[0], dims[1]


def _sg_list(text: str) -> list[str]:
    out = []
    for name in filter(None, (t.strip().lower() for t in text.split(","))):
        if name not in _SG_ALIASES:
            raise argparse.ArgumentTypeError(f"unknown starting guess {name!r}")
        out.append(_SG_ALIASES[name])
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rank3cell", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--example", type=int, choices=[1, 2, 3, 4])
    p.add_argument("--chi", type=_float_list, help="comma-separated sweep values (degrees for example 4)")
    p.add_argument("--f", type=float, help="stiff volume fraction")
    p.add_argument("--lengthscale", type=float, help="minimum length scale 2R")
    p.add_argument("--mesh", type=_mesh, help="N or NXxNY elements")
    p.add_argument("--sg", type=_sg_list, help="starting guesses: mapped,random,homogeneous")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--mapped-only", action="store_true", help="skip optimization; bound and mapped laminate only")
    p.add_argument("--invert", action="store_true", help="write images with solid as black")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = ExperimentConfig.from_json(args.config).__dict__.copy() if args.config else {}
    if args.example is not None:
        base = ExperimentConfig.for_example(args.example)
        if args.config is None or data.get("example") != args.example:
            data.update(example=args.example, f=base.f, chi=base.chi)
    overrides = {"chi": args.chi, "f": args.f, "lengthscale": args.lengthscale, "seed": args.seed,
                 "out": args.out, "workers": args.workers, "max_iter": args.max_iter,
                 "starting_guesses": args.sg}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.mesh is not None:
        data["nx"], data["ny"] = args.mesh
    if args.mapped_only:
        data["optimize_designs"] = False
    if args.invert:
        data["invert"] = True
    try:
        config = ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return config.validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = run_sweep(config)
    failed = [r for r in results if r.errors]
    for r in failed:
        print(f"chi={r.chi:g} failed: {';'.join(r.errors)}", file=sys.stderr)
    return EXIT_RUN_FAILED if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
