"""Command-line interface: ``netmatch {simulate,distance,estimate,mc}``.

Exit codes: 0 success, 2 usage or configuration, 3 input validation,
4 degenerate matching, 5 non-convergence (the result is still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as nio
from .distance import KERNELS, KernelSpec, codegree_distance_matrix
from .errors import ConfigError, DegenerateMatchingError, ValidationError
from .estimators import EstimatorConfig, estimate
from .model import LINK_VARIANTS, LinkFunction, TrueParameters, simulate_sample
from .montecarlo import emit_report, parse_design, run_study

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NONCONVERGED = 0, 2, 3, 4, 5

log = logging.getLogger("netmatch")


def _read_grid(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: cannot read grid table: {exc}") from None


def _link_from_args(args) -> LinkFunction:
    if args.link == "grid":
        if not args.grid:
            raise ConfigError("--link grid requires --grid PATH")
        return LinkFunction.from_grid(_read_grid(args.grid))
    return LinkFunction.by_name(args.link)


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_simulate(args) -> int:
    link = _link_from_args(args)
    params = TrueParameters(np.full(args.k, args.beta))
    sample = simulate_sample(args.n, link, params, args.seed)
    out = _out_dir(args.out)
    nio.atomic_write(out / "edges.csv", nio.format_edges_csv(sample.D))
    nio.atomic_write(out / "covariates.csv", nio.format_covariates_csv(sample.X, sample.y))
    nio.atomic_write(out / "latent.json", nio.dumps_sample(sample))
    log.info("wrote %s/{edges.csv,covariates.csv,latent.json}", out)
    return EXIT_OK


def _n_for(args) -> int:
    if args.covariates:
        X, _ = nio.read_covariates_csv(args.covariates)
        return X.shape[0]
    if args.n:
        return args.n
    raise ConfigError("give --covariates or --n so the number of agents is known")


def cmd_distance(args) -> int:
    n = _n_for(args)
    D = nio.adjacency_from_edges(nio.read_edges_csv(args.edges, n=n), n)
    C = codegree_distance_matrix(D)
    data = C.to_bytes() if args.format == "binary" else C.to_csv()
    if args.out:
        nio.atomic_write(args.out, data)
    elif isinstance(data, bytes):
        sys.stdout.buffer.write(data)
    else:
        sys.stdout.write(data)
    return EXIT_OK


def cmd_estimate(args) -> int:
    sample = nio.load_sample(args.edges, args.covariates)
    config = EstimatorConfig(kernel=KernelSpec(args.kernel, args.bandwidth), prob_clip=args.clip)
    result = estimate(sample, config)
    text = result.to_json() + "\n"
    if args.out:
        nio.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.lambda_out:
        nio.atomic_write(args.lambda_out, result.lambda_csv())
    if not result.converged:
        log.warning("estimator did not converge: %s", "; ".join(result.notes))
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_mc(args) -> int:
    path = Path(args.design)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    design = parse_design(text, source=str(path), grid_loader=lambda p: _read_grid(path.parent / p))
    report = run_study(design, jobs=args.jobs)
    out = _out_dir(args.out)
    suffix = {"csv": "csv", "json": "json", "markdown": "md"}
    formats = list(suffix) if args.format == "all" else [args.format]
    for fmt in formats:
        nio.atomic_write(out / f"report.{suffix[fmt]}", emit_report(report, fmt))
    if "markdown" in formats:
        sys.stdout.write(emit_report(report, "markdown"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netmatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a sample and write edges/covariates/latent files")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--beta", type=float, default=1.0, help="common value of every slope")
    p.add_argument("--link", choices=LINK_VARIANTS, default="blockmodel")
    p.add_argument("--grid", help="CSV table for --link grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distance", help="empirical codegree distance matrix")
    p.add_argument("--edges", required=True)
    p.add_argument("--covariates", help="covariate CSV; fixes n")
    p.add_argument("--n", type=int)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("estimate", help="matched-pairs slope and social influence estimates")
    p.add_argument("--edges", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--kernel", choices=KERNELS, default="epanechnikov")
    p.add_argument("--clip", type=float, help="probability clip before logit inversion (default 1/(n+1))")
    p.add_argument("--out", help="JSON result path (default stdout)")
    p.add_argument("--lambda-out", help="CSV path for per-agent social influence")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc", help="run a Monte Carlo bias study from a design file")
    p.add_argument("design")
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=("csv", "json", "markdown", "all"), default="all")
    p.add_argument("--jobs", type=int, help="worker processes (default $NETMATCH_JOBS or 1)")
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"netmatch: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"netmatch: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"netmatch: invalid input: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateMatchingError as exc:
        print(f"netmatch: degenerate matching: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
