"""Command-line driver.

    swjko run --config exp.cfg --out results/ [--seed N] [--threads N]
    swjko sw-estimate a.csv b.csv [--projections L] [--quantiles M] [--seed N]

Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from .errors import InvalidArgument, NumericDomainError
from .experiments import ConfigError, load_config, resolve_config, run_experiment, write_bundle
from .measures import ParticleCloud
from .sliced import QuantileGrid, sliced_wasserstein

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("swjko")


def _thread_limit(n):
    if n is None:
        from contextlib import nullcontext

        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def cmd_run(args) -> int:
    try:
        cfg = resolve_config(load_config(args.config), seed_override=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        with _thread_limit(args.threads):
            result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericDomainError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_bundle(result, args.out, wall_seconds=time.perf_counter() - t0)
    if result.aborted:
        print(f"numerical abort: {result.aborted} (partial traces written to {args.out})", file=sys.stderr)
        return EXIT_NUMERIC
    for key, value in result.summary.items():
        if isinstance(value, (int, float)):
            print(f"{key}: {value:.6g}")
    return EXIT_OK


def _load_samples(path) -> ParticleCloud:
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    try:
        return ParticleCloud(data)
    except InvalidArgument as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_sw_estimate(args) -> int:
    try:
        x, y = _load_samples(args.first), _load_samples(args.second)
        if x.d != y.d:
            raise ConfigError(f"dimension mismatch: {x.d} vs {y.d}")
        if args.projections < 1 or args.quantiles < 1:
            raise ConfigError("projections and quantiles must be >= 1")
    except ConfigError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with _thread_limit(args.threads):
        est = sliced_wasserstein(x, y, args.projections, args.seed, QuantileGrid(args.quantiles))
    print(f"sw2 = {est.value:.17g} +/- {est.std_error:.3g} (L={est.n_projections}, M={args.quantiles}, seed={args.seed})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swjko", description="Sliced-Wasserstein JKO flows and diagnostics")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment and write a result bundle")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sw-estimate", help="Monte-Carlo SW2^2 between two CSV sample files")
    sw.add_argument("first")
    sw.add_argument("second")
    sw.add_argument("--projections", "-L", type=int, default=1000)
    sw.add_argument("--quantiles", "-M", type=int, default=100)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--threads", type=int, default=None)
    sw.set_defaults(func=cmd_sw_estimate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
