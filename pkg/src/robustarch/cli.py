"""
Command-line interface.

Exit codes: 0 success, 1 statistical-run failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import jsonschema
import numpy as np

from . import __version__
from .arch_test import DegenerateResiduals, arch_test_pipeline
from .dgp import ArchErrorSpec, preset, simulate, write_path_csv
from .experiment import DEFAULT_SEED, CellFailure
from .mean_models import InsufficientDataError, MeanModelSpec
from .numerics import RngStream
from .tables import bundled_config_path, load_table_config, run_table, write_outputs

SEED_ENV = "ROBUSTARCH_SEED"
MIN_TEST_OBS = 30

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_MODEL_CHOICES = ("ar", "t2", "t3", "np-pl", "np-cv")


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


def model_from_flag(name: str, lags: int) -> MeanModelSpec:
    name = name.lower()
    if name == "ar":
        return MeanModelSpec.ar(lags)
    if name in ("t2", "t3"):
        return MeanModelSpec.taylor(lags, int(name[1]))
    if name == "np-pl":
        return MeanModelSpec.nw(lags, "plugin")
    if name == "np-cv":
        return MeanModelSpec.nw(lags, "cv")
    raise InputError(f"unknown model {name!r}")


def read_series_csv(path: str) -> np.ndarray:
    """
    Read a single-column or ``(date, value)`` CSV; the value is the last
    column. A non-numeric first row is treated as a header.
    """
    if not os.path.isfile(path):
        raise InputError(f"cannot read input file: {path}")
    values: list[float] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cell = row[-1].strip()
            try:
                v = float(cell)
            except ValueError:
                if lineno == 1:
                    continue
                raise InputError(f"{path}:{lineno}: non-numeric value {cell!r}") from None
            if not np.isfinite(v):
                raise InputError(f"{path}:{lineno}: non-finite value {cell!r}")
            values.append(v)
    if len(values) < MIN_TEST_OBS:
        raise InputError(f"{path}: need at least {MIN_TEST_OBS} observations, got {len(values)}")
    return np.asarray(values)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def cmd_experiment(args) -> int:
    path = args.config
    if not os.path.isfile(path):
        try:
            path = str(bundled_config_path(path))
        except FileNotFoundError:
            raise InputError(f"cannot read config file: {args.config}") from None
    try:
        cfg = load_table_config(path)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    except jsonschema.ValidationError as exc:
        raise InputError(f"{path}: schema violation: {exc.message}") from None
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    run = run_table(cfg, workers=workers, replications=args.reps, base_seed=args.seed)
    paths = write_outputs(run, args.out, __version__)
    sys.stdout.write(open(paths["text"]).read())
    for kind, p in paths.items():
        print(f"wrote {kind}: {p}")
    return EXIT_OK


def cmd_test(args) -> int:
    y = read_series_csv(args.input)
    model = model_from_flag(args.model, args.lags)
    res = arch_test_pipeline(y, model, args.arch_lag, args.level)
    if args.json:
        out = res.to_dict()
        out["level"] = args.level
        out["reject"] = res.reject_at[args.level]
        print(json.dumps(out, indent=2))
        return EXIT_OK
    fit = res.fit.summary()
    decision = "reject" if res.reject_at[args.level] else "do not reject"
    print(f"ARCH LM test, mean model {model.label}, {len(y)} observations")
    print(f"  LM statistic : {res.lm_stat:.6f}")
    print(f"  df           : {res.df}")
    print(f"  p-value      : {res.p_value:.6g}")
    print(f"  decision     : {decision} no-ARCH at level {args.level:g}")
    print(f"  rows used    : {res.n_used}")
    print("mean model:")
    for k, v in fit.items():
        if isinstance(v, list):
            v = ", ".join(f"{x:.6g}" for x in v)
        print(f"  {k}: {v}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        spec = preset(args.dgp, ArchErrorSpec(1.0, args.gamma1))
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    seed = args.seed if args.seed is not None else _default_seed()
    y = simulate(spec, args.T, RngStream(seed, 0))
    write_path_csv(y, args.out)
    print(f"wrote {args.T} observations of {spec.label} (gamma1={args.gamma1:g}, seed={seed}) to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustarch",
        description="ARCH LM tests with robust conditional-mean regressions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="run a Monte Carlo table from a JSON definition")
    p.add_argument("--config", required=True, help="table JSON path or bundled name (table1..table6)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reps", type=int, default=None, help="override replications")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--seed", type=int, default=None, help="override base seed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("test", help="ARCH test on a CSV series")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=_MODEL_CHOICES, default="t3")
    p.add_argument("--lags", type=int, default=2, help="mean-model lags")
    p.add_argument("--arch-lag", type=int, default=1, help="ARCH lag p")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="write a sample path of a preset process")
    p.add_argument("--dgp", required=True, help="preset name, e.g. 1-1 or DGP2-3")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--gamma1", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or {DEFAULT_SEED}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    if getattr(args, "reps", None) is not None and args.reps < 100:
        parser.error("--reps must be >= 100")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CellFailure, DegenerateResiduals) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (InsufficientDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
