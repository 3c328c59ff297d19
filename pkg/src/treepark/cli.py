"""Command-line interface.

Subcommands:

* ``theory``    closed-form report rows over an arrival-rate grid
* ``simulate``  Monte Carlo parking probability (optionally spine survival)
* ``sweep``     simulate over an arrival-rate grid
* ``validate``  run the invariant suites

Randomized commands take ``--seed`` (fallback: the TREEPARK_SEED
environment variable, then OS entropy); the seed in effect is always
echoed to stderr so any run can be reproduced from its log.  Exit codes:
0 success, 1 validation failure, 2 usage or solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys

from . import analytics, montecarlo, validate
from ._backend import backend_name

SWEEP_HEADER = [
    "alpha",
    "n",
    "trials",
    "estimate",
    "stderr",
    "theory",
    "abs_err",
    "truncated_trials",
]

THEORY_HEADER = [
    "alpha",
    "regime",
    "phi",
    "p",
    "s_p",
    "c_alpha",
    "mean_X",
    "mean_Y",
    "p_Y_zero",
    "rho",
    "prob_all_park",
]


class ConfigError(Exception):
    pass


def _alpha_grid(args) -> list[float]:
    if args.alpha is not None:
        if args.alpha < 0:
            raise ConfigError("--alpha must be >= 0")
        return [args.alpha]
    if args.alpha_start is None or args.alpha_stop is None or args.alpha_step is None:
        raise ConfigError("provide --alpha or all of --alpha-start/--alpha-stop/--alpha-step")
    if args.alpha_step <= 0:
        raise ConfigError("--alpha-step must be > 0")
    if args.alpha_stop < args.alpha_start:
        raise ConfigError("--alpha-stop must be >= --alpha-start")
    grid = []
    k = 0
    while True:
        a = args.alpha_start + k * args.alpha_step
        if a > args.alpha_stop + 1e-12:
            break
        grid.append(a)
        k += 1
    if not grid:
        raise ConfigError("empty alpha grid")
    return grid


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    elif os.environ.get("TREEPARK_SEED"):
        seed = int(os.environ["TREEPARK_SEED"])
    else:
        seed = secrets.randbits(63)
    print(f"# seed: {seed}", file=sys.stderr)
    return seed


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def _emit(rows: list[dict], header: list[str], args) -> None:
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[h]) for h in header])
        text = buf.getvalue()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_theory(args) -> int:
    grid = _alpha_grid(args)
    rows = []
    for alpha in grid:
        try:
            rows.append(analytics.report(alpha))
        except analytics.AnalyticsError as exc:
            print(f"theory failed at alpha={alpha}: {exc}", file=sys.stderr)
            return 2
    _emit(rows, THEORY_HEADER, args)
    return 0


def _sim_row(alpha: float, n: int, est: montecarlo.Estimate, theory: float) -> dict:
    return {
        "alpha": alpha,
        "n": n,
        "trials": est.trials,
        "estimate": est.value,
        "stderr": est.stderr,
        "theory": theory,
        "abs_err": abs(est.value - theory),
        "truncated_trials": est.truncated_trials,
    }


def _simulate_rows(grid, args, seed) -> list[dict]:
    rows = []
    for idx, alpha in enumerate(grid):
        # distinct sub-seeds per grid point and per estimator kind
        est = montecarlo.estimate_parking_prob_finite(
            n=args.n,
            alpha=alpha,
            trials=args.trials,
            seed=seed + 2 * idx,
            workers=args.workers,
        )
        rows.append(_sim_row(alpha, args.n, est, analytics.prob_all_park_limit(alpha)))
        if args.spine:
            sp = montecarlo.estimate_spine_survival(
                alpha=alpha,
                depth=args.depth,
                trials=args.trials,
                seed=seed + 2 * idx + 1,
                workers=args.workers,
            )
            # spine rows reuse the schema with n holding the walk depth
            rows.append(
                _sim_row(alpha, args.depth, sp, analytics.spine_stats(alpha).prob_all_park)
            )
    return rows


def cmd_simulate(args) -> int:
    if args.n is None or args.trials is None:
        raise ConfigError("simulate requires --n and --trials")
    grid = _alpha_grid(args)
    seed = _resolve_seed(args)
    _emit(_simulate_rows(grid, args, seed), SWEEP_HEADER, args)
    return 0


def cmd_sweep(args) -> int:
    if args.alpha is None and args.alpha_start is None:
        raise ConfigError("sweep requires an alpha grid")
    return cmd_simulate(args)


def cmd_validate(args) -> int:
    seed = _resolve_seed(args)
    names = [args.suite] if args.suite else None
    try:
        all_ok, results = validate.run_suites(names, seed=seed, alpha=args.alpha or 0.3)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    for name, elapsed, checks in results:
        for check_name, passed, detail in checks:
            status = "PASS" if passed else "FAIL"
            line = f"[{name}] {status} {check_name}"
            if detail:
                line += f" ({detail})"
            print(line)
        print(f"[{name}] suite finished in {elapsed:.1f}s")
    print("validate:", "PASS" if all_ok else "FAIL")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treepark",
        description=(
            "Parking on random rooted binary trees: theory evaluation, "
            f"Monte Carlo simulation and validation (kernel backend: {backend_name()})."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, theory_only=False):
        p.add_argument("--alpha", type=float, default=None, help="single arrival rate")
        p.add_argument("--alpha-start", type=float, default=None)
        p.add_argument("--alpha-stop", type=float, default=None)
        p.add_argument("--alpha-step", type=float, default=None)
        p.add_argument("--output", default=None, help="write to file instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if not theory_only:
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--workers", type=int, default=1)

    p_theory = sub.add_parser("theory", help="closed-form quantities per alpha")
    add_common(p_theory, theory_only=True)
    p_theory.set_defaults(func=cmd_theory)

    p_sim = sub.add_parser("simulate", help="Monte Carlo parking probability")
    add_common(p_sim)
    p_sim.add_argument("--n", type=int, default=None, help="tree size")
    p_sim.add_argument("--trials", type=int, default=None)
    p_sim.add_argument("--spine", action="store_true", help="also estimate spine survival")
    p_sim.add_argument("--depth", type=int, default=10_000, help="spine walk depth")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="simulate over an alpha grid")
    add_common(p_sweep)
    p_sweep.add_argument("--n", type=int, default=None)
    p_sweep.add_argument("--trials", type=int, default=None)
    p_sweep.add_argument("--spine", action="store_true")
    p_sweep.add_argument("--depth", type=int, default=10_000)
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run invariant suites")
    p_val.add_argument("--suite", choices=sorted(validate.SUITES), default=None)
    p_val.add_argument("--alpha", type=float, default=None, help="analytics suite rate")
    p_val.add_argument("--seed", type=int, default=None)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
