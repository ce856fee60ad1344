"""Command-line driver.

Subcommands: ``solve`` (one trajectory to CSV), ``average`` (print the
averaged generator and nonlinearity, run the Cesaro check), ``sweep`` (full
convergence verification), ``check`` (hypothesis-check suites).  Exit codes:
0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .averaging import build_averaged_problem, cesaro_check, default_shift_grid
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DegeneratePartitionError,
    ExponentialRangeError,
    OscavgError,
    RateUnresolvableError,
    ResolutionError,
    TrajectoryEscapeError,
)
from .harness import (
    emit_report,
    report_json,
    resolve_output_dir,
    run_checks,
    run_sweep,
    trajectory_csv,
)
from .hyperbolic import grid_function_csv
from .mildsolve import SemilinearProblem, solve_mild

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage errors as validation failures."""

    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="oscavg", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name, help_text in (
        ("solve", "solve one trajectory and write it as CSV"),
        ("average", "print the averaged problem and the Cesaro verdict"),
        ("sweep", "run the full lambda sweep and emit reports"),
        ("check", "run the configured hypothesis-check suites"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to a JSON run configuration")
        cmd.add_argument(
            "--lambda",
            dest="lambdas",
            default=None,
            help="override the lambda list (comma-separated, descending)",
        )
        cmd.add_argument(
            "--steps", type=int, default=None, help="override the averaged step count"
        )
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument(
            "--timing",
            action="store_true",
            help="emit measured wall times (breaks byte-reproducibility of outputs)",
        )
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    from dataclasses import replace

    if args.lambdas is not None:
        try:
            lambdas = tuple(float(part) for part in args.lambdas.split(","))
        except ValueError as exc:
            raise ConfigError(f"--lambda: {exc}") from exc
        if not lambdas or any(not (0 < lam <= 1) for lam in lambdas):
            raise ConfigError("--lambda values must lie in (0, 1]")
        if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
            raise ConfigError("--lambda values must be strictly descending")
        cfg = replace(cfg, lambdas=lambdas)
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError("--steps must be a positive integer")
        cfg = replace(cfg, steps=args.steps)
    return cfg


def _cmd_solve(cfg: RunConfig, args) -> int:
    out_dir = resolve_output_dir(cfg, args.out)
    lam = cfg.lambdas[0] if cfg.lambdas else None
    base = cfg.problem
    problem = SemilinearProblem.from_base(
        base.family, base.nonlinearity, base.initial, base.horizon, lam
    )
    if cfg.steps is not None:
        steps = cfg.steps
    elif lam is not None:
        steps = problem.min_steps(40.0)
    else:
        steps = 1024
    trajectory = solve_mild(problem, steps)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{cfg.name}_trajectory.csv"
    path.write_text(trajectory_csv(trajectory), encoding="utf-8")
    print(f"wrote {path} ({trajectory.steps} steps, lambda={lam})")
    if cfg.transport is not None:
        final = out_dir / f"{cfg.name}_final_state.csv"
        final.write_text(
            grid_function_csv(cfg.transport.grid, trajectory.states[-1]), encoding="utf-8"
        )
        print(f"wrote {final}")
    return EXIT_OK


def _describe_map(averaged_map) -> str:
    if not averaged_map.terms:
        return "0"
    parts = []
    for term in averaged_map.terms:
        mean = float(term.weight.mean())
        parts.append(f"{mean:g} * {term.state_map.tag}")
    return " + ".join(parts)


def _cmd_average(cfg: RunConfig, args) -> int:
    averaged = build_averaged_problem(cfg.problem)
    print("averaged generator A_hat:")
    print(np.array2string(averaged.averaged_matrix, precision=8, suppress_small=True))
    print(f"averaged nonlinearity F_hat(u) = {_describe_map(averaged.averaged_map)}")
    shift_count = 50 if cfg.problem.family.dim <= 8 else 8
    report = cesaro_check(
        cfg.problem.family,
        averaged.averaged_matrix,
        horizons=(25.0, 100.0, 400.0),
        shifts=default_shift_grid(shift_count),
    )
    print(
        f"cesaro check: {report.verdict} "
        f"(estimated limit {report.estimated_limit:.6g}, tolerance {report.tolerance:g})"
    )
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig, args) -> int:
    report = run_sweep(cfg)
    out_dir = resolve_output_dir(cfg, args.out)
    written = emit_report(
        report,
        out_dir,
        csv_name=cfg.output.csv_name,
        json_name=cfg.output.json_name,
        include_timing=args.timing,
    )
    for record in report.records:
        note = f"  [{record.flag}]" if record.flag else ""
        print(
            f"lambda={record.lam:<12g} sup_error={record.sup_error:.6e} "
            f"terminal={record.terminal_error:.6e}{note}"
        )
    if report.rate.slope is not None:
        print(f"fitted rate: slope={report.rate.slope:.4f} residual={report.rate.residual:.3g}")
    else:
        print(f"fitted rate: {report.rate.flag}")
    for path in written.values():
        print(f"wrote {path}")
    return EXIT_NUMERICAL if report.failed else EXIT_OK


def _cmd_check(cfg: RunConfig, args) -> int:
    if not cfg.checks:
        raise ConfigError("no checks configured; set the 'checks' list in the config")
    results = run_checks(cfg)
    out_dir = resolve_output_dir(cfg, args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{cfg.name}_checks.json"
    path.write_text(json.dumps(results, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    failed = False
    for check_name, payload in sorted(results.items()):
        summary = _summarize_check(check_name, payload)
        print(f"{check_name}: {summary}")
        failed = failed or _check_failed(check_name, payload)
    print(f"wrote {path}")
    return EXIT_NUMERICAL if failed else EXIT_OK


def _summarize_check(name: str, payload: dict) -> str:
    if name == "stability":
        e = payload["e"]
        return (
            f"M={e['M']:.6g} omega={e['omega']:.6g} "
            f"(V: M={payload['v']['M']:.6g} omega={payload['v']['omega']:.6g}) "
            f"dominates={payload['dominates_samples']}"
        )
    if name == "cesaro":
        return f"{payload['verdict']} (estimated limit {payload['estimated_limit']:.6g})"
    if name == "h5":
        return f"discrepancies {['%.3e' % d for d in payload['discrepancies']]} decreasing={payload['decreasing']}"
    if name == "lemma_sum":
        return f"discrepancies {['%.3e' % d for d in payload['discrepancies']]} decreasing={payload['decreasing']}"
    if name == "perturbation":
        return f"{payload['violations']} violations in {payload['pairs']} pairs (worst ratio {payload['worst_ratio']:.4f})"
    return str(payload)


def _check_failed(name: str, payload: dict) -> bool:
    if name == "stability":
        return not (
            payload["e"]["certifiable"]
            and payload["v"]["certifiable"]
            and payload["dominates_samples"]
        )
    if name == "perturbation":
        return payload["violations"] > 0
    return False


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError(parser.format_usage())
        cfg = _apply_overrides(load_config(args.config), args)
        handler = {
            "solve": _cmd_solve,
            "average": _cmd_average,
            "sweep": _cmd_sweep,
            "check": _cmd_check,
        }[args.command]
        return handler(cfg, args)
    except (ConfigError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (
        TrajectoryEscapeError,
        DegeneratePartitionError,
        ExponentialRangeError,
        RateUnresolvableError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OscavgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
