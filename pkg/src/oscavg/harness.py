"""Lambda sweeps, convergence-rate fits, hypothesis checks, and reports.

A sweep solves the averaged problem once, solves the oscillatory problem for
each lambda on an aligned finer grid, records sup and terminal errors in the
E norm, fits a log-log rate, and attaches the requested hypothesis checks.
Reports serialize to CSV and JSON; payloads are deterministic for a fixed
(config, seed), with wall-clock timing zeroed unless explicitly requested.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .averaging import build_averaged_problem, cesaro_check, default_shift_grid
from .config import RunConfig
from .errors import RateUnresolvableError, TrajectoryEscapeError
from .evolution import (
    OperatorFamily,
    certify_stability,
    check_linear_averaging,
    merge_estimates,
    perturbation_gap,
    product_evolution,
)
from .mildsolve import SemilinearProblem, Trajectory, riemann_semigroup_sum, solve_mild
from .signals import TrigPolynomial

Array = np.ndarray

#: error floor below which a rate fit treats a point as at the solver floor
ERROR_FLOOR = 1e-14

#: safety factor for automatic oscillatory step selection (rule minimum is 10)
AUTO_RESOLUTION = 40.0

#: environment variable naming the default output directory
OUTPUT_ENV = "OSCAVG_OUT"

#: number of nodes kept in emitted per-time error curves
CURVE_POINTS = 65


# ---------------------------------------------------------------------------
# report data model


@dataclass(frozen=True)
class LambdaRecord:
    """Per-lambda sweep outcome."""

    lam: float
    sup_error: float
    terminal_error: float
    wall_ms: float
    steps: int
    flag: str = ""              # "" or an escape/failure note
    curve_times: tuple = ()
    curve_errors: tuple = ()

    def to_dict(self, include_timing: bool) -> dict:
        return {
            "lambda": self.lam,
            "sup_error": self.sup_error,
            "terminal_error": self.terminal_error,
            "wall_ms": self.wall_ms if include_timing else 0.0,
            "steps": self.steps,
            "flag": self.flag,
            "error_curve": {
                "t": list(self.curve_times),
                "error": list(self.curve_errors),
            },
        }


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(error) against log(lambda)."""

    slope: float | None
    intercept: float | None
    residual: float | None
    flag: str = ""

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "flag": self.flag,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    """Full outcome of a sweep run."""

    name: str
    config_fingerprint: str
    seed: int
    averaged_steps: int
    records: tuple
    rate: RateFit
    checks: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        return {
            "name": self.name,
            "config_fingerprint": self.config_fingerprint,
            "seed": self.seed,
            "averaged_steps": self.averaged_steps,
            "records": [record.to_dict(include_timing) for record in self.records],
            "rate": self.rate.to_dict(),
            "checks": self.checks,
        }

    @property
    def failed(self) -> bool:
        return any(record.flag for record in self.records)


# ---------------------------------------------------------------------------
# rate fitting


def fit_rate(lambdas, errors) -> RateFit:
    """Ordinary least squares of log(error) on log(lambda).

    Points at or below the solver floor (1e-14) are excluded; if fewer than
    three usable points remain the rate is unresolvable.
    """
    lambdas = np.asarray(list(lambdas), dtype=float)
    errors = np.asarray(list(errors), dtype=float)
    if lambdas.shape != errors.shape or lambdas.size < 3:
        raise ValueError("need at least 3 (lambda, error) pairs")
    if np.any(lambdas <= 0) or np.any(errors < 0):
        raise ValueError("lambdas must be positive and errors non-negative")
    usable = errors > ERROR_FLOOR
    if usable.sum() < 3:
        raise RateUnresolvableError(
            f"rate unresolvable: only {int(usable.sum())} of {errors.size} errors "
            f"above the solver floor {ERROR_FLOOR:g}"
        )
    logs_l = np.log(lambdas[usable])
    logs_e = np.log(errors[usable])
    slope, intercept = np.polyfit(logs_l, logs_e, 1)
    residual = float(np.sqrt(np.mean((logs_e - (slope * logs_l + intercept)) ** 2)))
    flag = "" if bool(usable.all()) else "some errors at solver floor"
    return RateFit(slope=float(slope), intercept=float(intercept), residual=residual, flag=flag)


# ---------------------------------------------------------------------------
# step selection


def _auto_averaged_steps(horizon: float, fmax: float, lam_min: float) -> int:
    """Power-of-two averaged grid resolving the fastest oscillation's peaks."""
    target = max(256, int(math.ceil(4.0 * horizon * max(fmax, 1.0) / lam_min)))
    return 1 << (target - 1).bit_length()


def _oscillatory_steps(horizon: float, fmax: float, lam: float, base_steps: int) -> int:
    """Multiple of the averaged grid satisfying the resolution rule with margin."""
    h_max = lam / (AUTO_RESOLUTION * max(fmax, 1.0))
    return base_steps * max(1, int(math.ceil(horizon / (base_steps * h_max))))


# ---------------------------------------------------------------------------
# sweep


def run_sweep(cfg: RunConfig) -> ConvergenceReport:
    """Verify convergence to the averaged problem over the configured lambdas.

    The averaged problem is built and solved once; each oscillatory solve
    runs on a grid that is an exact multiple of the averaged grid, and errors
    are measured at the shared nodes in the E norm.  Escaped solves keep a
    flagged record instead of aborting the sweep.
    """
    base = cfg.problem
    averaged = build_averaged_problem(base)
    fmax = base.max_base_frequency()
    lam_min = min(cfg.lambdas) if cfg.lambdas else 1.0
    steps_avg = cfg.steps or _auto_averaged_steps(base.horizon, fmax, lam_min)
    averaged_traj = solve_mild(averaged.to_problem(), steps_avg)
    norms = base.family.norms

    rng = np.random.default_rng(cfg.seed)
    initial = base.initial
    if cfg.initial_perturbation > 0:
        direction = rng.standard_normal(base.dim)
        direction /= np.linalg.norm(direction)
        initial = initial + cfg.initial_perturbation * direction

    records = []
    for lam in cfg.lambdas:
        steps = _oscillatory_steps(base.horizon, fmax, lam, steps_avg)
        problem = SemilinearProblem.from_base(
            base.family, base.nonlinearity, initial, base.horizon, lam
        )
        start = time.perf_counter()
        try:
            trajectory = solve_mild(problem, steps)
        except TrajectoryEscapeError as exc:
            records.append(
                LambdaRecord(
                    lam=lam,
                    sup_error=float("nan"),
                    terminal_error=float("nan"),
                    wall_ms=(time.perf_counter() - start) * 1e3,
                    steps=steps,
                    flag=f"trajectory escaped at t={exc.escape_time:.6g}",
                )
            )
            continue
        wall_ms = (time.perf_counter() - start) * 1e3
        stride = steps // steps_avg
        diffs = trajectory.states[::stride] - averaged_traj.states
        errors = norms.e_norm_many(diffs)
        curve_stride = max(1, steps_avg // (CURVE_POINTS - 1))
        records.append(
            LambdaRecord(
                lam=lam,
                sup_error=float(errors.max()),
                terminal_error=float(errors[-1]),
                wall_ms=wall_ms,
                steps=steps,
                curve_times=tuple(float(t) for t in averaged_traj.times[::curve_stride]),
                curve_errors=tuple(float(e) for e in errors[::curve_stride]),
            )
        )

    rate = _fit_records(records)
    checks = run_checks(cfg, averaged)
    return ConvergenceReport(
        name=cfg.name,
        config_fingerprint=cfg.fingerprint,
        seed=cfg.seed,
        averaged_steps=steps_avg,
        records=tuple(records),
        rate=rate,
        checks=checks,
    )


def _fit_records(records) -> RateFit:
    clean = [(rec.lam, rec.sup_error) for rec in records if not rec.flag]
    if len(clean) < 3:
        return RateFit(None, None, None, flag="undefined: fewer than 3 usable records")
    try:
        return fit_rate([lam for lam, _ in clean], [err for _, err in clean])
    except RateUnresolvableError as exc:
        return RateFit(None, None, None, flag=str(exc))


# ---------------------------------------------------------------------------
# hypothesis checks


def run_checks(cfg: RunConfig, averaged=None) -> dict:
    """Run the configured hypothesis checks and return their reports."""
    if averaged is None:
        averaged = build_averaged_problem(cfg.problem)
    out: dict = {}
    family = cfg.problem.family
    for check in cfg.checks:
        if check == "stability":
            out["stability"] = _stability_check(family, cfg.problem.horizon)
        elif check == "cesaro":
            # large systems get a thinner shift grid to keep the check desk-scale
            shift_count = 50 if family.dim <= 8 else 8
            out["cesaro"] = cesaro_check(
                family,
                averaged.averaged_matrix,
                horizons=(25.0, 100.0, 400.0),
                shifts=default_shift_grid(shift_count),
            ).to_dict()
        elif check == "h5":
            out["h5"] = _h5_check(cfg, averaged)
        elif check == "lemma-sum":
            out["lemma_sum"] = _lemma_sum_check(cfg, averaged)
        elif check == "perturbation":
            out["perturbation"] = _perturbation_check(cfg)
    return out


def _stability_check(family: OperatorFamily, horizon: float) -> dict:
    est_e, est_v = certify_stability(family, horizon)
    # domination audit on an independent sample grid
    worst = 0.0
    for s, t in ((0.0, horizon), (0.2 * horizon, 0.7 * horizon), (0.5 * horizon, horizon)):
        op = product_evolution(family, s, t, 32)
        bound = est_e.bound(t - s) * (1.0 + 1e-6)
        worst = max(worst, family.norms.e_opnorm(op.matrix) / bound)
    return {
        "e": est_e.to_dict(),
        "v": est_v.to_dict(),
        "dominates_samples": bool(worst <= 1.0),
    }


def _h5_check(cfg: RunConfig, averaged) -> dict:
    discrepancies = check_linear_averaging(
        cfg.problem.family,
        averaged.averaged_matrix,
        cfg.lambdas,
        cfg.problem.initial,
        cfg.problem.horizon,
    )
    decreasing = all(
        later <= earlier * 1.05 for earlier, later in zip(discrepancies, discrepancies[1:])
    )
    return {
        "lambdas": list(cfg.lambdas),
        "discrepancies": [float(d) for d in discrepancies],
        "decreasing": bool(decreasing),
    }


def _lemma_sum_check(cfg: RunConfig, averaged) -> dict:
    lambdas = (2.0**-4, 2.0**-6, 2.0**-8, 2.0**-10)
    w_value = cfg.problem.initial

    records = riemann_semigroup_sum(
        cfg.problem.family,
        averaged.averaged_matrix,
        lambda s: w_value,
        min(cfg.problem.horizon, 1.0),
        lambdas,
    )
    discrepancies = [record.discrepancy for record in records]
    return {
        "lambdas": list(lambdas),
        "discrepancies": discrepancies,
        "decreasing": bool(
            all(b <= a for a, b in zip(discrepancies, discrepancies[1:]))
        ),
    }


def _perturbation_check(cfg: RunConfig, pairs: int = 20) -> dict:
    """Randomized audit of the coefficient-perturbation inequality."""
    rng = np.random.default_rng(cfg.seed + 1)
    family = cfg.problem.family
    horizon = min(cfg.problem.horizon, 2.0)
    violations = 0
    worst_ratio = 0.0
    for _ in range(pairs):
        other = _perturbed_family(family, rng)
        est_e_a, est_v_a = certify_stability(family, horizon, grid_points=5, n_values=(32,))
        est_e_b, est_v_b = certify_stability(other, horizon, grid_points=5, n_values=(32,))
        est_e = merge_estimates(est_e_a, est_e_b)
        est_v = merge_estimates(est_v_a, est_v_b)
        v = rng.standard_normal(family.dim)
        s = float(rng.uniform(0.0, horizon / 2))
        t = float(rng.uniform(s + horizon / 4, horizon))
        lhs, rhs = perturbation_gap(family, other, v, s, t, 128, est_e, est_v)
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf"))
        worst_ratio = max(worst_ratio, ratio)
        if lhs > rhs * (1.0 + 1e-3):
            violations += 1
    return {"pairs": pairs, "violations": violations, "worst_ratio": worst_ratio}


def _perturbed_family(family: OperatorFamily, rng) -> OperatorFamily:
    dim = family.dim
    freq = float(rng.uniform(0.5, 4.0))
    amp = float(rng.uniform(0.1, 0.5))
    cos_c = amp * rng.standard_normal((dim, dim))
    law = TrigPolynomial.from_modes(
        [
            (freq, cos_c)
            if freq not in family.law.freqs
            else (freq + 0.25, cos_c)
        ]
    )
    merged = _add_polys(family.law, law)
    return OperatorFamily(
        law=merged,
        norms=family.norms,
        envelope=family.envelope,
        envelope_matrix=family.envelope_matrix,
    )


def _add_polys(first: TrigPolynomial, second: TrigPolynomial) -> TrigPolynomial:
    modes: dict = {}
    for poly in (first, second):
        for freq, cos_c, sin_c in zip(poly.freqs, poly.cos_coeffs, poly.sin_coeffs):
            entry = modes.setdefault(float(freq), [np.zeros(poly.shape), np.zeros(poly.shape)])
            entry[0] = entry[0] + cos_c
            entry[1] = entry[1] + sin_c
    return TrigPolynomial.from_modes(
        [(freq, cos_c, sin_c) for freq, (cos_c, sin_c) in sorted(modes.items())]
    )


# ---------------------------------------------------------------------------
# emission


def report_csv(report: ConvergenceReport, include_timing: bool = False) -> str:
    """CSV payload: header lambda,sup_error,terminal_error,wall_ms, one row per lambda."""
    lines = ["lambda,sup_error,terminal_error,wall_ms"]
    for record in report.records:
        wall = record.wall_ms if include_timing else 0.0
        lines.append(
            f"{record.lam!r},{record.sup_error!r},{record.terminal_error!r},{wall!r}"
        )
    return "\n".join(lines) + "\n"


def report_json(report: ConvergenceReport, include_timing: bool = False) -> str:
    payload = report.to_dict(include_timing)
    payload["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def resolve_output_dir(cfg: RunConfig, override: str | None = None) -> Path:
    """CLI override, then config, then the OSCAVG_OUT variable, then cwd."""
    for candidate in (override, cfg.output.directory, os.environ.get(OUTPUT_ENV)):
        if candidate:
            return Path(candidate)
    return Path.cwd()


def emit_report(
    report: ConvergenceReport,
    out_dir,
    formats=("csv", "json"),
    *,
    csv_name: str | None = None,
    json_name: str | None = None,
    include_timing: bool = False,
) -> dict:
    """Write the report files and return their paths.

    Payloads are byte-stable across runs with identical config and seed;
    measured wall times are zeroed unless ``include_timing`` is set, and the
    JSON carries the only volatile field (its timestamp).
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = {}
    try:
        if "csv" in formats:
            path = out_dir / (csv_name or f"{report.name}.csv")
            path.write_text(report_csv(report, include_timing), encoding="utf-8")
            written["csv"] = path
        if "json" in formats:
            path = out_dir / (json_name or f"{report.name}.json")
            path.write_text(report_json(report, include_timing), encoding="utf-8")
            written["json"] = path
    except OSError as exc:
        raise OSError(f"cannot write report under {out_dir}: {exc}") from exc
    return written


def trajectory_csv(trajectory: Trajectory) -> str:
    """CSV payload of a trajectory: columns t, u_1..u_n."""
    header = "t," + ",".join(f"u_{i + 1}" for i in range(trajectory.dim))
    lines = [header]
    for t, state in zip(trajectory.times, trajectory.states):
        lines.append(",".join(repr(float(v)) for v in [t, *state]))
    return "\n".join(lines) + "\n"


__all__ = [
    "AUTO_RESOLUTION",
    "ConvergenceReport",
    "ERROR_FLOOR",
    "LambdaRecord",
    "OUTPUT_ENV",
    "RateFit",
    "emit_report",
    "fit_rate",
    "report_csv",
    "report_json",
    "resolve_output_dir",
    "run_checks",
    "run_sweep",
    "trajectory_csv",
]
