"""Declarative run configurations.

A run is a single JSON document: the problem (matrix family or torus
transport system), the descending lambda list, solver step policy, the
checks to attach, and output locations.  Everything is validated before any
computation starts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .evolution import NormWeights, OperatorFamily
from .hyperbolic import TorusGrid, TransportCoefficients, discretize, forcing_as_map
from .mildsolve import SemilinearProblem
from .signals import (
    APMap,
    APTerm,
    BoundedSineMap,
    ConstantMap,
    DecayEnvelope,
    IdentityMap,
    LinearMap,
    QuadraticDiagonalMap,
    TrigPolynomial,
)

KNOWN_CHECKS = ("stability", "cesaro", "h5", "lemma-sum", "perturbation")


@dataclass(frozen=True)
class OutputSpec:
    directory: str | None
    csv_name: str
    json_name: str


@dataclass(frozen=True)
class TransportSetup:
    """Grid and coefficients kept alongside transport problems for oracles."""

    grid: TorusGrid
    coefficients: TransportCoefficients
    initial_profile: np.ndarray


@dataclass(frozen=True)
class RunConfig:
    """Validated sweep configuration."""

    name: str
    seed: int
    problem: SemilinearProblem          # base problem, no oscillation applied
    lambdas: tuple
    steps: int | None                   # None means automatic selection
    checks: tuple
    output: OutputSpec
    initial_perturbation: float
    transport: TransportSetup | None
    fingerprint: str

    @property
    def is_transport(self) -> bool:
        return self.transport is not None


def load_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return parse_config(raw, default_name=path.stem)


def parse_config(raw: dict, default_name: str = "run") -> RunConfig:
    """Validate a parsed JSON document into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    known = {
        "name",
        "seed",
        "problem",
        "lambdas",
        "steps",
        "checks",
        "output",
        "initial_perturbation",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
    name = raw.get("name", default_name)
    if not isinstance(name, str) or not name:
        raise ConfigError("name must be a nonempty string")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")

    problem_raw = _require(raw, "problem", dict)
    problem, transport = _parse_problem(problem_raw)

    lambdas_raw = _require(raw, "lambdas", list)
    lambdas = tuple(float(v) for v in lambdas_raw)
    if any(not (0.0 < lam <= 1.0) for lam in lambdas):
        raise ConfigError("lambdas must lie in (0, 1]")
    if any(second >= first for first, second in zip(lambdas, lambdas[1:])):
        raise ConfigError("lambdas must be strictly descending")

    steps_raw = raw.get("steps", "auto")
    if steps_raw == "auto":
        steps = None
    elif isinstance(steps_raw, int) and steps_raw >= 1:
        steps = steps_raw
    else:
        raise ConfigError('steps must be "auto" or a positive integer')

    checks_raw = raw.get("checks", [])
    if not isinstance(checks_raw, list):
        raise ConfigError("checks must be a list")
    for check in checks_raw:
        if check not in KNOWN_CHECKS:
            raise ConfigError(f"unknown check {check!r}; known: {', '.join(KNOWN_CHECKS)}")
    checks = tuple(checks_raw)

    output_raw = raw.get("output", {})
    if not isinstance(output_raw, dict):
        raise ConfigError("output must be an object")
    directory = output_raw.get("directory")
    if directory is not None and not isinstance(directory, str):
        raise ConfigError("output.directory must be a string when present")
    output = OutputSpec(
        directory=directory,
        csv_name=output_raw.get("csv", f"{name}.csv"),
        json_name=output_raw.get("json", f"{name}.json"),
    )

    perturbation = float(raw.get("initial_perturbation", 0.0))
    if perturbation < 0:
        raise ConfigError("initial_perturbation must be non-negative")

    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    fingerprint = hashlib.sha256(canonical.encode()).hexdigest()
    return RunConfig(
        name=name,
        seed=seed,
        problem=problem,
        lambdas=lambdas,
        steps=steps,
        checks=checks,
        output=output,
        initial_perturbation=perturbation,
        transport=transport,
        fingerprint=fingerprint,
    )


# ---------------------------------------------------------------------------
# problem parsing


def _require(raw: dict, key: str, kind) -> object:
    if key not in raw:
        raise ConfigError(f"missing required field {key!r}")
    value = raw[key]
    if not isinstance(value, kind):
        raise ConfigError(f"field {key!r} must be of type {kind.__name__}")
    return value


def _parse_problem(raw: dict):
    kind = raw.get("kind", "matrix")
    if kind == "matrix":
        return _parse_matrix_problem(raw), None
    if kind == "transport":
        return _parse_transport_problem(raw)
    raise ConfigError(f'problem.kind must be "matrix" or "transport", not {kind!r}')


def _parse_signal(raw: dict, context: str, shape=None) -> TrigPolynomial:
    if not isinstance(raw, dict) or "modes" not in raw:
        raise ConfigError(f"{context}: expected an object with a 'modes' list")
    modes = raw["modes"]
    if not isinstance(modes, list) or not modes:
        raise ConfigError(f"{context}: 'modes' must be a nonempty list")
    parsed = []
    for mode in modes:
        if not isinstance(mode, dict) or "freq" not in mode:
            raise ConfigError(f"{context}: each mode needs a 'freq' field")
        cos_c = np.asarray(mode.get("cos", 0.0), dtype=float)
        sin_c = np.asarray(mode.get("sin", np.zeros_like(cos_c)), dtype=float)
        parsed.append((float(mode["freq"]), cos_c, sin_c))
    try:
        signal = TrigPolynomial.from_modes(parsed)
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    if shape is not None and signal.shape != shape:
        raise ConfigError(f"{context}: coefficient shape {signal.shape} expected {shape}")
    return signal


def _parse_envelope(raw, context: str) -> DecayEnvelope:
    if raw is None:
        return DecayEnvelope.none()
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(f"{context}: envelope needs a 'kind'")
    kind = raw["kind"]
    try:
        if kind == "none":
            return DecayEnvelope.none()
        if kind == "exponential":
            return DecayEnvelope.exponential(float(raw.get("rate", 0.0)))
        if kind == "algebraic":
            return DecayEnvelope.algebraic(float(raw.get("exponent", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    raise ConfigError(f"{context}: unknown envelope kind {kind!r}")


def _parse_state_map(raw: dict, context: str, dim: int):
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(f"{context}: state map needs a 'kind'")
    kind = raw["kind"]
    if kind == "identity":
        return IdentityMap()
    if kind == "quadratic":
        return QuadraticDiagonalMap()
    if kind == "sine":
        return BoundedSineMap()
    if kind == "linear":
        matrix = np.asarray(raw.get("matrix"), dtype=float)
        if matrix.shape != (dim, dim):
            raise ConfigError(f"{context}: linear map matrix must be {dim}x{dim}")
        return LinearMap(matrix)
    if kind == "constant":
        vector = np.asarray(raw.get("vector"), dtype=float)
        if vector.shape != (dim,):
            raise ConfigError(f"{context}: constant map vector must have length {dim}")
        return ConstantMap(vector)
    raise ConfigError(f"{context}: unknown state map kind {kind!r}")


def _parse_nonlinearity(raw, dim: int) -> APMap:
    if raw is None:
        return APMap.zero()
    if not isinstance(raw, dict):
        raise ConfigError("nonlinearity must be an object")
    terms_raw = raw.get("terms", [])
    if not isinstance(terms_raw, list):
        raise ConfigError("nonlinearity.terms must be a list")
    terms = []
    for index, term_raw in enumerate(terms_raw):
        context = f"nonlinearity.terms[{index}]"
        if not isinstance(term_raw, dict):
            raise ConfigError(f"{context}: expected an object")
        weight = _parse_signal(term_raw.get("weight"), f"{context}.weight", shape=())
        envelope = _parse_envelope(term_raw.get("envelope"), context)
        state_map = _parse_state_map(term_raw.get("map"), f"{context}.map", dim)
        terms.append(APTerm(weight, envelope, state_map))
    return APMap(terms=tuple(terms))


def _parse_matrix_problem(raw: dict) -> SemilinearProblem:
    dim = raw.get("dimension")
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError("problem.dimension must be a positive integer")
    shape = (dim, dim)
    operator_raw = _require(raw, "operator", dict)
    law = _parse_signal(operator_raw, "problem.operator", shape=shape)
    envelope = None
    envelope_matrix = None
    if "envelope" in operator_raw and operator_raw["envelope"] is not None:
        env_raw = operator_raw["envelope"]
        envelope = _parse_envelope(env_raw, "problem.operator.envelope")
        if not envelope.decays():
            raise ConfigError(
                "problem.operator.envelope: fold non-decaying terms into the modes"
            )
        envelope_matrix = np.asarray(env_raw.get("matrix"), dtype=float)
        if envelope_matrix.shape != shape:
            raise ConfigError(f"problem.operator.envelope.matrix must be {dim}x{dim}")
    family = OperatorFamily(
        law=law,
        norms=NormWeights.euclidean(dim),
        envelope=envelope,
        envelope_matrix=envelope_matrix,
    )
    nonlinearity = _parse_nonlinearity(raw.get("nonlinearity"), dim)
    initial = np.asarray(_require(raw, "initial", list), dtype=float)
    if initial.shape != (dim,):
        raise ConfigError(f"problem.initial must be a vector of length {dim}")
    horizon = float(_require(raw, "horizon", (int, float)))
    if not horizon > 0:
        raise ConfigError("problem.horizon must be positive")
    try:
        return SemilinearProblem(family, nonlinearity, initial, horizon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_profile(raw, grid: TorusGrid, context: str) -> np.ndarray:
    """Spatial profile on the grid: Fourier record or explicit value list."""
    x = grid.nodes
    if isinstance(raw, dict) and "fourier" in raw:
        values = np.zeros(grid.points)
        for mode in raw["fourier"]:
            if not isinstance(mode, dict) or "k" not in mode:
                raise ConfigError(f"{context}: fourier modes need an integer 'k'")
            k = int(mode["k"])
            values = values + float(mode.get("cos", 0.0)) * np.cos(2 * np.pi * k * x)
            values = values + float(mode.get("sin", 0.0)) * np.sin(2 * np.pi * k * x)
        return values
    if isinstance(raw, list):
        values = np.asarray(raw, dtype=float)
        if values.shape != (grid.points,):
            raise ConfigError(f"{context}: expected {grid.points} values")
        return values
    raise ConfigError(f"{context}: expected a fourier record or a value list")


def _parse_transport_problem(raw: dict):
    grid_raw = _require(raw, "grid", dict)
    try:
        grid = TorusGrid(
            points=int(grid_raw.get("points", 0)),
            components=int(grid_raw.get("components", 1)),
        )
    except ValueError as exc:
        raise ConfigError(f"problem.grid: {exc}") from exc
    m = grid.components
    advection = None
    if raw.get("advection") is not None:
        advection = _parse_signal(raw["advection"], "problem.advection")
        if advection.shape == () and m == 1:
            advection = TrigPolynomial(
                advection.freqs,
                advection.cos_coeffs.reshape(-1, 1, 1),
                advection.sin_coeffs.reshape(-1, 1, 1),
            )
        if advection.shape not in ((m, m), (grid.points, m, m)):
            raise ConfigError("problem.advection coefficients must be MxM or per grid point")
    zero_order = None
    if raw.get("zero_order") is not None:
        zero_order = _parse_signal(raw["zero_order"], "problem.zero_order")
        if zero_order.shape == () and m == 1:
            zero_order = TrigPolynomial(
                zero_order.freqs,
                zero_order.cos_coeffs.reshape(-1, 1, 1),
                zero_order.sin_coeffs.reshape(-1, 1, 1),
            )
        if zero_order.shape not in ((m, m), (grid.points, m, m)):
            raise ConfigError("problem.zero_order coefficients must be MxM or per grid point")
    forcing = None
    if raw.get("forcing") is not None:
        time_raw = raw["forcing"].get("time") if isinstance(raw["forcing"], dict) else None
        profile_raw = raw["forcing"].get("profile") if isinstance(raw["forcing"], dict) else None
        if time_raw is None or profile_raw is None:
            raise ConfigError("problem.forcing needs 'time' (signal) and 'profile' fields")
        time_signal = _parse_signal(time_raw, "problem.forcing.time", shape=())
        profile = _parse_profile(profile_raw, grid, "problem.forcing.profile")
        if m != 1:
            raise ConfigError("profile forcing is supported for single-component systems")
        forcing = TrigPolynomial(
            time_signal.freqs,
            time_signal.cos_coeffs[:, None] * profile[None, :],
            time_signal.sin_coeffs[:, None] * profile[None, :],
        )
        forcing = TrigPolynomial(
            forcing.freqs,
            forcing.cos_coeffs.reshape(-1, grid.points, 1),
            forcing.sin_coeffs.reshape(-1, grid.points, 1),
        )
    coefficients = TransportCoefficients(
        advection=advection, zero_order=zero_order, forcing=forcing
    )
    try:
        family = discretize(coefficients, grid)
        nonlinearity = forcing_as_map(coefficients, grid)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"problem: {exc}") from exc
    if m != 1 and "initial" in raw and isinstance(raw["initial"], dict):
        raise ConfigError("fourier initial data is supported for single-component systems")
    profile = _parse_profile(_require(raw, "initial", (dict, list)), grid, "problem.initial")
    initial = np.repeat(profile, m) if m > 1 else profile
    horizon = float(_require(raw, "horizon", (int, float)))
    if not horizon > 0:
        raise ConfigError("problem.horizon must be positive")
    try:
        problem = SemilinearProblem(family, nonlinearity, initial, horizon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return problem, TransportSetup(grid=grid, coefficients=coefficients, initial_profile=profile)
