"""Linear evolution systems by the frozen-coefficient product formula.

The two-parameter solution operator of u' = A(t) u is approximated by
composing exponentials of the generator frozen at the left endpoints of a
uniform partition.  Exponential growth certificates (M, omega) are fitted
from sampled operator norms, in both the base norm and the stronger
discrete-H1 norm, and feed the coefficient-perturbation bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatchError, ExponentialRangeError
from .signals import DecayEnvelope, TrigPolynomial

Array = np.ndarray

#: relative accuracy of the matrix exponential core within its range
EXP_TOL = 1e-12

#: inf-norm of h*A beyond which the exponential is refused outright
_EXP_NORM_CAP = 1e4

#: batch size for stacked exponentials (bounds peak memory)
_EXP_CHUNK = 256


# ---------------------------------------------------------------------------
# norm weights (base norm E and stronger norm V)


@dataclass(frozen=True)
class NormWeights:
    """Factor matrices realizing the E and V norms as ||W x||_2.

    Induced operator norms are computed from the factors: the V-to-E norm of
    a matrix D is ||W_e D W_v^{-1}||_2, the E operator norm is
    ||W_e R W_e^{-1}||_2, and likewise in V.
    """

    e_factor: Array
    v_factor: Array

    def __post_init__(self):
        e_fac = np.asarray(self.e_factor, dtype=float)
        v_fac = np.asarray(self.v_factor, dtype=float)
        if e_fac.shape != v_fac.shape or e_fac.ndim != 2 or e_fac.shape[0] != e_fac.shape[1]:
            raise ValueError("norm factors must be square matrices of equal size")
        object.__setattr__(self, "e_factor", e_fac)
        object.__setattr__(self, "v_factor", v_fac)
        n = e_fac.shape[0]
        trivial = bool(
            np.array_equal(e_fac, np.eye(n)) and np.array_equal(v_fac, np.eye(n))
        )
        object.__setattr__(self, "_trivial", trivial)
        if trivial:
            object.__setattr__(self, "_e_inv", e_fac)
            object.__setattr__(self, "_v_inv", v_fac)
        else:
            object.__setattr__(self, "_e_inv", np.linalg.inv(e_fac))
            object.__setattr__(self, "_v_inv", np.linalg.inv(v_fac))

    @classmethod
    def euclidean(cls, dim: int) -> "NormWeights":
        eye = np.eye(dim)
        return cls(eye, eye)

    @property
    def dim(self) -> int:
        return self.e_factor.shape[0]

    def compatible(self, other: "NormWeights") -> bool:
        return self.e_factor.shape == other.e_factor.shape and np.allclose(
            self.e_factor, other.e_factor
        ) and np.allclose(self.v_factor, other.v_factor)

    # -- vector norms --------------------------------------------------------

    def e_norm(self, v: Array) -> float:
        v = np.asarray(v, dtype=float)
        if self._trivial:
            return float(np.linalg.norm(v))
        return float(np.linalg.norm(self.e_factor @ v))

    def v_norm(self, v: Array) -> float:
        v = np.asarray(v, dtype=float)
        if self._trivial:
            return float(np.linalg.norm(v))
        return float(np.linalg.norm(self.v_factor @ v))

    def e_norm_many(self, vs: Array) -> Array:
        """Row-wise E norms of an (m, n) array."""
        vs = np.asarray(vs, dtype=float)
        if self._trivial:
            return np.linalg.norm(vs, axis=1)
        return np.linalg.norm(vs @ self.e_factor.T, axis=1)

    # -- operator norms ------------------------------------------------------

    def e_opnorm(self, mat: Array) -> float:
        if self._trivial:
            return float(np.linalg.norm(mat, 2))
        return float(np.linalg.norm(self.e_factor @ mat @ self._e_inv, 2))

    def v_opnorm(self, mat: Array) -> float:
        if self._trivial:
            return float(np.linalg.norm(mat, 2))
        return float(np.linalg.norm(self.v_factor @ mat @ self._v_inv, 2))

    def ve_opnorm(self, mat: Array) -> float:
        """Induced norm of mat as an operator from (V, ||.||_V) to (E, ||.||_E)."""
        if self._trivial:
            return float(np.linalg.norm(mat, 2))
        return float(np.linalg.norm(self.e_factor @ mat @ self._v_inv, 2))

    def ve_opnorm_many(self, mats: Array) -> Array:
        """Batched V-to-E norms of an (m, n, n) stack."""
        mats = np.asarray(mats, dtype=float)
        if not self._trivial:
            mats = self.e_factor[None] @ mats @ self._v_inv[None]
        if mats.shape[-1] == 1:
            return np.abs(mats[:, 0, 0])
        return np.linalg.svd(mats, compute_uv=False)[:, 0]


# ---------------------------------------------------------------------------
# operator families


@dataclass(frozen=True)
class OperatorFamily:
    """Continuous family t -> A(t) of n x n matrices.

    A(t) = P(t) + d(t) B with P a matrix trigonometric polynomial and d an
    optional decay envelope weighting a fixed matrix B.  With ``lam`` set the
    family evaluates as A(t / lam); the stored law keeps base frequencies.
    """

    law: TrigPolynomial
    norms: NormWeights
    envelope: DecayEnvelope | None = None
    envelope_matrix: Array | None = None
    lam: float | None = None

    def __post_init__(self):
        shape = self.law.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError("the time law must be matrix-valued (n, n)")
        if (self.envelope is None) != (self.envelope_matrix is None):
            raise ValueError("envelope and envelope_matrix go together")
        if self.envelope is not None:
            if not self.envelope.decays():
                raise ValueError(
                    "the envelope term must decay; fold constant terms into the law"
                )
            mat = np.asarray(self.envelope_matrix, dtype=float)
            if mat.shape != shape:
                raise ValueError("envelope matrix shape must match the law")
            object.__setattr__(self, "envelope_matrix", mat)
        if self.norms.dim != shape[0]:
            raise DimensionMismatchError("norm weights do not match the family dimension")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive when present")

    @classmethod
    def constant(cls, matrix: Array, norms: NormWeights | None = None) -> "OperatorFamily":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(
            law=TrigPolynomial.constant(matrix),
            norms=norms or NormWeights.euclidean(matrix.shape[0]),
        )

    @property
    def dim(self) -> int:
        return self.law.shape[0]

    @property
    def max_frequency(self) -> float:
        """Largest base-time frequency of the law."""
        return self.law.max_frequency

    def rescaled(self, lam: float) -> "OperatorFamily":
        if self.lam is not None:
            raise ValueError("family is already lambda-rescaled")
        return replace(self, lam=float(lam))

    def resolution_step(self, factor: float = 10.0) -> float | None:
        """Largest step resolving the fastest oscillation, or None if unrescaled."""
        if self.lam is None:
            return None
        return self.lam / (factor * max(self.max_frequency, 1.0))

    def _timescale(self, t):
        return t / self.lam if self.lam is not None else t

    def at(self, t: float) -> Array:
        s = self._timescale(float(t))
        out = self.law.value(s)
        if self.envelope is not None:
            out = out + self.envelope.value(s) * self.envelope_matrix
        return out

    def at_many(self, ts: Array) -> Array:
        """Stacked evaluation, shape (len(ts), n, n)."""
        s = self._timescale(np.asarray(ts, dtype=float))
        out = self.law.value_many(s)
        if self.envelope is not None:
            out = out + self.envelope.value_many(s)[:, None, None] * self.envelope_matrix
        return out


# ---------------------------------------------------------------------------
# matrix exponential


def _expm_stack(mats: Array) -> Array:
    """exp of a stack of matrices with range checks; shape preserved."""
    mats = np.asarray(mats, dtype=float)
    if not np.all(np.isfinite(mats)):
        raise ExponentialRangeError("exponential out of range: non-finite entries")
    scale = np.max(np.sum(np.abs(mats), axis=-1)) if mats.size else 0.0
    if scale > _EXP_NORM_CAP:
        raise ExponentialRangeError(
            f"exponential out of range: ||hA|| ~ {scale:.3g} exceeds the "
            f"scaling limit {_EXP_NORM_CAP:.0e}"
        )
    if mats.shape[-1] == 1:
        return np.exp(mats)
    out = np.empty_like(mats)
    for start in range(0, mats.shape[0], _EXP_CHUNK):
        out[start : start + _EXP_CHUNK] = sla.expm(mats[start : start + _EXP_CHUNK])
    if not np.all(np.isfinite(out)):
        raise ExponentialRangeError("exponential out of range: overflow in result")
    return out


def matrix_exponential(matrix: Array, step: float) -> Array:
    """exp(step * matrix) by scaling-and-squaring with a Pade core.

    Relative accuracy is EXP_TOL in the operator norm for ||step*matrix||
    up to about 1e3; arguments beyond the scaling limits raise
    ExponentialRangeError.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if not step >= 0:
        raise ValueError("step must be non-negative")
    return _expm_stack((step * matrix)[None])[0]


# ---------------------------------------------------------------------------
# product-formula evolution operators


@dataclass(frozen=True)
class EvolutionOperatorApprox:
    """Assembled product  exp(h A(t_{n-1})) ... exp(h A(t_0))  over [s, t].

    Breakpoints are t_j = s + j h with h = (t - s) / n_steps; the latest
    factor is applied last.
    """

    s: float
    t: float
    n_steps: int
    breakpoints: Array
    factors: Array      # (n_steps, n, n), factor j propagates over [t_j, t_{j+1}]
    matrix: Array

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def product_evolution(
    family: OperatorFamily, s: float, t: float, n_steps: int
) -> EvolutionOperatorApprox:
    """Frozen-coefficient approximant of the evolution operator over [s, t].

    Freezes the generator at the left endpoint of each of ``n_steps`` equal
    subintervals.  For s == t the identity is returned; for time-independent
    families the product collapses to exp((t - s) A) up to exponential
    tolerance for every n.
    """
    s, t = float(s), float(t)
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dim = family.dim
    h = (t - s) / n_steps
    breakpoints = s + h * np.arange(n_steps + 1)
    if h == 0.0:
        factors = np.broadcast_to(np.eye(dim), (n_steps, dim, dim)).copy()
        return EvolutionOperatorApprox(s, t, n_steps, breakpoints, factors, np.eye(dim))
    factors = _expm_stack(h * family.at_many(breakpoints[:-1]))
    if dim == 1:
        matrix = factors.prod(axis=0)
    else:
        matrix = np.eye(dim)
        for factor in factors:
            matrix = factor @ matrix
    return EvolutionOperatorApprox(s, t, n_steps, breakpoints, factors, matrix)


def apply_evolution(operator: EvolutionOperatorApprox, v: Array) -> Array:
    """Apply the assembled operator to a state vector."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != operator.dim:
        raise DimensionMismatchError(
            f"vector dimension {v.shape[0]} does not match operator dimension {operator.dim}"
        )
    return operator.matrix @ v


# ---------------------------------------------------------------------------
# stability certification


@dataclass(frozen=True)
class StabilityEstimate:
    """Sampled exponential growth certificate ||R_n(t, s)|| <= M e^{omega (t-s)}."""

    M: float
    omega: float
    norm_kind: str          # "e" or "v"
    certified_over: str
    certifiable: bool = True

    def bound(self, span: float) -> float:
        return self.M * math.exp(self.omega * span)

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "omega": self.omega,
            "norm": self.norm_kind,
            "certified_over": self.certified_over,
            "certifiable": self.certifiable,
        }


def merge_estimates(first: StabilityEstimate, second: StabilityEstimate) -> StabilityEstimate:
    """Common certificate dominating both inputs (same norm kind)."""
    if first.norm_kind != second.norm_kind:
        raise ValueError("cannot merge estimates for different norms")
    return StabilityEstimate(
        M=max(first.M, second.M),
        omega=max(first.omega, second.omega),
        norm_kind=first.norm_kind,
        certified_over=f"merge({first.certified_over}; {second.certified_over})",
        certifiable=first.certifiable and second.certifiable,
    )


def _sample_pairs(horizon: float, grid_points: int) -> list:
    nodes = np.linspace(0.0, horizon, grid_points)
    return [(float(a), float(b)) for i, a in enumerate(nodes) for b in nodes[i:]]


def certify_stability(
    family: OperatorFamily,
    horizon: float,
    *,
    grid_points: int = 7,
    n_values: Sequence[int] = (16, 64),
    omega_cap: float = 50.0,
) -> tuple[StabilityEstimate, StabilityEstimate]:
    """Fit exponential growth certificates from sampled product norms.

    Operator norms of product approximants are computed exactly (singular
    values) over a grid of (s, t) pairs in [0, horizon] and several step
    counts, then log ||R|| is least-squares fitted against t - s.  M is
    clamped to >= 1 and inflated minimally so the certificate dominates
    every sample.  Returns the estimate in the E norm and in the V norm.
    A fitted omega beyond ``omega_cap`` marks the estimate not certifiable.

    Desk scale only: dimensions up to a few hundred.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    pairs = _sample_pairs(horizon, grid_points)
    spans, e_logs, v_logs = [], [], []
    for s, t in pairs:
        for n_steps in n_values:
            operator = product_evolution(family, s, t, n_steps)
            spans.append(t - s)
            e_logs.append(math.log(max(family.norms.e_opnorm(operator.matrix), 1e-300)))
            v_logs.append(math.log(max(family.norms.v_opnorm(operator.matrix), 1e-300)))
    spans = np.asarray(spans)
    described = (
        f"(s,t) grid of {grid_points} nodes on [0, {horizon:g}], "
        f"n in {tuple(n_values)}"
    )

    def fit(logs: Array, kind: str) -> StabilityEstimate:
        logs = np.asarray(logs)
        omega = float(np.polyfit(spans, logs, 1)[0])
        slack = float(np.max(logs - omega * spans))
        big_m = max(1.0, math.exp(slack)) * (1.0 + 1e-9)
        return StabilityEstimate(
            M=big_m,
            omega=omega,
            norm_kind=kind,
            certified_over=described,
            certifiable=omega <= omega_cap,
        )

    return fit(e_logs, "e"), fit(v_logs, "v")


# ---------------------------------------------------------------------------
# coefficient perturbation bound


def perturbation_gap(
    family_a: OperatorFamily,
    family_b: OperatorFamily,
    v: Array,
    s: float,
    t: float,
    n_steps: int,
    stability_e: StabilityEstimate,
    stability_v: StabilityEstimate,
    *,
    quad_nodes: int = 512,
) -> tuple[float, float]:
    """Evaluate both sides of the coefficient-perturbation inequality.

    lhs is ||R^a_n(t,s) v - R^b_n(t,s) v|| in the E norm; rhs is
    M M_V e^{(|omega| + |omega_V|) t} ||v||_V times the integral over [s, t]
    of the pointwise V-to-E norm of A^a - A^b (composite midpoint).  The two
    certificates must jointly dominate both families.
    """
    if family_a.dim != family_b.dim:
        raise DimensionMismatchError("families must share their dimension")
    if not family_a.norms.compatible(family_b.norms):
        raise DimensionMismatchError("families must share their norm weights")
    v = np.asarray(v, dtype=float)
    if v.shape[0] != family_a.dim:
        raise DimensionMismatchError("vector dimension does not match the families")
    op_a = product_evolution(family_a, s, t, n_steps)
    op_b = product_evolution(family_b, s, t, n_steps)
    norms = family_a.norms
    lhs = norms.e_norm((op_a.matrix - op_b.matrix) @ v)

    width = (t - s) / quad_nodes
    nodes = s + width * (np.arange(quad_nodes) + 0.5)
    deltas = family_a.at_many(nodes) - family_b.at_many(nodes)
    integral = float(width * norms.ve_opnorm_many(deltas).sum())
    amplification = (
        stability_e.M
        * stability_v.M
        * math.exp((abs(stability_e.omega) + abs(stability_v.omega)) * t)
    )
    rhs = amplification * norms.v_norm(v) * integral
    return lhs, rhs


# ---------------------------------------------------------------------------
# empirical linear averaging check


def check_linear_averaging(
    family: OperatorFamily,
    averaged_matrix: Array,
    lambdas: Sequence[float],
    v: Array,
    horizon: float,
    *,
    pairs: Sequence[tuple] | None = None,
    resolution: float = 10.0,
) -> list:
    """Per-lambda sup discrepancy between rescaled products and exp((t-s) A_hat).

    For each lambda the family is evaluated at t / lambda and the product
    step is chosen to resolve the fastest oscillation; the discrepancy is
    maximized over the (s, t) grid.  A decreasing sequence along lambda -> 0
    is the empirical form of the linear averaging hypothesis.
    """
    if family.lam is not None:
        raise ValueError("pass the base (unrescaled) family")
    averaged_matrix = np.atleast_2d(np.asarray(averaged_matrix, dtype=float))
    v = np.asarray(v, dtype=float)
    if pairs is None:
        pairs = [
            (s, t)
            for i, s in enumerate(np.linspace(0.0, horizon, 4))
            for t in np.linspace(0.0, horizon, 4)[i + 1 :]
        ]
    norms = family.norms
    discrepancies = []
    for lam in lambdas:
        rescaled = family.rescaled(float(lam))
        h_max = rescaled.resolution_step(resolution)
        worst = 0.0
        for s, t in pairs:
            n_steps = max(1, int(math.ceil((t - s) / h_max)))
            operator = product_evolution(rescaled, s, t, n_steps)
            reference = matrix_exponential(averaged_matrix, t - s)
            worst = max(worst, norms.e_norm((operator.matrix - reference) @ v))
        discrepancies.append(worst)
    return discrepancies
