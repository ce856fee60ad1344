"""Almost-periodic time signals and state maps.

Time dependence is represented exactly by finite trigonometric polynomials
(optionally damped by a decay envelope), so means and Lipschitz constants
have closed forms.  Nonlinearities are finite sums of signal-weighted maps
drawn from a small catalog.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, GrowthCertificationError

Array = np.ndarray


# ---------------------------------------------------------------------------
# trigonometric polynomials


@dataclass(frozen=True)
class TrigPolynomial:
    """Finite mode sum  t ->  sum_k  c_k cos(w_k t) + s_k sin(w_k t).

    Coefficients are real tensors of a common shape: () for scalar signals,
    (m,) for vector signals, (m, m) for matrix signals.  Frequencies are in
    radians per unit time, pairwise distinct and non-negative; the frequency-0
    mode has no sine coefficient.
    """

    freqs: Array        # (K,)
    cos_coeffs: Array   # (K, *shape)
    sin_coeffs: Array   # (K, *shape)

    def __post_init__(self):
        freqs = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        cos_c = np.asarray(self.cos_coeffs, dtype=float)
        sin_c = np.asarray(self.sin_coeffs, dtype=float)
        if freqs.ndim != 1:
            raise ValueError("freqs must be one-dimensional")
        if cos_c.shape != sin_c.shape or cos_c.shape[:1] != freqs.shape:
            raise ValueError("coefficient arrays must share the shape (K, *tensor_shape)")
        if np.any(freqs < 0) or not np.all(np.isfinite(freqs)):
            raise ValueError("frequencies must be finite and non-negative")
        if len(np.unique(freqs)) != len(freqs):
            raise ValueError("frequencies must be pairwise distinct")
        if not (np.all(np.isfinite(cos_c)) and np.all(np.isfinite(sin_c))):
            raise ValueError("coefficients must be finite")
        zero = freqs == 0.0
        if np.any(zero) and np.any(sin_c[zero] != 0.0):
            raise ValueError("the frequency-0 mode must have a zero sine coefficient")
        order = np.argsort(freqs)
        object.__setattr__(self, "freqs", freqs[order])
        object.__setattr__(self, "cos_coeffs", np.ascontiguousarray(cos_c[order]))
        object.__setattr__(self, "sin_coeffs", np.ascontiguousarray(sin_c[order]))

    # -- construction -------------------------------------------------------

    @classmethod
    def from_modes(cls, modes: Iterable[Sequence]) -> "TrigPolynomial":
        """Build from an iterable of ``(freq, cos)`` or ``(freq, cos, sin)``."""
        modes = list(modes)
        if not modes:
            raise ValueError("at least one mode is required")
        freqs, cos_l, sin_l = [], [], []
        for mode in modes:
            if len(mode) == 2:
                freq, cos_c = mode
                sin_c = None
            elif len(mode) == 3:
                freq, cos_c, sin_c = mode
            else:
                raise ValueError("modes are (freq, cos) or (freq, cos, sin) records")
            cos_c = np.asarray(cos_c, dtype=float)
            sin_c = np.zeros_like(cos_c) if sin_c is None else np.asarray(sin_c, dtype=float)
            freqs.append(float(freq))
            cos_l.append(cos_c)
            sin_l.append(sin_c)
        shape = cos_l[0].shape
        if any(c.shape != shape or s.shape != shape for c, s in zip(cos_l, sin_l)):
            raise ValueError("all mode coefficients must share one tensor shape")
        return cls(np.array(freqs), np.stack(cos_l), np.stack(sin_l))

    @classmethod
    def constant(cls, value) -> "TrigPolynomial":
        """The constant signal t -> value."""
        return cls.from_modes([(0.0, value)])

    # -- structure -----------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.cos_coeffs.shape[1:]

    @property
    def max_frequency(self) -> float:
        return float(self.freqs[-1])

    def mean(self) -> Array:
        """Long-time average: the frequency-0 cosine coefficient."""
        if self.freqs[0] == 0.0:
            return self.cos_coeffs[0].copy()
        return np.zeros(self.shape)

    def coefficient_bound(self) -> Array:
        """Entrywise bound  sup_t |value(t)| <= sum_k (|c_k| + |s_k|)."""
        return (np.abs(self.cos_coeffs) + np.abs(self.sin_coeffs)).sum(axis=0)

    def rescaled(self, lam: float) -> "TrigPolynomial":
        """The signal t -> value(t / lam): same modes, frequencies / lam."""
        if lam <= 0:
            raise ValueError("lam must be positive")
        return replace(self, freqs=self.freqs / lam)

    # -- evaluation ----------------------------------------------------------

    def value(self, t: float) -> Array:
        phases = self.freqs * float(t)
        return np.tensordot(np.cos(phases), self.cos_coeffs, axes=(0, 0)) + np.tensordot(
            np.sin(phases), self.sin_coeffs, axes=(0, 0)
        )

    def value_many(self, ts: Array) -> Array:
        """Vectorized evaluation; returns shape (len(ts), *shape)."""
        ts = np.asarray(ts, dtype=float)
        phases = np.outer(ts, self.freqs)
        return np.tensordot(np.cos(phases), self.cos_coeffs, axes=(1, 0)) + np.tensordot(
            np.sin(phases), self.sin_coeffs, axes=(1, 0)
        )

    def antiderivative(self, t: float) -> Array:
        """Closed-form integral of the signal over [0, t]."""
        t = float(t)
        out = np.zeros(self.shape)
        for freq, cos_c, sin_c in zip(self.freqs, self.cos_coeffs, self.sin_coeffs):
            if freq == 0.0:
                out = out + cos_c * t
            else:
                out = out + cos_c * (math.sin(freq * t) / freq)
                out = out + sin_c * ((1.0 - math.cos(freq * t)) / freq)
        return out


def eval_signal(signal: TrigPolynomial, t: float) -> Array:
    """Evaluate a trigonometric polynomial at time t."""
    return signal.value(t)


# ---------------------------------------------------------------------------
# decay envelopes


@dataclass(frozen=True)
class DecayEnvelope:
    """Multiplicative damping profile with value in (0, 1] for t >= 0.

    Kinds: ``none`` (identically 1), ``exponential`` (exp(-rate t)) and
    ``algebraic`` ((1 + t)^-exponent).  ``time_scale`` stretches the time
    axis, which is how lambda-rescaling acts on envelopes.
    """

    kind: str
    rate: float = 0.0
    exponent: float = 0.0
    time_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "exponential", "algebraic"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "exponential" and not self.rate > 0:
            raise ValueError("exponential envelopes need a positive rate")
        if self.kind == "algebraic" and not self.exponent > 0:
            raise ValueError("algebraic envelopes need a positive exponent")
        if not self.time_scale > 0:
            raise ValueError("time_scale must be positive")

    @classmethod
    def none(cls) -> "DecayEnvelope":
        return cls("none")

    @classmethod
    def exponential(cls, rate: float) -> "DecayEnvelope":
        return cls("exponential", rate=float(rate))

    @classmethod
    def algebraic(cls, exponent: float) -> "DecayEnvelope":
        return cls("algebraic", exponent=float(exponent))

    def decays(self) -> bool:
        return self.kind != "none"

    def rescaled(self, lam: float) -> "DecayEnvelope":
        """Envelope of t -> value(t / lam)."""
        if lam <= 0:
            raise ValueError("lam must be positive")
        if self.kind == "none":
            return self
        return replace(self, time_scale=self.time_scale * lam)

    def value(self, t: float) -> float:
        return float(self.value_many(np.asarray([t]))[0])

    def value_many(self, ts: Array) -> Array:
        s = np.asarray(ts, dtype=float) / self.time_scale
        if self.kind == "none":
            return np.ones_like(s)
        if self.kind == "exponential":
            return np.exp(-self.rate * s)
        return (1.0 + s) ** (-self.exponent)


# ---------------------------------------------------------------------------
# state-map catalog


@dataclass(frozen=True)
class IdentityMap:
    """u -> u."""

    tag = "identity"

    def apply(self, u: Array) -> Array:
        return u

    def lipschitz_bound(self, radius: float) -> float:
        return 1.0

    def pinned_dimension(self):
        return None


@dataclass(frozen=True)
class LinearMap:
    """u -> B u for a fixed matrix B."""

    matrix: Array
    tag = "linear"

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("linear state maps need a square matrix")
        object.__setattr__(self, "matrix", mat)

    def apply(self, u: Array) -> Array:
        if u.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatchError(
                f"state dimension {u.shape[0]} does not match linear map "
                f"dimension {self.matrix.shape[1]}"
            )
        return self.matrix @ u

    def lipschitz_bound(self, radius: float) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def pinned_dimension(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class QuadraticDiagonalMap:
    """u -> (u_i^2)_i; Lipschitz with constant 2R on the R-ball, no global certificate."""

    tag = "quadratic"

    def apply(self, u: Array) -> Array:
        return u * u

    def lipschitz_bound(self, radius: float) -> float:
        return 2.0 * float(radius)

    def pinned_dimension(self):
        return None


@dataclass(frozen=True)
class BoundedSineMap:
    """u -> (sin u_i)_i."""

    tag = "sine"

    def apply(self, u: Array) -> Array:
        return np.sin(u)

    def lipschitz_bound(self, radius: float) -> float:
        return 1.0

    def pinned_dimension(self):
        return None


@dataclass(frozen=True)
class ConstantMap:
    """u -> fixed vector (pure forcing)."""

    vector: Array
    tag = "constant"

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=float)
        if vec.ndim != 1:
            raise ValueError("constant state maps need a vector")
        object.__setattr__(self, "vector", vec)

    def apply(self, u: Array) -> Array:
        if u.shape[0] != self.vector.shape[0]:
            raise DimensionMismatchError(
                f"state dimension {u.shape[0]} does not match forcing "
                f"dimension {self.vector.shape[0]}"
            )
        return self.vector

    def lipschitz_bound(self, radius: float) -> float:
        return 0.0

    def pinned_dimension(self):
        return self.vector.shape[0]


StateMap = Union[IdentityMap, LinearMap, QuadraticDiagonalMap, BoundedSineMap, ConstantMap]


# ---------------------------------------------------------------------------
# almost-periodic maps


@dataclass(frozen=True)
class APTerm:
    """One summand weight(t) * envelope(t) * state_map(u)."""

    weight: TrigPolynomial
    envelope: DecayEnvelope
    state_map: StateMap

    def __post_init__(self):
        if self.weight.shape != ():
            raise ValueError("term weights must be scalar signals")


@dataclass(frozen=True)
class APMap:
    """F(t, u) = sum_k weight_k(t) envelope_k(t) state_map_k(u).

    With ``lam`` set the map evaluates as F(t / lam, u); the stored weights
    keep their base frequencies so oscillation rates remain inspectable.
    """

    terms: tuple
    lam: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not all(isinstance(term, APTerm) for term in self.terms):
            raise TypeError("APMap terms must be APTerm instances")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive when present")

    @classmethod
    def zero(cls) -> "APMap":
        return cls(terms=())

    @classmethod
    def single(cls, weight, state_map, envelope=None) -> "APMap":
        """One-term map; scalar/constant weights are promoted to signals."""
        if not isinstance(weight, TrigPolynomial):
            weight = TrigPolynomial.constant(float(weight))
        return cls(terms=(APTerm(weight, envelope or DecayEnvelope.none(), state_map),))

    # -- structure -----------------------------------------------------------

    @property
    def max_frequency(self) -> float:
        return max((term.weight.max_frequency for term in self.terms), default=0.0)

    def rescaled(self, lam: float) -> "APMap":
        if self.lam is not None:
            raise ValueError("map is already lambda-rescaled")
        return replace(self, lam=float(lam))

    def is_autonomous(self) -> bool:
        return all(
            term.weight.max_frequency == 0.0 and not term.envelope.decays()
            for term in self.terms
        )

    def has_quadratic(self) -> bool:
        return any(isinstance(term.state_map, QuadraticDiagonalMap) for term in self.terms)

    def pinned_dimension(self):
        for term in self.terms:
            dim = term.state_map.pinned_dimension()
            if dim is not None:
                return dim
        return None

    def weight_bound(self) -> float:
        """sum_k sup_t |weight_k(t) envelope_k(t)|."""
        return float(sum(term.weight.coefficient_bound() for term in self.terms))

    def lipschitz_bound(self, radius: float) -> float:
        """Analytic Lipschitz constant of F(t, .) on the radius-ball, any t."""
        return float(
            sum(
                term.weight.coefficient_bound() * term.state_map.lipschitz_bound(radius)
                for term in self.terms
            )
        )

    # -- evaluation -----------------------------------------------------------

    def _timescale(self, t):
        return t / self.lam if self.lam is not None else t

    def weight_table(self, ts: Array) -> Array:
        """Combined weight * envelope values, shape (n_terms, len(ts))."""
        ts = np.asarray(ts, dtype=float)
        s = self._timescale(ts)
        if not self.terms:
            return np.zeros((0, len(ts)))
        return np.stack(
            [term.weight.value_many(s) * term.envelope.value_many(s) for term in self.terms]
        )

    def value(self, t: float, u: Array) -> Array:
        u = np.asarray(u, dtype=float)
        s = self._timescale(float(t))
        out = np.zeros_like(u)
        for term in self.terms:
            w = float(term.weight.value(s)) * term.envelope.value(s)
            out = out + w * term.state_map.apply(u)
        return out


def eval_map(ap_map: APMap, t: float, u: Array) -> Array:
    """Evaluate F(t, u)."""
    return ap_map.value(t, u)


def estimate_growth(
    ap_map: APMap,
    sample_radii: Sequence[float],
    sample_times: Sequence[float],
    *,
    dimension: int | None = None,
    directions: int = 8,
    seed: int = 0,
) -> float:
    """Sampled sublinear-growth constant.

    Returns the smallest c with ||F(t, u)|| <= c (1 + ||u||) over every sampled
    (t, u); a lower estimate of the true constant.  Maps containing a
    quadratic term are rejected: they admit no global sublinear certificate.
    """
    radii = [float(r) for r in sample_radii]
    times = [float(t) for t in sample_times]
    if not radii or not times:
        raise ValueError("sample_radii and sample_times must be nonempty")
    if ap_map.has_quadratic():
        raise GrowthCertificationError(
            "growth condition not certifiable: quadratic state maps are "
            "superlinear (the problem remains solvable, without a global "
            "existence certificate)"
        )
    dim = dimension or ap_map.pinned_dimension() or 1
    rng = np.random.default_rng(seed)
    points = [np.zeros(dim)]
    for radius in radii:
        dirs = [np.eye(dim)[i] for i in range(min(dim, 2))]
        while len(dirs) < directions:
            vec = rng.standard_normal(dim)
            dirs.append(vec / np.linalg.norm(vec))
        for direction in dirs[:directions]:
            points.append(radius * direction)
            points.append(-radius * direction)
    best = 0.0
    for t in times:
        for u in points:
            value = ap_map.value(t, u)
            best = max(best, float(np.linalg.norm(value)) / (1.0 + float(np.linalg.norm(u))))
    return best
