"""First-order hyperbolic transport on a periodic 1-D torus.

u_t = a(x, t) u_x + b(x, t) u + f(x, t) on [0, 1) with M components is
reduced to a finite-dimensional operator family via symmetrized central
differences, which keeps the advective part exactly skew-symmetric for
symmetric coefficients.  A characteristic-flow oracle covers the spatially
constant scalar case exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, HyperbolicityError
from .evolution import NormWeights, OperatorFamily
from .signals import APMap, APTerm, ConstantMap, DecayEnvelope, TrigPolynomial

Array = np.ndarray


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [0, 1) with M state components per point.

    State vectors are point-major: entry i*M + c is component c at node i.
    """

    points: int
    components: int = 1

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("need at least 8 grid points")
        if self.components < 1:
            raise ValueError("need at least one component")

    @property
    def spacing(self) -> float:
        return 1.0 / self.points

    @property
    def dim(self) -> int:
        return self.points * self.components

    @property
    def nodes(self) -> Array:
        return np.arange(self.points) * self.spacing


@dataclass(frozen=True)
class H1Weights:
    """Discrete H1 quadratic form on a torus grid.

    ||v||_V^2 = sum_i (|v_i|^2 + |(v_{i+1} - v_i)/dx|^2) dx with periodic
    wrap; the base norm is ||v||_E^2 = sum_i |v_i|^2 dx, so ||v||_E <= ||v||_V.
    """

    grid: TorusGrid

    def norm(self, v: Array) -> float:
        grid = self.grid
        v = np.asarray(v, dtype=float)
        if v.shape[0] != grid.dim:
            raise DimensionMismatchError(
                f"state dimension {v.shape[0]} does not match grid dimension {grid.dim}"
            )
        field = v.reshape(grid.points, grid.components)
        diffs = (np.roll(field, -1, axis=0) - field) / grid.spacing
        return float(np.sqrt(grid.spacing * ((field**2).sum() + (diffs**2).sum())))

    def weights(self) -> NormWeights:
        """Factor matrices realizing the E and H1 norms."""
        grid = self.grid
        dx = grid.spacing
        e_factor = np.sqrt(dx) * np.eye(grid.dim)
        forward = _forward_difference(grid)
        gram = dx * (np.eye(grid.dim) + forward.T @ forward)
        v_factor = np.linalg.cholesky(gram).T
        return NormWeights(e_factor=e_factor, v_factor=v_factor)


def h1_norm(v: Array, weights: H1Weights) -> float:
    """Discrete H1 norm of a grid function."""
    return weights.norm(v)


def _forward_difference(grid: TorusGrid) -> Array:
    n_x = grid.points
    d = np.zeros((n_x, n_x))
    idx = np.arange(n_x)
    d[idx, idx] = -1.0 / grid.spacing
    d[idx, (idx + 1) % n_x] = 1.0 / grid.spacing
    return np.kron(d, np.eye(grid.components))


def _central_difference(grid: TorusGrid) -> Array:
    n_x = grid.points
    d = np.zeros((n_x, n_x))
    idx = np.arange(n_x)
    d[idx, (idx + 1) % n_x] = 1.0 / (2.0 * grid.spacing)
    d[idx, (idx - 1) % n_x] = -1.0 / (2.0 * grid.spacing)
    return np.kron(d, np.eye(grid.components))


@dataclass(frozen=True)
class TransportCoefficients:
    """Coefficient signals a, b, f of the transport system.

    ``advection`` and ``zero_order`` are M x M matrix signals, either
    spatially constant (coefficient shape (M, M)) or per grid point (shape
    (N_x, M, M)); ``forcing`` is an M-vector signal, shape (M,) or (N_x, M).
    Every evaluated advection matrix must be symmetric.
    """

    advection: TrigPolynomial | None = None
    zero_order: TrigPolynomial | None = None
    forcing: TrigPolynomial | None = None

    def component_count(self) -> int:
        for signal in (self.advection, self.zero_order):
            if signal is not None:
                return signal.shape[-1]
        if self.forcing is not None:
            return self.forcing.shape[-1]
        return 1


def _check_symmetry(signal: TrigPolynomial) -> None:
    for coeffs in (signal.cos_coeffs, signal.sin_coeffs):
        if not np.allclose(coeffs, np.swapaxes(coeffs, -1, -2), atol=1e-12, rtol=0.0):
            raise HyperbolicityError(
                "hyperbolicity violated: advection coefficients must be symmetric"
            )


def _pointwise_blocks(coeff: Array, grid: TorusGrid) -> Array:
    """Block-diagonal (n, n) matrix of per-point M x M blocks."""
    n_x, m = grid.points, grid.components
    if coeff.shape == (m, m):
        coeff = np.broadcast_to(coeff, (n_x, m, m))
    if coeff.shape != (n_x, m, m):
        raise DimensionMismatchError(
            f"coefficient shape {coeff.shape} does not fit grid "
            f"({n_x} points, {m} components)"
        )
    out = np.zeros((grid.dim, grid.dim))
    for i in range(n_x):
        out[i * m : (i + 1) * m, i * m : (i + 1) * m] = coeff[i]
    return out


def discretize(coeffs: TransportCoefficients, grid: TorusGrid) -> OperatorFamily:
    """Assemble the operator family A(t) = S(a(., t)) + b(., t) on the grid.

    S(a) is the symmetrized central-difference advection (a D_c + D_c a)/2
    acting blockwise on the components, so for symmetric a it is exactly
    skew-symmetric and the advective flow preserves the E norm; b enters as
    pointwise block multiplication.  Discretization commutes with coefficient
    averaging because the assembly is linear in each trigonometric mode.
    """
    m = grid.components
    modes: dict = {}

    def add(freq: float, part: str, matrix: Array) -> None:
        entry = modes.setdefault(freq, {})
        entry[part] = entry.get(part, 0.0) + matrix

    if coeffs.advection is not None:
        signal = coeffs.advection
        if signal.shape[-1] != m or signal.shape[-2] != m:
            raise DimensionMismatchError("advection component count does not match grid")
        _check_symmetry(signal)
        central = _central_difference(grid)
        for freq, cos_c, sin_c in zip(signal.freqs, signal.cos_coeffs, signal.sin_coeffs):
            for part, coeff in (("cos", cos_c), ("sin", sin_c)):
                if np.any(coeff != 0.0):
                    blocks = _pointwise_blocks(coeff, grid)
                    add(float(freq), part, 0.5 * (blocks @ central + central @ blocks))
    if coeffs.zero_order is not None:
        signal = coeffs.zero_order
        if signal.shape[-1] != m or signal.shape[-2] != m:
            raise DimensionMismatchError("zero-order component count does not match grid")
        for freq, cos_c, sin_c in zip(signal.freqs, signal.cos_coeffs, signal.sin_coeffs):
            for part, coeff in (("cos", cos_c), ("sin", sin_c)):
                if np.any(coeff != 0.0):
                    add(float(freq), part, _pointwise_blocks(coeff, grid))
    dim = grid.dim
    if not modes:
        modes[0.0] = {"cos": np.zeros((dim, dim))}
    law = TrigPolynomial.from_modes(
        [
            (freq, parts.get("cos", np.zeros((dim, dim))), parts.get("sin", np.zeros((dim, dim))))
            for freq, parts in sorted(modes.items())
        ]
    )
    return OperatorFamily(law=law, norms=H1Weights(grid).weights())


def forcing_as_map(coeffs: TransportCoefficients, grid: TorusGrid) -> APMap:
    """Wrap grid samples of f(., t) as a pure-forcing almost-periodic map."""
    if coeffs.forcing is None:
        return APMap.zero()
    signal = coeffs.forcing
    n_x, m = grid.points, grid.components
    terms = []
    for freq, cos_c, sin_c in zip(signal.freqs, signal.cos_coeffs, signal.sin_coeffs):
        for part, coeff in (("cos", cos_c), ("sin", sin_c)):
            if coeff.shape == (m,):
                coeff = np.broadcast_to(coeff, (n_x, m))
            if coeff.shape != (n_x, m):
                raise DimensionMismatchError(
                    f"forcing shape {coeff.shape} does not fit grid "
                    f"({n_x} points, {m} components)"
                )
            if not np.any(coeff != 0.0):
                continue
            weight = TrigPolynomial(
                freqs=np.array([float(freq)]),
                cos_coeffs=np.array([1.0 if part == "cos" else 0.0]),
                sin_coeffs=np.array([0.0 if part == "cos" else 1.0]),
            )
            terms.append(
                APTerm(weight, DecayEnvelope.none(), ConstantMap(coeff.reshape(-1)))
            )
    return APMap(terms=tuple(terms))


def exact_transport(
    u0: Array,
    advection: TrigPolynomial,
    lam: float | None,
    t: float,
    grid: TorusGrid,
) -> Array:
    """Characteristic-flow solution of u_t = a(t/lam) u_x on the torus.

    Only the scalar (M = 1), spatially constant case is supported.  The data
    is transported to u0(x + Phi(t) mod 1) with Phi(t) = int_0^t a(s/lam) ds
    in closed form from the mode list; off-grid evaluation uses trigonometric
    interpolation of the periodic grid function, which is spectrally accurate.
    """
    if grid.components != 1:
        raise ValueError("the transport oracle supports a single component")
    if advection.shape not in ((), (1, 1)):
        raise ValueError("the transport oracle needs a spatially constant scalar advection")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape[0] != grid.points:
        raise DimensionMismatchError("initial data does not match the grid")
    scalar = advection if advection.shape == () else TrigPolynomial(
        advection.freqs, advection.cos_coeffs[:, 0, 0], advection.sin_coeffs[:, 0, 0]
    )
    if lam is None:
        shift = float(scalar.antiderivative(t))
    else:
        shift = float(lam) * float(scalar.antiderivative(t / lam))
    spectrum = np.fft.rfft(u0)
    wave_numbers = np.arange(spectrum.shape[0])
    shifted = spectrum * np.exp(2j * np.pi * wave_numbers * shift)
    return np.fft.irfft(shifted, grid.points)


def grid_function_csv(grid: TorusGrid, values: Array) -> str:
    """CSV payload of a grid function: rows x, u_1..u_M."""
    values = np.asarray(values, dtype=float).reshape(grid.points, grid.components)
    header = "x," + ",".join(f"u_{c + 1}" for c in range(grid.components))
    lines = [header]
    for x, row in zip(grid.nodes, values):
        lines.append(",".join(repr(float(val)) for val in [x, *row]))
    return "\n".join(lines) + "\n"
