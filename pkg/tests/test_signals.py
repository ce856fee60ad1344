import numpy as np
import pytest

from oscavg import (
    APMap,
    APTerm,
    BoundedSineMap,
    ConstantMap,
    DecayEnvelope,
    DimensionMismatchError,
    GrowthCertificationError,
    IdentityMap,
    LinearMap,
    QuadraticDiagonalMap,
    TrigPolynomial,
    estimate_growth,
    eval_map,
    eval_signal,
)


def scalar_poly(*modes):
    return TrigPolynomial.from_modes(list(modes))


class TestEvalSignal:
    def test_constant_mode(self):
        p = scalar_poly((0.0, 2.0))
        assert eval_signal(p, 13.7) == pytest.approx(2.0)

    def test_pure_cosine_at_zero(self):
        p = scalar_poly((1.0, 1.0))
        assert eval_signal(p, 0.0) == pytest.approx(1.0)

    def test_two_modes_analytic(self):
        p = scalar_poly((0.0, 1.0), (2.0, 0.5))
        # 1 + 0.5 cos(pi) = 0.5
        assert eval_signal(p, np.pi / 2) == pytest.approx(0.5, abs=1e-14)

    def test_matrix_valued(self):
        a0 = np.array([[1.0, 0.0], [0.0, 2.0]])
        b = np.array([[0.0, 1.0], [1.0, 0.0]])
        p = TrigPolynomial.from_modes([(0.0, a0), (3.0, b)])
        np.testing.assert_allclose(p.value(0.0), a0 + b)
        np.testing.assert_allclose(p.value_many([0.0, np.pi / 3])[1], a0 + b * np.cos(np.pi))


class TestInvariants:
    def test_distinct_frequencies_required(self):
        with pytest.raises(ValueError):
            scalar_poly((1.0, 1.0), (1.0, 2.0))

    def test_zero_mode_has_no_sine(self):
        with pytest.raises(ValueError):
            scalar_poly((0.0, 1.0, 0.5))

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValueError):
            scalar_poly((-1.0, 1.0))

    def test_bounded_evaluation(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            freqs = np.sort(rng.uniform(0.0, 9.0, size=4))
            coeffs = rng.standard_normal((4, 2, 2))
            sines = rng.standard_normal((4, 2, 2))
            sines[freqs == 0.0] = 0.0
            p = TrigPolynomial(freqs, coeffs, sines)
            ts = rng.uniform(0.0, 1e3, size=10_000)
            values = p.value_many(ts)
            bound = p.coefficient_bound()
            assert np.all(np.abs(values) <= bound[None] + 1e-12)

    def test_shift_periodicity(self):
        base = 2.0
        p = scalar_poly((base, 1.0, 0.3), (2 * base, -0.5, 0.2), (3 * base, 0.25))
        rng = np.random.default_rng(3)
        ts = rng.uniform(0.0, 50.0, size=200)
        np.testing.assert_allclose(
            p.value_many(ts + 2 * np.pi / base), p.value_many(ts), atol=1e-10
        )

    def test_rescale_divides_frequencies(self):
        p = scalar_poly((0.0, 1.0), (2.0, 0.5))
        q = p.rescaled(0.25)
        np.testing.assert_allclose(q.freqs, [0.0, 8.0])
        assert q.value(1.0) == pytest.approx(p.value(4.0))

    def test_antiderivative_matches_quadrature(self):
        p = scalar_poly((0.0, 0.4), (1.5, 1.0, -0.7))
        grid = np.linspace(0.0, 2.3, 200_001)
        reference = np.trapezoid(p.value_many(grid), grid)
        assert p.antiderivative(2.3) == pytest.approx(float(reference), abs=1e-8)


class TestDecayEnvelope:
    def test_values_in_unit_interval_and_monotone(self):
        ts = np.linspace(0.0, 50.0, 400)
        for env in (
            DecayEnvelope.none(),
            DecayEnvelope.exponential(0.7),
            DecayEnvelope.algebraic(1.3),
        ):
            vals = env.value_many(ts)
            assert np.all(vals > 0) and np.all(vals <= 1.0)
            assert np.all(np.diff(vals) <= 1e-15)

    def test_rescale_stretches_time(self):
        env = DecayEnvelope.exponential(2.0)
        assert env.rescaled(0.5).value(1.0) == pytest.approx(env.value(2.0))

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            DecayEnvelope.exponential(0.0)
        with pytest.raises(ValueError):
            DecayEnvelope("algebraic", exponent=-1.0)


class TestEvalMap:
    def test_sine_weight_vanishes_at_pi(self):
        f = APMap.single(scalar_poly((1.0, 0.0, 1.0)), IdentityMap())
        np.testing.assert_allclose(eval_map(f, np.pi, np.array([5.0])), [0.0], atol=1e-14)

    def test_affine_weight_identity(self):
        f = APMap.single(scalar_poly((0.0, 2.0), (1.0, 1.0)), IdentityMap())
        np.testing.assert_allclose(eval_map(f, 0.0, np.array([1.0, -1.0])), [3.0, -3.0])

    def test_quadratic_catalog(self):
        f = APMap.single(scalar_poly((1.0, 1.0)), QuadraticDiagonalMap())
        np.testing.assert_allclose(eval_map(f, 0.0, np.array([2.0])), [4.0])

    def test_linear_map_dimension_mismatch(self):
        f = APMap.single(1.0, LinearMap(np.eye(2)))
        with pytest.raises(DimensionMismatchError):
            eval_map(f, 0.0, np.array([1.0, 2.0, 3.0]))

    def test_rescaled_evaluates_base_time(self):
        f = APMap.single(scalar_poly((1.0, 1.0)), IdentityMap())
        g = f.rescaled(0.5)
        u = np.array([1.0])
        np.testing.assert_allclose(g.value(1.0, u), f.value(2.0, u))

    def test_time_slices_stay_bounded(self):
        # for fixed u the orbit {F(t, u)} lies in a bounded set
        f = APMap(
            terms=(
                APTerm(scalar_poly((0.0, 1.0), (2.0, 0.5)), DecayEnvelope.none(), IdentityMap()),
                APTerm(scalar_poly((1.3, 0.7)), DecayEnvelope.exponential(0.1), BoundedSineMap()),
            )
        )
        u = np.array([0.4, -2.0])
        values = np.array([f.value(t, u) for t in np.linspace(0.0, 200.0, 801)])
        cap = f.weight_bound() * max(1.0, float(np.linalg.norm(u)))
        assert np.all(np.linalg.norm(values, axis=1) <= cap + 1e-12)


class TestLipschitz:
    CASES = (
        (IdentityMap(), 1.0),
        (LinearMap(np.array([[1.0, 2.0], [0.0, -1.0]])), None),
        (QuadraticDiagonalMap(), None),
        (BoundedSineMap(), 1.0),
        (ConstantMap(np.array([0.5, 1.5])), 0.0),
    )

    @pytest.mark.parametrize("state_map,base_constant", CASES)
    def test_catalog_lipschitz_bounds(self, state_map, base_constant):
        radius = 3.0
        weight = scalar_poly((0.0, 0.8), (2.0, 0.6, 0.2))
        f = APMap.single(weight, state_map)
        lip = f.lipschitz_bound(radius)
        if base_constant is not None:
            assert lip == pytest.approx(float(weight.coefficient_bound()) * base_constant)
        rng = np.random.default_rng(11)
        for _ in range(200):
            u = rng.uniform(-1, 1, size=2)
            v = rng.uniform(-1, 1, size=2)
            u *= radius * rng.uniform(0, 1) / max(np.linalg.norm(u), 1e-12)
            v *= radius * rng.uniform(0, 1) / max(np.linalg.norm(v), 1e-12)
            t = rng.uniform(0.0, 20.0)
            gap = np.linalg.norm(f.value(t, u) - f.value(t, v))
            assert gap <= lip * np.linalg.norm(u - v) + 1e-12


class TestEstimateGrowth:
    def test_zero_map(self):
        assert estimate_growth(APMap.zero(), [1.0, 10.0], [0.0, 1.0]) == 0.0

    def test_affine_identity_weight(self):
        f = APMap.single(scalar_poly((0.0, 2.0), (1.0, 1.0)), IdentityMap())
        c = estimate_growth(f, [1.0, 10.0, 1e6], [0.0, 0.5, 1.0])
        # sup_t |2 + cos t| = 3 at t = 0; radius 1e6 pushes R/(1+R) -> 1
        assert c <= 3.0 + 1e-12
        assert c == pytest.approx(3.0, abs=1e-4)

    def test_bounded_sine_is_sublinear(self):
        f = APMap.single(1.0, BoundedSineMap())
        c = estimate_growth(f, [0.5, 2.0, 50.0], [0.0, 3.0])
        assert c <= 1.0 + 1e-12

    def test_quadratic_rejected(self):
        f = APMap.single(1.0, QuadraticDiagonalMap())
        with pytest.raises(GrowthCertificationError):
            estimate_growth(f, [1.0], [0.0])

    def test_empty_samples_rejected(self):
        with pytest.raises(ValueError):
            estimate_growth(APMap.zero(), [], [0.0])
