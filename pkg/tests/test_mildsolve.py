import math

import numpy as np
import pytest

from oscavg import (
    APMap,
    ConstantMap,
    DegeneratePartitionError,
    IdentityMap,
    NormWeights,
    OperatorFamily,
    QuadraticDiagonalMap,
    ResolutionError,
    SemilinearProblem,
    Trajectory,
    TrajectoryEscapeError,
    TrigPolynomial,
    certify_stability,
    estimate_growth,
    matrix_exponential,
    mild_defect,
    product_evolution,
    riemann_semigroup_sum,
    solve_mild,
)


def scalar_family(*modes):
    law = TrigPolynomial.from_modes([(f, [[c]]) for f, c in modes])
    return OperatorFamily(law=law, norms=NormWeights.euclidean(1))


MINUS_ONE = OperatorFamily.constant(np.array([[-1.0]]))
FORCING_ONE = APMap.single(1.0, ConstantMap(np.array([1.0])))


class TestSolveMild:
    def test_linear_autonomous_matches_exponential(self):
        a0 = np.array([[-0.4, 1.2], [-0.3, -0.9]])
        fam = OperatorFamily.constant(a0)
        u0 = np.array([1.0, -0.5])
        problem = SemilinearProblem(fam, APMap.zero(), u0, 2.0)
        traj = solve_mild(problem, 64)
        for k in (0, 13, 64):
            expected = matrix_exponential(a0, traj.times[k]) @ u0
            np.testing.assert_allclose(traj.states[k], expected, atol=1e-10)

    def test_linear_consistency_with_product_formula(self):
        fam = scalar_family((0.0, 0.5), (1.0, 1.0))
        problem = SemilinearProblem.from_base(fam, APMap.zero(), np.array([1.0]), 1.0, 0.125)
        steps = 256
        traj = solve_mild(problem, steps)
        rescaled = fam.rescaled(0.125)
        for k in (1, 50, 256):
            op = product_evolution(rescaled, 0.0, traj.times[k], k)
            np.testing.assert_allclose(
                traj.states[k], op.matrix @ problem.initial, rtol=1e-12
            )

    def test_oscillatory_scalar_closed_form(self):
        alpha, beta, lam = 0.3, 1.0, 0.05
        fam = scalar_family((0.0, alpha), (1.0, beta))
        problem = SemilinearProblem.from_base(fam, APMap.zero(), np.array([1.0]), 1.0, lam)
        steps = 4000
        traj = solve_mild(problem, steps)
        exact = np.exp(alpha * traj.times + lam * beta * np.sin(traj.times / lam))
        sup = np.abs(traj.states[:, 0] - exact).max()
        assert sup <= 3.0 * (1.0 / steps)

    def test_order_one_convergence(self):
        alpha, beta, lam = 0.3, 1.0, 0.05
        fam = scalar_family((0.0, alpha), (1.0, beta))
        problem = SemilinearProblem.from_base(fam, APMap.zero(), np.array([1.0]), 1.0, lam)
        errors = []
        for steps in (2000, 4000):
            traj = solve_mild(problem, steps)
            exact = np.exp(alpha * traj.times + lam * beta * np.sin(traj.times / lam))
            errors.append(np.abs(traj.states[:, 0] - exact).max())
        assert 0.35 <= errors[1] / errors[0] <= 0.65

    def test_relaxation_to_constant_forcing(self):
        problem = SemilinearProblem(MINUS_ONE, FORCING_ONE, np.array([0.0]), 1.0)
        steps = 1024
        traj = solve_mild(problem, steps)
        assert traj.states[-1, 0] == pytest.approx(1 - math.exp(-1), abs=1.0 / steps)

    def test_resolution_rule_enforced(self):
        fam = scalar_family((0.0, 1.0), (1.0, 1.0))
        problem = SemilinearProblem.from_base(fam, APMap.zero(), np.array([1.0]), 1.0, 0.01)
        with pytest.raises(ResolutionError) as err:
            solve_mild(problem, 100)
        assert err.value.min_steps == 1000
        solve_mild(problem, err.value.min_steps)  # minimal admissible count works

    def test_blowup_reports_escape_time(self):
        zero_fam = OperatorFamily.constant(np.array([[0.0]]))
        quadratic = APMap.single(1.0, QuadraticDiagonalMap())
        problem = SemilinearProblem(zero_fam, quadratic, np.array([2.0]), 1.0)
        with pytest.raises(TrajectoryEscapeError) as err:
            solve_mild(problem, 4096)
        assert 0.0 < err.value.escape_time < 1.0

    def test_determinism(self):
        fam = scalar_family((0.0, -1.0), (1.0, 0.5))
        problem = SemilinearProblem.from_base(fam, APMap.zero(), np.array([1.0]), 1.0, 0.125)
        first = solve_mild(problem, 128)
        second = solve_mild(problem, 128)
        assert np.array_equal(first.states, second.states)

    @pytest.mark.parametrize("a_value", [-1.0, 0.0, 0.3])
    def test_gronwall_bound_on_trajectory(self, a_value):
        # discrete boundedness from certified (M, omega, c); the crude
        # Gronwall exponent uses the positive part of omega
        from oscavg import BoundedSineMap

        fam = OperatorFamily.constant(np.array([[a_value]]))
        nonlinearity = APMap.single(1.0, BoundedSineMap())
        problem = SemilinearProblem(fam, nonlinearity, np.array([0.8]), 4.0)
        traj = solve_mild(problem, 2048)
        est_e, _ = certify_stability(fam, 4.0)
        growth = estimate_growth(nonlinearity, [1.0, 10.0], [0.0, 1.0])
        horizon = problem.horizon
        bound = (est_e.M * np.linalg.norm(problem.initial) + est_e.M * growth * horizon) * math.exp(
            (max(est_e.omega, 0.0) + est_e.M * growth) * horizon
        )
        assert np.all(np.linalg.norm(traj.states, axis=1) <= bound + 1e-9)

    def test_trajectory_grid_structure(self):
        problem = SemilinearProblem(MINUS_ONE, APMap.zero(), np.array([1.0]), 2.0)
        traj = solve_mild(problem, 10)
        assert traj.steps == 10
        np.testing.assert_allclose(np.diff(traj.times), 0.2)
        assert traj.problem_fingerprint == problem.fingerprint()


class TestMildDefect:
    def test_zero_solution(self):
        problem = SemilinearProblem(MINUS_ONE, APMap.zero(), np.array([0.0]), 1.0)
        traj = solve_mild(problem, 16)
        assert mild_defect(traj, problem, 64) == 0.0

    def test_exact_trajectory_small_defect(self):
        problem = SemilinearProblem(MINUS_ONE, FORCING_ONE, np.array([0.0]), 1.0)
        steps, n_ref = 16, 128
        times = np.arange(steps + 1) / steps
        states = (1 - np.exp(-times))[:, None]
        traj = Trajectory(times, states, problem.fingerprint(), 1.0 / steps)
        defect = mild_defect(traj, problem, n_ref)
        assert defect <= (1.0 / steps) ** 2 + 1.0 / n_ref

    def test_defect_halves_with_step(self):
        fam = scalar_family((0.0, 0.3), (1.0, 1.0))
        problem = SemilinearProblem.from_base(fam, APMap.zero(), np.array([1.0]), 1.0, 0.1)
        defects = []
        for steps in (200, 400):
            traj = solve_mild(problem, steps)
            defects.append(mild_defect(traj, problem, 4 * steps))
        assert 0.4 <= defects[1] / defects[0] <= 0.6

    def test_fingerprint_mismatch_rejected(self):
        problem = SemilinearProblem(MINUS_ONE, APMap.zero(), np.array([1.0]), 1.0)
        other = SemilinearProblem(MINUS_ONE, APMap.zero(), np.array([2.0]), 1.0)
        traj = solve_mild(problem, 8)
        with pytest.raises(ValueError):
            mild_defect(traj, other, 32)

    def test_reference_partition_must_refine(self):
        problem = SemilinearProblem(MINUS_ONE, APMap.zero(), np.array([1.0]), 1.0)
        traj = solve_mild(problem, 32)
        with pytest.raises(ValueError):
            mild_defect(traj, problem, 16)


class TestRiemannSemigroupSum:
    def test_zero_grid_function(self):
        records = riemann_semigroup_sum(
            MINUS_ONE, np.array([[-1.0]]), lambda s: np.zeros(1), 1.0, [2.0**-4]
        )
        assert records[0].discrepancy == 0.0
        np.testing.assert_allclose(records[0].sum_value, 0.0)
        np.testing.assert_allclose(records[0].integral_value, 0.0)

    def test_relaxation_kernel(self):
        lambdas = [2.0**-4, 2.0**-6, 2.0**-8, 2.0**-10]
        records = riemann_semigroup_sum(
            MINUS_ONE, np.array([[-1.0]]), lambda s: np.ones(1), 1.0, lambdas
        )
        target = 1 - math.exp(-1)
        np.testing.assert_allclose(records[0].integral_value, [target], atol=1e-8)
        discrepancies = [record.discrepancy for record in records]
        assert all(b < a for a, b in zip(discrepancies, discrepancies[1:]))
        assert discrepancies[-1] < 1e-2

    def test_linear_weight_integral(self):
        zero = OperatorFamily.constant(np.array([[0.0]]))
        lambdas = [2.0**-6, 2.0**-8, 2.0**-10]
        records = riemann_semigroup_sum(
            zero, np.array([[0.0]]), lambda s: np.array([s]), 1.0, lambdas
        )
        np.testing.assert_allclose(records[0].integral_value, [0.5], atol=1e-8)
        discrepancies = [record.discrepancy for record in records]
        assert all(b < a for a, b in zip(discrepancies, discrepancies[1:]))
        assert discrepancies[-1] < 0.02

    def test_block_partition_definition(self):
        records = riemann_semigroup_sum(
            MINUS_ONE, np.array([[-1.0]]), lambda s: np.ones(1), 1.0, [2.0**-4]
        )
        record = records[0]
        assert record.block_width == pytest.approx(2.0**-2)  # lambda * lambda^{-1/2}
        assert record.block_count == 4

    def test_degenerate_partition(self):
        with pytest.raises(DegeneratePartitionError):
            riemann_semigroup_sum(
                MINUS_ONE, np.array([[-1.0]]), lambda s: np.ones(1), 0.1, [2.0**-4]
            )


class TestProblemValidation:
    def test_dimension_mismatch(self):
        from oscavg import DimensionMismatchError

        with pytest.raises(DimensionMismatchError):
            SemilinearProblem(MINUS_ONE, APMap.zero(), np.array([1.0, 2.0]), 1.0)

    def test_rescale_consistency_required(self):
        fam = scalar_family((0.0, 1.0))
        with pytest.raises(ValueError):
            SemilinearProblem(fam, APMap.zero(), np.array([1.0]), 1.0, lam=0.5)

    def test_from_base_rescales_both_sides(self):
        fam = scalar_family((0.0, 1.0), (1.0, 1.0))
        nonlinearity = APMap.single(
            TrigPolynomial.from_modes([(1.0, 1.0)]), IdentityMap()
        )
        problem = SemilinearProblem.from_base(fam, nonlinearity, np.array([1.0]), 1.0, 0.25)
        assert problem.family.lam == 0.25
        assert problem.nonlinearity.lam == 0.25
        assert problem.min_steps() == 40  # ceil(1 / (0.25 / 10))
