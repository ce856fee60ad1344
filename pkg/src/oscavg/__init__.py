"""oscavg: averaging of oscillatory semilinear evolution equations.

Builds linear evolution systems by the frozen-coefficient product formula,
solves mild-solution problems u' = A(t/lam) u + F(t/lam, u) with an
exponential Euler scheme, computes averaged generators and nonlinearities in
closed form, and measures sup-norm convergence of oscillatory solutions to
the averaged solution as lam -> 0.
"""

from .averaging import (
    AveragedProblem,
    CesaroReport,
    average_map,
    average_operator_family,
    build_averaged_problem,
    cesaro_check,
    numerical_average,
)
from .config import RunConfig, load_config, parse_config
from .errors import (
    ConfigError,
    DegeneratePartitionError,
    DimensionMismatchError,
    ExponentialRangeError,
    GrowthCertificationError,
    HyperbolicityError,
    OscavgError,
    RateUnresolvableError,
    ResolutionError,
    TrajectoryEscapeError,
)
from .evolution import (
    EvolutionOperatorApprox,
    NormWeights,
    OperatorFamily,
    StabilityEstimate,
    apply_evolution,
    certify_stability,
    check_linear_averaging,
    matrix_exponential,
    merge_estimates,
    perturbation_gap,
    product_evolution,
)
from .harness import (
    ConvergenceReport,
    LambdaRecord,
    RateFit,
    emit_report,
    fit_rate,
    run_checks,
    run_sweep,
    trajectory_csv,
)
from .hyperbolic import (
    H1Weights,
    TorusGrid,
    TransportCoefficients,
    discretize,
    exact_transport,
    forcing_as_map,
    h1_norm,
)
from .mildsolve import (
    RiemannSumRecord,
    SemilinearProblem,
    Trajectory,
    mild_defect,
    riemann_semigroup_sum,
    solve_mild,
)
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
    estimate_growth,
    eval_map,
    eval_signal,
)

__version__ = "0.1.0"
