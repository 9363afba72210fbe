"""Solution curves of semilinear Dirichlet problems ``Δu + g(u) = μ f``
parametrized by the generalized first harmonic ``ξ = <u, f>/<f, f>``."""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    Grid,
    GridError,
    GridSpec,
    LaplacianOp,
    build_grid,
    build_laplacian,
    inner_product,
    laplacian_1d_eigenvalues,
    norm,
    project_harmonic,
)
from .spectral import (  # noqa: E402
    EigensolverError,
    PoincareConstraintError,
    SpectralData,
    WeightData,
    compute_eigenpairs,
    compute_nu,
    verify_poincare,
)
from .nonlinearity import (  # noqa: E402
    NonlinearityError,
    NonlinearitySpec,
    ValidationReport,
    make_fishing_family,
    make_linear,
    make_softplus_family,
    validate,
)
from .continuation import (  # noqa: E402
    BorderedFactor,
    BorderedSolveError,
    CurvePoint,
    HomotopyError,
    HypothesisViolation,
    Problem,
    SolutionCurve,
    StepControl,
    bootstrap_homotopy,
    bordered_solve,
    make_problem,
    newton_correct,
    tangent,
    trace_curve,
)
from .analysis import (  # noqa: E402
    AnalysisError,
    asymptotic_slopes,
    classify,
    find_solutions,
    find_turning_point,
    harmonic_bridge,
    second_derivative_identity,
)
from .antimax import estimate_delta, sign_portrait, solve_linear_at  # noqa: E402
from .fishing import default_scenario, trace_fishing_curve  # noqa: E402
