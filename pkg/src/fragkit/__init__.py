"""fragkit: self-similar fragmentation with general reproduction laws.

A particle of size x splits at rate x^alpha into children x*xi_j; the total
child size may exceed the parent's (size creation is allowed).  The package
couples an exact event-driven simulator with the closed-form analytics of
mean power sums, asymptotic coefficients, and the random limit of the
weighted scaled empirical measure, and cross-validates the two statistically.
"""

__version__ = "0.1.0"

from .errors import (
    ArithmeticLaw,
    DomainError,
    EmptySnapshot,
    FragkitError,
    InvalidIntensity,
    LawSpecError,
    NoClosedForm,
    NoMalthusianExponent,
    NoQuadrature,
    PoleError,
    PrecisionExhausted,
    RootFindingFailure,
    SecondMomentInfinite,
    SingularBeta,
    TreeSizeExceeded,
    UnsupportedRepresentation,
    UnsupportedSampler,
    UnsupportedTilt,
)
from .laws import (
    AtomComponent,
    BinaryUniformConservative,
    DensityLaw,
    DirichletPolynomial,
    FilippovPower,
    OffspringSample,
    PowerComponent,
    ReproductionLaw,
    StickBreakingConservative,
    StickBreakingLossy,
    TaggedLaw,
    UserAtomic,
    UserPoisson,
    arithmetic_check,
    from_spec,
    load_spec,
    malthusian_exponent,
    no_malthusian_example,
    phi,
    poisson_reproduction,
    psi,
    psi_derivative,
    sample_offspring,
    tilted_tag_law,
)
from .analytics import (
    GammaExtrapolation,
    IntegroSolution,
    RhoMoments,
    SeriesEvaluation,
    asymptotic_coefficient,
    beta_star_of,
    derivative_identity_check,
    dirichlet_integer_moment,
    dirichlet_roots,
    filippov_asymptotic_coefficient,
    filippov_gamma_closed_form,
    filippov_rho_cdf,
    filippov_rho_density,
    gamma_n,
    gamma_z,
    homogeneous_m,
    hypergeometric_coefficient,
    m_integro,
    m_series,
    rho_moment,
    rho_moments,
    y_moments_consistency,
)
from .simulate import (
    GenerationMartingaleResult,
    MInftyEstimate,
    Particle,
    PopulationSnapshot,
    SimulationConfig,
    YSampleResult,
    estimate_m_infinity_moments,
    generation_martingale,
    power_sum_truncation_bound,
    run,
    run_replicates,
    sample_Y,
    snapshot_power_sum,
    tagged_final_sizes,
    tagged_fragment_path,
)
from .estimators import (
    CheckResult,
    OracleValue,
    ValidationReport,
    WeightedEmpiricalMeasure,
    cdf_distance,
    empirical_weighted_measure,
    exp_decay,
    indicator_window,
    integral_f_rho,
    l2_functional_test,
    m_infinity_second_moment_oracle,
    mean_power_sum_test,
    power_capped,
    z_check,
)
