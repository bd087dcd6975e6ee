"""anchorquad: randomized quadrature for functions of infinitely many
variables on weighted anchored reproducing-kernel Hilbert spaces.

The library has six parts: anchored kernels and explicit integrands
(`rkhs`), weight families and their calculus (`weights`), sampling-cost
models (`costs`), projection-error and exponent bounds (`bounds`),
instrumented quadrature engines (`quadrature`), and the experiment
harness (`harness`).  See README.md and the demos/ scripts.
"""

from .errors import (
    AlgorithmClassError,
    AnchorQuadError,
    BudgetError,
    ConfigError,
    DegenerateInputError,
    DomainError,
    EnumerationError,
    IntegrationFailureError,
    NotInSpaceError,
    ParameterError,
    ShapeError,
    UnsupportedFamilyError,
)
from .sets import EMPTY_SET, SparseBatch, VariableSet, parse_variable_set, point
from .rkhs import (
    AnchoredFunction,
    Integrand,
    Kernel1D,
    KernelTranslate,
    KgammaValue,
    Kgamma_eval,
    MeanEmbedding,
    ProductMeasureSampler,
    Term,
    anchor_restrict,
    anchored_component_eval,
    atom_inner,
    atom_integral,
    component_sq_norms,
    func_eval,
    func_eval_point,
    func_integral_exact,
    func_norm,
    function_from_json,
    function_to_json,
    inner_product,
    kernel_constants,
    kernel_eval,
    ku_eval,
    tabulated_kernel,
    wiener_kernel,
)
from .weights import (
    CutoffWeights,
    DecayReport,
    ExplicitWeights,
    FiniteIntersectionWeights,
    LexOrderedWeights,
    MassReport,
    OrderedSupport,
    PODWeights,
    PowerGenerator,
    ProductWeights,
    SequenceGenerator,
    SupportEntry,
    TstarReport,
    WeightFamily,
    bind,
    cutoff,
    decay,
    enumerate_ordered,
    hatweight_of,
    iter_ordered,
    operator_norm_sq,
    parse_weight_spec,
    tstar,
    weight_family_from_dict,
    weight_family_to_dict,
    weight_of,
)
from .costs import (
    ClassCertificate,
    CostLedger,
    DollarFunction,
    NestedChain,
    NestedModel,
    UnrestrictedModel,
    certify_class,
    charge,
    dollar,
    doubling_chain,
    exp_dollar,
    explicit_chain,
    nested_cost,
    poly_dollar,
    table_dollar,
    unrestricted_cost,
)
from .bounds import (
    BsqReport,
    CoverFamily,
    ExponentBound,
    FoolingReport,
    b_squared,
    covered_mass_closed,
    exponent_lower_bound,
    fooling_error_bound,
    fooling_experiment,
    project,
    pw11_upper_bound,
    worst_case_residual,
)
from .quadrature import (
    CDPlan,
    LevelPlan,
    QuadratureResult,
    build_cd_plan,
    cd_quad,
    mc_quad,
    multilevel_quad,
    tensor_mc,
    uni_quad_rate3,
)
from .harness import (
    BoundVerdict,
    BudgetRow,
    ExperimentConfig,
    ExperimentRun,
    RateFit,
    compare_with_bounds,
    config_from_dict,
    fit_rate,
    load_config,
    make_default_test_family,
    run_experiment,
    write_outputs,
)

__version__ = "0.1.0"
