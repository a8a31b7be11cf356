#__init__.py

from .config import RunConfig
from .errors import (
    PFMError, ParseError, ParameterError, ConfigError, UnknownCase, IrregularSingularityError,
    ExponentRecognitionError, RootFindingError, ObstructionError, EvaluationDomainError, NoRationalFound,
    SingularMatrixError, NoAdmissibleChain, ConvergenceError, NotRawForm, NonIntegerInvariant, NotInLevelFamily,
)
from .operator import (
    Operator, Point, SingularPoint, parse_operator, render_operator, from_hypergeometric4, from_hypergeometric5,
    singular_points, indicial_exponents, local_operator, to_monic_derivative_form,
)
from .frobenius import (
    FrobeniusBasis, frobenius_basis, evaluate_basis, local_monodromy, renormalize_basis, power_series_coefficients,
    dump_basis,
)
from .continuation import connect, plan_waypoints, transition_matrix
from .monodromy import (
    MonodromyMatrix, GeneratorSet, scaled_origin_basis, to_scaled, monodromy_about, monodromy_via_point,
    monodromy_at_infinity, monodromy_generators, product_consistent,
)
from .analysis import (
    Invariants, CongruenceLevel, extract_invariants, theorem1_matrix, cy_conjugate, dm_conjugate, nice_pair,
    dm_pair, symplectic_check, congruence_level, group_index, vanishing_cycle, theorem3_expected, theorem3_fit,
    exact_generators, match_printed,
)
from .cytype import CyTypeReport, cy_type_check
from .catalog import CaseRecord, VerificationReport, catalog_case, list_cases, verify_case, verify_many, export_catalog
