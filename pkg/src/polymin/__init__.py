"""Global minimisation of real polynomials through moment relaxations of the gradient ideal."""
from .poly import Monomial, MonomialBasis, Polynomial, b_index, evaluate, gradient, prolong
from .parser import ParseError, format_polynomial, parse_polynomial
from .border import (
    BorderBasisError,
    CompletenessError,
    RewriteRule,
    RewritingFamily,
    UnitIdealError,
    check_border_basis,
    complete_in_degree,
    cplus_polynomials,
    normal_form,
)
from .moment import (
    MomentVector,
    TruncatedHankel,
    build_hankel,
    check_positive,
    flat_extension_test,
    kernel,
)
from .sdp import MomentSDP, SDPSolution, SolverOptions, Status, assemble, solve
from .sdpa import SDPAFormatError, export_sdpa, import_sdpa
from .roots import (
    MultiplicationMatrices,
    RootExtractionError,
    build_multiplication_matrices,
    certify,
    extract_points,
)
from .minimizer import (
    MinimizerOptions,
    MinimizerResult,
    NumericalFailure,
    TMaxExceeded,
    lower_bound_at_degree,
    minimize,
)

__version__ = "0.1.0"
