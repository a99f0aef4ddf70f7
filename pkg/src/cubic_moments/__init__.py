"""Nonnegative forms and truncated moment cones on smooth real plane cubics."""

from .curve import (
    CurvePoint,
    PlaneCubic,
    Topology,
    TorsionSet,
    WeierstrassData,
    add,
    divisor_sum,
    neg,
    new_weierstrass,
    point_at_infinity,
    point_from_affine,
    point_from_working,
    points_at_infinity,
    points_equal,
    sample_real_locus,
    topology,
    transform_line_to_infinity,
    two_torsion,
    with_infinity_line,
)
from .divisors import (
    Divisor,
    DivisorEntry,
    FaceReport,
    face_dimension,
    face_divisor_check,
    intersection_divisor,
    real_part,
)
from .forms import (
    Certificate,
    ExtremeQuadric,
    NonnegReport,
    QForm,
    artin_certificate,
    double_vanishing_system,
    extreme_quadric,
    interpolate_double_vanishing,
    local_series,
    nonnegativity_check,
    separating_quadric,
)
from .moments import (
    CounterexampleReport,
    Decomposition,
    DecomposeOptions,
    ExtensionReport,
    InfinityEscapeReport,
    MembershipReport,
    MomentFunctional,
    MomentMatrixReport,
    caratheodory_counterexample,
    check_almost_flat_extension,
    check_flat_extension,
    decompose,
    extract_atoms,
    from_atoms,
    functional_value,
    infinity_escape_example,
    membership,
    moment_matrix,
    quotient_basis,
    second_representation,
    truncate_functional,
)

__all__ = [
    "Certificate",
    "CounterexampleReport",
    "CurvePoint",
    "Decomposition",
    "DecomposeOptions",
    "Divisor",
    "DivisorEntry",
    "ExtensionReport",
    "ExtremeQuadric",
    "FaceReport",
    "InfinityEscapeReport",
    "MembershipReport",
    "MomentFunctional",
    "MomentMatrixReport",
    "NonnegReport",
    "PlaneCubic",
    "QForm",
    "Topology",
    "TorsionSet",
    "WeierstrassData",
    "add",
    "artin_certificate",
    "caratheodory_counterexample",
    "check_almost_flat_extension",
    "check_flat_extension",
    "decompose",
    "divisor_sum",
    "double_vanishing_system",
    "extract_atoms",
    "extreme_quadric",
    "face_dimension",
    "face_divisor_check",
    "from_atoms",
    "functional_value",
    "infinity_escape_example",
    "interpolate_double_vanishing",
    "intersection_divisor",
    "local_series",
    "membership",
    "moment_matrix",
    "neg",
    "new_weierstrass",
    "nonnegativity_check",
    "point_at_infinity",
    "point_from_affine",
    "point_from_working",
    "points_at_infinity",
    "points_equal",
    "quotient_basis",
    "real_part",
    "sample_real_locus",
    "second_representation",
    "separating_quadric",
    "topology",
    "transform_line_to_infinity",
    "truncate_functional",
    "two_torsion",
    "with_infinity_line",
]

__version__ = "0.1.0"
