"""Numerical toolkit for unimodular tuples and stable rank of matrix Hilbert
C*-modules over finite-dimensional C*-algebras.

Everything is double precision, seeded and reproducible; invertibility is
always relative to an explicit tolerance, echoed in every report.
"""

from ._version import __version__
from .algebra import DEFAULT_TOL, Algebra, AlgebraElement
from .errors import (
    CstarRankError,
    DegenerateModuleError,
    DomainError,
    InvertibilityError,
    ModuleNotFullError,
    ReductionFailedError,
    ShapeMismatchError,
)
from .hilbert_module import (
    CornerSpace,
    ModuleElement,
    ModuleSpace,
    ModuleTuple,
    corner_space,
    dual_witness,
    element_from_json_dict,
    gen_oracle,
    generation_margin,
    gram,
    inner_left,
    inner_right,
    is_full,
    is_unimodular,
    normalize_tuple,
    space_from_json_dict,
    stack,
    tuple_from_json_list,
    unimodularity_margin,
)
from .stable_rank import (
    DensityReport,
    PerturbationParams,
    ReductionCoefficients,
    adjointable_norm,
    bass_reduce,
    density_experiment,
    hv_pad,
    hv_perturb,
    sr_formula,
    warfield_b_to_a,
    warfield_forward,
)

__all__ = [
    "__version__",
    "DEFAULT_TOL",
    "Algebra",
    "AlgebraElement",
    "CstarRankError",
    "DegenerateModuleError",
    "DomainError",
    "InvertibilityError",
    "ModuleNotFullError",
    "ReductionFailedError",
    "ShapeMismatchError",
    "CornerSpace",
    "ModuleElement",
    "ModuleSpace",
    "ModuleTuple",
    "corner_space",
    "dual_witness",
    "element_from_json_dict",
    "gen_oracle",
    "generation_margin",
    "gram",
    "inner_left",
    "inner_right",
    "is_full",
    "is_unimodular",
    "normalize_tuple",
    "space_from_json_dict",
    "stack",
    "tuple_from_json_list",
    "unimodularity_margin",
    "DensityReport",
    "PerturbationParams",
    "ReductionCoefficients",
    "adjointable_norm",
    "bass_reduce",
    "density_experiment",
    "hv_pad",
    "hv_perturb",
    "sr_formula",
    "warfield_b_to_a",
    "warfield_forward",
]
