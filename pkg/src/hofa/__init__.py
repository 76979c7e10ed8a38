"""Higher-order Fourier analysis at desk scale: Gowers norms, linear forms,
nilsequences, Leibman groups, regularity decompositions and pattern counts."""

__version__ = "0.1.0"

from .funcspace import DomainSpec, SampledFunction, load_function, save_function
from .exprlang import eval_expr, parse_expr
from .gowers import gowers_norm
from .forms import ap_system, cs_complexity, parse_forms, power_flag
from .nilgroup import FilteredGroup, PolySequence, builtin_group, heisenberg
from .orbits import counting_report, equidist_witness, leibman_group
from .decompose import regularize
from .patterns import ap_profile, bhk_verify_synthetic, gvn_check, lambda_k

__all__ = [
    "DomainSpec", "SampledFunction", "load_function", "save_function",
    "eval_expr", "parse_expr", "gowers_norm",
    "ap_system", "cs_complexity", "parse_forms", "power_flag",
    "FilteredGroup", "PolySequence", "builtin_group", "heisenberg",
    "counting_report", "equidist_witness", "leibman_group",
    "regularize", "ap_profile", "bhk_verify_synthetic", "gvn_check", "lambda_k",
]
