"""Numerical laboratory for ternary rings of operators and orthogonality
preserving maps between finite-dimensional C*-algebras."""

__version__ = "0.1.0"

from .matrix_core import Algebra, Element, Tolerances, get_tolerances, set_tolerances, tolerances
from .maps import LinearMap, estimate_amplified_norm, make_transpose
from .preservers import classify_cop, classify_order_zero, decompose_triple_hom, factorize
from .triple_ops import ScalarFunction, tro_product

__all__ = [
    "Algebra", "Element", "Tolerances", "get_tolerances", "set_tolerances", "tolerances",
    "LinearMap", "estimate_amplified_norm", "make_transpose",
    "classify_cop", "classify_order_zero", "decompose_triple_hom", "factorize",
    "ScalarFunction", "tro_product",
]
