"""Singular moduli and Hilbert class polynomials at certified precision."""

from .classpoly import ClassPolynomial, hilbert_class_poly, is_shifted_unit, is_squarefree, is_unit
from .discriminants import Discriminant, nt_correction, validate_discriminant
from .errors import (
    EtaCollision,
    NotADiscriminant,
    PreconditionError,
    PreconditionNotUnit,
    PrecisionExhausted,
    ToleranceNotMet,
    Undecidable,
)
from .forms import CMPoint, ReducedForm, class_number, cm_point, cm_points, reduced_forms, tau_height
from .jeval import CertifiedComplex, PrecisionContext, certified_abs_less, eval_j

__version__ = "0.1.0"

__all__ = [
    "CMPoint",
    "CertifiedComplex",
    "ClassPolynomial",
    "Discriminant",
    "EtaCollision",
    "NotADiscriminant",
    "PrecisionContext",
    "PrecisionExhausted",
    "PreconditionError",
    "PreconditionNotUnit",
    "ReducedForm",
    "ToleranceNotMet",
    "Undecidable",
    "certified_abs_less",
    "class_number",
    "cm_point",
    "cm_points",
    "eval_j",
    "hilbert_class_poly",
    "is_shifted_unit",
    "is_squarefree",
    "is_unit",
    "nt_correction",
    "reduced_forms",
    "tau_height",
    "validate_discriminant",
]
