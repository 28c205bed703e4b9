"""Exact calculus of Totaro cycles in the higher Chow group CH^2(F, 3) of cyclotomic fields."""

from .cycles import FormalSum, boundary, canonical_form, parse_sum, totaro, z_term
from .errors import ChowError
from .numfield import field_create
from .regulator import aj_sum, li2, recognize_pi2
from .relations import VerifiedIdentity, verify

__all__ = [
    "ChowError",
    "FormalSum",
    "VerifiedIdentity",
    "aj_sum",
    "boundary",
    "canonical_form",
    "field_create",
    "li2",
    "parse_sum",
    "recognize_pi2",
    "totaro",
    "verify",
    "z_term",
]

__version__ = "0.1.0"
