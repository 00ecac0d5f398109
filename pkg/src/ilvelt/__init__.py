"""Finite model checking for interpretability logics over Veltman structures."""

from .formula import (
    Atom,
    BOTTOM,
    Bottom,
    Box,
    Formula,
    Implies,
    ParseError,
    Rhd,
    SCHEMAS,
    Schema,
    instantiate,
    parse,
    print_formula,
    subformulas,
)

__all__ = [
    "Atom",
    "BOTTOM",
    "Bottom",
    "Box",
    "Formula",
    "Implies",
    "ParseError",
    "Rhd",
    "SCHEMAS",
    "Schema",
    "instantiate",
    "parse",
    "print_formula",
    "subformulas",
]
