from .diagnostics import Diagnostic, Severity, has_errors
from .parser import parse_properties, parse_property, parse_spec
from .printer import (format_ctx_expr, format_ecq, format_formula,
                      format_spec, format_ucq, pretty_print)
from .spec import CkabSpec

__all__ = [
    "CkabSpec", "Diagnostic", "Severity", "has_errors",
    "parse_properties", "parse_property", "parse_spec",
    "format_ctx_expr", "format_ecq", "format_formula", "format_spec",
    "format_ucq", "pretty_print",
]
