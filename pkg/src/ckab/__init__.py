"""Verifier for knowledge-and-action systems with context-dependent axioms.

The package parses a sectioned specification format, constructs the
alternating action/context transition system under a finite abstraction of
service-call results, and model-checks fixpoint temporal properties with
embedded data queries and context expressions over it.
"""

from .checker import brute_force_extension, extension, model_check
from .context import (ContextState, ContextTheory, DimensionDomain,
                      PartialAssignment, apply_evolution, build_theory,
                      entails, models_of)
from .dsl import (CkabSpec, Diagnostic, Severity, parse_properties,
                  parse_property, parse_spec, pretty_print)
from .errors import BuildError, CkabError, SpecificationError
from .kb import (ABox, ContextualizedTBox, Fact, UCQ, answer_ecq,
                 certain_answers_ucq, is_consistent, rewrite_ucq,
                 tbox_in_context)
from .statespace import (BuildConfig, TransitionSystem, build,
                         check_weak_acyclicity, export)

__version__ = "0.1.0"

__all__ = [
    "ABox", "BuildConfig", "BuildError", "CkabError", "CkabSpec",
    "ContextState", "ContextTheory", "ContextualizedTBox", "Diagnostic",
    "DimensionDomain", "Fact", "PartialAssignment", "Severity",
    "SpecificationError", "TransitionSystem", "UCQ", "answer_ecq",
    "apply_evolution", "build", "build_theory", "brute_force_extension",
    "certain_answers_ucq", "check_weak_acyclicity", "entails", "export",
    "extension", "is_consistent", "model_check", "models_of",
    "parse_properties", "parse_property", "parse_spec", "pretty_print",
    "rewrite_ucq", "tbox_in_context", "__version__",
]
