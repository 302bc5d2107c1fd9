"""The validated in-memory form of a full specification."""

from __future__ import annotations

from dataclasses import dataclass

from ..context import ContextState, ContextTheory, DimensionDomain, build_theory
from ..engine import ActionSpec, CondActionRule, ContextEvolutionRule
from ..kb import ABox, ContextualizedTBox


@dataclass(frozen=True)
class CkabSpec:
    """All six components of a specification plus the declared vocabulary.

    Instances produced by the parser are fully validated: every referenced
    name is declared, the initial context is total, and the initial data is
    consistent with the axioms active in the initial context.
    """

    dimensions: tuple[DimensionDomain, ...]
    concepts: frozenset[str]
    roles: frozenset[str]
    constants: frozenset[str]  # declared beyond the initial data
    services: frozenset[tuple[str, int]]
    ctbox: ContextualizedTBox
    initial_abox: ABox
    actions: tuple[ActionSpec, ...]
    process: tuple[CondActionRule, ...]
    initial_context: ContextState
    context_rules: tuple[ContextEvolutionRule, ...]

    def theory(self) -> ContextTheory:
        return build_theory(self.dimensions)

    def adom0(self) -> frozenset[str]:
        return self.initial_abox.adom()

    def service_arity(self, name: str) -> int | None:
        for fname, arity in self.services:
            if fname == name:
                return arity
        return None
