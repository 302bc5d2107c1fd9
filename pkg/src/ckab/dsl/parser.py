"""Recursive-descent parsers for specification and property files.

Both parsers report every problem as a positioned diagnostic and never
raise on malformed input; error recovery skips to the next item boundary
(';', '}' or a section keyword).  Name resolution is single-pass: sections
appear in a fixed order, so each construct only refers backwards.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..formula import (MU_FALSE, MU_TRUE, MuAnd, MuContext, MuExists,
                       MuForall, MuFormula, MuGreatest, MuImplies, MuLeast,
                       MuModality, MuNot, MuOr, MuQuery, MuVar, Step,
                       check_monotone, free_individual_vars)
from ..context import (CTX_FALSE, CTX_TRUE, ContextExpr, ContextState,
                       CtxAnd, CtxAtom, CtxImplies, CtxNot, CtxOr,
                       DimensionDomain, PartialAssignment, build_theory)
from ..engine import (ActionSpec, CallTerm, CondActionRule,
                      ContextEvolutionRule, EffectSpec, FactTemplate,
                      HeadConst, HeadTerm, HeadVar)
from ..errors import SpecificationError
from ..kb import (ABox, Const, ConjunctiveQuery, ConceptInclusion,
                  ConceptName, ContextualizedTBox, ECQ, ECQ_FALSE, ECQ_TRUE,
                  EcqAnd, EcqExists, EcqNot, EcqOr, ExistsRole, Fact,
                  Functionality, QueryAtom, Role, RoleInclusion, UCQ,
                  UcqAtom, Var, ecq_free_vars, is_consistent,
                  tbox_in_context)
from .diagnostics import Diagnostic, Severity, has_errors
from .lexer import Token, tokenize
from .spec import CkabSpec

RESERVED_NAMES = frozenset({"State", "inter"})
KEYWORDS = frozenset({
    "dimensions", "concepts", "roles", "constants", "services",
    "init-context", "tbox", "abox", "actions", "process", "context-rules",
    "funct", "exists", "ex", "not", "true", "false", "mu", "nu", "forall",
})
SECTION_ORDER = ("dimensions", "concepts", "roles", "constants", "services",
                 "init-context", "tbox", "abox", "actions", "process",
                 "context-rules")
REQUIRED_SECTIONS = ("dimensions", "init-context", "abox")
MAX_DIAGNOSTICS = 200


class _Cursor:
    def __init__(self, tokens: list[Token], filename: str,
                 diagnostics: list[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename
        self.diagnostics = diagnostics

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text in words

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if self.pos < len(self.tokens) - 1:
            self.pos += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.advance()
        return None

    def error(self, message: str, token: Token | None = None) -> None:
        tok = token or self.peek()
        if len(self.diagnostics) < MAX_DIAGNOSTICS:
            self.diagnostics.append(Diagnostic(
                Severity.ERROR, message, self.filename, tok.line, tok.column))

    def warn(self, message: str, token: Token | None = None) -> None:
        tok = token or self.peek()
        if len(self.diagnostics) < MAX_DIAGNOSTICS:
            self.diagnostics.append(Diagnostic(
                Severity.WARNING, message, self.filename, tok.line, tok.column))

    def expect(self, kind: str, what: str, text: str | None = None) -> Token | None:
        tok = self.accept(kind, text)
        if tok is None:
            got = self.peek()
            shown = got.text if got.kind != "eof" else "end of input"
            self.error(f"expected {what}, found {shown!r}")
        return tok

    def sync_to(self, kinds: set[str], words: set[str] = frozenset()) -> None:
        """Skip tokens until one of the given kinds/keywords or EOF."""
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind in kinds or (tok.kind == "ident" and tok.text in words):
                return
            self.advance()


# ---------------------------------------------------------------------------
# Shared sub-grammars.

def _parse_ctx_expr(c: _Cursor, check_atom) -> ContextExpr:
    """implication < disjunction < conjunction < negation/atom"""

    def implies() -> ContextExpr:
        left = disj()
        if c.accept("arrow"):
            return CtxImplies(left, implies())
        return left

    def disj() -> ContextExpr:
        expr = conj()
        while c.accept("pipe"):
            expr = CtxOr(expr, conj())
        return expr

    def conj() -> ContextExpr:
        expr = unary()
        while c.accept("amp"):
            expr = CtxAnd(expr, unary())
        return expr

    def unary() -> ContextExpr:
        if c.accept("bang"):
            return CtxNot(unary())
        if c.accept("lparen"):
            expr = implies()
            c.expect("rparen", "')'")
            return expr
        if c.at_word("true"):
            c.advance()
            return CTX_TRUE
        if c.at_word("false"):
            c.advance()
            return CTX_FALSE
        if c.at("ident"):
            dim_tok = c.advance()
            if c.expect("colon", "':' in context atom") is None:
                return CTX_FALSE
            val_tok = c.expect("ident", "a dimension value")
            if val_tok is None:
                return CTX_FALSE
            check_atom(dim_tok, val_tok)
            return CtxAtom(dim_tok.text, val_tok.text)
        c.error("expected a context expression")
        c.advance()
        return CTX_FALSE

    return implies()


@dataclass
class _QueryEnv:
    """Name resolution environment for query terms."""

    constants: frozenset[str]
    params: frozenset[str] = frozenset()
    bound: tuple[str, ...] = ()
    collect_free: bool = False  # effect bodies: unresolved names become free vars
    adom0: frozenset[str] = frozenset()
    warn_outside_adom0: bool = False


class _QueryParser:
    """UCQ/ECQ parsing against a vocabulary (concept/role kinds)."""

    def __init__(self, c: _Cursor, kinds: dict[str, str] | None):
        self.c = c
        self.kinds = kinds  # None: skip predicate checks (standalone properties)

    def check_predicate(self, tok: Token, arity: int) -> None:
        if self.kinds is None:
            return
        kind = self.kinds.get(tok.text)
        if kind is None:
            self.c.error(f"undeclared concept or role {tok.text!r}", tok)
        elif kind == "concept" and arity != 1:
            self.c.error(f"{tok.text!r} is a concept and takes one argument", tok)
        elif kind == "role" and arity != 2:
            self.c.error(f"{tok.text!r} is a role and takes two arguments", tok)

    def parse_term(self, env: _QueryEnv, free: list[str]):
        tok = self.c.expect("ident", "a variable or constant")
        if tok is None:
            return Var("_err")
        name = tok.text
        if name in RESERVED_NAMES:
            self.c.error(f"{name!r} is reserved", tok)
            return Var("_err")
        if name in env.bound or name in env.params or name in free:
            return Var(name)
        if name in env.constants:
            if env.warn_outside_adom0 and name not in env.adom0:
                self.c.warn(f"constant {name!r} does not appear in the "
                            "initial data", tok)
            return Const(name)
        if env.collect_free:
            free.append(name)
            return Var(name)
        self.c.error(
            f"unknown name {name!r}: bind it with a quantifier or declare "
            "it as a constant", tok)
        return Var(name)

    def parse_atom(self, env: _QueryEnv, free: list[str]) -> QueryAtom | None:
        pred = self.c.expect("ident", "a concept or role name")
        if pred is None:
            return None
        if pred.text in RESERVED_NAMES:
            self.c.error(f"{pred.text!r} is reserved", pred)
        if self.c.expect("lparen", "'('") is None:
            return None
        args = [self.parse_term(env, free)]
        if self.c.accept("comma"):
            args.append(self.parse_term(env, free))
            if self.c.at("comma"):
                self.c.error("concept and role atoms take at most two arguments")
                while self.c.accept("comma"):
                    self.parse_term(env, free)
        if self.c.peek().kind == "lparen":
            self.c.error("service calls are not allowed in queries")
        self.c.expect("rparen", "')'")
        self.check_predicate(pred, len(args))
        return QueryAtom(pred.text, tuple(args))

    def _continues_cq(self) -> bool:
        # After '&', an identifier other than a connective keyword starts
        # another atom or 'ex' group; anything else belongs to the caller
        # (an effect filter, for instance).
        nxt = self.c.peek(1)
        return nxt.kind == "ident" and nxt.text not in ("not", "true", "false")

    def parse_cq(self, env: _QueryEnv) -> tuple[tuple[QueryAtom, ...], tuple[str, ...]]:
        """One disjunct: atoms and its free variables in first-use order."""
        atoms: list[QueryAtom] = []
        free: list[str] = []

        def conjunct(local_env: _QueryEnv) -> None:
            if self.c.at_word("true"):
                self.c.advance()
                return
            if self.c.at_word("ex"):
                self.c.advance()
                exvars = [t.text for t in self._varlist("existential variable")]
                self.c.expect("dot", "'.'")
                self.c.expect("lparen", "'(' after the quantifier")
                inner = _QueryEnv(local_env.constants, local_env.params,
                                  local_env.bound + tuple(exvars),
                                  local_env.collect_free, local_env.adom0,
                                  local_env.warn_outside_adom0)
                conjunct(inner)
                while self.c.accept("amp"):
                    conjunct(inner)
                self.c.expect("rparen", "')'")
                return
            atom = self.parse_atom(local_env, free)
            if atom is not None:
                atoms.append(atom)

        conjunct(env)
        while self.c.at("amp") and self._continues_cq():
            self.c.advance()
            conjunct(env)
        return tuple(atoms), tuple(free)

    def _varlist(self, what: str) -> list[Token]:
        out = []
        tok = self.c.expect("ident", what)
        if tok is not None:
            out.append(tok)
        while self.c.accept("comma"):
            tok = self.c.expect("ident", what)
            if tok is not None:
                out.append(tok)
        return out

    def parse_ucq(self, env: _QueryEnv) -> UCQ:
        """Disjuncts separated by '|'; every disjunct must use the same
        free variables."""
        start = self.c.peek()
        disjuncts: list[tuple[tuple[QueryAtom, ...], tuple[str, ...]]] = []
        disjuncts.append(self.parse_cq(env))
        while self.c.accept("pipe"):
            disjuncts.append(self.parse_cq(env))
        env_names = set(env.params) | set(env.bound)
        # free positions: names bound outside the query plus (for effect
        # bodies) the collected answer variables, in first-use order
        all_free: dict[str, None] = {}
        for atoms, dfree in disjuncts:
            for atom in atoms:
                for term in atom.args:
                    if isinstance(term, Var) and term.name in env_names:
                        all_free.setdefault(term.name, None)
            for name in dfree:
                all_free.setdefault(name, None)
        free = tuple(all_free)
        cqs = []
        for atoms, _ in disjuncts:
            seen = {t.name for a in atoms for t in a.args if isinstance(t, Var)}
            missing = [x for x in free if x not in seen]
            if missing:
                self.c.error(
                    "all disjuncts of a query must use the same free "
                    f"variables; one lacks {', '.join(missing)}", start)
            cqs.append(ConjunctiveQuery(tuple(Var(x) for x in free), atoms))
        return UCQ(free, tuple(cqs))

    def parse_ecq(self, env: _QueryEnv) -> ECQ:
        c = self.c

        def quantified(env: _QueryEnv) -> ECQ:
            if c.at_word("ex"):
                c.advance()
                tok = c.expect("ident", "a variable to quantify")
                name = tok.text if tok is not None else "_err"
                if tok is not None and name in env.constants:
                    c.error(f"{name!r} is a declared constant and cannot be "
                            "quantified", tok)
                c.expect("dot", "'.'")
                inner = _QueryEnv(env.constants, env.params,
                                  env.bound + (name,), env.collect_free,
                                  env.adom0, env.warn_outside_adom0)
                return EcqExists(name, quantified(inner))
            return disj(env)

        def disj(env: _QueryEnv) -> ECQ:
            expr = conj(env)
            while c.accept("pipe"):
                expr = EcqOr(expr, conj(env))
            return expr

        def conj(env: _QueryEnv) -> ECQ:
            expr = unary(env)
            while c.accept("amp"):
                expr = EcqAnd(expr, unary(env))
            return expr

        def unary(env: _QueryEnv) -> ECQ:
            if c.at_word("not"):
                c.advance()
                return EcqNot(unary(env))
            if c.at_word("true"):
                c.advance()
                return ECQ_TRUE
            if c.at_word("false"):
                c.advance()
                return ECQ_FALSE
            if c.accept("lbrack"):
                ucq = self.parse_ucq(env)
                c.expect("rbrack", "']'")
                return UcqAtom(ucq)
            if c.accept("lparen"):
                expr = quantified(env)
                c.expect("rparen", "')'")
                return expr
            c.error("expected a query (embedded queries are written in "
                    "[brackets])")
            c.advance()
            return ECQ_FALSE

        return quantified(env)


# ---------------------------------------------------------------------------
# Specification parser.

class _SpecParser:
    def __init__(self, tokens: list[Token], filename: str,
                 diagnostics: list[Diagnostic]):
        self.c = _Cursor(tokens, filename, diagnostics)
        self.dimensions: dict[str, DimensionDomain] = {}
        self.kinds: dict[str, str] = {}  # name -> concept | role
        self.constants: list[str] = []
        self.services: dict[str, int] = {}
        self.initial_context: ContextState | None = None
        self.ctbox_entries: list[tuple] = []
        self.abox_facts: list[Fact] = []
        self.adom0: frozenset[str] = frozenset()
        self.actions: dict[str, ActionSpec] = {}
        self.action_order: list[str] = []
        self.process: list[CondActionRule] = []
        self.context_rules: list[ContextEvolutionRule] = []
        self.qp = _QueryParser(self.c, self.kinds)

    # -- helpers ----------------------------------------------------------

    def declare_name(self, tok: Token, what: str) -> bool:
        if tok.text in RESERVED_NAMES:
            self.c.error(f"{tok.text!r} is reserved and cannot name a {what}", tok)
            return False
        if tok.text in KEYWORDS:
            self.c.error(f"{tok.text!r} is a keyword and cannot name a {what}", tok)
            return False
        return True

    def establish_kind(self, tok: Token, kind: str) -> None:
        prior = self.kinds.get(tok.text)
        if prior is None:
            self.kinds[tok.text] = kind
        elif prior != kind:
            self.c.error(
                f"{tok.text!r} is used both as a {prior} and as a {kind}", tok)

    def check_ctx_atom(self, dim_tok: Token, val_tok: Token) -> None:
        dom = self.dimensions.get(dim_tok.text)
        if dom is None:
            self.c.error(f"undeclared dimension {dim_tok.text!r}", dim_tok)
        elif val_tok.text not in dom:
            self.c.error(
                f"value {val_tok.text!r} is not in dimension {dim_tok.text!r}",
                val_tok)

    def constant_env(self, **kw) -> _QueryEnv:
        return _QueryEnv(frozenset(self.constants) | self.adom0,
                         adom0=self.adom0, **kw)

    # -- top level ---------------------------------------------------------

    def parse(self) -> CkabSpec | None:
        seen: dict[str, Token] = {}
        last_index = -1
        while not self.c.at("eof"):
            tok = self.c.peek()
            if tok.kind != "ident" or tok.text not in SECTION_ORDER:
                self.c.error(
                    f"expected a section keyword, found {tok.text!r}"
                    if tok.kind != "eof" else "expected a section keyword")
                self.c.advance()
                self.c.sync_to(set(), set(SECTION_ORDER))
                continue
            name = tok.text
            if name in seen:
                self.c.error(f"duplicate section {name!r}", tok)
            index = SECTION_ORDER.index(name)
            if index < last_index:
                self.c.error(
                    f"section {name!r} must appear before "
                    f"{SECTION_ORDER[last_index]!r}", tok)
            last_index = max(last_index, index)
            seen[name] = tok
            self.c.advance()
            handler = {
                "dimensions": self.parse_dimensions,
                "concepts": lambda: self.parse_name_list("concept"),
                "roles": lambda: self.parse_name_list("role"),
                "constants": self.parse_constants,
                "services": self.parse_services,
                "init-context": self.parse_init_context,
                "tbox": self.parse_tbox,
                "abox": self.parse_abox,
                "actions": self.parse_actions,
                "process": self.parse_process,
                "context-rules": self.parse_context_rules,
            }[name]
            handler()
        for required in REQUIRED_SECTIONS:
            if required not in seen:
                self.c.error(f"missing {required} section")
        if has_errors(self.c.diagnostics):
            return None
        spec = self.assemble()
        if has_errors(self.c.diagnostics):
            return None
        return spec

    def open_block(self) -> bool:
        return self.c.expect("lbrace", "'{'") is not None

    def close_block(self) -> None:
        if self.c.expect("rbrace", "'}'") is None:
            self.c.sync_to({"rbrace"}, set(SECTION_ORDER))
            self.c.accept("rbrace")

    def item_recover(self) -> None:
        self.c.sync_to({"semi", "rbrace"}, set(SECTION_ORDER))
        self.c.accept("semi")

    # -- sections ----------------------------------------------------------

    def parse_dimensions(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            tok = self.c.expect("ident", "a dimension name")
            if tok is None or self.c.expect("colon", "':'") is None:
                self.item_recover()
                continue
            self.declare_name(tok, "dimension")
            edges: list[tuple[str, str]] = []
            values: list[Token] = []

            def tree(parent: str | None) -> None:
                val = self.c.expect("ident", "a value name")
                if val is None:
                    return
                self.declare_name(val, "value")
                values.append(val)
                if parent is not None:
                    edges.append((val.text, parent))
                if self.c.accept("lbrace"):
                    tree(val.text)
                    while self.c.accept("comma"):
                        tree(val.text)
                    self.c.expect("rbrace", "'}' closing the value tree")

            tree(None)
            self.c.expect("semi", "';'")
            if not values:
                continue
            names = [v.text for v in values]
            if len(set(names)) != len(names):
                self.c.error("duplicate value in dimension tree", tok)
                continue
            if tok.text in self.dimensions:
                self.c.error(f"duplicate dimension {tok.text!r}", tok)
                continue
            try:
                self.dimensions[tok.text] = DimensionDomain(
                    tok.text, values[0].text, edges)
            except SpecificationError as exc:
                self.c.error(str(exc), tok)
        self.close_block()

    def parse_name_list(self, kind: str) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            tok = self.c.expect("ident", f"a {kind} name")
            if tok is None:
                self.item_recover()
                continue
            if self.declare_name(tok, kind):
                self.establish_kind(tok, kind)
            if not self.c.accept("comma") and not self.c.at("rbrace"):
                self.c.expect("comma", "',' or '}'")
                self.item_recover()
        self.close_block()

    def parse_constants(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            tok = self.c.expect("ident", "a constant name")
            if tok is None:
                self.item_recover()
                continue
            if self.declare_name(tok, "constant") and tok.text not in self.constants:
                self.constants.append(tok.text)
            if not self.c.accept("comma") and not self.c.at("rbrace"):
                self.c.expect("comma", "',' or '}'")
                self.item_recover()
        self.close_block()

    def parse_services(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            tok = self.c.expect("ident", "a service function name")
            if tok is None or self.c.expect("slash", "'/' and an arity") is None:
                self.item_recover()
                continue
            arity = self.c.expect("number", "an arity")
            if arity is None:
                self.item_recover()
                continue
            if self.declare_name(tok, "service"):
                if tok.text in self.services:
                    self.c.error(f"duplicate service {tok.text!r}", tok)
                else:
                    self.services[tok.text] = int(arity.text)
            if not self.c.accept("comma") and not self.c.at("rbrace"):
                self.c.expect("comma", "',' or '}'")
                self.item_recover()
        self.close_block()

    def parse_init_context(self) -> None:
        if not self.open_block():
            return
        assignments: dict[str, str] = {}
        while not self.c.at("rbrace") and not self.c.at("eof"):
            dim = self.c.expect("ident", "a dimension name")
            if dim is None or self.c.expect("equals", "'='") is None:
                self.item_recover()
                continue
            val = self.c.expect("ident", "a value name")
            if val is None:
                self.item_recover()
                continue
            self.check_ctx_atom(dim, val)
            if dim.text in assignments:
                self.c.error(f"dimension {dim.text!r} assigned twice", dim)
            else:
                assignments[dim.text] = val.text
            if not self.c.accept("comma") and not self.c.at("rbrace"):
                self.c.expect("comma", "',' or '}'")
                self.item_recover()
        self.close_block()
        missing = sorted(set(self.dimensions) - set(assignments))
        if missing:
            self.c.error("initial context must assign every dimension; "
                         f"missing {', '.join(missing)}")
        if not has_errors(self.c.diagnostics):
            self.initial_context = ContextState.of(assignments)

    def parse_basic_side(self):
        """('exists', Role) | ('role', Role) | ('bare', Token)"""
        if self.c.at_word("exists"):
            self.c.advance()
            tok = self.c.expect("ident", "a role name")
            if tok is None:
                return None
            self.declare_name(tok, "role")
            inverse = self.c.accept("inv") is not None
            self.establish_kind(tok, "role")
            return ("exists", Role(tok.text, inverse))
        tok = self.c.expect("ident", "a concept or role name")
        if tok is None:
            return None
        self.declare_name(tok, "name")
        if self.c.accept("inv"):
            self.establish_kind(tok, "role")
            return ("role", Role(tok.text, True))
        return ("bare", tok)

    def parse_tbox(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            if self.c.at_word("funct"):
                self.c.advance()
                if self.c.expect("lparen", "'('") is None:
                    self.item_recover()
                    continue
                tok = self.c.expect("ident", "a role name")
                inverse = False
                if tok is not None:
                    self.declare_name(tok, "role")
                    self.establish_kind(tok, "role")
                    inverse = self.c.accept("inv") is not None
                self.c.expect("rparen", "')'")
                guard = self.parse_guard()
                self.c.expect("semi", "';'")
                if tok is not None:
                    self.ctbox_entries.append(
                        (Functionality(Role(tok.text, inverse)), guard))
                continue
            lhs = self.parse_basic_side()
            if lhs is None or self.c.expect("sqsub", "'[='") is None:
                self.item_recover()
                continue
            negated = self.c.accept("bang") is not None
            rhs = self.parse_basic_side()
            if rhs is None:
                self.item_recover()
                continue
            guard = self.parse_guard()
            self.c.expect("semi", "';'")
            assertion = self.resolve_inclusion(lhs, rhs, negated)
            if assertion is not None:
                self.ctbox_entries.append((assertion, guard))
        self.close_block()

    def resolve_inclusion(self, lhs, rhs, negated):
        def is_concepty(side):
            return side[0] == "exists" or (
                side[0] == "bare" and self.kinds.get(side[1].text) == "concept")

        def is_roley(side):
            return side[0] == "role" or (
                side[0] == "bare" and self.kinds.get(side[1].text) == "role")

        concepty = is_concepty(lhs) or is_concepty(rhs)
        roley = is_roley(lhs) or is_roley(rhs)
        if concepty and roley:
            tok = lhs[1] if lhs[0] == "bare" else rhs[1]
            self.c.error("inclusion mixes a concept with a role",
                         tok if isinstance(tok, Token) else None)
            return None
        if not concepty and not roley:
            self.c.error(
                f"cannot tell whether {lhs[1].text!r} and {rhs[1].text!r} are "
                "concepts or roles; declare them in a concepts or roles section",
                lhs[1])
            return None

        def to_concept(side):
            if side[0] == "exists":
                return ExistsRole(side[1])
            self.establish_kind(side[1], "concept")
            return ConceptName(side[1].text)

        def to_role(side):
            if side[0] == "role":
                return side[1]
            if side[0] == "exists":
                return None
            self.establish_kind(side[1], "role")
            return Role(side[1].text)

        if concepty:
            return ConceptInclusion(to_concept(lhs), to_concept(rhs), negated)
        sub, sup = to_role(lhs), to_role(rhs)
        if sub is None or sup is None:
            self.c.error("role inclusions cannot mention 'exists'")
            return None
        return RoleInclusion(sub, sup, negated)

    def parse_guard(self) -> ContextExpr:
        if self.c.accept("at"):
            return _parse_ctx_expr(self.c, self.check_ctx_atom)
        return CTX_TRUE

    def parse_abox(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            pred = self.c.expect("ident", "a concept or role name")
            if pred is None or self.c.expect("lparen", "'('") is None:
                self.item_recover()
                continue
            args: list[str] = []
            tok = self.c.expect("ident", "a constant")
            if tok is not None:
                args.append(tok.text)
                if tok.text in RESERVED_NAMES:
                    self.c.error(f"{tok.text!r} is reserved", tok)
            while self.c.accept("comma"):
                tok = self.c.expect("ident", "a constant")
                if tok is not None:
                    args.append(tok.text)
                    if tok.text in RESERVED_NAMES:
                        self.c.error(f"{tok.text!r} is reserved", tok)
            self.c.expect("rparen", "')'")
            self.c.expect("semi", "';'")
            if not args or len(args) > 2:
                self.c.error("facts have one or two arguments", pred)
                continue
            self.qp.check_predicate(pred, len(args))
            self.abox_facts.append(Fact(pred.text, tuple(args)))
        self.close_block()
        self.adom0 = frozenset(c for f in self.abox_facts for c in f.args)

    def parse_actions(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            name = self.c.expect("ident", "an action name")
            if name is None or self.c.expect("lparen", "'('") is None:
                self.item_recover()
                continue
            self.declare_name(name, "action")
            params: list[str] = []
            if not self.c.at("rparen"):
                tok = self.c.expect("ident", "a parameter name")
                if tok is not None:
                    params.append(tok.text)
                while self.c.accept("comma"):
                    tok = self.c.expect("ident", "a parameter name")
                    if tok is not None:
                        params.append(tok.text)
            self.c.expect("rparen", "')'")
            if len(set(params)) != len(params):
                self.c.error("duplicate action parameter", name)
            for p in params:
                if p in self.constants or p in self.adom0:
                    self.c.error(f"parameter {p!r} shadows a constant", name)
            effects: list[EffectSpec] = []
            if self.c.expect("lbrace", "'{'") is not None:
                while not self.c.at("rbrace") and not self.c.at("eof"):
                    effect = self.parse_effect(tuple(params))
                    if effect is not None:
                        effects.append(effect)
            self.close_block()
            if name.text in self.actions:
                self.c.error(f"duplicate action {name.text!r}", name)
            else:
                self.actions[name.text] = ActionSpec(
                    name.text, tuple(params), tuple(effects))
                self.action_order.append(name.text)
        self.close_block()

    def parse_effect(self, params: tuple[str, ...]) -> EffectSpec | None:
        start = self.c.peek()
        env = self.constant_env(params=frozenset(params), collect_free=True)
        body = self.qp.parse_ucq(env)
        filters: list[ECQ] = []
        filter_env = self.constant_env(
            params=frozenset(params) | set(body.free))
        while self.c.accept("amp"):
            filters.append(self.qp.parse_ecq(filter_env))
        if self.c.expect("effarrow", "'~>'") is None:
            self.item_recover()
            return None
        if self.c.expect("lbrace", "'{' opening the effect head") is None:
            self.item_recover()
            return None
        own_free = tuple(x for x in body.free if x not in params)
        templates: list[FactTemplate] = []
        if not self.c.at("rbrace"):
            while True:
                template = self.parse_head_fact(params, own_free)
                if template is not None:
                    templates.append(template)
                if not self.c.accept("comma"):
                    break
        self.c.expect("rbrace", "'}' closing the effect head")
        self.c.expect("semi", "';'")
        filt = ECQ_TRUE
        for f in filters:
            filt = f if filt is ECQ_TRUE else EcqAnd(filt, f)
        bad = ecq_free_vars(filt) - set(params) - set(own_free)
        if bad:
            self.c.error(
                f"filter variables {sorted(bad)} do not occur in the positive "
                "body", start)
        return EffectSpec(body, tuple(sorted(set(templates), key=str)), filt)

    def parse_head_fact(self, params, own_free) -> FactTemplate | None:
        pred = self.c.expect("ident", "a concept or role name")
        if pred is None or self.c.expect("lparen", "'('") is None:
            return None
        args = [self.parse_head_term(params, own_free, depth=0)]
        while self.c.accept("comma"):
            args.append(self.parse_head_term(params, own_free, depth=0))
        self.c.expect("rparen", "')'")
        terms = [a for a in args if a is not None]
        if len(terms) != len(args):
            return None
        self.qp.check_predicate(pred, len(terms))
        return FactTemplate(pred.text, tuple(terms))

    def parse_head_term(self, params, own_free, depth: int) -> HeadTerm | None:
        tok = self.c.expect("ident", "a head term")
        if tok is None:
            return None
        if self.c.at("lparen"):  # service call
            self.c.advance()
            if tok.text not in self.services:
                self.c.error(f"undeclared service {tok.text!r}", tok)
            if depth >= 1:
                self.c.warn("nested service call", tok)
            args = []
            if not self.c.at("rparen"):
                args.append(self.parse_head_term(params, own_free, depth + 1))
                while self.c.accept("comma"):
                    args.append(self.parse_head_term(params, own_free, depth + 1))
            self.c.expect("rparen", "')'")
            arity = self.services.get(tok.text)
            if arity is not None and arity != len(args):
                self.c.error(
                    f"service {tok.text!r} takes {arity} argument(s), "
                    f"got {len(args)}", tok)
            if any(a is None for a in args):
                return None
            return CallTerm(tok.text, tuple(args))
        name = tok.text
        if name in params or name in own_free:
            return HeadVar(name)
        if name in self.adom0:
            return HeadConst(name)
        if name in self.constants:
            self.c.error(
                f"head constants must appear in the initial data; {name!r} "
                "does not", tok)
            return None
        self.c.error(
            f"unknown head term {name!r}: not a parameter, a variable of the "
            "body, or an initial-data constant", tok)
        return None

    def parse_process(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            start = self.c.peek()
            # free variables of the query are declared by the action-call
            # arguments that follow; collect them and cross-check below
            env = self.constant_env(warn_outside_adom0=True, collect_free=True)
            query = self.qp.parse_ecq(env)
            guard = self.parse_guard()
            if self.c.expect("rulearrow", "'|->'") is None:
                self.item_recover()
                continue
            name = self.c.expect("ident", "an action name")
            if name is None or self.c.expect("lparen", "'('") is None:
                self.item_recover()
                continue
            args: list[Token] = []
            if not self.c.at("rparen"):
                tok = self.c.expect("ident", "a variable")
                if tok is not None:
                    args.append(tok)
                while self.c.accept("comma"):
                    tok = self.c.expect("ident", "a variable")
                    if tok is not None:
                        args.append(tok)
            self.c.expect("rparen", "')'")
            self.c.expect("semi", "';'")
            action = self.actions.get(name.text)
            if action is None:
                self.c.error(f"undeclared action {name.text!r}", name)
                continue
            argnames = [t.text for t in args]
            if len(argnames) != len(action.params):
                self.c.error(
                    f"action {name.text!r} takes {len(action.params)} "
                    f"parameter(s), got {len(argnames)}", name)
                continue
            if len(set(argnames)) != len(argnames):
                self.c.error("rule arguments must be distinct variables", name)
                continue
            free = ecq_free_vars(query)
            if free != frozenset(argnames):
                self.c.error(
                    "the free variables of the rule query must be exactly the "
                    f"action arguments; query has {sorted(free)}, call has "
                    f"{argnames}", start)
                continue
            renaming = dict(zip(argnames, action.params))
            if any(k != v for k, v in renaming.items()):
                query = _rename_ecq_vars(query, renaming, self.c, start)
                if query is None:
                    continue
            self.process.append(CondActionRule(query, guard, name.text))
        self.close_block()

    def parse_context_rules(self) -> None:
        if not self.open_block():
            return
        while not self.c.at("rbrace") and not self.c.at("eof"):
            start = self.c.peek()
            env = self.constant_env(warn_outside_adom0=True)
            query = self.qp.parse_ecq(env)
            guard = self.parse_guard()
            if self.c.expect("rulearrow", "'|->'") is None:
                self.item_recover()
                continue
            if self.c.expect("lbrace", "'{' opening the new assignment") is None:
                self.item_recover()
                continue
            head: dict[str, str] = {}
            if not self.c.at("rbrace"):
                while True:
                    dim = self.c.expect("ident", "a dimension name")
                    if dim is None or self.c.expect("equals", "'='") is None:
                        break
                    val = self.c.expect("ident", "a value name")
                    if val is None:
                        break
                    self.check_ctx_atom(dim, val)
                    if dim.text in head:
                        self.c.error(
                            f"duplicate dimension {dim.text!r} in evolution head",
                            dim)
                    else:
                        head[dim.text] = val.text
                        dom = self.dimensions.get(dim.text)
                        if dom is not None and val.text in dom \
                                and dom.children_of(val.text):
                            self.c.warn(
                                f"evolution head assigns non-leaf value "
                                f"{val.text!r}", val)
                    if not self.c.accept("comma"):
                        break
            self.c.expect("rbrace", "'}'")
            self.c.expect("semi", "';'")
            if ecq_free_vars(query):
                self.c.error("context-rule queries must be boolean (bind "
                             "every variable with ex)", start)
                continue
            self.context_rules.append(ContextEvolutionRule(
                query, guard, PartialAssignment.of(head)))
        self.close_block()

    # -- assembly ----------------------------------------------------------

    def assemble(self) -> CkabSpec | None:
        assert self.initial_context is not None
        concepts = frozenset(n for n, k in self.kinds.items() if k == "concept")
        roles = frozenset(n for n, k in self.kinds.items() if k == "role")
        spec = CkabSpec(
            dimensions=tuple(sorted(self.dimensions.values(), key=lambda d: d.name)),
            concepts=concepts,
            roles=roles,
            constants=frozenset(self.constants),
            services=frozenset(self.services.items()),
            ctbox=ContextualizedTBox(tuple(self.ctbox_entries)),
            initial_abox=ABox(frozenset(self.abox_facts)),
            actions=tuple(self.actions[n] for n in self.action_order),
            process=tuple(self.process),
            initial_context=self.initial_context,
            context_rules=tuple(self.context_rules),
        )
        theory = build_theory(spec.dimensions)
        init_tbox = tbox_in_context(spec.ctbox, spec.initial_context, theory)
        if not is_consistent(init_tbox, spec.initial_abox):
            self.c.error("initial data is inconsistent with the axioms active "
                         "in the initial context")
            return None
        return spec


def _rename_ecq_vars(q: ECQ, renaming: dict[str, str], c: _Cursor,
                     tok: Token) -> ECQ | None:
    used = _ecq_all_vars(q)
    clash = {v for v in renaming.values()
             if v in used and renaming.get(v, None) != v}
    if clash:
        c.error(
            f"rule query already uses name(s) {sorted(clash)}; rename the "
            "query variables to match the action parameters", tok)
        return None

    def ren_term(t):
        if isinstance(t, Var) and t.name in renaming:
            return Var(renaming[t.name])
        return t

    def ren_ucq(u: UCQ) -> UCQ:
        free = tuple(renaming.get(x, x) for x in u.free)
        cqs = []
        for cq in u.disjuncts:
            cqs.append(ConjunctiveQuery(
                tuple(ren_term(t) for t in cq.head),
                tuple(QueryAtom(a.predicate, tuple(ren_term(t) for t in a.args))
                      for a in cq.atoms)))
        return UCQ(free, tuple(cqs))

    def ren(e: ECQ) -> ECQ:
        if isinstance(e, UcqAtom):
            return UcqAtom(ren_ucq(e.query))
        if isinstance(e, EcqNot):
            return EcqNot(ren(e.operand))
        if isinstance(e, EcqAnd):
            return EcqAnd(ren(e.left), ren(e.right))
        if isinstance(e, EcqOr):
            return EcqOr(ren(e.left), ren(e.right))
        if isinstance(e, EcqExists):
            return EcqExists(renaming.get(e.var, e.var), ren(e.body))
        return e

    return ren(q)


def _ecq_all_vars(q: ECQ) -> set[str]:
    if isinstance(q, UcqAtom):
        out = set(q.query.free)
        for cq in q.query.disjuncts:
            out |= cq.variables()
        return out
    if isinstance(q, EcqNot):
        return _ecq_all_vars(q.operand)
    if isinstance(q, (EcqAnd, EcqOr)):
        return _ecq_all_vars(q.left) | _ecq_all_vars(q.right)
    if isinstance(q, EcqExists):
        return _ecq_all_vars(q.body) | {q.var}
    return set()


def parse_spec(text: str, filename: str = "<spec>") -> tuple[CkabSpec | None,
                                                             list[Diagnostic]]:
    """Parse and validate a specification.

    Returns (spec, diagnostics); the spec is None whenever any diagnostic
    is an error.
    """
    diagnostics: list[Diagnostic] = []
    tokens = tokenize(text, filename, diagnostics)
    parser = _SpecParser(tokens, filename, diagnostics)
    try:
        spec = parser.parse()
    except RecursionError:
        parser.c.error("input nests too deeply")
        spec = None
    if has_errors(diagnostics):
        spec = None
    return spec, diagnostics


# ---------------------------------------------------------------------------
# Property parser.

class _PropertyParser:
    def __init__(self, tokens: list[Token], filename: str,
                 diagnostics: list[Diagnostic], spec: CkabSpec | None,
                 extra_constants: frozenset[str]):
        self.c = _Cursor(tokens, filename, diagnostics)
        self.spec = spec
        kinds = None
        constants = frozenset(extra_constants)
        if spec is not None:
            kinds = {n: "concept" for n in spec.concepts}
            kinds.update({n: "role" for n in spec.roles})
            constants |= spec.constants | spec.adom0()
        self.kinds = kinds
        self.constants = constants
        self.qp = _QueryParser(self.c, kinds)
        self.dimensions = {d.name: d for d in spec.dimensions} if spec else None

    def check_ctx_atom(self, dim_tok: Token, val_tok: Token) -> None:
        if self.dimensions is None:
            return
        dom = self.dimensions.get(dim_tok.text)
        if dom is None:
            self.c.error(f"undeclared dimension {dim_tok.text!r}", dim_tok)
        elif val_tok.text not in dom:
            self.c.error(
                f"value {val_tok.text!r} is not in dimension {dim_tok.text!r}",
                val_tok)

    def parse_one(self) -> MuFormula | None:
        start = self.c.peek()
        formula = self.formula((), ())
        free_ind = free_individual_vars(formula)
        if free_ind:
            self.c.error("free individual variable(s) "
                         f"{', '.join(sorted(free_ind))}: bind them with "
                         "forall or ex", start)
        try:
            check_monotone(formula)
        except SpecificationError as exc:
            self.c.error(f"{exc} (fixpoint bodies must be monotone)", start)
        return formula

    def parse(self) -> MuFormula | None:
        formula = self.parse_one()
        self.c.accept("semi")
        if not self.c.at("eof"):
            self.c.error("unexpected input after the formula")
        if has_errors(self.c.diagnostics):
            return None
        return formula

    def formula(self, ind_vars: tuple[str, ...],
                fix_vars: tuple[str, ...]) -> MuFormula:
        c = self.c
        if c.at_word("mu", "nu"):
            binder = c.advance().text
            tok = c.expect("ident", "a fixpoint variable")
            name = tok.text if tok else "_err"
            c.expect("dot", "'.'")
            body = self.formula(ind_vars, fix_vars + (name,))
            return (MuLeast if binder == "mu" else MuGreatest)(name, body)
        if c.at_word("forall", "ex"):
            binder = c.advance().text
            tok = c.expect("ident", "a variable")
            name = tok.text if tok else "_err"
            if tok is not None and name in self.constants:
                c.error(f"{name!r} is a declared constant and cannot be "
                        "quantified", tok)
            c.expect("dot", "'.'")
            body = self.formula(ind_vars + (name,), fix_vars)
            return (MuForall if binder == "forall" else MuExists)(name, body)
        return self.implies(ind_vars, fix_vars)

    def implies(self, ind, fix) -> MuFormula:
        left = self.disj(ind, fix)
        if self.c.accept("arrow"):
            # the right-hand side may start a new binder (mu Z. ...)
            return MuImplies(left, self.formula(ind, fix))
        return left

    def disj(self, ind, fix) -> MuFormula:
        expr = self.conj(ind, fix)
        while self.c.accept("pipe"):
            expr = MuOr(expr, self.conj(ind, fix))
        return expr

    def conj(self, ind, fix) -> MuFormula:
        expr = self.unary(ind, fix)
        while self.c.accept("amp"):
            expr = MuAnd(expr, self.unary(ind, fix))
        return expr

    def unary(self, ind, fix) -> MuFormula:
        c = self.c
        if c.at_word("not"):
            c.advance()
            return MuNot(self.unary(ind, fix))
        if c.at("diamond") or c.at("box"):
            first_tok = c.advance()
            first = Step.DIAMOND if first_tok.kind == "diamond" else Step.BOX
            if c.at("diamond") or c.at("box"):
                second_tok = c.advance()
                second = Step.DIAMOND if second_tok.kind == "diamond" else Step.BOX
                operand = self.unary(ind, fix)
                return MuModality(first, second, operand)
            c.error("step modalities must be used in pairs "
                    "(<-><->, <->[-], [-]<->, [-][-])", first_tok)
            return self.unary(ind, fix)
        return self.primary(ind, fix)

    def primary(self, ind, fix) -> MuFormula:
        c = self.c
        if c.accept("lparen"):
            inner = self.formula(ind, fix)
            c.expect("rparen", "')'")
            return inner
        if c.at_word("true"):
            c.advance()
            return MU_TRUE
        if c.at_word("false"):
            c.advance()
            return MU_FALSE
        if c.accept("lbrack"):
            env = _QueryEnv(self.constants, bound=ind)
            ucq = self.qp.parse_ucq(env)
            c.expect("rbrack", "']'")
            return MuQuery(UcqAtom(ucq))
        if c.at("ident") and c.peek(1).kind == "colon":
            dim_tok = c.advance()
            c.advance()
            val_tok = c.expect("ident", "a dimension value")
            if val_tok is None:
                return MU_FALSE
            self.check_ctx_atom(dim_tok, val_tok)
            return MuContext(CtxAtom(dim_tok.text, val_tok.text))
        if c.at("ident"):
            tok = c.advance()
            if tok.text in fix:
                return MuVar(tok.text)
            if tok.text in ind:
                c.error(
                    f"{tok.text!r} is an individual variable; it can only "
                    "appear inside [...] queries", tok)
            else:
                c.error(f"unbound fixpoint variable {tok.text!r}", tok)
            return MU_FALSE
        c.error("expected a formula")
        c.advance()
        return MU_FALSE


def parse_property(text: str, filename: str = "<property>",
                   spec: CkabSpec | None = None,
                   extra_constants: frozenset[str] = frozenset()
                   ) -> tuple[MuFormula | None, list[Diagnostic]]:
    """Parse one property formula.

    With a specification, predicates and constants are checked against its
    vocabulary; without one, only structural rules apply (modality pairing,
    bound variables, monotone fixpoints).
    """
    diagnostics: list[Diagnostic] = []
    tokens = tokenize(text, filename, diagnostics)
    parser = _PropertyParser(tokens, filename, diagnostics, spec,
                             extra_constants)
    try:
        formula = parser.parse()
    except RecursionError:
        parser.c.error("input nests too deeply")
        formula = None
    if has_errors(diagnostics):
        formula = None
    return formula, diagnostics


def parse_properties(text: str, filename: str = "<property>",
                     spec: CkabSpec | None = None,
                     extra_constants: frozenset[str] = frozenset()
                     ) -> tuple[list[MuFormula], list[Diagnostic]]:
    """Parse a file of ';'-separated property formulas."""
    diagnostics: list[Diagnostic] = []
    tokens = tokenize(text, filename, diagnostics)
    parser = _PropertyParser(tokens, filename, diagnostics, spec,
                             extra_constants)
    formulas: list[MuFormula] = []
    try:
        while not parser.c.at("eof"):
            before = len(diagnostics)
            formula = parser.parse_one()
            if formula is not None and len(diagnostics) == before:
                formulas.append(formula)
            if not parser.c.accept("semi") and not parser.c.at("eof"):
                parser.c.error("expected ';' between properties")
                parser.c.sync_to({"semi"})
                parser.c.accept("semi")
    except RecursionError:
        parser.c.error("input nests too deeply")
    if has_errors(diagnostics):
        return [], diagnostics
    return formulas, diagnostics
