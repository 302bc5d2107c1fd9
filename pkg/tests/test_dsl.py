import pathlib
import random

import pytest

from ckab.dsl import (format_formula, format_spec, has_errors,
                      parse_properties, parse_property, parse_spec,
                      pretty_print)
from ckab.dsl.diagnostics import Severity
from ckab.formula import (MuGreatest, MuImplies, MuLeast, MuModality, Step)

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"

MINIMAL = """
dimensions { d : top { lo, hi } ; }
concepts { Thing }
init-context { d = lo }
abox { Thing(a) ; }
"""


def load(name: str) -> str:
    return (CORPUS / name).read_text()


def errors_of(diagnostics):
    return [d for d in diagnostics if d.severity is Severity.ERROR]


class TestParseSpec:
    def test_retail_parses_clean(self):
        spec, diagnostics = parse_spec(load("retail.ckab"), "retail.ckab")
        assert spec is not None
        assert diagnostics == []

    def test_whole_corpus_parses_clean(self):
        for path in sorted(CORPUS.glob("*.ckab")):
            spec, diagnostics = parse_spec(path.read_text(), path.name)
            assert spec is not None, (path.name, [str(d) for d in diagnostics])
            assert diagnostics == [], path.name

    def test_duplicate_dimension_in_evolution_head(self):
        text = MINIMAL + """
context-rules { true |-> { d = lo, d = hi } ; }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is None
        assert any("duplicate dimension" in d.message for d in errors_of(diagnostics))

    def test_empty_file_reports_missing_dimensions(self):
        spec, diagnostics = parse_spec("")
        assert spec is None
        assert any("missing dimensions section" in d.message
                   for d in errors_of(diagnostics))

    def test_every_diagnostic_is_positioned(self):
        spec, diagnostics = parse_spec("dimensions { ??? }")
        assert spec is None
        assert diagnostics
        for diag in diagnostics:
            assert diag.line >= 1 and diag.column >= 1
            rendered = str(diag)
            assert rendered.count(":") >= 3

    def test_reserved_names_rejected(self):
        spec, diagnostics = parse_spec(MINIMAL + "\nroles { State }")
        assert spec is None
        assert any("reserved" in d.message for d in errors_of(diagnostics))
        spec, diagnostics = parse_spec(
            MINIMAL.replace("Thing(a)", "Thing(inter)"))
        assert spec is None
        assert any("reserved" in d.message for d in errors_of(diagnostics))

    def test_undeclared_predicate_in_abox(self):
        spec, diagnostics = parse_spec(MINIMAL.replace("Thing(a)", "Other(a)"))
        assert spec is None
        assert any("undeclared" in d.message for d in errors_of(diagnostics))

    def test_arity_mismatch(self):
        spec, diagnostics = parse_spec(MINIMAL.replace("Thing(a)", "Thing(a, b)"))
        assert spec is None
        assert any("one argument" in d.message for d in errors_of(diagnostics))

    def test_service_call_in_query_rejected(self):
        text = MINIMAL + """
services { f/1 }
actions { act() { Thing(f(x)) ~> {} ; } }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is None
        assert any("service calls are not allowed in queries" in d.message
                   for d in errors_of(diagnostics))

    def test_rule_arity_mismatch(self):
        text = MINIMAL + """
actions { act(p) { Thing(p) ~> { Thing(p) } ; } }
process { [Thing(x)] |-> act(x, y) ; }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is None
        assert any("takes 1 parameter" in d.message for d in errors_of(diagnostics))

    def test_rule_free_vars_must_match_call(self):
        text = MINIMAL + """
actions { act(p) { Thing(p) ~> { Thing(p) } ; } }
process { true |-> act(x) ; }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is None
        assert any("free variables of the rule query" in d.message
                   for d in errors_of(diagnostics))

    def test_context_rule_query_must_be_boolean(self):
        text = MINIMAL + """
context-rules { [Thing(x)] |-> { d = hi } ; }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is None
        assert any("unknown name 'x'" in d.message for d in errors_of(diagnostics))
        spec, diagnostics = parse_spec(MINIMAL + """
context-rules { (ex x. [Thing(x)]) |-> { d = hi } ; }
""")
        assert spec is not None and not diagnostics

    def test_head_constant_must_be_initial(self):
        text = """
dimensions { d : top ; }
concepts { Thing }
constants { ghost }
init-context { d = top }
abox { Thing(a) ; }
actions { act() { Thing(x) ~> { Thing(ghost) } ; } }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is None
        assert any("initial data" in d.message for d in errors_of(diagnostics))

    def test_sections_out_of_order(self):
        text = "abox { }\ndimensions { d : top ; }\ninit-context { d = top }"
        spec, diagnostics = parse_spec(text)
        assert any("must appear before" in d.message for d in errors_of(diagnostics))

    def test_inconsistent_initial_data_rejected(self):
        text = """
dimensions { d : top ; }
concepts { A, B }
init-context { d = top }
tbox { A [= !B ; }
abox { A(x1) ; B(x1) ; }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is None
        assert any("inconsistent" in d.message for d in errors_of(diagnostics))

    def test_nested_service_call_warns(self):
        text = """
dimensions { d : top ; }
concepts { Thing }
services { f/1, g/1 }
init-context { d = top }
abox { Thing(a) ; }
actions { act() { Thing(x) ~> { Thing(f(g(x))) } ; } }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is not None
        assert any(d.severity is Severity.WARNING and "nested" in d.message
                   for d in diagnostics)

    def test_nonleaf_evolution_value_warns(self):
        text = MINIMAL.replace("top { lo, hi }", "top { lo { deep }, hi }") + """
context-rules { true |-> { d = lo } ; }
"""
        spec, diagnostics = parse_spec(text)
        assert spec is not None
        assert any(d.severity is Severity.WARNING and "non-leaf" in d.message
                   for d in diagnostics)


class TestParseProperty:
    def test_delivery_property_parses(self):
        spec, _ = parse_spec(load("retail_delivery_ok.ckab"))
        formulas, diagnostics = parse_properties(load("delivery.mu"),
                                                 spec=spec)
        assert not has_errors(diagnostics)
        assert len(formulas) == 1
        formula = formulas[0]
        assert isinstance(formula, MuGreatest)

    def test_single_modality_rejected(self):
        formula, diagnostics = parse_property("<-> true")
        assert formula is None
        assert any("pairs" in d.message for d in errors_of(diagnostics))

    def test_non_monotone_fixpoint_rejected(self):
        formula, diagnostics = parse_property("mu Z. not Z")
        assert formula is None
        assert any("negation" in d.message for d in errors_of(diagnostics))

    def test_unbound_fixpoint_variable(self):
        formula, diagnostics = parse_property("mu Z. Y")
        assert formula is None
        assert any("unbound fixpoint variable" in d.message
                   for d in errors_of(diagnostics))

    def test_free_individual_variable_rejected(self):
        spec, _ = parse_spec(load("retail.ckab"))
        formula, diagnostics = parse_property("[RemWH(x)]", spec=spec)
        assert formula is None
        assert any("unknown name 'x'" in d.message
                   for d in errors_of(diagnostics))
        bound, diagnostics = parse_property("ex x. [RemWH(x)]", spec=spec)
        assert bound is not None and not diagnostics

    def test_modality_pairs_parse(self):
        for text, first, second in [
            ("<-><-> true", Step.DIAMOND, Step.DIAMOND),
            ("<->[-] true", Step.DIAMOND, Step.BOX),
            ("[-]<-> true", Step.BOX, Step.DIAMOND),
            ("[-][-] true", Step.BOX, Step.BOX),
        ]:
            formula, diagnostics = parse_property(text)
            assert not diagnostics
            assert isinstance(formula, MuModality)
            assert (formula.first, formula.second) == (first, second)

    def test_implication_binds_weakest(self):
        formula, _ = parse_property("true & false -> mu Z. [-][-] Z")
        assert isinstance(formula, MuImplies)
        assert isinstance(formula.right, MuLeast)


class TestRoundTrip:
    def test_corpus_specs(self):
        for path in sorted(CORPUS.glob("*.ckab")):
            spec, _ = parse_spec(path.read_text(), path.name)
            printed = format_spec(spec)
            reparsed, diagnostics = parse_spec(printed, path.name + ".printed")
            assert reparsed is not None, [str(d) for d in diagnostics]
            assert reparsed == spec, path.name

    def test_minimal_spec(self):
        spec, _ = parse_spec(MINIMAL)
        reparsed, _ = parse_spec(format_spec(spec))
        assert reparsed == spec

    def test_delivery_formula(self):
        spec, _ = parse_spec(load("retail_delivery_ok.ckab"))
        formulas, _ = parse_properties(load("delivery.mu"), spec=spec)
        printed = format_formula(formulas[0])
        reparsed, diagnostics = parse_property(printed, spec=spec)
        assert reparsed == formulas[0], [str(d) for d in diagnostics]

    def test_random_properties(self):
        rng = random.Random(31)
        from gen import random_formula
        from ckab.formula import is_closed
        count = 0
        while count < 60:
            formula = random_formula(rng, depth=3)
            if not is_closed(formula):
                continue
            printed = format_formula(formula)
            reparsed, diagnostics = parse_property(
                printed, extra_constants=frozenset({"a", "b"}))
            assert reparsed == formula, (printed, [str(d) for d in diagnostics])
            count += 1

    def test_pretty_print_dispatch(self):
        spec, _ = parse_spec(MINIMAL)
        assert pretty_print(spec) == format_spec(spec)
        formula, _ = parse_property("true")
        assert pretty_print(formula) == "true"
        with pytest.raises(TypeError):
            pretty_print(42)


def mutate(rng: random.Random, text: str) -> str:
    kind = rng.randrange(6)
    if not text or kind == 0:
        length = rng.randrange(0, 200)
        return "".join(chr(rng.randrange(32, 127)) for _ in range(length))
    if kind == 1:  # splice two random halves
        i, j = sorted(rng.randrange(len(text)) for _ in range(2))
        return text[:i] + text[j:]
    if kind == 2:  # duplicate a slice
        i, j = sorted(rng.randrange(len(text)) for _ in range(2))
        return text[:j] + text[i:j] + text[j:]
    if kind == 3:  # random character swaps
        chars = list(text)
        for _ in range(rng.randrange(1, 10)):
            chars[rng.randrange(len(chars))] = chr(rng.randrange(32, 127))
        return "".join(chars)
    if kind == 4:  # token soup
        tokens = ["dimensions", "{", "}", "(", ")", "[=", "~>", "|->", ";",
                  "@", "&", "|", "!", "ex", "not", "mu", "<->", "[-]", ":",
                  "abox", "ident", "true", ",", "=", "^-", "42"]
        return " ".join(rng.choice(tokens) for _ in range(rng.randrange(0, 120)))
    i = rng.randrange(len(text))
    return text[:i] + chr(rng.randrange(0, 0x2FF)) + text[i:]


class TestFuzzSmoke:
    def test_spec_parser_never_crashes(self):
        rng = random.Random(1234)
        base = load("retail.ckab")
        for _ in range(500):
            text = mutate(rng, base)
            spec, diagnostics = parse_spec(text, "<fuzz>")
            if spec is None:
                assert diagnostics, text[:120]
            for diag in diagnostics:
                assert diag.line >= 1 and diag.column >= 1

    def test_property_parser_never_crashes(self):
        rng = random.Random(4321)
        base = load("delivery.mu")
        for _ in range(300):
            text = mutate(rng, base)
            formula, diagnostics = parse_property(text, "<fuzz>")
            if formula is None:
                assert diagnostics
