"""Tokenizer shared by the specification and property grammars.

Never raises on malformed input: unknown characters become diagnostics and
are skipped, so downstream parsing always sees a well-formed token stream
ending in EOF.
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import Diagnostic, Severity

# Section keywords containing hyphens get glued back together here so the
# rest of the grammar can treat them as single identifiers.
HYPHEN_KEYWORDS = {"init-context", "context-rules"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


_SINGLE = {
    "{": "lbrace", "}": "rbrace", "(": "lparen", ")": "rparen",
    "]": "rbrack", ",": "comma", ";": "semi", ":": "colon",
    "@": "at", "&": "amp", "!": "bang", "=": "equals",
    "/": "slash", ".": "dot",
}


def tokenize(text: str, filename: str, diagnostics: list[Diagnostic]) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)

    def emit(kind: str, lexeme: str, l: int, c: int) -> None:
        tokens.append(Token(kind, lexeme, l, c))

    def diag(message: str, l: int, c: int) -> None:
        diagnostics.append(Diagnostic(Severity.ERROR, message, filename, l, c))

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            # greedy re-join of hyphenated section keywords
            for glued in HYPHEN_KEYWORDS:
                stem = glued.split("-")[0]
                if word == stem and text[j:j + len(glued) - len(stem)] == glued[len(stem):]:
                    word = glued
                    j = i + len(glued)
                    break
            emit("ident", word, start_line, start_col)
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            emit("number", text[i:j], start_line, start_col)
            col += j - i
            i = j
            continue
        two = text[i:i + 2]
        three = text[i:i + 3]
        if three == "<->":
            emit("diamond", three, start_line, start_col)
            i += 3
            col += 3
            continue
        if three == "[-]":
            emit("box", three, start_line, start_col)
            i += 3
            col += 3
            continue
        if three == "|->":
            emit("rulearrow", three, start_line, start_col)
            i += 3
            col += 3
            continue
        if two == "[=":
            emit("sqsub", two, start_line, start_col)
            i += 2
            col += 2
            continue
        if two == "~>":
            emit("effarrow", two, start_line, start_col)
            i += 2
            col += 2
            continue
        if two == "->":
            emit("arrow", two, start_line, start_col)
            i += 2
            col += 2
            continue
        if two == "^-":
            emit("inv", two, start_line, start_col)
            i += 2
            col += 2
            continue
        if ch == "[":
            emit("lbrack", ch, start_line, start_col)
            i += 1
            col += 1
            continue
        if ch == "|":
            emit("pipe", ch, start_line, start_col)
            i += 1
            col += 1
            continue
        if ch in _SINGLE:
            emit(_SINGLE[ch], ch, start_line, start_col)
            i += 1
            col += 1
            continue
        # unknown character run: one diagnostic, then skip
        j = i
        while j < n and not (text[j].isalnum() or text[j] in " \t\r\n#"
                             or text[j] in _SINGLE or text[j] in "[|<~^-"):
            j += 1
        j = max(j, i + 1)
        bad = text[i:j]
        diag(f"unexpected character{'s' if len(bad) > 1 else ''} {bad!r}",
             start_line, start_col)
        col += j - i
        i = j
    tokens.append(Token("eof", "", line, col))
    return tokens
