"""Concrete syntax: the ``.tdl`` / ``.facts`` / ``.stream`` file formats.

Prolog-like surface: variables start uppercase, object constants lowercase,
time terms are ``T``, ``T+2``, ``T-1`` or integer literals.  Rules are
``Head :- B1, ..., Bn.``, facts ``Head.``, declarations
``.decl Name(object, time) edb|idb`` and the query output ``.output Name``.
Comments run from ``%`` to end of line.  Parsing is whitespace-insensitive
outside tokens.

Predicate names may contain dotted segments (``G.l``, ``Grey.n1.max``); the
library's generated programs use such names for renamed and specialized
predicates.  Dots bind into the identifier only when directly followed by a
word character, so ``G.`` still ends a fact.  Variables and object constants
are always dot-free.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    Atom,
    Dataset,
    Kind,
    ObjectConst,
    ObjectVar,
    PredicateDecl,
    Program,
    Query,
    Rule,
    Sort,
    Stream,
    Term,
    TimePoint,
    TimeVar,
    TimeVarPlus,
    Violation,
    shifted,
    validate_query,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int  # 1-based
    column: int  # 1-based

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.span = span
        self.message = message


class ProgramValidationError(ValueError):
    """Raised when a parsed program breaks model-level invariants."""

    def __init__(self, violations: Sequence[Violation], file: str):
        self.violations = list(violations)
        lines = "\n".join(f"  {v}" for v in self.violations)
        super().__init__(f"{file}: invalid program:\n{lines}")


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>%[^\n]*)
    | (?P<arrow>:-)
    | (?P<ident>[A-Za-z][A-Za-z0-9_]*(?:\.[A-Za-z0-9_]+)*)
    | (?P<int>\d+)
    | (?P<sym>[().,+\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" | "int" | "arrow" | one-character symbol | "eof"
    text: str
    span: SourceSpan


def _tokenize(text: str, filename: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", SourceSpan(filename, line, col))
        span = SourceSpan(filename, line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "ident":
            tokens.append(_Token("ident", tok, span))
        elif kind == "int":
            tokens.append(_Token("int", tok, span))
        elif kind == "arrow":
            tokens.append(_Token(":-", tok, span))
        elif kind == "sym":
            tokens.append(_Token(tok, tok, span))
        # whitespace and comments are skipped, but still advance line/col
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(_Token("eof", "", SourceSpan(filename, line, col)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, filename: str):
        self.tokens = _tokenize(text, filename)
        self.pos = 0
        self.filename = filename

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {what or kind}, found {tok.text or 'end of input'!r}", tok.span)
        return tok

    def fail(self, message: str) -> ParseError:
        return ParseError(message, self.peek().span)

    # -- declarations -------------------------------------------------------

    def parse_decl(self) -> PredicateDecl:
        name = self.expect("ident", "predicate name")
        self.expect("(", "'('")
        sorts: list[Sort] = []
        if self.peek().kind != ")":
            while True:
                tok = self.expect("ident", "'object' or 'time'")
                if tok.text == "object":
                    sorts.append(Sort.OBJECT)
                elif tok.text == "time":
                    sorts.append(Sort.TIME)
                else:
                    raise ParseError(f"unknown sort {tok.text!r}", tok.span)
                if self.peek().kind == ",":
                    self.next()
                else:
                    break
        self.expect(")", "')'")
        kind_tok = self.expect("ident", "'edb' or 'idb'")
        if kind_tok.text == "edb":
            kind = Kind.EDB
        elif kind_tok.text == "idb":
            kind = Kind.IDB
        else:
            raise ParseError(f"expected 'edb' or 'idb', found {kind_tok.text!r}", kind_tok.span)
        try:
            return PredicateDecl(name.text, tuple(sorts), kind)
        except ValueError as exc:
            raise ParseError(str(exc), name.span) from None

    # -- terms and atoms ----------------------------------------------------

    def parse_time_term(self) -> Term:
        tok = self.next()
        if tok.kind == "int":
            return TimePoint(int(tok.text))
        if tok.kind == "-":
            bad = self.peek()
            raise ParseError("negative time point", bad.span if bad.kind == "int" else tok.span)
        if tok.kind != "ident":
            raise ParseError(f"expected a time term, found {tok.text!r}", tok.span)
        if not tok.text[0].isupper() or "." in tok.text:
            raise ParseError(f"time variables are dot-free and start uppercase: {tok.text!r}", tok.span)
        sign = self.peek()
        if sign.kind in ("+", "-"):
            self.next()
            k = self.expect("int", "an integer offset")
            shift = int(k.text) if sign.kind == "+" else -int(k.text)
            return shifted(tok.text, shift)
        return TimeVar(tok.text)

    def parse_object_term(self, allow_vars: bool) -> Term:
        tok = self.next()
        if tok.kind == "int":
            raise ParseError("object positions cannot hold numbers", tok.span)
        if tok.kind != "ident":
            raise ParseError(f"expected an object term, found {tok.text!r}", tok.span)
        if "." in tok.text:
            raise ParseError(f"object terms are dot-free: {tok.text!r}", tok.span)
        if tok.text[0].isupper():
            if not allow_vars:
                raise ParseError(f"variable {tok.text} not allowed in a fact", tok.span)
            return ObjectVar(tok.text)
        return ObjectConst(tok.text)

    def parse_atom(self, decls: dict[str, PredicateDecl], allow_vars: bool) -> Atom:
        name = self.expect("ident", "an atom")
        decl = decls.get(name.text)
        if decl is None:
            raise ParseError(f"predicate {name.text} is not declared", name.span)
        args: list[Term] = []
        if self.peek().kind == "(":
            self.next()
            if self.peek().kind != ")":
                i = 0
                while True:
                    if i >= decl.arity:
                        raise self.fail(f"{decl.name} takes {decl.arity} arguments")
                    if decl.positions[i] is Sort.TIME:
                        args.append(self.parse_time_term())
                    else:
                        args.append(self.parse_object_term(allow_vars))
                    i += 1
                    if self.peek().kind == ",":
                        self.next()
                    else:
                        break
            self.expect(")", "')'")
        if len(args) != decl.arity:
            raise ParseError(f"{decl.name} takes {decl.arity} arguments, got {len(args)}", name.span)
        if not allow_vars:
            for a in args:
                if isinstance(a, (TimeVar, TimeVarPlus)):
                    raise ParseError(f"variable in a fact over {decl.name}", name.span)
        return Atom(decl, tuple(args))


def parse_program(text: str, filename: str = "<string>") -> Query:
    """Parse a ``.tdl`` file: declarations, ``.output`` directives, then rules.

    The result is validated; any model-level violation raises
    :class:`ProgramValidationError` carrying the full report.
    """
    p = _Parser(text, filename)
    decls: dict[str, PredicateDecl] = {}
    outputs: list[str] = []
    rules: list[Rule] = []
    while p.peek().kind != "eof":
        tok = p.peek()
        if tok.kind == ".":
            p.next()
            word = p.expect("ident", "'decl' or 'output'")
            if word.text == "decl":
                decl = p.parse_decl()
                if decl.name in decls and decls[decl.name] != decl:
                    raise ParseError(f"conflicting declaration of {decl.name}", word.span)
                decls[decl.name] = decl
            elif word.text == "output":
                out = p.expect("ident", "a predicate name")
                if out.text not in decls:
                    raise ParseError(f"output predicate {out.text} is not declared", out.span)
                outputs.append(out.text)
            else:
                raise ParseError(f"unknown directive .{word.text}", word.span)
            continue
        head = p.parse_atom(decls, allow_vars=True)
        body: list[Atom] = []
        if p.peek().kind == ":-":
            p.next()
            while True:
                body.append(p.parse_atom(decls, allow_vars=True))
                if p.peek().kind == ",":
                    p.next()
                else:
                    break
        p.expect(".", "'.' at end of rule")
        rules.append(Rule(head, tuple(body)))
    if not outputs:
        raise ParseError("missing .output directive", p.peek().span)
    program = Program(tuple(decls.values()), tuple(rules))
    query = Query(program, tuple(decls[n] for n in dict.fromkeys(outputs)))
    violations = validate_query(query)
    if violations:
        raise ProgramValidationError(violations, filename)
    return query


def _parse_facts(
    text: str,
    filename: str,
    context: Program | None,
) -> list[Atom]:
    p = _Parser(text, filename)
    decls: dict[str, PredicateDecl] = dict(context.decl_map) if context else {}
    facts: list[Atom] = []
    while p.peek().kind != "eof":
        name_tok = p.peek()
        if context is None:
            atom = _parse_untyped_fact(p, decls)
        else:
            atom = p.parse_atom(decls, allow_vars=False)
        if context is not None and atom.pred.kind is not Kind.EDB:
            raise ParseError(f"fact over IDB predicate {atom.pred.name}", name_tok.span)
        p.expect(".", "'.' at end of fact")
        facts.append(atom)
    return facts


def _parse_untyped_fact(p: _Parser, decls: dict[str, PredicateDecl]) -> Atom:
    """Parse a fact without a program context, inferring the declaration.

    Identifier arguments are object constants; an integer is a time point and
    may only occupy the final position.  Inferred declarations must stay
    consistent across the file.
    """
    name = p.expect("ident", "a fact")
    args: list[Term] = []
    if p.peek().kind == "(":
        p.next()
        if p.peek().kind != ")":
            while True:
                tok = p.next()
                if tok.kind == "int":
                    args.append(TimePoint(int(tok.text)))
                elif tok.kind == "-":
                    raise ParseError("negative time point", tok.span)
                elif tok.kind == "ident":
                    if tok.text[0].isupper():
                        raise ParseError(f"variable {tok.text} not allowed in a fact", tok.span)
                    if "." in tok.text:
                        raise ParseError(f"object terms are dot-free: {tok.text!r}", tok.span)
                    args.append(ObjectConst(tok.text))
                else:
                    raise ParseError(f"expected a term, found {tok.text!r}", tok.span)
                if p.peek().kind == ",":
                    p.next()
                else:
                    break
        p.expect(")", "')'")
    sorts = []
    for i, a in enumerate(args):
        if isinstance(a, TimePoint):
            if i != len(args) - 1:
                raise ParseError("time point outside the final position", name.span)
            sorts.append(Sort.TIME)
        else:
            sorts.append(Sort.OBJECT)
    decl = PredicateDecl(name.text, tuple(sorts), Kind.EDB)
    known = decls.get(name.text)
    if known is None:
        decls[name.text] = decl
    elif known != decl:
        raise ParseError(f"fact over {name.text} conflicts with an earlier use", name.span)
    else:
        decl = known
    return Atom(decl, tuple(args))


def parse_dataset(text: str, filename: str = "<string>", context: Program | None = None) -> Dataset:
    """Parse a ``.facts`` file into a dataset (rigid and temporal EDB facts)."""
    return frozenset(_parse_facts(text, filename, context))


def parse_extended_dataset(
    text: str, filename: str = "<string>", context: Program | None = None
) -> frozenset:
    """Like :func:`parse_dataset` but admits IDB facts (needs a context for kinds)."""
    p = _Parser(text, filename)
    decls: dict[str, PredicateDecl] = dict(context.decl_map) if context else {}
    facts: list[Atom] = []
    while p.peek().kind != "eof":
        if context is None:
            atom = _parse_untyped_fact(p, decls)
        else:
            atom = p.parse_atom(decls, allow_vars=False)
        p.expect(".", "'.' at end of fact")
        facts.append(atom)
    return frozenset(facts)


def parse_stream(text: str, filename: str = "<string>", context: Program | None = None) -> Stream:
    """Parse a ``.stream`` file: temporal EDB facts grouped by timestamp.

    Rigid facts are rejected; the stream engine receives rigid background
    facts once, at initialization, never on a tick.
    """
    facts = _parse_facts(text, filename, context)
    ticks: dict[int, set[Atom]] = {}
    for f in facts:
        if f.pred.is_rigid:
            raise ParseError(
                f"rigid fact over {f.pred.name} in a stream file (rigid facts belong in the background dataset)",
                SourceSpan(filename, 1, 1),
            )
        ticks.setdefault(f.time_value, set()).add(f)
    return {t: frozenset(fs) for t, fs in sorted(ticks.items())}


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------


def serialize_term(term: Term) -> str:
    if isinstance(term, (ObjectConst, ObjectVar, TimeVar)):
        return term.name
    if isinstance(term, TimePoint):
        return str(term.value)
    if isinstance(term, TimeVarPlus):
        sign = "+" if term.shift >= 0 else "-"
        return f"{term.name}{sign}{abs(term.shift)}"
    raise TypeError(f"not a term: {term!r}")


def serialize_atom(atom: Atom) -> str:
    if not atom.args:
        return atom.pred.name
    return f"{atom.pred.name}({','.join(serialize_term(a) for a in atom.args)})"


def serialize_fact(fact: Atom) -> str:
    return serialize_atom(fact) + "."


def serialize_rule(rule: Rule) -> str:
    if not rule.body:
        return serialize_fact(rule.head)
    body = ", ".join(serialize_atom(a) for a in rule.body)
    return f"{serialize_atom(rule.head)} :- {body}."


def serialize_decl(decl: PredicateDecl) -> str:
    sorts = ", ".join(s.value for s in decl.positions)
    return f".decl {decl.name}({sorts}) {decl.kind.value}"


def serialize_program(program: Program) -> str:
    lines = [serialize_decl(d) for d in program.decls]
    if program.rules:
        lines.append("")
        lines.extend(serialize_rule(r) for r in program.rules)
    return "\n".join(lines) + "\n"


def serialize_query(query: Query) -> str:
    lines = [serialize_decl(d) for d in query.program.decls]
    lines.extend(f".output {d.name}" for d in query.outputs)
    if query.program.rules:
        lines.append("")
        lines.extend(serialize_rule(r) for r in query.program.rules)
    return "\n".join(lines) + "\n"


def serialize_dataset(facts: Iterable[Atom]) -> str:
    return "\n".join(sorted(serialize_fact(f) for f in facts)) + "\n"


def serialize_stream(stream: Stream) -> str:
    lines = []
    for t in sorted(stream):
        lines.extend(sorted(serialize_fact(f) for f in stream[t]))
    return "\n".join(lines) + "\n"


def serialize(value) -> str:
    """Serialize a query, program, stream, or fact set to canonical text."""
    if isinstance(value, Query):
        return serialize_query(value)
    if isinstance(value, Program):
        return serialize_program(value)
    if isinstance(value, dict):
        return serialize_stream(value)
    if isinstance(value, (set, frozenset)):
        return serialize_dataset(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")
