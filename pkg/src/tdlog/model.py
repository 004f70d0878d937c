"""Core data model for temporal Datalog: terms, predicates, rules, programs, queries.

Everything here is an immutable value; instances can be shared freely across
threads.  Construction enforces local well-formedness (arities, sorts, term
shape); program-level rules such as safety live in :func:`validate_program`.

Time points are plain Python ints (arbitrary precision).  Complexity claims
in the literature for this query language presuppose unary-coded numbers;
that is a cost convention, not a storage format, so we do not mimic it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union


class Sort(enum.Enum):
    OBJECT = "object"
    TIME = "time"


class Kind(enum.Enum):
    EDB = "edb"
    IDB = "idb"


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectConst:
    name: str


@dataclass(frozen=True)
class ObjectVar:
    name: str


@dataclass(frozen=True)
class TimePoint:
    value: int

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError(f"time point must be non-negative, got {self.value}")


@dataclass(frozen=True)
class TimeVar:
    name: str


@dataclass(frozen=True)
class TimeVarPlus:
    """A time variable shifted by a non-zero integer, e.g. ``T+2`` or ``T-1``.

    A zero shift has no distinct representation: use :func:`shifted`, which
    collapses it to a plain :class:`TimeVar` (canonical form).
    """

    name: str
    shift: int

    def __post_init__(self) -> None:
        if self.shift == 0:
            raise ValueError("zero shift is written as a bare time variable; use shifted()")


Term = Union[ObjectConst, ObjectVar, TimePoint, TimeVar, TimeVarPlus]
TimeTerm = Union[TimePoint, TimeVar, TimeVarPlus]
ObjectTerm = Union[ObjectConst, ObjectVar]


def shifted(name: str, shift: int) -> TimeTerm:
    """Canonical constructor for ``T+k`` terms; ``k == 0`` yields ``TimeVar``."""
    if shift == 0:
        return TimeVar(name)
    return TimeVarPlus(name, shift)


def is_object_term(term: Term) -> bool:
    return isinstance(term, (ObjectConst, ObjectVar))


def is_time_term(term: Term) -> bool:
    return isinstance(term, (TimePoint, TimeVar, TimeVarPlus))


# ---------------------------------------------------------------------------
# Predicates and atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredicateDecl:
    """A declared predicate: name, position sorts, and EDB/IDB kind.

    Only two layouts exist: rigid (all positions object) and temporal (last
    position time, all earlier positions object).  Anything else is rejected
    at construction.
    """

    name: str
    positions: tuple[Sort, ...]
    kind: Kind

    def __post_init__(self) -> None:
        n = len(self.positions)
        rigid = all(s is Sort.OBJECT for s in self.positions)
        temporal = (
            n >= 1
            and self.positions[-1] is Sort.TIME
            and all(s is Sort.OBJECT for s in self.positions[:-1])
        )
        if not (rigid or temporal):
            raise ValueError(f"predicate {self.name}: positions must be rigid or temporal")

    @property
    def arity(self) -> int:
        return len(self.positions)

    @property
    def is_temporal(self) -> bool:
        return bool(self.positions) and self.positions[-1] is Sort.TIME

    @property
    def is_rigid(self) -> bool:
        return not self.is_temporal

    @property
    def object_arity(self) -> int:
        return self.arity - (1 if self.is_temporal else 0)


@dataclass(frozen=True)
class Atom:
    pred: PredicateDecl
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        if len(self.args) != self.pred.arity:
            raise ValueError(
                f"{self.pred.name}: expected {self.pred.arity} arguments, got {len(self.args)}"
            )
        for arg, sort in zip(self.args, self.pred.positions):
            if sort is Sort.OBJECT and not is_object_term(arg):
                raise ValueError(f"{self.pred.name}: object position holds {arg!r}")
            if sort is Sort.TIME and not is_time_term(arg):
                raise ValueError(f"{self.pred.name}: time position holds {arg!r}")

    @property
    def time_arg(self) -> TimeTerm | None:
        if self.pred.is_temporal:
            return self.args[-1]  # type: ignore[return-value]
        return None

    @property
    def object_args(self) -> tuple[Term, ...]:
        return self.args[: self.pred.object_arity]

    def is_ground(self) -> bool:
        return not any(isinstance(a, (ObjectVar, TimeVar, TimeVarPlus)) for a in self.args)

    def is_fact(self) -> bool:
        """Ground and function-free: no variables, the time argument (if any) a point."""
        return self.is_ground()

    @property
    def time_value(self) -> int:
        t = self.time_arg
        if not isinstance(t, TimePoint):
            raise ValueError(f"{self.pred.name}: no ground time argument")
        return t.value

    def variables(self) -> set[str]:
        out: set[str] = set()
        for a in self.args:
            if isinstance(a, (ObjectVar, TimeVar)):
                out.add(a.name)
            elif isinstance(a, TimeVarPlus):
                out.add(a.name)
        return out


# A fact is just a ground atom; datasets are EDB-only, extended datasets are not.
Fact = Atom
Dataset = frozenset  # frozenset[Atom], EDB facts
ExtendedDataset = frozenset  # frozenset[Atom], arbitrary facts
Stream = dict  # dict[int, frozenset[Atom]], temporal EDB facts grouped by tick


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...] = ()

    def is_fact(self) -> bool:
        return not self.body

    def atoms(self) -> Iterable[Atom]:
        yield self.head
        yield from self.body


# ---------------------------------------------------------------------------
# Programs and queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Program:
    """A finite rule set with explicit predicate declarations.

    ``decls`` is normalized to name-sorted order so that structurally equal
    programs compare equal regardless of declaration order in source text.
    Rules keep their source order; duplicates are dropped (a program is a
    set of rules).
    """

    decls: tuple[PredicateDecl, ...]
    rules: tuple[Rule, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(set(self.decls), key=lambda d: d.name))
        names = [d.name for d in ordered]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"conflicting declarations for: {', '.join(dupes)}")
        seen: set[Rule] = set()
        rules = []
        for r in self.rules:
            if r not in seen:
                seen.add(r)
                rules.append(r)
        object.__setattr__(self, "decls", ordered)
        object.__setattr__(self, "rules", tuple(rules))

    @cached_property
    def decl_map(self) -> Mapping[str, PredicateDecl]:
        return {d.name: d for d in self.decls}

    def constants(self) -> set[str]:
        out: set[str] = set()
        for rule in self.rules:
            for atom in rule.atoms():
                for arg in atom.args:
                    if isinstance(arg, ObjectConst):
                        out.add(arg.name)
        return out


@dataclass(frozen=True)
class Query:
    """A program plus its output predicates.

    In source this is always a single ``.output``; object grounding can split
    an output predicate into one specialized predicate per ground object
    tuple, so the model carries a non-empty tuple.  ``output`` is the
    single-output accessor used everywhere grounding is not involved.
    """

    program: Program
    outputs: tuple[PredicateDecl, ...]

    def __post_init__(self) -> None:
        if not self.outputs:
            raise ValueError("query needs at least one output predicate")

    @property
    def output(self) -> PredicateDecl:
        if len(self.outputs) != 1:
            raise ValueError("query has a specialized output family, not a single output")
        return self.outputs[0]

    @property
    def output_names(self) -> frozenset[str]:
        return frozenset(d.name for d in self.outputs)


def idb_signature(query: Query) -> frozenset[PredicateDecl]:
    """All IDB predicates declared in the query's program (always contains the outputs)."""
    return frozenset(d for d in query.program.decls if d.kind is Kind.IDB)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    rule_index: int | None
    reason: str

    def __str__(self) -> str:
        where = "query" if self.rule_index is None else f"rule {self.rule_index}"
        return f"{where}: {self.reason}"


ValidationReport = list  # list[Violation]


def validate_program(program: Program) -> list[Violation]:
    """Check program-level invariants; returns one violation per breach.

    An empty report means the program is well-formed.  Violations are data,
    not exceptions: callers (the parser, the CLI) decide how to surface them.
    """
    report: list[Violation] = []
    declared = program.decl_map
    for idx, rule in enumerate(program.rules):
        for atom in rule.atoms():
            known = declared.get(atom.pred.name)
            if known is None:
                report.append(Violation(idx, f"predicate {atom.pred.name} is not declared"))
            elif known != atom.pred:
                report.append(
                    Violation(idx, f"predicate {atom.pred.name} used with a conflicting signature")
                )
        if rule.body:
            if rule.head.pred.kind is Kind.EDB:
                report.append(
                    Violation(idx, f"EDB predicate {rule.head.pred.name} in the head of a rule")
                )
            body_vars: set[str] = set()
            for atom in rule.body:
                body_vars |= atom.variables()
            loose = rule.head.variables() - body_vars
            if loose:
                report.append(
                    Violation(idx, f"unsafe: head variables not in body: {', '.join(sorted(loose))}")
                )
        else:
            if not rule.head.is_ground():
                report.append(Violation(idx, "fact with variables"))
    return report


def validate_query(query: Query) -> list[Violation]:
    """Program invariants plus the output-predicate conditions."""
    report = validate_program(query.program)
    declared = query.program.decl_map
    for out in query.outputs:
        if declared.get(out.name) != out:
            report.append(Violation(None, f"output predicate {out.name} is not declared"))
            continue
        if out.kind is not Kind.IDB:
            report.append(Violation(None, f"output predicate {out.name} must be IDB"))
        for idx, rule in enumerate(query.program.rules):
            if any(atom.pred.name == out.name for atom in rule.body):
                report.append(
                    Violation(idx, f"output predicate {out.name} occurs in a rule body")
                )
    return report


# ---------------------------------------------------------------------------
# Fact-set helpers
# ---------------------------------------------------------------------------


def check_dataset(facts: Iterable[Atom], *, edb_only: bool = True) -> frozenset[Atom]:
    """Validate and freeze a set of facts (a dataset, or an extended dataset)."""
    out = []
    for f in facts:
        if not f.is_ground():
            raise ValueError(f"dataset fact with variables: {f.pred.name}")
        if edb_only and f.pred.kind is not Kind.EDB:
            raise ValueError(f"dataset may only contain EDB facts, got {f.pred.name}")
        out.append(f)
    return frozenset(out)


def fresh_name(base: str, taken: set[str]) -> str:
    """First name not in ``taken``, derived from ``base`` by numeric suffixes."""
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"
