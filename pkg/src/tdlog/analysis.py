"""Syntactic analysis of forward propagation: offsets, radii, subqueries, grounding.

The central definition: the offset of a time term is 0 for a bare variable
and k for the point k or the term t+k; the radius of a rule is the maximum
difference between its head time offset and a body time offset (0 for rules
with rigid heads).  A rule is forward-propagating when it is plain Datalog,
or when it mentions no time points, has a single time variable occurring in
the head, and no body atom looks *forward* of the head.

The last condition is deliberately stronger than "radius is non-negative":
under the weaker reading a rule like ``H(T+1) :- A(T+3), B(T)`` would count
as forward-propagating even though its derivations consult facts later than
the derived fact, which breaks the locality every algorithm here relies on.
We enforce offset(body) <= offset(head) for every body time argument.

Empty-body rules (facts written inside a program) are treated as data, not
as rules subject to the forward-propagation conditions; evaluation hoists
them into the dataset.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .model import (
    Atom,
    Kind,
    ObjectConst,
    ObjectVar,
    PredicateDecl,
    Program,
    Query,
    Rule,
    Sort,
    Term,
    TimePoint,
    TimeVar,
    TimeVarPlus,
)


class NotForwardPropagatingError(ValueError):
    pass


def offset_of(term: Term) -> int:
    """Offset of a time term: 0 for a variable, k for the point k or t+k."""
    if isinstance(term, TimeVar):
        return 0
    if isinstance(term, TimePoint):
        return term.value
    if isinstance(term, TimeVarPlus):
        return term.shift
    raise ValueError(f"not a time term: {term!r}")


def _is_datalog_rule(rule: Rule) -> bool:
    return all(atom.pred.is_rigid for atom in rule.atoms())


def fp_violation(rule: Rule) -> str | None:
    """Reason the rule is not forward-propagating, or None if it is.

    Facts inside a program are data and pass vacuously; Datalog rules pass.
    """
    if rule.is_fact() and rule.head.is_ground():
        return None
    if _is_datalog_rule(rule):
        return None
    time_vars: set[str] = set()
    for atom in rule.atoms():
        t = atom.time_arg
        if isinstance(t, TimePoint):
            return "contains a time point"
        if isinstance(t, TimeVar):
            time_vars.add(t.name)
        elif isinstance(t, TimeVarPlus):
            time_vars.add(t.name)
    if len(time_vars) > 1:
        return f"multiple time variables: {', '.join(sorted(time_vars))}"
    head_t = rule.head.time_arg
    if head_t is None or not time_vars:
        return "time variable does not occur in the head"
    head_off = offset_of(head_t)
    for atom in rule.body:
        t = atom.time_arg
        if t is not None and offset_of(t) > head_off:
            return (
                f"body offset {offset_of(t)} exceeds head offset {head_off}"
                " (backward time dependence)"
            )
    return None


def is_forward_propagating(rule: Rule) -> bool:
    return fp_violation(rule) is None


def query_is_fp(query: Query) -> bool:
    return all(is_forward_propagating(r) for r in query.program.rules)


def require_fp(program: Program) -> None:
    for idx, rule in enumerate(program.rules):
        reason = fp_violation(rule)
        if reason is not None:
            raise NotForwardPropagatingError(f"rule {idx}: {reason}")


def rule_radius(rule: Rule) -> int:
    """Radius of a forward-propagating rule.

    Zero for rigid heads, Datalog rules, facts, and rules whose body carries
    no time argument; otherwise the maximum head-minus-body offset difference.
    """
    head_t = rule.head.time_arg
    if head_t is None:
        return 0
    head_off = offset_of(head_t)
    diffs = [
        head_off - offset_of(atom.time_arg)  # type: ignore[arg-type]
        for atom in rule.body
        if atom.time_arg is not None
    ]
    return max(diffs, default=0)


def query_radius(query: Query) -> int:
    radii = [rule_radius(r) for r in query.program.rules if is_forward_propagating(r)]
    return max(radii, default=0)


@dataclass(frozen=True)
class RuleRadius:
    index: int
    head_offset: int | None  # None when the head is rigid
    min_body_diff: int | None  # smallest head-minus-body offset difference
    radius: int | None  # None when the rule is not forward-propagating
    violation: str | None


@dataclass(frozen=True)
class RadiusReport:
    per_rule: tuple[RuleRadius, ...]
    query_radius: int
    is_fp: bool
    is_object_ground: bool
    is_non_recursive: bool


def classify(query: Query) -> RadiusReport:
    """Per-rule radii plus the query-level fp / object-ground / non-recursive flags."""
    per_rule = []
    for idx, rule in enumerate(query.program.rules):
        violation = fp_violation(rule)
        head_t = rule.head.time_arg
        head_off = offset_of(head_t) if head_t is not None else None
        diffs = [
            (head_off or 0) - offset_of(atom.time_arg)  # type: ignore[arg-type]
            for atom in rule.body
            if atom.time_arg is not None
        ] if head_t is not None else []
        per_rule.append(
            RuleRadius(
                index=idx,
                head_offset=head_off,
                min_body_diff=min(diffs) if diffs else None,
                radius=rule_radius(rule) if violation is None else None,
                violation=violation,
            )
        )
    is_fp = all(r.violation is None for r in per_rule)
    og = not _has_object_vars(query.program)
    nr = _dependency_graph_acyclic(query.program)
    radius = max((r.radius for r in per_rule if r.radius is not None), default=0)
    return RadiusReport(tuple(per_rule), radius, is_fp, og, nr)


def _has_object_vars(program: Program) -> bool:
    return any(
        isinstance(arg, ObjectVar)
        for rule in program.rules
        for atom in rule.atoms()
        for arg in atom.args
    )


def _dependency_graph_acyclic(program: Program) -> bool:
    """Acyclicity of the head-to-body predicate dependency graph."""
    edges: dict[str, set[str]] = {}
    for rule in program.rules:
        edges.setdefault(rule.head.pred.name, set()).update(a.pred.name for a in rule.body)
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    def visit(node: str) -> bool:
        state[node] = 1
        for succ in edges.get(node, ()):
            mark = state.get(succ)
            if mark == 1:
                return False
            if mark is None and not visit(succ):
                return False
        state[node] = 2
        return True

    return all(state.get(n) == 2 or visit(n) for n in list(edges))


def subquery_at_radius(query: Query, k: int) -> Query:
    """The subquery keeping exactly the rules of radius at most k."""
    require_fp(query.program)
    rules = tuple(r for r in query.program.rules if rule_radius(r) <= k)
    return Query(Program(query.program.decls, rules), query.outputs)


# ---------------------------------------------------------------------------
# Object grounding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectDomain:
    objects: frozenset[str]

    @staticmethod
    def of(*names: str) -> "ObjectDomain":
        return ObjectDomain(frozenset(names))


class ObjectGrounding:
    """Result of grounding a query's object variables over a fixed domain.

    Every rule is instantiated for every assignment of its object variables
    over the domain plus the query's own constants, and each ground atom
    P(o1,...,ok[,t]) is specialized to a fresh nullary or unary-temporal
    predicate named ``P.o1.....ok``.  ``encode_fact`` / ``decode_fact``
    translate datasets between the two vocabularies.
    """

    def __init__(self, query: Query, domain: ObjectDomain):
        from .model import fresh_name  # local to avoid polluting the module surface

        require_fp(query.program)
        objects = sorted(domain.objects | query.program.constants())
        if _has_object_vars(query.program) and not objects:
            raise ValueError("cannot ground object variables over an empty domain")
        self.objects = tuple(objects)
        self._source = query

        taken = {d.name for d in query.program.decls}
        self._spec_names: dict[tuple[str, tuple[str, ...]], str] = {}

        def specialized(decl: PredicateDecl, consts: tuple[str, ...]) -> PredicateDecl:
            key = (decl.name, consts)
            name = self._spec_names.get(key)
            if name is None:
                name = decl.name if not consts else f"{decl.name}.{'.'.join(consts)}"
                if consts and name in taken:
                    name = fresh_name(name + ".g", taken)
                taken.add(name)
                self._spec_names[key] = name
            positions = (Sort.TIME,) if decl.is_temporal else ()
            return PredicateDecl(name, positions, decl.kind)

        decls: dict[str, PredicateDecl] = {}
        rules: list[Rule] = []

        def specialize_atom(atom: Atom) -> Atom:
            consts = tuple(
                arg.name  # type: ignore[union-attr]
                for arg in atom.object_args
            )
            decl = specialized(atom.pred, consts)
            decls[decl.name] = decl
            time = atom.time_arg
            return Atom(decl, (time,) if time is not None else ())

        for rule in query.program.rules:
            ovars = sorted(
                {
                    arg.name
                    for atom in rule.atoms()
                    for arg in atom.args
                    if isinstance(arg, ObjectVar)
                }
            )
            for combo in itertools.product(self.objects, repeat=len(ovars)):
                env = dict(zip(ovars, combo))

                def subst(atom: Atom) -> Atom:
                    args = tuple(
                        ObjectConst(env[a.name]) if isinstance(a, ObjectVar) else a
                        for a in atom.args
                    )
                    return Atom(atom.pred, args)

                rules.append(Rule(specialize_atom(subst(rule.head)),
                                  tuple(specialize_atom(subst(b)) for b in rule.body)))

        # every ground variant of an output predicate is an answer predicate,
        # whether or not any rule happens to derive it
        outputs: list[PredicateDecl] = []
        for out in query.outputs:
            for combo in itertools.product(self.objects, repeat=out.object_arity):
                decl = specialized(out, combo)
                decls[decl.name] = decl
                outputs.append(decl)

        self.grounded = Query(Program(tuple(decls.values()), tuple(rules)), tuple(outputs))
        self._decode = {
            name: (base, consts) for (base, consts), name in self._spec_names.items()
        }

    def encode_fact(self, fact: Atom) -> Atom:
        consts = tuple(a.name for a in fact.object_args)  # type: ignore[union-attr]
        key = (fact.pred.name, consts)
        name = self._spec_names.get(key)
        if name is None:
            # a fact over objects the grounding never saw; keep it fresh but inert
            name = fact.pred.name if not consts else f"{fact.pred.name}.{'.'.join(consts)}"
        positions = (Sort.TIME,) if fact.pred.is_temporal else ()
        decl = PredicateDecl(name, positions, fact.pred.kind)
        time = fact.time_arg
        return Atom(decl, (time,) if time is not None else ())

    def encode(self, facts) -> frozenset:
        return frozenset(self.encode_fact(f) for f in facts)

    def decode_fact(self, fact: Atom) -> Atom:
        base, consts = self._decode[fact.pred.name]
        decl = self._source.program.decl_map[base]
        args: list = [ObjectConst(c) for c in consts]
        if decl.is_temporal:
            args.append(fact.args[-1])
        return Atom(decl, tuple(args))

    def decode(self, facts) -> frozenset:
        return frozenset(self.decode_fact(f) for f in facts)


def ground_objects(query: Query, domain: ObjectDomain) -> Query:
    """Object-ground, object-term-free version of the query over the domain.

    Semantically equivalent on datasets over the domain, up to the
    predicate-specialization encoding of facts (see :class:`ObjectGrounding`).
    """
    return ObjectGrounding(query, domain).grounded


def has_object_terms(query: Query) -> bool:
    return any(
        isinstance(arg, (ObjectVar, ObjectConst))
        for rule in query.program.rules
        for atom in rule.atoms()
        for arg in atom.args
    ) or any(d.object_arity > 0 for d in query.outputs)
