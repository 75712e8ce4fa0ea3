"""Core assertion language: terms, heap terms, constraints, atoms, goals, rules.

Integer terms are kept as normalized linear expressions; heap terms are kept
as flat star-lists of cells and heap variables.  All values are immutable.
Variable identity is the numeric id, never the display name.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Union


class KindError(Exception):
    """A substitution or argument mixed integer and heap kinds."""


class StampError(Exception):
    """Timestamp discipline violated (e.g. killing an already-killed atom)."""


# ---------------------------------------------------------------------------
# variables and sessions


class Var:
    """A variable; identity is the numeric id."""

    __slots__ = ("vid", "name", "heap")

    def __init__(self, vid: int, name: str, heap: bool = False):
        object.__setattr__(self, "vid", vid)
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "heap", heap)

    def __setattr__(self, *a):
        raise AttributeError("Var is immutable")

    def __eq__(self, other):
        return isinstance(other, Var) and self.vid == other.vid \
            and self.heap == other.heap and self.name == other.name

    def __hash__(self):
        return self.vid

    def __lt__(self, other):
        return self.vid < other.vid

    def __repr__(self):
        return f"{'H' if self.heap else ''}${self.name}#{self.vid}"


class Session:
    """Issues unique variable ids for one prover instance (not thread-safe)."""

    def __init__(self):
        self._next = 0

    def fresh(self, name: str, heap: bool = False) -> Var:
        v = Var(self._next, name, heap)
        self._next += 1
        return v

    def fresh_like(self, v: Var) -> Var:
        base = v.name.split("'")[0]
        return self.fresh(base + "'" + str(self._next), v.heap)


# ---------------------------------------------------------------------------
# integer terms: normalized linear expressions


@dataclass(frozen=True)
class Term:
    """Linear expression: sum of coeff*var plus an integer constant.

    ``coeffs`` is sorted by variable id and never holds zero coefficients.
    """

    coeffs: tuple[tuple[Var, int], ...] = ()
    const: int = 0

    @staticmethod
    def of(x: Union[int, Var, "Term"]) -> "Term":
        if isinstance(x, Term):
            return x
        if isinstance(x, Var):
            if x.heap:
                raise KindError(f"heap variable {x.name} used as integer term")
            return Term(((x, 1),), 0)
        return Term((), int(x))

    @staticmethod
    def build(items: dict[Var, int], const: int) -> "Term":
        coeffs = tuple(sorted(((v, c) for v, c in items.items() if c != 0),
                              key=lambda p: p[0].vid))
        return Term(coeffs, const)

    def __add__(self, other) -> "Term":
        other = Term.of(other)
        items = dict(self.coeffs)
        for v, c in other.coeffs:
            items[v] = items.get(v, 0) + c
        return Term.build(items, self.const + other.const)

    def __sub__(self, other) -> "Term":
        return self + Term.of(other).scaled(-1)

    def scaled(self, k: int) -> "Term":
        return Term(tuple((v, c * k) for v, c in self.coeffs if c * k != 0),
                    self.const * k)

    @property
    def is_const(self) -> bool:
        return not self.coeffs

    @property
    def as_var(self) -> Optional[Var]:
        if len(self.coeffs) == 1 and self.const == 0 and self.coeffs[0][1] == 1:
            return self.coeffs[0][0]
        return None

    def vars(self) -> Iterator[Var]:
        return (v for v, _ in self.coeffs)

    def __repr__(self):
        return pretty_term(self)


# ---------------------------------------------------------------------------
# heap terms: flat star-lists


@dataclass(frozen=True)
class Cell:
    addr: Term
    value: Term

    def vars(self) -> Iterator[Var]:
        return itertools.chain(self.addr.vars(), self.value.vars())

    def __repr__(self):
        return f"({pretty_term(self.addr)} -> {pretty_term(self.value)})"


Factor = Union[Cell, Var]  # a heap-kinded Var or a singleton cell


@dataclass(frozen=True)
class HeapTerm:
    """Disjoint union of factors.  ``emp`` is the empty factor tuple."""

    factors: tuple[Factor, ...] = ()

    @staticmethod
    def of(x: Union[Var, Cell, "HeapTerm"]) -> "HeapTerm":
        if isinstance(x, HeapTerm):
            return x
        if isinstance(x, Cell):
            return HeapTerm((x,))
        if isinstance(x, Var):
            if not x.heap:
                raise KindError(f"integer variable {x.name} used as heap term")
            return HeapTerm((x,))
        raise TypeError(x)

    @staticmethod
    def star(parts: Iterable[Union[Var, Cell, "HeapTerm"]]) -> "HeapTerm":
        out: list[Factor] = []
        for p in parts:
            out.extend(HeapTerm.of(p).factors)
        return HeapTerm(tuple(out))

    @property
    def is_emp(self) -> bool:
        return not self.factors

    @property
    def as_var(self) -> Optional[Var]:
        if len(self.factors) == 1 and isinstance(self.factors[0], Var):
            return self.factors[0]
        return None

    def vars(self) -> Iterator[Var]:
        for f in self.factors:
            if isinstance(f, Var):
                yield f
            else:
                yield from f.vars()

    def __repr__(self):
        return pretty_hterm(self)


EMP = HeapTerm(())

Arg = Union[Term, HeapTerm]


# ---------------------------------------------------------------------------
# constraints

EQ = "="
NE = "!="
LE = "<="


@dataclass(frozen=True)
class Pure:
    """Normalized pure atom: ``expr op 0`` with op in {=, !=, <=}."""

    op: str
    expr: Term

    @staticmethod
    def make(lhs: Term, op: str, rhs: Term) -> "Pure":
        if op == "<":  # integers: a < b  <=>  a - b + 1 <= 0
            return Pure(LE, lhs - rhs + Term.of(1))
        if op == ">":
            return Pure.make(rhs, "<", lhs)
        if op == ">=":
            return Pure.make(rhs, "<=", lhs)
        if op not in (EQ, NE, LE):
            raise ValueError(op)
        return Pure(op, lhs - rhs)

    def vars(self) -> Iterator[Var]:
        return self.expr.vars()

    def __repr__(self):
        return pretty_constraint(self)


@dataclass(frozen=True)
class HeapEq:
    lhs: HeapTerm
    rhs: HeapTerm

    def vars(self) -> Iterator[Var]:
        return itertools.chain(self.lhs.vars(), self.rhs.vars())

    def __repr__(self):
        return pretty_constraint(self)


Constraint = Union[Pure, HeapEq]


# ---------------------------------------------------------------------------
# atoms, goals, rules


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Arg, ...]
    gen: int = 0
    kill: Optional[int] = None

    def vars(self) -> Iterator[Var]:
        for a in self.args:
            yield from a.vars()

    def same_shape(self, other: "Atom") -> bool:
        """Structural equality ignoring timestamps."""
        return self.pred == other.pred and self.args == other.args

    def __repr__(self):
        return pretty_atom(self)


def stamp(atom: Atom, event: str, clock: int) -> Atom:
    if event == "generated":
        return replace(atom, gen=clock, kill=None)
    if event == "killed":
        if atom.kill is not None:
            raise StampError(f"atom {atom} already killed at {atom.kill}")
        if clock < atom.gen:
            raise StampError(f"kill {clock} precedes gen {atom.gen}")
        return replace(atom, kill=clock)
    raise ValueError(event)


def _dedup(items: Iterable[Constraint]) -> tuple[Constraint, ...]:
    seen = set()
    out = []
    for c in items:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return tuple(out)


@dataclass(frozen=True)
class Goal:
    """Conjunction of constraints (a set) and recursive atoms (a multiset)."""

    constraints: tuple[Constraint, ...] = ()
    atoms: tuple[Atom, ...] = ()

    @staticmethod
    def make(constraints: Iterable[Constraint], atoms: Iterable[Atom]) -> "Goal":
        return Goal(_dedup(constraints), tuple(atoms))

    @property
    def is_final(self) -> bool:
        return not self.atoms

    def vars(self) -> set[Var]:
        cached = getattr(self, "_vars", None)
        if cached is not None:
            return cached
        out: set[Var] = set()
        for c in self.constraints:
            out.update(c.vars())
        for a in self.atoms:
            out.update(a.vars())
        object.__setattr__(self, "_vars", out)
        return out

    def without_atom(self, index: int) -> "Goal":
        return Goal(self.constraints,
                    self.atoms[:index] + self.atoms[index + 1:])

    def __repr__(self):
        return pretty_goal(self)


@dataclass(frozen=True)
class Rule:
    head: str
    params: tuple[Var, ...]
    body: Goal

    def vars(self) -> set[Var]:
        return set(self.params) | self.body.vars()

    def __repr__(self):
        return f"{self.head}({', '.join(p.name for p in self.params)}) :- {self.body!r}."


@dataclass
class PredInfo:
    name: str
    kinds: tuple[bool, ...]  # True = heap-kinded position
    rules: list[Rule] = field(default_factory=list)

    @property
    def arity(self) -> int:
        return len(self.kinds)


@dataclass
class Program:
    preds: dict[str, PredInfo] = field(default_factory=dict)

    def info(self, name: str) -> PredInfo:
        return self.preds[name]

    def rules(self, name: str) -> list[Rule]:
        return self.preds[name].rules


@dataclass(frozen=True)
class Entailment:
    lhs: Goal
    rhs: Goal

    @property
    def existentials(self) -> frozenset[Var]:
        cached = getattr(self, "_exist", None)
        if cached is None:
            cached = frozenset(self.rhs.vars() - self.lhs.vars())
            object.__setattr__(self, "_exist", cached)
        return cached

    def __repr__(self):
        return f"{self.lhs!r} |- {self.rhs!r}"


# ---------------------------------------------------------------------------
# substitution


class Subst:
    """Finite kind-preserving map from variables to terms/heap terms."""

    __slots__ = ("map",)

    def __init__(self, mapping: Optional[dict[Var, Arg]] = None):
        self.map: dict[Var, Arg] = {}
        if mapping:
            for v, t in mapping.items():
                self.bind(v, t)

    def bind(self, v: Var, t: Union[int, Var, Term, Cell, HeapTerm]) -> None:
        if v.heap:
            t = HeapTerm.of(t) if not isinstance(t, HeapTerm) else t
        else:
            if isinstance(t, (HeapTerm, Cell)) or (isinstance(t, Var) and t.heap):
                raise KindError(f"heap value bound to integer variable {v.name}")
            t = Term.of(t)
        self.map[v] = t

    def __contains__(self, v: Var) -> bool:
        return v in self.map

    def __len__(self) -> int:
        return len(self.map)

    def get(self, v: Var) -> Optional[Arg]:
        return self.map.get(v)

    def copy(self) -> "Subst":
        s = Subst()
        s.map = dict(self.map)
        return s

    def items(self):
        return self.map.items()

    def is_renaming(self) -> bool:
        """Injective, variables map to variables."""
        images = []
        for v, t in self.map.items():
            w = t.as_var
            if w is None:
                return False
            images.append(w)
        return len(set(images)) == len(images)

    # -- application ---------------------------------------------------

    def term(self, t: Term) -> Term:
        if not self.map or not any(v in self.map for v, _ in t.coeffs):
            return t
        items: dict[Var, int] = {}
        const = t.const
        for v, c in t.coeffs:
            r = self.map.get(v)
            if r is None:
                items[v] = items.get(v, 0) + c
            else:
                assert isinstance(r, Term)
                const += r.const * c
                for w, c2 in r.coeffs:
                    items[w] = items.get(w, 0) + c * c2
        return Term.build(items, const)

    def hterm(self, h: HeapTerm) -> HeapTerm:
        if not self.map:
            return h
        parts: list[Union[Cell, HeapTerm]] = []
        for f in h.factors:
            if isinstance(f, Var):
                r = self.map.get(f)
                parts.append(r if r is not None else HeapTerm.of(f))
            else:
                parts.append(Cell(self.term(f.addr), self.term(f.value)))
        return HeapTerm.star(parts)

    def arg(self, a: Arg) -> Arg:
        return self.hterm(a) if isinstance(a, HeapTerm) else self.term(a)

    def atom(self, a: Atom) -> Atom:
        return replace(a, args=tuple(self.arg(x) for x in a.args))

    def constraint(self, c: Constraint) -> Constraint:
        if isinstance(c, Pure):
            return Pure(c.op, self.term(c.expr))
        return HeapEq(self.hterm(c.lhs), self.hterm(c.rhs))

    def goal(self, g: Goal) -> Goal:
        return Goal.make((self.constraint(c) for c in g.constraints),
                         (self.atom(a) for a in g.atoms))

    def entailment(self, e: Entailment) -> Entailment:
        return Entailment(self.goal(e.lhs), self.goal(e.rhs))

    def resolve(self, max_rounds: int = 8) -> bool:
        """Substitute bindings into each other until closed.

        Returns False when a cycle prevents resolution.
        """
        for _ in range(max_rounds):
            changed = False
            for v, t in list(self.map.items()):
                t2 = self.arg(t)
                if t2 != t:
                    self.map[v] = t2
                    changed = True
            if not changed:
                break
        # a binding still mentioning a non-identity domain var indicates a cycle
        for v, t in self.map.items():
            for w in t.vars():
                img = self.map.get(w)
                if img is not None and img.as_var != w:
                    return False
        return True

    def __repr__(self):
        inner = ", ".join(f"{v.name}:={t!r}" for v, t in self.map.items())
        return "{" + inner + "}"


def apply_subst(target, theta: Subst):
    """Apply a substitution to a Goal, Entailment, Atom, constraint or term."""
    if isinstance(target, Goal):
        return theta.goal(target)
    if isinstance(target, Entailment):
        return theta.entailment(target)
    if isinstance(target, Atom):
        return theta.atom(target)
    if isinstance(target, (Pure, HeapEq)):
        return theta.constraint(target)
    if isinstance(target, Term):
        return theta.term(target)
    if isinstance(target, HeapTerm):
        return theta.hterm(target)
    raise TypeError(type(target))


def compose(first: Subst, second: Subst) -> Subst:
    """Substitution equal to applying ``first`` then ``second``."""
    out = Subst()
    for v, t in first.items():
        out.map[v] = second.arg(t)
    for v, t in second.items():
        if v not in out.map:
            out.map[v] = t
    return out


def fresh_rename(rule: Rule, session: Session) -> Rule:
    theta = Subst()
    for v in sorted(rule.vars(), key=lambda v: v.vid):
        theta.bind(v, session.fresh_like(v))
    params = []
    for p in rule.params:
        img = theta.get(p)
        params.append(img.as_var if img is not None else p)
    return Rule(rule.head, tuple(params), theta.goal(rule.body))


# ---------------------------------------------------------------------------
# pretty-printing (mirrors the parser grammar so print . parse is stable)


def pretty_term(t: Term) -> str:
    parts = []
    for v, c in t.coeffs:
        mag = abs(c)
        for _ in range(mag):
            parts.append(("-" if c < 0 else "+", v.name))
    if t.const != 0 or not parts:
        parts.append(("-" if t.const < 0 else "+", str(abs(t.const))))
    head_sign, head = parts[0]
    out = ("-" if head_sign == "-" else "") + head
    for sign, txt in parts[1:]:
        out += f" {sign} {txt}"
    return out


def _split_for_print(e: Term) -> tuple[Term, Term]:
    """Split ``e`` into (pos, neg) with e = pos - neg and no negative coeffs."""
    pos: dict[Var, int] = {}
    neg: dict[Var, int] = {}
    for v, c in e.coeffs:
        (pos if c > 0 else neg)[v] = abs(c)
    pc = e.const if e.const > 0 else 0
    nc = -e.const if e.const < 0 else 0
    return Term.build(pos, pc), Term.build(neg, nc)


def pretty_constraint(c: Constraint) -> str:
    if isinstance(c, Pure):
        pos, neg = _split_for_print(c.expr)
        return f"{pretty_term(pos)} {c.op} {pretty_term(neg)}"
    return f"{pretty_hterm(c.lhs)} ~ {pretty_hterm(c.rhs)}"


def pretty_hterm(h: HeapTerm) -> str:
    if h.is_emp:
        return "emp"
    return " * ".join(
        f.name if isinstance(f, Var) else repr(f) for f in h.factors)


def pretty_atom(a: Atom) -> str:
    args = ", ".join(
        pretty_hterm(x) if isinstance(x, HeapTerm) else pretty_term(x)
        for x in a.args)
    return f"{a.pred}({args})"


def pretty_goal(g: Goal) -> str:
    parts = [pretty_constraint(c) for c in g.constraints]
    parts += [pretty_atom(a) for a in g.atoms]
    return ", ".join(parts) if parts else "emp ~ emp"


def pretty_entailment(e: Entailment) -> str:
    return f"{pretty_goal(e.lhs)} |- {pretty_goal(e.rhs)}"


def alpha_canonical(e: Entailment) -> str:
    """Entailment text with variables renamed in order of first occurrence.

    Used to compare obligations up to variable identity (proof replay,
    determinism checks).
    """
    order: dict[Var, str] = {}

    def walk_term(t: Term):
        for v in t.vars():
            order.setdefault(v, f"v{len(order)}")

    def walk_ht(h: HeapTerm):
        for f in h.factors:
            if isinstance(f, Var):
                order.setdefault(f, f"v{len(order)}")
            else:
                walk_term(f.addr)
                walk_term(f.value)

    def walk_goal(g: Goal):
        for c in g.constraints:
            if isinstance(c, Pure):
                walk_term(c.expr)
            else:
                walk_ht(c.lhs)
                walk_ht(c.rhs)
        for a in g.atoms:
            for x in a.args:
                walk_ht(x) if isinstance(x, HeapTerm) else walk_term(x)

    walk_goal(e.lhs)
    walk_goal(e.rhs)
    theta = Subst()
    for v, nm in order.items():
        theta.bind(v, Var(-1 - int(nm[1:]), nm, v.heap))
    return pretty_entailment(theta.entailment(e))
