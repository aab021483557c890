"""Abstract syntax: terms, types, exception-name sets, binding and substitution.

Terms and types are immutable trees; every operation here is pure. Alpha
equivalence is decided through canonical de Bruijn keys, substitution is
capture avoiding with deterministic primed fresh names, so results are
reproducible bit for bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple, Union as PyUnion

EXC_NAME_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_']*\Z")


def check_exc_name(name: str) -> str:
    if not EXC_NAME_RE.match(name):
        raise ValueError(f"invalid exception name: {name!r}")
    return name


@dataclass(frozen=True)
class ExcSet:
    """Finite set of exception names, kept sorted (lexicographic order)."""

    names: Tuple[str, ...] = ()

    def __init__(self, names=()):
        uniq = tuple(sorted(set(check_exc_name(n) for n in names)))
        object.__setattr__(self, "names", uniq)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.names)

    def __bool__(self) -> bool:
        return bool(self.names)

    def union(self, other: "ExcSet") -> "ExcSet":
        return ExcSet(self.names + other.names)

    def difference(self, other: "ExcSet") -> "ExcSet":
        return ExcSet(n for n in self.names if n not in other)

    def intersection(self, other: "ExcSet") -> "ExcSet":
        return ExcSet(n for n in self.names if n in other)

    def issubset(self, other: "ExcSet") -> bool:
        return all(n in other for n in self.names)

    def __str__(self) -> str:
        return "{" + ", ".join(self.names) + "}"


EMPTY = ExcSet()


def exc_union(a: ExcSet, b: ExcSet) -> ExcSet:
    return a.union(b)


def exc_set(*names: str) -> ExcSet:
    return ExcSet(names)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class Type:
    """Base class for types."""

    __slots__ = ()


@dataclass(frozen=True)
class TVar(Type):
    """Type variable."""

    name: str


@dataclass(frozen=True)
class Nat(Type):
    """Type of natural numbers."""


@dataclass(frozen=True)
class List(Type):
    """Homogeneous lists."""

    elem: Type


@dataclass(frozen=True)
class Arrow(Type):
    """Function type."""

    dom: Type
    cod: Type


@dataclass(frozen=True)
class Forall(Type):
    """Universal quantification over a type variable."""

    var: str
    body: Type


@dataclass(frozen=True)
class Union(Type):
    """Terms of the body type, or a top-level raise of a name in delta."""

    body: Type
    delta: ExcSet


@dataclass(frozen=True)
class Corrupt(Type):
    """Terms of the body type where subterms may raise names in delta."""

    body: Type
    delta: ExcSet


NAT = Nat()


def free_type_vars(t: Type) -> frozenset:
    if isinstance(t, TVar):
        return frozenset((t.name,))
    if isinstance(t, Nat):
        return frozenset()
    if isinstance(t, List):
        return free_type_vars(t.elem)
    if isinstance(t, Arrow):
        return free_type_vars(t.dom) | free_type_vars(t.cod)
    if isinstance(t, Forall):
        return free_type_vars(t.body) - {t.var}
    if isinstance(t, (Union, Corrupt)):
        return free_type_vars(t.body)
    raise TypeError(f"not a type: {t!r}")


def fresh_name(base: str, avoid) -> str:
    name = base
    while name in avoid:
        name += "'"
    return name


def subst_type(body: Type, var: str, replacement: Type) -> Type:
    if isinstance(body, TVar):
        return replacement if body.name == var else body
    if isinstance(body, Nat):
        return body
    if isinstance(body, List):
        return List(subst_type(body.elem, var, replacement))
    if isinstance(body, Arrow):
        return Arrow(subst_type(body.dom, var, replacement),
                     subst_type(body.cod, var, replacement))
    if isinstance(body, Forall):
        if body.var == var:
            return body
        if body.var in free_type_vars(replacement) and var in free_type_vars(body.body):
            avoid = free_type_vars(body.body) | free_type_vars(replacement) | {var}
            nv = fresh_name(body.var, avoid)
            renamed = subst_type(body.body, body.var, TVar(nv))
            return Forall(nv, subst_type(renamed, var, replacement))
        return Forall(body.var, subst_type(body.body, var, replacement))
    if isinstance(body, Union):
        return Union(subst_type(body.body, var, replacement), body.delta)
    if isinstance(body, Corrupt):
        return Corrupt(subst_type(body.body, var, replacement), body.delta)
    raise TypeError(f"not a type: {body!r}")


def type_key(t: Type, env: Optional[dict] = None, depth: int = 0):
    """Canonical hashable key; alpha-equivalent types share a key."""
    if env is None:
        env = {}
    if isinstance(t, TVar):
        return ("bv", env[t.name]) if t.name in env else ("fv", t.name)
    if isinstance(t, Nat):
        return ("nat",)
    if isinstance(t, List):
        return ("list", type_key(t.elem, env, depth))
    if isinstance(t, Arrow):
        return ("arrow", type_key(t.dom, env, depth), type_key(t.cod, env, depth))
    if isinstance(t, Forall):
        inner = dict(env)
        inner[t.var] = depth
        return ("forall", type_key(t.body, inner, depth + 1))
    if isinstance(t, Union):
        return ("union", t.delta.names, type_key(t.body, env, depth))
    if isinstance(t, Corrupt):
        return ("corrupt", t.delta.names, type_key(t.body, env, depth))
    raise TypeError(f"not a type: {t!r}")


def type_alpha_eq(a: Type, b: Type) -> bool:
    return type_key(a) == type_key(b)


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


class Term:
    """Base class for terms."""

    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    """Term variable."""

    name: str


@dataclass(frozen=True)
class Lam(Term):
    """Lambda abstraction; the annotation is a checker-only hint."""

    var: str
    body: Term
    anno: Optional[Type] = None


@dataclass(frozen=True)
class App(Term):
    """Application."""

    fn: Term
    arg: Term


@dataclass(frozen=True)
class Raise(Term):
    """raise of a named exception."""

    exc: str

    def __post_init__(self):
        check_exc_name(self.exc)


@dataclass(frozen=True)
class Try(Term):
    """try body with exc -> handler; does not bind the exception name."""

    body: Term
    exc: str
    handler: Term

    def __post_init__(self):
        check_exc_name(self.exc)


@dataclass(frozen=True)
class Zero(Term):
    """Numeral zero."""


@dataclass(frozen=True)
class Succ(Term):
    """Successor constructor."""


@dataclass(frozen=True)
class Rec(Term):
    """Recursor over naturals."""


@dataclass(frozen=True)
class Nil(Term):
    """Empty list."""


@dataclass(frozen=True)
class Cons(Term):
    """List constructor."""


@dataclass(frozen=True)
class Fold(Term):
    """Recursor over lists."""


@dataclass(frozen=True)
class Daimon(Term):
    """Model-only uncatchable stop; has no typing rule."""


@dataclass(frozen=True)
class Seq(Term):
    """Model-only sequencing: fires when the left side reaches the daimon."""

    left: Term
    right: Term


@dataclass(frozen=True)
class Annot(Term):
    """Checker-only type ascription; erased before evaluation."""

    term: Term
    type: Type


ZERO = Zero()
SUCC = Succ()
REC = Rec()
NIL = Nil()
CONS = Cons()
FOLD = Fold()
DAIMON = Daimon()

CONSTANTS = (Zero, Succ, Rec, Nil, Cons, Fold)


def free_vars(t: Term) -> frozenset:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.var}
    if isinstance(t, App):
        return free_vars(t.fn) | free_vars(t.arg)
    if isinstance(t, Try):
        return free_vars(t.body) | free_vars(t.handler)
    if isinstance(t, Seq):
        return free_vars(t.left) | free_vars(t.right)
    if isinstance(t, Annot):
        return free_vars(t.term)
    return frozenset()


def subst_term(body: Term, var: str, replacement: Term) -> Term:
    if isinstance(body, Var):
        return replacement if body.name == var else body
    if isinstance(body, Lam):
        if body.var == var:
            return body
        if body.var in free_vars(replacement) and var in free_vars(body.body):
            avoid = free_vars(body.body) | free_vars(replacement) | {var}
            nv = fresh_name(body.var, avoid)
            renamed = subst_term(body.body, body.var, Var(nv))
            return Lam(nv, subst_term(renamed, var, replacement), body.anno)
        return Lam(body.var, subst_term(body.body, var, replacement), body.anno)
    if isinstance(body, App):
        return App(subst_term(body.fn, var, replacement),
                   subst_term(body.arg, var, replacement))
    if isinstance(body, Try):
        return Try(subst_term(body.body, var, replacement), body.exc,
                   subst_term(body.handler, var, replacement))
    if isinstance(body, Seq):
        return Seq(subst_term(body.left, var, replacement),
                   subst_term(body.right, var, replacement))
    if isinstance(body, Annot):
        return Annot(subst_term(body.term, var, replacement), body.type)
    return body


def term_key(t: Term, env: Optional[dict] = None, depth: int = 0):
    """Canonical hashable key; alpha-equivalent terms share a key.

    Annotations participate so that annotated and erased terms differ.
    """
    if env is None:
        env = {}
    if isinstance(t, Var):
        return ("bv", env[t.name]) if t.name in env else ("fv", t.name)
    if isinstance(t, Lam):
        inner = dict(env)
        inner[t.var] = depth
        anno = type_key(t.anno) if t.anno is not None else None
        return ("lam", anno, term_key(t.body, inner, depth + 1))
    if isinstance(t, App):
        return ("app", term_key(t.fn, env, depth), term_key(t.arg, env, depth))
    if isinstance(t, Raise):
        return ("raise", t.exc)
    if isinstance(t, Try):
        return ("try", term_key(t.body, env, depth), t.exc,
                term_key(t.handler, env, depth))
    if isinstance(t, Seq):
        return ("seq", term_key(t.left, env, depth), term_key(t.right, env, depth))
    if isinstance(t, Annot):
        return ("annot", term_key(t.term, env, depth), type_key(t.type))
    return (type(t).__name__.lower(),)


def alpha_eq(a: Term, b: Term) -> bool:
    return term_key(a) == term_key(b)


def erase(t: Term) -> Term:
    """Strip Annot nodes and binder annotations."""
    if isinstance(t, Lam):
        return Lam(t.var, erase(t.body), None)
    if isinstance(t, App):
        return App(erase(t.fn), erase(t.arg))
    if isinstance(t, Try):
        return Try(erase(t.body), t.exc, erase(t.handler))
    if isinstance(t, Seq):
        return Seq(erase(t.left), erase(t.right))
    if isinstance(t, Annot):
        return erase(t.term)
    return t


def spine(t: Term) -> Tuple[Term, list]:
    """Flatten nested applications into (head, [args])."""
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


def make_app(head: Term, args) -> Term:
    for a in args:
        head = App(head, a)
    return head


# Maximum argument counts under which a constant-headed spine is still a
# regular value (partial applications of the recursors and cons).
_RV_ARITY = {Zero: 0, Succ: 1, Rec: 2, Nil: 0, Cons: 2, Fold: 2}


class OpenTermError(ValueError):
    """Raised when an operation requires a closed term."""


def is_regular_value(t: Term, *, check_closed: bool = True) -> bool:
    if check_closed and free_vars(t):
        raise OpenTermError(f"open term: free {sorted(free_vars(t))}")
    if isinstance(t, Lam):
        return True
    head, args = spine(t)
    limit = _RV_ARITY.get(type(head))
    return limit is not None and len(args) <= limit


def is_value(t: Term, *, check_closed: bool = True) -> bool:
    if isinstance(t, (Raise, Daimon)):
        return True
    return is_regular_value(t, check_closed=check_closed)


def numeral(n: int) -> Term:
    t: Term = ZERO
    for _ in range(n):
        t = App(SUCC, t)
    return t


def as_numeral(t: Term) -> Optional[int]:
    n = 0
    while True:
        if isinstance(t, Zero):
            return n
        if isinstance(t, App) and isinstance(t.fn, Succ):
            n += 1
            t = t.arg
        else:
            return None


def list_term(elems) -> Term:
    t: Term = NIL
    for e in reversed(list(elems)):
        t = App(App(CONS, e), t)
    return t


# ---------------------------------------------------------------------------
# Typing contexts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypingContext:
    """Ordered bindings of term variables to types; names pairwise distinct."""

    bindings: Tuple[Tuple[str, Type], ...] = ()

    def lookup(self, name: str) -> Optional[Type]:
        for n, ty in self.bindings:
            if n == name:
                return ty
        return None

    def extend(self, name: str, ty: Type) -> "TypingContext":
        if self.lookup(name) is not None:
            raise ValueError(f"duplicate binding: {name}")
        return TypingContext(self.bindings + ((name, ty),))

    def free_type_vars(self) -> frozenset:
        out = frozenset()
        for _, ty in self.bindings:
            out |= free_type_vars(ty)
        return out

    def __iter__(self):
        return iter(self.bindings)

    def __len__(self):
        return len(self.bindings)


EMPTY_CTX = TypingContext()
