"""Declarative subtyping as checkable derivations, plus an algorithmic
(sound, incomplete) decision procedure built on canonicalizing rewrites.

Derivation rules: st-id, st-trans, st-arrow, f-gen, f-inst, f-distr, ex-uni,
ex-corrupt, ex-noexc, ex-ctx, ex-arru, ex-fallc, ex-fallu, ex-lcor, ex-lctx,
and the equality pairs eq-uu, eq-cc, eq-uc, eq-arrc (valid in either
orientation), plus the admissible congruence st-corrupt (corruption
stability: from A <= B infer A^D <= B^D). st-corrupt is a proved theorem of
the system rather than a primitive rule; the emitter uses it only where no
primitive derivation exists (rewriting under a corrupted quantifier or a
corrupted list).

decide_sub is three-valued. Yes always carries a derivation accepted by
check_sub_derivation; No is only returned on a sound refutation; everything
else is Unknown. On the quantifier-free fragment the procedure is complete.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List as PyList, Optional, Tuple

from .syntax import (
    Arrow, Corrupt, EMPTY, ExcSet, Forall, List, NAT, Nat, TVar, Type, Union,
    exc_union, free_type_vars, fresh_name, subst_type, type_alpha_eq,
    type_key,
)

NAT_T = NAT

RULES = {
    "st-id", "st-trans", "st-arrow", "st-corrupt", "f-gen", "f-inst",
    "f-distr", "ex-uni", "ex-corrupt", "ex-noexc", "ex-ctx", "ex-arru",
    "ex-fallc", "ex-fallu", "ex-lcor", "ex-lctx", "eq-uu", "eq-cc", "eq-uc",
    "eq-arrc",
}

EQ_RULES = {"eq-uu", "eq-cc", "eq-uc", "eq-arrc"}


@dataclass(frozen=True)
class SubDerivation:
    """One node of a subtyping proof tree, conclusion lhs <= rhs."""

    rule: str
    lhs: Type
    rhs: Type
    premises: Tuple["SubDerivation", ...] = ()
    witness: Optional[Type] = None  # instantiation type for f-inst

    def conclusion(self) -> Tuple[Type, Type]:
        return (self.lhs, self.rhs)


class DerivationError(Exception):
    pass


def _fail(node: SubDerivation, why: str) -> Tuple[bool, str]:
    from .parser import print_type
    return False, (f"rule {node.rule} at {print_type(node.lhs)} <= "
                   f"{print_type(node.rhs)}: {why}")


def _eq_match(rule: str, a: Type, b: Type) -> bool:
    """Does a <= b instantiate the given equality rule in some orientation?"""
    def one_way(l: Type, r: Type) -> bool:
        if rule == "eq-uu":
            return (isinstance(l, Union) and isinstance(l.body, Union)
                    and isinstance(r, Union)
                    and type_alpha_eq(l.body.body, r.body)
                    and exc_union(l.delta, l.body.delta) == r.delta)
        if rule == "eq-cc":
            return (isinstance(l, Corrupt) and isinstance(l.body, Corrupt)
                    and isinstance(r, Corrupt)
                    and type_alpha_eq(l.body.body, r.body)
                    and exc_union(l.delta, l.body.delta) == r.delta)
        if rule == "eq-uc":
            # (union_d' A)^d == (A^d) + d'
            return (isinstance(l, Corrupt) and isinstance(l.body, Union)
                    and isinstance(r, Union) and isinstance(r.body, Corrupt)
                    and type_alpha_eq(l.body.body, r.body.body)
                    and l.delta == r.body.delta and l.body.delta == r.delta)
        if rule == "eq-arrc":
            return (isinstance(l, Corrupt) and isinstance(l.body, Arrow)
                    and isinstance(r, Arrow)
                    and isinstance(r.dom, Corrupt) and isinstance(r.cod, Corrupt)
                    and l.delta == r.dom.delta == r.cod.delta
                    and type_alpha_eq(l.body.dom, r.dom.body)
                    and type_alpha_eq(l.body.cod, r.cod.body))
        return False

    return one_way(a, b) or one_way(b, a)


def check_sub_derivation(d: SubDerivation) -> Tuple[bool, str]:
    """Validate every node against its rule, side conditions included."""
    if d.rule not in RULES:
        return _fail(d, "unknown rule")
    for p in d.premises:
        ok, why = check_sub_derivation(p)
        if not ok:
            return ok, why
    a, b = d.lhs, d.rhs
    ps = d.premises
    r = d.rule

    def arity(n: int) -> Optional[Tuple[bool, str]]:
        if len(ps) != n:
            return _fail(d, f"expected {n} premises, got {len(ps)}")
        return None

    if r == "st-id":
        return (arity(0) or (type_alpha_eq(a, b) and (True, "ok"))
                or _fail(d, "sides differ"))
    if r == "st-trans":
        bad = arity(2)
        if bad:
            return bad
        if not type_alpha_eq(ps[0].rhs, ps[1].lhs):
            return _fail(d, "middle types differ")
        if not (type_alpha_eq(ps[0].lhs, a) and type_alpha_eq(ps[1].rhs, b)):
            return _fail(d, "conclusion does not chain the premises")
        return True, "ok"
    if r == "st-arrow":
        bad = arity(2)
        if bad:
            return bad
        if not (isinstance(a, Arrow) and isinstance(b, Arrow)):
            return _fail(d, "conclusion sides must be arrows")
        if not (type_alpha_eq(ps[0].lhs, b.dom) and type_alpha_eq(ps[0].rhs, a.dom)):
            return _fail(d, "domain premise must be contravariant")
        if not (type_alpha_eq(ps[1].lhs, a.cod) and type_alpha_eq(ps[1].rhs, b.cod)):
            return _fail(d, "codomain premise must be covariant")
        return True, "ok"
    if r == "st-corrupt":
        bad = arity(1)
        if bad:
            return bad
        if not (isinstance(a, Corrupt) and isinstance(b, Corrupt)
                and a.delta == b.delta):
            return _fail(d, "conclusion must corrupt both sides by one set")
        if not (type_alpha_eq(ps[0].lhs, a.body) and type_alpha_eq(ps[0].rhs, b.body)):
            return _fail(d, "premise must relate the corrupted bodies")
        return True, "ok"
    if r == "f-gen":
        bad = arity(1)
        if bad:
            return bad
        if not isinstance(b, Forall):
            return _fail(d, "right side must be quantified")
        if b.var in free_type_vars(a):
            return _fail(d, f"variable {b.var} occurs free on the left")
        if not (type_alpha_eq(ps[0].lhs, a) and type_alpha_eq(ps[0].rhs, b.body)):
            return _fail(d, "premise must relate left side to the body")
        return True, "ok"
    if r == "f-inst":
        bad = arity(0)
        if bad:
            return bad
        if d.witness is None:
            return _fail(d, "missing instantiation witness")
        if not isinstance(a, Forall):
            return _fail(d, "left side must be quantified")
        if not type_alpha_eq(subst_type(a.body, a.var, d.witness), b):
            return _fail(d, "right side is not the instantiated body")
        return True, "ok"
    if r == "f-distr":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(a, Forall) and isinstance(a.body, Arrow)
                and isinstance(b, Arrow) and isinstance(b.cod, Forall)):
            return _fail(d, "conclusion shape mismatch")
        if a.var in free_type_vars(a.body.dom):
            return _fail(d, "variable occurs free in the domain")
        if not type_alpha_eq(a.body.dom, b.dom):
            return _fail(d, "domains differ")
        if not type_alpha_eq(Forall(a.var, a.body.cod), b.cod):
            return _fail(d, "codomains differ")
        return True, "ok"
    if r == "ex-uni":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(b, Union) and type_alpha_eq(a, b.body)):
            return _fail(d, "right side must be a union of the left side")
        return True, "ok"
    if r == "ex-corrupt":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(a, Union) and isinstance(b, Corrupt)
                and a.delta == b.delta and type_alpha_eq(a.body, b.body)):
            return _fail(d, "must relate a union to its corruption")
        return True, "ok"
    if r == "ex-noexc":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(a, Corrupt) and not a.delta and type_alpha_eq(a.body, b)):
            return _fail(d, "left side must be an empty corruption of the right")
        return True, "ok"
    if r == "ex-ctx":
        bad = arity(1)
        if bad:
            return bad
        if not (isinstance(a, Union) and isinstance(b, Union) and a.delta == b.delta):
            return _fail(d, "both sides must be unions over one set")
        if not (type_alpha_eq(ps[0].lhs, a.body) and type_alpha_eq(ps[0].rhs, b.body)):
            return _fail(d, "premise must relate the union bodies")
        return True, "ok"
    if r == "ex-arru":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(a, Union) and isinstance(a.body, Arrow)
                and isinstance(b, Arrow) and isinstance(b.cod, Union)
                and a.delta == b.cod.delta
                and type_alpha_eq(a.body.dom, b.dom)
                and type_alpha_eq(a.body.cod, b.cod.body)):
            return _fail(d, "conclusion shape mismatch")
        return True, "ok"
    if r == "ex-fallc":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(a, Forall) and isinstance(a.body, Corrupt)
                and isinstance(b, Corrupt) and isinstance(b.body, Forall)
                and a.body.delta == b.delta
                and type_alpha_eq(Forall(a.var, a.body.body), b.body)):
            return _fail(d, "conclusion shape mismatch")
        return True, "ok"
    if r == "ex-fallu":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(a, Forall) and isinstance(a.body, Union)
                and isinstance(b, Union) and isinstance(b.body, Forall)
                and a.body.delta == b.delta
                and type_alpha_eq(Forall(a.var, a.body.body), b.body)):
            return _fail(d, "conclusion shape mismatch")
        return True, "ok"
    if r == "ex-lcor":
        bad = arity(0)
        if bad:
            return bad
        if not (isinstance(a, List) and isinstance(a.elem, Corrupt)
                and isinstance(b, Corrupt) and isinstance(b.body, List)
                and a.elem.delta == b.delta
                and type_alpha_eq(a.elem.body, b.body.elem)):
            return _fail(d, "conclusion shape mismatch")
        return True, "ok"
    if r == "ex-lctx":
        bad = arity(1)
        if bad:
            return bad
        if not (isinstance(a, List) and isinstance(b, List)):
            return _fail(d, "both sides must be lists")
        if not (type_alpha_eq(ps[0].lhs, a.elem) and type_alpha_eq(ps[0].rhs, b.elem)):
            return _fail(d, "premise must relate the element types")
        return True, "ok"
    if r in EQ_RULES:
        bad = arity(0)
        if bad:
            return bad
        if not _eq_match(r, a, b):
            return _fail(d, "not an instance of the equality (either way)")
        return True, "ok"
    return _fail(d, "unhandled rule")


# ---------------------------------------------------------------------------
# Derivation builders
# ---------------------------------------------------------------------------


def d_id(a: Type) -> SubDerivation:
    return SubDerivation("st-id", a, a)


def d_trans(*ds: SubDerivation) -> SubDerivation:
    if not ds:
        raise DerivationError("empty transitivity chain")
    useful = [d for d in ds if d.rule != "st-id"]
    if not useful:
        return ds[0]
    out = useful[0]
    for nxt in useful[1:]:
        if not type_alpha_eq(out.rhs, nxt.lhs):
            raise DerivationError("transitivity chain does not connect")
        out = SubDerivation("st-trans", out.lhs, nxt.rhs, (out, nxt))
    return out


def d_arrow(dom: SubDerivation, cod: SubDerivation, lhs: Arrow, rhs: Arrow) -> SubDerivation:
    return SubDerivation("st-arrow", lhs, rhs, (dom, cod))


def d_uni(a: Type, delta: ExcSet) -> SubDerivation:
    return SubDerivation("ex-uni", a, Union(a, delta))


def d_ex_corrupt(a: Type, delta: ExcSet) -> SubDerivation:
    return SubDerivation("ex-corrupt", Union(a, delta), Corrupt(a, delta))


def d_into_corrupt(a: Type, delta: ExcSet) -> SubDerivation:
    """a <= a^delta (ex-uni then ex-corrupt)."""
    return d_trans(d_uni(a, delta), d_ex_corrupt(a, delta))


def d_noexc(a: Type) -> SubDerivation:
    return SubDerivation("ex-noexc", Corrupt(a, EMPTY), a)


def d_ctx(p: SubDerivation, delta: ExcSet) -> SubDerivation:
    if p.rule == "st-id":
        return d_id(Union(p.lhs, delta))
    return SubDerivation("ex-ctx", Union(p.lhs, delta), Union(p.rhs, delta), (p,))


def d_lctx(p: SubDerivation) -> SubDerivation:
    if p.rule == "st-id":
        return d_id(List(p.lhs))
    return SubDerivation("ex-lctx", List(p.lhs), List(p.rhs), (p,))


def d_corrupt(p: SubDerivation, delta: ExcSet) -> SubDerivation:
    """Corruption stability (admissible congruence)."""
    if p.rule == "st-id":
        return d_id(Corrupt(p.lhs, delta))
    return SubDerivation("st-corrupt", Corrupt(p.lhs, delta),
                         Corrupt(p.rhs, delta), (p,))


def d_forall_ctx(var: str, p: SubDerivation) -> SubDerivation:
    """forall v. A <= forall v. B from A <= B (derived congruence)."""
    if p.rule == "st-id":
        return d_id(Forall(var, p.lhs))
    lhs = Forall(var, p.lhs)
    inst = SubDerivation("f-inst", lhs, p.lhs, witness=TVar(var))
    body = d_trans(inst, p)
    return SubDerivation("f-gen", lhs, Forall(var, p.rhs), (body,))


def d_eq(rule: str, lhs: Type, rhs: Type) -> SubDerivation:
    return SubDerivation(rule, lhs, rhs)


def d_union_widen(body: Type, small: ExcSet, big: ExcSet) -> SubDerivation:
    """body + small  <=  body + big, for small a subset of big.

    With small empty the left side is read as the bare body.
    """
    if not small.issubset(big):
        raise DerivationError("union widening needs a subset")
    if small == big:
        return d_id(Union(body, big) if big else body)
    if not small:
        return d_uni(body, big)
    grown = Union(Union(body, small), big.difference(small))
    return d_trans(d_uni(Union(body, small), big.difference(small)),
                   d_eq("eq-uu", grown, Union(body, big)))


def d_corrupt_widen(body: Type, small: ExcSet, big: ExcSet) -> SubDerivation:
    """body ^ small  <=  body ^ big, for small a nonempty subset of big."""
    if not small.issubset(big):
        raise DerivationError("corruption widening needs a subset")
    if small == big:
        return d_id(Corrupt(body, big))
    inner = Corrupt(body, small)
    extra = big.difference(small)
    return d_trans(d_into_corrupt(inner, extra),
                   d_eq("eq-cc", Corrupt(inner, extra), Corrupt(body, big)))


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CanonResult:
    """Canonical form with the two equality derivations."""

    type: Type
    fwd: SubDerivation  # original <= canonical
    bwd: SubDerivation  # canonical <= original


def _canon_id(t: Type) -> CanonResult:
    return CanonResult(t, d_id(t), d_id(t))


def _push_union_forall(delta: ExcSet, var: str, body: Type) -> Tuple[SubDerivation, SubDerivation]:
    """(forall v. B) + d == forall v. (B + d); fwd is the derived direction."""
    q = Forall(var, body)
    lhs = Union(q, delta)
    step1 = d_trans(SubDerivation("f-inst", q, body, witness=TVar(var)),
                    d_uni(body, delta))  # forall v. B <= B + d
    step2 = d_ctx(step1, delta)  # (forall v. B)+d <= (B+d)+d
    merged = d_eq("eq-uu", Union(Union(body, delta), delta), Union(body, delta))
    chain = d_trans(step2, merged)  # (forall v. B)+d <= B+d
    fwd = SubDerivation("f-gen", lhs, Forall(var, Union(body, delta)), (chain,))
    bwd = SubDerivation("ex-fallu", Forall(var, Union(body, delta)), lhs)
    return fwd, bwd


def _push_corrupt_forall(delta: ExcSet, var: str, body: Type) -> Tuple[SubDerivation, SubDerivation]:
    """(forall v. B) ^ d == forall v. (B ^ d); fwd needs st-corrupt."""
    q = Forall(var, body)
    lhs = Corrupt(q, delta)
    step1 = d_trans(SubDerivation("f-inst", q, body, witness=TVar(var)),
                    d_into_corrupt(body, delta))  # forall v. B <= B ^ d
    step2 = d_corrupt(step1, delta)  # (forall v. B)^d <= (B^d)^d
    merged = d_eq("eq-cc", Corrupt(Corrupt(body, delta), delta), Corrupt(body, delta))
    chain = d_trans(step2, merged)
    fwd = SubDerivation("f-gen", lhs, Forall(var, Corrupt(body, delta)), (chain,))
    bwd = SubDerivation("ex-fallc", Forall(var, Corrupt(body, delta)), lhs)
    return fwd, bwd


def canonicalize(t: Type) -> CanonResult:
    """Rewrite to corruption-normal form, with both equality derivations.

    Invariants of the result: no Corrupt over Arrow, Forall, Union or
    Corrupt; no Union over Union or Forall; no empty exception rows.
    Corrupt over List remains (only the inclusion list(A^d) <= (list A)^d
    holds, not the equality), with its element type canonical.
    """
    if isinstance(t, (TVar, Nat)):
        return _canon_id(t)
    if isinstance(t, List):
        ce = canonicalize(t.elem)
        return CanonResult(List(ce.type), d_lctx(ce.fwd), d_lctx(ce.bwd))
    if isinstance(t, Arrow):
        cd, cc = canonicalize(t.dom), canonicalize(t.cod)
        out = Arrow(cd.type, cc.type)
        fwd = d_arrow(cd.bwd, cc.fwd, t, out) if (cd.type, cc.type) != (t.dom, t.cod) else d_id(t)
        bwd = d_arrow(cd.fwd, cc.bwd, out, t) if (cd.type, cc.type) != (t.dom, t.cod) else d_id(t)
        return CanonResult(out, fwd, bwd)
    if isinstance(t, Forall):
        cb = canonicalize(t.body)
        out = Forall(t.var, cb.type)
        return CanonResult(out, d_forall_ctx(t.var, cb.fwd),
                           d_forall_ctx(t.var, cb.bwd))
    if isinstance(t, Union):
        cb = canonicalize(t.body)
        glue_f, glue_b = d_ctx(cb.fwd, t.delta), d_ctx(cb.bwd, t.delta)
        cur = Union(cb.type, t.delta)
        if not t.delta:
            # A + {} == A
            fwd = d_trans(glue_f, d_trans(d_ex_corrupt(cb.type, EMPTY),
                                          d_noexc(cb.type)))
            bwd = d_trans(d_uni(cb.type, EMPTY), glue_b)
            return CanonResult(cb.type, fwd, bwd)
        if isinstance(cb.type, Union):
            merged = Union(cb.type.body, exc_union(t.delta, cb.type.delta))
            fwd = d_trans(glue_f, d_eq("eq-uu", cur, merged))
            bwd = d_trans(_eq_rev("eq-uu", cur, merged), glue_b)
            return CanonResult(merged, fwd, bwd)
        if isinstance(cb.type, Forall):
            pf, pb = _push_union_forall(t.delta, cb.type.var, cb.type.body)
            rec = canonicalize(pf.rhs)
            return CanonResult(rec.type,
                               d_trans(glue_f, pf, rec.fwd),
                               d_trans(rec.bwd, pb, glue_b))
        return CanonResult(cur, glue_f, glue_b)
    if isinstance(t, Corrupt):
        x, delta = t.body, t.delta
        if not delta:
            cb = canonicalize(x)
            fwd = d_trans(d_noexc(x), cb.fwd)
            bwd = d_trans(cb.bwd, d_into_corrupt(x, EMPTY))
            return CanonResult(cb.type, fwd, bwd)
        if isinstance(x, Union):
            # (B + du) ^ d  ==  (B ^ d) + du
            step = Union(Corrupt(x.body, delta), x.delta)
            rec = canonicalize(step)
            return CanonResult(rec.type,
                               d_trans(d_eq("eq-uc", t, step), rec.fwd),
                               d_trans(rec.bwd, _eq_rev("eq-uc", t, step)))
        if isinstance(x, Corrupt):
            step = Corrupt(x.body, exc_union(delta, x.delta))
            rec = canonicalize(step)
            return CanonResult(rec.type,
                               d_trans(d_eq("eq-cc", t, step), rec.fwd),
                               d_trans(rec.bwd, _eq_rev("eq-cc", t, step)))
        if isinstance(x, Arrow):
            step = Arrow(Corrupt(x.dom, delta), Corrupt(x.cod, delta))
            cd, cc = canonicalize(step.dom), canonicalize(step.cod)
            out = Arrow(cd.type, cc.type)
            glue_f = d_arrow(cd.bwd, cc.fwd, step, out)
            glue_b = d_arrow(cd.fwd, cc.bwd, out, step)
            return CanonResult(out,
                               d_trans(d_eq("eq-arrc", t, step), glue_f),
                               d_trans(glue_b, _eq_rev("eq-arrc", t, step)))
        if isinstance(x, Forall):
            pf, pb = _push_corrupt_forall(delta, x.var, x.body)
            rec = canonicalize(pf.rhs)
            return CanonResult(rec.type, d_trans(pf, rec.fwd),
                               d_trans(rec.bwd, pb))
        if isinstance(x, List):
            ce = canonicalize(x.elem)
            out = Corrupt(List(ce.type), delta)
            return CanonResult(out, d_corrupt(d_lctx(ce.fwd), delta),
                               d_corrupt(d_lctx(ce.bwd), delta))
        # Nat or TVar
        return _canon_id(t)
    raise TypeError(f"not a type: {t!r}")


def _eq_rev(rule: str, fwd_lhs: Type, fwd_rhs: Type) -> SubDerivation:
    """The other orientation of an equality rule instance."""
    return SubDerivation(rule, fwd_rhs, fwd_lhs)


def corrupt_type(a: Type, delta: ExcSet) -> Type:
    """The corruption operator on types, in canonical form."""
    return canonicalize(Corrupt(a, delta)).type


# ---------------------------------------------------------------------------
# The decision procedure
# ---------------------------------------------------------------------------

YES, NO, UNKNOWN = "yes", "no", "unknown"


@dataclass
class SubResult:
    verdict: str
    derivation: Optional[SubDerivation] = None
    reason: str = ""

    @property
    def is_yes(self) -> bool:
        return self.verdict == YES


def _split_union(t: Type) -> Tuple[ExcSet, Type]:
    if isinstance(t, Union):
        return t.delta, t.body
    return EMPTY, t


def _names_in(t: Type) -> ExcSet:
    if isinstance(t, (Union, Corrupt)):
        return exc_union(t.delta, _names_in(t.body))
    if isinstance(t, Arrow):
        return exc_union(_names_in(t.dom), _names_in(t.cod))
    if isinstance(t, List):
        return _names_in(t.elem)
    if isinstance(t, Forall):
        return _names_in(t.body)
    return EMPTY


def _rows(t: Type) -> ExcSet:
    """Union and corruption rows at the top of a canonical type."""
    u, c = _split_union(t)
    if isinstance(c, Corrupt):
        return exc_union(u, c.delta)
    return u


def _match_candidates(pattern: Type, target: Type, var: str, out: PyList[Type]):
    """Collect subtrees of target aligned with occurrences of var in pattern."""
    if isinstance(pattern, TVar) and pattern.name == var:
        out.append(target)
        return
    if isinstance(pattern, Arrow) and isinstance(target, Arrow):
        _match_candidates(pattern.dom, target.dom, var, out)
        _match_candidates(pattern.cod, target.cod, var, out)
    elif isinstance(pattern, List) and isinstance(target, List):
        _match_candidates(pattern.elem, target.elem, var, out)
    elif isinstance(pattern, (Union, Corrupt)) and isinstance(target, (Union, Corrupt)):
        _match_candidates(pattern.body, target.body, var, out)
    elif isinstance(pattern, (Union, Corrupt)):
        _match_candidates(pattern.body, target, var, out)
    elif isinstance(target, (Union, Corrupt)):
        _match_candidates(pattern, target.body, var, out)
    elif isinstance(pattern, Forall) and isinstance(target, Forall):
        if pattern.var != var:
            _match_candidates(pattern.body, target.body, var, out)


def decide_sub(a: Type, b: Type) -> SubResult:
    """Sound three-valued subtype decision; Yes carries a derivation."""
    ca, cb = canonicalize(a), canonicalize(b)
    r = _decide(ca.type, cb.type)
    if r.verdict == YES:
        deriv = d_trans(ca.fwd, r.derivation, cb.bwd)
        return SubResult(YES, deriv, r.reason)
    return r


def _decide(s: Type, t: Type) -> SubResult:
    """Comparison on canonical types; Yes derivations conclude exactly (s, t)."""
    if type_alpha_eq(s, t):
        return SubResult(YES, d_id(s))

    # quantifier on the right: strip by generalization
    if isinstance(t, Forall):
        var, body = t.var, t.body
        if var in free_type_vars(s):
            nv = fresh_name(var, free_type_vars(s) | free_type_vars(body))
            body, var = subst_type(body, var, TVar(nv)), nv
        inner = _decide(s, body)
        if inner.is_yes:
            return SubResult(YES, SubDerivation(
                "f-gen", s, Forall(var, body), (inner.derivation,)))
        return SubResult(UNKNOWN, reason=f"under a quantifier: {inner.reason}")

    # quantifier on the left: try instantiations found by matching
    if isinstance(s, Forall):
        cands: PyList[Type] = []
        _match_candidates(s.body, t, s.var, cands)
        if s.var not in free_type_vars(s.body):
            cands.append(NAT_T)
        seen = set()
        for cand in cands:
            k = type_key(cand)
            if k in seen:
                continue
            seen.add(k)
            instantiated = subst_type(s.body, s.var, cand)
            ci = canonicalize(instantiated)
            inner = _decide(ci.type, t)
            if inner.is_yes:
                inst = SubDerivation("f-inst", s, instantiated, witness=cand)
                return SubResult(YES, d_trans(inst, ci.fwd, inner.derivation))
        return SubResult(UNKNOWN, reason="no instantiation found")

    u1, c1 = _split_union(s)
    u2, c2 = _split_union(t)
    e = u1.difference(u2)

    res = _core(c1, c2, e)
    if not res.is_yes:
        return res

    # assemble: s == (c1+e) + shared  <=  c2 + shared  <=  c2 + u2
    shared = u1.intersection(u2)
    inner = res.derivation  # concludes  c1+e <= c2  (bare c1 when e empty)
    if shared:
        lifted = d_ctx(inner, shared)
        if e:
            nested = Union(Union(c1, e), shared)
            lifted = d_trans(_eq_rev("eq-uu", nested, Union(c1, u1)), lifted)
        return SubResult(YES, d_trans(lifted, d_union_widen(c2, shared, u2)))
    return SubResult(YES, d_trans(inner, d_union_widen(c2, EMPTY, u2)))


def _absorb(d: SubDerivation, c2: Type, e: ExcSet) -> SubResult:
    """Lift  c1 <= c2  (premise d) to  c1+e <= c2  by pushing the extra raise
    row into c2's top corruption row."""
    if not e:
        return SubResult(YES, d)
    if not (isinstance(c2, Corrupt) and e.issubset(c2.delta)):
        return SubResult(NO, reason=f"raise row {e} is not absorbable")
    lifted = d_ctx(d, e)  # c1+e <= c2+e
    merged = d_eq("eq-cc", Corrupt(c2, e),
                  Corrupt(c2.body, exc_union(e, c2.delta)))
    absorbed = d_trans(d_ex_corrupt(c2, e), merged)  # c2+e <= c2
    return SubResult(YES, d_trans(lifted, absorbed))


def _core(c1: Type, c2: Type, e: ExcSet) -> SubResult:
    """Compare union-stripped canonical cores. Yes derivations conclude
    c1+e <= c2 (bare c1 when e is empty)."""
    if isinstance(c1, Arrow) and isinstance(c2, Arrow):
        return _arrows(c1, c2, e)

    if not e and type_alpha_eq(c1, c2):
        return SubResult(YES, d_id(c1))

    # right side: corrupted atom
    if isinstance(c2, Corrupt) and isinstance(c2.body, (Nat, TVar)):
        if not e.issubset(c2.delta):
            return SubResult(NO, reason=f"raise row {e} outside corruption row")
        if isinstance(c1, (Nat, TVar)):
            if type_alpha_eq(c1, c2.body):
                return _absorb(d_into_corrupt(c1, c2.delta), c2, e)
            return SubResult(NO, reason="base types differ")
        if isinstance(c1, Corrupt) and isinstance(c1.body, (Nat, TVar)):
            if not type_alpha_eq(c1.body, c2.body):
                return SubResult(NO, reason="base types differ")
            if c1.delta.issubset(c2.delta):
                return _absorb(d_corrupt_widen(c1.body, c1.delta, c2.delta), c2, e)
            return SubResult(NO, reason="corruption row not included")
        return SubResult(NO, reason="only atoms fit a corrupted atom")

    # right side: corrupted list
    if isinstance(c2, Corrupt) and isinstance(c2.body, List):
        if not e.issubset(c2.delta):
            return SubResult(NO, reason=f"raise row {e} outside corruption row")
        if isinstance(c1, List):
            target_elem = canonicalize(Corrupt(c2.body.elem, c2.delta))
            inner = _decide(c1.elem, target_elem.type)
            if not inner.is_yes:
                return SubResult(inner.verdict, reason=f"element: {inner.reason}")
            elem_d = d_trans(inner.derivation, target_elem.bwd)
            lcor = SubDerivation("ex-lcor", List(Corrupt(c2.body.elem, c2.delta)), c2)
            return _absorb(d_trans(d_lctx(elem_d), lcor), c2, e)
        if isinstance(c1, Corrupt) and isinstance(c1.body, List):
            if not c1.delta.issubset(c2.delta):
                return SubResult(NO, reason="corruption row not included")
            if type_alpha_eq(c1.body, c2.body):
                return _absorb(d_corrupt_widen(c1.body, c1.delta, c2.delta), c2, e)
            base = _core(c1.body, c2, EMPTY)  # list T1 <= (list T2)^d2
            if not base.is_yes:
                return SubResult(base.verdict, reason=f"element: {base.reason}")
            lifted = d_corrupt(base.derivation, c1.delta)  # c1 <= c2^d1
            merged = d_eq("eq-cc", Corrupt(c2, c1.delta),
                          Corrupt(c2.body, exc_union(c1.delta, c2.delta)))
            return _absorb(d_trans(lifted, merged), c2, e)
        return SubResult(NO, reason="only lists fit a corrupted list")

    # right side: plain list
    if isinstance(c2, List):
        if e:
            return SubResult(NO, reason="a raise is never a plain list")
        if isinstance(c1, List):
            inner = _decide(c1.elem, c2.elem)
            if inner.is_yes:
                return SubResult(YES, d_lctx(inner.derivation))
            return SubResult(inner.verdict, reason=f"element: {inner.reason}")
        return SubResult(NO, reason="corruption is not removable"
                         if isinstance(c1, Corrupt) else "not a list")

    # right side: bare atom
    if isinstance(c2, (Nat, TVar)):
        if e:
            return SubResult(NO, reason="a raise row needs a union or corruption")
        if isinstance(c1, Corrupt):
            return SubResult(NO, reason="corruption is not removable")
        return SubResult(NO, reason="distinct head constructors")

    return SubResult(NO, reason="distinct head constructors")


def _arrows(c1: Arrow, c2: Arrow, e: ExcSet) -> SubResult:
    """Arrow cores: plain contravariance first, then pre-corrupting the whole
    left arrow (the route through the corruption/arrow equality)."""
    candidates = [EMPTY]
    excess = _rows(c2.dom).difference(_rows(c1.dom))
    if excess:
        candidates.append(excess)
    allnames = exc_union(exc_union(_names_in(c2), e), _names_in(c1))
    if allnames and all(allnames != g for g in candidates):
        candidates.append(allnames)

    saw_unknown = False
    cod_no_reason = None
    dom_no_reason = None
    for gamma in candidates:
        mid = Arrow(c1.dom, Union(c1.cod, e) if e else c1.cod)
        lifted = canonicalize(Corrupt(mid, gamma) if gamma else mid)
        assert isinstance(lifted.type, Arrow)
        dom_t, cod_t = lifted.type.dom, lifted.type.cod
        rdom = _decide(c2.dom, dom_t)
        if not rdom.is_yes:
            if rdom.verdict == UNKNOWN:
                saw_unknown = True
            else:
                dom_no_reason = rdom.reason
            continue
        rcod = _decide(cod_t, c2.cod)
        if rcod.is_yes:
            chain = []
            if e:
                chain.append(SubDerivation("ex-arru", Union(c1, e), mid))
            if gamma:
                chain.append(d_into_corrupt(mid, gamma))
            chain.append(lifted.fwd)
            chain.append(d_arrow(rdom.derivation, rcod.derivation,
                                 lifted.type, c2))
            return SubResult(YES, d_trans(*chain))
        if rcod.verdict == UNKNOWN:
            saw_unknown = True
        else:
            cod_no_reason = rcod.reason
    if saw_unknown:
        return SubResult(UNKNOWN, reason="arrow sides undecided")
    if cod_no_reason is not None:
        return SubResult(NO, reason=f"codomain: {cod_no_reason}")
    return SubResult(NO, reason=f"domain: {dom_no_reason or 'incompatible'}")
