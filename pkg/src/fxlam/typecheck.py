"""Typing: derivation checker, bidirectional algorithmic checker, and the
corruption relation between terms.

Derivations are over erased terms (annotations are hints for the algorithmic
checker only). bidi_check is three-valued like decide_sub; every Yes carries
a derivation accepted by check_typing_derivation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List as PyList, Optional, Tuple

from .syntax import (
    Annot, App, Arrow, Cons, Corrupt, DAIMON, Daimon, EMPTY, EMPTY_CTX,
    ExcSet, Fold, Forall, Lam, List, NAT, Nat, Nil, Raise, Rec, Seq, Succ,
    Term, Try, TVar, Type, TypingContext, Union, Var, Zero, alpha_eq, erase,
    exc_union, free_type_vars, free_vars, fresh_name, spine, subst_term,
    subst_type, type_alpha_eq,
)
from .subtyping import (
    NO, SubDerivation, SubResult, UNKNOWN, YES, canonicalize,
    check_sub_derivation, corrupt_type, d_trans, d_union_widen, decide_sub,
    _split_union,
)

TYPING_RULES = {"ax", "abs", "app", "gen", "subs", "zero", "succ", "rec",
                "nil", "cons", "fold", "raise", "try"}


@dataclass(frozen=True)
class TypingDerivation:
    """One node of a typing proof tree, conclusion ctx |- term : type."""

    rule: str
    ctx: TypingContext
    term: Term
    type: Type
    premises: Tuple["TypingDerivation", ...] = ()
    sub: Optional[SubDerivation] = None  # the subtyping premise of subs

    def conclusion(self):
        return (self.ctx, self.term, self.type)


# -- constant schemes -------------------------------------------------------


def zero_type() -> Type:
    return NAT


def succ_type() -> Type:
    return Arrow(NAT, NAT)


def raise_scheme(exc: str) -> Type:
    return Forall("a", Union(TVar("a"), ExcSet([exc])))


def nil_scheme() -> Type:
    return Forall("a", List(TVar("a")))


def cons_scheme() -> Type:
    return Forall("a", Arrow(TVar("a"), Arrow(List(TVar("a")), List(TVar("a")))))


def rec_scheme(delta: ExcSet, delta2: ExcSet) -> Type:
    a = TVar("a")
    step = Arrow(Corrupt(NAT, delta), Arrow(Union(a, delta), Union(a, delta)))
    return Forall("a", Arrow(
        Union(a, delta),
        Arrow(step, Arrow(Union(Corrupt(NAT, delta), delta2),
                          Union(a, exc_union(delta, delta2))))))


def fold_scheme(delta: ExcSet, delta2: ExcSet) -> Type:
    a, b = TVar("a"), TVar("b")
    lb = List(b)
    step = Arrow(Corrupt(b, delta),
                 Arrow(Corrupt(lb, delta),
                       Arrow(Union(a, delta), Union(a, delta))))
    return Forall("a", Forall("b", Arrow(
        Union(a, delta),
        Arrow(step, Arrow(Union(Corrupt(lb, delta), delta2),
                          Union(a, exc_union(delta, delta2)))))))


def match_rec_scheme(ty: Type) -> Optional[Tuple[ExcSet, ExcSet]]:
    """Recover (delta, delta') from a literal rec scheme instance."""
    if not (isinstance(ty, Forall) and isinstance(ty.body, Arrow)):
        return None
    first = ty.body.dom
    if not isinstance(first, Union):
        return None
    rest = ty.body.cod
    if not (isinstance(rest, Arrow) and isinstance(rest.cod, Arrow)):
        return None
    scrut = rest.cod.dom
    if not isinstance(scrut, Union):
        return None
    delta, delta2 = first.delta, scrut.delta
    if type_alpha_eq(ty, rec_scheme(delta, delta2)):
        return delta, delta2
    return None


def match_fold_scheme(ty: Type) -> Optional[Tuple[ExcSet, ExcSet]]:
    if not (isinstance(ty, Forall) and isinstance(ty.body, Forall)
            and isinstance(ty.body.body, Arrow)):
        return None
    first = ty.body.body.dom
    if not isinstance(first, Union):
        return None
    rest = ty.body.body.cod
    if not (isinstance(rest, Arrow) and isinstance(rest.cod, Arrow)):
        return None
    scrut = rest.cod.dom
    if not isinstance(scrut, Union):
        return None
    delta, delta2 = first.delta, scrut.delta
    if type_alpha_eq(ty, fold_scheme(delta, delta2)):
        return delta, delta2
    return None


# -- derivation checking ----------------------------------------------------


def _tfail(d: TypingDerivation, why: str) -> Tuple[bool, str]:
    from .parser import print_term, print_type
    return False, (f"rule {d.rule} at |- {print_term(d.term)} : "
                   f"{print_type(d.type)}: {why}")


def check_typing_derivation(d: TypingDerivation) -> Tuple[bool, str]:
    if d.rule not in TYPING_RULES:
        return _tfail(d, "unknown rule")
    for p in d.premises:
        ok, why = check_typing_derivation(p)
        if not ok:
            return ok, why

    def arity(n: int) -> Optional[Tuple[bool, str]]:
        if len(d.premises) != n:
            return _tfail(d, f"expected {n} premises, got {len(d.premises)}")
        return None

    r, t, ty = d.rule, d.term, d.type
    if r == "ax":
        bad = arity(0)
        if bad:
            return bad
        if not isinstance(t, Var):
            return _tfail(d, "term must be a variable")
        bound = d.ctx.lookup(t.name)
        if bound is None or not type_alpha_eq(bound, ty):
            return _tfail(d, "variable not bound at this type")
        return True, "ok"
    if r == "abs":
        bad = arity(1)
        if bad:
            return bad
        if not (isinstance(t, Lam) and isinstance(ty, Arrow)):
            return _tfail(d, "needs a lambda at an arrow type")
        p = d.premises[0]
        if not (isinstance(p.term, Term) and alpha_eq(p.term, t.body)
                and type_alpha_eq(p.type, ty.cod)):
            return _tfail(d, "premise must type the body at the codomain")
        want = d.ctx.extend(t.var, ty.dom)
        if p.ctx.bindings != want.bindings:
            return _tfail(d, "premise context must extend with the binder")
        return True, "ok"
    if r == "app":
        bad = arity(2)
        if bad:
            return bad
        if not isinstance(t, App):
            return _tfail(d, "term must be an application")
        pf, pa = d.premises
        if not (alpha_eq(pf.term, t.fn) and alpha_eq(pa.term, t.arg)):
            return _tfail(d, "premises must type the two components")
        if not isinstance(pf.type, Arrow):
            return _tfail(d, "function premise must have an arrow type")
        if not type_alpha_eq(pf.type.dom, pa.type):
            return _tfail(d, "argument type does not match the domain")
        if not type_alpha_eq(pf.type.cod, ty):
            return _tfail(d, "conclusion must be the codomain")
        if pf.ctx.bindings != d.ctx.bindings or pa.ctx.bindings != d.ctx.bindings:
            return _tfail(d, "premise contexts must match")
        return True, "ok"
    if r == "gen":
        bad = arity(1)
        if bad:
            return bad
        if not isinstance(ty, Forall):
            return _tfail(d, "conclusion must be quantified")
        if ty.var in d.ctx.free_type_vars():
            return _tfail(d, f"variable {ty.var} occurs free in the context")
        p = d.premises[0]
        if not (alpha_eq(p.term, t) and type_alpha_eq(p.type, ty.body)
                and p.ctx.bindings == d.ctx.bindings):
            return _tfail(d, "premise must type the same term at the body")
        return True, "ok"
    if r == "subs":
        bad = arity(1)
        if bad:
            return bad
        if d.sub is None:
            return _tfail(d, "missing subtyping premise")
        ok, why = check_sub_derivation(d.sub)
        if not ok:
            return False, why
        p = d.premises[0]
        if not (alpha_eq(p.term, t) and p.ctx.bindings == d.ctx.bindings):
            return _tfail(d, "premise must type the same term")
        if not (type_alpha_eq(d.sub.lhs, p.type) and type_alpha_eq(d.sub.rhs, ty)):
            return _tfail(d, "subtyping premise does not connect the types")
        return True, "ok"
    if r == "try":
        bad = arity(2)
        if bad:
            return bad
        if not isinstance(t, Try):
            return _tfail(d, "term must be a try")
        pb, ph = d.premises
        want = Union(ty, ExcSet([t.exc]))
        if not (alpha_eq(pb.term, t.body) and type_alpha_eq(pb.type, want)):
            return _tfail(d, "body premise must be the union with the name")
        if not (alpha_eq(ph.term, t.handler) and type_alpha_eq(ph.type, ty)):
            return _tfail(d, "handler premise must match the conclusion")
        if pb.ctx.bindings != d.ctx.bindings or ph.ctx.bindings != d.ctx.bindings:
            return _tfail(d, "premise contexts must match")
        return True, "ok"
    # constants
    bad = arity(0)
    if bad:
        return bad
    if r == "zero":
        if isinstance(t, Zero) and type_alpha_eq(ty, zero_type()):
            return True, "ok"
        return _tfail(d, "must type 0 at nat")
    if r == "succ":
        if isinstance(t, Succ) and type_alpha_eq(ty, succ_type()):
            return True, "ok"
        return _tfail(d, "must type S at nat -> nat")
    if r == "nil":
        if isinstance(t, Nil) and type_alpha_eq(ty, nil_scheme()):
            return True, "ok"
        return _tfail(d, "must type nil at its scheme")
    if r == "cons":
        if isinstance(t, Cons) and type_alpha_eq(ty, cons_scheme()):
            return True, "ok"
        return _tfail(d, "must type cons at its scheme")
    if r == "raise":
        if isinstance(t, Raise) and type_alpha_eq(ty, raise_scheme(t.exc)):
            return True, "ok"
        return _tfail(d, "must type raise at forall a. a + {name}")
    if r == "rec":
        if isinstance(t, Rec) and match_rec_scheme(ty) is not None:
            return True, "ok"
        return _tfail(d, "not a rec scheme instance")
    if r == "fold":
        if isinstance(t, Fold) and match_fold_scheme(ty) is not None:
            return True, "ok"
        return _tfail(d, "not a fold scheme instance")
    return _tfail(d, "unhandled rule")


# -- bidirectional checking -------------------------------------------------


@dataclass
class BidiResult:
    verdict: str
    derivation: Optional[TypingDerivation] = None
    reason: str = ""

    @property
    def is_yes(self) -> bool:
        return self.verdict == YES


def _t_subs(p: TypingDerivation, sub: SubDerivation) -> TypingDerivation:
    if sub.rule == "st-id":
        return p
    return TypingDerivation("subs", p.ctx, p.term, sub.rhs, (p,), sub=sub)


def _fresh_binder(var: str, ctx: TypingContext, body: Term) -> Tuple[str, Term]:
    if ctx.lookup(var) is None:
        return var, body
    avoid = set(free_vars(body)) | {n for n, _ in ctx}
    nv = fresh_name(var, avoid)
    return nv, subst_term(body, var, Var(nv))


def bidi_check(ctx: TypingContext, m: Term, expected: Type) -> BidiResult:
    """Check m against expected; Yes carries a checkable derivation."""
    return _check(ctx, m, expected)


def _check(ctx: TypingContext, m: Term, ty: Type) -> BidiResult:
    c = canonicalize(ty)
    r = _check_canon(ctx, m, c.type)
    if r.is_yes and not type_alpha_eq(c.type, ty):
        return BidiResult(YES, _t_subs(r.derivation, c.bwd))
    return r


def _check_canon(ctx: TypingContext, m: Term, ty: Type) -> BidiResult:
    # quantified expected type: generalize
    if isinstance(ty, Forall):
        var, body = ty.var, ty.body
        if var in ctx.free_type_vars():
            nv = fresh_name(var, ctx.free_type_vars() | free_type_vars(body))
            body, var = subst_type(body, var, TVar(nv)), nv
        r = _check_canon(ctx, m, body)
        if not r.is_yes:
            return r
        return BidiResult(YES, TypingDerivation(
            "gen", ctx, r.derivation.term, Forall(var, body), (r.derivation,)))

    if isinstance(m, (Daimon, Seq)):
        return BidiResult(NO, reason="model-only term has no typing rule")

    if isinstance(m, Lam):
        u, core = _split_union(ty)
        if not isinstance(core, Arrow):
            return BidiResult(NO, reason="a lambda only fits an arrow type")
        var, body = _fresh_binder(m.var, ctx, m.body)
        inner = ctx.extend(var, core.dom)
        r = _check(inner, body, core.cod)
        if not r.is_yes:
            return r
        node = TypingDerivation("abs", ctx, Lam(var, r.derivation.term, None),
                                core, (r.derivation,))
        if u:
            node = _t_subs(node, d_union_widen(core, EMPTY, u))
        return BidiResult(YES, node)

    if isinstance(m, Try):
        rb = _check(ctx, m.body, Union(ty, ExcSet([m.exc])))
        if not rb.is_yes:
            return BidiResult(rb.verdict, reason=f"try body: {rb.reason}")
        rh = _check(ctx, m.handler, ty)
        if not rh.is_yes:
            return BidiResult(rh.verdict, reason=f"try handler: {rh.reason}")
        node = TypingDerivation(
            "try", ctx, Try(rb.derivation.term, m.exc, rh.derivation.term),
            ty, (rb.derivation, rh.derivation))
        return BidiResult(YES, node)

    if isinstance(m, Annot):
        r = _check(ctx, m.term, m.type)
        if not r.is_yes:
            return r
        sub = decide_sub(m.type, ty)
        if sub.verdict != YES:
            return BidiResult(sub.verdict,
                              reason=f"annotation does not fit: {sub.reason}")
        return BidiResult(YES, _t_subs(r.derivation, sub.derivation))

    head, args = spine(m)
    if isinstance(head, (Rec, Fold)) and len(args) <= 3:
        r = _check_recfold(ctx, head, args, ty)
        if r is not None:
            return r

    if isinstance(m, Raise):
        sub = decide_sub(raise_scheme(m.exc), ty)
        if sub.verdict == YES:
            node = TypingDerivation("raise", ctx, m, raise_scheme(m.exc))
            return BidiResult(YES, _t_subs(node, sub.derivation))
        if _raise_fits(m.exc, ty):
            return BidiResult(UNKNOWN, reason="raise fits but no derivation found")
        return BidiResult(NO, reason=f"type never raises {m.exc}")

    s = _synth(ctx, m)
    if not s.is_yes:
        return BidiResult(s.verdict, reason=s.reason)
    sub = decide_sub(s.derivation.type, ty)
    if sub.verdict == YES:
        return BidiResult(YES, _t_subs(s.derivation, sub.derivation))
    return BidiResult(sub.verdict,
                      reason=f"synthesized type does not fit: {sub.reason}")


def _raise_fits(exc: str, ty: Type) -> bool:
    """Semantic test: can `raise exc` inhabit canonical type ty at all?"""
    if isinstance(ty, Forall):
        return _raise_fits(exc, ty.body)
    u, core = _split_union(ty)
    if exc in u:
        return True
    if isinstance(core, Corrupt):
        return exc in core.delta
    if isinstance(core, Arrow):
        return _raise_fits(exc, core.cod)
    return False


# -- synthesis --------------------------------------------------------------


def _synth(ctx: TypingContext, m: Term) -> BidiResult:
    """Synthesize a type; the derivation's type field is the result."""
    if isinstance(m, Var):
        ty = ctx.lookup(m.name)
        if ty is None:
            return BidiResult(NO, reason=f"unbound variable {m.name}")
        return BidiResult(YES, TypingDerivation("ax", ctx, m, ty))
    if isinstance(m, Zero):
        return BidiResult(YES, TypingDerivation("zero", ctx, m, zero_type()))
    if isinstance(m, Succ):
        return BidiResult(YES, TypingDerivation("succ", ctx, m, succ_type()))
    if isinstance(m, Nil):
        return BidiResult(YES, TypingDerivation("nil", ctx, m, nil_scheme()))
    if isinstance(m, Cons):
        return BidiResult(YES, TypingDerivation("cons", ctx, m, cons_scheme()))
    if isinstance(m, Raise):
        return BidiResult(YES, TypingDerivation("raise", ctx, m,
                                                raise_scheme(m.exc)))
    if isinstance(m, (Rec, Fold)):
        # bare recursors default to the empty-row scheme instance
        rule = "rec" if isinstance(m, Rec) else "fold"
        scheme = rec_scheme(EMPTY, EMPTY) if rule == "rec" else fold_scheme(EMPTY, EMPTY)
        return BidiResult(YES, TypingDerivation(rule, ctx, m, scheme))
    if isinstance(m, (Daimon, Seq)):
        return BidiResult(NO, reason="model-only term has no typing rule")
    if isinstance(m, Annot):
        r = _check(ctx, m.term, m.type)
        if not r.is_yes:
            return r
        return BidiResult(YES, r.derivation)
    if isinstance(m, Lam):
        if m.anno is None:
            return BidiResult(UNKNOWN,
                              reason="unannotated lambda cannot synthesize")
        var, body = _fresh_binder(m.var, ctx, m.body)
        r = _synth(ctx.extend(var, m.anno), body)
        if not r.is_yes:
            return r
        node = TypingDerivation("abs", ctx, Lam(var, r.derivation.term, None),
                                Arrow(m.anno, r.derivation.type),
                                (r.derivation,))
        return BidiResult(YES, node)
    if isinstance(m, Try):
        rb = _synth(ctx, m.body)
        if not rb.is_yes:
            return BidiResult(rb.verdict, reason=f"try body: {rb.reason}")
        c = canonicalize(rb.derivation.type)
        u, core = _split_union(c.type)
        if m.exc in u:
            result: Type = Union(core, u.difference(ExcSet([m.exc])))
            result = canonicalize(result).type
        else:
            result = c.type
        want = Union(result, ExcSet([m.exc]))
        sub = decide_sub(rb.derivation.type, want)
        if sub.verdict != YES:
            return BidiResult(UNKNOWN, reason="try body type does not peel")
        body_d = _t_subs(rb.derivation, sub.derivation)
        rh = _check(ctx, m.handler, result)
        if not rh.is_yes:
            return BidiResult(rh.verdict, reason=f"try handler: {rh.reason}")
        node = TypingDerivation(
            "try", ctx, Try(body_d.term, m.exc, rh.derivation.term), result,
            (body_d, rh.derivation))
        return BidiResult(YES, node)
    if isinstance(m, App):
        head, args = spine(m)
        if isinstance(head, (Rec, Fold)) and len(args) >= 3:
            pre = _check_recfold(ctx, head, args[:3], None)
            if pre is None or not pre.is_yes:
                return pre if pre is not None else BidiResult(
                    UNKNOWN, reason="recursor arguments do not synthesize")
            d = pre.derivation
            for extra in args[3:]:
                r = _apply(ctx, d, extra)
                if not r.is_yes:
                    return r
                d = r.derivation
            return BidiResult(YES, d)
        rf = _synth(ctx, m.fn)
        if not rf.is_yes:
            return rf
        return _apply(ctx, rf.derivation, m.arg)
    raise TypeError(f"not a term: {m!r}")


def _apply(ctx: TypingContext, fd: TypingDerivation, arg: Term) -> BidiResult:
    """Type an application given the function's derivation."""
    from .subtyping import _match_candidates, _names_in, _rows, d_into_corrupt
    from .syntax import type_key

    c = canonicalize(fd.type)
    d = fd if type_alpha_eq(c.type, fd.type) else _t_subs(fd, c.fwd)
    ty = c.type

    if isinstance(ty, Forall):
        sa = _synth(ctx, arg)
        arg_ty = canonicalize(sa.derivation.type).type if sa.is_yes else None
        cands: PyList[Type] = []
        if arg_ty is not None and isinstance(ty.body, Arrow):
            _match_candidates(canonicalize(ty.body.dom).type, arg_ty,
                              ty.var, cands)
        if ty.var not in free_type_vars(ty.body) or not cands:
            cands.append(NAT)
        seen = set()
        last: Optional[BidiResult] = None
        for cand in cands:
            k = type_key(cand)
            if k in seen:
                continue
            seen.add(k)
            inst = subst_type(ty.body, ty.var, cand)
            d2 = _t_subs(d, SubDerivation("f-inst", ty, inst, witness=cand))
            r = _apply(ctx, d2, arg)
            if r.is_yes:
                return r
            last = r
        return BidiResult(UNKNOWN,
                          reason=(last.reason if last else "no instantiation"))

    # a union of functions applies, pushing the row into the result
    u, core = _split_union(ty)
    if u and isinstance(core, Arrow):
        mid = Arrow(core.dom, Union(core.cod, u))
        d = _t_subs(d, SubDerivation("ex-arru", ty, mid))
        ty = mid

    if not isinstance(ty, Arrow):
        return BidiResult(NO, reason="applying a non-function")

    ra = _check(ctx, arg, ty.dom)
    if ra.is_yes:
        node = TypingDerivation("app", ctx, App(d.term, ra.derivation.term),
                                ty.cod, (d, ra.derivation))
        return BidiResult(YES, node)

    # corrupt on demand: widen the whole function type by a row that lets
    # the argument through
    sa = _synth(ctx, arg)
    if not sa.is_yes:
        return BidiResult(sa.verdict, reason=f"argument: {sa.reason or ra.reason}")
    arg_canon = canonicalize(sa.derivation.type).type
    deltas = []
    rows_diff = _rows(arg_canon).difference(_rows(ty.dom))
    if rows_diff:
        deltas.append(rows_diff)
    names_diff = _names_in(arg_canon).difference(_names_in(ty.dom))
    if names_diff and names_diff not in deltas:
        deltas.append(names_diff)
    for delta in deltas:
        lifted = canonicalize(Corrupt(ty, delta))
        if not isinstance(lifted.type, Arrow):
            continue
        rd = decide_sub(sa.derivation.type, lifted.type.dom)
        if rd.verdict != YES:
            continue
        fun_d = _t_subs(d, d_trans(d_into_corrupt(ty, delta), lifted.fwd))
        arg_d = _t_subs(sa.derivation, rd.derivation)
        node = TypingDerivation("app", ctx,
                                App(fun_d.term, arg_d.term),
                                lifted.type.cod, (fun_d, arg_d))
        return BidiResult(YES, node)
    if not deltas:
        return BidiResult(ra.verdict, reason=f"argument: {ra.reason}")
    return BidiResult(UNKNOWN, reason=f"argument: {ra.reason}")


# -- rec/fold elimination ---------------------------------------------------


def _peel_domains(ty: Type, n: int) -> Optional[Tuple[PyList[Type], Type]]:
    doms = []
    for _ in range(n):
        if not isinstance(ty, Arrow):
            return None
        doms.append(ty.dom)
        ty = ty.cod
    return doms, ty


def _scrut_rows_nat(ty: Type) -> Optional[Tuple[ExcSet, ExcSet]]:
    """Read (delta, delta') off a canonical scrutinee type over nat."""
    u, core = _split_union(canonicalize(ty).type)
    if isinstance(core, Nat):
        return EMPTY, u
    if isinstance(core, Corrupt) and isinstance(core.body, Nat):
        return core.delta, u
    return None


def _scrut_rows_list(ty: Type) -> Optional[Tuple[ExcSet, ExcSet, Type]]:
    u, core = _split_union(canonicalize(ty).type)
    if isinstance(core, List):
        return EMPTY, u, core.elem
    if isinstance(core, Corrupt) and isinstance(core.body, List):
        return core.delta, u, core.body.elem
    return None


def _check_recfold(ctx: TypingContext, head: Term, args: PyList[Term],
                   expected: Optional[Type]) -> Optional[BidiResult]:
    """Solve a rec/fold elimination. args has length <= 3; expected is the
    type of the partial application (None in pure synthesis mode).
    Returns None when the shape cannot be solved here (caller falls back)."""
    is_rec = isinstance(head, Rec)
    missing = 3 - len(args)

    # determine the scrutinee slot type rows (delta, delta') and, for fold,
    # the element type
    beta: Optional[Type] = None
    if len(args) == 3:
        s = _synth(ctx, args[2])
        if not s.is_yes:
            return None
        rows = (_scrut_rows_nat(s.derivation.type) if is_rec
                else _scrut_rows_list(s.derivation.type))
        if rows is None:
            return BidiResult(NO, reason="recursor scrutinee has a wrong shape")
        if is_rec:
            delta0, delta2 = rows
        else:
            delta0, delta2, beta = rows
    else:
        if expected is None:
            return None
        peeled = _peel_domains(expected, missing)
        if peeled is None:
            return BidiResult(NO, reason="recursor partial application "
                                         "needs an arrow type")
        doms, _result = peeled
        scrut_dom = doms[-1]
        rows = (_scrut_rows_nat(scrut_dom) if is_rec
                else _scrut_rows_list(scrut_dom))
        if rows is None:
            return BidiResult(NO, reason="recursor scrutinee slot has a "
                                         "wrong shape")
        if is_rec:
            delta0, delta2 = rows
        else:
            delta0, delta2, beta = rows

    # result row candidates come from the expected result type
    result_ty: Optional[Type] = None
    if expected is not None:
        peeled = _peel_domains(expected, missing)
        if peeled is None:
            return BidiResult(NO, reason="expected type is not an arrow chain")
        result_ty = peeled[1]

    delta_cands = [delta0]
    alpha_cands: PyList[Type] = []
    if result_ty is not None:
        rc = canonicalize(result_ty).type
        u_r, core_r = _split_union(rc)
        grown = exc_union(delta0, u_r)
        if grown != delta0:
            delta_cands.append(grown)
        alpha_cands.append(rc)
        for dc in delta_cands:
            provided = exc_union(dc, delta2)
            if provided and provided.issubset(u_r):
                leftover = u_r.difference(provided)
                alpha_cands.append(Union(core_r, leftover) if leftover else core_r)
    else:
        sx = _synth(ctx, args[0]) if args else None
        if sx is None or not sx.is_yes:
            return None
        xt = canonicalize(sx.derivation.type).type
        u_x, core_x = _split_union(xt)
        alpha_cands.append(xt)
        for dc in delta_cands:
            if dc and dc.issubset(u_x):
                leftover = u_x.difference(dc)
                alpha_cands.append(Union(core_x, leftover) if leftover else core_x)

    seen = set()
    from .syntax import type_key
    attempts = []
    for dc in delta_cands:
        for ac in alpha_cands:
            k = (dc.names, type_key(ac))
            if k not in seen:
                seen.add(k)
                attempts.append((dc, ac))

    last: Optional[BidiResult] = None
    for delta, alpha in attempts:
        r = _try_recfold(ctx, head, args, delta, delta2, alpha, beta,
                         expected)
        if r.is_yes:
            return r
        last = r
    if last is None:
        return BidiResult(UNKNOWN, reason="no recursor instantiation found")
    return BidiResult(UNKNOWN if last.verdict == NO else last.verdict,
                      reason=f"recursor: {last.reason}")


def _try_recfold(ctx, head, args, delta, delta2, alpha, beta, expected):
    is_rec = isinstance(head, Rec)
    if is_rec:
        scheme = rec_scheme(delta, delta2)
        node = TypingDerivation("rec", ctx, head, scheme)
        inst = subst_type(scheme.body, scheme.var, alpha)
        node = _t_subs(node, SubDerivation("f-inst", scheme, inst,
                                           witness=alpha))
    else:
        scheme = fold_scheme(delta, delta2)
        node = TypingDerivation("fold", ctx, head, scheme)
        inner1 = subst_type(scheme.body, scheme.var, alpha)
        node = _t_subs(node, SubDerivation("f-inst", scheme, inner1,
                                           witness=alpha))
        assert isinstance(inner1, Forall)
        inner2 = subst_type(inner1.body, inner1.var, beta)
        node = _t_subs(node, SubDerivation("f-inst", inner1, inner2,
                                           witness=beta))
    d = node
    for a in args:
        r = _apply(ctx, d, a)
        if not r.is_yes:
            return r
        d = r.derivation
    if expected is not None:
        sub = decide_sub(d.type, expected)
        if sub.verdict != YES:
            return BidiResult(sub.verdict, reason=sub.reason)
        d = _t_subs(d, sub.derivation)
    return BidiResult(YES, d)


# -- corruption relation ----------------------------------------------------


@dataclass(frozen=True)
class CorruptionWitness:
    """Proof that the second term corrupts the first over a name set."""

    rule: str  # c-id, c-rai, c-lam, c-app, c-try
    source: Term
    target: Term
    children: Tuple["CorruptionWitness", ...] = ()


def is_corruption(m: Term, n: Term, delta: ExcSet) -> Optional[CorruptionWitness]:
    """Decide the corruption relation between erased terms."""
    return _corr(erase(m), erase(n), delta)


def _corr(m: Term, n: Term, delta: ExcSet) -> Optional[CorruptionWitness]:
    if isinstance(n, Raise) and n.exc in delta:
        return CorruptionWitness("c-rai", m, n)
    if alpha_eq(m, n):
        return CorruptionWitness("c-id", m, n)
    if isinstance(m, Lam) and isinstance(n, Lam):
        nv = fresh_name(m.var, free_vars(m.body) | free_vars(n.body))
        c = _corr(subst_term(m.body, m.var, Var(nv)),
                  subst_term(n.body, n.var, Var(nv)), delta)
        if c is not None:
            return CorruptionWitness("c-lam", m, n, (c,))
    if isinstance(m, App) and isinstance(n, App):
        cf = _corr(m.fn, n.fn, delta)
        ca = _corr(m.arg, n.arg, delta)
        if cf is not None and ca is not None:
            return CorruptionWitness("c-app", m, n, (cf, ca))
    if isinstance(m, Try) and isinstance(n, Try) and m.exc == n.exc:
        cb = _corr(m.body, n.body, delta)
        ch = _corr(m.handler, n.handler, delta)
        if cb is not None and ch is not None:
            return CorruptionWitness("c-try", m, n, (cb, ch))
    return None


def corrupt_annotations(t: Term, delta: ExcSet) -> Term:
    """Corrupt every checker hint in the term by delta."""
    if isinstance(t, Lam):
        anno = corrupt_type(t.anno, delta) if t.anno is not None else None
        return Lam(t.var, corrupt_annotations(t.body, delta), anno)
    if isinstance(t, App):
        return App(corrupt_annotations(t.fn, delta),
                   corrupt_annotations(t.arg, delta))
    if isinstance(t, Try):
        return Try(corrupt_annotations(t.body, delta), t.exc,
                   corrupt_annotations(t.handler, delta))
    if isinstance(t, Seq):
        return Seq(corrupt_annotations(t.left, delta),
                   corrupt_annotations(t.right, delta))
    if isinstance(t, Annot):
        return Annot(corrupt_annotations(t.term, delta),
                     corrupt_type(t.type, delta))
    return t


def apply_witness(m: Term, w: CorruptionWitness) -> Term:
    """Rebuild the corrupted term over the annotated source m."""
    if isinstance(m, Annot):
        return Annot(apply_witness(m.term, w), m.type)
    if w.rule == "c-rai":
        return w.target
    if w.rule == "c-id":
        return m
    if w.rule == "c-lam":
        assert isinstance(m, Lam)
        return Lam(m.var, apply_witness(m.body, w.children[0]), m.anno)
    if w.rule == "c-app":
        assert isinstance(m, App)
        return App(apply_witness(m.fn, w.children[0]),
                   apply_witness(m.arg, w.children[1]))
    if w.rule == "c-try":
        assert isinstance(m, Try)
        return Try(apply_witness(m.body, w.children[0]), m.exc,
                   apply_witness(m.handler, w.children[1]))
    raise ValueError(f"bad witness rule {w.rule}")


def corruption_theorem_probe(ctx: TypingContext, m: Term, a: Type, n: Term,
                             delta: ExcSet) -> bool:
    """If m checks at a and n corrupts m over delta, the re-annotated n must
    check at the delta-corruption of a."""
    w = is_corruption(m, n, delta)
    if w is None:
        raise ValueError("second term is not a corruption of the first")
    if not bidi_check(ctx, m, a).is_yes:
        raise ValueError("source term does not check at the source type")
    n2 = corrupt_annotations(apply_witness(m, w), delta)
    target = corrupt_type(a, delta)
    return bidi_check(ctx, n2, target).is_yes
