"""Reduction: head steps, weak-head evaluation, full one-step reducts,
parallel reduction with complete developments, and the diamond probe.

The head strategy is leftmost-outermost, driving the scrutinee of try / rec /
fold (and the left of the model-only seq) when the outer rule pattern-matches
on a value there. It is deterministic, so traces reproduce bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import List as PyList, Optional, Tuple

from .syntax import (
    App, CONS, Cons, DAIMON, Daimon, FOLD, Fold, Lam, Nil, OpenTermError,
    Raise, REC, Rec, Seq, Succ, Term, Try, Var, Zero, Annot, erase,
    free_vars, is_regular_value, make_app, spine, subst_term, term_key,
)


@lru_cache(maxsize=1 << 18)
def _tkey(t: Term):
    return term_key(t)


@dataclass(frozen=True)
class Reduced:
    term: Term
    rule: str
    path: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Stuck:
    reason: str = ""


@dataclass(frozen=True)
class ValueReached:
    kind: str  # "regular" | "exception" | "daimon"
    exc: Optional[str] = None


@dataclass(frozen=True)
class FuelExhausted:
    fuel: int = 0


def value_kind(t: Term) -> ValueReached:
    if isinstance(t, Raise):
        return ValueReached("exception", t.exc)
    if isinstance(t, Daimon):
        return ValueReached("daimon")
    return ValueReached("regular")


def _wrap(r, child: int):
    if isinstance(r, Reduced):
        return Reduced(r.term, r.rule, (child,) + r.path)
    return r


def _rebuild(t: Term, child: int, sub: Term) -> Term:
    if isinstance(t, App):
        return App(sub, t.arg) if child == 0 else App(t.fn, sub)
    if isinstance(t, Lam):
        return Lam(t.var, sub, t.anno)
    if isinstance(t, Try):
        return Try(sub, t.exc, t.handler) if child == 0 else Try(t.body, t.exc, sub)
    if isinstance(t, Seq):
        return Seq(sub, t.right) if child == 0 else Seq(t.left, sub)
    raise TypeError(f"no child {child} in {t!r}")


def _step(t: Term):
    """One head step. Returns Reduced, Stuck, or ValueReached."""
    if isinstance(t, (Raise, Daimon, Lam)):
        return value_kind(t)
    if isinstance(t, Var):
        return Stuck(f"free variable {t.name}")
    if isinstance(t, Annot):
        raise ValueError("annotations must be erased before evaluation")
    if isinstance(t, Try):
        b = t.body
        if isinstance(b, Raise):
            if b.exc == t.exc:
                return Reduced(t.handler, "try-raise")
            return Reduced(b, "try-other")
        if isinstance(b, Daimon):
            return Reduced(DAIMON, "try-daimon")
        if is_regular_value(b, check_closed=False):
            return Reduced(b, "try-value")
        r = _step(b)
        if isinstance(r, Reduced):
            return Reduced(_rebuild(t, 0, r.term), r.rule, (0,) + r.path)
        return r if isinstance(r, Stuck) else Stuck("try of stuck body")
    if isinstance(t, Seq):
        if isinstance(t.left, Daimon):
            return Reduced(t.right, "seq-daimon")
        r = _step(t.left)
        if isinstance(r, Reduced):
            return Reduced(_rebuild(t, 0, r.term), r.rule, (0,) + r.path)
        if isinstance(r, ValueReached):
            return Stuck("seq of a non-daimon value")
        return r
    if isinstance(t, App):
        f = t.fn
        if isinstance(f, Lam):
            return Reduced(subst_term(f.body, f.var, t.arg), "beta")
        if isinstance(f, Raise):
            return Reduced(f, "raise-app")
        if isinstance(f, Daimon):
            return Reduced(DAIMON, "daimon-app")
        head, args = spine(t)
        if isinstance(head, Rec) and len(args) == 3:
            return _step_scrutinee(t, args, "rec")
        if isinstance(head, Fold) and len(args) == 3:
            return _step_scrutinee(t, args, "fold")
        r = _step(f)
        if isinstance(r, Reduced):
            return Reduced(_rebuild(t, 0, r.term), r.rule, (0,) + r.path)
        if isinstance(r, ValueReached):
            if is_regular_value(t, check_closed=False):
                return value_kind(t)
            return Stuck("over-applied value head")
        return r
    # bare constants
    return value_kind(t)


def _step_scrutinee(t: Term, args, which: str):
    x, y, n = args
    if which == "rec":
        if isinstance(n, Zero):
            return Reduced(x, "rec-zero")
        h, a = spine(n)
        if isinstance(h, Succ) and len(a) == 1:
            return Reduced(App(App(y, a[0]), make_app(REC, [x, y, a[0]])),
                           "rec-succ")
        if isinstance(n, Raise):
            return Reduced(n, "rec-raise")
        if isinstance(n, Daimon):
            return Reduced(DAIMON, "rec-daimon")
    else:
        if isinstance(n, Nil):
            return Reduced(x, "fold-nil")
        h, a = spine(n)
        if isinstance(h, Cons) and len(a) == 2:
            rest = make_app(FOLD, [x, y, a[1]])
            return Reduced(App(App(App(y, a[0]), a[1]), rest), "fold-cons")
        if isinstance(n, Raise):
            return Reduced(n, "fold-raise")
        if isinstance(n, Daimon):
            return Reduced(DAIMON, "fold-daimon")
    if is_regular_value(n, check_closed=False):
        return Stuck(f"{which} applied to a value outside its patterns")
    r = _step(n)
    if isinstance(r, Reduced):
        return Reduced(_rebuild(t, 1, r.term), r.rule, (1,) + r.path)
    if isinstance(r, ValueReached):
        return Stuck(f"{which} scrutinee unexpectedly a value")
    return r




def head_step(m: Term):
    """One step of the deterministic head strategy on a closed, erased term."""
    if free_vars(m):
        raise OpenTermError(f"open term: free {sorted(free_vars(m))}")
    return _step(m)


@dataclass
class Trace:
    initial: Term
    steps: PyList[Tuple[Term, str, Tuple[int, ...]]] = field(default_factory=list)
    fuel_used: int = 0
    outcome: object = None

    @property
    def final(self) -> Term:
        return self.steps[-1][0] if self.steps else self.initial

    def reached_value(self) -> bool:
        return isinstance(self.outcome, ValueReached)


def whnf(m: Term, fuel: int = 100000) -> Trace:
    """Drive m with the head strategy until a value, stuckness, or fuel out."""
    m = erase(m)
    if free_vars(m):
        raise OpenTermError(f"open term: free {sorted(free_vars(m))}")
    trace = Trace(initial=m)
    cur = m
    while True:
        r = _step(cur)
        if isinstance(r, (Stuck, ValueReached)):
            trace.outcome = r
            return trace
        if trace.fuel_used >= fuel:
            trace.outcome = FuelExhausted(fuel)
            return trace
        cur = r.term
        trace.steps.append((cur, r.rule, r.path))
        trace.fuel_used += 1


def serialize_trace(trace: Trace) -> str:
    from .parser import print_term
    lines = []
    for term, rule, path in trace.steps:
        where = "/".join(str(i) for i in path) if path else "root"
        lines.append(f"{rule} @ {where} : {print_term(term)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Full one-step reduction (congruence closure)
# ---------------------------------------------------------------------------


def _root_steps(t: Term):
    out = []
    if isinstance(t, App):
        f = t.fn
        if isinstance(f, Lam):
            out.append((subst_term(f.body, f.var, t.arg), "beta"))
        if isinstance(f, Raise):
            out.append((f, "raise-app"))
        if isinstance(f, Daimon):
            out.append((DAIMON, "daimon-app"))
        head, args = spine(t)
        if isinstance(head, Rec) and len(args) == 3:
            x, y, n = args
            if isinstance(n, Zero):
                out.append((x, "rec-zero"))
            h, a = spine(n)
            if isinstance(h, Succ) and len(a) == 1:
                out.append((App(App(y, a[0]), make_app(REC, [x, y, a[0]])),
                            "rec-succ"))
            if isinstance(n, Raise):
                out.append((n, "rec-raise"))
            if isinstance(n, Daimon):
                out.append((DAIMON, "rec-daimon"))
        if isinstance(head, Fold) and len(args) == 3:
            x, y, n = args
            if isinstance(n, Nil):
                out.append((x, "fold-nil"))
            h, a = spine(n)
            if isinstance(h, Cons) and len(a) == 2:
                rest = make_app(FOLD, [x, y, a[1]])
                out.append((App(App(App(y, a[0]), a[1]), rest), "fold-cons"))
            if isinstance(n, Raise):
                out.append((n, "fold-raise"))
            if isinstance(n, Daimon):
                out.append((DAIMON, "fold-daimon"))
    elif isinstance(t, Try):
        b = t.body
        if isinstance(b, Raise):
            if b.exc == t.exc:
                out.append((t.handler, "try-raise"))
            else:
                out.append((b, "try-other"))
        elif isinstance(b, Daimon):
            out.append((DAIMON, "try-daimon"))
        elif is_regular_value(b, check_closed=False):
            out.append((b, "try-value"))
    elif isinstance(t, Seq):
        if isinstance(t.left, Daimon):
            out.append((t.right, "seq-daimon"))
    return out


def step_any(t: Term) -> PyList[Reduced]:
    """All one-step reducts, including under binders and in all components."""
    out = [Reduced(n, rule, ()) for n, rule in _root_steps(t)]
    children = []
    if isinstance(t, App):
        children = [(0, t.fn), (1, t.arg)]
    elif isinstance(t, Lam):
        children = [(0, t.body)]
    elif isinstance(t, Try):
        children = [(0, t.body), (1, t.handler)]
    elif isinstance(t, Seq):
        children = [(0, t.left), (1, t.right)]
    elif isinstance(t, Annot):
        raise ValueError("annotations must be erased before evaluation")
    for idx, child in children:
        for r in step_any(child):
            out.append(Reduced(_rebuild(t, idx, r.term), r.rule,
                               (idx,) + r.path))
    return out


# ---------------------------------------------------------------------------
# Parallel reduction
# ---------------------------------------------------------------------------


def par_develop(t: Term) -> Term:
    """Complete development: fire every parallel-reduction rule at once."""
    if isinstance(t, Lam):
        return Lam(t.var, par_develop(t.body), t.anno)
    if isinstance(t, App):
        f = t.fn
        if isinstance(f, Lam):
            return subst_term(par_develop(f.body), f.var, par_develop(t.arg))
        if isinstance(f, Raise):
            return f
        if isinstance(f, Daimon):
            return DAIMON
        head, args = spine(t)
        if isinstance(head, Rec) and len(args) == 3:
            x, y, n = args
            if isinstance(n, Zero):
                return par_develop(x)
            h, a = spine(n)
            if isinstance(h, Succ) and len(a) == 1:
                xd, yd, nd = par_develop(x), par_develop(y), par_develop(a[0])
                return App(App(yd, nd), make_app(REC, [xd, yd, nd]))
            if isinstance(n, Raise):
                return n
            if isinstance(n, Daimon):
                return DAIMON
        if isinstance(head, Fold) and len(args) == 3:
            x, y, n = args
            if isinstance(n, Nil):
                return par_develop(x)
            h, a = spine(n)
            if isinstance(h, Cons) and len(a) == 2:
                xd, yd = par_develop(x), par_develop(y)
                ed, ld = par_develop(a[0]), par_develop(a[1])
                return App(App(App(yd, ed), ld), make_app(FOLD, [xd, yd, ld]))
            if isinstance(n, Raise):
                return n
            if isinstance(n, Daimon):
                return DAIMON
        return App(par_develop(f), par_develop(t.arg))
    if isinstance(t, Try):
        b = t.body
        if isinstance(b, Raise):
            return par_develop(t.handler) if b.exc == t.exc else b
        if isinstance(b, Daimon):
            return DAIMON
        if is_regular_value(b, check_closed=False):
            return par_develop(b)
        return Try(par_develop(b), t.exc, par_develop(t.handler))
    if isinstance(t, Seq):
        if isinstance(t.left, Daimon):
            return par_develop(t.right)
        return Seq(par_develop(t.left), par_develop(t.right))
    return t


def _dedup(terms) -> PyList[Term]:
    seen = {}
    for t in terms:
        seen.setdefault(_tkey(t), t)
    return list(seen.values())


@lru_cache(maxsize=1 << 18)
def _par_reducts(t: Term) -> Tuple[Term, ...]:
    out: PyList[Term] = []
    if isinstance(t, Lam):
        out = [Lam(t.var, b, t.anno) for b in _par_reducts(t.body)]
    elif isinstance(t, App):
        fs, as_ = _par_reducts(t.fn), _par_reducts(t.arg)
        out = [App(f, a) for f, a in product(fs, as_)]
        f = t.fn
        if isinstance(f, Lam):
            out += [subst_term(b, f.var, a)
                    for b, a in product(_par_reducts(f.body), as_)]
        if isinstance(f, Raise):
            out.append(f)
        if isinstance(f, Daimon):
            out.append(DAIMON)
        head, args = spine(t)
        if isinstance(head, Rec) and len(args) == 3:
            x, y, n = args
            if isinstance(n, Zero):
                out += list(_par_reducts(x))
            h, a = spine(n)
            if isinstance(h, Succ) and len(a) == 1:
                for xd, yd, nd in product(_par_reducts(x), _par_reducts(y),
                                          _par_reducts(a[0])):
                    out.append(App(App(yd, nd), make_app(REC, [xd, yd, nd])))
            if isinstance(n, Raise):
                out.append(n)
            if isinstance(n, Daimon):
                out.append(DAIMON)
        if isinstance(head, Fold) and len(args) == 3:
            x, y, n = args
            if isinstance(n, Nil):
                out += list(_par_reducts(x))
            h, a = spine(n)
            if isinstance(h, Cons) and len(a) == 2:
                for xd, yd, ed, ld in product(_par_reducts(x), _par_reducts(y),
                                              _par_reducts(a[0]),
                                              _par_reducts(a[1])):
                    out.append(App(App(App(yd, ed), ld),
                                   make_app(FOLD, [xd, yd, ld])))
            if isinstance(n, Raise):
                out.append(n)
            if isinstance(n, Daimon):
                out.append(DAIMON)
    elif isinstance(t, Try):
        bs, hs = _par_reducts(t.body), _par_reducts(t.handler)
        out = [Try(b, t.exc, h) for b, h in product(bs, hs)]
        b = t.body
        if isinstance(b, Raise):
            if b.exc == t.exc:
                out += list(hs)
            else:
                out.append(b)
        if isinstance(b, Daimon):
            out.append(DAIMON)
        if is_regular_value(b, check_closed=False) and not isinstance(b, Raise):
            out += list(bs)
    elif isinstance(t, Seq):
        ls, rs = _par_reducts(t.left), _par_reducts(t.right)
        out = [Seq(l, r) for l, r in product(ls, rs)]
        if isinstance(t.left, Daimon):
            out += list(rs)
    else:
        out = [t]
    return tuple(_dedup(out))


def par_reducts(t: Term) -> PyList[Term]:
    """All terms reachable by one parallel-reduction step (finite set)."""
    return list(_par_reducts(t))


def par_steps_to(a: Term, b: Term) -> bool:
    key = _tkey(b)
    return any(_tkey(x) == key for x in _par_reducts(a))


def check_diamond(m: Term, depth: int = 3) -> bool:
    """Every pair of one-step reducts (to the given depth) rejoins, with the
    complete development as the join point; parallel pairs are checked too."""
    frontier = [m]
    seen = set()
    for _ in range(depth):
        nxt = []
        for t in frontier:
            k = _tkey(t)
            if k in seen:
                continue
            seen.add(k)
            reducts = _dedup([r.term for r in step_any(t)])
            dev_key = _tkey(par_develop(t))
            parset = {_tkey(x) for x in _par_reducts(t)}
            if dev_key not in parset:
                return False
            # single-step reduction is contained in parallel reduction
            if any(_tkey(n) not in parset for n in reducts):
                return False
            # every parallel reduct (reducts included) rejoins at the
            # complete development in one parallel step
            for n in _par_reducts(t):
                if dev_key not in {_tkey(x) for x in _par_reducts(n)}:
                    return False
            nxt.extend(reducts)
        frontier = nxt
    return True


# ---------------------------------------------------------------------------
# Deep data normalization (for printing evaluation results)
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, fuel: int):
        self.left = fuel

    def spend(self, n: int):
        self.left -= n


def normalize_data(m: Term, fuel: int = 100000) -> Tuple[Term, object]:
    """Evaluate to weak head form, then recursively normalize numeral and
    list spines so data prints fully. Returns (term, outcome)."""
    budget = _Budget(fuel)
    term, outcome = _normalize(erase(m), budget)
    return term, outcome


def _normalize(m: Term, budget: _Budget):
    tr = whnf(m, max(budget.left, 0))
    budget.spend(tr.fuel_used)
    if not isinstance(tr.outcome, ValueReached):
        return tr.final, tr.outcome
    v = tr.final
    head, args = spine(v)
    if isinstance(head, Succ) and len(args) == 1:
        inner, out = _normalize(args[0], budget)
        return App(head, inner), out
    if isinstance(head, Cons) and len(args) == 2:
        e, out = _normalize(args[0], budget)
        if not isinstance(out, ValueReached):
            return App(App(head, e), args[1]), out
        rest, out = _normalize(args[1], budget)
        return App(App(head, e), rest), out
    return v, tr.outcome
