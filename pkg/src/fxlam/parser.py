"""Concrete syntax: lexer, parsers and pretty-printers that round-trip.

Grammar sketch (line comments start with --):

  term  ::= "\\" ident [":" type] "." term
          | "try" term "with" ident {"," ident} "->" term
          | appterm  [";" term]          -- seq only where allowed (model files)
  appterm ::= appterm atom | atom
  atom  ::= ident | natural | "S" | "rec" | "nil" | "cons" | "fold"
          | "raise" ident | "#" | "(" term [":" type] ")"
          | "[" [term {";" term}] "]"

  type  ::= "forall" ident "." type | arrtype
  arrtype ::= posttype ["->" arrtype]
  posttype ::= basetype {("+" | "^") "{" [ident {"," ident}] "}"}
  basetype ::= ident | "nat" | "list" basetype | "(" type ")"

A corpus (.fx) file is a sequence of statements:

  let name [: type] = term
  eval term
  check term : type

Multi-name try is sugar: try M with a, b -> N nests as
try (try M with a -> N) with b -> N (leftmost name innermost).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List as PyList, Optional, Tuple

from .syntax import (
    Annot, App, Arrow, CONS, Corrupt, DAIMON, ExcSet, FOLD, Forall, Lam,
    List, NAT, NIL, REC, Raise, SUCC, Seq, Term, Try, TVar, Type, Union,
    Var, ZERO, as_numeral, check_exc_name, numeral, spine,
)

TERM_KEYWORDS = {"try", "with", "raise", "rec", "nil", "cons", "fold", "S", "let"}
TYPE_KEYWORDS = {"forall", "nat", "list"}
RESERVED = TERM_KEYWORDS | TYPE_KEYWORDS


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start: Tuple[int, int]
    end: Tuple[int, int]

    def __str__(self) -> str:
        (l1, c1), (l2, c2) = self.start, self.end
        return f"{self.file}:{l1}:{c1}-{l2}:{c2}"


class ParseError(Exception):
    def __init__(self, span: SourceSpan, message: str, expected=()):
        self.span = span
        self.message = message
        self.expected = list(expected)
        super().__init__(f"{span}: {message}" +
                         (f" (expected {', '.join(self.expected)})" if self.expected else ""))


_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r\n]+)
      | (?P<comment>--[^\n]*)
      | (?P<arrow>->)
      | (?P<name>[a-zA-Z][A-Za-z0-9_']*)
      | (?P<int>\d+)
      | (?P<sym>[\\().\[\]{};,:+^#=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # name | int | sym | arrow | eof
    text: str
    span: SourceSpan


def tokenize(src: str, filename: str = "<input>") -> PyList[Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            span = SourceSpan(filename, (line, col), (line, col + 1))
            raise ParseError(span, f"unexpected character {src[pos]!r}")
        text = m.group(0)
        start = (line, col)
        for ch in text:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        pos = m.end()
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        tokens.append(Token(kind, text, SourceSpan(filename, start, (line, col))))
    tokens.append(Token("eof", "", SourceSpan(filename, (line, col), (line, col))))
    return tokens


class _Parser:
    def __init__(self, tokens: PyList[Token], allow_seq: bool = False,
                 stmt_mode: bool = False):
        self.tokens = tokens
        self.pos = 0
        self.allow_seq = allow_seq
        # In statement mode, "let"/"eval"/"check" at the start of a line end
        # the current term, so a definition named eval stays referenceable.
        self.stmt_mode = stmt_mode

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if not self.at(kind, text):
            want = text if text is not None else kind
            raise ParseError(tok.span, f"unexpected {tok.text!r}", [want])
        return self.next()

    def ident(self, role: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "name" or tok.text in RESERVED:
            raise ParseError(tok.span, f"unexpected {tok.text!r}", [role])
        return self.next().text

    # -- terms ------------------------------------------------------------

    def term(self, seq_ok: Optional[bool] = None) -> Term:
        if seq_ok is None:
            seq_ok = self.allow_seq
        t = self.term_noseq()
        if seq_ok and self.at("sym", ";"):
            self.next()
            return Seq(t, self.term(seq_ok=True))
        return t

    def term_noseq(self) -> Term:
        tok = self.peek()
        if tok.kind == "sym" and tok.text == "\\":
            self.next()
            var = self.ident("variable")
            anno = None
            if self.at("sym", ":"):
                self.next()
                anno = self.type()
            self.expect("sym", ".")
            return Lam(var, self.term_noseq(), anno)
        if tok.kind == "name" and tok.text == "try":
            self.next()
            body = self.term_noseq()
            self.expect("name", "with")
            names = [self.ident("exception name")]
            while self.at("sym", ","):
                self.next()
                names.append(self.ident("exception name"))
            self.expect("arrow")
            handler = self.term_noseq()
            for name in names:
                check_exc_name(name)
                body = Try(body, name, handler)
            return body
        return self.appterm()

    def appterm(self) -> Term:
        t = self.atom()
        while self._at_atom_start():
            t = App(t, self.atom())
        return t

    def _at_atom_start(self) -> bool:
        tok = self.peek()
        if tok.kind == "int":
            return True
        if tok.kind == "sym":
            return tok.text in ("(", "[", "#")
        if tok.kind != "name":
            return False
        if (self.stmt_mode and tok.text in ("let", "eval", "check")
                and tok.span.start[1] == 1):
            return False
        if tok.text in ("raise", "S", "rec", "nil", "cons", "fold"):
            return True
        return tok.text not in RESERVED

    def atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return numeral(int(tok.text))
        if tok.kind == "sym" and tok.text == "#":
            self.next()
            return DAIMON
        if tok.kind == "sym" and tok.text == "(":
            self.next()
            t = self.term(seq_ok=self.allow_seq)
            if self.at("sym", ":"):
                self.next()
                ty = self.type()
                self.expect("sym", ")")
                return Annot(t, ty)
            self.expect("sym", ")")
            return t
        if tok.kind == "sym" and tok.text == "[":
            self.next()
            elems = []
            if not self.at("sym", "]"):
                elems.append(self.term(seq_ok=False))
                while self.at("sym", ";"):
                    self.next()
                    elems.append(self.term(seq_ok=False))
            self.expect("sym", "]")
            t: Term = NIL
            for e in reversed(elems):
                t = App(App(CONS, e), t)
            return t
        if tok.kind == "name":
            text = tok.text
            if text == "raise":
                self.next()
                return Raise(self.ident("exception name"))
            if text == "S":
                self.next()
                return SUCC
            if text == "rec":
                self.next()
                return REC
            if text == "nil":
                self.next()
                return NIL
            if text == "cons":
                self.next()
                return CONS
            if text == "fold":
                self.next()
                return FOLD
            if text in RESERVED:
                raise ParseError(tok.span, f"unexpected keyword {text!r}", ["term"])
            self.next()
            return Var(text)
        raise ParseError(tok.span, f"unexpected {tok.text!r}", ["term"])

    # -- types ------------------------------------------------------------

    def type(self) -> Type:
        if self.at("name", "forall"):
            self.next()
            var = self.ident("type variable")
            self.expect("sym", ".")
            return Forall(var, self.type())
        return self.arrtype()

    def arrtype(self) -> Type:
        t = self.posttype()
        if self.at("arrow"):
            self.next()
            return Arrow(t, self.arrtype())
        return t

    def posttype(self) -> Type:
        t = self.basetype()
        while self.at("sym", "+") or self.at("sym", "^"):
            op = self.next().text
            self.expect("sym", "{")
            names = []
            if not self.at("sym", "}"):
                names.append(self.ident("exception name"))
                while self.at("sym", ","):
                    self.next()
                    names.append(self.ident("exception name"))
            self.expect("sym", "}")
            delta = ExcSet(names)
            t = Union(t, delta) if op == "+" else Corrupt(t, delta)
        return t

    def basetype(self) -> Type:
        tok = self.peek()
        if tok.kind == "name" and tok.text == "nat":
            self.next()
            return NAT
        if tok.kind == "name" and tok.text == "list":
            self.next()
            return List(self.basetype())
        if tok.kind == "sym" and tok.text == "(":
            self.next()
            t = self.type()
            self.expect("sym", ")")
            return t
        if tok.kind == "name" and tok.text not in RESERVED:
            self.next()
            return TVar(tok.text)
        raise ParseError(tok.span, f"unexpected {tok.text!r}", ["type"])


def parse_term(src: str, filename: str = "<term>", allow_seq: bool = True) -> Term:
    p = _Parser(tokenize(src, filename), allow_seq=allow_seq)
    t = p.term()
    p.expect("eof")
    return t


def parse_type(src: str, filename: str = "<type>") -> Type:
    p = _Parser(tokenize(src, filename))
    t = p.type()
    p.expect("eof")
    return t


# ---------------------------------------------------------------------------
# Corpus files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LetDef:
    name: str
    anno: Optional[Type]
    term: Term
    span: SourceSpan


@dataclass(frozen=True)
class EvalPragma:
    term: Term
    span: SourceSpan


@dataclass(frozen=True)
class CheckPragma:
    term: Term
    type: Type
    span: SourceSpan


def parse_corpus(src: str, filename: str = "<corpus>", allow_seq: bool = False):
    """Parse a .fx file into a list of LetDef / EvalPragma / CheckPragma."""
    p = _Parser(tokenize(src, filename), allow_seq=allow_seq, stmt_mode=True)
    items = []
    while not p.at("eof"):
        tok = p.peek()
        if p.at("name", "let"):
            p.next()
            name = p.ident("definition name")
            anno = None
            if p.at("sym", ":"):
                p.next()
                anno = p.type()
            p.expect("sym", "=")
            body = p.term()
            items.append(LetDef(name, anno, body, tok.span))
        elif p.at("name", "eval"):
            p.next()
            items.append(EvalPragma(p.term(), tok.span))
        elif p.at("name", "check"):
            p.next()
            t = p.term()
            p.expect("sym", ":")
            ty = p.type()
            items.append(CheckPragma(t, ty, tok.span))
        else:
            raise ParseError(tok.span, f"unexpected {tok.text!r}",
                             ["let", "eval", "check"])
    return items


# ---------------------------------------------------------------------------
# Pretty-printing
# ---------------------------------------------------------------------------

# Term precedence levels: 0 top (lambda/try bodies), 1 seq operand,
# 2 application function position, 3 argument / atom position.


def _list_elems(t: Term) -> Optional[PyList[Term]]:
    elems = []
    while True:
        if type(t) is type(NIL):
            return elems
        head, args = spine(t)
        if type(head) is type(CONS) and len(args) == 2:
            elems.append(args[0])
            t = args[1]
        else:
            return None


def print_term(t: Term, prec: int = 0) -> str:
    n = as_numeral(t)
    if n is not None:
        return str(n)
    elems = _list_elems(t)
    if elems is not None:
        return "[" + "; ".join(print_term(e, 1) for e in elems) + "]"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Lam):
        anno = ""
        if t.anno is not None:
            inner = print_type(t.anno)
            if isinstance(t.anno, (Arrow, Forall)):
                inner = f"({inner})"
            anno = f":{inner}"
        s = f"\\{t.var}{anno}. {print_term(t.body, 0)}"
        return f"({s})" if prec >= 2 else s
    if isinstance(t, App):
        s = f"{print_term(t.fn, 2)} {print_term(t.arg, 3)}"
        return f"({s})" if prec >= 3 else s
    if isinstance(t, Raise):
        s = f"raise {t.exc}"
        return f"({s})" if prec >= 2 else s
    if isinstance(t, Try):
        s = (f"try {print_term(t.body, 1)} with {t.exc} -> "
             f"{print_term(t.handler, 0)}")
        return f"({s})" if prec >= 2 else s
    if isinstance(t, Seq):
        s = f"{print_term(t.left, 1)} ; {print_term(t.right, 0)}"
        return f"({s})" if prec >= 1 else s
    if isinstance(t, Annot):
        return f"({print_term(t.term, 0)} : {print_type(t.type)})"
    names = {"Zero": "0", "Succ": "S", "Rec": "rec", "Nil": "nil",
             "Cons": "cons", "Fold": "fold", "Daimon": "#"}
    name = names.get(type(t).__name__)
    if name is None:
        raise TypeError(f"not a term: {t!r}")
    return name


# Type precedence levels: 0 top, 1 arrow domain, 2 postfix body / list body.


def print_type(t: Type, prec: int = 0) -> str:
    if isinstance(t, TVar):
        return t.name
    if isinstance(t, type(NAT)):
        return "nat"
    if isinstance(t, List):
        s = f"list {print_type(t.elem, 2)}"
        return f"({s})" if prec >= 2 else s
    if isinstance(t, Arrow):
        s = f"{print_type(t.dom, 1)} -> {print_type(t.cod, 0)}"
        return f"({s})" if prec >= 1 else s
    if isinstance(t, Forall):
        s = f"forall {t.var}. {print_type(t.body, 0)}"
        return f"({s})" if prec >= 1 else s
    if isinstance(t, (Union, Corrupt)):
        op = "+" if isinstance(t, Union) else "^"
        s = f"{print_type(t.body, 2)} {op} {t.delta}"
        return f"({s})" if prec >= 2 else s
    raise TypeError(f"not a type: {t!r}")
