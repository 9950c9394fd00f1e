"""Lexer and recursive-descent parser for ``.poise`` policy files.

The accepted grammar is documented in ``docs/grammar.md``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import PolicySyntaxError
from .syntax import (
    And, BinOp, BoolConst, Cmp, ConstDef, ConstList, Const, ContextFieldDecl,
    Count, DEFAULT_WINDOW_NS, Drop, Flood, Fwd, If, Log, Masked, Member,
    MonitorExpr, Name, Not, Or, PolicyAst, Prefix, StrLit, StringDef, par,
)

KEYWORDS = {
    "def", "field", "header", "string", "if", "then", "else", "match", "count",
    "in", "prefix", "drop", "fwd", "flood", "log", "true", "false", "bit", "int",
}

_DURATION_UNITS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000, "m": 60_000_000_000}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<ipv4>\d+\.\d+\.\d+\.\d+)
  | (?P<hex>0[xX][0-9a-fA-F]+)
  | (?P<duration>\d+(?:ns|us|ms|s|m)\b)
  | (?P<int>\d+(?![A-Za-z_]))
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<bad>>>|<<|\*\*|//)
  | (?P<op>&&&|==|!=|<=|>=|[-+*/%<>!&|()\[\]{},=:;])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    value: object
    line: int
    col: int


def parse_ipv4(text):
    parts = [int(p) for p in text.split(".")]
    if any(p > 255 for p in parts):
        raise ValueError(f"bad IPv4 address {text!r}")
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3]


def format_ipv4(value):
    return ".".join(str((value >> s) & 0xFF) for s in (24, 16, 8, 0))


def tokenize(source):
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        col = i - line_start + 1
        if m is None:
            raise PolicySyntaxError(f"unknown token {source[i]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        i = m.end()
        if kind == "nl":
            line += 1
            line_start = i
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "bad":
            raise PolicySyntaxError(f"unknown token {text!r}", line, col)
        value = None
        if kind == "ipv4":
            try:
                value = parse_ipv4(text)
            except ValueError as e:
                raise PolicySyntaxError(str(e), line, col) from None
        elif kind == "hex":
            kind, value = "int", int(text, 16)
        elif kind == "int":
            value = int(text, 10)
        elif kind == "duration":
            num, unit = re.fullmatch(r"(\d+)([a-z]+)", text).groups()
            value = int(num) * _DURATION_UNITS[unit]
        elif kind == "string":
            try:
                value = json.loads(text)
            except ValueError:
                raise PolicySyntaxError(f"bad string literal {text}", line, col) from None
        elif kind == "ident" and text in KEYWORDS:
            kind = "kw"
        tokens.append(Token(kind, text, value, line, col))
    tokens.append(Token("eof", "", None, line, i - line_start + 1))
    return tokens


class Parser:
    def __init__(self, source, name=None):
        self.toks = tokenize(source)
        self.i = 0
        self.name = name
        self._furthest = None

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None):
        t = self.tok
        if kind is not None and t.kind != kind:
            return False
        return t.text == text and t.kind in ("op", "kw")

    def accept(self, text):
        if self.at(text):
            self.i += 1
            return True
        return False

    def error(self, msg, tok=None):
        tok = tok or self.tok
        err = PolicySyntaxError(msg, tok.line, tok.col)
        if self._furthest is None or (tok.line, tok.col) > (self._furthest.line, self._furthest.col):
            self._furthest = err
        return err

    def expect(self, text):
        if not self.accept(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.toks[self.i - 1]

    def expect_kind(self, kind):
        t = self.tok
        if t.kind != kind:
            shown = t.text or "end of input"
            raise self.error(f"expected {kind}, found {shown!r}")
        self.i += 1
        return t

    def pos(self, tok=None):
        tok = tok or self.tok
        return (tok.line, tok.col)

    # -- top level -----------------------------------------------------------

    def parse_policy(self):
        fields, lists, consts, strings, monitors, stmts = [], [], [], [], [], []
        while self.tok.kind != "eof":
            t = self.tok
            if self.at("def"):
                decl = self.parse_def()
                (lists if isinstance(decl, ConstList) else consts).append(decl)
            elif self.at("field"):
                self.i += 1
                fields.append(self.parse_field_decl(None))
            elif self.at("header"):
                fields.extend(self.parse_header())
            elif self.at("string"):
                self.i += 1
                text = self.expect_kind("string").value
                self.expect("=")
                strings.append(StringDef(text, self.expect_kind("int").value, pos=self.pos(t)))
            elif t.kind == "ident" and self.peek().text == "=" and self.peek().kind == "op":
                monitors.append(self.parse_monitor())
            else:
                stmts.append(self.parse_par())
        body = par(stmts) if stmts else None
        return PolicyAst(tuple(fields), tuple(lists), tuple(consts), tuple(strings),
                         tuple(monitors), body, name=self.name)

    def parse_def(self):
        start = self.expect("def")
        name = self.expect_kind("ident").text
        self.expect("=")
        if self.at("["):
            return ConstList(name, self.parse_list_items(), pos=self.pos(start))
        return ConstDef(name, self.parse_expr(), pos=self.pos(start))

    def parse_list_items(self):
        self.expect("[")
        items = []
        if not self.at("]"):
            items.append(self.parse_list_item())
            while self.accept(","):
                items.append(self.parse_list_item())
        self.expect("]")
        return tuple(items)

    def parse_list_item(self):
        t = self.tok
        p = self.pos()
        if t.kind == "string":
            self.i += 1
            return StrLit(t.value, pos=p)
        neg = self.accept("-")
        t = self.tok
        if t.kind not in ("int", "ipv4"):
            raise self.error(f"expected list constant, found {t.text!r}")
        self.i += 1
        value = -t.value if neg else t.value
        if self.accept("/"):
            length = self.expect_kind("int").value
            return Prefix(value, length, pos=p)
        if self.accept("&&&"):
            mask = self.expect_kind("int" if self.tok.kind == "int" else "ipv4").value
            return Masked(value, mask, pos=p)
        return Const(value, pos=p)

    def parse_type(self):
        if self.accept("bit") or self.at("int"):
            signed = self.tok.text == "int"
            if signed:
                self.i += 1
            self.expect("<")
            width = self.expect_kind("int").value
            self.expect(">")
            return width, signed
        return self.expect_kind("int").value, False

    def parse_field_decl(self, header):
        t = self.expect_kind("ident")
        self.expect(":")
        width, signed = self.parse_type()
        return ContextFieldDecl(t.text, width, signed, header, pos=self.pos(t))

    def parse_header(self):
        self.expect("header")
        hname = self.expect_kind("ident").text
        self.expect("{")
        decls = []
        while not self.at("}"):
            decls.append(self.parse_field_decl(hname))
            while self.accept(";") or self.accept(","):
                pass
        self.expect("}")
        return decls

    def parse_monitor(self):
        t = self.expect_kind("ident")
        self.expect("=")
        self.expect("count")
        pred, window = self.parse_count_args()
        return MonitorExpr(t.text, pred, window if window is not None else DEFAULT_WINDOW_NS,
                           pos=self.pos(t))

    def parse_count_args(self):
        self.expect("(")
        pred = self.parse_pred()
        window = None
        if self.accept(","):
            window = self.expect_kind("duration").value
        self.expect(")")
        return pred, window

    # -- policies ------------------------------------------------------------

    def parse_par(self):
        parts = [self.parse_pol_atom()]
        while self.accept("|"):
            parts.append(self.parse_pol_atom())
        return par(parts)

    def parse_pol_atom(self):
        t = self.tok
        p = self.pos()
        if self.accept("drop"):
            return Drop(pos=p)
        if self.accept("flood"):
            return Flood(pos=p)
        if self.accept("log"):
            return Log(pos=p)
        if self.accept("fwd"):
            self.expect("(")
            pt = self.tok
            if pt.kind not in ("ident", "int"):
                raise self.error(f"expected port, found {pt.text!r}")
            self.i += 1
            self.expect(")")
            return Fwd(pt.value if pt.kind == "int" else pt.text, pos=p)
        if self.accept("if"):
            pred = self.parse_pred()
            self.expect("then")
            then = self.parse_pol_atom()
            orelse = self.parse_pol_atom() if self.accept("else") else None
            return If(pred, then, orelse, pos=p)
        if self.accept("("):
            inner = self.parse_par()
            self.expect(")")
            return inner
        raise self.error(f"expected policy, found {t.text or 'end of input'!r}")

    # -- predicates ----------------------------------------------------------

    def parse_pred(self):
        left = self.parse_and()
        while self.at("|"):
            p = self.pos()
            self.i += 1
            left = Or(left, self.parse_and(), pos=p)
        return left

    def parse_and(self):
        left = self.parse_unary()
        while self.at("&"):
            p = self.pos()
            self.i += 1
            left = And(left, self.parse_unary(), pos=p)
        return left

    def parse_unary(self):
        if self.at("!"):
            p = self.pos()
            self.i += 1
            return Not(self.parse_unary(), pos=p)
        return self.parse_pred_atom()

    def parse_pred_atom(self):
        p = self.pos()
        if self.accept("match"):
            self.expect("(")
            inner = self.parse_pred()
            self.expect(")")
            return inner
        if self.accept("true"):
            return BoolConst(True, pos=p)
        if self.accept("false"):
            return BoolConst(False, pos=p)
        if self.at("("):
            save = self.i
            try:
                return self.parse_comparison()
            except PolicySyntaxError:
                self.i = save
            self.expect("(")
            inner = self.parse_pred()
            self.expect(")")
            return inner
        return self.parse_comparison()

    def parse_comparison(self):
        p = self.pos()
        left = self.parse_expr()
        if self.at("in"):
            if not isinstance(left, Name):
                raise self.error("left side of 'in' must be a field name")
            self.i += 1
            if self.accept("prefix"):
                self.expect("(")
                items = [self.parse_list_item()]
                while self.accept(","):
                    items.append(self.parse_list_item())
                self.expect(")")
                return Member(left.ident, None, tuple(items), pos=p)
            return Member(left.ident, self.expect_kind("ident").text, pos=p)
        ops = ("==", "!=", "<=", ">=", "<", ">")
        if not (self.tok.kind == "op" and self.tok.text in ops):
            raise self.error(f"expected comparison operator, found {self.tok.text or 'end of input'!r}")
        result = None
        while self.tok.kind == "op" and self.tok.text in ops:
            op_tok = self.tok
            self.i += 1
            right = self.parse_expr()
            cmp = Cmp(op_tok.text, left, right, pos=self.pos(op_tok))
            result = cmp if result is None else And(result, cmp, pos=p)
            left = right
        return result

    # -- expressions ---------------------------------------------------------

    def parse_expr(self):
        left = self.parse_term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op_tok = self.tok
            self.i += 1
            left = BinOp(op_tok.text, left, self.parse_term(), pos=self.pos(op_tok))
        return left

    def parse_term(self):
        left = self.parse_factor()
        while self.tok.kind == "op" and self.tok.text in ("*", "/", "%"):
            op_tok = self.tok
            self.i += 1
            left = BinOp(op_tok.text, left, self.parse_factor(), pos=self.pos(op_tok))
        return left

    def parse_factor(self):
        t = self.tok
        p = self.pos()
        if t.kind in ("int", "ipv4"):
            self.i += 1
            return Const(t.value, pos=p)
        if t.kind == "string":
            self.i += 1
            return StrLit(t.value, pos=p)
        if t.kind == "ident":
            self.i += 1
            return Name(t.text, pos=p)
        if self.accept("count"):
            pred, window = self.parse_count_args()
            return Count(pred, window, pos=p)
        if self.accept("-"):
            operand = self.parse_factor()
            if isinstance(operand, Const):
                return Const(-operand.value, pos=p)
            return BinOp("-", Const(0, pos=p), operand, pos=p)
        if self.accept("("):
            inner = self.parse_expr()
            self.expect(")")
            return inner
        raise self.error(f"expected expression, found {t.text or 'end of input'!r}")


def parse(source, name=None):
    """Parse one policy from ``source`` text into a :class:`PolicyAst`."""
    parser = Parser(source, name)
    try:
        return parser.parse_policy()
    except PolicySyntaxError as e:
        # after backtracking, the deepest failure is the useful one
        best = parser._furthest
        if best is not None and (best.line, best.col) > (e.line, e.col):
            raise best from None
        raise


_SEPARATOR = re.compile(r"^---[ \t]*$", re.MULTILINE)


def parse_file_text(text, name=None):
    """Parse a ``.poise`` document holding one or more ``---``-separated policies."""
    policies = []
    line_offset = 0
    for idx, chunk in enumerate(_SEPARATOR.split(text)):
        pname = f"{name}#{idx}" if name else None
        try:
            if chunk.strip():
                policies.append(parse(chunk, pname))
        except PolicySyntaxError as e:
            raise PolicySyntaxError(e.msg, (e.line or 0) + line_offset, e.col) from None
        line_offset += chunk.count("\n")
    return policies


def parse_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_file_text(fh.read(), name=str(path))
