"""CSL abstract syntax, concrete-syntax parser, and exploration shortcuts.

Grammar (PRISM-property flavoured):

    state := ap | "true" | "false" | "!" state | state "&" state
           | state "|" state | "(" state ")"
           | ("P"|"S") cmp prob "[" inner "]"
    inner := path                         for P
           | state ( "|" state )?         for S ("|" separates the condition)
    path  := "X" interval? state | state "U" interval? state
           | "F" interval? state
    interval := "[" num "," (num|"inf") "]" | "<=" num
    ap    := poly cmp2 poly               cmp2 in < <= = >= >

Derived forms are desugared at parse time: F[I] p becomes true U[I] p,
a | b becomes !(!a & !b) at formula level, and a missing interval becomes
[0, inf).  Interval endpoints may also be a parameter name bound through
the `params` argument (used for time-bound sweeps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .poly import ExprSyntaxError, Poly, _ExprParser, _tokenize, number_to_fraction, render_poly


class FormulaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# atomic propositions: exact boolean expressions over population counts
# ---------------------------------------------------------------------------

_AP_OPS = ("<", "<=", "=", ">=", ">")


@dataclass(frozen=True)
class ApExpr:
    def eval(self, x) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class ApAtom(ApExpr):
    """poly cmp const, evaluated exactly in integer arithmetic."""

    poly: Poly
    op: str
    const: Fraction
    names: tuple[str, ...]

    def _scaled(self):
        cached = self.__dict__.get("_scaled_cache")
        if cached is None:
            cached = self.poly.scaled_int()
            object.__setattr__(self, "_scaled_cache", cached)
        return cached

    def eval(self, x) -> bool:
        # clear denominators once; integer compare is exact for any count
        iterms, den = self._scaled()
        lhs = 0
        for exps, c in iterms.items():
            m = c
            for xi, e in zip(x, exps):
                if e:
                    m *= xi ** e
            lhs += m
        rhs_num = self.const.numerator * den
        lhs *= self.const.denominator
        if self.op == "<":
            return lhs < rhs_num
        if self.op == "<=":
            return lhs <= rhs_num
        if self.op == "=":
            return lhs == rhs_num
        if self.op == ">=":
            return lhs >= rhs_num
        return lhs > rhs_num

    def render(self) -> str:
        return f"{render_poly(self.poly, self.names)} {self.op} {self.const}"


@dataclass(frozen=True)
class ApConst(ApExpr):
    value: bool

    def eval(self, x) -> bool:
        return self.value

    def render(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class ApNot(ApExpr):
    arg: ApExpr

    def eval(self, x) -> bool:
        return not self.arg.eval(x)

    def render(self) -> str:
        return f"!({self.arg.render()})"


@dataclass(frozen=True)
class ApAnd(ApExpr):
    left: ApExpr
    right: ApExpr

    def eval(self, x) -> bool:
        return self.left.eval(x) and self.right.eval(x)

    def render(self) -> str:
        return f"({self.left.render()} & {self.right.render()})"


@dataclass(frozen=True)
class ApOr(ApExpr):
    left: ApExpr
    right: ApExpr

    def eval(self, x) -> bool:
        return self.left.eval(x) or self.right.eval(x)

    def render(self) -> str:
        return f"({self.left.render()} | {self.right.render()})"


# ---------------------------------------------------------------------------
# formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeInterval:
    lo: float
    hi: float  # math.inf for unbounded

    def __post_init__(self):
        if self.lo < 0 or self.hi < self.lo:
            raise FormulaError(f"bad interval [{self.lo}, {self.hi}]")
        if math.isinf(self.hi) and self.lo > 0:
            raise FormulaError("unbounded interval must start at 0")

    def render(self) -> str:
        hi = "inf" if math.isinf(self.hi) else _fmt_num(self.hi)
        return f"[{_fmt_num(self.lo)},{hi}]"


def _fmt_num(x: float) -> str:
    return repr(float(x))


FULL = TimeInterval(0.0, math.inf)


@dataclass(frozen=True)
class StateFormula:
    pass


@dataclass(frozen=True)
class PathFormula:
    pass


@dataclass(frozen=True)
class Atomic(StateFormula):
    ap: ApExpr


@dataclass(frozen=True)
class Not(StateFormula):
    arg: StateFormula


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula


@dataclass(frozen=True)
class Prob(StateFormula):
    op: str  # one of <= < > >=
    p: float
    path: "PathFormula"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise FormulaError(f"probability bound {self.p} outside [0,1]")
        if self.op not in ("<=", "<", ">", ">="):
            raise FormulaError(f"bad comparison {self.op!r}")


@dataclass(frozen=True)
class Steady(StateFormula):
    op: str
    p: float
    body: StateFormula
    condition: StateFormula | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise FormulaError(f"probability bound {self.p} outside [0,1]")
        if self.op not in ("<=", "<", ">", ">="):
            raise FormulaError(f"bad comparison {self.op!r}")


@dataclass(frozen=True)
class Next(PathFormula):
    interval: TimeInterval
    body: StateFormula


@dataclass(frozen=True)
class Until(PathFormula):
    interval: TimeInterval
    left: StateFormula
    right: StateFormula


TRUE = Atomic(ApConst(True))
FALSE = Atomic(ApConst(False))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _FormulaParser:
    def __init__(self, text: str, populations, params):
        self.tokens = _tokenize_formula(text)
        self.pos = 0
        self.populations = list(populations)
        self.params = dict(params or {})

    def peek(self, ahead=0):
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def take(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.take()
        if t[0] != kind:
            raise FormulaError(f"expected {kind!r}, found {t[1]!r} at position {t[2]}")
        return t

    def parse(self) -> StateFormula:
        f = self.state(allow_or=True)
        t = self.peek()
        if t[0] != "end":
            raise FormulaError(f"trailing input {t[1]!r} at position {t[2]}")
        return f

    # formula level --------------------------------------------------
    def state(self, allow_or: bool) -> StateFormula:
        f = self.conj()
        while allow_or and self.peek()[0] == "|":
            self.take()
            g = self.conj()
            f = Not(And(Not(f), Not(g)))  # a|b desugars through De Morgan
        return f

    def conj(self) -> StateFormula:
        f = self.unit()
        while self.peek()[0] == "&":
            self.take()
            f = And(f, self.unit())
        return f

    def unit(self) -> StateFormula:
        t = self.peek()
        if t[0] == "!":
            self.take()
            return Not(self.unit())
        if t[0] == "name" and t[1] in ("P", "S") and self._looks_like_operator():
            return self.operator()
        if t[0] == "name" and t[1] == "true" and not self._ap_continues(1):
            self.take()
            return TRUE
        if t[0] == "name" and t[1] == "false" and not self._ap_continues(1):
            self.take()
            return FALSE
        if t[0] == "(":
            # could be a parenthesised formula or a parenthesised polynomial
            mark = self.pos
            try:
                self.take()
                f = self.state(allow_or=True)
                self.expect(")")
                if self._ap_continues(0):
                    raise FormulaError("parenthesised atom")
                return f
            except FormulaError:
                self.pos = mark
                return Atomic(self.ap_expr())
        return Atomic(self.ap_expr())

    def _looks_like_operator(self) -> bool:
        # P / S operator iff followed by cmp, number, then '['
        if self.peek(1)[0] != "cmp":
            return False
        if self.peek(2)[0] != "num":
            return False
        return self.peek(3)[0] == "["

    def _ap_continues(self, ahead: int) -> bool:
        # after a completed (sub)expression, an arithmetic operator means we
        # are actually inside a polynomial atom
        return self.peek(ahead)[0] in ("+", "-", "*", "/", "^", "cmp")

    def operator(self) -> StateFormula:
        kind = self.take()[1]
        op = self.expect("cmp")[1]
        if op == "=":
            raise FormulaError("probability bounds use <=, <, >, >=")
        num = self.expect("num")[1]
        p = float(number_to_fraction(num))
        self.expect("[")
        if kind == "P":
            path = self.path()
            self.expect("]close")
            return Prob(op, p, path)
        body = self.state(allow_or=False)
        condition = None
        if self.peek()[0] == "|":
            self.take()
            condition = self.state(allow_or=False)
        self.expect("]close")
        return Steady(op, p, body, condition)

    # path level -----------------------------------------------------
    def path(self) -> PathFormula:
        t = self.peek()
        if t[0] == "name" and t[1] == "X" and not self._ap_continues(1):
            self.take()
            iv = self.interval()
            return Next(iv, self.state(allow_or=False))
        if t[0] == "name" and t[1] == "F" and not self._ap_continues(1):
            self.take()
            iv = self.interval()
            return Until(iv, TRUE, self.state(allow_or=False))
        left = self.state(allow_or=False)
        u = self.take()
        if u[0] != "name" or u[1] != "U":
            raise FormulaError(f"expected 'U' in path formula at position {u[2]}")
        iv = self.interval()
        right = self.state(allow_or=False)
        return Until(iv, left, right)

    def interval(self) -> TimeInterval:
        t = self.peek()
        if t[0] == "[":
            self.take()
            lo = self.time_value()
            self.expect("comma")
            hi = self.time_value(allow_inf=True)
            self.expect("]close")
            return TimeInterval(lo, hi)
        if t[0] == "cmp" and t[1] == "<=":
            self.take()
            return TimeInterval(0.0, self.time_value())
        return FULL

    def time_value(self, allow_inf=False) -> float:
        t = self.take()
        if t[0] == "num":
            return float(number_to_fraction(t[1]))
        if t[0] == "name":
            if allow_inf and t[1] == "inf":
                return math.inf
            if t[1] in self.params:
                return float(self.params[t[1]])
            raise FormulaError(f"unbound interval parameter {t[1]!r} at position {t[2]}")
        raise FormulaError(f"expected time bound, found {t[1]!r} at position {t[2]}")

    # atoms ------------------------------------------------------------
    def ap_expr(self) -> ApExpr:
        lhs = self.poly()
        op = self.expect("cmp")[1]
        rhs = self.poly()
        diff = lhs - rhs
        if diff.is_constant():
            raise FormulaError("atomic proposition does not mention any population")
        const = -diff.constant_value()
        poly = diff - Poly.const(diff.nvars, diff.constant_value())
        return ApAtom(poly=poly, op=op, const=const, names=tuple(self.populations))

    def poly(self) -> Poly:
        # reuse the arithmetic parser over the token stream
        sub = _ExprParser(self._poly_tokens(), self.populations)
        p = sub.expr()
        self.pos += sub.pos
        return p

    def _poly_tokens(self):
        out = []
        for kind, val, pos in self.tokens[self.pos:]:
            if kind in ("+", "-", "*", "/", "^", "(", ")", "num", "name"):
                if kind == "name" and val in ("U", "inf"):
                    break
                out.append((kind, val, pos))
            else:
                break
        out.append(("end", "", out[-1][2] + 1 if out else 0))
        return out


def _tokenize_formula(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        two = text[i:i + 2]
        if two in ("<=", ">="):
            tokens.append(("cmp", two, i))
            i += 2
            continue
        if ch in "<>=":
            tokens.append(("cmp", ch, i))
            i += 1
            continue
        if ch == ",":
            tokens.append(("comma", ch, i))
            i += 1
            continue
        if ch in "!&|[]()+-*/^":
            kind = ch
            if ch == "]":
                kind = "]close"
            tokens.append((kind, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise FormulaError(f"unexpected character {ch!r} at position {i}")
    tokens.append(("end", "", n))
    return tokens


def parse_formula(text: str, populations, params=None) -> StateFormula:
    """Parse a state formula, desugaring derived forms."""
    return _FormulaParser(text, populations, params).parse()


# ---------------------------------------------------------------------------
# rendering (canonical concrete syntax; reparses to an equal tree)
# ---------------------------------------------------------------------------


def render(f) -> str:
    if isinstance(f, Atomic):
        if isinstance(f.ap, ApConst):
            return f.ap.render()
        return f"({f.ap.render()})"
    if isinstance(f, Not):
        return f"!({render(f.arg)})"
    if isinstance(f, And):
        return f"({render(f.left)} & {render(f.right)})"
    if isinstance(f, Prob):
        return f"P{f.op}{_fmt_num(f.p)} [ {render(f.path)} ]"
    if isinstance(f, Steady):
        if f.condition is None:
            return f"S{f.op}{_fmt_num(f.p)} [ {render(f.body)} ]"
        return f"S{f.op}{_fmt_num(f.p)} [ {render(f.body)} | {render(f.condition)} ]"
    if isinstance(f, Next):
        return f"X{f.interval.render()} {render(f.body)}"
    if isinstance(f, Until):
        return f"{render(f.left)} U{f.interval.render()} {render(f.right)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# static analysis
# ---------------------------------------------------------------------------


def formula_aps(phi) -> list[ApExpr]:
    """All atomic propositions of a formula, in first-occurrence order."""
    seen: list[ApExpr] = []

    def walk(node):
        if isinstance(node, Atomic):
            if node.ap not in seen:
                seen.append(node.ap)
        elif isinstance(node, Not):
            walk(node.arg)
        elif isinstance(node, And):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Prob):
            walk(node.path)
        elif isinstance(node, Steady):
            walk(node.body)
            if node.condition is not None:
                walk(node.condition)
        elif isinstance(node, Next):
            walk(node.body)
        elif isinstance(node, Until):
            walk(node.left)
            walk(node.right)

    walk(phi)
    return seen


def ap_predicate(phi) -> ApExpr | None:
    """Lower a pure boolean state formula to an ApExpr; None if it contains
    probabilistic or steady-state operators."""
    if isinstance(phi, Atomic):
        return phi.ap
    if isinstance(phi, Not):
        inner = ap_predicate(phi.arg)
        return None if inner is None else ApNot(inner)
    if isinstance(phi, And):
        a = ap_predicate(phi.left)
        b = ap_predicate(phi.right)
        if a is None or b is None:
            return None
        return ApAnd(a, b)
    return None


def can_stop(phi) -> ApExpr | None:
    """States at which exploration may stop: once a path enters such a state
    the truth value of the path formula no longer depends on later states.

    Only time intervals starting at 0 admit a state-level shortcut; Next and
    delayed intervals return None (no sound shortcut).
    """
    if isinstance(phi, Until):
        if phi.interval.lo > 0:
            return None
        right = ap_predicate(phi.right)
        if right is None:
            return None
        left = ap_predicate(phi.left)
        if left is None:
            # stopping at satisfied-target states alone is still sound
            return right
        return ApOr(right, ApAnd(ApNot(left), ApNot(right)))
    if isinstance(phi, Next):
        return None
    if isinstance(phi, Prob):
        return can_stop(phi.path)
    return None


def has_steady(phi) -> bool:
    if isinstance(phi, Steady):
        return True
    if isinstance(phi, Not):
        return has_steady(phi.arg)
    if isinstance(phi, And):
        return has_steady(phi.left) or has_steady(phi.right)
    if isinstance(phi, Prob):
        p = phi.path
        if isinstance(p, Next):
            return has_steady(p.body)
        return has_steady(p.left) or has_steady(p.right)
    return False


def desugared_ok(phi) -> bool:
    """No derived forms remain (used by tests)."""
    if isinstance(phi, Atomic):
        return True
    if isinstance(phi, Not):
        return desugared_ok(phi.arg)
    if isinstance(phi, And):
        return desugared_ok(phi.left) and desugared_ok(phi.right)
    if isinstance(phi, Prob):
        p = phi.path
        if isinstance(p, Next):
            return desugared_ok(p.body)
        return desugared_ok(p.left) and desugared_ok(p.right)
    if isinstance(phi, Steady):
        return desugared_ok(phi.body) and (phi.condition is None or desugared_ok(phi.condition))
    return False
