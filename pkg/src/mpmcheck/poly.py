"""Sparse multivariate polynomials with rational coefficients.

Population counts are integers and all model constants are rationals, so
polynomial evaluation on states can be kept exact (Fraction arithmetic, or
integer arithmetic after clearing denominators).  A float path exists for
numeric sweeps where exactness is not needed.

Also provides the shared arithmetic-expression parser used by model files
and by atomic propositions: `+ - * ^`, parentheses, decimal and scientific
literals, and declared population names.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction


class PolyError(ValueError):
    pass


class Poly:
    """Immutable polynomial in `nvars` variables, term dict exponents->coeff."""

    __slots__ = ("nvars", "terms", "_key")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        clean = {}
        if terms:
            for exps, c in terms.items():
                if c:
                    clean[tuple(exps)] = Fraction(c)
        self.terms = clean
        self._key = tuple(sorted(self.terms.items()))

    # -- constructors -------------------------------------------------
    @staticmethod
    def const(nvars: int, c) -> "Poly":
        return Poly(nvars, {(0,) * nvars: Fraction(c)})

    @staticmethod
    def var(nvars: int, i: int) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return Poly(nvars, {tuple(e): Fraction(1)})

    # -- algebra ------------------------------------------------------
    def __add__(self, other: "Poly") -> "Poly":
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Poly(self.nvars, terms)

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Poly):
            terms: dict = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    terms[e] = terms.get(e, Fraction(0)) + c1 * c2
            return Poly(self.nvars, terms)
        return Poly(self.nvars, {e: c * Fraction(other) for e, c in self.terms.items()})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise PolyError("negative exponent")
        out = Poly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self._key == other._key

    def __hash__(self):
        return hash((self.nvars, self._key))

    # -- structure ----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=0)

    def leading_coeff_in(self, i: int) -> Fraction:
        """Coefficient of the pure power x_i^deg_i (zero if mixed only)."""
        d = self.degree_in(i)
        e = [0] * self.nvars
        e[i] = d
        return self.terms.get(tuple(e), Fraction(0))

    def homogeneous_part(self, d: int) -> "Poly":
        return Poly(self.nvars, {e: c for e, c in self.terms.items() if sum(e) == d})

    # -- substitution -------------------------------------------------
    def shift(self, v) -> "Poly":
        """Substitute x_i -> x_i + v_i (integer change vector)."""
        out = Poly(self.nvars, {})
        for exps, c in self.terms.items():
            term = Poly.const(self.nvars, c)
            for i, e in enumerate(exps):
                if e == 0:
                    continue
                base = Poly(self.nvars, {
                    tuple(1 if j == i else 0 for j in range(self.nvars)): Fraction(1),
                    (0,) * self.nvars: Fraction(v[i]),
                })
                term = term * base ** e
            out = out + term
        return out

    def fix(self, i: int, value) -> "Poly":
        """Substitute x_i -> value, keeping the same variable count."""
        val = Fraction(value)
        terms: dict = {}
        for exps, c in self.terms.items():
            e = list(exps)
            c2 = c * val ** e[i]
            e[i] = 0
            key = tuple(e)
            terms[key] = terms.get(key, Fraction(0)) + c2
        return Poly(self.nvars, terms)

    def deriv(self, i: int) -> "Poly":
        terms: dict = {}
        for exps, c in self.terms.items():
            if exps[i] == 0:
                continue
            e = list(exps)
            e[i] -= 1
            terms[tuple(e)] = terms.get(tuple(e), Fraction(0)) + c * exps[i]
        return Poly(self.nvars, terms)

    # -- evaluation ---------------------------------------------------
    def eval_exact(self, x) -> Fraction:
        acc = Fraction(0)
        for exps, c in self.terms.items():
            m = c
            for xi, e in zip(x, exps):
                if e:
                    m *= Fraction(xi) ** e
            acc += m
        return acc

    def eval_float(self, x) -> float:
        acc = 0.0
        for exps, c in self.terms.items():
            m = float(c)
            for xi, e in zip(x, exps):
                if e:
                    m *= float(xi) ** e
            acc += m
        return acc

    def scaled_int(self) -> tuple[dict, int]:
        """Clear denominators: (integer-coefficient terms, positive scale)."""
        den = 1
        for c in self.terms.values():
            den = den * c.denominator // math.gcd(den, c.denominator)
        return {e: int(c * den) for e, c in self.terms.items()}, den

    def __repr__(self):
        return f"Poly({self.nvars}, {dict(self._key)!r})"


# ---------------------------------------------------------------------------
# expression parser
# ---------------------------------------------------------------------------


class ExprSyntaxError(PolyError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} (at position {pos})")
        self.pos = pos


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append((ch, ch, i))
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
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


def number_to_fraction(literal: str) -> Fraction:
    """Exact rational value of a decimal/scientific literal."""
    return Fraction(Decimal(literal))


class _ExprParser:
    def __init__(self, tokens, names):
        self.tokens = tokens
        self.pos = 0
        self.names = list(names)
        self.nvars = len(self.names)

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.take()
        if t[0] != kind:
            raise ExprSyntaxError(f"expected {kind!r}, found {t[1]!r}", t[2])
        return t

    def parse(self) -> Poly:
        p = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExprSyntaxError(f"trailing input {t[1]!r}", t[2])
        return p

    def expr(self) -> Poly:
        p = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Poly:
        p = self.unary()
        while self.peek()[0] in ("*", "/"):
            op, _, pos = self.take()
            q = self.unary()
            if op == "*":
                p = p * q
            else:
                if not q.is_constant() or q.constant_value() == 0:
                    raise ExprSyntaxError("division only by nonzero constants", pos)
                p = p * (Fraction(1) / q.constant_value())
        return p

    def unary(self) -> Poly:
        if self.peek()[0] == "-":
            self.take()
            return -self.unary()
        return self.power()

    def power(self) -> Poly:
        p = self.atom()
        while self.peek()[0] == "^":
            self.take()
            t = self.expect("num")
            if not t[1].isdigit():
                raise ExprSyntaxError("exponent must be a nonnegative integer", t[2])
            p = p ** int(t[1])
        return p

    def atom(self) -> Poly:
        t = self.take()
        if t[0] == "num":
            return Poly.const(self.nvars, number_to_fraction(t[1]))
        if t[0] == "name":
            try:
                i = self.names.index(t[1])
            except ValueError:
                raise ExprSyntaxError(f"unknown population {t[1]!r}", t[2]) from None
            return Poly.var(self.nvars, i)
        if t[0] == "(":
            p = self.expr()
            self.expect(")")
            return p
        raise ExprSyntaxError(f"unexpected token {t[1]!r}", t[2])


def parse_poly(text: str, names) -> Poly:
    """Parse an arithmetic expression over the given population names."""
    return _ExprParser(_tokenize(text), names).parse()


def render_poly(p: Poly, names) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for exps, c in sorted(p.terms.items(), key=lambda t: (-sum(t[0]), t[0])):
        factors = []
        if c != 1 or not any(exps):
            factors.append(str(c))
        for i, e in enumerate(exps):
            if e == 1:
                factors.append(names[i])
            elif e > 1:
                factors.append(f"{names[i]}^{e}")
        parts.append("*".join(factors))
    return " + ".join(parts).replace("+ -", "- ")
