"""Three-valued truth domain for labels and verdicts on finite truncations.

The ordering FALSE < UNKNOWN < TRUE makes the domain a complete lattice;
conjunction is the meet, disjunction the join, and negation the complement
that fixes UNKNOWN.  Connectives are spelled out as explicit truth tables so
that refinement monotonicity (resolving an UNKNOWN input never changes an
output that was already decided) can be checked case by case.
"""

from __future__ import annotations

import enum


class Ternary(enum.IntEnum):
    FALSE = 0
    UNKNOWN = 1
    TRUE = 2

    def __str__(self) -> str:
        return _NAMES[self]


_NAMES = {Ternary.FALSE: "false", Ternary.UNKNOWN: "unknown", Ternary.TRUE: "true"}

F, U, T = Ternary.FALSE, Ternary.UNKNOWN, Ternary.TRUE

_AND = {
    (F, F): F, (F, U): F, (F, T): F,
    (U, F): F, (U, U): U, (U, T): U,
    (T, F): F, (T, U): U, (T, T): T,
}

_OR = {
    (F, F): F, (F, U): U, (F, T): T,
    (U, F): U, (U, U): U, (U, T): T,
    (T, F): T, (T, U): T, (T, T): T,
}

_NOT = {F: T, U: U, T: F}


def t_and(a: Ternary, b: Ternary) -> Ternary:
    """Lattice meet: FALSE is absorbing, TRUE is the identity."""
    return _AND[(a, b)]


def t_or(a: Ternary, b: Ternary) -> Ternary:
    """Lattice join: TRUE is absorbing, FALSE is the identity."""
    return _OR[(a, b)]


def t_not(a: Ternary) -> Ternary:
    """Complement: swaps TRUE and FALSE, fixes UNKNOWN; an involution."""
    return _NOT[a]


def from_bool(b: bool) -> Ternary:
    return T if b else F
