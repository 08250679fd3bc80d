import itertools

import pytest

from mpmcheck.ternary import Ternary, from_bool, t_and, t_not, t_or

F, U, T = Ternary.FALSE, Ternary.UNKNOWN, Ternary.TRUE

AND_TABLE = {
    (F, F): F, (F, U): F, (F, T): F,
    (U, F): F, (U, U): U, (U, T): U,
    (T, F): F, (T, U): U, (T, T): T,
}

OR_TABLE = {
    (F, F): F, (F, U): U, (F, T): T,
    (U, F): U, (U, U): U, (U, T): T,
    (T, F): T, (T, U): T, (T, T): T,
}

NOT_TABLE = {F: T, U: U, T: F}


def test_and_table_conformance():
    for a, b in itertools.product(Ternary, repeat=2):
        assert t_and(a, b) == AND_TABLE[(a, b)]


def test_or_table_conformance():
    for a, b in itertools.product(Ternary, repeat=2):
        assert t_or(a, b) == OR_TABLE[(a, b)]


def test_not_table_conformance():
    for a in Ternary:
        assert t_not(a) == NOT_TABLE[a]


def test_spec_cases():
    assert t_and(U, F) == F
    assert t_and(T, T) == T
    assert t_and(U, T) == U
    assert t_or(U, T) == T
    assert t_or(F, F) == F
    assert t_or(U, F) == U
    assert t_not(T) == F
    assert t_not(U) == U


def test_not_involution():
    for a in Ternary:
        assert t_not(t_not(a)) == a


def test_de_morgan_all_pairs():
    for a, b in itertools.product(Ternary, repeat=2):
        assert t_not(t_and(a, b)) == t_or(t_not(a), t_not(b))
        assert t_not(t_or(a, b)) == t_and(t_not(a), t_not(b))


def test_lattice_structure():
    # meet/join agree with min/max under FALSE < UNKNOWN < TRUE
    for a, b in itertools.product(Ternary, repeat=2):
        assert t_and(a, b) == min(a, b)
        assert t_or(a, b) == max(a, b)


def test_refinement_monotonicity_exhaustive():
    # resolving an UNKNOWN input never changes an already-decided output
    for op in (t_and, t_or):
        for a, b in itertools.product(Ternary, repeat=2):
            out = op(a, b)
            if out == U:
                continue
            for ra in ((T, F) if a == U else (a,)):
                for rb in ((T, F) if b == U else (b,)):
                    assert op(ra, rb) == out
    assert t_not(U) == U  # unary case: UNKNOWN output, nothing to check


def test_rendering():
    assert str(T) == "true"
    assert str(F) == "false"
    assert str(U) == "unknown"


def test_from_bool():
    assert from_bool(True) == T
    assert from_bool(False) == F


def test_vectorised_ops_match_tables():
    # the checker evaluates connectives on int8 arrays via min/max/2-x
    import numpy as np
    vals = [int(v) for v in Ternary]
    for a, b in itertools.product(vals, repeat=2):
        assert np.minimum(a, b) == int(t_and(Ternary(a), Ternary(b)))
        assert np.maximum(a, b) == int(t_or(Ternary(a), Ternary(b)))
    for a in vals:
        assert 2 - a == int(t_not(Ternary(a)))
