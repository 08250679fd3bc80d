"""Markov population models: transition classes and on-demand successor generation.

A model is a list of transition classes (polynomial propensity, integer
change vector) over d counted populations.  States are integer tuples; the
rate matrix is never materialised, successors are generated per state.
Structural analysis (per-population caps, conservation invariants) is used
by the steady-state machinery to restrict drift maximisation and window
enumeration to the reachable lattice.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .poly import Poly, PolyError, parse_poly

State = tuple[int, ...]


class ModelError(ValueError):
    pass


class WellFormednessViolation(ModelError):
    """A positive propensity would step a population below zero."""


@dataclass(frozen=True)
class TransitionClass:
    alpha: Poly
    v: tuple[int, ...]

    def __post_init__(self):
        if not any(self.v):
            raise ModelError("change vector must be nonzero")


@dataclass
class ModelSpec:
    names: list[str]
    classes: list[TransitionClass]
    init: State
    lyapunov: Poly | None = None
    _caps: tuple | None = field(default=None, repr=False)
    _invariants: list | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return len(self.names)


def successors(spec: ModelSpec, x: State) -> list[tuple[State, float]]:
    """Aggregated positive-rate successors of x, one entry per change vector.

    Raises WellFormednessViolation if a class with positive propensity at x
    would produce a negative population count, and ModelError if any
    propensity evaluates negative (both indicate an invalid model).
    """
    agg: dict[State, Fraction] = {}
    order: list[State] = []
    for tc in spec.classes:
        a = tc.alpha.eval_exact(x)
        if a == 0:
            continue
        if a < 0:
            raise ModelError(f"propensity negative at state {x}: {a}")
        y = tuple(xi + vi for xi, vi in zip(x, tc.v))
        if any(yi < 0 for yi in y):
            raise WellFormednessViolation(
                f"class with change {tc.v} active at {x} but target {y} leaves the lattice")
        if y not in agg:
            agg[y] = Fraction(0)
            order.append(y)
        agg[y] += a
    return [(y, float(agg[y])) for y in order]


def exit_rate(spec: ModelSpec, x: State) -> float:
    return sum(r for _, r in successors(spec, x))


def generator_row(spec: ModelSpec, x: State) -> tuple[list[tuple[State, float]], float]:
    """Off-diagonal row entries plus the (negative) diagonal."""
    succ = successors(spec, x)
    return succ, -sum(r for _, r in succ)


def label(spec: ModelSpec, x: State, ap) -> bool:
    """Exact two-valued evaluation of an atomic proposition at a state."""
    return ap.eval(x)


# ---------------------------------------------------------------------------
# structural bounds on the reachable lattice
# ---------------------------------------------------------------------------


def structural_caps(spec: ModelSpec, search_limit: int = 16) -> tuple:
    """Per-population upper bounds implied by the model structure, or None.

    Two sources: (a) every class that increases population i has a
    propensity vanishing identically on the slices just below/at some level
    B (so the count can never pass B from below), and (b) nonnegative
    conservation invariants w.x = w.init with w_i > 0.
    """
    if spec._caps is not None:
        return spec._caps
    d = spec.d
    caps: list[int | None] = [None] * d
    for i in range(d):
        ups = [tc for tc in spec.classes if tc.v[i] > 0]
        if not ups:
            caps[i] = spec.init[i]
            continue
        for b in range(max(spec.init[i], 0), search_limit + 1):
            ok = True
            for tc in ups:
                # class must be off at every level it could jump the cap from
                for lvl in range(max(b - tc.v[i] + 1, 0), b + 1):
                    if not tc.alpha.fix(i, lvl).is_zero():
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                caps[i] = b
                break
    for w, total in invariants(spec):
        for i in range(d):
            if w[i] > 0:
                bound = total // w[i]
                if caps[i] is None or bound < caps[i]:
                    caps[i] = bound
    spec._caps = tuple(caps)
    return spec._caps


def invariants(spec: ModelSpec) -> list[tuple[tuple[int, ...], int]]:
    """Nonnegative integer vectors w with w.v_j = 0 for every class.

    Each gives the conservation law w.x = w.init on the reachable set.
    Found from a rational null-space basis of the change vectors; small
    integer combinations of the basis are scanned for nonnegativity.
    """
    if spec._invariants is not None:
        return spec._invariants
    d = spec.d
    rows = [list(map(Fraction, tc.v)) for tc in spec.classes]
    basis = _nullspace(rows, d)
    found: list[tuple[int, ...]] = []
    if len(basis) == 1:
        for cand in (basis[0], [-x for x in basis[0]]):
            if all(c >= 0 for c in cand) and any(cand):
                found.append(_to_int_vector(cand))
    elif 1 < len(basis) <= 3:
        span = range(-4, 5)
        seen = set()
        for coeffs in itertools.product(span, repeat=len(basis)):
            if not any(coeffs):
                continue
            cand = [sum(Fraction(k) * b[i] for k, b in zip(coeffs, basis)) for i in range(d)]
            if all(c >= 0 for c in cand) and any(cand):
                vec = _to_int_vector(cand)
                g = _gcd_vec(vec)
                vec = tuple(x // g for x in vec)
                if vec not in seen:
                    seen.add(vec)
                    found.append(vec)
    # keep a minimal set: drop vectors dominated by another invariant
    minimal = []
    for w in sorted(found, key=sum):
        if not any(all(w[i] >= m[i] for i in range(d)) and w != m for m in minimal):
            minimal.append(w)
    spec._invariants = [(w, sum(wi * xi for wi, xi in zip(w, spec.init))) for w in minimal]
    return spec._invariants


def _nullspace(rows, d):
    """Rational null-space basis of the row span (Gaussian elimination)."""
    mat = [row[:] for row in rows]
    pivots = []
    r = 0
    for c in range(d):
        pr = next((i for i in range(r, len(mat)) if mat[i][c] != 0), None)
        if pr is None:
            continue
        mat[r], mat[pr] = mat[pr], mat[r]
        pv = mat[r][c]
        mat[r] = [x / pv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    free = [c for c in range(d) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * d
        vec[fc] = Fraction(1)
        for ri, pc in enumerate(pivots):
            vec[pc] = -mat[ri][fc]
        basis.append(vec)
    return basis


def _to_int_vector(fracs) -> tuple[int, ...]:
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return tuple(int(f * den) for f in fracs)


def _gcd_vec(vec) -> int:
    g = 0
    for x in vec:
        g = math.gcd(g, abs(x))
    return g or 1


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------


def parse_model(text: str) -> ModelSpec:
    """Parse the plain-text model format.

    population NAME = INT          (one per population, first)
    RATE_EXPR ; NAME += INT, ...   (one per transition class)
    lyapunov = EXPR                (optional)
    """
    names: list[str] = []
    init: list[int] = []
    class_lines: list[tuple[int, str]] = []
    lyapunov_src = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("population"):
            body = line[len("population"):].strip()
            if "=" not in body:
                raise ModelError(f"line {ln}: expected 'population NAME = COUNT'")
            name, _, val = body.partition("=")
            name = name.strip()
            if not name.isidentifier():
                raise ModelError(f"line {ln}: bad population name {name!r}")
            if name in names:
                raise ModelError(f"line {ln}: duplicate population {name!r}")
            try:
                count = int(val.strip())
            except ValueError:
                raise ModelError(f"line {ln}: initial count must be an integer") from None
            if count < 0:
                raise ModelError(f"line {ln}: initial count must be nonnegative")
            names.append(name)
            init.append(count)
        elif line.startswith("lyapunov"):
            _, _, rhs = line.partition("=")
            lyapunov_src = (ln, rhs.strip())
        else:
            class_lines.append((ln, line))
    if not names:
        raise ModelError("no populations declared")
    classes = []
    for ln, line in class_lines:
        if ";" not in line:
            raise ModelError(f"line {ln}: expected 'rate_expr ; updates'")
        rate_src, _, upd_src = line.partition(";")
        try:
            alpha = parse_poly(rate_src.strip(), names)
        except PolyError as exc:
            raise ModelError(f"line {ln}: {exc}") from None
        v = [0] * len(names)
        for piece in upd_src.split(","):
            piece = piece.strip()
            if not piece:
                continue
            for op in ("+=", "-="):
                if op in piece:
                    name, _, amount = piece.partition(op)
                    name = name.strip()
                    if name not in names:
                        raise ModelError(f"line {ln}: unknown population {name!r}")
                    try:
                        k = int(amount.strip())
                    except ValueError:
                        raise ModelError(f"line {ln}: update amount must be an integer") from None
                    v[names.index(name)] += k if op == "+=" else -k
                    break
            else:
                raise ModelError(f"line {ln}: bad update {piece!r} (use NAME += INT)")
        if not any(v):
            raise ModelError(f"line {ln}: change vector must be nonzero")
        classes.append(TransitionClass(alpha, tuple(v)))
    if not classes:
        raise ModelError("no transition classes declared")
    lyapunov = None
    if lyapunov_src is not None:
        ln, src = lyapunov_src
        try:
            lyapunov = parse_poly(src, names)
        except PolyError as exc:
            raise ModelError(f"line {ln}: {exc}") from None
    return ModelSpec(names=names, classes=classes, init=tuple(init), lyapunov=lyapunov)


def load_model(path) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())
