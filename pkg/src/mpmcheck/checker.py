"""Three-valued CSL evaluation over a finite truncation.

Every probabilistic operator is evaluated to a safe probability interval
per state: the lower end measures paths whose ternary value is TRUE, the
upper end paths whose value is not FALSE (frontier states, labelled
UNKNOWN everywhere, thus widen the upper end only).  Verdicts follow the
three-way comparison of both interval ends against the operator bound, so
a decided verdict on the truncation is the verdict on the full chain.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import csl, transient
from .steady import LyapunovCertificate
from .ternary import Ternary
from .trunc import Truncation, make_absorbing

TRUE = int(Ternary.TRUE)
FALSE = int(Ternary.FALSE)
UNKNOWN = int(Ternary.UNKNOWN)


class CheckError(ValueError):
    pass


class DivisionDegenerate(UserWarning):
    """Conditional steady-state bound divided by a vanishing lower bound."""


@dataclass
class ProbInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi + 1e-12:
            raise CheckError(f"inverted interval [{self.lo}, {self.hi}]")

    def clamped(self) -> "ProbInterval":
        return ProbInterval(min(max(self.lo, 0.0), 1.0), min(max(self.hi, 0.0), 1.0))


@dataclass
class Verdict:
    value: Ternary
    interval: ProbInterval | None = None


def compare(iv: ProbInterval, op: str, p: float) -> Ternary:
    """Three-way comparison: decided only if both interval ends agree."""
    lo_ok = _cmp(iv.lo, op, p)
    hi_ok = _cmp(iv.hi, op, p)
    if lo_ok and hi_ok:
        return Ternary.TRUE
    if not lo_ok and not hi_ok:
        return Ternary.FALSE
    return Ternary.UNKNOWN


def _cmp(x: float, op: str, p: float) -> bool:
    if op == "<=":
        return x <= p
    if op == "<":
        return x < p
    if op == ">":
        return x > p
    if op == ">=":
        return x >= p
    raise CheckError(f"bad comparison {op!r}")


# ---------------------------------------------------------------------------
# path operators (vectorised over all truncation states)
# ---------------------------------------------------------------------------


def prob_next(tr: Truncation, interval: csl.TimeInterval,
              body_labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-state interval for the timed next operator.

    P(jump lands in [t,t'] and hits a TRUE successor) on the lower side,
    non-FALSE successors (frontier included) on the upper side; absorbing
    states yield [0,0] since no jump occurs at all.
    """
    n = tr.n
    exit_rates = tr.exit_rates()
    lo = np.zeros(n)
    hi = np.zeros(n)
    for i in range(n):
        row = tr.rows[i]
        if row is None:
            # frontier: no outgoing information at all
            lo[i], hi[i] = 0.0, 1.0
            continue
        e = exit_rates[i]
        if e <= 0.0:
            continue
        targets, rates = row
        window = math.exp(-e * interval.lo)
        if not math.isinf(interval.hi):
            window -= math.exp(-e * interval.hi)
        vals = body_labels[targets]
        lo[i] = window * float(rates[vals == TRUE].sum()) / e
        hi[i] = window * float(rates[vals != FALSE].sum()) / e
    return lo, hi


def prob_until(tr: Truncation, interval: csl.TimeInterval,
               left_labels: np.ndarray, right_labels: np.ndarray,
               delta: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Per-state interval for the timed until operator.

    Lower side: both operands resolved pessimistically (UNKNOWN blocks).
    Upper side: resolved optimistically, so mass parked on the frontier
    counts as satisfaction; the Poisson truncation error is added here so
    the upper end stays an upper bound.
    """
    lo = _until_one_sided(tr, interval, left_labels == TRUE, right_labels == TRUE, delta)
    hi = _until_one_sided(tr, interval, left_labels != FALSE, right_labels != FALSE, delta)
    hi = np.minimum(hi + delta, 1.0)
    return np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)


def _until_one_sided(tr: Truncation, interval: csl.TimeInterval,
                     ok_left: np.ndarray, ok_right: np.ndarray,
                     delta: float) -> np.ndarray:
    t_lo, t_hi = interval.lo, interval.hi
    phase2 = _until_zero_start(tr, ok_left, ok_right,
                               t_hi - t_lo if not math.isinf(t_hi) else math.inf, delta)
    if t_lo == 0.0:
        return phase2
    # survive the first phase inside ok_left states, then continue
    view1 = make_absorbing(tr, ~ok_left)
    terminal = np.where(ok_left, phase2, 0.0)
    return transient.backward_values(view1, terminal, t_lo, delta)


def _until_zero_start(tr: Truncation, ok_left: np.ndarray, ok_right: np.ndarray,
                      bound: float, delta: float) -> np.ndarray:
    targets = ok_right
    dead = ~ok_left & ~targets
    view = make_absorbing(tr, targets | dead)
    vals = transient.reach_prob(view, targets, bound, delta)
    return vals


# ---------------------------------------------------------------------------
# steady-state operator
# ---------------------------------------------------------------------------


def steady_op(cert: LyapunovCertificate, body_labels: np.ndarray,
              condition_labels: np.ndarray | None = None) -> ProbInterval:
    """Long-run probability interval from the per-state stationary envelope.

    body_labels / condition_labels are indexed like cert.window.  The upper
    side adds the stationary mass epsilon that may live outside the window.
    The ergodic chain makes the result state-independent.
    """
    eps = cert.epsilon
    if condition_labels is None:
        lo = float(cert.l[body_labels == TRUE].sum())
        hi = min(1.0, float(cert.u[body_labels != FALSE].sum()) + eps)
        return ProbInterval(min(lo, hi), hi)
    both = np.minimum(body_labels, condition_labels)  # ternary conjunction
    num = steady_op(cert, both)
    den = steady_op(cert, condition_labels)
    if den.hi <= 0.0:
        warnings.warn("condition has vanishing steady-state upper bound",
                      DivisionDegenerate, stacklevel=2)
        return ProbInterval(0.0, 1.0)
    lo = num.lo / den.hi
    if den.lo <= 0.0:
        warnings.warn("condition has vanishing steady-state lower bound; "
                      "upper bound clamped to 1", DivisionDegenerate, stacklevel=2)
        hi = 1.0
    else:
        hi = min(1.0, num.hi / den.lo)
    return ProbInterval(min(lo, hi), hi).clamped()


# ---------------------------------------------------------------------------
# formula evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalResult:
    values: np.ndarray                 # ternary per state
    intervals: tuple[np.ndarray, np.ndarray] | None  # per-state lo/hi at the root


def eval_formula(tr: Truncation, phi: csl.StateFormula,
                 cert: LyapunovCertificate | None = None,
                 delta: float = 1e-10) -> EvalResult:
    """Bottom-up ternary evaluation of a state formula on a truncation."""
    ivals = _eval_node(tr, phi, cert, delta, {})
    return ivals


def verdict_at(res: EvalResult, idx: int) -> Verdict:
    iv = None
    if res.intervals is not None:
        iv = ProbInterval(float(res.intervals[0][idx]), float(res.intervals[1][idx]))
    return Verdict(Ternary(int(res.values[idx])), iv)


def _eval_node(tr: Truncation, f, cert, delta, cache) -> EvalResult:
    key = id(f)
    if key in cache:
        return cache[key]
    res = _eval_node_inner(tr, f, cert, delta, cache)
    cache[key] = res
    return res


def _eval_node_inner(tr: Truncation, f, cert, delta, cache) -> EvalResult:
    n = tr.n
    if isinstance(f, csl.Atomic):
        return EvalResult(tr.labels(f.ap).copy(), None)
    if isinstance(f, csl.Not):
        sub = _eval_node(tr, f.arg, cert, delta, cache)
        return EvalResult((2 - sub.values).astype(np.int8), None)
    if isinstance(f, csl.And):
        a = _eval_node(tr, f.left, cert, delta, cache)
        b = _eval_node(tr, f.right, cert, delta, cache)
        return EvalResult(np.minimum(a.values, b.values), None)
    if isinstance(f, csl.Prob):
        lo, hi = _path_intervals(tr, f.path, cert, delta, cache)
        values = _interval_verdicts(lo, hi, f.op, f.p)
        return EvalResult(values, (lo, hi))
    if isinstance(f, csl.Steady):
        if cert is None:
            raise CheckError("steady-state operator evaluated without a certificate")
        body = _eval_node(tr, f.body, cert, delta, cache)
        widx = np.array([tr.index[x] for x in cert.window], dtype=np.int64)
        body_on_w = body.values[widx]
        cond_on_w = None
        if f.condition is not None:
            cond = _eval_node(tr, f.condition, cert, delta, cache)
            cond_on_w = cond.values[widx]
        iv = steady_op(cert, body_on_w, cond_on_w)
        verdict = compare(iv, f.op, f.p)
        values = np.full(n, int(verdict), dtype=np.int8)
        values[~tr.explored_mask()] = UNKNOWN
        lo = np.full(n, iv.lo)
        hi = np.full(n, iv.hi)
        return EvalResult(values, (lo, hi))
    raise TypeError(f"not a state formula: {f!r}")


def _path_intervals(tr, path, cert, delta, cache):
    if isinstance(path, csl.Next):
        body = _eval_node(tr, path.body, cert, delta, cache)
        return prob_next(tr, path.interval, body.values)
    if isinstance(path, csl.Until):
        left = _eval_node(tr, path.left, cert, delta, cache)
        right = _eval_node(tr, path.right, cert, delta, cache)
        return prob_until(tr, path.interval, left.values, right.values, delta)
    raise TypeError(f"not a path formula: {path!r}")


def _interval_verdicts(lo: np.ndarray, hi: np.ndarray, op: str, p: float) -> np.ndarray:
    if op == "<=":
        lo_ok, hi_ok = lo <= p, hi <= p
    elif op == "<":
        lo_ok, hi_ok = lo < p, hi < p
    elif op == ">":
        lo_ok, hi_ok = lo > p, hi > p
    else:
        lo_ok, hi_ok = lo >= p, hi >= p
    values = np.full(lo.shape, UNKNOWN, dtype=np.int8)
    values[lo_ok & hi_ok] = TRUE
    values[~lo_ok & ~hi_ok] = FALSE
    return values
