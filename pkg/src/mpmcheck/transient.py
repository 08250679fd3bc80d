"""Transient analysis on a frozen truncation via uniformisation.

Forward solves give the distribution at time t from a single source;
backward solves give reachability values for all sources at once.  Poisson
weights are truncated with total tail mass below a requested delta and are
kept un-normalised, so the computed sums underestimate by at most delta
(callers that need an upper bound add delta back).  For t = infinity the
limits are obtained from sparse direct solves of the absorption equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .trunc import AbsorbingView


class TransientError(ValueError):
    pass


@dataclass
class PoissonWeights:
    left: int
    right: int
    weights: np.ndarray  # pmf values for k in [left, right]
    total_error: float


def poisson_weights(qt: float, delta: float) -> PoissonWeights:
    """Truncated Poisson(qt) pmf window whose tail mass is below delta.

    Computed from the mode outward with the two-sided recurrence, mode pmf
    in log space; stable for qt well beyond 1e6.
    """
    if delta <= 0:
        raise TransientError("delta must be positive")
    if qt < 0:
        raise TransientError("qt must be nonnegative")
    if qt == 0:
        return PoissonWeights(0, 0, np.array([1.0]), 0.0)
    mode = int(math.floor(qt))
    log_pm = mode * math.log(qt) - qt - math.lgamma(mode + 1)
    pm = math.exp(log_pm)
    floor_pm = pm * 1e-18  # below this the true tail is negligible; the sum
    lo = hi = mode         # may still fall short of 1-delta through the
    total = pm             # O(qt log qt * eps) bias of log-space pmf values
    comp = 0.0
    lo_next = pm * lo / qt if lo > 0 else 0.0
    hi_next = pm * qt / (hi + 1)
    while total < 1.0 - delta:
        if lo_next >= hi_next and lo > 0:
            lo -= 1
            add = lo_next
            lo_next = add * lo / qt if lo > 0 else 0.0
        else:
            hi += 1
            add = hi_next
            hi_next = add * qt / (hi + 1)
        y = add - comp
        t_new = total + y
        comp = (t_new - total) - y
        total = t_new
        if lo_next < floor_pm and hi_next < floor_pm:
            break
    weights = np.empty(hi - lo + 1)
    weights[mode - lo] = pm
    for k in range(mode - 1, lo - 1, -1):
        weights[k - lo] = weights[k - lo + 1] * (k + 1) / qt
    for k in range(mode + 1, hi + 1):
        weights[k - lo] = weights[k - lo - 1] * qt / k
    if total < 1.0 - delta:
        weights *= (1.0 - 0.5 * delta) / total
    return PoissonWeights(lo, hi, weights, max(0.0, 1.0 - float(weights.sum())))


@dataclass
class DistVector:
    values: np.ndarray
    deficit: float = 0.0


def transient_dist(view: AbsorbingView, s: int, t: float, delta: float = 1e-10) -> DistVector:
    """Distribution over truncation states at time t, started from state s.

    For t = inf the limit is the absorption distribution: mass on absorbing
    states, zero elsewhere (mass trapped in recurrent explored states shows
    up in the deficit).
    """
    n = view.n
    if n == 0:
        raise TransientError("empty truncation")
    if t < 0:
        raise TransientError("negative time bound")
    v0 = np.zeros(n)
    v0[s] = 1.0
    if t == 0:
        return DistVector(v0, 0.0)
    if math.isinf(t):
        values = _absorption_from(view, s)
        return DistVector(values, max(0.0, 1.0 - float(values.sum())))
    qt = view.q * t
    w = poisson_weights(qt, delta)
    PT = view.uniformized_T()
    res = np.zeros(n)
    u = v0
    for k in range(w.right + 1):
        if k >= w.left:
            res += w.weights[k - w.left] * u
        if k < w.right:
            u = PT @ u
    return DistVector(res, max(0.0, 1.0 - float(res.sum())))


def reach_prob(view: AbsorbingView, B, t: float, delta: float = 1e-10) -> np.ndarray:
    """Probability of being inside B by time t, for every source state.

    Every state of B must be absorbing in the view (frontier states are by
    construction; others via make_absorbing).
    """
    mask = _as_mask(view.n, B)
    if mask.any():
        not_abs = mask & ~(view.exit == 0.0)
        if not_abs.any():
            raise TransientError("target set B is not absorbing in the view")
    v0 = mask.astype(np.float64)
    return backward_values(view, v0, t, delta)


def backward_values(view: AbsorbingView, v0: np.ndarray, t: float, delta: float = 1e-10) -> np.ndarray:
    """Backward propagation of a terminal value vector over horizon t."""
    if t < 0:
        raise TransientError("negative time bound")
    if t == 0:
        return v0.copy()
    if math.isinf(t):
        return _absorption_values(view, v0)
    qt = view.q * t
    w = poisson_weights(qt, delta)
    P = view.uniformized()
    res = np.zeros(view.n)
    u = v0.copy()
    for k in range(w.right + 1):
        if k >= w.left:
            res += w.weights[k - w.left] * u
        if k < w.right:
            u = P @ u
    return res


# ---------------------------------------------------------------------------
# t = infinity: absorption equations
# ---------------------------------------------------------------------------


def _as_mask(n, B) -> np.ndarray:
    if isinstance(B, np.ndarray) and B.dtype == bool:
        return B
    mask = np.zeros(n, dtype=bool)
    for i in B:
        mask[int(i)] = True
    return mask


def _absorption_values(view: AbsorbingView, v0: np.ndarray) -> np.ndarray:
    """Limit of backward propagation: value = expected terminal value at
    absorption; states that cannot reach support(v0) converge to 0."""
    n = view.n
    absorbing = view.exit == 0.0
    res = np.where(absorbing, v0, 0.0)
    active = ~absorbing
    if not active.any():
        return res
    # restrict to transient states that can reach the terminal support
    P = view.uniformized()
    support = np.flatnonzero(res > 0.0)
    if support.size == 0:
        return res
    reach_mask = _coreachable(P, support)
    idx = np.flatnonzero(active & reach_mask)
    if idx.size == 0:
        return res
    A = sp.eye(n, format="csr") - P
    sub = A[idx][:, idx].tocsc()
    rhs = P[idx] @ res
    sol = spla.splu(sub).solve(rhs)
    res[idx] = np.clip(sol, 0.0, 1.0)
    return res


def _absorption_from(view: AbsorbingView, s: int) -> np.ndarray:
    """Absorption distribution over absorbing states, started from s."""
    n = view.n
    absorbing = view.exit == 0.0
    res = np.zeros(n)
    if absorbing[s]:
        res[s] = 1.0
        return res
    P = view.uniformized()
    reach_mask = _coreachable(P, np.flatnonzero(absorbing))
    idx = np.flatnonzero(~absorbing & reach_mask)
    if idx.size == 0 or not reach_mask[s]:
        return res
    pos = {int(i): k for k, i in enumerate(idx)}
    A = sp.eye(n, format="csr") - P
    sub = A[idx][:, idx].T.tocsc()
    e = np.zeros(idx.size)
    e[pos[s]] = 1.0
    w = spla.splu(sub).solve(e)
    # mass leaving the transient block into each absorbing state
    Pta = P[idx][:, absorbing]
    res[absorbing] = np.clip(Pta.T @ w, 0.0, 1.0)
    return res


def _coreachable(P: sp.csr_matrix, targets: np.ndarray) -> np.ndarray:
    """States from which the target set is reachable in the graph of P."""
    n = P.shape[0]
    mask = np.zeros(n, dtype=bool)
    mask[targets] = True
    PT = P.T.tocsr()
    ring = list(targets)
    while ring:
        nxt = []
        for i in ring:
            start, end = PT.indptr[i], PT.indptr[i + 1]
            for j in PT.indices[start:end]:
                if not mask[j]:
                    mask[j] = True
                    nxt.append(int(j))
        ring = nxt
    return mask
