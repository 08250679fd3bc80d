"""Steady-state machinery: drift bounds, geometric windows, stationary envelopes.

Given a radially unbounded polynomial g, the drift d(x) = sum_j a_j(x) *
(g(x+v_j) - g(x)) is again a polynomial.  A finite bound c >= sup d over
the reachable lattice yields, for any eps in (0,1), a finite window
W = {x : (eps/c) d(x) > eps - 1} holding all but eps of the stationary
mass.  Per-state stationary bounds on W come from the family of
column-completed stochastic matrices U_j of the uniformised window
generator: the stationary vector of U_j is the normalised j-th row of
(I - U)^{-1}, so one sparse factorisation replaces |W| eigenproblems.

Drift maximisation and window enumeration are restricted to the
structurally reachable lattice (population caps and conservation
invariants); outside it the drift polynomial carries no information about
the chain.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from . import mpm
from .poly import Poly

# when the expected number of uniformised steps to leave the window exceeds
# this, the factored system is dominated by unit roundoff (double LU cannot
# resolve absorption slower than ~1/eps steps) and every normalised row of
# (I-U)^{-1} collapses onto the quasi-stationary vector; one solve suffices
MAX_ABSORPTION_STEPS = 1e12


class SteadyError(ValueError):
    pass


class NoFiniteMaximum(SteadyError):
    """The drift is unbounded above on the reachable lattice."""


class ReducibleWindow(SteadyError):
    """The window is not strongly connected; the model is not ergodic on it."""


class CertificateError(SteadyError):
    pass


class WindowEnumerationError(SteadyError):
    pass


# ---------------------------------------------------------------------------
# drift
# ---------------------------------------------------------------------------


def drift_poly(spec: mpm.ModelSpec, g: Poly) -> Poly:
    """Symbolic drift: expected instantaneous change of g."""
    d = Poly(spec.d, {})
    for tc in spec.classes:
        d = d + tc.alpha * (g.shift(tc.v) - g)
    return d


def drift(spec: mpm.ModelSpec, g: Poly, x) -> float:
    return float(drift_poly(spec, g).eval_exact(x))


def default_lyapunov(spec: mpm.ModelSpec) -> Poly:
    g = Poly(spec.d, {})
    for i in range(spec.d):
        g = g + Poly.var(spec.d, i) ** 2
    return g


# ---------------------------------------------------------------------------
# drift maximisation over the reachable orthant
# ---------------------------------------------------------------------------


def _capped_assignments(spec: mpm.ModelSpec):
    """(capped dims, admissible value tuples, free dims)."""
    caps = mpm.structural_caps(spec)
    capped = [i for i, c in enumerate(caps) if c is not None]
    free = [i for i, c in enumerate(caps) if c is None]
    ranges = [range(caps[i] + 1) for i in capped]
    inv = [
        (w, total) for w, total in mpm.invariants(spec)
        if all(w[i] == 0 for i in free)
    ]
    assignments = []
    for combo in itertools.product(*ranges) if capped else [()]:
        vals = dict(zip(capped, combo))
        if all(sum(w[i] * vals[i] for i in capped) == total for w, total in inv):
            assignments.append(combo)
    if capped and not assignments:
        raise SteadyError("no lattice point satisfies the conservation invariants")
    return capped, assignments, free


def _linear_solve_fractions(A, b):
    """Solve A z = b over the rationals; None if singular."""
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [x / pv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def _face_candidates_exact(dpoly: Poly, free):
    """Stationary points of the drift on every face of the free orthant.

    Valid when the restricted drift has degree <= 2 (gradients linear)."""
    cands = []
    for face in _subsets(free):
        others = [i for i in free if i not in face]
        restricted = dpoly
        for i in others:
            restricted = restricted.fix(i, 0)
        if not face:
            cands.append(tuple(Fraction(0) for _ in free))
            continue
        grads = [restricted.deriv(i) for i in face]
        A = []
        b = []
        linear = True
        for gp in grads:
            if gp.degree() > 1:
                linear = False
                break
            row = []
            for j in face:
                e = [0] * gp.nvars
                e[j] = 1
                row.append(gp.terms.get(tuple(e), Fraction(0)))
            A.append(row)
            b.append(-gp.constant_value())
        if not linear:
            return None  # caller falls back to the numeric path
        sol = _linear_solve_fractions(A, b)
        if sol is None:
            continue
        if any(s < 0 for s in sol):
            continue
        point = []
        k = 0
        for i in free:
            if i in face:
                point.append(sol[k])
                k += 1
            else:
                point.append(Fraction(0))
        cands.append(tuple(point))
    return cands


def _subsets(items):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def _top_form_unbounded(restricted: Poly, free) -> bool:
    """Sampled test whether the drift grows along some nonnegative direction."""
    if not free:
        return False
    deg = restricted.degree()
    if deg <= 0:
        return False
    top = restricted.homogeneous_part(deg)
    rng = np.random.default_rng(7)
    dirs = [np.eye(len(free))[k] for k in range(len(free))]
    dirs += list(rng.dirichlet(np.ones(len(free)), size=512))
    nxt = restricted.homogeneous_part(deg - 1) if deg >= 1 else None
    for u in dirs:
        x = [0.0] * restricted.nvars
        for k, i in enumerate(free):
            x[i] = float(u[k])
        tval = top.eval_float(x)
        if tval > 1e-9:
            return True
        if abs(tval) <= 1e-9 and nxt is not None and nxt.eval_float(x) > 1e-9:
            return True
    return False


def max_drift(spec: mpm.ModelSpec, g: Poly) -> float:
    """A bound c >= sup of the drift over the reachable lattice.

    Capped populations are enumerated; on each slice the stationarity
    system of every orthant face is solved exactly when linear, otherwise
    by seeded multi-start damped Newton plus an expanding-box sweep that
    inflates c until no sampled point exceeds it.
    """
    _require_radially_unbounded(spec, g)
    dpoly = drift_poly(spec, g)
    capped, assignments, free = _capped_assignments(spec)
    best: Fraction | float | None = None
    used_newton = False
    for combo in assignments:
        restricted = dpoly
        for i, val in zip(capped, combo):
            restricted = restricted.fix(i, val)
        if _top_form_unbounded(restricted, free):
            raise NoFiniteMaximum(
                "drift grows without bound on the reachable lattice; "
                "try a different lyapunov polynomial")
        cands = _face_candidates_exact(restricted, free)
        if cands is None:
            used_newton = True
            vals = _newton_candidates(restricted, free)
        else:
            vals = []
            for point in cands:
                x = [Fraction(0)] * spec.d
                for i, val in zip(capped, combo):
                    x[i] = Fraction(val)
                for i, s in zip(free, point):
                    x[i] = s
                vals.append(restricted.eval_exact(x))
        for v in vals:
            if best is None or v > best:
                best = v
    init_val = dpoly.eval_exact(spec.init)
    if best is None or init_val > best:
        best = init_val
    cf = float(best)
    if used_newton:
        cf = _verify_bound_by_sweep(dpoly, spec, cf)
    if cf <= 0:
        # drift nonpositive everywhere still witnesses ergodicity; any
        # positive c keeps the window inequality meaningful
        cf = max(cf, 1e-9)
    return cf


def _newton_candidates(restricted: Poly, free):
    """Seeded multi-start damped Newton on each face (degree >= 3 drift)."""
    vals = []
    grads_all = {i: restricted.deriv(i) for i in free}
    rng = np.random.default_rng(0)
    for face in _subsets(free):
        others = [i for i in free if i not in face]
        rest = restricted
        for i in others:
            rest = rest.fix(i, 0)
        if not face:
            x0 = [0.0] * restricted.nvars
            vals.append(rest.eval_float(x0))
            continue
        grads = [rest.deriv(i) for i in face]
        hess = [[gp.deriv(j) for j in face] for gp in grads]
        starts = 10.0 ** rng.uniform(-1, 4, size=(64, len(face)))
        for s0 in starts:
            x = list(s0)
            ok = False
            for _ in range(80):
                full = [0.0] * restricted.nvars
                for k, i in enumerate(face):
                    full[i] = x[k]
                gvec = np.array([gp.eval_float(full) for gp in grads])
                if np.linalg.norm(gvec) < 1e-9:
                    ok = True
                    break
                H = np.array([[h.eval_float(full) for h in row] for row in hess])
                try:
                    step = np.linalg.solve(H, gvec)
                except np.linalg.LinAlgError:
                    break
                damp = 1.0
                while damp > 1e-6:
                    cand = [xi - damp * si for xi, si in zip(x, step)]
                    if all(ci >= 0 for ci in cand):
                        break
                    damp *= 0.5
                x = [max(xi - damp * si, 0.0) for xi, si in zip(x, step)]
            if ok:
                full = [0.0] * restricted.nvars
                for k, i in enumerate(face):
                    full[i] = x[k]
                vals.append(rest.eval_float(full))
    return vals


def _verify_bound_by_sweep(dpoly: Poly, spec: mpm.ModelSpec, c: float) -> float:
    """Expanding-box sample sweep; inflate c while any sample exceeds it."""
    caps = mpm.structural_caps(spec)
    rng = np.random.default_rng(1)
    for _ in range(8):
        worst = c
        for scale in (2.0 ** k for k in range(1, 21)):
            pts = rng.uniform(0, scale, size=(64, spec.d))
            for i, cap in enumerate(caps):
                if cap is not None:
                    pts[:, i] = np.round(np.clip(pts[:, i], 0, cap))
            for p in pts:
                worst = max(worst, dpoly.eval_float(p))
        if worst <= c:
            return c
        c = worst * 1.1
    return c


def _require_radially_unbounded(spec: mpm.ModelSpec, g: Poly):
    """Sublevel sets of g must be finite on the reachable lattice."""
    caps = mpm.structural_caps(spec)
    for i in range(spec.d):
        if caps[i] is not None:
            continue
        if g.degree_in(i) < 1 or g.leading_coeff_in(i) <= 0:
            raise SteadyError(
                f"lyapunov polynomial is not radially unbounded in {spec.names[i]}")


# ---------------------------------------------------------------------------
# window enumeration
# ---------------------------------------------------------------------------


def window(spec: mpm.ModelSpec, g: Poly, c: float, epsilon: float,
           max_states: int = 5_000_000) -> list[mpm.State]:
    """All reachable lattice points with (eps/c) drift > eps - 1.

    Enumerated over a bounding box per capped-population slice; the box is
    doubled until its entire outer shell violates the inequality.
    """
    if not 0 < epsilon < 1:
        raise SteadyError("epsilon must be in (0,1)")
    dpoly = drift_poly(spec, g)
    cf = Fraction(c)
    if cf <= 0:
        raise SteadyError("drift bound c must be positive")
    thr = cf * (Fraction(epsilon) - 1) / Fraction(epsilon)
    capped, assignments, free = _capped_assignments(spec)
    states: list[mpm.State] = []
    for combo in assignments:
        restricted = dpoly
        for i, val in zip(capped, combo):
            restricted = restricted.fix(i, val)
        pred = _IntPredicate(restricted, thr, free)
        if not free:
            x = [0] * spec.d
            for i, val in zip(capped, combo):
                x[i] = val
            if pred.holds([]):
                states.append(tuple(x))
            continue
        bounds = [8] * len(free)
        for _ in range(40):
            shell = _shell_points(bounds)
            bad_dims = set()
            for pt in shell:
                if pred.holds(pt):
                    for k, v in enumerate(pt):
                        if v == bounds[k] + 1:
                            bad_dims.add(k)
            if not bad_dims:
                break
            for k in bad_dims:
                bounds[k] *= 2
            if max(bounds) > 2 ** 26:
                raise WindowEnumerationError(
                    "window bounding box does not close; the level set may be unbounded")
        else:
            raise WindowEnumerationError("window bounding box did not stabilise")
        count = 1
        for b in bounds:
            count *= b + 1
        if count > max_states * 8:
            raise WindowEnumerationError(
                f"window bounding box holds {count} lattice points (cap {max_states})")
        for pt in itertools.product(*(range(b + 1) for b in bounds)):
            if pred.holds(pt):
                x = [0] * spec.d
                for i, val in zip(capped, combo):
                    x[i] = val
                for k, i in enumerate(free):
                    x[i] = pt[k]
                states.append(tuple(x))
                if len(states) > max_states:
                    raise WindowEnumerationError(
                        f"window exceeds the state cap {max_states}")
    if not states:
        raise SteadyError("window is empty; check the lyapunov polynomial")
    return states


class _IntPredicate:
    """Exact integer test  drift(x) > threshold  on a capped slice."""

    def __init__(self, restricted: Poly, thr: Fraction, free):
        iterms, den = restricted.scaled_int()
        self.terms = [(exps, c) for exps, c in iterms.items()]
        self.free = list(free)
        # drift*den > thr*den  with den > 0
        self.rhs_num = thr.numerator * den
        self.rhs_den = thr.denominator

    def holds(self, pt) -> bool:
        x = {}
        for k, i in enumerate(self.free):
            x[i] = pt[k]
        lhs = 0
        for exps, c in self.terms:
            m = c
            for i, e in enumerate(exps):
                if e:
                    m *= x.get(i, 0) ** e
            lhs += m
        return lhs * self.rhs_den > self.rhs_num


def _shell_points(bounds):
    """Lattice points of the box extended by one layer, minus the box."""
    dims = len(bounds)
    pts = set()
    for k in range(dims):
        for pt in itertools.product(*(
            [bounds[k] + 1] if j == k else range(bounds[j] + 2)
            for j in range(dims)
        )):
            pts.add(pt)
    return pts


# ---------------------------------------------------------------------------
# window matrices and stationary envelopes
# ---------------------------------------------------------------------------


@dataclass
class WindowMatrices:
    C: sp.csr_matrix          # generator restricted to the window (full exits)
    alpha: float              # uniformisation constant, > max_i -C(i,i)
    U: sp.csr_matrix          # I + C/alpha, substochastic
    row_deficit: np.ndarray   # 1 - row sums of U


def window_matrices(spec: mpm.ModelSpec, states: list[mpm.State]) -> WindowMatrices:
    index = {x: i for i, x in enumerate(states)}
    n = len(states)
    rows, cols, data = [], [], []
    diag = np.zeros(n)
    for i, x in enumerate(states):
        succ = mpm.successors(spec, x)
        total = 0.0
        for y, r in succ:
            total += r
            j = index.get(y)
            if j is not None:
                rows.append(i)
                cols.append(j)
                data.append(r)
        diag[i] = -total
    C = sp.csr_matrix((data, (rows, cols)), shape=(n, n)) + sp.diags(diag)
    max_exit = float(-diag.min()) if n else 0.0
    alpha = 1.02 * max_exit if max_exit > 0 else 1.0
    U = (sp.eye(n, format="csr") + C.multiply(1.0 / alpha)).tocsr()
    deficit = np.clip(1.0 - np.asarray(U.sum(axis=1)).ravel(), 0.0, None)
    return WindowMatrices(C=C.tocsr(), alpha=alpha, U=U, row_deficit=deficit)


def courtois_semal(wm: WindowMatrices, batch: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise min/max over j of the stationary vectors of all U_j.

    U_j is U with column j raised by the row deficits.  Its stationary
    vector is the normalised j-th row of N = (I-U)^{-1}, so a single LU of
    (I-U) yields the whole family.  When absorption is so slow that N
    overflows doubles (closed windows included), every row of N normalises
    to the same quasi-stationary vector and one solve suffices.
    """
    n = wm.U.shape[0]
    if n == 1:
        one = np.array([1.0])
        return one, one.copy()
    _require_irreducible(wm.U)
    if float(wm.row_deficit.sum()) <= 0.0:
        qsd = _stationary_direction(wm.U)
        return qsd, qsd.copy()
    A = (sp.eye(n, format="csr") - wm.U).tocsc()
    try:
        lu = spla.splu(A)
        steps = lu.solve(np.ones(n))  # expected steps before leaving W
        degenerate = not np.all(np.isfinite(steps)) or steps.max() > MAX_ABSORPTION_STEPS
    except RuntimeError:
        degenerate = True  # numerically singular: absorption below resolution
    if degenerate:
        qsd = _stationary_direction(wm.U)
        return qsd, qsd.copy()
    lower = np.full(n, np.inf)
    upper = np.zeros(n)
    for start in range(0, n, batch):
        idx = np.arange(start, min(start + batch, n))
        rhs = np.zeros((n, idx.size))
        rhs[idx, np.arange(idx.size)] = 1.0
        Y = lu.solve(rhs, trans="T")  # column k = row idx[k] of N
        np.clip(Y, 0.0, None, out=Y)
        Y /= Y.sum(axis=0)
        lower = np.minimum(lower, Y.min(axis=1))
        upper = np.maximum(upper, Y.max(axis=1))
    return lower, upper


def _require_irreducible(U: sp.csr_matrix):
    off = U - sp.diags(U.diagonal())
    ncomp, _ = csgraph.connected_components(off, directed=True, connection="strong")
    if ncomp != 1:
        raise ReducibleWindow(
            f"window splits into {ncomp} strongly connected components")


def _stationary_direction(U: sp.csr_matrix, shift: float = 1e-12) -> np.ndarray:
    """Dominant left vector of U by shift-inverted iteration."""
    n = U.shape[0]
    A = ((1.0 + shift) * sp.eye(n, format="csr") - U).T.tocsc()
    lu = spla.splu(A)
    x = np.full(n, 1.0 / n)
    for _ in range(60):
        y = lu.solve(x)
        y = np.clip(y, 0.0, None)
        s = y.sum()
        if s <= 0:
            raise SteadyError("stationary iteration collapsed")
        y /= s
        if np.max(np.abs(y - x)) < 1e-14:
            x = y
            break
        x = y
    return x


def steady_bounds(cond_lower: np.ndarray, cond_upper: np.ndarray,
                  epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Unconditional per-state stationary bounds from the conditional ones."""
    l = (1.0 - epsilon) * cond_lower
    u = np.minimum(cond_upper, 1.0)
    return l, u


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------


@dataclass
class LyapunovCertificate:
    g: Poly
    c: float
    epsilon: float
    gamma: float
    window: list[mpm.State]
    index: dict
    l: np.ndarray
    u: np.ndarray

    @property
    def lam(self) -> float:
        # the ergodicity-witness decay constant coincides with gamma after
        # normalising the drift
        return self.gamma


@dataclass
class WitnessReport:
    found: bool
    reason: str
    c: float | None = None


def check_ergodicity_witness(spec: mpm.ModelSpec, g: Poly) -> WitnessReport:
    """Semi-decision for ergodicity: drift bounded above, finite on any
    finite set (automatic for polynomials), radially unbounded g."""
    try:
        _require_radially_unbounded(spec, g)
    except SteadyError as exc:
        return WitnessReport(False, f"sublevel sets not finite: {exc}")
    try:
        c = max_drift(spec, g)
    except NoFiniteMaximum as exc:
        return WitnessReport(False, f"no finite drift bound: {exc}")
    return WitnessReport(True, "drift bounded above; negative outside every window", c)


def build_certificate(spec: mpm.ModelSpec, epsilon: float, g: Poly | None = None,
                      c: float | None = None, max_states: int = 5_000_000) -> LyapunovCertificate:
    if g is None:
        g = spec.lyapunov if spec.lyapunov is not None else default_lyapunov(spec)
    try:
        if c is None:
            c = max_drift(spec, g)
    except (NoFiniteMaximum, SteadyError) as exc:
        raise CertificateError(
            f"cannot certify ergodicity with this lyapunov polynomial ({exc}); "
            "supply `lyapunov = ...` in the model file or --drift-c") from exc
    win = window(spec, g, c, epsilon, max_states=max_states)
    wm = window_matrices(spec, win)
    cond_lo, cond_hi = courtois_semal(wm)
    l, u = steady_bounds(cond_lo, cond_hi, epsilon)
    gamma = c * (1.0 - epsilon) / epsilon
    return LyapunovCertificate(
        g=g, c=float(c), epsilon=epsilon, gamma=gamma, window=win,
        index={x: i for i, x in enumerate(win)}, l=l, u=u)
