"""State-space exploration driven by transient reachability.

The mass-directed strategy grows the window from the worst-leaking seed
state: frontier states are ranked by the transient mass they absorb by the
time horizon and added in large batches until, from every seed, the
probability of reaching an undecided frontier state stays below epsilon.
States already decided by the stop predicate do not count as leaks (and
exploration is not steered towards them), which is what lets time-bounded
and even unbounded reachability terminate on a finite window.

A breadth-first baseline (expand the whole frontier each round, same leak
criterion) is kept for comparison runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import csl, mpm, steady, transient
from .trunc import Truncation


class ExploreError(ValueError):
    pass


@dataclass
class ExploreConfig:
    epsilon: float = 1e-6
    batch_quantile: float = 0.9
    max_states: int = 2_000_000
    transient_delta: float = 1e-10
    strategy: str = "advanced"  # advanced | fsp
    use_ap_shortcut: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ExploreError("epsilon must be in (0,1)")
        if self.strategy not in ("advanced", "fsp"):
            raise ExploreError(f"unknown strategy {self.strategy!r}")


def _stop_mask(tr: Truncation, stop_pred) -> np.ndarray:
    """Exact membership of the stop predicate over all indexed states."""
    if stop_pred is None:
        return np.zeros(tr.n, dtype=bool)
    return np.fromiter((stop_pred.eval(x) for x in tr.states), dtype=bool, count=tr.n)


def _leak_targets(tr: Truncation, stop_pred) -> np.ndarray:
    mask = np.zeros(tr.n, dtype=bool)
    mask[tr.frontier_indices()] = True
    if stop_pred is not None:
        mask &= ~_stop_mask(tr, stop_pred)
    return mask


def transient_trunc(spec: mpm.ModelSpec, tr: Truncation, w0, stop_pred,
                    t: float, cfg: ExploreConfig) -> set[int]:
    """Grow tr until undecided frontier mass from every seed is < epsilon.

    Returns the window: every explored state plus the decided frontier
    shell (which is explored so its labels are known).  The leak guarantee
    is re-checked after the shell is added, so the returned truncation
    always satisfies it as-is.
    """
    eps = cfg.epsilon
    delta = min(cfg.transient_delta, eps * 1e-3)
    seeds = sorted(_as_indices(tr, w0))
    tr.extend(seeds)
    tr.seeds = list(seeds)
    shell_done = False
    while not tr.capped:
        targets = _leak_targets(tr, stop_pred)
        if targets.any():
            view = tr.as_view()
            leak = transient.reach_prob(view, targets, t, delta)
            order = np.argsort(-leak[seeds], kind="stable")
            worst = seeds[int(order[0])]
            if leak[worst] >= eps:
                shell_done = False
                _expand_from(tr, worst, stop_pred, t, eps, delta, cfg)
                continue
        if shell_done:
            break
        # decided frontier states join the window with known labels; this
        # can expose fresh undecided frontier, so re-check the guard once
        _explore_decided_shell(tr, stop_pred, cfg)
        shell_done = True
    return set(np.flatnonzero(tr.explored_mask()).tolist())


def _expand_from(tr: Truncation, source: int, stop_pred, t, eps, delta, cfg):
    """Inner loop: batch-add frontier states by transient mass from source."""
    while True:
        frontier = tr.frontier_indices()
        if frontier.size == 0:
            return
        targets = _leak_targets(tr, stop_pred)
        if not targets.any():
            return
        view = tr.as_view()
        dist = transient.transient_dist(view, source, t, delta)
        if float(dist.values[targets].sum()) < eps:
            return
        fmass = dist.values[frontier]
        total = float(fmass.sum())
        if total < eps:
            return
        order = np.argsort(-fmass, kind="stable")
        goal = max(eps, cfg.batch_quantile * total)
        cum = 0.0
        take = 0
        for k in order:
            cum += float(fmass[k])
            take += 1
            if cum >= goal:
                break
        batch = frontier[order[:take]]
        room = cfg.max_states - tr.n_explored
        if room <= 0:
            tr.capped = True
            return
        if batch.size > room:
            batch = batch[:room]
            tr.capped = True
        tr.extend(batch.tolist())
        if tr.capped:
            return


def _explore_decided_shell(tr: Truncation, stop_pred, cfg):
    """Explore (one layer of) the decided frontier so its labels are known."""
    if stop_pred is None:
        return
    frontier = tr.frontier_indices()
    decided = [int(i) for i in frontier if stop_pred.eval(tr.states[i])]
    if not decided:
        return
    room = cfg.max_states - tr.n_explored
    if room <= 0:
        tr.capped = True
        return
    tr.extend(decided[:room])
    if len(decided) > room:
        tr.capped = True


def fsp_explore(spec: mpm.ModelSpec, tr: Truncation, w0, t: float,
                cfg: ExploreConfig) -> set[int]:
    """Breadth-first baseline: add the entire frontier each round until the
    leak criterion holds."""
    eps = cfg.epsilon
    delta = min(cfg.transient_delta, eps * 1e-3)
    seeds = sorted(_as_indices(tr, w0))
    tr.extend(seeds)
    tr.seeds = list(seeds)
    while True:
        frontier = tr.frontier_indices()
        if frontier.size == 0:
            break
        view = tr.as_view()
        targets = np.zeros(tr.n, dtype=bool)
        targets[frontier] = True
        leak = transient.reach_prob(view, targets, t, delta)
        if float(leak[seeds].max()) < eps:
            break
        room = cfg.max_states - tr.n_explored
        if room <= 0:
            tr.capped = True
            break
        batch = frontier[:room]
        if frontier.size > room:
            tr.capped = True
        tr.extend(batch.tolist())
        if tr.capped:
            break
    return set(np.flatnonzero(tr.explored_mask()).tolist())


def _as_indices(tr: Truncation, states) -> list[int]:
    out = []
    for s in states:
        out.append(int(s) if isinstance(s, (int, np.integer)) else tr.add(s))
    return out


# ---------------------------------------------------------------------------
# formula-driven exploration
# ---------------------------------------------------------------------------


def truncate_for(spec: mpm.ModelSpec, phi: csl.StateFormula, cfg: ExploreConfig,
                 cert: steady.LyapunovCertificate | None = None) -> tuple[Truncation, set[int]]:
    """Build one truncation sufficient to evaluate phi at the initial state.

    Recursive descent over the formula: negation and conjunction recurse on
    the same window, a next operator needs the frontier explored, an until
    runs one mass-directed exploration per time phase, and a steady operator
    pulls in the certificate window (plus its successors, so the body is
    decidable on all of it).
    """
    tr = Truncation(spec)
    root = tr.add(spec.init)
    tr.extend([root])
    tr.seeds = [root]

    def explore_until(win: set[int], path: csl.Until) -> set[int]:
        lo, hi = path.interval.lo, path.interval.hi
        pred = csl.can_stop(path) if cfg.use_ap_shortcut else None
        if cfg.strategy == "fsp":
            return fsp_explore(spec, tr, sorted(win), hi, cfg)
        if lo > 0:
            # the shortcut is only sound for the zero-start phase
            win = transient_trunc(spec, tr, sorted(win), None, lo, cfg)
        return transient_trunc(spec, tr, sorted(win), pred, hi - lo, cfg)

    def rec(win: set[int], f) -> set[int]:
        if isinstance(f, csl.Atomic):
            return win
        if isinstance(f, csl.Not):
            return rec(win, f.arg)
        if isinstance(f, csl.And):
            return rec(win, f.left) | rec(win, f.right)
        if isinstance(f, csl.Prob):
            path = f.path
            if isinstance(path, csl.Next):
                tr.extend(sorted(win))
                post = set()
                for i in sorted(win):
                    row = tr.rows[i]
                    post.update(int(j) for j in row[0].tolist())
                tr.extend(sorted(post))
                return rec(win | post, path.body)
            w2 = explore_until(win, path)
            return rec(w2, path.left) | rec(w2, path.right)
        if isinstance(f, csl.Steady):
            if cert is None:
                raise ExploreError(
                    "steady-state operator needs a certificate; supply a "
                    "lyapunov polynomial (model file) or --drift-c")
            widx = _as_indices(tr, cert.window)
            tr.extend(widx)
            post = set()
            for i in widx:
                row = tr.rows[i]
                post.update(int(j) for j in row[0].tolist())
            tr.extend(sorted(post))
            base = win | set(widx) | post
            out = rec(base, f.body)
            if f.condition is not None:
                out |= rec(base, f.condition)
            return out
        raise TypeError(f"not a state formula: {f!r}")

    win = rec({root}, phi)
    tr.extend(sorted(win))
    for ap in csl.formula_aps(phi):
        tr.register_ap(ap)
    return tr, win


def verify_leak(tr: Truncation, stop_pred, t: float, cfg: ExploreConfig) -> float:
    """Independent recomputation of the worst seed leak on a finished
    truncation (used by tests and reports)."""
    targets = _leak_targets(tr, stop_pred)
    if not targets.any():
        return 0.0
    view = tr.as_view()
    delta = min(cfg.transient_delta, cfg.epsilon * 1e-3)
    leak = transient.reach_prob(view, targets, t, delta)
    return float(leak[tr.seeds].max())
