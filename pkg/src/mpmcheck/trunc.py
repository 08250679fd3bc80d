"""Finite truncations of an infinite-state chain.

A truncation carries an explored window W plus its frontier post(W)\\W.
Frontier states are absorbing (their rows are all zero) and every atomic
proposition is UNKNOWN there; explored states carry exact two-valued labels
and their true outgoing rates.  State indices follow insertion order, and
all reductions iterate in index order, so repeated runs are bit-identical.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from . import mpm
from .ternary import Ternary


class TruncationError(ValueError):
    pass


class Truncation:
    def __init__(self, spec: mpm.ModelSpec):
        self.spec = spec
        self.states: list[mpm.State] = []
        self.index: dict[mpm.State, int] = {}
        self.explored: list[bool] = []
        self.rows: list[tuple | None] = []  # (targets array, rates array) per explored state
        self.seeds: list[int] = []
        self.capped = False
        self._labels: dict = {}  # ApExpr -> list[int8]
        self._frozen = None

    # -- construction -------------------------------------------------
    def add(self, x: mpm.State) -> int:
        """Index a state as frontier (no row, labels UNKNOWN)."""
        i = self.index.get(x)
        if i is not None:
            return i
        i = len(self.states)
        self.states.append(x)
        self.index[x] = i
        self.explored.append(False)
        self.rows.append(None)
        for ap, col in self._labels.items():
            col.append(int(Ternary.UNKNOWN))
        self._frozen = None
        return i

    def extend(self, new_states) -> None:
        """Move states into the explored window, generating their rows.

        Accepts indices or raw states; states must currently be frontier
        states or fresh seeds.  Previously explored rows are unchanged.
        """
        for s in new_states:
            i = s if isinstance(s, (int, np.integer)) else self.add(s)
            if self.explored[i]:
                continue
            x = self.states[i]
            succ = mpm.successors(self.spec, x)
            targets = np.empty(len(succ), dtype=np.int64)
            rates = np.empty(len(succ), dtype=np.float64)
            for k, (y, r) in enumerate(succ):
                targets[k] = self.add(y)
                rates[k] = r
            self.explored[i] = True
            self.rows[i] = (targets, rates)
            for ap, col in self._labels.items():
                col[i] = int(Ternary.TRUE) if ap.eval(x) else int(Ternary.FALSE)
        self._frozen = None

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def n_explored(self) -> int:
        return sum(1 for e in self.explored if e)

    def explored_mask(self) -> np.ndarray:
        return np.asarray(self.explored, dtype=bool)

    def frontier_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.explored_mask())

    # -- labels ---------------------------------------------------------
    def register_ap(self, ap) -> None:
        if ap in self._labels:
            return
        col = []
        for i, x in enumerate(self.states):
            if self.explored[i]:
                col.append(int(Ternary.TRUE) if ap.eval(x) else int(Ternary.FALSE))
            else:
                col.append(int(Ternary.UNKNOWN))
        self._labels[ap] = col

    def labels(self, ap) -> np.ndarray:
        """Per-state ternary labels: exact on W, UNKNOWN on the frontier."""
        self.register_ap(ap)
        return np.asarray(self._labels[ap], dtype=np.int8)

    # -- matrices --------------------------------------------------------
    def freeze(self):
        """Sparse rate matrix over W plus frontier (frontier rows zero)."""
        if self._frozen is None:
            n = self.n
            nnz = sum(len(r[0]) for r in self.rows if r is not None)
            rows = np.empty(nnz, dtype=np.int64)
            cols = np.empty(nnz, dtype=np.int64)
            data = np.empty(nnz, dtype=np.float64)
            k = 0
            for i, row in enumerate(self.rows):
                if row is None:
                    continue
                t, r = row
                m = len(t)
                rows[k:k + m] = i
                cols[k:k + m] = t
                data[k:k + m] = r
                k += m
            mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
            exit_rates = np.asarray(mat.sum(axis=1)).ravel()
            self._frozen = (mat, exit_rates)
        return self._frozen

    def rate_matrix(self) -> sp.csr_matrix:
        return self.freeze()[0]

    def exit_rates(self) -> np.ndarray:
        return self.freeze()[1]

    def as_view(self, absorbed=None) -> "AbsorbingView":
        return make_absorbing(self, absorbed)

    # -- reporting --------------------------------------------------------
    def depth(self, sources=None) -> float:
        """Minimal BFS hop count from the seed set to any frontier state."""
        if sources is None:
            sources = self.seeds if self.seeds else [0]
        sources = [s if isinstance(s, (int, np.integer)) else self.index[s] for s in sources]
        for s in sources:
            if not self.explored[s]:
                raise TruncationError(f"source {self.states[s]} not explored")
        frontier = set(self.frontier_indices().tolist())
        if not frontier:
            return math.inf
        seen = set(sources)
        ring = list(sources)
        dist = 0
        while ring:
            dist += 1
            nxt = []
            for i in ring:
                row = self.rows[i]
                if row is None:
                    continue
                for j in row[0].tolist():
                    if j in frontier:
                        return dist
                    if j not in seen:
                        seen.add(j)
                        nxt.append(j)
            ring = nxt
        return math.inf

    def dump(self, fh) -> None:
        exit_rates = self.exit_rates()
        aps = list(self._labels)
        for i, x in enumerate(self.states):
            labels = " ".join(str(Ternary(self._labels[ap][i])) for ap in aps)
            fh.write(f"{' '.join(map(str, x))} ; {exit_rates[i]!r} ; {labels}\n")


def extend(tr: Truncation, new_states, spec: mpm.ModelSpec | None = None) -> Truncation:
    """Functional-style wrapper over Truncation.extend (mutates tr)."""
    if spec is not None and spec is not tr.spec:
        raise TruncationError("truncation belongs to a different model")
    tr.extend(new_states)
    return tr


class AbsorbingView:
    """Read-only view of a truncation with extra rows forced to zero.

    The frontier is absorbing already; `absorbed` adds explored states whose
    rows should read as zero (targets of reachability computations).  The
    base truncation is never modified.
    """

    def __init__(self, base: Truncation, absorbed: np.ndarray):
        self.base = base
        self.absorbed = absorbed
        n = base.n
        mat, exit_rates = base.freeze()
        if absorbed.any():
            keep = sp.diags((~absorbed).astype(np.float64))
            mat = (keep @ mat).tocsr()
            exit_rates = np.where(absorbed, 0.0, exit_rates)
        self.rates = mat
        self.exit = exit_rates
        max_exit = float(exit_rates.max()) if n else 0.0
        # uniformisation constant: strict margin over the largest exit rate
        self.q = 1.02 * max_exit if max_exit > 0 else 1.0
        self._P = None
        self._PT = None

    @property
    def n(self) -> int:
        return self.base.n

    def uniformized(self) -> sp.csr_matrix:
        """P = I + Q/q; absorbing states become self-loops."""
        if self._P is None:
            n = self.n
            diag = 1.0 - self.exit / self.q
            self._P = (self.rates.multiply(1.0 / self.q) + sp.diags(diag)).tocsr()
        return self._P

    def uniformized_T(self) -> sp.csr_matrix:
        if self._PT is None:
            self._PT = self.uniformized().T.tocsr()
        return self._PT


def make_absorbing(tr: Truncation, A=None) -> AbsorbingView:
    """View of tr with the states of A made absorbing."""
    n = tr.n
    mask = np.zeros(n, dtype=bool)
    if A is not None:
        if isinstance(A, np.ndarray) and A.dtype == bool:
            mask = A.copy()
        else:
            for s in A:
                mask[s if isinstance(s, (int, np.integer)) else tr.index[s]] = True
    return AbsorbingView(tr, mask)


def depth(tr: Truncation, s0) -> float:
    return tr.depth([s0])
