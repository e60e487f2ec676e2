"""Persistent homology over F2: absolute and relative barcodes, bottleneck
distance, and degree-0 maps induced by inclusions at a fixed scale.

During reduction, columns are Python ints used as bitsets, so column
additions are single XORs and the pivot is ``bit_length() - 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching

from .complexes import ComplexInclusion, FilteredComplex


@dataclass(frozen=True, eq=False)
class Barcode:
    """Intervals per homology degree.

    ``bars[d]`` is a (k, 2) array of (birth, death) sorted by birth then death;
    ``death = inf`` marks a class still alive at the radius cap ``cap``.
    """

    bars: dict = field(default_factory=dict)
    cap: float = math.inf

    def __post_init__(self):
        clean = {}
        for d, arr in self.bars.items():
            a = np.asarray(arr, dtype=np.float64).reshape(-1, 2)
            if np.any(a[:, 0] > a[:, 1]):
                raise ValueError("birth exceeds death")
            a = a[np.lexsort((a[:, 1], a[:, 0]))]
            a.setflags(write=False)
            clean[int(d)] = a
        object.__setattr__(self, "bars", clean)

    def __getitem__(self, degree: int) -> np.ndarray:
        return self.bars.get(degree, np.zeros((0, 2)))

    @property
    def degrees(self) -> list[int]:
        return sorted(self.bars)

    def __len__(self) -> int:
        return sum(len(a) for a in self.bars.values())

    def betti(self, degree: int, alpha: float) -> int:
        """Number of bars of ``degree`` alive at scale alpha (half-open intervals)."""
        a = self[degree]
        return int(np.sum((a[:, 0] <= alpha) & (alpha < a[:, 1])))

    def infinite(self, degree: int) -> np.ndarray:
        a = self[degree]
        return a[np.isinf(a[:, 1]), 0]

    def finite(self, degree: int) -> np.ndarray:
        a = self[degree]
        return a[np.isfinite(a[:, 1])]

    def longest(self, k: int) -> list[tuple[int, float, float]]:
        """The k longest bars across degrees as (degree, birth, death); infinite
        bars are measured up to the cap."""
        rows = []
        for d in self.degrees:
            for b, e in self[d]:
                rows.append((d, float(b), float(e)))
        end = lambda r: min(r[2], self.cap) if math.isfinite(self.cap) else r[2]
        rows.sort(key=lambda r: (-(end(r) - r[1]), r[0], r[1]))
        return rows[:k]

    def to_json(self) -> list[dict]:
        out = []
        for d in self.degrees:
            out.append({"degree": d,
                        "bars": [[float(b), "inf" if math.isinf(e) else float(e)] for b, e in self[d]]})
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data, cap: float = math.inf) -> "Barcode":
        bars = {}
        for entry in data:
            rows = [[float(b), math.inf if e == "inf" else float(e)] for b, e in entry["bars"]]
            bars[int(entry["degree"])] = np.array(rows, dtype=np.float64).reshape(-1, 2)
        return cls(bars, cap)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Barcode):
            return NotImplemented
        ds = set(d for d in self.degrees if len(self[d])) | set(d for d in other.degrees if len(other[d]))
        return all(self[d].shape == other[d].shape and np.array_equal(self[d], other[d]) for d in ds)

    __hash__ = None  # type: ignore[assignment]


def _reduce(columns: list[list[int]], dims: list[int], values: np.ndarray, max_dim: int, cap: float) -> Barcode:
    """Column reduction with clearing.

    ``columns[j]`` lists the row indices (global, < j) of the boundary of
    simplex j. Rows are re-indexed within their dimension so bitsets stay
    as short as the number of simplices of one dimension.
    """
    n = len(columns)
    local = [0] * n
    glob_of: dict[int, list[int]] = {}
    for j, d in enumerate(dims):
        g = glob_of.setdefault(d, [])
        local[j] = len(g)
        g.append(j)
    negative = [False] * n
    cleared = [False] * n
    pairs = []
    for d in sorted(glob_of, reverse=True):
        if d == 0:
            continue
        rows = glob_of.get(d - 1, [])
        pivot_of: dict[int, int] = {}
        reduced: dict[int, int] = {}
        for j in glob_of[d]:
            if cleared[j]:
                continue
            col = 0
            for r in columns[j]:
                col ^= 1 << local[r]
            while col:
                low = col.bit_length() - 1
                k = pivot_of.get(low)
                if k is None:
                    break
                col ^= reduced[k]
            if col:
                low = col.bit_length() - 1
                pivot_of[low] = j
                reduced[j] = col
                negative[j] = True
                i = rows[low]
                cleared[i] = True
                pairs.append((i, j))
    bars: dict[int, list] = {d: [] for d in range(max_dim + 1)}
    for i, j in pairs:
        b, e = values[i], values[j]
        if e > b:
            bars[dims[i]].append((b, e))
    for i in range(n):
        if not negative[i] and not cleared[i]:
            bars[dims[i]].append((values[i], math.inf))
    return Barcode({d: np.array(v, dtype=np.float64).reshape(-1, 2) for d, v in bars.items()}, cap)


def _boundary_lists(simplices, index: dict) -> list[list[int]]:
    cols = []
    for s in simplices:
        if len(s) == 1:
            cols.append([])
        else:
            cols.append([index[s[:k] + s[k + 1:]] for k in range(len(s))])
    return cols


def reduce_barcodes(F: FilteredComplex) -> Barcode:
    """Barcode of the filtration in degrees 0..max_dim."""
    cols = _boundary_lists(F.simplices, F.index)
    dims = [len(s) - 1 for s in F.simplices]
    return _reduce(cols, dims, F.values, F.max_dim, F.max_radius)


def relative_barcodes(F: FilteredComplex, A: ComplexInclusion) -> Barcode:
    """Barcode of the pair (F, A) via the quotient chain complex F / A."""
    if A.target is not F:
        raise ValueError("inclusion does not land in F")
    in_A = np.zeros(len(F), dtype=bool)
    for s, v in zip(A.source.simplices, A.source.values):
        img = A.image(s)
        j = F.index.get(img)
        if j is None:
            raise ValueError(f"{img} is not a simplex of F")
        if abs(F.values[j] - v) > 1e-12:
            raise ValueError("subcomplex filtration values differ from F")
        in_A[j] = True
    for j, s in enumerate(F.simplices):
        if in_A[j] and len(s) > 1:
            for k in range(len(s)):
                if not in_A[F.index[s[:k] + s[k + 1:]]]:
                    raise ValueError("A is not closed under faces")
    keep = np.flatnonzero(~in_A)
    new_index = {F.simplices[j]: i for i, j in enumerate(keep)}
    cols = []
    for j in keep:
        s = F.simplices[j]
        faces = (new_index.get(s[:k] + s[k + 1:]) for k in range(len(s))) if len(s) > 1 else ()
        cols.append([r for r in faces if r is not None])
    dims = [len(F.simplices[j]) - 1 for j in keep]
    return _reduce(cols, dims, F.values[keep], F.max_dim, F.max_radius)


# ---------------------------------------------------------------------------
# bottleneck distance


def _clamped(B: Barcode, degree: int, horizon: float) -> tuple[np.ndarray, np.ndarray]:
    """Finite bars and infinite births, with deaths clamped at a finite horizon."""
    a = B[degree]
    if math.isfinite(horizon):
        a = a[a[:, 0] < horizon]
        a = np.column_stack([a[:, 0], np.minimum(a[:, 1], horizon)])
        return a[a[:, 1] > a[:, 0]], np.zeros(0)
    fin = a[np.isfinite(a[:, 1])]
    return fin[fin[:, 1] > fin[:, 0]], np.sort(a[np.isinf(a[:, 1]), 0])


def _feasible(A: np.ndarray, B: np.ndarray, hA: np.ndarray, hB: np.ndarray, D: np.ndarray, t: float) -> bool:
    bigA = np.flatnonzero(hA > t)
    bigB = np.flatnonzero(hB > t)
    close = D <= t
    for rows, sub in ((bigA, close[bigA, :]), (bigB, close[:, bigB].T)):
        if len(rows) == 0:
            continue
        if sub.shape[1] == 0:
            return False
        m = maximum_bipartite_matching(csr_matrix(sub), perm_type="column")
        if np.sum(m >= 0) < len(rows):
            return False
    return True


def bottleneck_finite(A: np.ndarray, B: np.ndarray) -> float:
    """Bottleneck distance between two finite diagrams given as (k, 2) arrays."""
    A = np.asarray(A, dtype=np.float64).reshape(-1, 2)
    B = np.asarray(B, dtype=np.float64).reshape(-1, 2)
    if len(A) == 0 and len(B) == 0:
        return 0.0
    hA = (A[:, 1] - A[:, 0]) / 2.0
    hB = (B[:, 1] - B[:, 0]) / 2.0
    D = np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=2) if len(A) and len(B) else np.zeros((len(A), len(B)))
    cands = np.unique(np.concatenate([[0.0], hA, hB, D.ravel()]))
    lo, hi = 0, len(cands) - 1  # cands[hi] = max half-persistence or more, always feasible
    if _feasible(A, B, hA, hB, D, cands[lo]):
        return float(cands[lo])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _feasible(A, B, hA, hB, D, cands[mid]):
            hi = mid
        else:
            lo = mid
    return float(cands[hi])


def bottleneck_distance(B1: Barcode, B2: Barcode, degree: int) -> float:
    """Exact bottleneck distance in one degree.

    When either barcode carries a finite radius cap, both are truncated at the
    smaller cap so that classes alive at the cap are compared as bars ending
    there. Without caps, infinite bars are matched among themselves by sorted
    births, and a count mismatch gives ``inf``.
    """
    horizon = min(B1.cap, B2.cap)
    A, infA = _clamped(B1, degree, horizon)
    B, infB = _clamped(B2, degree, horizon)
    d_inf = 0.0
    if len(infA) != len(infB):
        return math.inf
    if len(infA):
        d_inf = float(np.max(np.abs(infA - infB)))
    return max(d_inf, bottleneck_finite(A, B))


# ---------------------------------------------------------------------------
# degree-0 maps


def components_at(F: FilteredComplex, alpha: float) -> np.ndarray:
    """Component label per vertex of the sublevel complex at alpha.

    Labels are numbered by the smallest vertex they contain.
    """
    n = F.n_vertices
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    E = F.edges(alpha)
    g = coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(n, n)) if len(E) else coo_matrix((n, n))
    _, lab = connected_components(g, directed=False)
    first = {}
    for v, l in enumerate(lab):
        first.setdefault(l, len(first))
    return np.array([first[l] for l in lab], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class H0Map:
    """F2 matrix of the map on degree-0 homology at scale ``alpha``.

    ``matrix[i, j] = 1`` when source component j lands in target component i.
    """

    alpha: float
    matrix: np.ndarray
    source_labels: np.ndarray
    target_labels: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def fiber_sizes(self) -> np.ndarray:
        """Number of source components hitting each target component."""
        return self.matrix.sum(axis=1)

    def to_json(self) -> dict:
        return {"alpha": float(self.alpha), "matrix": self.matrix.astype(int).tolist()}


def h0_induced_map(incl: ComplexInclusion, alpha: float) -> H0Map:
    if alpha > incl.source.max_radius or alpha > incl.target.max_radius:
        raise ValueError("alpha exceeds a radius cap")
    src = components_at(incl.source, alpha)
    tgt = components_at(incl.target, alpha)
    n_src = int(src.max()) + 1 if len(src) else 0
    n_tgt = int(tgt.max()) + 1 if len(tgt) else 0
    M = np.zeros((n_tgt, n_src), dtype=np.uint8)
    for v, c in enumerate(src):
        M[tgt[incl.vertex_map[v]], c] = 1
    return H0Map(float(alpha), M, src, tgt)


def compose_h0(g: H0Map, f: H0Map) -> np.ndarray:
    """Matrix of g∘f over F2."""
    return (g.matrix.astype(np.int64) @ f.matrix.astype(np.int64)) % 2
