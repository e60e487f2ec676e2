"""Filtered Čech and Rips complexes on finite point clouds.

Filtration values are radii: a simplex enters the Čech filtration at the radius
of the minimal enclosing ball of its vertices, and the Rips filtration at half
its diameter. Both agree on vertices and edges.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree
from scipy.spatial import QhullError

from .sample_spaces import PointCloud

_KINDS = ("cech", "rips", "delaunay_cech")


# ---------------------------------------------------------------------------
# minimal enclosing balls


def circumball(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest ball having all of ``points`` on its boundary (center in their affine hull)."""
    P = np.asarray(points, dtype=np.float64)
    if len(P) == 1:
        return P[0].copy(), 0.0
    U = P[1:] - P[0]
    G = U @ U.T
    b = 0.5 * np.diag(G)
    lam, *_ = np.linalg.lstsq(G, b, rcond=None)
    c = P[0] + lam @ U
    return c, float(np.max(np.linalg.norm(P - c, axis=1)))


def _inside(c: np.ndarray, r: float, p: np.ndarray) -> bool:
    return float(np.linalg.norm(p - c)) <= r + 1e-12 * (1.0 + r)


def minimal_enclosing_ball(points) -> tuple[np.ndarray, float]:
    """Exact minimal enclosing ball by Welzl's move-to-front recursion.

    The input order is shuffled with a fixed seed, so the result is deterministic.
    Returns ``(center, radius)``.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or len(P) == 0:
        raise ValueError("need at least one point")
    dim = P.shape[1]
    order = np.random.default_rng(0x5EED).permutation(len(P))
    pts = [P[i] for i in order]

    def mtf(n: int, boundary: list) -> tuple[np.ndarray, float]:
        if boundary:
            c, r = circumball(np.array(boundary))
        else:
            c, r = pts[0].copy(), 0.0
            n_start = 1
        if len(boundary) == dim + 1:
            return c, r
        start = 0 if boundary else n_start
        for i in range(start, n):
            if not _inside(c, r, pts[i]):
                c, r = mtf(i, boundary + [pts[i]])
        return c, r

    return mtf(len(pts), [])


def meb_radius(points) -> float:
    return minimal_enclosing_ball(points)[1]


def meb_radii(P: np.ndarray) -> np.ndarray:
    """Minimal enclosing ball radii for a batch ``P`` of shape (m, k, N).

    Evaluated exactly by enumerating candidate support sets (every subset of
    size >= 2) and keeping the smallest circumball that contains all k points.
    Used for k <= 4; larger simplices go through :func:`minimal_enclosing_ball`.
    """
    P = np.asarray(P, dtype=np.float64)
    m, k, _ = P.shape
    if m == 0:
        return np.zeros(0)
    if k == 1:
        return np.zeros(m)
    if k > 4:
        return np.array([meb_radius(p) for p in P])
    best = np.full(m, np.inf)
    for size in range(2, k + 1):
        for S in itertools.combinations(range(k), size):
            Q = P[:, S, :]
            U = Q[:, 1:, :] - Q[:, :1, :]
            if size == 2:
                c = Q[:, 0, :] + 0.5 * U[:, 0, :]
                ok = np.ones(m, dtype=bool)
                r = np.sqrt((U[:, 0, :] ** 2).sum(-1)) / 2.0  # same expression as edge values
            else:
                G = np.einsum("mik,mjk->mij", U, U)
                b = 0.5 * np.einsum("mii->mi", G)
                scale = np.prod(np.einsum("mii->mi", G), axis=1)
                det = np.linalg.det(G)
                ok = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300)
                G_safe = np.where(ok[:, None, None], G, np.eye(size - 1)[None])
                lam = np.linalg.solve(G_safe, b[..., None])[..., 0]
                c = Q[:, 0, :] + np.einsum("mi,mik->mk", lam, U)
            if size > 2:
                r = np.linalg.norm(Q[:, 0, :] - c, axis=1)
            far = np.linalg.norm(P - c[:, None, :], axis=2).max(axis=1)
            ok &= far <= r + 1e-9 * (1.0 + r)
            best = np.where(ok & (r < best), r, best)
    return best


# ---------------------------------------------------------------------------
# filtered complexes


@dataclass(frozen=True, eq=False)
class FilteredComplex:
    """Simplices (sorted vertex tuples) with filtration values, in filtration order.

    Order is by (value, dimension, lexicographic vertices); ``points`` are the
    coordinates the vertex indices refer to.
    """

    simplices: tuple
    values: np.ndarray
    points: np.ndarray
    max_dim: int
    max_radius: float
    kind: str = "cech"
    _index: dict = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "simplices", tuple(self.simplices))

    @classmethod
    def from_simplices(cls, simplices, values, points, max_dim, max_radius, kind="cech"):
        items = sorted(zip(values, simplices), key=lambda t: (t[0], len(t[1]), t[1]))
        simps = tuple(tuple(int(v) for v in s) for _, s in items)
        vals = np.array([float(v) for v, _ in items], dtype=np.float64)
        pts = np.asarray(points, dtype=np.float64)
        return cls(simps, vals, pts, int(max_dim), float(max_radius), kind)

    def __len__(self) -> int:
        return len(self.simplices)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def dims(self) -> np.ndarray:
        return np.fromiter((len(s) - 1 for s in self.simplices), dtype=np.int64, count=len(self.simplices))

    @property
    def index(self) -> dict:
        if self._index is None:
            object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.simplices)})
        return self._index

    def value(self, simplex) -> float:
        return float(self.values[self.index[tuple(simplex)]])

    def __contains__(self, simplex) -> bool:
        return tuple(simplex) in self.index

    def edges(self, alpha: float | None = None) -> np.ndarray:
        """Edges with value <= alpha as an (m, 2) int array."""
        out = [s for s, v in zip(self.simplices, self.values)
               if len(s) == 2 and (alpha is None or v <= alpha)]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def sublevel(self, alpha: float) -> list[tuple]:
        return [s for s, v in zip(self.simplices, self.values) if v <= alpha]


@dataclass(frozen=True, eq=False)
class ComplexInclusion:
    """Injective vertex map from ``source`` into ``target``.

    For Čech and Rips complexes this induces a simplicial map; for the
    Delaunay-restricted complexes only the vertex level is simplicial, which is
    all that degree-0 maps use.
    """

    source: FilteredComplex
    target: FilteredComplex
    vertex_map: np.ndarray

    def __post_init__(self):
        vm = np.asarray(self.vertex_map, dtype=np.int64).reshape(-1)
        if len(vm) != self.source.n_vertices:
            raise ValueError("vertex_map must cover every source vertex")
        if len(np.unique(vm)) != len(vm):
            raise ValueError("vertex_map is not injective")
        if len(vm) and (vm.min() < 0 or vm.max() >= self.target.n_vertices):
            raise ValueError("vertex_map points outside the target")
        vm.setflags(write=False)
        object.__setattr__(self, "vertex_map", vm)

    @property
    def simplicial(self) -> bool:
        return self.source.kind != "delaunay_cech" and self.target.kind != "delaunay_cech"

    def image(self, simplex) -> tuple:
        return tuple(sorted(int(self.vertex_map[v]) for v in simplex))

    def check(self, atol: float = 1e-12) -> None:
        """Raise ValueError unless the map is a filtration-compatible inclusion."""
        tgt = self.target
        for s, v in zip(self.source.simplices, self.source.values):
            if not self.simplicial and len(s) > 1:
                continue
            img = self.image(s)
            if img not in tgt:
                if v > tgt.max_radius:
                    continue
                raise ValueError(f"simplex {s} maps to {img}, which is missing from the target")
            if tgt.value(img) > v + atol:
                raise ValueError(f"filtration value increases along the inclusion at {s}")

    def compose(self, other: "ComplexInclusion") -> "ComplexInclusion":
        """``other ∘ self``: first this inclusion, then ``other``."""
        if other.source is not self.target:
            raise ValueError("inclusions are not composable")
        return ComplexInclusion(self.source, other.target, other.vertex_map[self.vertex_map])


def _points_of(X) -> np.ndarray:
    if isinstance(X, PointCloud):
        return X.points
    return np.asarray(X, dtype=np.float64)


def _check_caps(max_dim: int, max_radius: float) -> None:
    if max_dim < 0:
        raise ValueError("max_dim must be >= 0")
    if not max_radius > 0:
        raise ValueError("max_radius must be > 0")


def _cliques(points: np.ndarray, max_dim: int, max_radius: float) -> list[list[tuple]]:
    """Cliques of the graph with edges of length <= 2*max_radius, by dimension."""
    n = len(points)
    by_dim: list[list[tuple]] = [[(i,) for i in range(n)]]
    if max_dim == 0 or n < 2:
        return by_dim
    pairs = cKDTree(points).query_pairs(2.0 * max_radius * (1 + 1e-12), output_type="ndarray")
    pairs = np.sort(pairs, axis=1) if len(pairs) else pairs.reshape(0, 2)
    # exact re-check of the kd-tree tolerance
    d = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1) if len(pairs) else np.zeros(0)
    pairs = pairs[d / 2.0 <= max_radius]
    edges = sorted(map(tuple, pairs.tolist()))
    by_dim.append(edges)
    upper = [set() for _ in range(n)]
    for i, j in edges:
        upper[i].add(j)
    prev = edges
    for _ in range(2, max_dim + 1):
        nxt = []
        for s in prev:
            common = upper[s[0]].intersection(*(upper[v] for v in s[1:]))
            for w in sorted(common):
                if w > s[-1]:
                    nxt.append(s + (w,))
        if not nxt:
            break
        by_dim.append(nxt)
        prev = nxt
    return by_dim


def _values_for(points: np.ndarray, simplices: Sequence[tuple], kind: str) -> np.ndarray:
    if not simplices:
        return np.zeros(0)
    arr = np.array(simplices, dtype=np.int64)
    k = arr.shape[1]
    if k == 1:
        return np.zeros(len(arr))
    P = points[arr]
    if kind == "rips" or k == 2:
        diffs = P[:, :, None, :] - P[:, None, :, :]
        return np.sqrt((diffs ** 2).sum(-1)).reshape(len(arr), -1).max(axis=1) / 2.0
    return meb_radii(P)


def _assemble(points, by_dim, max_dim, max_radius, kind) -> FilteredComplex:
    simps, vals = [], []
    prev: dict = {}
    for group in by_dim:
        v = _values_for(points, group, kind)
        if group and len(group[0]) >= 3:
            # rounding can put a simplex a few ulps below a face; a face
            # missing from the previous layer exceeded the cap
            k = len(group[0])
            for i in range(k):
                fv = np.array([prev.get(s[:i] + s[i + 1:], np.inf) for s in group])
                v = np.maximum(v, fv)
        keep = v <= max_radius
        kept = [s for s, k in zip(group, keep) if k]
        simps.extend(kept)
        vals.extend(v[keep].tolist())
        prev = dict(zip(kept, v[keep].tolist()))
    return FilteredComplex.from_simplices(simps, vals, points, max_dim, max_radius, kind)


def cech_filtration(X, max_dim: int = 2, max_radius: float = 0.5) -> FilteredComplex:
    """Čech filtration: every simplex of dimension <= max_dim whose minimal
    enclosing ball has radius <= max_radius, valued at that radius."""
    _check_caps(max_dim, max_radius)
    pts = _points_of(X)
    return _assemble(pts, _cliques(pts, max_dim, max_radius), max_dim, max_radius, "cech")


def rips_filtration(X, max_dim: int = 2, max_radius: float = 0.5) -> FilteredComplex:
    """Vietoris-Rips filtration valued at half the simplex diameter."""
    _check_caps(max_dim, max_radius)
    pts = _points_of(X)
    return _assemble(pts, _cliques(pts, max_dim, max_radius), max_dim, max_radius, "rips")


def _delaunay_tops(coords: np.ndarray) -> np.ndarray:
    m, r = coords.shape
    if r == 1:
        order = np.argsort(coords[:, 0], kind="stable")
        return np.stack([order[:-1], order[1:]], axis=1)
    if m == r + 1:
        return np.arange(m)[None, :]
    try:
        return Delaunay(coords, qhull_options="QJ Qbb").simplices
    except QhullError:  # pragma: no cover - qhull failure on pathological input
        return Delaunay(coords, qhull_options="QJ Pp").simplices


def delaunay_cech_filtration(X, max_dim: int = 2, max_radius: float = 0.5) -> FilteredComplex:
    """Delaunay-restricted Čech filtration.

    Keeps only simplices of a Delaunay triangulation, valued by minimal
    enclosing ball radius. Its persistent homology coincides with that of the
    full Čech filtration, at a size linear in the number of points for planar
    and surface data. Duplicate points are attached to their first copy by an
    edge of value 0.
    """
    _check_caps(max_dim, max_radius)
    pts = _points_of(X)
    n = len(pts)
    if n == 0:
        return FilteredComplex.from_simplices([], [], pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 1),
                                              max_dim, max_radius, "delaunay_cech")
    uniq, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    reps = first  # original index of the representative of each unique point
    by_dim: list[list[tuple]] = [[(i,) for i in range(n)]]
    if max_dim >= 1:
        dup_edges = [tuple(sorted((int(reps[inverse[j]]), j))) for j in range(n) if reps[inverse[j]] != j]
        m = len(uniq)
        faces: dict[int, set] = {}
        if m >= 2:
            centered = uniq - uniq.mean(axis=0)
            _, sv, vt = np.linalg.svd(centered, full_matrices=False)
            rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0])))
            coords = centered @ vt[:rank].T
            tops = _delaunay_tops(coords) if rank >= 1 else np.zeros((0, 2), dtype=np.int64)
            top_dim = tops.shape[1] - 1
            for d in range(1, min(max_dim, top_dim) + 1):
                combos = np.concatenate([tops[:, list(c)] for c in itertools.combinations(range(tops.shape[1]), d + 1)])
                combos = np.unique(np.sort(reps[combos], axis=1), axis=0)
                faces[d] = set(map(tuple, combos.tolist()))
        edges = set(dup_edges) | faces.get(1, set())
        by_dim.append(sorted(edges))
        for d in range(2, max_dim + 1):
            if d in faces:
                by_dim.append(sorted(faces[d]))
    return _assemble(pts, by_dim, max_dim, max_radius, "delaunay_cech")


def build_filtration(X, max_dim: int = 2, max_radius: float = 0.5, kind: str = "cech") -> FilteredComplex:
    if kind == "cech":
        return cech_filtration(X, max_dim, max_radius)
    if kind == "rips":
        return rips_filtration(X, max_dim, max_radius)
    if kind == "delaunay_cech":
        return delaunay_cech_filtration(X, max_dim, max_radius)
    raise ValueError(f"unknown complex kind {kind!r}; expected one of {_KINDS}")


# ---------------------------------------------------------------------------
# subcomplexes and inclusions


def full_subcomplex(F: FilteredComplex, keep: np.ndarray) -> tuple[FilteredComplex, ComplexInclusion]:
    """Full subcomplex on the vertices flagged by ``keep``, re-indexed, plus its inclusion."""
    keep = np.asarray(keep, dtype=bool)
    old = np.flatnonzero(keep)
    new_of = np.full(F.n_vertices, -1, dtype=np.int64)
    new_of[old] = np.arange(len(old))
    simps, vals = [], []
    for s, v in zip(F.simplices, F.values):
        if all(keep[u] for u in s):
            simps.append(tuple(int(new_of[u]) for u in s))
            vals.append(v)
    sub = FilteredComplex(tuple(simps), np.array(vals, dtype=np.float64), F.points[old],
                          F.max_dim, F.max_radius, F.kind)
    return sub, ComplexInclusion(sub, F, old)


def subcomplex_outside_ball(F: FilteredComplex, X, r: float) -> tuple[FilteredComplex, ComplexInclusion]:
    """Full subcomplex of ``F`` on the vertices ``x`` of ``X`` with ``|x| >= r``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    pts = _points_of(X)
    if len(pts) != F.n_vertices:
        raise ValueError("F was not built from X")
    return full_subcomplex(F, np.linalg.norm(pts, axis=1) >= r)


def inclusion_of_subsample(F_sub: FilteredComplex, F_sup: FilteredComplex, check: bool = True) -> ComplexInclusion:
    """Inclusion induced by coordinate-equal vertices; duplicates are matched in order."""
    slots: dict[bytes, list[int]] = {}
    for j, p in enumerate(np.ascontiguousarray(F_sup.points)):
        slots.setdefault(p.tobytes(), []).append(j)
    used: dict[bytes, int] = {}
    vm = np.empty(F_sub.n_vertices, dtype=np.int64)
    for i, p in enumerate(np.ascontiguousarray(F_sub.points)):
        key = p.tobytes()
        k = used.get(key, 0)
        cands = slots.get(key, [])
        if k >= len(cands):
            raise ValueError(f"vertex {i} of the subsample does not occur in the target cloud")
        vm[i] = cands[k]
        used[key] = k + 1
    incl = ComplexInclusion(F_sub, F_sup, vm)
    if check:
        incl.check()
    return incl


def identity_inclusion(F: FilteredComplex) -> ComplexInclusion:
    return ComplexInclusion(F, F, np.arange(F.n_vertices))


# ---------------------------------------------------------------------------
# text export


def write_complex(path, F: FilteredComplex) -> None:
    with open(path, "w") as fh:
        for s, v in zip(F.simplices, F.values):
            fh.write(" ".join(map(str, s)) + ";" + repr(float(v)) + "\n")


def read_complex(path) -> list[tuple[tuple, float]]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            verts, val = line.split(";")
            out.append((tuple(int(v) for v in verts.split()), float(val)))
    return out
