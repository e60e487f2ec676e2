"""Regularity scores of local samples and the stratification-learning map.

A score function takes a local sample (a cloud inside the closed unit ball)
and returns a value in [0, 1]; 1 means the sample looks like a q-plane
through the origin. Thresholding the score of every magnification yields a
two-strata stratification of the cloud.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .complexes import build_filtration, subcomplex_outside_ball
from .localization import Magnifier
from .persistence import Barcode, bottleneck_distance, relative_barcodes
from .sample_spaces import (
    BundleSample,
    LocalSample,
    PointCloud,
    StratifiedSample,
    StronglyStratifiedSample,
    stratified_distance,
)

PHI_KINDS = ("subspace", "subspace_directed", "local_homology")
COMPLEX_KINDS = ("delaunay_cech", "cech", "rips")
_MAX_GRID = 10_000


@dataclass(frozen=True)
class PhiSpec:
    """Score function settings.

    ``grid_spacing`` is the spacing of the plane discretization used by the
    two-sided subspace score; ``ref_spacing`` that of the reference disk for
    the local-homology score, whose complexes are of type ``complex``.
    """

    kind: str = "subspace"
    q: int = 1
    grid_spacing: float = 0.05
    restarts: int = 3
    max_iter: int = 200
    tol: float = 1e-6
    complex: str = "delaunay_cech"
    ref_spacing: float = 0.05

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}; expected one of {PHI_KINDS}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("q must be a positive integer")
        if not 0 < self.grid_spacing <= 0.05:
            raise ValueError("grid_spacing must lie in (0, 0.05]")
        if not 0 < self.ref_spacing <= 0.05:
            raise ValueError("ref_spacing must lie in (0, 0.05]")
        if self.restarts < 1 or self.max_iter < 1 or not self.tol > 0:
            raise ValueError("optimizer settings must be positive")
        if self.complex not in COMPLEX_KINDS:
            raise ValueError(f"unknown complex kind {self.complex!r}; expected one of {COMPLEX_KINDS}")

    def __call__(self, L: LocalSample) -> float:
        if self.kind == "subspace":
            return phi_subspace(L, self.q, self)
        if self.kind == "subspace_directed":
            return phi_subspace_directed(L, self.q, self)
        return phi_local_homology(L, self, reference_barcode(self.q, self.complex, self.ref_spacing))


# ---------------------------------------------------------------------------
# subspace scores


@functools.lru_cache(maxsize=16)
def disk_grid(q: int, spacing: float) -> np.ndarray:
    """Points of ``spacing * Z^q`` in the closed unit q-disk.

    The spacing is coarsened, if needed, to keep at most 10^4 points.
    """
    h = float(spacing)
    while True:
        k = int(math.floor(1.0 / h + 1e-9))
        if (2 * k + 1) ** q <= 8 * _MAX_GRID or q == 1:
            ticks = h * np.arange(-k, k + 1)
            G = np.stack(np.meshgrid(*([ticks] * q), indexing="ij"), axis=-1).reshape(-1, q)
            G = G[np.linalg.norm(G, axis=1) <= 1.0 + 1e-12]
            if len(G) <= _MAX_GRID:
                G.setflags(write=False)
                return G
        h *= 1.05


def _frame(A: np.ndarray, Q0: np.ndarray, q: int) -> np.ndarray:
    """Orthonormal q-frame ``Q0 · exp([[0, -A^T], [A, 0]])[:, :q]``."""
    N = Q0.shape[0]
    if N == 2:
        a = float(A[0, 0])
        return Q0 @ np.array([[math.cos(a)], [math.sin(a)]])
    K = np.zeros((N, N))
    K[q:, :q] = A
    K[:q, q:] = -A.T
    return Q0 @ expm(K)[:, :q]


class _PlaneFit:
    """Objective evaluations for one local sample.

    Works in plane coordinates: with ``t = P B``, the squared distance from a
    plane point ``g`` to ``x`` is ``|g|^2 - 2 g.t + |x|^2``.
    """

    def __init__(self, P: np.ndarray, q: int, spec: PhiSpec, two_sided: bool):
        self.P = P
        self.q = q
        self.two_sided = two_sided
        self.P2 = (P ** 2).sum(axis=1)
        if two_sided:
            self.G = disk_grid(q, spec.grid_spacing)
            self.G2 = (self.G ** 2).sum(axis=1)
            # nearest-neighbour queries beat the dense distance matrix on larger fibers
            self.tree = cKDTree(P) if len(P) * len(self.G) > 4000 else None

    def __call__(self, B: np.ndarray) -> float:
        t = self.P @ B
        # points of L lie in the unit ball, so their projections land in V ∩ B1
        res2 = self.P2 - (t ** 2).sum(axis=1)
        out = float(res2.max())
        out = math.sqrt(max(out, 0.0))
        if self.two_sided:
            if self.tree is not None:
                back = float(self.tree.query(self.G @ B.T)[0].max())
            else:
                d2 = self.G2[:, None] - 2.0 * (self.G @ t.T) + self.P2[None, :]
                back = math.sqrt(max(float(d2.min(axis=1).max()), 0.0))
            out = max(out, back)
        return out


def _best_plane_distance(L: LocalSample, q: int, spec: PhiSpec, two_sided: bool) -> float:
    P = L.points
    N = L.ambient_dim
    if q > N:
        raise ValueError("q exceeds the ambient dimension")
    if len(P) == 0:
        return math.inf
    f = _PlaneFit(P, q, spec, two_sided)
    if q == N:
        return f(np.eye(N))
    # seed: principal directions of the second moment about the origin
    w, U = np.linalg.eigh(P.T @ P)
    Q0 = U[:, np.argsort(-w, kind="stable")]
    m = (N - q) * q
    pattern = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    best = f(Q0[:, :q])
    starts = [np.zeros(m)] + [s * (math.pi / 4) * pattern for s in (1.0, -0.5)]
    for a0 in starts[: spec.restarts]:
        obj = lambda a: f(_frame(a.reshape(N - q, q), Q0, q))
        simplex = np.vstack([a0] + [a0 + 0.3 * np.eye(m)[i] for i in range(m)])
        res = minimize(obj, a0, method="Nelder-Mead",
                       options={"maxiter": spec.max_iter, "xatol": spec.tol, "fatol": spec.tol,
                                "initial_simplex": simplex})
        best = min(best, float(res.fun))
    return best


def _clamp(v: float) -> float:
    return float(min(1.0, max(0.0, v)))


def phi_subspace(L: LocalSample, q: int, spec: PhiSpec | None = None) -> float:
    """1 minus the smallest truncated Hausdorff distance from L to a q-plane
    through the origin; 0 for an empty sample."""
    spec = spec or PhiSpec("subspace", q)
    return _clamp(1.0 - _best_plane_distance(L, q, spec, two_sided=True))


def phi_subspace_directed(L: LocalSample, q: int, spec: PhiSpec | None = None) -> float:
    """1 minus the smallest value of ``max_x dist(x, V)`` over q-planes V."""
    spec = spec or PhiSpec("subspace_directed", q)
    return _clamp(1.0 - _best_plane_distance(L, q, spec, two_sided=False))


# ---------------------------------------------------------------------------
# local homology score

LH_RADIUS = 0.5


@dataclass(frozen=True, eq=False)
class ReferenceBarcode:
    """Relative barcode of a grid sample of the unit q-disk against its part
    outside the open ball of radius 1/2."""

    q: int
    barcode: Barcode
    complex: str = "delaunay_cech"


def local_barcode(points: np.ndarray, q: int, kind: str = "delaunay_cech") -> Barcode:
    """Relative barcode of the pair (thickened L, thickened L outside the open
    1/2-ball) on scales [0, 1/2], in degrees 0..q."""
    F = build_filtration(points, max_dim=q + 1, max_radius=LH_RADIUS, kind=kind)
    _, A = subcomplex_outside_ball(F, points, LH_RADIUS)
    return relative_barcodes(F, A)


@functools.lru_cache(maxsize=None)
def reference_barcode(q: int, complex: str = "delaunay_cech", spacing: float = 0.05) -> ReferenceBarcode:
    G = disk_grid(q, spacing)
    return ReferenceBarcode(q, local_barcode(np.asarray(G), q, complex), complex)


def phi_local_homology(L: LocalSample, spec: PhiSpec, ref: ReferenceBarcode | None = None) -> float:
    """1 - 2 max_{i <= q} bottleneck(PH_i(L), PH_i(reference)) with modules on [0, 1/2]."""
    if ref is None:
        ref = reference_barcode(spec.q, spec.complex, spec.ref_spacing)
    if ref.q != spec.q:
        raise ValueError("reference barcode built for a different q")
    if len(L) == 0:
        return 0.0
    if spec.q > L.ambient_dim:
        raise ValueError("q exceeds the ambient dimension")
    B = local_barcode(L.points, spec.q, spec.complex)
    d = max(bottleneck_distance(B, ref.barcode, i) for i in range(spec.q + 1))
    return _clamp(1.0 - 2.0 * d)


# ---------------------------------------------------------------------------
# pipeline maps


def phi_pushforward(B: BundleSample, phi) -> StronglyStratifiedSample:
    """Score every fiber; the scores become the strong stratification of the base."""
    s = np.array([phi(F) for F in B.fibers], dtype=np.float64).reshape(-1)
    return StronglyStratifiedSample(B.base, s)


def strong_str(S: StratifiedSample) -> StronglyStratifiedSample:
    """``s(x) = min(dist(x, singular part), 1)``; ``s = 1`` when that part is empty."""
    X = S.cloud
    sing = S.singular
    if len(sing) == 0:
        return StronglyStratifiedSample(X, np.ones(len(X)))
    d, _ = cKDTree(sing.points).query(X.points) if len(X) else (np.zeros(0), None)
    s = np.minimum(np.asarray(d, dtype=np.float64), 1.0)
    s[S.singular_mask] = 0.0
    return StronglyStratifiedSample(X, s)


def _check_u(u: float) -> float:
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise ValueError("threshold u must lie in [0, 1]")
    return u


def forget_str(T: StronglyStratifiedSample, u: float) -> StratifiedSample:
    """Singular part = points with ``s <= u``."""
    u = _check_u(u)
    return StratifiedSample(T.cloud, T.s <= u)


def phi_pushforward_cloud(X: PointCloud, zeta: float, phi) -> StronglyStratifiedSample:
    """Score field of the magnification bundle, without materializing all fibers."""
    mag = Magnifier(X)
    s = np.array([phi(mag(x, zeta)) for x in X.points], dtype=np.float64).reshape(-1)
    return StronglyStratifiedSample(X, s)


def phi_stratify(X: PointCloud, zeta: float, u: float, phi) -> StratifiedSample:
    """Points whose magnification at ``zeta`` scores ``<= u`` form the singular part."""
    _check_u(u)
    return forget_str(phi_pushforward_cloud(X, zeta, phi), u)


def threshold_sweep(T: StronglyStratifiedSample, reference: StratifiedSample, us) -> np.ndarray:
    """Stratified distance from ``forget_str(T, u)`` to a reference, per threshold."""
    return np.array([stratified_distance(forget_str(T, u), reference) for u in us], dtype=np.float64)


def admissible_window(us, distances, tol: float) -> tuple[float, float] | None:
    """Smallest and largest threshold whose distance is <= tol; None if there is none."""
    us = np.asarray(us, dtype=np.float64)
    ok = np.asarray(distances) <= tol
    if not ok.any():
        return None
    return float(us[ok].min()), float(us[ok].max())


# ---------------------------------------------------------------------------
# singular clusters


def cluster_labels(points: np.ndarray, radius: float) -> np.ndarray:
    """Components of the graph joining points at distance <= radius."""
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, lab = connected_components(g, directed=False)
    return lab


def singular_clusters(S: StratifiedSample, radius: float) -> list[np.ndarray]:
    """Singular points grouped into clusters, largest first."""
    P = S.singular.points
    lab = cluster_labels(P, radius)
    groups = [P[lab == k] for k in range(int(lab.max()) + 1)] if len(lab) else []
    groups.sort(key=lambda g: (-len(g), tuple(g.mean(axis=0))))
    return groups


def count_singular_clusters(S: StratifiedSample, radius: float) -> int:
    return len(singular_clusters(S, radius))
