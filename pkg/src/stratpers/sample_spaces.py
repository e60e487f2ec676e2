"""Finite sample spaces and the extended metrics between them.

Every distance here may return ``math.inf``; this follows the convention that
the directed distance from a nonempty set to the empty set is infinite while
the directed distance out of the empty set is zero.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree


class DimensionMismatch(ValueError):
    pass


def _as_points(points, ambient_dim: int | None = None) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        if ambient_dim is None:
            if arr.ndim == 2:
                ambient_dim = arr.shape[1]
            else:
                raise ValueError("ambient_dim is required for an empty cloud")
        arr = np.zeros((0, ambient_dim))
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected an (n, N) array, got shape {arr.shape}")
    if ambient_dim is not None and arr.shape[1] != ambient_dim:
        raise DimensionMismatch(f"points have {arr.shape[1]} coordinates, expected {ambient_dim}")
    if arr.shape[1] < 1:
        raise ValueError("ambient dimension must be positive")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite multiset of points in R^N, stored as a read-only (n, N) array."""

    points: np.ndarray
    ambient_dim: int = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pts = _as_points(self.points, self.ambient_dim)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ambient_dim", pts.shape[1])

    @classmethod
    def empty(cls, ambient_dim: int) -> "PointCloud":
        return cls(np.zeros((0, ambient_dim)), ambient_dim)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    def subset(self, mask_or_index) -> "PointCloud":
        return PointCloud(self.points[mask_or_index], self.ambient_dim)

    def translate(self, t) -> "PointCloud":
        return PointCloud(self.points + np.asarray(t, dtype=float), self.ambient_dim)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)


@dataclass(frozen=True, eq=False)
class StratifiedSample:
    """A cloud together with its singular (p-)stratum, given as a boolean mask."""

    cloud: PointCloud
    singular_mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.singular_mask, dtype=bool).reshape(-1)
        if mask.shape[0] != len(self.cloud):
            raise ValueError("singular_mask length must equal the number of points")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "singular_mask", mask)

    @property
    def ambient_dim(self) -> int:
        return self.cloud.ambient_dim

    @property
    def singular(self) -> PointCloud:
        return self.cloud.subset(self.singular_mask)

    @property
    def regular(self) -> PointCloud:
        return self.cloud.subset(~self.singular_mask)


@dataclass(frozen=True, eq=False)
class StronglyStratifiedSample:
    """A cloud with a value ``s(x)`` in [0, 1] per point (0 = singular)."""

    cloud: PointCloud
    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64).reshape(-1)
        if s.shape[0] != len(self.cloud):
            raise ValueError("s must have one value per point")
        if s.size and (np.any(~np.isfinite(s)) or s.min() < 0.0 or s.max() > 1.0):
            raise ValueError("s values must lie in [0, 1]")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def ambient_dim(self) -> int:
        return self.cloud.ambient_dim


def _row_keys(points: np.ndarray) -> list[bytes]:
    return [row.tobytes() for row in np.ascontiguousarray(points)]


@dataclass(frozen=True, eq=False)
class DiagramSample:
    """Triple ``(D_p, D_pq, D_q)`` with ``D_pq`` contained in both outer parts.

    Containment is exact coordinate equality of the stored doubles.
    """

    d_p: PointCloud
    d_pq: PointCloud
    d_q: PointCloud

    def __post_init__(self):
        dims = {self.d_p.ambient_dim, self.d_pq.ambient_dim, self.d_q.ambient_dim}
        if len(dims) != 1:
            raise DimensionMismatch("diagram components live in different dimensions")
        mid = _row_keys(self.d_pq.points)
        if mid:
            for outer, name in ((self.d_p, "d_p"), (self.d_q, "d_q")):
                keys = set(_row_keys(outer.points))
                if any(k not in keys for k in mid):
                    raise ValueError(f"d_pq is not contained in {name}")

    @property
    def ambient_dim(self) -> int:
        return self.d_p.ambient_dim

    def components(self) -> dict[str, PointCloud]:
        return {"p": self.d_p, "pq": self.d_pq, "q": self.d_q}

    def translate(self, t) -> "DiagramSample":
        return DiagramSample(self.d_p.translate(t), self.d_pq.translate(t), self.d_q.translate(t))


@dataclass(frozen=True, eq=False)
class LocalSample:
    """Local sample: a cloud truncated to the closed unit ball on construction."""

    cloud: PointCloud

    def __post_init__(self):
        pts = self.cloud.points
        keep = np.linalg.norm(pts, axis=1) <= 1.0
        if not keep.all():
            object.__setattr__(self, "cloud", self.cloud.subset(keep))

    @classmethod
    def from_points(cls, points, ambient_dim: int | None = None) -> "LocalSample":
        return cls(PointCloud(points, ambient_dim))

    @property
    def points(self) -> np.ndarray:
        return self.cloud.points

    @property
    def ambient_dim(self) -> int:
        return self.cloud.ambient_dim

    def __len__(self) -> int:
        return len(self.cloud)


@dataclass(frozen=True, eq=False)
class BundleSample:
    """Base cloud with one local sample (fiber) attached to every base point."""

    base: PointCloud
    fibers: tuple

    def __post_init__(self):
        fibers = tuple(self.fibers)
        if len(fibers) != len(self.base):
            raise ValueError("fiber count must equal base point count")
        object.__setattr__(self, "fibers", fibers)

    @property
    def ambient_dim(self) -> int:
        return self.base.ambient_dim


# ---------------------------------------------------------------------------
# distances


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"ambient dimensions differ: {a} vs {b}")


def dist_to_set(x, X: PointCloud) -> float:
    """Euclidean distance from the point ``x`` to the finite set ``X``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _check_dims(x.shape[0], X.ambient_dim)
    if len(X) == 0:
        return math.inf
    return float(np.sqrt(np.min(np.sum((X.points - x) ** 2, axis=1))))


def directed_hausdorff(A: np.ndarray, B: np.ndarray) -> float:
    """``sup_{a in A} inf_{b in B} |a - b|`` with the empty-set conventions."""
    if len(A) == 0:
        return 0.0
    if len(B) == 0:
        return math.inf
    d, _ = cKDTree(B).query(A, k=1)
    return float(np.max(d))


def hausdorff(X: PointCloud, Y: PointCloud) -> float:
    _check_dims(X.ambient_dim, Y.ambient_dim)
    return max(directed_hausdorff(X.points, Y.points), directed_hausdorff(Y.points, X.points))


def stratified_distance(S: StratifiedSample, T: StratifiedSample) -> float:
    _check_dims(S.ambient_dim, T.ambient_dim)
    return max(hausdorff(S.cloud, T.cloud), hausdorff(S.singular, T.singular))


def _directed_graph_distance(X, s, Y, t, chunk: int = 2048) -> float:
    # sup_x inf_y max(|x - y|, |s(x) - t(y)|), evaluated exactly
    if len(X) == 0:
        return 0.0
    if len(Y) == 0:
        return math.inf
    best = 0.0
    for start in range(0, len(X), chunk):
        xs = X[start:start + chunk]
        d = np.sqrt(((xs[:, None, :] - Y[None, :, :]) ** 2).sum(-1))
        d = np.maximum(d, np.abs(s[start:start + chunk, None] - t[None, :]))
        best = max(best, float(d.min(axis=1).max()))
    return best


def strong_distance(T: StronglyStratifiedSample, U: StronglyStratifiedSample) -> float:
    """Hausdorff distance of the graphs of ``s`` under the max metric on R^N x [0,1]."""
    _check_dims(T.ambient_dim, U.ambient_dim)
    X, Y = T.cloud.points, U.cloud.points
    return max(_directed_graph_distance(X, T.s, Y, U.s), _directed_graph_distance(Y, U.s, X, T.s))


def diagram_distance(D: DiagramSample, E: DiagramSample) -> float:
    _check_dims(D.ambient_dim, E.ambient_dim)
    return max(hausdorff(D.d_p, E.d_p), hausdorff(D.d_pq, E.d_pq), hausdorff(D.d_q, E.d_q))


def local_distance(L: LocalSample, M: LocalSample) -> float:
    return hausdorff(L.cloud, M.cloud)


def _directed_bundle(A: BundleSample, B: BundleSample) -> float:
    if len(A.base) == 0:
        return 0.0
    if len(B.base) == 0:
        return math.inf
    Y = B.base.points
    worst = 0.0
    for x, fx in zip(A.base.points, A.fibers):
        base_d = np.linalg.norm(Y - x, axis=1)
        order = np.argsort(base_d, kind="stable")
        best = math.inf
        for j in order:
            if base_d[j] >= best:
                break
            best = min(best, max(base_d[j], local_distance(fx, B.fibers[j])))
        worst = max(worst, best)
        if worst == math.inf:
            break
    return worst


def bundle_distance(A: BundleSample, B: BundleSample) -> float:
    """Hausdorff distance of bundles as subsets of R^N x (local samples)."""
    _check_dims(A.ambient_dim, B.ambient_dim)
    return max(_directed_bundle(A, B), _directed_bundle(B, A))


# ---------------------------------------------------------------------------
# CSV


def _coord_header(n: int) -> list[str]:
    return [f"x{i}" for i in range(n)]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path, sample) -> None:
    """Write a PointCloud, StratifiedSample or StronglyStratifiedSample."""
    if isinstance(sample, PointCloud):
        cloud, strata, s = sample, None, None
    elif isinstance(sample, StratifiedSample):
        cloud, strata, s = sample.cloud, sample.singular_mask, None
    elif isinstance(sample, StronglyStratifiedSample):
        cloud, strata, s = sample.cloud, None, sample.s
    else:
        raise TypeError(f"cannot serialize {type(sample).__name__}")
    write_rows(path, cloud, strata=strata, s=s)


def write_rows(path, cloud: PointCloud, strata=None, s=None) -> None:
    header = _coord_header(cloud.ambient_dim)
    if strata is not None:
        header.append("stratum")
    if s is not None:
        header.append("s")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, p in enumerate(cloud.points):
            row = [_fmt(v) for v in p]
            if strata is not None:
                row.append("p" if strata[i] else "q")
            if s is not None:
                row.append(_fmt(s[i]))
            w.writerow(row)


def read_table(path) -> tuple[PointCloud, np.ndarray | None, np.ndarray | None]:
    """Parse a point CSV into ``(cloud, singular_mask or None, s or None)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    coords = [h for h in header if h.startswith("x")]
    if coords != _coord_header(len(coords)) or not coords:
        raise ValueError(f"{path}: header must start with x0,...,x{{N-1}}")
    extra = header[len(coords):]
    if any(h not in ("stratum", "s") for h in extra):
        raise ValueError(f"{path}: unknown columns {extra}")
    n_dim = len(coords)
    data = rows[1:]
    pts = np.array([[float(v) for v in r[:n_dim]] for r in data], dtype=np.float64).reshape(-1, n_dim)
    mask = s = None
    if "stratum" in extra:
        k = header.index("stratum")
        vals = [r[k].strip() for r in data]
        if any(v not in ("p", "q") for v in vals):
            raise ValueError(f"{path}: stratum values must be 'p' or 'q'")
        mask = np.array([v == "p" for v in vals], dtype=bool)
    if "s" in extra:
        k = header.index("s")
        s = np.array([float(r[k]) for r in data], dtype=np.float64)
    return PointCloud(pts, n_dim), mask, s


def read_cloud(path) -> PointCloud:
    return read_table(path)[0]


def read_stratified(path) -> StratifiedSample:
    cloud, mask, s = read_table(path)
    if mask is None:
        if s is None:
            raise ValueError(f"{path}: neither 'stratum' nor 's' column present")
        mask = s <= 0.0
    return StratifiedSample(cloud, mask)


def read_strong(path) -> StronglyStratifiedSample:
    cloud, mask, s = read_table(path)
    if s is None:
        if mask is None:
            raise ValueError(f"{path}: neither 'stratum' nor 's' column present")
        from .phi import strong_str  # local import: phi depends on this module

        return strong_str(StratifiedSample(cloud, mask))
    return StronglyStratifiedSample(cloud, s)


def concat(clouds: Sequence[PointCloud] | Iterable[PointCloud], ambient_dim: int) -> PointCloud:
    arrs = [c.points for c in clouds]
    if not arrs:
        return PointCloud.empty(ambient_dim)
    return PointCloud(np.vstack(arrs), ambient_dim)
