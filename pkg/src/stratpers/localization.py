"""Magnifications of point clouds around a center, and magnification bundles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .sample_spaces import BundleSample, LocalSample, PointCloud


@dataclass(frozen=True)
class MagnificationParams:
    zeta: float

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError("magnification factor must be > 0")


def _check_zeta(zeta: float) -> float:
    return MagnificationParams(float(zeta)).zeta


class Magnifier:
    """Reusable magnification of one cloud; the kd-tree is built once."""

    def __init__(self, X: PointCloud):
        self.cloud = X
        self._tree = cKDTree(X.points) if len(X) else None

    def __call__(self, x, zeta: float) -> LocalSample:
        zeta = _check_zeta(zeta)
        X = self.cloud
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if len(x) != X.ambient_dim:
            raise ValueError("center has the wrong dimension")
        if self._tree is None:
            return LocalSample(PointCloud.empty(X.ambient_dim))
        # slightly enlarged query; the closed-ball test is redone on scaled points
        idx = self._tree.query_ball_point(x, (1.0 / zeta) * (1 + 1e-9) + 1e-15)
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        Y = zeta * (X.points[idx] - x)
        Y = Y[np.linalg.norm(Y, axis=1) <= 1.0]
        return LocalSample(PointCloud(Y, X.ambient_dim))

    def bundle(self, zeta: float) -> BundleSample:
        return BundleSample(self.cloud, tuple(self(x, zeta) for x in self.cloud.points))


def magnify(X: PointCloud, x, zeta: float) -> LocalSample:
    """Points ``zeta * (y - x)`` for ``y`` in X with ``zeta * |y - x| <= 1``."""
    return Magnifier(X)(x, zeta)


def magnification_bundle(X: PointCloud, zeta: float) -> BundleSample:
    """Base X with the magnification at every base point as fiber."""
    return Magnifier(X).bundle(zeta)


def tangent_cone_estimate(X: PointCloud, x, zeta_schedule) -> list[LocalSample]:
    """Magnifications at x for a strictly increasing schedule of factors."""
    zs = [float(z) for z in zeta_schedule]
    if not zs:
        raise ValueError("empty magnification schedule")
    if any(b <= a for a, b in zip(zs, zs[1:])):
        raise ValueError("magnification schedule must be strictly increasing")
    m = Magnifier(X)
    return [m(x, z) for z in zs]
