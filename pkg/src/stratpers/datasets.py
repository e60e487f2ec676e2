"""Sample generators for curves and surfaces with known singular points.

Implicit entries are sampled by rejection from a bounding box (keep points
with ``|f| <= tol``), optionally followed by Newton projection onto
``f = 0``. Entries whose zero set is larger than the intended space inside
any box (the circle with a diameter, the pinched torus) are sampled from
their parametrizations instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sample_spaces import LocalSample, PointCloud, StratifiedSample

RESIDUAL_TOL = 1e-9
_BATCH = 1 << 16


# ---------------------------------------------------------------------------
# implicit catalog


def _lemniscate(P, s=0.0):
    x, y = P[:, 0], P[:, 1]
    return x ** 4 - x ** 2 + y ** 2 - s


def _lemniscate_grad(P, s=0.0):
    x, y = P[:, 0], P[:, 1]
    return np.stack([4 * x ** 3 - 2 * x, 2 * y], axis=1)


def _circle(P):
    return (P ** 2).sum(axis=1) - 1.0


def _circle_grad(P):
    return 2.0 * P


def _two_circles(P):
    x, y = P[:, 0], P[:, 1]
    return ((x + 0.5) ** 2 + y ** 2 - 0.25) * ((x - 0.5) ** 2 + y ** 2 - 0.25)


def _two_circles_grad(P):
    x, y = P[:, 0], P[:, 1]
    a = (x + 0.5) ** 2 + y ** 2 - 0.25
    b = (x - 0.5) ** 2 + y ** 2 - 0.25
    return np.stack([2 * (x + 0.5) * b + 2 * (x - 0.5) * a, 2 * y * (a + b)], axis=1)


def _wedge(P):
    x, y = P[:, 0], P[:, 1]
    return (x ** 2 + y ** 2) ** 2 - (x ** 2 - y ** 2)


def _wedge_grad(P):
    x, y = P[:, 0], P[:, 1]
    r2 = x ** 2 + y ** 2
    return np.stack([4 * x * r2 - 2 * x, 4 * y * r2 + 2 * y], axis=1)


def _circle_diameter(P):
    x, y = P[:, 0], P[:, 1]
    return (x ** 2 + y ** 2 - 1.0) * y


def _circle_diameter_grad(P):
    x, y = P[:, 0], P[:, 1]
    return np.stack([2 * x * y, x ** 2 + 3 * y ** 2 - 1.0], axis=1)


def _cyclide(P):
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    return (x ** 2 + y ** 2 + z ** 2 + 1.44) ** 2 - 7.84 * x ** 2 + 1.44 * y ** 2


def _cyclide_grad(P):
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    w = 4 * (x ** 2 + y ** 2 + z ** 2 + 1.44)
    return np.stack([w * x - 15.68 * x, w * y + 2.88 * y, w * z], axis=1)


PINCH_R = 0.5


def _pinched_torus(P, r=PINCH_R):
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    rho = np.hypot(x, y)
    return (rho - 1.0) ** 2 + z ** 2 - r ** 2 * (1.0 - x / rho) / 2.0


def _pinched_torus_grad(P, r=PINCH_R):
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    rho = np.hypot(x, y)
    # d(x/rho)/dx = y^2/rho^3, d(x/rho)/dy = -x y/rho^3
    gx = 2 * (rho - 1.0) * x / rho + r ** 2 / 2.0 * y ** 2 / rho ** 3
    gy = 2 * (rho - 1.0) * y / rho - r ** 2 / 2.0 * x * y / rho ** 3
    return np.stack([gx, gy, 2 * z], axis=1)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    ambient_dim: int
    f: Callable
    grad: Callable
    box: tuple
    singular_points: tuple = ()


CATALOG: dict[str, CatalogEntry] = {
    "circle": CatalogEntry("circle", 2, _circle, _circle_grad, ((-1.1, 1.1), (-1.1, 1.1))),
    "lemniscate": CatalogEntry("lemniscate", 2, _lemniscate, _lemniscate_grad,
                               ((-1.2, 1.2), (-0.75, 0.75)), ((0.0, 0.0),)),
    "two_circles": CatalogEntry("two_circles", 2, _two_circles, _two_circles_grad,
                                ((-1.1, 1.1), (-0.6, 0.6)), ((0.0, 0.0),)),
    "wedge_circles": CatalogEntry("wedge_circles", 2, _wedge, _wedge_grad,
                                  ((-1.1, 1.1), (-0.45, 0.45)), ((0.0, 0.0),)),
    "circle_with_diameter": CatalogEntry("circle_with_diameter", 2, _circle_diameter, _circle_diameter_grad,
                                         ((-1.1, 1.1), (-1.1, 1.1)), ((-1.0, 0.0), (1.0, 0.0))),
    "cyclide": CatalogEntry("cyclide", 3, _cyclide, _cyclide_grad,
                            ((-2.2, 2.2), (-0.7, 0.7), (-0.75, 0.75))),
    "pinched_torus": CatalogEntry("pinched_torus", 3, _pinched_torus, _pinched_torus_grad,
                                  ((-1.6, 1.6), (-1.6, 1.6), (-0.6, 0.6)), ((1.0, 0.0, 0.0),)),
}


@dataclass(frozen=True)
class VarietySpec:
    """Rejection-sampling recipe for a catalog entry.

    ``params`` are keyword parameters of the implicit function (the level
    ``s`` for the lemniscate family). ``noise`` is the standard deviation of
    isotropic Gaussian noise, clipped at 3 sigma, added after projection.
    """

    name: str
    tol: float = 1e-3
    seed: int = 0
    params: dict = field(default_factory=dict)
    box: tuple | None = None
    refine: bool = True
    noise: float = 0.0

    def __post_init__(self):
        if self.name not in CATALOG:
            raise ValueError(f"unknown catalog entry {self.name!r}; known: {sorted(CATALOG)}")
        if not self.tol > 0:
            raise ValueError("tolerance must be > 0")
        box = self.box if self.box is not None else CATALOG[self.name].box
        if len(box) != CATALOG[self.name].ambient_dim or any(not lo < hi for lo, hi in box):
            raise ValueError("bounding box is empty or has the wrong dimension")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")

    @property
    def entry(self) -> CatalogEntry:
        return CATALOG[self.name]

    @property
    def bounds(self) -> np.ndarray:
        return np.asarray(self.box if self.box is not None else self.entry.box, dtype=np.float64)

    def f(self, P):
        return self.entry.f(P, **self.params)

    def grad(self, P):
        return self.entry.grad(P, **self.params)


def project(P: np.ndarray, f, grad, max_iter: int = 100, max_step: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton steps ``x - f grad / |grad|^2`` until ``|f| <= 1e-9``.

    Returns the moved points and a mask of those that converged.
    """
    P = P.copy()
    active = np.ones(len(P), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        Q = P[idx]
        val = f(Q)
        done = np.abs(val) <= RESIDUAL_TOL
        active[idx[done]] = False
        idx, Q, val = idx[~done], Q[~done], val[~done]
        g = grad(Q)
        g2 = (g ** 2).sum(axis=1)
        ok = g2 > 1e-300
        step = np.zeros_like(Q)
        step[ok] = -(val[ok] / g2[ok])[:, None] * g[ok]
        norm = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, max_step / np.maximum(norm, 1e-300))
        P[idx] = Q + scale[:, None] * step
        active[idx[~ok]] = False
    converged = np.abs(f(P)) <= RESIDUAL_TOL
    return P, converged


def _clipped_noise(rng, shape, sigma):
    z = rng.normal(size=shape)
    return sigma * np.clip(z, -3.0, 3.0)


def sample_variety(spec: VarietySpec, n: int) -> PointCloud:
    """n points of the catalog variety, deterministic given the spec's seed."""
    if n < 0:
        raise ValueError("n must be >= 0")
    N = spec.entry.ambient_dim
    if n == 0:
        return PointCloud.empty(N)
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.bounds[:, 0], spec.bounds[:, 1]
    out, have, drawn = [], 0, 0
    while have < n:
        U = lo + (hi - lo) * rng.random((_BATCH, N))
        drawn += _BATCH
        keep = U[np.abs(spec.f(U)) <= spec.tol]
        if spec.refine and len(keep):
            keep, ok = project(keep, spec.f, spec.grad)
            keep = keep[ok]
        out.append(keep)
        have += len(keep)
        if drawn >= 1 << 20 and have / drawn < 1e-6:
            raise ValueError(f"acceptance rate {have / drawn:.2e} is below 1e-6; use a larger tolerance")
    P = np.concatenate(out)[:n]
    if spec.noise > 0:
        P = P + _clipped_noise(rng, P.shape, spec.noise)
    return PointCloud(P, N)


# ---------------------------------------------------------------------------
# named generators


def lemniscate_family(s: float, n: int, seed: int = 0, tol: float = 0.1, refine: bool = True) -> PointCloud:
    """Sample of ``x1^4 - x1^2 + x2^2 = s``; empty for s < -1/4."""
    if s < -0.25:
        raise ValueError("the level set is empty for s < -1/4")
    xmax = math.sqrt((1.0 + math.sqrt(1.0 + 4.0 * s)) / 2.0)
    ymax = math.sqrt(max(s + 0.25, 0.0))
    box = ((-xmax - 0.05, xmax + 0.05), (-ymax - 0.05, ymax + 0.05))
    return sample_variety(VarietySpec("lemniscate", tol, seed, {"s": float(s)}, box, refine), n)


# (n, rejection tolerance) without projection; the band half-width near the
# curve is about tol / |grad f|, so these presets set the Hausdorff distance
# to the lemniscate at roughly the quoted value
LEMNISCATE_NOISY_PRESETS = {
    0.07: (1000, 0.01),
    0.035: (2000, 0.0025),
    0.023: (3000, 0.0012),
}


def lemniscate_noisy(d: float, seed: int = 0, n: int | None = None) -> PointCloud:
    """Unprojected rejection sample of the lemniscate at a preset Hausdorff distance d."""
    if d not in LEMNISCATE_NOISY_PRESETS:
        raise ValueError(f"no preset for d={d}; available: {sorted(LEMNISCATE_NOISY_PRESETS)}")
    n0, tol = LEMNISCATE_NOISY_PRESETS[d]
    spec = VarietySpec("lemniscate", tol, seed, {"s": 0.0}, None, refine=False)
    return sample_variety(spec, n0 if n is None else n)


def two_circles(n: int, seed: int = 0, tol: float = 1e-3) -> PointCloud:
    return sample_variety(VarietySpec("two_circles", tol, seed), n)


def wedge_circles(n: int, seed: int = 0, tol: float = 1e-3) -> PointCloud:
    return sample_variety(VarietySpec("wedge_circles", tol, seed), n)


def cyclide(n: int, seed: int = 0, tol: float = 0.3, refine: bool = False) -> PointCloud:
    """Cyclide sample; by default unprojected, i.e. a band ``|f| <= tol``."""
    return sample_variety(VarietySpec("cyclide", tol, seed, refine=refine), n)


def circle_with_diameter(n: int, seed: int = 0) -> PointCloud:
    """Unit circle plus its horizontal diameter, uniform in arclength."""
    rng = np.random.default_rng(seed)
    on_circle = rng.random(n) < 2 * math.pi / (2 * math.pi + 2.0)
    t = rng.random(n)
    P = np.empty((n, 2))
    ang = 2 * math.pi * t[on_circle]
    P[on_circle] = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    P[~on_circle] = np.stack([2 * t[~on_circle] - 1.0, np.zeros((~on_circle).sum())], axis=1)
    return PointCloud(P, 2)


def pinched_torus(n: int, seed: int = 0, r: float = PINCH_R) -> PointCloud:
    """Torus whose tube radius ``r |sin(u/2)|`` shrinks to a point at (1, 0, 0).

    Uniform in area by rejection on the area element.
    """
    rng = np.random.default_rng(seed)
    out, have = [], 0
    while have < n:
        u = 2 * math.pi * rng.random(_BATCH)
        v = 2 * math.pi * rng.random(_BATCH)
        rho = r * np.abs(np.sin(u / 2))
        drho = (r / 2) * np.cos(u / 2) * np.sign(np.sin(u / 2))
        R = 1 + rho * np.cos(v)
        pu = np.stack([drho * np.cos(v) * np.cos(u) - R * np.sin(u),
                       drho * np.cos(v) * np.sin(u) + R * np.cos(u), drho * np.sin(v)], axis=1)
        pv = np.stack([-rho * np.sin(v) * np.cos(u), -rho * np.sin(v) * np.sin(u), rho * np.cos(v)], axis=1)
        area = np.linalg.norm(np.cross(pu, pv), axis=1)
        bound = r * math.hypot(r / 2, 1 + r)
        keep = rng.random(_BATCH) * bound <= area
        u, v, rho = u[keep], v[keep], rho[keep]
        R = 1 + rho * np.cos(v)
        out.append(np.stack([R * np.cos(u), R * np.sin(u), rho * np.sin(v)], axis=1))
        have += int(keep.sum())
    return PointCloud(np.concatenate(out)[:n], 3)


GENERATORS: dict[str, Callable] = {
    "two_circles": two_circles,
    "wedge_circles": wedge_circles,
    "circle_with_diameter": circle_with_diameter,
    "pinched_torus": pinched_torus,
    "cyclide": cyclide,
}


# ---------------------------------------------------------------------------
# dense references and ground truth


def reference_curve(name: str, m: int = 100_000) -> np.ndarray:
    """Dense deterministic discretization of a catalog curve."""
    t = np.linspace(0.0, 2 * math.pi, m, endpoint=False)
    if name == "lemniscate":
        return np.stack([np.sin(t), np.sin(t) * np.cos(t)], axis=1)
    if name == "circle":
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if name == "two_circles":
        h = m // 2
        a = np.linspace(0, 2 * math.pi, h, endpoint=False)
        c = 0.5 * np.stack([np.cos(a), np.sin(a)], axis=1)
        return np.concatenate([c + [0.5, 0.0], c - [0.5, 0.0]])
    if name == "wedge_circles":
        d = 1 + np.sin(t) ** 2
        return np.stack([np.cos(t) / d, np.sin(t) * np.cos(t) / d], axis=1)
    if name == "circle_with_diameter":
        k = int(m * math.pi / (math.pi + 1))
        a = np.linspace(0, 2 * math.pi, k, endpoint=False)
        return np.concatenate([np.stack([np.cos(a), np.sin(a)], axis=1),
                               np.stack([np.linspace(-1, 1, m - k), np.zeros(m - k)], axis=1)])
    raise ValueError(f"no dense reference for {name!r}")


def ground_truth(name: str, m: int = 100_000) -> StratifiedSample:
    """Dense reference of the space with its singular points marked."""
    P = reference_curve(name, m)
    sing = np.array(CATALOG[name].singular_points, dtype=np.float64).reshape(-1, 2)
    pts = np.concatenate([P, sing])
    mask = np.zeros(len(pts), dtype=bool)
    mask[len(P):] = True
    return StratifiedSample(PointCloud(pts, 2), mask)


def truth_from_points(X: PointCloud, singular_points) -> StratifiedSample:
    """Sample X with the given singular points appended and marked."""
    S = np.asarray(singular_points, dtype=np.float64).reshape(-1, X.ambient_dim)
    pts = np.concatenate([X.points, S])
    mask = np.zeros(len(pts), dtype=bool)
    mask[len(X):] = True
    return StratifiedSample(PointCloud(pts, X.ambient_dim), mask)


def jacobian_stratification(X: PointCloud, s: float) -> StratifiedSample:
    """Singular where ``|grad f_s| <= 3 sqrt(s)`` for the lemniscate family."""
    if not s > 0:
        raise ValueError("s must be > 0; for s = 0 use the exact stratification at the origin")
    g = np.linalg.norm(_lemniscate_grad(X.points, s), axis=1) if len(X) else np.zeros(0)
    return StratifiedSample(X, g <= 3.0 * math.sqrt(s))


# ---------------------------------------------------------------------------
# tangent cones

CONE_SPACING = 0.01


def _line_grid(direction, spacing=CONE_SPACING, rays=(-1, 1)) -> np.ndarray:
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    k = int(round(1.0 / spacing))
    ts = spacing * np.arange(0, k + 1)
    P = np.concatenate([np.outer(sign * ts, d) for sign in rays]) + 0.0
    # keep the endpoints: round-off can push |t d| just past 1
    P /= np.maximum(np.linalg.norm(P, axis=1), 1.0)[:, None]
    return np.unique(P, axis=0)


def _plane_grid(normal, spacing=CONE_SPACING) -> np.ndarray:
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    _, _, vt = np.linalg.svd(n[None, :])
    B = vt[1:3]
    k = int(round(1.0 / spacing))
    ticks = spacing * np.arange(-k, k + 1)
    G = np.stack(np.meshgrid(ticks, ticks, indexing="ij"), axis=-1).reshape(-1, 2)
    G = G[np.linalg.norm(G, axis=1) <= 1.0]
    return G @ B


def analytic_tangent_cone(space_id: str, x) -> LocalSample:
    """Grid sample (spacing 0.01) of the tangent cone at x, cut to the unit ball."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    origin2 = (0.0, 0.0)
    singular = {
        ("lemniscate", origin2): lambda: np.concatenate([_line_grid([1, 1]), _line_grid([1, -1])]),
        ("wedge_circles", origin2): lambda: np.concatenate([_line_grid([1, 1]), _line_grid([1, -1])]),
        ("two_circles", origin2): lambda: _line_grid([0, 1]),
        ("circle_with_diameter", (1.0, 0.0)): lambda: np.concatenate([_line_grid([0, 1]), _line_grid([-1, 0], rays=(1,))]),
        ("circle_with_diameter", (-1.0, 0.0)): lambda: np.concatenate([_line_grid([0, 1]), _line_grid([1, 0], rays=(1,))]),
        ("pinched_torus", (1.0, 0.0, 0.0)): None,
    }
    key = (space_id, tuple(float(v) + 0.0 for v in np.round(x, 12)))
    if key in singular:
        make = singular[key]
        if make is None:
            raise ValueError(f"no analytic tangent cone available for {space_id} at {x}")
        return LocalSample.from_points(np.unique(make(), axis=0), len(x))
    if space_id not in CATALOG or len(x) != CATALOG[space_id].ambient_dim:
        raise ValueError(f"unknown space/point pair {space_id!r}, {x}")
    entry = CATALOG[space_id]
    P = x[None, :]
    if abs(float(entry.f(P)[0])) > 1e-6:
        raise ValueError(f"{x} does not lie on {space_id}")
    g = entry.grad(P)[0]
    if np.linalg.norm(g) < 1e-9:
        raise ValueError(f"no analytic tangent cone available for {space_id} at {x}")
    if entry.ambient_dim == 2:
        pts = _line_grid([-g[1], g[0]])
    else:
        pts = _plane_grid(g)
    return LocalSample.from_points(pts, entry.ambient_dim)
