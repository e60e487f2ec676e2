"""Persistent stratified homotopy types of finite samples, represented as a
diagram of three filtered complexes ``p <- pq -> q`` with their barcodes."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .complexes import ComplexInclusion, FilteredComplex, build_filtration, inclusion_of_subsample
from .persistence import Barcode, H0Map, bottleneck_distance, h0_induced_map, reduce_barcodes
from .phi import strong_str
from .sample_spaces import DiagramSample, StratifiedSample, StronglyStratifiedSample

FLAGS = ("p", "pq", "q")


@dataclass(frozen=True)
class DiagramParams:
    """Level-set thresholds ``0 < v_low < v_up < 1``."""

    v_low: float
    v_up: float

    def __post_init__(self):
        if not 0.0 < self.v_low < self.v_up < 1.0:
            raise ValueError("need 0 < v_low < v_up < 1")

    def __le__(self, other: "DiagramParams") -> bool:
        # the three level sets grow when the band widens on both sides
        return other.v_low <= self.v_low and self.v_up <= other.v_up


@dataclass(frozen=True)
class Caps:
    max_dim: int = 2
    max_radius: float = 0.5
    method: str = "cech"


def diagification(T: StronglyStratifiedSample, v: DiagramParams) -> DiagramSample:
    """``(s <= v_up, v_low <= s <= v_up, s >= v_low)`` as a diagram sample."""
    s = T.s
    X = T.cloud
    return DiagramSample(X.subset(s <= v.v_up), X.subset((s >= v.v_low) & (s <= v.v_up)), X.subset(s >= v.v_low))


@dataclass(frozen=True, eq=False)
class StratifiedFiltration:
    p: FilteredComplex
    pq: FilteredComplex
    q: FilteredComplex
    pq_to_p: ComplexInclusion
    pq_to_q: ComplexInclusion

    def complexes(self) -> dict[str, FilteredComplex]:
        return {"p": self.p, "pq": self.pq, "q": self.q}


def stratified_cech(D: DiagramSample, max_dim: int = 2, max_radius: float = 0.5,
                    method: str = "cech") -> StratifiedFiltration:
    """Filtered complex per diagram entry plus the two inclusions of the band.

    ``method`` selects the complex type: the full Čech filtration, its
    Delaunay-restricted version (same barcodes, far fewer simplices), or Rips.
    """
    comps = D.components()
    F = {k: build_filtration(comps[k], max_dim, max_radius, method) for k in FLAGS}
    check = method != "delaunay_cech"
    return StratifiedFiltration(F["p"], F["pq"], F["q"],
                                inclusion_of_subsample(F["pq"], F["p"], check=check),
                                inclusion_of_subsample(F["pq"], F["q"], check=check))


@dataclass(frozen=True, eq=False)
class StratifiedBarcode:
    p: Barcode
    pq: Barcode
    q: Barcode
    h0_maps: dict = field(default_factory=dict)  # alpha -> (pq->p, pq->q)

    def __getitem__(self, flag: str) -> Barcode:
        return {"p": self.p, "pq": self.pq, "q": self.q}[flag]

    def live_counts(self, degree: int, alpha: float) -> tuple[int, int, int]:
        return tuple(self[f].betti(degree, alpha) for f in FLAGS)  # type: ignore[return-value]

    def to_json(self) -> dict:
        out = {f: self[f].to_json() for f in FLAGS}
        if self.h0_maps:
            out["h0_maps"] = [{"alpha": float(a), "pq_to_p": m[0].matrix.astype(int).tolist(),
                               "pq_to_q": m[1].matrix.astype(int).tolist()}
                              for a, m in sorted(self.h0_maps.items())]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, data, cap: float = math.inf) -> "StratifiedBarcode":
        return cls(*(Barcode.from_json(data[f], cap) for f in FLAGS))


def stratified_barcodes(SF: StratifiedFiltration, h0_scales: Sequence[float] = ()) -> StratifiedBarcode:
    maps = {float(a): (h0_induced_map(SF.pq_to_p, a), h0_induced_map(SF.pq_to_q, a)) for a in h0_scales}
    return StratifiedBarcode(reduce_barcodes(SF.p), reduce_barcodes(SF.pq), reduce_barcodes(SF.q), maps)


def epers(S: StratifiedSample, v: DiagramParams, max_dim: int = 2, max_radius: float = 0.5,
          method: str = "cech") -> StratifiedFiltration:
    """Thickening-filtered diagram of a stratified sample at parameters v."""
    return stratified_cech(diagification(strong_str(S), v), max_dim, max_radius, method)


def _is_sub(A: np.ndarray, B: np.ndarray) -> bool:
    """Multiset inclusion of point rows."""
    from collections import Counter

    ca = Counter(np.ascontiguousarray(A).view(np.void).ravel().tolist()) if len(A) else Counter()
    cb = Counter(np.ascontiguousarray(B).view(np.void).ravel().tolist()) if len(B) else Counter()
    return all(cb[k] >= c for k, c in ca.items())


def diagram_nested(D: DiagramSample, E: DiagramSample) -> bool:
    return all(_is_sub(D.components()[f].points, E.components()[f].points) for f in FLAGS)


def epers_grid(S: StratifiedSample, v_grid: Sequence[DiagramParams], max_dim: int = 2,
               max_radius: float = 0.5, method: str = "cech") -> list[StratifiedFiltration]:
    """Filtrations over a finite grid of parameters; comparable grid points are
    checked to give nested diagram samples."""
    T = strong_str(S)
    diagrams = [diagification(T, v) for v in v_grid]
    for i, v in enumerate(v_grid):
        for j, w in enumerate(v_grid):
            if i != j and v <= w and not diagram_nested(diagrams[i], diagrams[j]):
                raise AssertionError(f"diagram at {v} is not contained in the one at {w}")
    return [stratified_cech(D, max_dim, max_radius, method) for D in diagrams]


def diagram_barcode_distance(A: StratifiedBarcode, B: StratifiedBarcode, degree: int) -> float:
    """Largest per-flag bottleneck distance."""
    return max(bottleneck_distance(A[f], B[f], degree) for f in FLAGS)


def long_bars(B: Barcode, degree: int, min_length: float, max_birth: float) -> np.ndarray:
    """Bars with length >= min_length (measured up to the cap) born by max_birth."""
    a = B[degree]
    end = np.minimum(a[:, 1], B.cap) if math.isfinite(B.cap) else a[:, 1]
    return a[(end - a[:, 0] >= min_length) & (a[:, 0] <= max_birth)]


# ---------------------------------------------------------------------------
# plots

_TITLES = {"p": "singular", "pq": "link", "q": "regular"}


def plot_barcodes(SB: StratifiedBarcode, path, k: int = 14, degree: int = 0,
                  flags: Sequence[str] = FLAGS, reproducible: bool = False) -> None:
    """SVG with one panel per flag showing its k longest bars in ``degree``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if k < 1:
        raise ValueError("k must be >= 1")
    if reproducible:
        matplotlib.rcParams["svg.hashsalt"] = "stratpers"
    fig, axes = plt.subplots(1, len(flags), figsize=(3.2 * len(flags), 3.0), squeeze=False)
    for ax, f in zip(axes[0], flags):
        B = SB[f]
        rows = [r for r in B.longest(len(B)) if r[0] == degree][:k]
        cap = B.cap if math.isfinite(B.cap) else max([r[1] for r in rows] + [1.0]) * 1.1
        for y, (_, b, e) in enumerate(rows):
            ax.plot([b, min(e, cap)], [y, y], color="tab:blue", lw=2, solid_capstyle="butt")
            if math.isinf(e):
                ax.plot([cap], [y], marker=">", color="tab:blue", ms=4)
        ax.set_xlim(0, cap)
        ax.set_ylim(-1, max(len(rows), 1))
        ax.set_yticks([])
        ax.set_xlabel("radius")
        ax.set_title(f"{_TITLES[f]} H{degree}")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None} if reproducible else None)
    plt.close(fig)
