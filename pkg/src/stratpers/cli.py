"""Command line front end: config-driven generation, stratification and persistence.

Config files are flat ``key = value`` text with dotted keys, one pipeline per
file; ``#`` starts a comment. Recognised keys (defaults in brackets):

    dataset.name      catalog id, or ``lemniscate_noisy``
    dataset.n [2000]  dataset.s [0]  dataset.tol  dataset.refine  dataset.d
    input             CSV path used instead of a generated dataset
    zeta [9]  u [0.6]  cluster.radius [0.1]
    phi.kind [subspace]  phi.q [1]  phi.complex [delaunay_cech]
    diag.v_low [0.2]  diag.v_up [0.3]
    caps.max_dim [2]  caps.max_radius [0.5]  caps.method [delaunay_cech]
    h0.scales         comma separated scales for induced H0 maps
    plot.k [14]  plot.degree [0]
    seed [0]  out [.]

Randomness: the pipeline seed ``S`` is split with ``numpy.random.SeedSequence``;
the dataset generator receives the first 64-bit word of the child with spawn key
``(0,)``. Every later stage is deterministic.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import datasets
from .persistence import bottleneck_distance
from .phi import PhiSpec, phi_pushforward_cloud, forget_str, singular_clusters, strong_str
from .sample_spaces import (
    DimensionMismatch,
    hausdorff,
    read_cloud,
    read_stratified,
    read_strong,
    stratified_distance,
    strong_distance,
    write_csv,
    write_rows,
)
from .strat_persistence import (
    FLAGS,
    DiagramParams,
    StratifiedBarcode,
    diagification,
    epers,
    plot_barcodes,
    stratified_barcodes,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

POINTS_CSV = "points.csv"
STRATIFIED_CSV = "stratified.csv"
SUMMARY_JSON = "stratify_summary.json"
BARCODES_JSON = "barcodes.json"
BARCODES_SVG = "barcodes.svg"


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# config


def parse_config(text: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        cfg[key] = value
    return cfg


def load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        return parse_config(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


class Config:
    """Typed access to the flat key/value mapping."""

    def __init__(self, raw: dict[str, str], seed: int | None = None, out: str | None = None):
        self.raw = dict(raw)
        if seed is not None:
            self.raw["seed"] = str(seed)
        if out is not None:
            self.raw["out"] = out

    def get(self, key: str, default=None, kind=str):
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"missing config key {key!r}")
            return default
        value = self.raw[key]
        try:
            if kind is bool:
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return kind(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc

    @property
    def out(self) -> Path:
        return Path(self.get("out", "."))

    @property
    def seed(self) -> int:
        s = self.get("seed", 0, int)
        if not 0 <= s < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return s

    def stage_seed(self, stage: int) -> int:
        ss = np.random.SeedSequence(self.seed, spawn_key=(stage,))
        return int(ss.generate_state(1, np.uint64)[0])

    def phi(self) -> PhiSpec:
        try:
            return PhiSpec(self.get("phi.kind", "subspace"), self.get("phi.q", 1, int),
                           complex=self.get("phi.complex", "delaunay_cech"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def diagram_params(self) -> DiagramParams:
        try:
            return DiagramParams(self.get("diag.v_low", 0.2, float), self.get("diag.v_up", 0.3, float))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def caps(self) -> tuple[int, float, str]:
        max_dim = self.get("caps.max_dim", 2, int)
        max_radius = self.get("caps.max_radius", 0.5, float)
        method = self.get("caps.method", "delaunay_cech")
        if max_dim < 0 or not max_radius > 0:
            raise ConfigError("caps.max_dim must be >= 0 and caps.max_radius > 0")
        if method not in ("cech", "rips", "delaunay_cech"):
            raise ConfigError(f"unknown caps.method {method!r}")
        return max_dim, max_radius, method

    def h0_scales(self) -> list[float]:
        text = self.get("h0.scales", "")
        try:
            return [float(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad h0.scales {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _input_csv(cfg: Config, key: str, default_name: str) -> Path:
    path = Path(cfg.raw[key]) if key in cfg.raw else cfg.out / default_name
    if not path.exists():
        raise DataError(f"input file {path} not found")
    return path


def _read(reader, path):
    try:
        return reader(path)
    except (ValueError, IndexError, DimensionMismatch) as exc:
        raise DataError(f"{path}: {exc}") from exc


def generate_cloud(cfg: Config):
    name = cfg.get("dataset.name")
    n = cfg.get("dataset.n", 2000, int)
    if n < 0:
        raise ConfigError("dataset.n must be >= 0")
    seed = cfg.stage_seed(0)
    try:
        if name == "lemniscate":
            kw = {}
            if "dataset.tol" in cfg.raw:
                kw["tol"] = cfg.get("dataset.tol", kind=float)
            if "dataset.refine" in cfg.raw:
                kw["refine"] = cfg.get("dataset.refine", kind=bool)
            return datasets.lemniscate_family(cfg.get("dataset.s", 0.0, float), n, seed=seed, **kw)
        if name == "lemniscate_noisy":
            return datasets.lemniscate_noisy(cfg.get("dataset.d", kind=float), seed=seed,
                                             n=n if "dataset.n" in cfg.raw else None)
        if name not in datasets.GENERATORS:
            known = sorted(set(datasets.GENERATORS) | {"lemniscate", "lemniscate_noisy"})
            raise ConfigError(f"unknown dataset {name!r}; expected one of {known}")
        kw = {}
        if "dataset.tol" in cfg.raw:
            kw["tol"] = cfg.get("dataset.tol", kind=float)
        return datasets.GENERATORS[name](n, seed=seed, **kw)
    except TypeError as exc:
        raise ConfigError(f"dataset {name!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_generate(cfg: Config, args) -> int:
    X = generate_cloud(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / POINTS_CSV, X)
    print(cfg.out / POINTS_CSV)
    return EXIT_OK


def cmd_stratify(cfg: Config, args) -> int:
    X = _read(read_cloud, _input_csv(cfg, "input", POINTS_CSV))
    zeta = cfg.get("zeta", 9.0, float)
    u = cfg.get("u", 0.6, float)
    radius = cfg.get("cluster.radius", 0.1, float)
    if not zeta > 0 or not 0.0 <= u <= 1.0 or not radius > 0:
        raise ConfigError("need zeta > 0, 0 <= u <= 1 and cluster.radius > 0")
    phi = cfg.phi()
    if phi.q > X.ambient_dim:
        raise ConfigError("phi.q exceeds the ambient dimension of the input")
    T = phi_pushforward_cloud(X, zeta, phi)
    S = forget_str(T, u)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_rows(cfg.out / STRATIFIED_CSV, X, strata=S.singular_mask, s=T.s)
    clusters = singular_clusters(S, radius)
    summary = {
        "n_points": len(X),
        "n_singular": int(S.singular_mask.sum()),
        "cluster_radius": radius,
        "n_clusters": len(clusters),
        "clusters": [{"size": len(c), "centroid": c.mean(axis=0).tolist()} for c in clusters],
    }
    (cfg.out / SUMMARY_JSON).write_text(json.dumps(summary, indent=1) + "\n")
    print(json.dumps({k: summary[k] for k in ("n_points", "n_singular", "n_clusters")}))
    return EXIT_OK


def cmd_diagram(cfg: Config, args) -> int:
    S = _read(read_stratified, _input_csv(cfg, "stratified", STRATIFIED_CSV))
    D = diagification(strong_str(S), cfg.diagram_params())
    cfg.out.mkdir(parents=True, exist_ok=True)
    for flag, cloud in D.components().items():
        write_csv(cfg.out / f"diagram_{flag}.csv", cloud)
    print(json.dumps({f: len(c) for f, c in D.components().items()}))
    return EXIT_OK


def cmd_persist(cfg: Config, args) -> int:
    S = _read(read_stratified, _input_csv(cfg, "stratified", STRATIFIED_CSV))
    max_dim, max_radius, method = cfg.caps()
    scales = cfg.h0_scales()
    if any(not 0 <= a <= max_radius for a in scales):
        raise ConfigError("h0.scales must lie in [0, caps.max_radius]")
    SF = epers(S, cfg.diagram_params(), max_dim, max_radius, method)
    SB = stratified_barcodes(SF, scales)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / BARCODES_JSON).write_text(SB.dumps() + "\n")
    _plot(cfg, SB, max_radius, args.reproducible)
    print(cfg.out / BARCODES_JSON)
    return EXIT_OK


def _plot(cfg: Config, SB: StratifiedBarcode, cap: float, reproducible: bool) -> None:
    k = cfg.get("plot.k", 14, int)
    if k < 1:
        raise ConfigError("plot.k must be >= 1")
    plot_barcodes(SB, cfg.out / BARCODES_SVG, k=k, degree=cfg.get("plot.degree", 0, int),
                  reproducible=reproducible)


def _read_barcodes(path, cap: float) -> StratifiedBarcode:
    try:
        return StratifiedBarcode.from_json(json.loads(Path(path).read_text()), cap)
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a stratified barcode file ({exc})") from exc


def cmd_plot(cfg: Config, args) -> int:
    _, max_radius, _ = cfg.caps()
    SB = _read_barcodes(_input_csv(cfg, "barcodes", BARCODES_JSON), max_radius)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _plot(cfg, SB, max_radius, args.reproducible)
    print(cfg.out / BARCODES_SVG)
    return EXIT_OK


METRICS = ("hausdorff", "stratified", "strong", "barcode")


def cmd_dist(cfg: Config, args) -> int:
    for p in (args.a, args.b):
        if not Path(p).exists():
            raise DataError(f"input file {p} not found")
    if args.metric == "hausdorff":
        A, B = _read(read_cloud, args.a), _read(read_cloud, args.b)
        fn = hausdorff
    elif args.metric == "stratified":
        A, B = _read(read_stratified, args.a), _read(read_stratified, args.b)
        fn = stratified_distance
    elif args.metric == "strong":
        A, B = _read(read_strong, args.a), _read(read_strong, args.b)
        fn = strong_distance
    else:
        _, max_radius, _ = cfg.caps()
        A, B = _read_barcodes(args.a, max_radius), _read_barcodes(args.b, max_radius)

        def fn(P, Q):
            return max(bottleneck_distance(P[f], Q[f], args.degree) for f in FLAGS)
    try:
        d = fn(A, B)
    except DimensionMismatch as exc:
        raise DataError(str(exc)) from exc
    print(format_distance(d))
    return EXIT_OK


def format_distance(d: float) -> str:
    return "inf" if math.isinf(d) else f"{d:.9f}"


def cmd_pipeline(cfg: Config, args) -> int:
    if "input" not in cfg.raw:
        cmd_generate(cfg, args)
    cmd_stratify(cfg, args)
    cmd_persist(cfg, args)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "stratify": cmd_stratify,
    "diagram": cmd_diagram,
    "persist": cmd_persist,
    "dist": cmd_dist,
    "pipeline": cmd_pipeline,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed; overrides the config")
    common.add_argument("--out", help="output directory; overrides the config")
    common.add_argument("--reproducible", action="store_true", help="strip timestamps from SVG output")
    parser = argparse.ArgumentParser(prog="stratpers", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "dist":
            p.add_argument("a")
            p.add_argument("b")
            p.add_argument("--metric", choices=METRICS, default="hausdorff")
            p.add_argument("--degree", type=int, default=0, help="homological degree for --metric barcode")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = Config(load_config(args.config), seed=args.seed, out=args.out)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
