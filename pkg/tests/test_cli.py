import json

import numpy as np
import pytest

from stratpers.cli import EXIT_CONFIG, EXIT_DATA, Config, main, parse_config
from stratpers.datasets import lemniscate_family
from stratpers.sample_spaces import (
    PointCloud,
    StratifiedSample,
    hausdorff,
    read_cloud,
    read_stratified,
    stratified_distance,
    write_csv,
)


def write_config(path, **items):
    path.write_text("".join(f"{k.replace('__', '.')} = {v}\n" for k, v in items.items()))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_parse_config():
    cfg = parse_config("# comment\ndataset.name = lemniscate  # trailing\n\nzeta=9\n")
    assert cfg == {"dataset.name": "lemniscate", "zeta": "9"}
    with pytest.raises(Exception):
        parse_config("no equals sign")


def test_seed_scheme_is_documented_split():
    c = Config({"seed": "7"})
    expected = int(np.random.SeedSequence(7, spawn_key=(0,)).generate_state(1, np.uint64)[0])
    assert c.stage_seed(0) == expected
    assert c.stage_seed(1) != expected


def test_generate_rows_and_determinism(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.txt", dataset__name="lemniscate", dataset__n=2000)
    code, _ = run(capsys, "generate", "--config", cfg, "--seed", "3", "--out", str(tmp_path / "a"))
    assert code == 0
    X = read_cloud(tmp_path / "a" / "points.csv")
    assert len(X) == 2000
    run(capsys, "generate", "--config", cfg, "--seed", "3", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "points.csv").read_bytes() == (tmp_path / "b" / "points.csv").read_bytes()
    run(capsys, "generate", "--config", cfg, "--seed", "4", "--out", str(tmp_path / "c"))
    assert (tmp_path / "a" / "points.csv").read_bytes() != (tmp_path / "c" / "points.csv").read_bytes()


def test_config_errors(tmp_path, capsys):
    bad = write_config(tmp_path / "c.txt", dataset__name="klein_bottle")
    code, out = run(capsys, "generate", "--config", bad, "--out", str(tmp_path))
    assert code == EXIT_CONFIG and "unknown dataset" in out.err
    assert run(capsys, "frobnicate")[0] == EXIT_CONFIG
    assert run(capsys, "generate", "--config", str(tmp_path / "missing.txt"))[0] == EXIT_CONFIG
    neg = write_config(tmp_path / "n.txt", dataset__name="two_circles", dataset__n=-5)
    assert run(capsys, "generate", "--config", neg, "--out", str(tmp_path))[0] == EXIT_CONFIG
    assert run(capsys, "generate", "--config", neg, "--seed", "-1")[0] == EXIT_CONFIG


def test_stratify_missing_input(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.txt", input=tmp_path / "nope.csv")
    code, out = run(capsys, "stratify", "--config", cfg, "--out", str(tmp_path))
    assert code == EXIT_DATA and "not found" in out.err


def _small_lemniscate(tmp_path, n=300):
    write_csv(tmp_path / "points.csv", lemniscate_family(0.0, n, seed=0))
    return tmp_path / "points.csv"


def test_stratify_threshold_one_marks_everything(tmp_path, capsys):
    pts = _small_lemniscate(tmp_path)
    cfg = write_config(tmp_path / "c.txt", input=pts, zeta=3, u=1, cluster__radius=0.5)
    code, _ = run(capsys, "stratify", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 0
    S = read_stratified(tmp_path / "o" / "stratified.csv")
    assert S.singular_mask.all()
    summary = json.loads((tmp_path / "o" / "stratify_summary.json").read_text())
    assert summary["n_singular"] == 300 and summary["n_clusters"] == 1
    header = (tmp_path / "o" / "stratified.csv").read_text().splitlines()[0]
    assert header == "x0,x1,stratum,s"


def test_empty_cloud_gives_empty_outputs(tmp_path, capsys):
    write_csv(tmp_path / "e.csv", PointCloud.empty(2))
    cfg = write_config(tmp_path / "c.txt", input=tmp_path / "e.csv")
    out = tmp_path / "o"
    assert run(capsys, "stratify", "--config", cfg, "--out", str(out))[0] == 0
    assert len(read_stratified(out / "stratified.csv").cloud) == 0
    assert run(capsys, "persist", "--config", cfg, "--out", str(out), "--reproducible")[0] == 0
    data = json.loads((out / "barcodes.json").read_text())
    assert all(d["bars"] == [] for f in ("p", "pq", "q") for d in data[f])


def test_persist_needs_stratum_column(tmp_path, capsys):
    pts = _small_lemniscate(tmp_path)
    cfg = write_config(tmp_path / "c.txt", stratified=pts)
    assert run(capsys, "persist", "--config", cfg, "--out", str(tmp_path))[0] == EXIT_DATA
    assert run(capsys, "persist", "--config", write_config(tmp_path / "d.txt"),
               "--out", str(tmp_path / "empty"))[0] == EXIT_DATA


def test_pipeline_is_deterministic(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.txt", dataset__name="lemniscate", dataset__n=400, zeta=6,
                       h0__scales="0.02,0.1", plot__k=1)
    for d in ("a", "b"):
        assert run(capsys, "pipeline", "--config", cfg, "--seed", "11", "--out", str(tmp_path / d),
                   "--reproducible")[0] == 0
    for name in ("points.csv", "stratified.csv", "stratify_summary.json", "barcodes.json", "barcodes.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    data = json.loads((tmp_path / "a" / "barcodes.json").read_text())
    assert [m["alpha"] for m in data["h0_maps"]] == [0.02, 0.1]
    # diagram and plot subcommands run on the pipeline outputs
    assert run(capsys, "diagram", "--config", cfg, "--out", str(tmp_path / "a"))[0] == 0
    assert (tmp_path / "a" / "diagram_pq.csv").exists()
    (tmp_path / "a" / "barcodes.svg").unlink()
    assert run(capsys, "plot", "--config", cfg, "--out", str(tmp_path / "a"), "--reproducible")[0] == 0
    assert (tmp_path / "a" / "barcodes.svg").read_bytes() == (tmp_path / "b" / "barcodes.svg").read_bytes()


def test_dist(tmp_path, capsys):
    a = _small_lemniscate(tmp_path)
    code, out = run(capsys, "dist", str(a), str(a))
    assert code == 0 and out.out.strip() == "0.000000000"
    B = lemniscate_family(0.0, 200, seed=1)
    write_csv(tmp_path / "b.csv", B)
    _, out = run(capsys, "dist", str(a), str(tmp_path / "b.csv"))
    assert out.out.strip() == f"{hausdorff(read_cloud(a), B):.9f}"
    # a stratified pair where one singular part is empty
    X = read_cloud(a)
    S = StratifiedSample(X, np.arange(len(X)) == 0)
    T = StratifiedSample(X, np.zeros(len(X), dtype=bool))
    write_csv(tmp_path / "s.csv", S)
    write_csv(tmp_path / "t.csv", T)
    assert stratified_distance(S, T) == float("inf")
    _, out = run(capsys, "dist", str(tmp_path / "s.csv"), str(tmp_path / "t.csv"), "--metric", "stratified")
    assert out.out.strip() == "inf"
    # type mismatch: a plain cloud where a stratified one is expected
    assert run(capsys, "dist", str(a), str(tmp_path / "s.csv"), "--metric", "stratified")[0] == EXIT_DATA
    assert run(capsys, "dist", str(a), str(tmp_path / "missing.csv"))[0] == EXIT_DATA
