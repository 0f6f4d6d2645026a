import csv

import numpy as np
import pytest

from gridscore.checkpoint import read_checkpoint
from gridscore.cli import main
from gridscore.reports import (
    COMPARISON_COLUMNS,
    eval_report_to_csv,
    read_disagreement_report,
    read_eval_report,
    read_partition,
    read_predictions,
    read_table,
)
from gridscore.synthdata import load_dataset, read_manifest
from gridscore.training import evaluate


@pytest.fixture(autouse=True)
def no_env_seed(monkeypatch):
    monkeypatch.delenv("GRIDSCORE_SEED", raising=False)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen", "--out", str(out), "--n", "90", "--strata", "3", "--seed", "7"]) == 0
    assert main(["split", "--manifest", str(out / "manifest.csv"), "--out", str(out / "split.csv")]) == 0
    return out


@pytest.fixture(scope="module")
def trained(data_dir):
    ckpt = data_dir / "ffn.ckpt"
    args = ["train", "--manifest", str(data_dir / "manifest.csv"), "--split", str(data_dir / "split.csv"),
            "--model", "ffn2", "--optimizer", "nadam", "--epochs", "2", "--out", str(ckpt),
            "--history", str(data_dir / "history.csv")]
    assert main(args) == 0
    return ckpt


def tree_bytes(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_gen_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["--seed", "3", "gen", "--out", str(tmp_path / name), "--n", "25"]) == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    assert main(["gen", "--out", str(tmp_path / "c"), "--n", "25", "--seed", "4"]) == 0
    assert tree_bytes(tmp_path / "a") != tree_bytes(tmp_path / "c")


def test_gen_options(tmp_path):
    assert main(["gen", "--out", str(tmp_path), "--n", "40", "--theta-mode", "--mislabel-rate", "0"]) == 0
    records = read_manifest(tmp_path / "manifest.csv")
    assert len(records) == 40 and not any(r.mislabeled for r in records)


def test_split_file(data_dir):
    parts = read_partition(data_dir / "split.csv")
    assert set(parts) == {"train", "validation"}
    assert len(parts["train"]) + len(parts["validation"]) == 90


def test_train_writes_checkpoint_and_history(data_dir, trained):
    assert read_checkpoint(trained).spec.name == "ffn2"
    with open(data_dir / "history.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["epoch"] for r in rows] == ["1", "2"]


def test_eval_matches_in_process_evaluation(data_dir, trained, tmp_path):
    out, preds = tmp_path / "r.csv", tmp_path / "p.csv"
    args = ["eval", "--manifest", str(data_dir / "manifest.csv"), "--split", str(data_dir / "split.csv"),
            "--checkpoint", str(trained), "--out", str(out), "--predictions", str(preds), "--meta", "run=x"]
    assert main(args) == 0
    records = read_manifest(data_dir / "manifest.csv")
    val = set(read_partition(data_dir / "split.csv")["validation"])
    data = load_dataset([r for r in records if r.id in val], data_dir)
    model = read_checkpoint(trained)
    expect = evaluate(model, data, {"model": "ffn2", "description": model.spec.describe(),
                                    "sample": "validation", "run": "x"})
    assert out.read_text() == eval_report_to_csv(expect)
    probs = read_predictions(preds)
    assert all(np.array_equal(probs[i], p) for i, p in zip(data.ids, model.predict_proba(data.images)))


def test_eval_is_repeatable(data_dir, trained, tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["eval", "--manifest", str(data_dir / "manifest.csv"), "--checkpoint", str(trained),
                     "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_train_is_deterministic(data_dir, trained, tmp_path):
    again = tmp_path / "again.ckpt"
    assert main(["train", "--manifest", str(data_dir / "manifest.csv"), "--split", str(data_dir / "split.csv"),
                 "--model", "ffn2", "--optimizer", "nadam", "--epochs", "2", "--out", str(again)]) == 0
    assert again.read_bytes() == trained.read_bytes()


def test_disagree_and_report(data_dir, trained, tmp_path):
    preds, rep = tmp_path / "p.csv", tmp_path / "r.csv"
    manifest = str(data_dir / "manifest.csv")
    assert main(["eval", "--manifest", manifest, "--checkpoint", str(trained), "--out", str(rep),
                 "--predictions", str(preds)]) == 0
    assert main(["disagree", "--manifest", manifest, "--predictions", str(preds),
                 "--out", str(tmp_path / "d.csv")]) == 0
    rows, summary = read_disagreement_report(tmp_path / "d.csv")
    assert summary["disagreements"] == len(rows) == len(read_eval_report(rep).misclassified)
    assert main(["report", str(rep), str(rep), "--out", str(tmp_path / "t.csv")]) == 0
    assert len(read_table(tmp_path / "t.csv")) == 2


def test_irt_commands(tmp_path):
    data = tmp_path / "d"
    assert main(["gen", "--out", str(data), "--n", "300", "--theta-mode"]) == 0
    assert main(["irt-score", "--manifest", str(data / "manifest.csv"), "--out", str(tmp_path / "s.csv")]) == 0
    scored = read_manifest(tmp_path / "s.csv")
    assert all(set(r.extra) == {"y_map", "y_eap", "y_avg"} for r in scored)
    assert not any(r.extra["y_map"] == "1" for r in scored)
    out = tmp_path / "sel"
    assert main(["irt-select", "--manifest", str(data / "manifest.csv"), "--mode", "map",
                 "--out-dir", str(out)]) == 0
    parts = read_partition(out / "partition.csv")
    assert {"T_match", "V_match", "T_rand", "V_rand"} <= set(parts)
    labelled = read_manifest(out / "manifest.csv")
    assert all("partition_label" in r.extra and "random_label" in r.extra for r in labelled)
    summary = read_table(out / "posterior_summary.csv")
    assert summary[-1]["sample"] == "Overall"


def test_exit_codes(data_dir, tmp_path, capsys):
    manifest = str(data_dir / "manifest.csv")
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["train", "--manifest", manifest]) == 1
    assert main(["train", "--manifest", manifest, "--model", "cnn9x2-zero", "--out", str(tmp_path / "m")]) == 1
    assert main(["eval", "--manifest", manifest, "--checkpoint", str(tmp_path / "none.ckpt"),
                 "--out", str(tmp_path / "r.csv")]) == 2
    (tmp_path / "junk.ckpt").write_bytes(b"not a checkpoint")
    assert main(["eval", "--manifest", manifest, "--checkpoint", str(tmp_path / "junk.ckpt"),
                 "--out", str(tmp_path / "r.csv")]) == 2
    assert main(["split", "--manifest", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "s")]) == 2
    (tmp_path / "bad.ini").write_text("[generator]\nn = lots\n")
    assert main(["--config", str(tmp_path / "bad.ini"), "gen", "--out", str(tmp_path / "g")]) == 1
    assert "line 2" in capsys.readouterr().err


def grid_config(tmp_path):
    path = tmp_path / "grid.ini"
    path.write_text(f"""
[generator]
n = 80
strata = 2

[grid]
models = ffn2, cnn1x2-zero
optimizers = adam, adamax
epochs = 1

[output]
dir = {tmp_path / "runs"}
""")
    return str(path)


def test_grid_rows_and_resume(tmp_path, capsys):
    config = grid_config(tmp_path)
    assert main(["--config", config, "grid", "--dry-run"]) == 0
    assert capsys.readouterr().out.split("\n")[:4] == [
        "ffn2 adam 1", "cnn1x2-zero adam 1", "ffn2 adamax 1", "cnn1x2-zero adamax 1"]
    assert main(["--config", config, "grid"]) == 0
    table = tmp_path / "runs" / "grid_report.csv"
    rows = read_table(table)
    assert list(rows[0]) == list(COMPARISON_COLUMNS)
    assert [(r["model"], r["optimizer"], r["epochs"]) for r in rows] == [
        ("ffn2", "adam", "1"), ("cnn1x2-zero", "adam", "1"),
        ("ffn2", "adamax", "1"), ("cnn1x2-zero", "adamax", "1")]
    assert all(r["sample"] == "validation" for r in rows)
    first = table.read_bytes()
    cells = tree_bytes(tmp_path / "runs" / "cells")
    assert main(["--config", config, "grid"]) == 0
    assert table.read_bytes() == first
    assert tree_bytes(tmp_path / "runs" / "cells") == cells


def test_grid_reevaluates_when_report_missing(tmp_path):
    config = grid_config(tmp_path)
    assert main(["--config", config, "grid"]) == 0
    report = next((tmp_path / "runs" / "cells").glob("ffn2__adam*")) / "report.csv"
    before = report.read_bytes()
    report.unlink()
    assert main(["--config", config, "grid"]) == 0
    assert report.read_bytes() == before


def test_grid_parallel_matches_serial(tmp_path):
    serial, parallel = tmp_path / "s", tmp_path / "p"
    serial.mkdir()
    parallel.mkdir()
    assert main(["--config", grid_config(serial), "grid"]) == 0
    assert main(["--config", grid_config(parallel), "grid", "--jobs", "2"]) == 0
    assert (serial / "runs" / "grid_report.csv").read_bytes() == (parallel / "runs" / "grid_report.csv").read_bytes()


def test_outputs_create_missing_directories(data_dir, trained, tmp_path):
    out = tmp_path / "a" / "b"
    split = ["--manifest", str(data_dir / "manifest.csv"), "--split", str(data_dir / "split.csv")]
    assert main(["split", "--manifest", str(data_dir / "manifest.csv"), "--out", str(out / "s" / "split.csv")]) == 0
    assert main(["eval", *split, "--checkpoint", str(trained), "--out", str(out / "e" / "r.csv"),
                 "--predictions", str(out / "p" / "p.csv")]) == 0
    assert main(["report", str(out / "e" / "r.csv"), "--out", str(out / "t" / "table.csv")]) == 0
    assert all((out / d).is_dir() for d in ("s", "e", "p", "t"))
