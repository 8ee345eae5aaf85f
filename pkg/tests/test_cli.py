import json

import pytest

from lbp_discovery.cli import main
from lbp_discovery.records import load_records


@pytest.fixture(scope="module")
def scene_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("cdnet")
    assert main(["synth", "--scene", "synthetic_square", "--n-frames", "20", "--out", str(root)]) == 0
    return root


@pytest.fixture(scope="module")
def vae_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("vae")
    cfg = out / "vae.ini"
    cfg.write_text("[vae]\nenc_hidden = 8\ndec_hidden = 8\nlatent_dim = 4\nmax_epochs = 2\n")
    assert main(["train-vae", "--config", str(cfg), "--max-steps", "5", "--out", str(out)]) == 0
    return out


def test_synth_layout(scene_root):
    base = scene_root / "synthetic_square"
    assert len(list((base / "input").glob("in*.png"))) == 20
    assert len(list((base / "groundtruth").glob("gt*.png"))) == 20
    assert (base / "temporalROI.txt").read_text().split() == ["1", "20"]


def test_train_vae_outputs(vae_dir):
    assert (vae_dir / "vae.ckpt").is_file()
    rep = json.loads((vae_dir / "train_report.json").read_text())
    assert rep["steps"] == 5


def test_generate(vae_dir, capsys):
    assert main(["generate", "--model", str(vae_dir / "vae.ckpt"), "--count", "3", "--raw"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3


def test_evaluate_with_masks(scene_root, tmp_path, capsys):
    args = ["evaluate", "--dataset", str(scene_root), "--scene", "synthetic_square",
            "--equation", "Z - C + a", "--masks", "--out", str(tmp_path)]
    assert main(args) == 0
    assert "F=" in capsys.readouterr().out
    assert len(load_records(tmp_path / "record.jsonl")) == 1
    assert len(list((tmp_path / "masks").glob("bin*.png"))) == len(list((tmp_path / "diffs").glob("diff*.png"))) > 0


def test_discover_and_report(scene_root, tmp_path):
    structures = tmp_path / "s.txt"
    structures.write_text("Z o C o a\n")
    preset = tmp_path / "run.ini"
    preset.write_text("[lbp]\nregion_radius = 2\n[bgs]\nT_P = 0.5\n")
    run = ["discover", "--config", str(preset), "--dataset", str(scene_root), "--scene", "synthetic_square",
           "--structures", str(structures), "--out", str(tmp_path)]
    assert main(run) == 0
    records = load_records(tmp_path / "records.jsonl")
    assert len(records) == 16
    assert main(["report", "--records", str(tmp_path / "records.jsonl"), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "summary.csv").is_file()


def test_synthetic_scene_without_dataset(tmp_path):
    args = ["evaluate", "--scene", "synthetic_square", "--frames", "1..20", "--out", str(tmp_path)]
    assert main(args) == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["evaluate", "--scene", "synthetic_square", "--equation", "Z ? C"],
        ["evaluate", "--scene", "nowhere"],
        ["discover", "--scene", "synthetic_square"],
        ["train-vae", "--no-such-flag"],
        [],
    ],
)
def test_usage_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv else argv) == 2


def test_data_errors(tmp_path):
    assert main(["evaluate", "--dataset", str(tmp_path), "--scene", "missing", "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    assert main(["generate", "--model", str(bad)]) == 3
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["report", "--records", str(empty), "--out", str(tmp_path)]) == 3
