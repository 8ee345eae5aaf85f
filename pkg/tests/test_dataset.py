import json

import numpy as np
import pytest
from PIL import Image

from lbp_discovery.dataset import (
    IndexGap,
    MissingDirectory,
    OverlappingRanges,
    ResolutionMismatch,
    load_records,
    load_scene,
    parse_range,
    persist,
    split_unseen,
    write_masks,
    write_scene,
)
from lbp_discovery.expr import parse_equation
from lbp_discovery.metrics import Confusion
from lbp_discovery.records import EvalRecord, SchemaVersionMismatch


def make_scene(root, name="canoe", first=1, last=30, roi=None, size=(40, 30), ext="jpg"):
    base = root / name
    (base / "input").mkdir(parents=True)
    (base / "groundtruth").mkdir()
    rng = np.random.default_rng(first)
    for i in range(first, last + 1):
        Image.fromarray(rng.integers(0, 256, size[::-1], dtype=np.uint8)).save(base / "input" / f"in{i:06d}.{ext}")
        gt = np.zeros(size[::-1], dtype=np.uint8)
        gt[:4, :4] = 255
        gt[-3:, -3:] = 170
        Image.fromarray(gt).save(base / "groundtruth" / f"gt{i:06d}.png")
    if roi:
        (base / "temporalROI.txt").write_text(f"{roi[0]} {roi[1]}\n")
    return base


def test_range_arithmetic(tmp_path):
    make_scene(tmp_path, first=890, last=950, roi=(800, 1189))
    scene = load_scene(tmp_path, "canoe", (900, 940))
    assert len(scene.inputs) == 41 and len(scene.gts) == 41
    assert scene.indices[0] == 900 and scene.indices[-1] == 940
    assert scene.resolution == (40, 30)


def test_range_string(tmp_path):
    make_scene(tmp_path, first=1, last=10)
    assert len(load_scene(tmp_path, "canoe", "3..7")) == 5
    assert parse_range("3..7") == (3, 7)
    with pytest.raises(ValueError):
        parse_range("7..3")


def test_clipped_to_roi(tmp_path):
    make_scene(tmp_path, first=1, last=30, roi=(10, 20))
    scene = load_scene(tmp_path, "canoe", (5, 25))
    assert scene.indices == list(range(10, 21))
    assert scene.warnings and "clipped" in scene.warnings[0]


def test_downscale(tmp_path):
    make_scene(tmp_path, size=(360, 240), last=3)
    scene = load_scene(tmp_path, "canoe", downscale=(180, 120))
    assert scene.resolution == (180, 120)
    frames, gts = scene.frames(), scene.ground_truth()
    assert frames[0].shape == (120, 180) and 0.0 <= frames[0].min() <= frames[0].max() <= 1.0
    assert set(np.unique(gts[0])) <= {0, 170, 255}


def test_no_upsampling(tmp_path):
    make_scene(tmp_path, size=(64, 48), last=2)
    scene = load_scene(tmp_path, "canoe", downscale=(180, 120))
    assert scene.resolution == (64, 48) and scene.frames()[0].shape == (48, 64)


def test_stable_order(tmp_path):
    make_scene(tmp_path, last=12)
    a = load_scene(tmp_path, "canoe")
    b = load_scene(tmp_path, "canoe")
    assert a.inputs == b.inputs
    assert [p.name for p in a.inputs] == sorted(p.name for p in a.inputs)


def test_missing_directory(tmp_path):
    with pytest.raises(MissingDirectory):
        load_scene(tmp_path, "nothing")
    (tmp_path / "half" / "input").mkdir(parents=True)
    with pytest.raises(MissingDirectory):
        load_scene(tmp_path, "half")


def test_index_gap(tmp_path):
    base = make_scene(tmp_path, last=8)
    (base / "groundtruth" / "gt000004.png").unlink()
    with pytest.raises(IndexGap):
        load_scene(tmp_path, "canoe")


def test_resolution_mismatch(tmp_path):
    base = make_scene(tmp_path, last=4)
    Image.fromarray(np.zeros((10, 10), dtype=np.uint8)).save(base / "input" / "in000003.jpg")
    with pytest.raises(ResolutionMismatch):
        load_scene(tmp_path, "canoe")


def test_split_unseen(tmp_path):
    make_scene(tmp_path, first=900, last=1040)
    scene = load_scene(tmp_path, "canoe")
    seen, unseen = split_unseen(scene, (900, 940), 100)
    assert seen.indices == list(range(900, 941))
    assert unseen.indices == list(range(941, 1041))
    assert seen.inputs[0] == scene.inputs[0]
    _, empty = split_unseen(scene, (900, 940), 0)
    assert len(empty) == 0
    with pytest.raises(OverlappingRanges):
        split_unseen(scene, (900, 940), 10, unseen_start=930)


def test_augmented_seen_range(tmp_path):
    make_scene(tmp_path, first=1, last=80)
    scene = load_scene(tmp_path, "canoe")
    seen, unseen = split_unseen(scene, (1, 20 + 27), 20)
    assert len(seen) == 47 and unseen.indices[0] == 48


def _record(i):
    eq = parse_equation("(Z - C) + a")
    c = Confusion(tp=i, tn=100, fp=3, fn=i % 4)
    return EvalRecord.from_confusion("s", eq, c, {"lbp": {"P": 8}}, [5, 6, 7], wall_time=0.1 * i, seed=3)


def test_records_round_trip(tmp_path):
    recs = [_record(i) for i in range(1, 4)]
    path = tmp_path / "r.jsonl"
    persist(recs, path)
    assert load_records(path) == recs
    assert len(path.read_text().splitlines()) == 3


def test_persist_creates_directory(tmp_path):
    path = tmp_path / "run" / "nested" / "r.jsonl"
    persist([_record(1)], path)
    assert load_records(path) == [_record(1)]


def test_empty_records(tmp_path):
    path = tmp_path / "r.jsonl"
    persist([], path)
    assert path.read_text() == ""
    assert load_records(path) == []


def test_float_precision_preserved(tmp_path):
    rec = _record(7)
    path = tmp_path / "r.jsonl"
    persist([rec], path)
    back = load_records(path)[0]
    assert back.fscore == rec.fscore and back.precision == rec.precision


def test_schema_mismatch(tmp_path):
    line = json.loads(_record(1).to_json())
    line["schema"] = 99
    path = tmp_path / "r.jsonl"
    path.write_text(json.dumps(line) + "\n")
    with pytest.raises(SchemaVersionMismatch):
        load_records(path)


def test_record_invariants():
    rec = _record(5)
    assert parse_equation(rec.equation).text == rec.equation
    assert rec.structure == "(Z o C) o a"
    assert rec.operators == [1, 0]


def test_write_scene_round_trip(tmp_path):
    frames = [np.full((8, 10), k / 10) for k in range(4)]
    gts = [np.zeros((8, 10), dtype=np.uint8) for _ in range(4)]
    gts[2][1, 1] = 255
    write_scene(frames, gts, tmp_path, "toy")
    scene = load_scene(tmp_path, "toy")
    assert scene.indices == [1, 2, 3, 4]
    assert np.allclose(scene.frames()[3], 0.3, atol=1 / 255)
    assert scene.ground_truth()[2][1, 1] == 255


def test_write_masks(tmp_path):
    paths = write_masks([np.eye(3, dtype=np.uint8)], [17], tmp_path / "m")
    assert paths[0].name == "bin000017.png"
    assert np.array_equal(np.asarray(Image.open(paths[0])), np.eye(3, dtype=np.uint8) * 255)
