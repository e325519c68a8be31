import random

import numpy as np
import pytest

from scriptorium.project import (
    ConfigError,
    DatasetSplit,
    LineOrigin,
    LineRecord,
    LineStatus,
    dump_config,
    open_project,
    parse_config,
    split_dataset,
)


def test_open_project_empty_dir(tmp_path):
    project = open_project(tmp_path / "proj")
    assert project.line_ids() == []
    assert project.config == {}
    for store in ("images", "lines", "models", "corpus", "lexicon"):
        assert (project.root / store).is_dir()


def test_open_project_idempotent(tmp_path):
    first = open_project(tmp_path / "proj")
    first.config["font"] = "serif"
    first.save_config()
    second = open_project(tmp_path / "proj")
    assert second.config == first.config
    assert second.line_ids() == first.line_ids()


def test_open_project_loads_paired_line_files(tmp_path):
    root = tmp_path / "proj"
    (root / "lines").mkdir(parents=True)
    from PIL import Image

    for i in range(3):
        Image.fromarray(np.full((8, 16), 255, dtype=np.uint8)).save(
            root / "lines" / f"{i:04d}.png"
        )
        (root / "lines" / f"{i:04d}.gt.txt").write_text(f"line {i}", encoding="utf-8")
    project = open_project(root)
    lines = project.load_lines()
    assert len(lines) == 3
    assert [l.gt_text for l in lines] == ["line 0", "line 1", "line 2"]
    assert all(l.status is LineStatus.CORRECTED for l in lines)


def test_bad_config_raises(tmp_path):
    root = tmp_path / "proj"
    root.mkdir()
    (root / "project.cfg").write_text("no equals sign here\n", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        open_project(root)
    assert "no equals sign here" in str(err.value)


def test_config_round_trip():
    cfg = {"a": "1", "recognizer.height": "48", "name": "chansonnier"}
    assert parse_config(dump_config(cfg)) == cfg


def test_line_record_rejects_newlines():
    with pytest.raises(ValueError):
        LineRecord(id="x", gt_text="a\nb")


def test_line_record_status_requires_gt():
    with pytest.raises(ValueError):
        LineRecord(id="x", status=LineStatus.CORRECTED)


def test_line_record_synthetic_requires_parent():
    with pytest.raises(ValueError):
        LineRecord(id="x", origin=LineOrigin.SYNTHETIC)


def test_line_record_normalizes_nfc():
    rec = LineRecord(id="x", gt_text="é")  # decomposed é
    assert rec.gt_text == "é"


def test_save_and_reload_line_round_trip(tmp_path):
    project = open_project(tmp_path / "proj")
    img = np.full((10, 20), 200, dtype=np.uint8)
    rec = LineRecord(
        id="0001",
        page_id="p1",
        bbox=(0, 5, 20, 15),
        gt_text="bona domna",
        pred_text="bona dompna",
        status=LineStatus.CORRECTED,
    )
    project.save_line(rec, image=img)
    loaded = project.load_line("0001")
    assert loaded.id == rec.id
    assert loaded.page_id == rec.page_id
    assert loaded.bbox == rec.bbox
    assert loaded.gt_text == rec.gt_text
    assert loaded.pred_text == rec.pred_text
    assert loaded.status == rec.status
    assert loaded.origin == rec.origin
    assert loaded.image_path.exists()


def test_store_round_trip_many(tmp_path):
    project = open_project(tmp_path / "proj")
    img = np.zeros((4, 4), dtype=np.uint8)
    records = [
        LineRecord(id=f"{i:04d}", gt_text=f"text {i}", status=LineStatus.VALIDATED)
        for i in range(5)
    ]
    records.append(
        LineRecord(
            id="syn-0001",
            origin=LineOrigin.SYNTHETIC,
            parent_id="0001",
            gt_text="text 1",
            status=LineStatus.CORRECTED,
        )
    )
    for rec in records:
        project.save_line(rec, image=img)
    reloaded = {r.id: r for r in project.load_lines()}
    for rec in records:
        got = reloaded[rec.id]
        for field in ("page_id", "bbox", "gt_text", "pred_text", "status", "origin", "parent_id"):
            assert getattr(got, field) == getattr(rec, field), field


def test_split_exact_division():
    split = split_dataset([str(i) for i in range(10)], (0.8, 0.1, 0.1), seed=7)
    assert (len(split.train_ids), len(split.dev_ids), len(split.test_ids)) == (8, 1, 1)


def test_split_deterministic():
    ids = [f"{i:05d}" for i in range(123)]
    a = split_dataset(ids, seed=42)
    b = split_dataset(ids, seed=42)
    assert a == b
    c = split_dataset(ids, seed=43)
    assert a != c


def test_split_corpus_scale_sizes():
    ids = [str(i) for i in range(54600)]
    split = split_dataset(ids, (0.8, 0.1, 0.1), seed=1)
    assert (len(split.train_ids), len(split.dev_ids), len(split.test_ids)) == (
        43680,
        5460,
        5460,
    )


def test_split_bad_ratios():
    with pytest.raises(ValueError):
        split_dataset(["a", "b"], (0.8, 0.1, 0.2), seed=0)


def test_split_empty_ids():
    with pytest.raises(ValueError):
        split_dataset([], seed=0)


def test_split_disjoint_cover_random_cases():
    rng = random.Random(99)
    for _ in range(1000):
        n = rng.randint(1, 60)
        ids = [f"id{j}" for j in range(n)]
        seed = rng.randint(0, 10**6)
        split = split_dataset(ids, seed=seed)
        buckets = [set(split.train_ids), set(split.dev_ids), set(split.test_ids)]
        assert buckets[0] | buckets[1] | buckets[2] == set(ids)
        assert not (buckets[0] & buckets[1])
        assert not (buckets[0] & buckets[2])
        assert not (buckets[1] & buckets[2])
        again = split_dataset(ids, seed=seed)
        assert again == split
        for got, ratio in zip(buckets, (0.8, 0.1, 0.1)):
            assert abs(len(got) - n * ratio) <= 1


def test_append_only_logs(tmp_path):
    project = open_project(tmp_path / "proj")
    project.append_log(project.decisions_log, {"k": 1})
    project.append_log(project.decisions_log, {"k": 2})
    assert project.read_log(project.decisions_log) == [{"k": 1}, {"k": 2}]
    assert project.read_log(project.jobs_log) == []
