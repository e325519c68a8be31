"""Project store: on-disk layout, line records and dataset splits.

A project directory holds::

    images/        page images
    lines/         <id>.png + <id>.gt.txt (+ optional <id>.meta.json)
    models/        recognizer / embedding / lemmatizer artifacts
    corpus/        TEI-subset XML documents
    lexicon/       lemma lexicon + convention profiles
    decisions.log  append-only JSON lines (alignment decisions)
    jobs.log       append-only JSON lines (pipeline job records)
    project.cfg    flat key=value configuration

Ground truth lives in ``<id>.gt.txt`` as UTF-8 NFC with no trailing
newline; everything that does not fit the paired-file convention goes
to the sidecar meta JSON.  All text is normalized to NFC on ingestion.
Reads are lock-free; every mutation goes through one writer lock.
"""

from __future__ import annotations

import json
import math
import random
import threading
import unicodedata
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

STORE_DIRS = ("images", "lines", "models", "corpus", "lexicon", "lexicon/profiles")
DECISIONS_LOG = "decisions.log"
JOBS_LOG = "jobs.log"
CONFIG_FILE = "project.cfg"


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)


class LineStatus(str, Enum):
    UNSEEN = "unseen"
    PREDICTED = "predicted"
    CORRECTED = "corrected"
    VALIDATED = "validated"


class LineOrigin(str, Enum):
    REAL = "real"
    SYNTHETIC = "synthetic"


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass
class LineRecord:
    """One line of text: the atomic unit of recognition and correction."""

    id: str
    page_id: str = ""
    bbox: tuple[int, int, int, int] | None = None
    image_path: Path | None = None
    gt_text: str | None = None
    pred_text: str | None = None
    status: LineStatus = LineStatus.UNSEEN
    origin: LineOrigin = LineOrigin.REAL
    parent_id: str | None = None

    def __post_init__(self):
        if self.gt_text is not None:
            if "\n" in self.gt_text:
                raise ValueError(f"line {self.id}: gt_text contains a newline")
            self.gt_text = nfc(self.gt_text)
        if self.pred_text is not None:
            if "\n" in self.pred_text:
                raise ValueError(f"line {self.id}: pred_text contains a newline")
            self.pred_text = nfc(self.pred_text)
        if self.status in (LineStatus.CORRECTED, LineStatus.VALIDATED) and self.gt_text is None:
            raise ValueError(f"line {self.id}: status {self.status.value} requires gt_text")
        if self.origin is LineOrigin.SYNTHETIC and not self.parent_id:
            raise ValueError(f"line {self.id}: synthetic line must record its parent id")


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple[str, ...]
    dev_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int

    def as_dict(self) -> dict:
        return {
            "train": list(self.train_ids),
            "dev": list(self.dev_ids),
            "test": list(self.test_ids),
            "seed": self.seed,
        }


def _split_sizes(n: int, ratios: tuple[float, ...]) -> list[int]:
    # floor + largest remainder, so each bucket is within one item of n*ratio
    floors = [math.floor(n * r) for r in ratios]
    remainders = [n * r - f for r, f in zip(ratios, floors)]
    missing = n - sum(floors)
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[:missing]:
        floors[i] += 1
    return floors


def split_dataset(
    ids, ratios: tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0
) -> DatasetSplit:
    """Deterministic disjoint train/dev/test cover of ``ids``."""
    ids = sorted(ids)
    if not ids:
        raise ValueError("cannot split an empty id set")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios {ratios} do not sum to 1")
    rng = random.Random(seed)
    rng.shuffle(ids)
    n_train, n_dev, n_test = _split_sizes(len(ids), ratios)
    return DatasetSplit(
        train_ids=tuple(ids[:n_train]),
        dev_ids=tuple(ids[n_train : n_train + n_dev]),
        test_ids=tuple(ids[n_train + n_dev :]),
        seed=seed,
    )


def parse_config(text: str) -> dict[str, str]:
    config: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: {line!r} is not key=value", key=line)
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def dump_config(config: dict[str, str]) -> str:
    return "".join(f"{k}={v}\n" for k, v in sorted(config.items()))


class Project:
    """Open project directory with store accessors.

    Concurrent readers are fine; call sites that mutate the store do so
    under ``self.writer_lock`` (the helpers below already take it).
    """

    def __init__(self, root: Path, config: dict[str, str]):
        self.root = root
        self.config = config
        self.writer_lock = threading.RLock()

    # -- paths -------------------------------------------------------
    @property
    def images_dir(self) -> Path:
        return self.root / "images"

    @property
    def lines_dir(self) -> Path:
        return self.root / "lines"

    @property
    def models_dir(self) -> Path:
        return self.root / "models"

    @property
    def corpus_dir(self) -> Path:
        return self.root / "corpus"

    @property
    def lexicon_dir(self) -> Path:
        return self.root / "lexicon"

    @property
    def decisions_log(self) -> Path:
        return self.root / DECISIONS_LOG

    @property
    def jobs_log(self) -> Path:
        return self.root / JOBS_LOG

    # -- config ------------------------------------------------------
    def save_config(self) -> None:
        with self.writer_lock:
            (self.root / CONFIG_FILE).write_text(dump_config(self.config), encoding="utf-8")

    # -- line store --------------------------------------------------
    def line_ids(self) -> list[str]:
        return sorted(p.stem for p in self.lines_dir.glob("*.png"))

    def load_line(self, line_id: str) -> LineRecord:
        png = self.lines_dir / f"{line_id}.png"
        if not png.exists():
            raise FileNotFoundError(f"no such line: {line_id}")
        gt_file = self.lines_dir / f"{line_id}.gt.txt"
        gt = nfc(gt_file.read_text(encoding="utf-8")) if gt_file.exists() else None
        meta_file = self.lines_dir / f"{line_id}.meta.json"
        meta = json.loads(meta_file.read_text(encoding="utf-8")) if meta_file.exists() else {}
        default_status = LineStatus.CORRECTED if gt is not None else LineStatus.UNSEEN
        return LineRecord(
            id=line_id,
            page_id=meta.get("page_id", ""),
            bbox=tuple(meta["bbox"]) if meta.get("bbox") else None,
            image_path=png,
            gt_text=gt,
            pred_text=meta.get("pred_text"),
            status=LineStatus(meta["status"]) if meta.get("status") else default_status,
            origin=LineOrigin(meta.get("origin", "real")),
            parent_id=meta.get("parent_id"),
        )

    def load_lines(self) -> list[LineRecord]:
        return [self.load_line(i) for i in self.line_ids()]

    def save_line(self, record: LineRecord, image=None) -> LineRecord:
        """Persist a record (and optionally its image array) to the store."""
        with self.writer_lock:
            self.lines_dir.mkdir(parents=True, exist_ok=True)
            png = self.lines_dir / f"{record.id}.png"
            if image is not None:
                from PIL import Image

                Image.fromarray(image).save(png)
            if not png.exists():
                raise FileNotFoundError(f"line {record.id}: missing image {png}")
            gt_file = self.lines_dir / f"{record.id}.gt.txt"
            if record.gt_text is not None:
                gt_file.write_text(record.gt_text, encoding="utf-8")
            meta = {
                "page_id": record.page_id,
                "bbox": list(record.bbox) if record.bbox else None,
                "pred_text": record.pred_text,
                "status": record.status.value,
                "origin": record.origin.value,
                "parent_id": record.parent_id,
            }
            (self.lines_dir / f"{record.id}.meta.json").write_text(
                json.dumps(meta, ensure_ascii=False), encoding="utf-8"
            )
            return replace(record, image_path=png)

    # -- append-only logs ---------------------------------------------
    def append_log(self, log_path: Path, entry: dict) -> None:
        with self.writer_lock:
            with log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def read_log(self, log_path: Path) -> list[dict]:
        if not log_path.exists():
            return []
        return [
            json.loads(line)
            for line in log_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]


def open_project(path: str | Path) -> Project:
    """Open (creating if needed) a project directory.

    Idempotent: reopening an existing project yields the same state.
    A malformed config raises ConfigError naming the offending content.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for store in STORE_DIRS:
        (root / store).mkdir(exist_ok=True)
    cfg_file = root / CONFIG_FILE
    if cfg_file.exists():
        config = parse_config(cfg_file.read_text(encoding="utf-8"))
    else:
        config = {}
        cfg_file.write_text("", encoding="utf-8")
    return Project(root, config)
