"""Pipeline jobs: dispatch, artifact tracking, idempotent re-runs.

Every job run appends one record to ``jobs.log`` listing the artifacts
it produced, which makes any file in the project attributable to the
job that created it.  Re-running a job whose artifacts already exist
is a no-op unless forced.
"""

from __future__ import annotations

import json
import time
import traceback
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .. import imaging
from ..evaluation import aligned_diff, evaluate_pairs, select_best
from ..lemmatizer import (
    AnnotatedToken,
    LemmatizerConfig,
    LemmatizerModel,
    evaluate as evaluate_lemmas,
    train_lemmatizer,
)
from ..embeddings import (
    EmbeddingTable,
    SkipgramEmbeddings,
    cluster_ward,
    project_2d,
    scatter_svg,
)
from ..project import LineRecord, LineStatus, Project, split_dataset
from ..recognizer import RecognizerModel, TrainingConfig, train
from ..tei import emit_tei, parse_tei

class JobKind(str, Enum):
    PREPROCESS = "preprocess"
    AUGMENT = "augment"
    TRAIN_HTR = "train_htr"
    RECOGNIZE = "recognize"
    EVAL = "eval"
    EMBED = "embed"
    LEMMATIZE_TRAIN = "lemmatize_train"
    LEMMATIZE_APPLY = "lemmatize_apply"


_STATE_ORDER = ["queued", "running", "done", "failed"]


@dataclass
class PipelineJob:
    kind: JobKind
    params: dict = field(default_factory=dict)
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    state: str = "queued"
    artifacts: list[str] = field(default_factory=list)
    error: str | None = None
    created: float = field(default_factory=time.time)
    finished: float | None = None
    note: str = ""

    def advance(self, state: str) -> None:
        if _STATE_ORDER.index(state) < _STATE_ORDER.index(self.state):
            raise ValueError(f"job state cannot go back from {self.state} to {state}")
        self.state = state

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "params": self.params,
            "state": self.state,
            "artifacts": self.artifacts,
            "error": self.error,
            "created": self.created,
            "finished": self.finished,
            "note": self.note,
        }


def _gt_lines(project: Project, include_synthetic=True) -> list[LineRecord]:
    lines = [r for r in project.load_lines() if r.gt_text]
    if not include_synthetic:
        lines = [r for r in lines if r.parent_id is None]
    return lines


def _pairs(records: list[LineRecord]):
    return [(r.gt_text, imaging.read_gray(r.image_path)) for r in records]


# ---------------------------------------------------------------------------
# job bodies; each returns a list of artifact paths


def _job_preprocess(project: Project, params: dict) -> list[str]:
    page_path = Path(params["page"])
    page_id = params.get("page_id", page_path.stem)
    gray = imaging.read_gray(page_path)
    mask = imaging.binarize(gray, params.get("binarize", "otsu"))
    angle, mask = imaging.deskew(mask, params.get("deskew_range", 2.0))
    if angle != 0.0:
        from scipy import ndimage

        gray = np.clip(
            ndimage.rotate(
                gray.astype(float), angle, reshape=False, order=1, mode="constant", cval=255.0
            ),
            0,
            255,
        ).astype(np.uint8)
    boxes = imaging.segment_lines(mask, params.get("min_gap_px", 4))
    artifacts = []
    pad = 2
    for n, (x0, y0, x1, y1) in enumerate(boxes, 1):
        y0p, y1p = max(0, y0 - pad), min(gray.shape[0], y1 + pad)
        x0p, x1p = max(0, x0 - pad), min(gray.shape[1], x1 + pad)
        record = LineRecord(
            id=f"{page_id}-{n:04d}",
            page_id=page_id,
            bbox=(x0p, y0p, x1p, y1p),
        )
        saved = project.save_line(record, image=gray[y0p:y1p, x0p:x1p])
        artifacts.append(str(saved.image_path))
    return artifacts


def _job_augment(project: Project, params: dict) -> list[str]:
    real = _gt_lines(project, include_synthetic=False)
    if not real:
        raise ValueError("no transcribed lines to augment")
    multiplier = int(params.get("multiplier", 9))
    seed = int(params.get("seed", 0))
    recipe_dicts = params.get("recipes")
    if not recipe_dicts and project.config.get("augment.recipes"):
        recipe_dicts = json.loads(project.config["augment.recipes"])
    recipes = None
    if recipe_dicts:
        recipes = [imaging.DegradationRecipe.from_dict(r) for r in recipe_dicts]
    synthetic = imaging.expand_ground_truth(real, multiplier, recipes, seed=seed)
    artifacts = []
    for record in synthetic:
        saved = project.save_line(record)
        artifacts.append(str(saved.image_path))
    return artifacts


def _training_config(params: dict) -> TrainingConfig:
    fields = (
        "lr", "momentum", "hidden_size", "input_height",
        "max_iterations", "checkpoint_interval", "seed", "clip_norm",
    )
    kwargs = {k: params[k] for k in fields if k in params}
    return TrainingConfig(**kwargs)


def _job_train_htr(project: Project, params: dict) -> list[str]:
    lines = _gt_lines(project, include_synthetic=params.get("use_synthetic", True))
    if len(lines) < 2:
        raise ValueError("need at least two transcribed lines to train")
    split = split_dataset(
        [r.id for r in lines],
        tuple(params.get("split", (0.9, 0.1, 0.0))),
        seed=int(params.get("split_seed", 0)),
    )
    by_id = {r.id: r for r in lines}
    train_records = [by_id[i] for i in split.train_ids]
    dev_records = [by_id[i] for i in split.dev_ids]
    config = _training_config(params)
    run, checkpoints = train(
        _pairs(train_records),
        _pairs(dev_records),
        config,
        line_ids=[r.id for r in train_records],
        synthetic_flags=[r.parent_id is not None for r in train_records],
    )
    name = params.get("name", "htr")
    model_dir = project.models_dir / name
    model_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for iteration, model in checkpoints:
        path = model_dir / f"checkpoint-{iteration:08d}.npz"
        model.save(path)
        artifacts.append(str(path))
    best_iter, best_model, best_cer = select_best(
        checkpoints, [(r.gt_text, imaging.read_gray(r.image_path)) for r in dev_records]
    )
    best_path = project.models_dir / f"{name}-best.npz"
    best_model.dev_cer = best_cer
    best_model.save(best_path)
    artifacts.append(str(best_path))
    history_path = model_dir / "history.json"
    history_path.write_text(
        json.dumps(
            {
                "best_iteration": best_iter,
                "best_dev_cer": best_cer,
                "history": [h.__dict__ for h in run.history],
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    artifacts.append(str(history_path))
    return artifacts


def _job_recognize(project: Project, params: dict) -> list[str]:
    model = RecognizerModel.load(params.get("model", project.models_dir / "htr-best.npz"))
    only_unseen = params.get("only_unseen", True)
    updated = []
    for record in project.load_lines():
        if only_unseen and record.status is not LineStatus.UNSEEN:
            continue
        text, _confidence = model.recognize(imaging.read_gray(record.image_path))
        record.pred_text = text
        record.status = LineStatus.PREDICTED
        project.save_line(record)
        updated.append(record.id)
    out = project.root / "reports" / "recognize.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps({"updated": updated}, indent=2), encoding="utf-8")
    return [str(out)]


def _job_eval(project: Project, params: dict) -> list[str]:
    ids = params.get("line_ids")
    records = [r for r in project.load_lines() if r.gt_text and (not ids or r.id in ids)]
    if not records:
        raise ValueError("empty dev set")
    model = RecognizerModel.load(params.get("model", project.models_dir / "htr-best.npz"))
    pairs = []
    diffs = []
    for record in records:
        pred = model.transcribe(imaging.read_gray(record.image_path))
        pairs.append((record.gt_text, pred))
        diffs.append(f"# {record.id}\n{aligned_diff(record.gt_text, pred)}")
    report = evaluate_pairs(pairs)
    reports_dir = project.root / "reports"
    reports_dir.mkdir(exist_ok=True)
    name = params.get("name", "eval")
    json_path = reports_dir / f"{name}.json"
    json_path.write_text(report.to_json(), encoding="utf-8")
    diff_path = reports_dir / f"{name}.diff.txt"
    diff_path.write_text("\n\n".join(diffs), encoding="utf-8")
    return [str(json_path), str(diff_path)]


def _corpus_word_stream(project: Project, files: list[str] | None = None) -> list[list[str]]:
    paths = [Path(f) for f in files] if files else sorted(project.corpus_dir.glob("*.xml"))
    sentences = []
    for path in paths:
        doc = parse_tei(path.read_bytes())
        words = [t.surface for t in doc.tokens() if t.kind == "word"]
        if words:
            sentences.append(words)
    return sentences


def _job_embed(project: Project, params: dict) -> list[str]:
    sentences = _corpus_word_stream(project, params.get("files"))
    if not sentences:
        raise ValueError("no corpus documents to train embeddings on")
    est = SkipgramEmbeddings(
        dim=int(params.get("dim", 100)),
        window=int(params.get("window", 5)),
        negatives=int(params.get("negatives", 5)),
        epochs=int(params.get("epochs", 5)),
        min_count=int(params.get("min_count", 5)),
        seed=int(params.get("seed", 0)),
    )
    est.fit(sentences)
    out = project.models_dir / params.get("name", "embeddings.bin")
    est.table_.save(out)
    artifacts = [str(out)]
    if params.get("svg", True) and len(est.table_.vocab) >= 2:
        points = project_2d(est.table_)
        n_clusters = min(int(params.get("clusters", 8)), len(est.table_.vocab))
        clusters = cluster_ward(est.table_, n_clusters)
        svg_path = out.with_suffix(".svg")
        svg_path.write_text(scatter_svg(points, clusters), encoding="utf-8")
        artifacts.append(str(svg_path))
    return artifacts


def _annotated_corpus(project: Project, files: list[str] | None = None):
    paths = [Path(f) for f in files] if files else sorted(project.corpus_dir.glob("*.xml"))
    corpus = []
    for path in paths:
        doc = parse_tei(path.read_bytes())
        for token in doc.tokens():
            if token.kind == "word":
                corpus.append(AnnotatedToken(token.surface, token.lemma))
    return corpus


def _job_lemmatize_train(project: Project, params: dict) -> list[str]:
    corpus = [t for t in _annotated_corpus(project, params.get("files")) if t.lemma]
    if len(corpus) < 10:
        raise ValueError(f"not enough lemmatized tokens to train on ({len(corpus)})")
    split = split_dataset(
        [str(i) for i in range(len(corpus))],
        tuple(params.get("split", (0.8, 0.1, 0.1))),
        seed=int(params.get("split_seed", 0)),
    )
    train_idx = [int(i) for i in split.train_ids]
    dev_idx = [int(i) for i in split.dev_ids]
    test_idx = [int(i) for i in split.test_ids]
    embeddings = None
    emb_path = params.get("embeddings", project.models_dir / "embeddings.bin")
    if Path(emb_path).exists():
        embeddings = EmbeddingTable.load(emb_path)
    config_fields = ("char_dim", "n_filters", "hidden", "context", "epochs", "lr", "seed")
    config = LemmatizerConfig(**{k: params[k] for k in config_fields if k in params})
    model, run = train_lemmatizer(corpus, train_idx, dev_idx, embeddings, config)
    out = project.models_dir / params.get("name", "lemmatizer.npz")
    model.save(out)
    artifacts = [str(out)]
    train_surfaces = {corpus[i].surface for i in train_idx}
    if test_idx:
        report = evaluate_lemmas(model, corpus, test_idx, train_surfaces)
        report_path = project.root / "reports" / "lemmatizer.json"
        report_path.parent.mkdir(exist_ok=True)
        report_path.write_text(
            json.dumps(
                {
                    "accuracy_all": report.accuracy_all,
                    "accuracy_known": report.accuracy_known,
                    "accuracy_unknown": report.accuracy_unknown,
                    "n_known": report.n_known,
                    "n_unknown": report.n_unknown,
                    "dev_accuracy": model.dev_accuracy,
                    "epochs": [list(h) for h in run.history],
                },
                indent=2,
            ),
            encoding="utf-8",
        )
        artifacts.append(str(report_path))
    return artifacts


def _job_lemmatize_apply(project: Project, params: dict) -> list[str]:
    model = LemmatizerModel.load(params.get("model", project.models_dir / "lemmatizer.npz"))
    paths = (
        [Path(f) for f in params["files"]]
        if params.get("files")
        else sorted(project.corpus_dir.glob("*.xml"))
    )
    artifacts = []
    for path in paths:
        doc = parse_tei(path.read_bytes())
        tokens = doc.tokens()
        words = [t for t in tokens if t.kind == "word"]
        stream = [AnnotatedToken(t.surface) for t in words]
        changed = 0
        for i, token in enumerate(words):
            if token.lemma is not None:
                continue
            lemma, confidence = model.predict(stream, i)
            token.lemma = lemma
            token.attrs["cert"] = f"{confidence:.3f}"
            changed += 1
        out = path if params.get("in_place", True) else path.with_suffix(".lemmatized.xml")
        out.write_bytes(emit_tei(doc))
        if changed:
            artifacts.append(str(out))
    return artifacts


_JOB_BODIES = {
    JobKind.PREPROCESS: _job_preprocess,
    JobKind.AUGMENT: _job_augment,
    JobKind.TRAIN_HTR: _job_train_htr,
    JobKind.RECOGNIZE: _job_recognize,
    JobKind.EVAL: _job_eval,
    JobKind.EMBED: _job_embed,
    JobKind.LEMMATIZE_TRAIN: _job_lemmatize_train,
    JobKind.LEMMATIZE_APPLY: _job_lemmatize_apply,
}

#: job kinds whose earlier identical run makes a re-run a no-op
_IDEMPOTENT_ON_ARTIFACTS = {
    JobKind.PREPROCESS,
    JobKind.AUGMENT,
    JobKind.TRAIN_HTR,
    JobKind.EMBED,
    JobKind.LEMMATIZE_TRAIN,
}


def _previous_artifacts(project: Project, job: PipelineJob) -> list[str] | None:
    for record in project.read_log(project.jobs_log):
        if (
            record.get("kind") == job.kind.value
            and record.get("params") == job.params
            and record.get("state") == "done"
        ):
            return record.get("artifacts", [])
    return None


def run_job(project: Project, job: PipelineJob, force: bool = False) -> PipelineJob:
    """Execute a job, record it, and return it with final state."""
    if job.kind in _IDEMPOTENT_ON_ARTIFACTS and not force and not job.params.get("force"):
        previous = _previous_artifacts(project, job)
        if previous is not None and previous and all(Path(a).exists() for a in previous):
            job.advance("running")
            job.artifacts = previous
            job.note = "skipped: artifacts already exist"
            job.advance("done")
            job.finished = time.time()
            project.append_log(project.jobs_log, job.to_json())
            return job
    job.advance("running")
    try:
        job.artifacts = _JOB_BODIES[job.kind](project, job.params)
        job.advance("done")
    except Exception as exc:  # captured into the job record
        job.error = f"{type(exc).__name__}: {exc}"
        job.note = traceback.format_exc(limit=3)
        job.advance("failed")
    job.finished = time.time()
    project.append_log(project.jobs_log, job.to_json())
    return job
