"""JSON API backing the review UI.

Reads are lock-free; anything that mutates the project goes through
the project's single writer lock.  Long jobs run on one background
worker thread and are polled over ``GET /api/jobs``.  Mutation
endpoints accept an optional ``request_id`` and replay the recorded
response on retries instead of applying the change twice.
"""

from __future__ import annotations

import queue
import threading
import unicodedata
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, JSONResponse, Response

from ..lemma_align import (
    AlignmentDecision,
    DecisionLog,
    LemmaLexicon,
    active_mapping,
    glossary_entries,
    propose_candidates,
)
from ..project import LineStatus, Project
from ..recognizer import RecognizerModel
from ..tei import parse_tei
from .jobs import JobKind, PipelineJob, run_job


def _line_payload(record) -> dict:
    return {
        "id": record.id,
        "page_id": record.page_id,
        "bbox": list(record.bbox) if record.bbox else None,
        "gt_text": record.gt_text,
        "pred_text": record.pred_text,
        "status": record.status.value,
        "origin": record.origin.value,
        "parent_id": record.parent_id,
    }


class Workbench:
    """Mutable service state shared by the endpoints."""

    def __init__(self, project: Project):
        self.project = project
        self.decision_log = DecisionLog(project.decisions_log)
        self.lexicon = self._load_lexicon()
        self.glossary = self._load_glossary()
        self.jobs: dict[str, PipelineJob] = {}
        self.job_queue: queue.Queue[str] = queue.Queue()
        self.seen_requests: dict[str, tuple[int, dict]] = {}
        self.worker = threading.Thread(target=self._work, daemon=True)
        self.worker.start()

    def _load_lexicon(self) -> LemmaLexicon:
        reference = self.project.lexicon_dir / "lexicon.tsv"
        project_file = self.project.lexicon_dir / "project_lemmas.tsv"
        if reference.exists():
            return LemmaLexicon.load(reference, project_file)
        return LemmaLexicon()

    def _load_glossary(self):
        path = self.project.lexicon_dir / "glossary.xml"
        if not path.exists():
            return []
        return glossary_entries(parse_tei(path.read_bytes()))

    def _work(self):
        while True:
            job_id = self.job_queue.get()
            job = self.jobs[job_id]
            run_job(self.project, job)

    def submit(self, job: PipelineJob) -> PipelineJob:
        self.jobs[job.id] = job
        self.job_queue.put(job.id)
        return job


def create_app(project: Project, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="scriptorium workbench")
    state = Workbench(project)
    app.state.workbench = state

    def replayed(request_id: str | None):
        if request_id and request_id in state.seen_requests:
            code, payload = state.seen_requests[request_id]
            return JSONResponse(payload, status_code=code)
        return None

    def remember(request_id: str | None, code: int, payload: dict):
        if request_id:
            state.seen_requests[request_id] = (code, payload)
        return JSONResponse(payload, status_code=code)

    # -- lines ---------------------------------------------------------
    @app.get("/api/lines")
    def list_lines(status: str | None = None):
        records = project.load_lines()
        if status:
            records = [r for r in records if r.status.value == status]
        return [_line_payload(r) for r in records]

    @app.get("/api/lines/{line_id}")
    def get_line(line_id: str):
        try:
            return _line_payload(project.load_line(line_id))
        except FileNotFoundError:
            raise HTTPException(404, f"no such line: {line_id}")

    @app.get("/api/lines/{line_id}/image")
    def line_image(line_id: str):
        png = project.lines_dir / f"{line_id}.png"
        if not png.exists():
            raise HTTPException(404, f"no such line: {line_id}")
        return Response(png.read_bytes(), media_type="image/png")

    @app.post("/api/lines/{line_id}/transcription")
    def correct_line(line_id: str, body: dict):
        cached = replayed(body.get("request_id"))
        if cached:
            return cached
        if "text" not in body:
            raise HTTPException(422, "body must carry 'text'")
        try:
            record = project.load_line(line_id)
        except FileNotFoundError:
            raise HTTPException(404, f"no such line: {line_id}")
        record.gt_text = unicodedata.normalize("NFC", body["text"])
        record.status = LineStatus.CORRECTED
        project.save_line(record)
        return remember(body.get("request_id"), 200, _line_payload(record))

    # -- alignments ------------------------------------------------------
    @app.get("/api/alignments")
    def list_alignments(status: str | None = None):
        decided = state.decision_log.replay()
        out = []
        for entry in state.glossary:
            resolved = entry.id in decided
            if status == "pending" and resolved:
                continue
            if status == "resolved" and not resolved:
                continue
            payload = {
                "gloss_id": entry.id,
                "headword": entry.headword,
                "gram": entry.gram,
                "sub_entries": [
                    {"id": s.id, "form": s.form, "gram": s.gram}
                    for s in entry.sub_entries
                ],
                "status": "resolved" if resolved else "pending",
                "candidates": [
                    {"lemma": lemma, "score": score}
                    for lemma, score in propose_candidates(entry, state.lexicon)
                ],
            }
            if resolved:
                payload["decision"] = decided[entry.id].to_json()
            out.append(payload)
        return out

    @app.post("/api/alignments/{gloss_id}/decision")
    def decide_alignment(gloss_id: str, body: dict):
        cached = replayed(body.get("request_id"))
        if cached:
            return cached
        known = {e.id for e in state.glossary}
        if gloss_id not in known:
            raise HTTPException(404, f"no such glossary entry: {gloss_id}")
        if "accept" in body:
            decision = AlignmentDecision(gloss_id, "accept", lemma=body["accept"])
        elif "new" in body:
            new = body["new"]
            decision = AlignmentDecision(
                gloss_id,
                "new",
                lemma=new.get("lemma"),
                documentation=new.get("documentation", ""),
            )
        elif body.get("reject"):
            decision = AlignmentDecision(gloss_id, "reject")
        else:
            raise HTTPException(422, "body must carry accept/new/reject")
        with project.writer_lock:
            state.decision_log.append(decision, state.lexicon)
            state.lexicon.save_project_entries(
                project.lexicon_dir / "project_lemmas.tsv"
            )
        return remember(body.get("request_id"), 200, decision.to_json())

    # -- jobs ------------------------------------------------------------
    @app.get("/api/jobs")
    def list_jobs():
        live = [j.to_json() for j in state.jobs.values()]
        live_ids = {j["id"] for j in live}
        historic = [
            r for r in project.read_log(project.jobs_log) if r.get("id") not in live_ids
        ]
        return historic + live

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        if job_id in state.jobs:
            return state.jobs[job_id].to_json()
        for record in project.read_log(project.jobs_log):
            if record.get("id") == job_id:
                return record
        raise HTTPException(404, f"no such job: {job_id}")

    @app.post("/api/jobs")
    def submit_job(body: dict):
        cached = replayed(body.get("request_id"))
        if cached:
            return cached
        try:
            kind = JobKind(body.get("kind", ""))
        except ValueError:
            raise HTTPException(422, f"unknown job kind {body.get('kind')!r}")
        job = state.submit(PipelineJob(kind=kind, params=body.get("params", {})))
        return remember(body.get("request_id"), 201, job.to_json())

    # -- models ------------------------------------------------------------
    @app.get("/api/models")
    def list_models():
        out = []
        for path in sorted(project.models_dir.rglob("*")):
            if not path.is_file():
                continue
            info = {
                "name": str(path.relative_to(project.models_dir)),
                "bytes": path.stat().st_size,
            }
            if path.suffix == ".npz" and "checkpoint" not in path.name:
                try:
                    model = RecognizerModel.load(path)
                    info["kind"] = "recognizer"
                    info["dev_cer"] = model.dev_cer
                    info["checkpoint_iter"] = model.checkpoint_iter
                except Exception:
                    pass
            out.append(info)
        return out

    # -- static UI -----------------------------------------------------------
    ui_root = Path(ui_dir) if ui_dir else None

    @app.get("/", response_class=HTMLResponse)
    def index():
        if ui_root and (ui_root / "index.html").exists():
            return (ui_root / "index.html").read_text(encoding="utf-8")
        return "<html><body><h1>scriptorium workbench</h1><p>API at /api</p></body></html>"

    @app.get("/ui/{path:path}")
    def ui_asset(path: str):
        if not ui_root:
            raise HTTPException(404, "no UI bundled")
        target = (ui_root / path).resolve()
        if not str(target).startswith(str(ui_root.resolve())) or not target.is_file():
            raise HTTPException(404, path)
        media = "text/javascript" if target.suffix == ".js" else "text/css" if target.suffix == ".css" else "application/octet-stream"
        if target.suffix == ".html":
            media = "text/html"
        return Response(target.read_bytes(), media_type=media)

    return app


def serve(project: Project, port: int = 8023, ui_dir=None, host: str = "127.0.0.1"):
    """Run the workbench service (blocking)."""
    import uvicorn

    app = create_app(project, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
