"""HTTP service: sessions, uploads, chat turns, artifacts, batch evaluation.

All endpoints live under /v1 and every non-2xx response carries the ApiError
body {"code", "message", "field"}. Turns within one session are serialized
FIFO; distinct sessions run concurrently. Evaluation runs as a background
job pollable at /v1/eval/{job_id}.
"""

from __future__ import annotations

import itertools
import threading
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile, File, Form
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import errors as err
from .agent.session import Session, respond
from .pipeline import evaluate_manifest
from .raster import decode_mask, decode_raster, ImagePair, binarize_mask

DEFAULT_MAX_UPLOAD_BYTES = 16 * 1024 * 1024


class ApiException(Exception):
    def __init__(self, status: int, code: str, message: str,
                 field: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.field = field
        super().__init__(message)


def _error_response(status: int, code: str, message: str,
                    field: str | None = None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message,
                                 "field": field})


_DOMAIN_STATUS = [
    (err.MissingPrediction, 404, "missing_prediction"),
    (err.DimensionMismatch, 400, "dimension_mismatch"),
    (err.DecodeError, 400, "decode_error"),
    (err.SchemaError, 400, "schema_error"),
    (err.IdMismatch, 400, "id_mismatch"),
    (err.EmptyCorpus, 400, "empty_corpus"),
    (err.EmptyInput, 400, "empty_input"),
]


def _map_domain_error(exc: err.ForestLabError) -> tuple[int, str]:
    for etype, status, code in _DOMAIN_STATUS:
        if isinstance(exc, etype):
            return status, code
    return 400, "domain_error"


class MessageBody(BaseModel):
    text: str
    planner: str = "deterministic"


class EvalBody(BaseModel):
    manifest: str
    pred_dir: str | None = None
    captions: str | None = None
    split: str | None = None
    per_pair: bool = False


class _JobStore:
    def __init__(self):
        self._jobs: dict[str, dict] = {}
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def create(self) -> str:
        with self._lock:
            job_id = f"j{next(self._counter)}"
            self._jobs[job_id] = {"job_id": job_id, "status": "running",
                                  "report": None, "error": None}
            return job_id

    def finish(self, job_id: str, report: dict) -> None:
        with self._lock:
            self._jobs[job_id].update(status="done", report=report)

    def fail(self, job_id: str, message: str) -> None:
        with self._lock:
            self._jobs[job_id].update(status="failed", error=message)

    def get(self, job_id: str) -> dict | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None


def create_app(data_root: str | Path | None = None,
               ui_dir: str | Path | None = None,
               max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES) -> FastAPI:
    app = FastAPI(title="forestlab", version="1.0")
    sessions: dict[str, Session] = {}
    session_locks: dict[str, threading.Lock] = {}
    store_lock = threading.Lock()
    session_counter = itertools.count(1)
    jobs = _JobStore()
    root = Path(data_root).resolve() if data_root else Path.cwd().resolve()

    def resolve_in_root(raw: str, field: str) -> Path:
        candidate = Path(raw)
        if not candidate.is_absolute():
            candidate = root / candidate
        resolved = candidate.resolve()
        if resolved != root and root not in resolved.parents:
            raise ApiException(400, "path_escape",
                               f"path {raw!r} escapes the data root", field)
        return resolved

    def get_session(session_id: str) -> Session:
        with store_lock:
            session = sessions.get(session_id)
        if session is None:
            raise ApiException(404, "session_not_found",
                               f"no session with id {session_id!r}")
        return session

    @app.exception_handler(ApiException)
    async def handle_api_exception(request: Request, exc: ApiException):
        return _error_response(exc.status, exc.code, exc.message, exc.field)

    @app.exception_handler(err.ForestLabError)
    async def handle_domain_error(request: Request, exc: err.ForestLabError):
        status, code = _map_domain_error(exc)
        return _error_response(status, code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request,
                                      exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = first.get("loc", ())
        field = ".".join(str(p) for p in loc[1:]) or None
        return _error_response(422, "validation_error",
                               first.get("msg", "invalid request"), field)

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return _error_response(500, "internal_error",
                               f"{type(exc).__name__}: {exc}")

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        with store_lock:
            session = Session(session_id=f"s{next(session_counter)}")
            sessions[session.id] = session
            session_locks[session.id] = threading.Lock()
        return {"session_id": session.id}

    @app.get("/v1/sessions/{session_id}")
    def get_session_record(session_id: str):
        return get_session(session_id).to_dict()

    @app.post("/v1/sessions/{session_id}/pair")
    async def upload_pair(session_id: str,
                          image_a: UploadFile = File(...),
                          image_b: UploadFile = File(...),
                          mask: UploadFile | None = File(default=None),
                          pair_id: str | None = Form(default=None)):
        session = get_session(session_id)
        payload_a = await image_a.read()
        payload_b = await image_b.read()
        payload_mask = await mask.read() if mask is not None else None
        for name, payload in (("image_a", payload_a), ("image_b", payload_b),
                              ("mask", payload_mask)):
            if payload is not None and len(payload) > max_upload_bytes:
                raise ApiException(413, "payload_too_large",
                                   f"{name} exceeds {max_upload_bytes} bytes",
                                   name)
        raster_a = decode_raster(payload_a)
        raster_b = decode_raster(payload_b)
        with session_locks[session_id]:
            n_pairs = sum(1 for a in session.artifacts.values()
                          if a.kind == "pair")
            pid = pair_id or f"pair{n_pairs + 1}"
            pair = ImagePair(id=pid, epoch_a=raster_a, epoch_b=raster_b)
            art = session.attach_pair(pair)
            created = [art.id]
            if payload_mask is not None:
                ref = binarize_mask(decode_mask(payload_mask))
                if (ref.height, ref.width) != (raster_a.height, raster_a.width):
                    raise err.DimensionMismatch(
                        (ref.height, ref.width),
                        (raster_a.height, raster_a.width), context="mask upload")
                created.append(session.attach_reference_mask(ref).id)
        return {"pair_id": pid, "width": raster_a.width,
                "height": raster_a.height, "artifact_ids": created}

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        session = get_session(session_id)
        if not body.text.strip():
            raise ApiException(422, "empty_message",
                               "message text must be nonempty", "text")
        if body.planner not in ("deterministic", "llm"):
            raise ApiException(422, "unknown_planner",
                               "planner must be 'deterministic' or 'llm'",
                               "planner")
        with session_locks[session_id]:
            record = respond(session, body.text, planner=body.planner)
        return record.to_dict()

    @app.get("/v1/sessions/{session_id}/artifacts/{artifact_id}")
    def get_artifact(session_id: str, artifact_id: str):
        session = get_session(session_id)
        art = session.artifacts.get(artifact_id)
        if art is None:
            raise ApiException(404, "artifact_not_found",
                               f"no artifact with id {artifact_id!r}")
        payload, content_type = art.to_bytes()
        return Response(content=payload, media_type=content_type)

    def run_eval_job(job_id: str, manifest: Path, pred_dir: Path | None,
                     captions: Path | None, split: str | None, per_pair: bool):
        try:
            report = evaluate_manifest(manifest, pred_dir=pred_dir,
                                       captions=captions, split=split,
                                       include_per_pair=per_pair)
            jobs.finish(job_id, report.to_dict())
        except FileNotFoundError as exc:
            jobs.fail(job_id, f"missing file: {exc}")
        except err.ForestLabError as exc:
            jobs.fail(job_id, str(exc))
        except Exception as exc:  # surfaced through job status, not a 500
            jobs.fail(job_id, f"{type(exc).__name__}: {exc}")

    @app.post("/v1/eval", status_code=202)
    def start_eval(body: EvalBody):
        manifest = resolve_in_root(body.manifest, "manifest")
        if not manifest.is_file():
            raise ApiException(404, "missing_file",
                               f"manifest {body.manifest!r} not found",
                               "manifest")
        pred_dir = (resolve_in_root(body.pred_dir, "pred_dir")
                    if body.pred_dir else None)
        if pred_dir is not None and not pred_dir.is_dir():
            raise ApiException(404, "missing_file",
                               f"prediction directory {body.pred_dir!r} "
                               f"not found", "pred_dir")
        captions = (resolve_in_root(body.captions, "captions")
                    if body.captions else None)
        if captions is not None and not captions.is_file():
            raise ApiException(404, "missing_file",
                               f"caption file {body.captions!r} not found",
                               "captions")
        if body.pred_dir is None and body.captions is None:
            raise ApiException(400, "empty_input",
                               "provide pred_dir and/or captions")
        job_id = jobs.create()
        worker = threading.Thread(
            target=run_eval_job,
            args=(job_id, manifest, pred_dir, captions, body.split,
                  body.per_pair),
            daemon=True)
        worker.start()
        return {"job_id": job_id, "status": "running"}

    @app.get("/v1/eval/{job_id}")
    def get_eval(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise ApiException(404, "job_not_found",
                               f"no eval job with id {job_id!r}")
        return job

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
