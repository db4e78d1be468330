"""HTTP chat service over a pipeline snapshot.

Endpoints: POST /chat, POST /classify, POST /ner, GET /health; JSON in and
out, UTF-8, error bodies shaped {"error": "..."}. The pipeline is immutable
after startup, so any number of concurrent handlers may share it; reloading
models means restarting the process.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from dsqa import _kernels, serialize
from dsqa.classifier import ConvModel, LinearModel
from dsqa.dialog import DialogConfig, Pipeline, Turn, handle_turn, load_template_set
from dsqa.kb import import_json
from dsqa.ner import CrfModel, HmmModel

DEFAULT_BODY_LIMIT = 64 * 1024


@dataclass
class ServiceConfig:
    classifier_path: str
    ner_path: str
    kb_dir: str
    templates_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    confidence_floor: float = 0.4
    max_facts: int = 5
    body_limit: int = DEFAULT_BODY_LIMIT
    cors_origins: list[str] = field(default_factory=list)


class ServiceConfigError(ValueError):
    """A service config references files that do not exist."""


def load_service_config(path: str | Path) -> ServiceConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    config = ServiceConfig(**raw)
    for label, ref in (
        ("classifier_path", config.classifier_path),
        ("ner_path", config.ner_path),
        ("kb_dir", config.kb_dir),
        ("templates_path", config.templates_path),
    ):
        if ref is not None and not Path(ref).exists():
            raise ServiceConfigError(f"{label}: no such path {ref!r}")
    return config


def load_classifier(path: str):
    kind = serialize.peek_kind(path)
    if kind == "linear":
        return LinearModel.load(path)
    if kind == "conv":
        return ConvModel.load(path)
    raise serialize.ModelFormatError(f"{path}: {kind!r} is not a classifier model")


def load_tagger(path: str):
    kind = serialize.peek_kind(path)
    if kind == "crf":
        return CrfModel.load(path)
    if kind == "hmm":
        return HmmModel.load(path)
    raise serialize.ModelFormatError(f"{path}: {kind!r} is not a tagger model")


def build_pipeline(config: ServiceConfig) -> Pipeline:
    return Pipeline(
        classifier=load_classifier(config.classifier_path),
        ner=load_tagger(config.ner_path),
        index=import_json(config.kb_dir),
        templates=load_template_set(config.templates_path),
        config=DialogConfig(
            confidence_floor=config.confidence_floor,
            max_facts=config.max_facts,
        ),
    )


class ChatRequest(BaseModel):
    text: str
    session_id: str | None = None


def _trace_id(text: str) -> str:
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


def turn_payload(turn: Turn) -> dict:
    return {
        "answer": turn.answer_text,
        "qtype": turn.qtype.value,
        "confidence": turn.confidence,
        "entities": [
            {"surface": e.surface, "etype": e.etype.value, "cui": e.cui}
            for e in turn.entities
        ],
        "facts": [
            {
                "kind": f.kind,
                "name": f.name,
                "subject": f.subject_name,
                "object": f.object_name,
                "value": f.value,
                "source": f.source,
            }
            for f in turn.facts
        ],
        "trace_id": _trace_id(turn.user_text),
    }


def create_app(
    pipeline: Pipeline,
    body_limit: int = DEFAULT_BODY_LIMIT,
    cors_origins: list[str] | None = None,
) -> FastAPI:
    app = FastAPI(title="dsqa chat service")

    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.middleware("http")
    async def _body_limit(request: Request, call_next):
        declared = request.headers.get("content-length")
        if declared is not None and int(declared) > body_limit:
            return JSONResponse(
                status_code=413, content={"error": "request body too large"}
            )
        if request.method == "POST":
            body = await request.body()
            if len(body) > body_limit:
                return JSONResponse(
                    status_code=413, content={"error": "request body too large"}
                )
        return await call_next(request)

    @app.post("/chat")
    def chat(req: ChatRequest) -> dict:
        turn = handle_turn(pipeline, req.text)
        return turn_payload(turn)

    @app.post("/classify")
    def classify(req: ChatRequest) -> dict:
        from dsqa.classifier import predict_qtype

        qtype, confidence = predict_qtype(pipeline.classifier, req.text)
        return {
            "qtype": qtype.value,
            "confidence": confidence,
            "trace_id": _trace_id(req.text),
        }

    @app.post("/ner")
    def ner_endpoint(req: ChatRequest) -> dict:
        from dsqa.ner import predict_entities

        spans = predict_entities(pipeline.ner, req.text)
        return {
            "entities": [
                {
                    "surface": s.surface,
                    "etype": s.etype.value,
                    "start": s.start,
                    "end": s.end,
                }
                for s in spans
            ],
            "trace_id": _trace_id(req.text),
        }

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "model_versions": {
                "format": serialize.FORMAT_VERSION,
                "classifier": type(pipeline.classifier).__name__,
                "ner": type(pipeline.ner).__name__,
                "kernel": _kernels.IMPLEMENTATION,
            },
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Blocking entry point; uvicorn handles signals and graceful shutdown."""
    import uvicorn

    pipeline = build_pipeline(config)
    app = create_app(
        pipeline, body_limit=config.body_limit, cors_origins=config.cors_origins
    )
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
