"""FastAPI application exposing the adapter wire protocol.

Singleton endpoints: POST /caption, /annotate, /qg, /qa. Each has a
_batch variant with identical per-item semantics (a batch of n behaves
exactly like n singleton calls; the first failing item fails the whole
request). GET /healthz reports backend versions.

Error mapping: malformed or schema-invalid request bodies are HTTP 400;
a backend failure while serving a well-formed request is HTTP 500 with
the reason in ``detail``. Handlers hold no mutable state, so concurrent
requests never interact.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .backends import Backends, ModelConfig, load_backends
from .nlp import HeuristicError, Phrase


class CaptionRequest(BaseModel):
    image_ref: str


class CaptionBatchRequest(BaseModel):
    image_refs: list[str]


class AnnotateRequest(BaseModel):
    text: str


class AnnotateBatchRequest(BaseModel):
    texts: list[str]


class QGRequest(BaseModel):
    passage_hl: str


class QGBatchRequest(BaseModel):
    passages_hl: list[str]


class QARequest(BaseModel):
    question: str
    passage: str


class QABatchRequest(BaseModel):
    items: list[QARequest]


def _phrase_payload(phrases: list[Phrase]) -> dict:
    return {
        "phrases": [
            {"text": p.text, "offset": p.offset, "tags": list(p.tags)} for p in phrases
        ]
    }


def create_app(config: ModelConfig | None = None) -> FastAPI:
    backends: Backends = load_backends(config or ModelConfig())
    app = FastAPI(title="modelserver", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc.errors()[:3])})

    @app.exception_handler(HeuristicError)
    async def backend_failure(request: Request, exc: HeuristicError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__, "backends": backends.versions()}

    @app.post("/caption")
    def caption(body: CaptionRequest):
        return {"caption": backends.captioner(body.image_ref)}

    @app.post("/caption_batch")
    def caption_batch(body: CaptionBatchRequest):
        return {"captions": [backends.captioner(ref) for ref in body.image_refs]}

    @app.post("/annotate")
    def annotate(body: AnnotateRequest):
        return _phrase_payload(backends.annotator(body.text))

    @app.post("/annotate_batch")
    def annotate_batch(body: AnnotateBatchRequest):
        return {"results": [_phrase_payload(backends.annotator(t)) for t in body.texts]}

    @app.post("/qg")
    def qg(body: QGRequest):
        return {"question": backends.question_generator(body.passage_hl)}

    @app.post("/qg_batch")
    def qg_batch(body: QGBatchRequest):
        return {"questions": [backends.question_generator(p) for p in body.passages_hl]}

    @app.post("/qa")
    def qa(body: QARequest):
        return {"answer": backends.question_answerer(body.question, body.passage)}

    @app.post("/qa_batch")
    def qa_batch(body: QABatchRequest):
        return {"answers": [backends.question_answerer(i.question, i.passage) for i in body.items]}

    return app


def serve(host: str = "127.0.0.1", port: int = 8008, config: ModelConfig | None = None) -> None:
    """Run the service until interrupted (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="info")
