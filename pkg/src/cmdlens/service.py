"""HTTP service consumed by the analyst console.

All bodies are JSON/UTF-8.  Endpoints:

  POST /v1/explain   {command, session_id?, dialect?}  -> Explanation
  POST /v1/intent    {behavior_text, k?}               -> IntentPrediction
  POST /v1/retrieve  {command, k?}                     -> {results: [...]}
  POST /v1/sessions                                    -> {session_id}
  POST /v1/sessions/{id}/ask     {question}            -> {answer}
  POST /v1/sessions/{id}/verdict {command, verdict}    -> {ok, verdicts}
  GET  /v1/sessions/{id}                               -> session record
  GET  /v1/health                                      -> {status}

Deterministic end to end with the stub backend and the offline embedding
provider (timestamps aside); index and catalog are read-only while serving
and can be swapped atomically via AppState.swap_index.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import errors as E
from .config import Config
from .explain import ExplainDeps, PipelineConfig, explain_command, follow_up
from .intent import BehaviorDescription, MatchConfig, identify_intent, load_catalog
from .prompts import ROLE_ASSISTANT, ROLE_USER, append_turn, diversify
from .retrieval import load_index, retrieve_for_command
from .sessions import SessionStore, VerdictEntry
from .shellparse import Dialect, parse

# the contract the console renders against; kept wide enough to validate
# with any jsonschema draft-7 validator
EXPLAIN_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["steps", "overall", "intent", "retrieved", "raw_response",
                 "disposal_advice"],
    "properties": {
        "steps": {"type": "array", "items": {
            "type": "object",
            "required": ["fragment", "explanation"],
            "properties": {"fragment": {"type": "string"},
                           "explanation": {"type": "string"}},
        }},
        "overall": {"type": "string", "minLength": 1},
        "intent": {
            "type": "object",
            "required": ["technique_ranking", "tactic_ranking", "k_used"],
            "properties": {
                "technique_ranking": {"type": "array", "items": {
                    "type": "array", "prefixItems": [
                        {"type": "string"}, {"type": "number"}],
                    "minItems": 2, "maxItems": 2}},
                "tactic_ranking": {"type": "array", "items": {
                    "type": "array", "prefixItems": [
                        {"type": "string"}, {"type": "number"}],
                    "minItems": 2, "maxItems": 2}},
                "k_used": {"type": "integer", "minimum": 1},
            },
        },
        "retrieved": {"type": "array", "items": {
            "type": "object",
            "required": ["chunk_id", "utility", "origin", "text", "score", "rank"],
        }},
        "raw_response": {"type": "string"},
        "disposal_advice": {"type": ["string", "null"]},
    },
}

_STATUS_BY_ERROR = [
    ((E.EmptyCommand, E.UnterminatedQuote, E.UnknownSource,
      E.RoleOrderViolation, E.LengthMismatch, ValueError), 400),
    ((E.SessionNotFound,), 404),
    ((E.BackendUnavailable, E.ProviderUnavailable), 502),
]


@dataclass
class AppState:
    config: Config
    deps: ExplainDeps
    store: SessionStore

    def swap_index(self, index) -> None:
        # assignment is atomic; in-flight requests keep the index they read
        self.deps.index = index


class ExplainBody(BaseModel):
    command: str
    session_id: str | None = None
    dialect: str | None = None


class IntentBody(BaseModel):
    behavior_text: str
    k: int | None = None


class RetrieveBody(BaseModel):
    command: str
    k: int | None = None


class AskBody(BaseModel):
    question: str


class VerdictBody(BaseModel):
    command: str
    verdict: str


def build_state(config: Config) -> AppState:
    config.validate_for_serving()
    catalog = load_catalog(config.catalog_path)
    index = load_index(config.index_path) if config.index_path else None
    template_set = config.make_template_set()
    deps = ExplainDeps(
        catalog=catalog,
        provider=config.make_provider(),
        backend=config.make_backend(),
        template_set=template_set,
        index=index,
        cfg=PipelineConfig(
            dialect=Dialect(config.dialect),
            k_per_unit=config.k_per_unit,
            intent_k=config.intent_k,
            seed=config.seed,
            prompt_char_budget=config.prompt_char_budget,
            temperature=config.backend.temperature,
            top_p=config.backend.top_p,
        ),
    )
    return AppState(config=config, deps=deps,
                    store=SessionStore(config.session_store_path))


def build_app(config: Config, state: AppState | None = None) -> FastAPI:
    state = state or build_state(config)
    app = FastAPI(title="cmdlens", version="1")
    app.state.cmdlens = state

    def error_response(exc: Exception) -> JSONResponse:
        status = 500
        for types, code in _STATUS_BY_ERROR:
            if isinstance(exc, types):
                status = code
                break
        return JSONResponse(status_code=status, content={"error": {
            "type": type(exc).__name__,
            "message": str(exc),
            "stage": getattr(exc, "stage", None),
        }})

    @app.middleware("http")
    async def auth_middleware(request: Request, call_next):
        token = state.config.auth_token
        if token and request.url.path.startswith("/v1/") \
                and request.url.path != "/v1/health":
            if request.headers.get("Authorization") != f"Bearer {token}":
                return JSONResponse(status_code=401,
                                    content={"error": {"type": "Unauthorized",
                                                       "message": "bad or missing token",
                                                       "stage": None}})
        return await call_next(request)

    @app.exception_handler(Exception)
    async def handle_any(request: Request, exc: Exception):
        return error_response(exc)

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "index_size": len(state.deps.index or []),
                "techniques": len(state.deps.catalog.techniques)}

    @app.post("/v1/explain")
    def explain(body: ExplainBody):
        try:
            deps = state.deps
            session = None
            if body.session_id is not None:
                session = state.store.load(body.session_id).dialogue
            if body.dialect is not None:
                cfg = PipelineConfig(**{**vars(deps.cfg), "dialect": Dialect(body.dialect)})
                deps = ExplainDeps(catalog=deps.catalog, provider=deps.provider,
                                   backend=deps.backend, template_set=deps.template_set,
                                   index=deps.index, cfg=cfg)
            explanation = explain_command(body.command, deps, session=session)
            payload = explanation.to_dict()
            if body.session_id is not None:
                question = diversify(body.command, deps.template_set, deps.cfg.seed)
                now = time.time()
                record = state.store.load(body.session_id)
                dialogue = append_turn(record.dialogue, ROLE_USER, question, now)
                dialogue = append_turn(dialogue, ROLE_ASSISTANT,
                                       explanation.raw_response, now)
                for turn in dialogue.turns[len(record.dialogue.turns):]:
                    state.store.append_turn(body.session_id, turn)
                state.store.record_explanation(body.session_id, body.command, payload)
            return payload
        except Exception as exc:
            return error_response(exc)

    @app.post("/v1/intent")
    def intent(body: IntentBody):
        try:
            if not body.behavior_text:
                raise ValueError("behavior_text must be non-empty")
            cfg = MatchConfig(k=body.k) if body.k else MatchConfig(k=state.deps.cfg.intent_k)
            prediction = identify_intent(BehaviorDescription(text=body.behavior_text),
                                         state.deps.catalog, state.deps.provider, cfg)
            return prediction.to_dict()
        except Exception as exc:
            return error_response(exc)

    @app.post("/v1/retrieve")
    def retrieve(body: RetrieveBody):
        try:
            if state.deps.index is None:
                raise ValueError("no index configured")
            k = body.k or state.deps.cfg.k_per_unit
            cmd = parse(body.command, state.deps.cfg.dialect)
            results = retrieve_for_command(state.deps.index, cmd, k, state.deps.provider)
            return {"results": [
                {"chunk_id": r.chunk.chunk_id, "utility": r.chunk.utility,
                 "origin": r.chunk.origin, "text": r.chunk.text,
                 "score": r.score, "rank": r.rank} for r in results]}
        except Exception as exc:
            return error_response(exc)

    @app.post("/v1/sessions")
    def create_session():
        return {"session_id": state.store.create()}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return state.store.load(session_id).to_dict()
        except Exception as exc:
            return error_response(exc)

    @app.post("/v1/sessions/{session_id}/ask")
    def ask(session_id: str, body: AskBody):
        try:
            if not body.question:
                raise ValueError("question must be non-empty")
            record = state.store.load(session_id)
            answer, updated = follow_up(record.dialogue, body.question, state.deps)
            for turn in updated.turns[len(record.dialogue.turns):]:
                state.store.append_turn(session_id, turn)
            return {"answer": answer}
        except Exception as exc:
            return error_response(exc)

    @app.post("/v1/sessions/{session_id}/verdict")
    def verdict(session_id: str, body: VerdictBody):
        try:
            if not state.store.exists(session_id):
                raise E.SessionNotFound(session_id)
            entry = VerdictEntry(command=body.command,
                                 verdict=body.verdict.lower(),
                                 timestamp=time.time())
            state.store.append_verdict(session_id, entry)
            record = state.store.load(session_id)
            return {"ok": True, "verdicts": len(record.verdicts)}
        except Exception as exc:
            return error_response(exc)

    if config.static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/console", StaticFiles(directory=config.static_dir, html=True),
                  name="console")

    return app


def serve(config: Config) -> None:
    """Run the service until interrupted; uvicorn drains in-flight
    requests on shutdown."""
    import uvicorn
    app = build_app(config)
    uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="info")
