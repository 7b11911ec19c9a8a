"""HTTP facade over the core package.

Routes are pure projections of module results: request models validate
input, module calls do the work, response models mirror the dataclass
documents byte-for-byte. No conversational or graph logic lives here —
direct calls and API calls must produce identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Literal

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .baseline import BaselineConfig, BaselineRunner
from .edge_store import TreeStore
from .errors import (
    BackendError,
    DuplicateKey,
    EmptyGeneration,
    EvaluatorProtocolError,
    HopLimitExceeded,
    MalformedDecision,
    MalformedSource,
    MissingField,
    NotFound,
    SessionBusy,
    StoreUnavailable,
    TreenavError,
    UnknownNode,
)
from .ingestion import SourceDocument, SourceFormat, ingest
from .llm_gateway import BackendConfig
from .orchestrator import Orchestrator, OrchestratorConfig
from .validation import validate


@dataclass
class ServiceConfig:
    store_root: str | Path
    backend: BackendConfig
    eval_model: str = "default-model"
    generation_model: str = "default-model"
    baseline_model: str = "default-model"
    hop_cap: int = 25
    history_window: int | None = None
    auth_token: str = ""  # empty disables auth
    extra: dict = dataclass_field(default_factory=dict)


# -- request/response models -------------------------------------------------


class TreeUpload(BaseModel):
    source: str
    format: Literal["json", "csv"]
    tree_id: str | None = None
    entry: str | None = None


class SessionCreate(BaseModel):
    tree_id: str
    version: int | None = None
    external_context: dict[str, str] = Field(default_factory=dict)


class SessionCreated(BaseModel):
    session_id: str
    tree_id: str
    tree_version: int
    current_node: str


class MessageIn(BaseModel):
    text: str = Field(min_length=1)
    strategy: Literal["arbor", "baseline"] = "arbor"


class UsageModel(BaseModel):
    input_tokens: int
    output_tokens: int
    estimated: bool


class HopModel(BaseModel):
    from_node: str
    chosen: str
    to_node: str
    scratchpad: str
    usage: UsageModel
    latency_ms: int


class TurnResultModel(BaseModel):
    strategy: Literal["arbor"] = "arbor"
    final_node: str
    hops: list[HopModel]
    message: str
    generation_reasoning: str
    total_usage: UsageModel
    total_latency_ms: int


class BaselineResultModel(BaseModel):
    strategy: Literal["baseline"] = "baseline"
    final_node: str
    claimed_node: str
    node_valid: bool
    message: str
    total_usage: UsageModel
    total_latency_ms: int


class ApiError(BaseModel):
    code: str
    message: str


_STATUS_BY_ERROR: tuple[tuple[type[TreenavError], int], ...] = (
    (NotFound, 404),
    (UnknownNode, 404),
    (SessionBusy, 409),
    (BackendError, 502),  # covers timeout and malformed-body subclasses
    (MalformedDecision, 502),
    (EvaluatorProtocolError, 502),
    (HopLimitExceeded, 502),
    (EmptyGeneration, 502),
    (StoreUnavailable, 503),
    (MalformedSource, 422),
    (MissingField, 422),
    (DuplicateKey, 422),
)


def _status_for(exc: TreenavError) -> int:
    for err_type, status in _STATUS_BY_ERROR:
        if isinstance(exc, err_type):
            return status
    return 500


def create_app(config: ServiceConfig) -> FastAPI:
    store = TreeStore(config.store_root)
    orchestrator = Orchestrator(
        store,
        OrchestratorConfig(
            backend=config.backend,
            eval_model=config.eval_model,
            generation_model=config.generation_model,
            hop_cap=config.hop_cap,
            history_window=config.history_window,
        ),
    )
    baseline = BaselineRunner(
        store,
        BaselineConfig(
            backend=config.backend,
            model=config.baseline_model,
            history_window=config.history_window,
        ),
    )

    app = FastAPI(title="treenav", version="1.0")
    app.state.store = store
    app.state.orchestrator = orchestrator
    app.state.baseline = baseline

    def require_auth(authorization: str | None = Header(default=None)) -> None:
        if not config.auth_token:
            return
        if authorization != f"Bearer {config.auth_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    guarded = [Depends(require_auth)]

    @app.exception_handler(TreenavError)
    def treenav_error_handler(_request, exc: TreenavError):
        return JSONResponse(
            status_code=_status_for(exc),
            content=ApiError(code=exc.code, message=str(exc)).model_dump(),
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/trees", status_code=202, dependencies=guarded)
    def upload_tree(body: TreeUpload):
        source = SourceDocument(
            format=SourceFormat(body.format),
            payload=body.source.encode("utf-8"),
            source_name=body.tree_id or "upload",
        )
        report = ingest(source, store, tree_id=body.tree_id, entry=body.entry)
        if not report.validation.is_valid:
            return JSONResponse(status_code=422, content=report.to_doc())
        return report.to_doc()

    @app.get("/trees/{tree_id}/versions/{version}/report", dependencies=guarded)
    def tree_report(tree_id: str, version: int):
        handle = store.load_version(tree_id, version)
        return validate(handle.tree).to_doc()

    @app.post("/sessions", response_model=SessionCreated, dependencies=guarded)
    def create_session(body: SessionCreate):
        state = orchestrator.create_session(
            body.tree_id, body.version, body.external_context
        )
        return SessionCreated(
            session_id=state.session_id,
            tree_id=state.tree_id,
            tree_version=state.tree_version,
            current_node=state.current_node,
        )

    @app.post(
        "/sessions/{session_id}/messages",
        response_model=TurnResultModel | BaselineResultModel,
        dependencies=guarded,
    )
    def post_message(session_id: str, body: MessageIn):
        if body.strategy == "baseline":
            outcome = baseline.handle_turn(session_id, body.text)
            return BaselineResultModel(
                final_node=outcome.final_node,
                claimed_node=outcome.claimed_node,
                node_valid=outcome.node_valid,
                message=outcome.message,
                total_usage=UsageModel(**outcome.total_usage.to_doc()),
                total_latency_ms=outcome.total_latency_ms,
            )
        result = orchestrator.handle_turn(session_id, body.text)
        return TurnResultModel(
            final_node=result.final_node,
            hops=[
                HopModel(
                    from_node=h.from_node,
                    chosen=h.chosen,
                    to_node=h.to_node,
                    scratchpad=h.scratchpad,
                    usage=UsageModel(**h.usage.to_doc()),
                    latency_ms=h.latency_ms,
                )
                for h in result.hops
            ],
            message=result.message,
            generation_reasoning=result.generation_reasoning,
            total_usage=UsageModel(**result.total_usage.to_doc()),
            total_latency_ms=result.total_latency_ms,
        )

    @app.get("/sessions/{session_id}/trace", dependencies=guarded)
    def session_trace(session_id: str):
        store.load_session(session_id)  # 404 for unknown sessions
        return {"session_id": session_id, "hops": store.read_trace(session_id)}

    @app.get("/sessions/{session_id}", response_model=SessionCreated, dependencies=guarded)
    def session_info(session_id: str):
        state = store.load_session(session_id)
        return SessionCreated(
            session_id=state.session_id,
            tree_id=state.tree_id,
            tree_version=state.tree_version,
            current_node=state.current_node,
        )

    return app
