"""Provider-agnostic chat-completion gateway.

One wire shape (OpenAI-style chat completions over HTTP) covers every
hosted model family used here; provider quirks belong in thin adapters, not
in callers. A scripted backend provides deterministic, network-free replies
for tests and evaluation replays.

Per-step decoding defaults: evaluation 0.0, generation 0.7, baseline 0.0 —
transition choices must be reproducible, user-facing phrasing may vary.
Timeout retries: one for evaluation, zero elsewhere; a duplicated
generation risks inconsistent phrasing, a duplicated evaluation is
idempotent at temperature 0.
"""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import httpx

from .clock import SYSTEM_CLOCK
from .errors import BackendError, BackendTimeout, MalformedResponse


class StepTag(str, Enum):
    EVALUATION = "evaluation"
    GENERATION = "generation"
    BASELINE = "baseline"


DEFAULT_TEMPERATURES: Mapping[str, float] = {
    StepTag.EVALUATION.value: 0.0,
    StepTag.GENERATION.value: 0.7,
    StepTag.BASELINE.value: 0.0,
}

TIMEOUT_RETRIES: Mapping[str, int] = {
    StepTag.EVALUATION.value: 1,
    StepTag.GENERATION.value: 0,
    StepTag.BASELINE.value: 0,
}

_ROLES = ("user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    text: str

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"message role must be one of {_ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    system_prompt: str
    messages: tuple[Message, ...]
    step_tag: StepTag
    temperature: float | None = None  # None → per-step default
    max_output_tokens: int = 2048

    def __post_init__(self):
        if not self.system_prompt.strip():
            raise ValueError("system_prompt must be non-empty")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    @property
    def resolved_temperature(self) -> float:
        if self.temperature is not None:
            return self.temperature
        return DEFAULT_TEMPERATURES[self.step_tag.value]


@dataclass(frozen=True)
class Usage:
    input_tokens: int
    output_tokens: int
    estimated: bool = False

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            input_tokens=self.input_tokens + other.input_tokens,
            output_tokens=self.output_tokens + other.output_tokens,
            estimated=self.estimated or other.estimated,
        )

    def to_doc(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "estimated": self.estimated,
        }


ZERO_USAGE = Usage(0, 0)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: Usage
    latency_ms: int

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")


TokenEstimator = Callable[[str], int]


def estimate_tokens(text: str) -> int:
    """Crude length heuristic used only when a backend omits usage."""
    return math.ceil(len(text) / 4)


@dataclass
class ScriptedReply:
    text: str
    input_tokens: int | None = None
    output_tokens: int | None = None
    delay_s: float = 0.0
    error: Exception | None = None


class ScriptedBackend:
    """Canned replies consumed in order, one independent stream per step tag.

    Never touches the network. Captures every request it serves so tests can
    assert on exact prompt bytes. A queued ``delay_s`` advances the attached
    virtual clock, giving deterministic latency figures; a queued ``error``
    is raised instead of answering.
    """

    def __init__(self, clock=None):
        self.clock = clock if clock is not None else SYSTEM_CLOCK
        self.requests: list[ChatRequest] = []
        self._queues: dict[str, deque[ScriptedReply]] = {}
        self._lock = threading.Lock()

    def queue(self, step_tag: StepTag | str, text: str, **kwargs) -> None:
        self.queue_reply(step_tag, ScriptedReply(text=text, **kwargs))

    def queue_reply(self, step_tag: StepTag | str, reply: ScriptedReply) -> None:
        tag = step_tag.value if isinstance(step_tag, StepTag) else str(step_tag)
        with self._lock:
            self._queues.setdefault(tag, deque()).append(reply)

    def pending(self, step_tag: StepTag | str) -> int:
        tag = step_tag.value if isinstance(step_tag, StepTag) else str(step_tag)
        with self._lock:
            return len(self._queues.get(tag, ()))

    def requests_for(self, step_tag: StepTag | str) -> list[ChatRequest]:
        tag = step_tag.value if isinstance(step_tag, StepTag) else str(step_tag)
        return [r for r in self.requests if r.step_tag.value == tag]

    def serve(self, request: ChatRequest, estimator: TokenEstimator) -> ChatResponse:
        with self._lock:
            queue = self._queues.get(request.step_tag.value)
            if not queue:
                raise BackendError(
                    f"scripted backend exhausted for step {request.step_tag.value!r}"
                )
            reply = queue.popleft()
            self.requests.append(request)
        if reply.delay_s and hasattr(self.clock, "advance"):
            self.clock.advance(reply.delay_s)
        if reply.error is not None:
            raise reply.error
        if reply.input_tokens is None or reply.output_tokens is None:
            usage = Usage(
                input_tokens=estimator(render_prompt_text(request)),
                output_tokens=estimator(reply.text),
                estimated=True,
            )
        else:
            usage = Usage(reply.input_tokens, reply.output_tokens)
        return ChatResponse(text=reply.text, usage=usage, latency_ms=0)


class BackendKind(str, Enum):
    HTTP = "http-chat-endpoint"
    SCRIPTED = "scripted"


@dataclass
class BackendConfig:
    kind: BackendKind
    endpoint: str = ""
    auth_token: str = ""
    timeout_s: float = 60.0
    script: ScriptedBackend | None = None
    transport: httpx.BaseTransport | None = None  # test seam for HTTP
    estimator: TokenEstimator = estimate_tokens

    def __post_init__(self):
        if self.kind is BackendKind.SCRIPTED and self.script is None:
            raise ValueError("scripted backend requires a script")
        if self.kind is BackendKind.HTTP and not self.endpoint:
            raise ValueError("http backend requires an endpoint URL")

    @property
    def clock(self):
        if self.script is not None:
            return self.script.clock
        return SYSTEM_CLOCK


def script_backend(backend: ScriptedBackend) -> BackendConfig:
    return BackendConfig(kind=BackendKind.SCRIPTED, script=backend)


def request_payload(request: ChatRequest) -> dict:
    """Exact wire-format body; also the unit tests assert isolation on."""
    messages = [{"role": "system", "content": request.system_prompt}]
    messages.extend({"role": m.role, "content": m.text} for m in request.messages)
    return {
        "model": request.model_id,
        "messages": messages,
        "temperature": request.resolved_temperature,
        "max_tokens": request.max_output_tokens,
    }


def render_prompt_text(request: ChatRequest) -> str:
    """Flat text view of the full prompt, for token estimation."""
    parts = [request.system_prompt]
    parts.extend(m.text for m in request.messages)
    return "\n".join(parts)


def _http_complete(request: ChatRequest, config: BackendConfig) -> ChatResponse:
    headers = {}
    if config.auth_token:
        headers["Authorization"] = f"Bearer {config.auth_token}"
    try:
        with httpx.Client(
            timeout=config.timeout_s, transport=config.transport, headers=headers
        ) as client:
            response = client.post(config.endpoint, json=request_payload(request))
    except httpx.TimeoutException as exc:
        raise BackendTimeout(f"backend timed out after {config.timeout_s}s") from exc
    except httpx.HTTPError as exc:
        raise BackendError(f"backend transport failure: {exc}") from exc
    if response.status_code < 200 or response.status_code >= 300:
        raise BackendError(
            f"backend returned status {response.status_code}", status=response.status_code
        )
    try:
        body = response.json()
        text = body["choices"][0]["message"]["content"]
    except (ValueError, LookupError, TypeError) as exc:
        raise MalformedResponse(f"cannot interpret backend body: {exc}") from exc
    raw_usage = body.get("usage") or {}
    if "prompt_tokens" in raw_usage and "completion_tokens" in raw_usage:
        usage = Usage(int(raw_usage["prompt_tokens"]), int(raw_usage["completion_tokens"]))
    else:
        usage = Usage(
            input_tokens=config.estimator(render_prompt_text(request)),
            output_tokens=config.estimator(text),
            estimated=True,
        )
    return ChatResponse(text=str(text), usage=usage, latency_ms=0)


def complete(request: ChatRequest, config: BackendConfig) -> ChatResponse:
    """One chat completion with wall-clock latency and timeout retry policy."""
    clock = config.clock
    attempts = 1 + TIMEOUT_RETRIES[request.step_tag.value]
    started = clock.monotonic()
    for attempt in range(attempts):
        try:
            if config.kind is BackendKind.SCRIPTED:
                assert config.script is not None
                raw = config.script.serve(request, config.estimator)
            else:
                raw = _http_complete(request, config)
        except BackendTimeout:
            if attempt + 1 >= attempts:
                raise
            continue
        latency_ms = int(round((clock.monotonic() - started) * 1000))
        return ChatResponse(text=raw.text, usage=raw.usage, latency_ms=latency_ms)
    raise AssertionError("unreachable")
