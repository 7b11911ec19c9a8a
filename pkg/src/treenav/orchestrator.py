"""The stateful two-step turn loop.

Step one evaluates transitions: retrieve the current node's outgoing edges,
ask the model to either name one of them or stay, and repeat from the new
node until it stays, hits a terminal, or exhausts the hop cap — so a single
user message can advance several nodes. Step two is an independent call
that writes the user-facing message, with the evaluator's scratchpad handed
over so the reply reflects why the conversation stands where it does.

A turn is atomic: state is persisted once, after both steps succeed, so a
failed turn leaves the stored session exactly as it was.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .edge_store import StoredTreeHandle, TreeStore, outgoing_edges
from .errors import (
    EmptyGeneration,
    EvaluatorProtocolError,
    HopLimitExceeded,
    InvalidTransition,
    MalformedDecision,
)
from .llm_gateway import (
    BackendConfig,
    ChatRequest,
    ChatResponse,
    Message,
    StepTag,
    Usage,
    ZERO_USAGE,
    complete,
)
from .prompts import (
    build_evaluator_prompt,
    build_generation_prompt,
    extract_json_object,
    render_conversation,
)
from .sessions import AGENT, USER, SessionState, new_session_id
from .tree_core import NodeKey, node_question, node_role

# Constant directives keep request bytes stable for a given session state;
# the full conversation lives in the system prompt.
EVALUATOR_DIRECTIVE = "Evaluate the current node now and reply with the JSON object."
GENERATION_DIRECTIVE = "Write the next message now."
STAY = "stay"


@dataclass(frozen=True)
class EvaluatorDecision:
    scratchpad: str
    next_state: str  # the stay key (current node) or a candidate transition_key

    def is_stay(self, stay_key: str) -> bool:
        return self.next_state == stay_key


@dataclass(frozen=True)
class HopRecord:
    from_node: NodeKey
    chosen: str  # "stay" or a transition_key
    to_node: NodeKey
    scratchpad: str
    usage: Usage
    latency_ms: int

    def __post_init__(self):
        if self.chosen == STAY and self.to_node != self.from_node:
            raise ValueError("a stay hop cannot move")

    def to_doc(self) -> dict:
        return {
            "from_node": self.from_node,
            "chosen": self.chosen,
            "to_node": self.to_node,
            "scratchpad": self.scratchpad,
            "usage": self.usage.to_doc(),
            "latency_ms": self.latency_ms,
        }


@dataclass(frozen=True)
class TurnResult:
    final_node: NodeKey
    hops: tuple[HopRecord, ...]
    message: str
    generation_reasoning: str
    total_usage: Usage
    total_latency_ms: int

    def to_doc(self) -> dict:
        return {
            "final_node": self.final_node,
            "hops": [h.to_doc() for h in self.hops],
            "message": self.message,
            "generation_reasoning": self.generation_reasoning,
            "total_usage": self.total_usage.to_doc(),
            "total_latency_ms": self.total_latency_ms,
        }


@dataclass
class OrchestratorConfig:
    backend: BackendConfig
    eval_model: str = "default-model"
    generation_model: str = "default-model"  # steps may use different models
    eval_temperature: float | None = None
    generation_temperature: float | None = None
    hop_cap: int = 25
    history_window: int | None = None  # None → full history
    max_output_tokens: int = 2048


def parse_evaluator_output(
    raw: str, candidates: set[str], stay_key: str
) -> EvaluatorDecision:
    """Read the strict two-field reply; anything else is a protocol breach."""
    doc = extract_json_object(raw)
    if "next_state" not in doc:
        raise MalformedDecision("evaluator reply lacks next_state")
    next_state = str(doc["next_state"]).strip()
    scratchpad = str(doc.get("scratchpad", ""))
    if next_state != stay_key and next_state not in candidates:
        raise InvalidTransition(
            f"next_state {next_state!r} is not an offered path", next_state=next_state
        )
    return EvaluatorDecision(scratchpad=scratchpad, next_state=next_state)


def parse_generation_output(raw: str) -> tuple[str, str]:
    """Message plus optional reasoning; plain text is taken as the message."""
    try:
        doc = extract_json_object(raw)
    except MalformedDecision:
        return raw.strip(), ""
    if "message" in doc:
        return str(doc["message"]).strip(), str(doc.get("reasoning", ""))
    return raw.strip(), ""


class Orchestrator:
    def __init__(self, store: TreeStore, config: OrchestratorConfig):
        self.store = store
        self.config = config

    @property
    def clock(self):
        return self.config.backend.clock

    # -- session lifecycle ---------------------------------------------------

    def create_session(
        self,
        tree_id: str,
        version: int | None = None,
        external_context: Mapping[str, str] | None = None,
        session_id: str | None = None,
    ) -> SessionState:
        handle = self.store.load_version(tree_id, version)
        state = SessionState(
            session_id=session_id or new_session_id(),
            tree_id=tree_id,
            tree_version=handle.version,
            current_node=handle.tree.entry,
            external_context=dict(external_context or {}),
        )
        self.store.persist_session(state)
        return state

    # -- step one: transition evaluation ---------------------------------------

    def _conversation_text(self, state: SessionState) -> str:
        return render_conversation(state.history, self.config.history_window)

    def _evaluate_once(
        self, system_prompt: str, extra: Sequence[Message]
    ) -> ChatResponse:
        request = ChatRequest(
            model_id=self.config.eval_model,
            system_prompt=system_prompt,
            messages=(Message(role="user", text=EVALUATOR_DIRECTIVE), *extra),
            step_tag=StepTag.EVALUATION,
            temperature=self.config.eval_temperature,
            max_output_tokens=self.config.max_output_tokens,
        )
        return complete(request, self.config.backend)

    def evaluate_transitions(
        self, state: SessionState, handle: StoredTreeHandle
    ) -> tuple[NodeKey, list[HopRecord]]:
        """Iterate retrieval + evaluation until the model stays or a terminal
        node is reached; the latest user message is already in history."""
        tree = handle.tree
        current = state.current_node
        conversation = self._conversation_text(state)
        hops: list[HopRecord] = []
        while True:
            candidates = outgoing_edges(handle, current)
            if not candidates:
                break  # arrived at a terminal mid-turn: nothing to evaluate
            if len(hops) >= self.config.hop_cap:
                raise HopLimitExceeded(
                    f"turn exceeded {self.config.hop_cap} hops at node {current}"
                )
            meta = tree.meta_for(current)
            system_prompt = build_evaluator_prompt(
                stay_key=current,
                question=node_question(tree, current),
                question_explanation=meta.question_explanation,
                tree_context=meta.tree_context,
                candidates=candidates,
                member_context=state.external_context,
                conversation=conversation,
            )
            by_key = {e.transition_key: e for e in candidates}
            response = self._evaluate_once(system_prompt, ())
            usage = response.usage
            latency = response.latency_ms
            try:
                decision = parse_evaluator_output(response.text, set(by_key), current)
            except (MalformedDecision, InvalidTransition) as first_error:
                # one corrective re-prompt naming the legal keys, then give up
                corrective = Message(
                    role="user",
                    text=(
                        "Your reply was not accepted: "
                        f"{first_error}. Reply with exactly one JSON object whose "
                        f"next_state is '{current}' or one of: "
                        f"{sorted(by_key)}."
                    ),
                )
                retry = self._evaluate_once(
                    system_prompt,
                    (Message(role="assistant", text=response.text), corrective),
                )
                usage = usage + retry.usage
                latency += retry.latency_ms
                try:
                    decision = parse_evaluator_output(retry.text, set(by_key), current)
                except (MalformedDecision, InvalidTransition) as second_error:
                    raise EvaluatorProtocolError(
                        f"evaluator violated the reply protocol twice: {second_error}"
                    ) from second_error
            if decision.is_stay(current):
                hops.append(
                    HopRecord(
                        from_node=current,
                        chosen=STAY,
                        to_node=current,
                        scratchpad=decision.scratchpad,
                        usage=usage,
                        latency_ms=latency,
                    )
                )
                break
            edge = by_key[decision.next_state]
            hops.append(
                HopRecord(
                    from_node=current,
                    chosen=edge.transition_key,
                    to_node=edge.node_to,
                    scratchpad=decision.scratchpad,
                    usage=usage,
                    latency_ms=latency,
                )
            )
            current = edge.node_to
        return current, hops

    # -- step two: message generation -----------------------------------------

    def generate_message(
        self,
        state: SessionState,
        handle: StoredTreeHandle,
        final_node: NodeKey,
        evaluator_scratchpad: str,
    ) -> tuple[str, str, Usage, int]:
        tree = handle.tree
        meta = tree.meta_for(final_node)
        system_prompt = build_generation_prompt(
            node_role(tree, final_node),
            question=node_question(tree, final_node),
            question_explanation=meta.question_explanation,
            tree_context=meta.tree_context,
            member_context=state.external_context,
            conversation=self._conversation_text(state),
            evaluator_scratchpad=evaluator_scratchpad,
        )
        request = ChatRequest(
            model_id=self.config.generation_model,
            system_prompt=system_prompt,
            messages=(Message(role="user", text=GENERATION_DIRECTIVE),),
            step_tag=StepTag.GENERATION,
            temperature=self.config.generation_temperature,
            max_output_tokens=self.config.max_output_tokens,
        )
        response = complete(request, self.config.backend)
        message, reasoning = parse_generation_output(response.text)
        if not message:
            raise EmptyGeneration("generation step produced an empty message")
        return message, reasoning, response.usage, response.latency_ms

    # -- the full turn -----------------------------------------------------------

    def handle_turn(self, session_id: str, user_message: str) -> TurnResult:
        if not user_message.strip():
            raise ValueError("user_message must be non-empty")
        with self.store.exclusive_session(session_id):
            before = self.store.load_session(session_id)
            handle = self.store.load_version(before.tree_id, before.tree_version)
            started = self.clock.monotonic()
            state = before.with_message(USER, user_message, self.clock.time())

            hops: list[HopRecord] = []
            final_node = state.current_node
            scratchpad = ""
            if outgoing_edges(handle, state.current_node):
                final_node, hops = self.evaluate_transitions(state, handle)
                if hops:
                    scratchpad = hops[-1].scratchpad

            message, reasoning, gen_usage, _ = self.generate_message(
                state, handle, final_node, scratchpad
            )

            total_usage = sum((h.usage for h in hops), ZERO_USAGE) + gen_usage
            total_latency_ms = int(round((self.clock.monotonic() - started) * 1000))
            state = (
                state.at_node(final_node)
                .with_message(AGENT, message, self.clock.time())
                .next_turn()
            )
            # single persist: a failure anywhere above leaves the stored
            # session at its pre-turn state
            self.store.persist_session(state)
            self.store.append_trace(
                session_id,
                [{"turn": state.turn_counter, **h.to_doc()} for h in hops],
            )
            return TurnResult(
                final_node=final_node,
                hops=tuple(hops),
                message=message,
                generation_reasoning=reasoning,
                total_usage=total_usage,
                total_latency_ms=total_latency_ms,
            )
