"""Single-prompt comparison strategy.

The whole tree is serialized into one system prompt; the model must track
its own position, evaluate the user's message against every path, and write
the reply — all in a single call returning {message, new_current_node}.
Deliberately naive: no pruning, no compression, or it stops being the
comparator it exists to be.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .edge_store import StoredTreeHandle, TreeStore
from .errors import MalformedDecision
from .llm_gateway import BackendConfig, ChatRequest, Message, StepTag, Usage, complete
from .orchestrator import GENERATION_DIRECTIVE
from .prompts import build_baseline_prompt, extract_json_object, render_conversation
from .sessions import AGENT, USER, SessionState
from .tree_core import DecisionTree


@dataclass(frozen=True)
class BaselineReply:
    message: str
    new_current_node: str  # verbatim from the model; validity checked after


@dataclass(frozen=True)
class BaselineTurnResult:
    """Outcome of one baseline call.

    ``claimed_node`` is what the model said verbatim; ``final_node`` is
    where the session actually is afterwards. They differ exactly when the
    claim named an undefined node — the turn still completes so experiment
    sweeps can score it as a navigation error rather than crash.
    """

    final_node: str
    claimed_node: str
    node_valid: bool
    message: str
    total_usage: Usage
    total_latency_ms: int

    def to_doc(self) -> dict:
        return {
            "final_node": self.final_node,
            "claimed_node": self.claimed_node,
            "node_valid": self.node_valid,
            "message": self.message,
            "total_usage": self.total_usage.to_doc(),
            "total_latency_ms": self.total_latency_ms,
        }


def serialize_tree(tree: DecisionTree) -> str:
    """Deterministic full-tree JSON for the baseline system prompt.

    Nodes carry their question texts; children carry the transition key and
    the answer that selects them, in stored edge order. Identical trees
    serialize to identical bytes.
    """
    nodes: dict[str, dict] = {}
    for key in sorted(tree.nodes):
        meta = tree.meta_for(key)
        children = [
            {
                "transition": e.transition_key,
                "key": e.node_to,
                "answer": e.answer,
                **({"extra_context": e.extra_context} if e.extra_context else {}),
            }
            for e in tree.adjacency[key]
        ]
        first = tree.adjacency[key][0].question if tree.adjacency[key] else ""
        nodes[key] = {
            "question": first,
            "question_explanation": meta.question_explanation,
            "additional_context": meta.tree_context,
            "children": children,
        }
    doc = {"entry": tree.entry, "nodes": nodes}
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)


def parse_baseline_reply(raw: str) -> BaselineReply:
    doc = extract_json_object(raw)
    if "message" not in doc or "new_current_node" not in doc:
        raise MalformedDecision("baseline reply must carry message and new_current_node")
    return BaselineReply(
        message=str(doc["message"]).strip(),
        new_current_node=str(doc["new_current_node"]).strip(),
    )


@dataclass
class BaselineConfig:
    backend: BackendConfig
    model: str = "default-model"
    temperature: float | None = None
    history_window: int | None = None
    max_output_tokens: int = 2048


class BaselineRunner:
    """Same session contract as the orchestrator, one call per turn."""

    def __init__(self, store: TreeStore, config: BaselineConfig):
        self.store = store
        self.config = config

    @property
    def clock(self):
        return self.config.backend.clock

    def build_request(self, state: SessionState, handle: StoredTreeHandle) -> ChatRequest:
        system_prompt = build_baseline_prompt(
            tree_json=serialize_tree(handle.tree),
            member_context=state.external_context,
            conversation=render_conversation(state.history, self.config.history_window),
        )
        return ChatRequest(
            model_id=self.config.model,
            system_prompt=system_prompt,
            messages=(Message(role="user", text=GENERATION_DIRECTIVE),),
            step_tag=StepTag.BASELINE,
            temperature=self.config.temperature,
            max_output_tokens=self.config.max_output_tokens,
        )

    def handle_turn(self, session_id: str, user_message: str) -> BaselineTurnResult:
        if not user_message.strip():
            raise ValueError("user_message must be non-empty")
        with self.store.exclusive_session(session_id):
            before = self.store.load_session(session_id)
            handle = self.store.load_version(before.tree_id, before.tree_version)
            started = self.clock.monotonic()
            state = before.with_message(USER, user_message, self.clock.time())

            response = complete(self.build_request(state, handle), self.config.backend)
            reply = parse_baseline_reply(response.text)

            node_valid = reply.new_current_node in handle.tree.nodes
            final_node = reply.new_current_node if node_valid else before.current_node
            total_latency_ms = int(round((self.clock.monotonic() - started) * 1000))
            state = (
                state.at_node(final_node)
                .with_message(AGENT, reply.message, self.clock.time())
                .next_turn()
            )
            self.store.persist_session(state)
            return BaselineTurnResult(
                final_node=final_node,
                claimed_node=reply.new_current_node,
                node_valid=node_valid,
                message=reply.message,
                total_usage=response.usage,
                total_latency_ms=total_latency_ms,
            )
