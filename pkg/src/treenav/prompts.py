"""Prompt construction and structured-reply parsing.

Templates are plain text files with double-brace placeholders, one file per
step: transition evaluation, three generation variants selected by node
role, and the single-prompt baseline. Rendering is deterministic — same
inputs, same bytes — which the context-size tests rely on.
"""

from __future__ import annotations

import json
from typing import Mapping, Sequence

from jinja2 import Environment, PackageLoader, StrictUndefined

from .errors import MalformedDecision
from .llm_gateway import Message
from .sessions import HistoryEntry
from .tree_core import NodeRole, TransitionEdge

_env = Environment(
    loader=PackageLoader("treenav", "templates"),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)

GENERATION_TEMPLATES: Mapping[NodeRole, str] = {
    NodeRole.QUESTION: "generation_question.txt",
    NodeRole.GUIDANCE: "generation_guidance.txt",
    NodeRole.TERMINAL: "generation_terminal.txt",
}


def render_conversation(
    history: Sequence[HistoryEntry], window_exchanges: int | None = None
) -> str:
    """Speaker-prefixed transcript; optionally only the last K exchanges."""
    entries = list(history)
    if window_exchanges is not None:
        entries = entries[-2 * window_exchanges :]
    return "\n".join(f"{entry.speaker}: {entry.text}" for entry in entries)


def history_messages(history: Sequence[HistoryEntry]) -> tuple[Message, ...]:
    role_of = {"user": "user", "agent": "assistant"}
    return tuple(Message(role=role_of[h.speaker], text=h.text) for h in history)


def render_candidates(edges: Sequence[TransitionEdge]) -> str:
    """Candidate paths as a JSON array, in stored edge order."""
    docs = []
    for edge in edges:
        doc: dict = {"key": edge.transition_key, "answer": edge.answer}
        if edge.extra_context:
            doc["extra_context"] = edge.extra_context
        if edge.flags:
            doc["flags"] = dict(edge.flags)
        docs.append(doc)
    return json.dumps(docs, ensure_ascii=False)


def build_evaluator_prompt(
    *,
    stay_key: str,
    question: str,
    question_explanation: str,
    tree_context: str,
    candidates: Sequence[TransitionEdge],
    member_context: Mapping[str, str],
    conversation: str,
) -> str:
    return _env.get_template("evaluator.txt").render(
        stay_key=stay_key,
        question=question,
        question_explanation=question_explanation,
        tree_context=tree_context,
        nodes=render_candidates(candidates),
        member_context=dict(member_context),
        conversation=conversation,
    )


def build_generation_prompt(
    role: NodeRole,
    *,
    question: str,
    question_explanation: str,
    tree_context: str,
    member_context: Mapping[str, str],
    conversation: str,
    evaluator_scratchpad: str,
) -> str:
    template = _env.get_template(GENERATION_TEMPLATES[role])
    return template.render(
        question=question,
        question_explanation=question_explanation,
        tree_context=tree_context,
        member_context=dict(member_context),
        conversation=conversation,
        evaluator_scratchpad=evaluator_scratchpad,
    )


def build_baseline_prompt(
    *,
    tree_json: str,
    member_context: Mapping[str, str],
    conversation: str,
) -> str:
    return _env.get_template("baseline.txt").render(
        tree_json=tree_json,
        member_context=dict(member_context),
        conversation=conversation,
    )


def extract_json_object(text: str) -> dict:
    """First balanced, parseable JSON object embedded anywhere in ``text``.

    Models wrap structured replies in prose or code fences often enough that
    a bare ``json.loads`` is not an option.
    """
    for start, opener in enumerate(text):
        if opener != "{":
            continue
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            c = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
            elif c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    try:
                        doc = json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(doc, dict):
                        return doc
                    break
        # keep scanning from the next opening brace
    raise MalformedDecision("reply contains no parseable JSON object")
