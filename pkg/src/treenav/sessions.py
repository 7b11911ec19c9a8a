"""Conversation session state: position in the tree plus dialogue history.

Sessions pin the tree version they started on, so re-ingesting a tree never
disturbs conversations already in flight. State is immutable; turn logic
produces new values via :func:`dataclasses.replace`-style helpers.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from typing import Mapping

from .tree_core import NodeKey

AGENT = "agent"
USER = "user"


@dataclass(frozen=True)
class HistoryEntry:
    speaker: str  # agent | user
    text: str
    timestamp: float

    def to_doc(self) -> dict:
        return {"speaker": self.speaker, "text": self.text, "timestamp": self.timestamp}

    @classmethod
    def from_doc(cls, doc: Mapping) -> "HistoryEntry":
        return cls(
            speaker=doc["speaker"],
            text=doc["text"],
            timestamp=float(doc["timestamp"]),
        )


@dataclass(frozen=True)
class SessionState:
    session_id: str
    tree_id: str
    tree_version: int
    current_node: NodeKey
    history: tuple[HistoryEntry, ...] = ()
    external_context: Mapping[str, str] = field(default_factory=dict)
    turn_counter: int = 0

    def with_message(self, speaker: str, text: str, timestamp: float) -> "SessionState":
        entry = HistoryEntry(speaker=speaker, text=text, timestamp=timestamp)
        return replace(self, history=self.history + (entry,))

    def at_node(self, node: NodeKey) -> "SessionState":
        return replace(self, current_node=node)

    def next_turn(self) -> "SessionState":
        return replace(self, turn_counter=self.turn_counter + 1)

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "tree_id": self.tree_id,
            "tree_version": self.tree_version,
            "current_node": self.current_node,
            "history": [h.to_doc() for h in self.history],
            "external_context": dict(self.external_context),
            "turn_counter": self.turn_counter,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "SessionState":
        return cls(
            session_id=doc["session_id"],
            tree_id=doc["tree_id"],
            tree_version=int(doc["tree_version"]),
            current_node=doc["current_node"],
            history=tuple(HistoryEntry.from_doc(h) for h in doc["history"]),
            external_context=dict(doc.get("external_context", {})),
            turn_counter=int(doc.get("turn_counter", 0)),
        )


def new_session_id() -> str:
    return uuid.uuid4().hex
