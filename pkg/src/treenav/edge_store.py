"""Versioned persistence and node-local retrieval of edge lists.

This is the mechanism that bounds per-turn context: a turn touches only the
outgoing edges of one node, never the whole tree. Layout on disk:

    trees/{tree_id}/{version}.json   canonical tree serialization
    sessions/{session_id}.json       session state
    traces/{session_id}.jsonl        one JSON line per hop

Writes go through a temp file and ``os.replace`` so readers never observe a
half-written document.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from contextlib import contextmanager
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from .errors import NotFound, SessionBusy, StoreUnavailable, UnknownNode
from .sessions import SessionState
from .tree_core import DecisionTree, NodeKey, TransitionEdge, tree_from_json, tree_to_json

_VERSION_FILE = re.compile(r"^(\d+)\.json$")
_SAFE_ID = re.compile(r"^[A-Za-z0-9_.-]+$")


def _check_id(value: str, what: str) -> str:
    if not _SAFE_ID.match(value):
        raise ValueError(f"{what} {value!r} is not filesystem-safe")
    return value


@dataclass(frozen=True)
class StoredTreeHandle:
    """Immutable view of one stored tree version with a node-keyed index."""

    tree: DecisionTree

    @property
    def tree_id(self) -> str:
        return self.tree.tree_id

    @property
    def version(self) -> int:
        return self.tree.version

    @cached_property
    def index(self) -> Mapping[NodeKey, tuple[TransitionEdge, ...]]:
        return self.tree.adjacency


def outgoing_edges(handle: StoredTreeHandle, node: NodeKey) -> list[TransitionEdge]:
    """All transitions leaving ``node``, in stored order; [] for terminals."""
    try:
        return list(handle.index[node])
    except KeyError:
        raise UnknownNode(f"node {node!r} not in tree {handle.tree_id} v{handle.version}") from None


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


class TreeStore:
    """File-backed store; safe for concurrent readers, one writer per tree.

    Per-session locks give turn execution its mutual exclusion; lock objects
    live in memory, so exclusion holds within one process (the service runs
    single-process by design).
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._registry_lock = threading.Lock()
        self._tree_locks: dict[str, threading.Lock] = {}
        self._session_locks: dict[str, threading.Lock] = {}

    # -- lock registries ---------------------------------------------------

    def _tree_lock(self, tree_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._tree_locks.setdefault(tree_id, threading.Lock())

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._session_locks.setdefault(session_id, threading.Lock())

    @contextmanager
    def exclusive_session(self, session_id: str):
        """Non-blocking claim of a session for one turn; busy → SessionBusy."""
        lock = self._session_lock(session_id)
        if not lock.acquire(blocking=False):
            raise SessionBusy(f"a turn is already in flight for session {session_id}")
        try:
            yield
        finally:
            lock.release()

    # -- trees ---------------------------------------------------------------

    def _tree_dir(self, tree_id: str) -> Path:
        return self.root / "trees" / _check_id(tree_id, "tree_id")

    def list_versions(self, tree_id: str) -> list[int]:
        try:
            names = os.listdir(self._tree_dir(tree_id))
        except FileNotFoundError:
            return []
        found = [int(m.group(1)) for n in names if (m := _VERSION_FILE.match(n))]
        return sorted(found)

    def latest_version(self, tree_id: str) -> int | None:
        versions = self.list_versions(tree_id)
        return versions[-1] if versions else None

    def put_tree(self, tree: DecisionTree) -> int:
        """Store under the next version number; returns the assigned version."""
        with self._tree_lock(tree.tree_id):
            version = (self.latest_version(tree.tree_id) or 0) + 1
            stored = replace(tree, version=version)
            path = self._tree_dir(tree.tree_id) / f"{version}.json"
            try:
                _atomic_write(path, tree_to_json(stored))
            except OSError as exc:
                raise StoreUnavailable(f"cannot write {path}: {exc}") from exc
            return version

    def load_version(self, tree_id: str, version: int | None = None) -> StoredTreeHandle:
        if version is None:
            version = self.latest_version(tree_id)
            if version is None:
                raise NotFound(f"no versions stored for tree {tree_id!r}")
        path = self._tree_dir(tree_id) / f"{version}.json"
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise NotFound(f"tree {tree_id!r} version {version} not found") from None
        except OSError as exc:
            raise StoreUnavailable(f"cannot read {path}: {exc}") from exc
        return StoredTreeHandle(tree=tree_from_json(text))

    def raw_tree_bytes(self, tree_id: str, version: int) -> bytes:
        path = self._tree_dir(tree_id) / f"{version}.json"
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"tree {tree_id!r} version {version} not found") from None

    # -- sessions ------------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{_check_id(session_id, 'session_id')}.json"

    def persist_session(self, state: SessionState) -> None:
        text = json.dumps(state.to_doc(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        try:
            _atomic_write(self._session_path(state.session_id), text)
        except OSError as exc:
            raise StoreUnavailable(f"cannot persist session {state.session_id}: {exc}") from exc

    def load_session(self, session_id: str) -> SessionState:
        try:
            text = self._session_path(session_id).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise NotFound(f"session {session_id!r} not found") from None
        except OSError as exc:
            raise StoreUnavailable(f"cannot read session {session_id}: {exc}") from exc
        return SessionState.from_doc(json.loads(text))

    # -- traces ----------------------------------------------------------------

    def _trace_path(self, session_id: str) -> Path:
        return self.root / "traces" / f"{_check_id(session_id, 'session_id')}.jsonl"

    def append_trace(self, session_id: str, records: Iterable[Mapping]) -> None:
        lines = [json.dumps(dict(r), sort_keys=True, ensure_ascii=False) for r in records]
        if not lines:
            return
        path = self._trace_path(session_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise StoreUnavailable(f"cannot append trace for {session_id}: {exc}") from exc

    def read_trace(self, session_id: str) -> list[dict]:
        """Hop records across all turns; a session with no hops yields []."""
        try:
            text = self._trace_path(session_id).read_text(encoding="utf-8")
        except FileNotFoundError:
            return []
        return [json.loads(line) for line in text.splitlines() if line.strip()]
