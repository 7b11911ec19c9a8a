"""Canonical domain types for decision trees stored as edge lists.

A tree is a flat, ordered list of transitions plus an entry node. The node
set is always derived from the edges, never stored separately, so the edge
list remains the single source of truth. Values are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping

from .errors import DuplicateKey, MalformedSource, MissingField, UnknownNode

NodeKey = str

STAY = "stay"


def validate_node_key(value: str, *, context: str = "node key") -> str:
    """Check a node identifier: non-empty, no surrounding whitespace."""
    if not isinstance(value, str) or value == "":
        raise ValueError(f"{context} must be a non-empty string, got {value!r}")
    if value != value.strip():
        raise ValueError(f"{context} must not carry leading/trailing whitespace: {value!r}")
    return value


@dataclass(frozen=True)
class TransitionEdge:
    """One admissible transition: the atomic unit of tree logic."""

    transition_key: str
    node_from: NodeKey
    node_to: NodeKey
    question: str
    answer: str
    extra_context: str = ""
    flags: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.transition_key:
            raise ValueError("transition_key must be non-empty")
        validate_node_key(self.node_from, context="node_from")
        validate_node_key(self.node_to, context="node_to")

    def to_doc(self) -> dict:
        return {
            "transition_key": self.transition_key,
            "node_from": self.node_from,
            "node_to": self.node_to,
            "question": self.question,
            "answer": self.answer,
            "extra_context": self.extra_context,
            "flags": dict(self.flags),
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "TransitionEdge":
        try:
            return cls(
                transition_key=doc["transition_key"],
                node_from=doc["node_from"],
                node_to=doc["node_to"],
                question=doc["question"],
                answer=doc["answer"],
                extra_context=doc.get("extra_context", ""),
                flags=dict(doc.get("flags", {})),
            )
        except KeyError as exc:
            raise MissingField(f"edge document missing field {exc}") from exc


class NodeRole(str, Enum):
    QUESTION = "question"
    GUIDANCE = "guidance"
    TERMINAL = "terminal"


@dataclass(frozen=True)
class NodeMeta:
    """Optional per-node texts; absent fields default to empty strings.

    ``role`` is a hint only: a node with zero outgoing edges is terminal
    regardless of what the hint says.
    """

    role: str = "question"
    question_explanation: str = ""
    tree_context: str = ""

    def to_doc(self) -> dict:
        return {
            "role": self.role,
            "question_explanation": self.question_explanation,
            "tree_context": self.tree_context,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "NodeMeta":
        return cls(
            role=doc.get("role", "question"),
            question_explanation=doc.get("question_explanation", ""),
            tree_context=doc.get("tree_context", ""),
        )


@dataclass(frozen=True)
class DecisionTree:
    """A versioned, validated edge-list tree.

    Edge order is significant and survives serialization round-trips
    byte-exactly. ``nodes`` is derived: entry plus every edge endpoint.
    """

    tree_id: str
    version: int
    entry: NodeKey
    edges: tuple[TransitionEdge, ...]
    node_meta: Mapping[NodeKey, NodeMeta] = field(default_factory=dict)

    def __post_init__(self):
        validate_node_key(self.entry, context="entry")
        object.__setattr__(self, "edges", tuple(self.edges))
        seen: set[str] = set()
        for edge in self.edges:
            if edge.transition_key in seen:
                raise DuplicateKey(f"duplicate transition_key {edge.transition_key!r}")
            seen.add(edge.transition_key)

    @cached_property
    def nodes(self) -> frozenset[NodeKey]:
        keys = {self.entry}
        for edge in self.edges:
            keys.add(edge.node_from)
            keys.add(edge.node_to)
        return frozenset(keys)

    @cached_property
    def adjacency(self) -> Mapping[NodeKey, tuple[TransitionEdge, ...]]:
        """Outgoing edges per node, in edge-list order; every node has a key."""
        out: dict[NodeKey, list[TransitionEdge]] = {n: [] for n in self.nodes}
        for edge in self.edges:
            out[edge.node_from].append(edge)
        return {n: tuple(es) for n, es in out.items()}

    @cached_property
    def edges_by_key(self) -> Mapping[str, TransitionEdge]:
        return {e.transition_key: e for e in self.edges}

    def meta_for(self, node: NodeKey) -> NodeMeta:
        return self.node_meta.get(node, NodeMeta())


def out_degree(tree: DecisionTree, node: NodeKey) -> int:
    """Number of transitions leaving ``node``."""
    if node not in tree.nodes:
        raise UnknownNode(f"node {node!r} not in tree {tree.tree_id!r}")
    return len(tree.adjacency[node])


def is_terminal(tree: DecisionTree, node: NodeKey) -> bool:
    """A terminal node has no outgoing edges; it ends the workflow."""
    return out_degree(tree, node) == 0


def node_role(tree: DecisionTree, node: NodeKey) -> NodeRole:
    """Effective role: terminal status is structural and wins over hints."""
    if is_terminal(tree, node):
        return NodeRole.TERMINAL
    if tree.meta_for(node).role == "guidance":
        return NodeRole.GUIDANCE
    return NodeRole.QUESTION


def node_question(tree: DecisionTree, node: NodeKey) -> str:
    """The question asked at a node.

    Questions live on edges (each transition records the prompt shown at
    it), so a node's question is taken from its first outgoing edge.
    Terminal nodes have none.
    """
    edges = tree.adjacency.get(node)
    if edges is None:
        raise UnknownNode(f"node {node!r} not in tree {tree.tree_id!r}")
    return edges[0].question if edges else ""


@dataclass(frozen=True)
class TreeStats:
    node_count: int
    edge_count: int
    max_depth: int
    mean_out_degree: float
    # The branching-only average divides by non-terminal nodes; it is
    # reported alongside because the two denominators answer different
    # questions and published figures do not always say which one they use.
    mean_out_degree_nonterminal: float


def tree_stats(tree: DecisionTree) -> TreeStats:
    """Size and shape summary; depth is the longest simple path from entry."""
    node_count = len(tree.nodes)
    edge_count = len(tree.edges)
    nonterminal = sum(1 for n in tree.nodes if tree.adjacency[n])
    return TreeStats(
        node_count=node_count,
        edge_count=edge_count,
        max_depth=_max_depth(tree),
        mean_out_degree=edge_count / node_count if node_count else 0.0,
        mean_out_degree_nonterminal=edge_count / nonterminal if nonterminal else 0.0,
    )


def _max_depth(tree: DecisionTree) -> int:
    if _is_acyclic(tree):
        return _longest_path_dag(tree)
    # Cyclic trees: depth is defined over simple paths, so fall back to
    # exhaustive DFS with backtracking. Fine for the small cyclic graphs
    # validation lets through; large production trees are acyclic.
    best = 0
    adjacency = tree.adjacency
    on_path: set[NodeKey] = {tree.entry}

    def walk(node: NodeKey, depth: int):
        nonlocal best
        best = max(best, depth)
        for edge in adjacency[node]:
            if edge.node_to not in on_path:
                on_path.add(edge.node_to)
                walk(edge.node_to, depth + 1)
                on_path.remove(edge.node_to)

    walk(tree.entry, 0)
    return best


def _is_acyclic(tree: DecisionTree) -> bool:
    indegree = {n: 0 for n in tree.nodes}
    for edge in tree.edges:
        indegree[edge.node_to] += 1
    queue = [n for n, d in indegree.items() if d == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for edge in tree.adjacency[node]:
            indegree[edge.node_to] -= 1
            if indegree[edge.node_to] == 0:
                queue.append(edge.node_to)
    return seen == len(tree.nodes)


def _longest_path_dag(tree: DecisionTree) -> int:
    order = _topological_order(tree)
    depth = {n: None for n in tree.nodes}  # type: dict[NodeKey, int | None]
    depth[tree.entry] = 0
    best = 0
    for node in order:
        d = depth[node]
        if d is None:  # unreachable from entry
            continue
        best = max(best, d)
        for edge in tree.adjacency[node]:
            if depth[edge.node_to] is None or depth[edge.node_to] < d + 1:
                depth[edge.node_to] = d + 1
    return best


def _topological_order(tree: DecisionTree) -> list[NodeKey]:
    indegree = {n: 0 for n in tree.nodes}
    for edge in tree.edges:
        indegree[edge.node_to] += 1
    queue = [n for n, d in indegree.items() if d == 0]
    order: list[NodeKey] = []
    while queue:
        node = queue.pop()
        order.append(node)
        for edge in tree.adjacency[node]:
            indegree[edge.node_to] -= 1
            if indegree[edge.node_to] == 0:
                queue.append(edge.node_to)
    return order


# --- canonical JSON document -------------------------------------------------

def tree_to_doc(tree: DecisionTree) -> dict:
    return {
        "tree_id": tree.tree_id,
        "version": tree.version,
        "entry": tree.entry,
        "edges": [e.to_doc() for e in tree.edges],
        "node_meta": {n: m.to_doc() for n, m in sorted(tree.node_meta.items())},
    }


def tree_from_doc(doc: Mapping) -> DecisionTree:
    try:
        return DecisionTree(
            tree_id=doc["tree_id"],
            version=int(doc["version"]),
            entry=doc["entry"],
            edges=tuple(TransitionEdge.from_doc(e) for e in doc["edges"]),
            node_meta={n: NodeMeta.from_doc(m) for n, m in doc.get("node_meta", {}).items()},
        )
    except KeyError as exc:
        raise MalformedSource(f"tree document missing field {exc}") from exc


def tree_to_json(tree: DecisionTree) -> str:
    """Canonical serialization: stable key order, edges in file order."""
    return json.dumps(tree_to_doc(tree), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def tree_from_json(text: str | bytes) -> DecisionTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedSource(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedSource("tree document must be a JSON object")
    return tree_from_doc(doc)


def iter_edge_docs(edges: Iterable[TransitionEdge]) -> list[dict]:
    return [e.to_doc() for e in edges]
