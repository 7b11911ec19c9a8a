"""Deterministic synthetic trees, datasets, and ground-truth scripts.

Everything here exists so the loop and the metrics can be exercised at
realistic scale with zero network calls: trees of any size with a fixed
entry-local structure, annotated datasets sampled from a tree, and scripted
backends that answer every evaluation with the known-correct transition.

All output is a pure function of (parameters, seed).
"""

from __future__ import annotations

import random
from collections import deque
from typing import Callable

from .clock import VirtualClock
from .eval_harness import AnnotatedTurn, Strategy
from .errors import DatasetError
from .llm_gateway import BackendConfig, ScriptedBackend, script_backend
from .sessions import HistoryEntry
from .tree_core import DecisionTree, NodeMeta, TransitionEdge

ENTRY_CHILDREN = 3  # entry out-degree is fixed so entry-local prompts match across sizes


def _node_key(i: int) -> str:
    return f"n{i:04d}"


def _question_for(i: int) -> str:
    return f"q{i:04d}: which option applies at step {i}?"


def generate_tree(
    node_count: int,
    edge_count: int,
    seed: int = 7,
    tree_id: str = "synthetic",
) -> DecisionTree:
    """Random connected DAG with ``node_count`` nodes and ``edge_count`` edges.

    A spine parents every node to a lower-indexed one, so nothing is
    orphaned; extra edges only run forward, so no cycles exist. Node 0 is
    the entry with exactly ENTRY_CHILDREN fixed children (same keys, texts,
    and order whatever the size); the highest-indexed node is never a
    source, so at least one terminal always exists.
    """
    if node_count < ENTRY_CHILDREN + 2:
        raise ValueError(f"need at least {ENTRY_CHILDREN + 2} nodes")
    if edge_count < node_count - 1:
        raise ValueError("need at least node_count - 1 edges for connectivity")
    max_extra = (node_count - 1) * (node_count - 2) // 2 - (node_count - 1 - ENTRY_CHILDREN)
    if edge_count - (node_count - 1) > max_extra:
        raise ValueError("edge_count exceeds what a forward DAG of this size can hold")

    rng = random.Random(seed)
    pairs: set[tuple[int, int]] = set()
    edges: list[TransitionEdge] = []

    def add_edge(key: str, a: int, b: int) -> None:
        pairs.add((a, b))
        edges.append(
            TransitionEdge(
                transition_key=key,
                node_from=_node_key(a),
                node_to=_node_key(b),
                question=_question_for(a),
                answer=f"answer-{b:04d}",
                extra_context=f"note {b}" if b % 5 == 0 else "",
                flags={"risk": "low"} if b % 13 == 0 else {},
            )
        )

    for i in range(1, node_count):
        parent = 0 if i <= ENTRY_CHILDREN else rng.randint(1, i - 1)
        add_edge(f"t{i:04d}", parent, i)

    extra_needed = edge_count - (node_count - 1)
    k = 0
    while k < extra_needed:
        a = rng.randint(1, node_count - 2)
        b = rng.randint(a + 1, node_count - 1)
        if (a, b) in pairs:
            continue
        add_edge(f"x{k:04d}", a, b)
        k += 1

    sources = {e.node_from for e in edges}
    node_meta = {}
    for i in range(node_count):
        key = _node_key(i)
        if key not in sources:
            role = "terminal"
        elif i % 7 == 3:
            role = "guidance"
        else:
            role = "question"
        node_meta[key] = NodeMeta(
            role=role,
            question_explanation=f"Clarifies step {i}.",
            tree_context=f"context {i}" if i % 5 == 0 else "",
        )
    return DecisionTree(
        tree_id=tree_id,
        version=0,
        entry=_node_key(0),
        edges=tuple(edges),
        node_meta=node_meta,
    )


def shortest_path_keys(tree: DecisionTree, src: str, dst: str) -> list[str]:
    """Transition keys along a shortest directed path; [] when src == dst."""
    if src == dst:
        return []
    seen = {src}
    queue: deque[tuple[str, tuple[str, ...]]] = deque([(src, ())])
    while queue:
        node, path = queue.popleft()
        for edge in tree.adjacency[node]:
            if edge.node_to in seen:
                continue
            if edge.node_to == dst:
                return list(path + (edge.transition_key,))
            seen.add(edge.node_to)
            queue.append((edge.node_to, path + (edge.transition_key,)))
    raise DatasetError(f"no path from {src} to {dst}")


def generate_dataset(
    tree: DecisionTree,
    turns: int,
    seed: int = 11,
    max_hops: int = 3,
) -> list[AnnotatedTurn]:
    """Annotated turns sampled from the tree: start node, user message, and
    the node a correct strategy should end on (0..max_hops forward)."""
    rng = random.Random(seed)
    non_terminal = sorted(n for n in tree.nodes if tree.adjacency[n])
    out: list[AnnotatedTurn] = []
    for k in range(turns):
        current = rng.choice(non_terminal)
        target = current
        hops = rng.randint(0, max_hops)
        for _ in range(hops):
            candidates = tree.adjacency[target]
            if not candidates:
                break
            target = rng.choice(candidates).node_to
        prefix: list[HistoryEntry] = []
        for p in range(rng.randint(0, 2)):
            prefix.append(HistoryEntry("user", f"earlier user line {p}", 2 * p))
            prefix.append(HistoryEntry("agent", f"earlier agent line {p}", 2 * p + 1))
        out.append(
            AnnotatedTurn(
                turn_id=f"turn-{k:03d}",
                conversation_prefix=tuple(prefix),
                external_context={"member_name": f"User {k % 9}", "cohort": "synthetic"},
                current_node=current,
                target_node=target,
                user_message=f"my answer for step {k}",
            )
        )
    return out


def scripted_ground_truth(
    tree: DecisionTree,
    strategy: Strategy | str = Strategy.ARBOR,
    *,
    eval_delay_s: float = 0.05,
    generation_delay_s: float = 0.10,
    input_tokens: int = 120,
    output_tokens: int = 30,
) -> Callable[[AnnotatedTurn, int], BackendConfig]:
    """Backend factory answering every turn with the known-correct moves.

    Each (turn, run) gets a fresh scripted backend on its own virtual clock,
    so latency and usage come out identical on every run. For the iterative
    strategy it scripts one reply per hop along the shortest path plus a
    final stay when the target still has outgoing edges; for the baseline,
    a single reply naming the target node.
    """
    strategy = Strategy(strategy)

    def factory(turn: AnnotatedTurn, run_index: int) -> BackendConfig:
        backend = ScriptedBackend(clock=VirtualClock())
        if strategy is Strategy.ARBOR:
            for key in shortest_path_keys(tree, turn.current_node, turn.target_node):
                backend.queue(
                    "evaluation",
                    f'{{"scratchpad": "took {key}", "next_state": "{key}"}}',
                    delay_s=eval_delay_s,
                    input_tokens=input_tokens,
                    output_tokens=output_tokens,
                )
            if tree.adjacency[turn.target_node]:
                backend.queue(
                    "evaluation",
                    f'{{"scratchpad": "waiting here", "next_state": "{turn.target_node}"}}',
                    delay_s=eval_delay_s,
                    input_tokens=input_tokens,
                    output_tokens=output_tokens,
                )
            backend.queue(
                "generation",
                f"Scripted reply for {turn.turn_id}.",
                delay_s=generation_delay_s,
                input_tokens=input_tokens,
                output_tokens=output_tokens,
            )
        else:
            backend.queue(
                "baseline",
                f'{{"message": "Scripted reply for {turn.turn_id}.", '
                f'"new_current_node": "{turn.target_node}"}}',
                delay_s=generation_delay_s,
                input_tokens=input_tokens,
                output_tokens=output_tokens,
            )
        return script_backend(backend)

    return factory
