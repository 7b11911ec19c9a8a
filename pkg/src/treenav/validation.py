"""Structural graph validation run before a tree is indexed.

Three checks gate ingestion: orphan (unreachable) nodes, reference
integrity of edge endpoints, and unescapable loops — cyclic strongly
connected components with no edge leaving the component. All functions are
pure and operate on immutable trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .tree_core import DecisionTree, NodeKey, TransitionEdge


@dataclass(frozen=True)
class SccPartition:
    """Disjoint node sets covering the graph; one set per SCC."""

    components: tuple[frozenset[NodeKey], ...]

    def component_of(self, node: NodeKey) -> frozenset[NodeKey]:
        for comp in self.components:
            if node in comp:
                return comp
        raise KeyError(node)


@dataclass(frozen=True)
class ValidationReport:
    orphans: frozenset[NodeKey] = frozenset()
    dangling_edges: tuple[tuple[str, NodeKey], ...] = ()
    unescapable_loops: tuple[frozenset[NodeKey], ...] = ()

    @property
    def is_valid(self) -> bool:
        return not (self.orphans or self.dangling_edges or self.unescapable_loops)

    def to_doc(self) -> dict:
        return {
            "is_valid": self.is_valid,
            "orphans": sorted(self.orphans),
            "dangling_edges": [list(pair) for pair in self.dangling_edges],
            "unescapable_loops": [sorted(loop) for loop in self.unescapable_loops],
        }


def detect_orphans(tree: DecisionTree) -> frozenset[NodeKey]:
    """Nodes with no directed path from the entry; the entry itself never counts."""
    reachable = {tree.entry}
    frontier = [tree.entry]
    while frontier:
        node = frontier.pop()
        for edge in tree.adjacency[node]:
            if edge.node_to not in reachable:
                reachable.add(edge.node_to)
                frontier.append(edge.node_to)
    return frozenset(tree.nodes - reachable)


def check_reference_integrity(
    edges: Sequence[TransitionEdge], nodes: Iterable[NodeKey]
) -> list[tuple[str, NodeKey]]:
    """Edges whose endpoints fall outside the defined node set.

    ``nodes`` is the universe of defined identifiers. For trees whose node
    set is derived from the edges themselves the check holds by
    construction; it bites when a source declares its nodes explicitly.
    """
    defined = set(nodes)
    dangling: list[tuple[str, NodeKey]] = []
    for edge in edges:
        if edge.node_from not in defined:
            dangling.append((edge.transition_key, edge.node_from))
        if edge.node_to not in defined:
            dangling.append((edge.transition_key, edge.node_to))
    return dangling


def kosaraju_scc(tree: DecisionTree) -> SccPartition:
    """Strongly connected components via two depth-first passes.

    Pass one records finish order on the forward graph; pass two sweeps the
    transposed graph in reverse finish order. Iterative stacks keep deep
    trees off the recursion limit. The partition is independent of
    edge-list order.
    """
    order = sorted(tree.nodes)
    forward: dict[NodeKey, list[NodeKey]] = {n: [] for n in order}
    transposed: dict[NodeKey, list[NodeKey]] = {n: [] for n in order}
    for edge in tree.edges:
        forward[edge.node_from].append(edge.node_to)
        transposed[edge.node_to].append(edge.node_from)
    for n in order:
        forward[n].sort()
        transposed[n].sort()

    finish: list[NodeKey] = []
    visited: set[NodeKey] = set()
    for start in order:
        if start in visited:
            continue
        stack: list[tuple[NodeKey, int]] = [(start, 0)]
        visited.add(start)
        while stack:
            node, i = stack.pop()
            if i < len(forward[node]):
                stack.append((node, i + 1))
                nxt = forward[node][i]
                if nxt not in visited:
                    visited.add(nxt)
                    stack.append((nxt, 0))
            else:
                finish.append(node)

    components: list[frozenset[NodeKey]] = []
    assigned: set[NodeKey] = set()
    for start in reversed(finish):
        if start in assigned:
            continue
        members = [start]
        assigned.add(start)
        stack2 = [start]
        while stack2:
            node = stack2.pop()
            for prev in transposed[node]:
                if prev not in assigned:
                    assigned.add(prev)
                    members.append(prev)
                    stack2.append(prev)
        components.append(frozenset(members))
    return SccPartition(components=tuple(components))


def detect_unescapable_loops(tree: DecisionTree) -> list[frozenset[NodeKey]]:
    """Cyclic SCCs with zero edges leaving the component.

    A size-1 component counts only with an explicit self-loop: a terminal
    node is not a loop.
    """
    partition = kosaraju_scc(tree)
    self_loops = {e.node_from for e in tree.edges if e.node_from == e.node_to}
    flagged: list[frozenset[NodeKey]] = []
    for comp in partition.components:
        cyclic = len(comp) > 1 or next(iter(comp)) in self_loops
        if not cyclic:
            continue
        escapes = any(
            edge.node_to not in comp
            for node in comp
            for edge in tree.adjacency[node]
        )
        if not escapes:
            flagged.append(comp)
    return flagged


def validate(
    tree: DecisionTree, declared_nodes: Iterable[NodeKey] | None = None
) -> ValidationReport:
    """Aggregate the three structural checks into one report.

    Loop analysis runs on the full graph, orphans included, so tree authors
    see every defect in one pass. ``declared_nodes`` narrows the defined
    universe for the reference-integrity check; by default the tree's own
    derived node set is used.
    """
    defined = tree.nodes if declared_nodes is None else declared_nodes
    return ValidationReport(
        orphans=detect_orphans(tree),
        dangling_edges=tuple(check_reference_integrity(tree.edges, defined)),
        unescapable_loops=tuple(detect_unescapable_loops(tree)),
    )
